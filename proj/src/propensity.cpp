#include "recl/propensity.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <set>
#include <sstream>

#include "recl/csv.hpp"

namespace recl {

PsFormula PsFormula::from_indices(const std::vector<Index>& idx) {
  PsFormula f;
  for (Index j : idx) f.terms.push_back({j, PsTerm::Transform::Identity});
  return f;
}

std::string PsFormula::describe(const std::vector<std::string>& names) const {
  std::ostringstream out;
  out << "1";
  for (const auto& term : terms) {
    std::string base = term.covariate < static_cast<Index>(names.size())
                           ? names[static_cast<size_t>(term.covariate)]
                           : "x" + std::to_string(term.covariate + 1);
    out << " + ";
    if (term.transform == PsTerm::Transform::Exp)
      out << "exp(" << base << ")";
    else
      out << base;
  }
  return out.str();
}

namespace {

Vector feature_row(const PsFormula& formula, const Vector& x) {
  Vector f(static_cast<Index>(formula.terms.size()) + 1);
  f[0] = 1.0;
  for (size_t j = 0; j < formula.terms.size(); ++j) {
    const auto& term = formula.terms[j];
    if (term.covariate < 0 || term.covariate >= x.size())
      throw InputError("propensity formula references covariate index " +
                       std::to_string(term.covariate) + " beyond dimension " +
                       std::to_string(x.size()));
    double v = x[term.covariate];
    if (term.transform == PsTerm::Transform::Exp) v = std::exp(v);
    f[static_cast<Index>(j) + 1] = v;
  }
  return f;
}

Matrix design_matrix(const Cohort& cohort, const PsFormula& formula) {
  Matrix f(cohort.n(), static_cast<Index>(formula.terms.size()) + 1);
  for (Index i = 0; i < cohort.n(); ++i)
    f.row(i) = feature_row(formula, cohort.subjects[static_cast<size_t>(i)]
                                        .covariates);
  return f;
}

void check_arms_and_rank(const Cohort& cohort, const Matrix& f) {
  std::set<int> seen;
  for (const auto& s : cohort.subjects) seen.insert(s.treatment);
  if (seen.size() < 2)
    throw InputError("propensity: fewer than two treatment arms present");
  Eigen::ColPivHouseholderQR<Matrix> qr(f);
  if (qr.rank() < f.cols())
    throw InputError("propensity: design not of full column rank");
}

// Class probabilities for one subject given the (K-1) x q coefficient
// matrix, arm 0 as reference.
Vector class_probs(const Matrix& beta, const Vector& f) {
  const Index k = beta.rows() + 1;
  Vector eta(k);
  eta[0] = 0.0;
  eta.tail(k - 1) = beta * f;
  const double m = eta.maxCoeff();
  Vector ex = (eta.array() - m).exp();
  return ex / ex.sum();
}

double log_likelihood(const Matrix& f, const std::vector<int>& arm,
                      const Matrix& beta, double ridge) {
  double ll = 0.0;
  for (Index i = 0; i < f.rows(); ++i) {
    const Vector probs = class_probs(beta, f.row(i).transpose());
    ll += std::log(probs[arm[static_cast<size_t>(i)]]);
  }
  return ll - 0.5 * ridge * beta.squaredNorm();
}

void grad_and_hess(const Matrix& f, const std::vector<int>& arm,
                   const Matrix& beta, double ridge, Vector* grad,
                   Matrix* hess) {
  const Index q = f.cols();
  const Index k1 = beta.rows();  // K - 1
  const Index dim = k1 * q;
  *grad = Vector::Zero(dim);
  *hess = Matrix::Zero(dim, dim);
  for (Index i = 0; i < f.rows(); ++i) {
    const Vector fi = f.row(i).transpose();
    const Vector probs = class_probs(beta, fi);
    const int a = arm[static_cast<size_t>(i)];
    for (Index j = 0; j < k1; ++j) {
      const double resid =
          (a == static_cast<int>(j) + 1 ? 1.0 : 0.0) - probs[j + 1];
      grad->segment(j * q, q) += resid * fi;
      for (Index l = 0; l < k1; ++l) {
        const double w =
            probs[j + 1] * ((j == l ? 1.0 : 0.0) - probs[l + 1]);
        hess->block(j * q, l * q, q, q).noalias() += w * fi * fi.transpose();
      }
    }
  }
  for (Index j = 0; j < k1; ++j)
    grad->segment(j * q, q) -= ridge * beta.row(j).transpose();
  hess->diagonal().array() += ridge;
}

// Generic Newton driver shared by the binary and multinomial routes.
// `eval_ll` and `eval_derivs` see the flattened coefficient vector.
PsModel newton_fit(const Cohort& cohort, const PsFormula& formula,
                   const PsConfig& config, PsModel::Kind kind, Index dim,
                   const std::function<double(const Vector&, double)>& eval_ll,
                   const std::function<void(const Vector&, double, Vector*,
                                            Matrix*)>& eval_derivs) {
  PsModel model;
  model.kind = kind;
  model.arms = cohort.k;
  model.formula = formula;

  Vector beta = Vector::Zero(dim);
  double ridge = 0.0;
  double ll = eval_ll(beta, ridge);
  model.ll_trace.push_back(ll);
  Vector grad;
  Matrix hess;
  eval_derivs(beta, ridge, &grad, &hess);

  int it = 0;
  while (grad.lpNorm<Eigen::Infinity>() >= config.tol) {
    if (it >= config.max_iter)
      throw NumericError("propensity: no convergence after " +
                         std::to_string(config.max_iter) + " iterations");
    Vector delta = Eigen::LDLT<Matrix>(hess).solve(grad);
    if (!delta.allFinite()) {
      Matrix h = hess;
      h.diagonal().array() += 1e-8;
      delta = Eigen::LDLT<Matrix>(h).solve(grad);
    }
    double step = 1.0;
    Vector candidate;
    double cand_ll = 0.0;
    // Near the optimum the likelihood is flat to machine precision while
    // the gradient still exceeds the tolerance; accept steps within
    // rounding of the current value so Newton keeps its quadratic tail.
    const double slack = 1e-10 * (1.0 + std::abs(ll));
    for (int halvings = 0;; ++halvings) {
      if (halvings > 40)
        throw NumericError("propensity: step-halving failed at iteration " +
                           std::to_string(it));
      candidate = beta + step * delta;
      cand_ll = eval_ll(candidate, ridge);
      if (std::isfinite(cand_ll) && cand_ll >= ll - slack) break;
      step *= 0.5;
    }
    beta = candidate;
    ll = cand_ll;
    if (ridge == 0.0 &&
        beta.lpNorm<Eigen::Infinity>() > config.separation_coef_norm) {
      ridge = config.ridge;
      model.warnings.push_back(
          "separation detected (coefficient norm > " +
          csv::format_double(config.separation_coef_norm) + "); ridge " +
          csv::format_double(ridge) + " applied");
      ll = eval_ll(beta, ridge);
    }
    model.ll_trace.push_back(ll);
    eval_derivs(beta, ridge, &grad, &hess);
    ++it;
  }
  const Index q = static_cast<Index>(formula.terms.size()) + 1;
  model.coefficients =
      Eigen::Map<const Matrix>(beta.data(), q, dim / q).transpose();
  model.iterations = it;
  model.grad_norm = grad.lpNorm<Eigen::Infinity>();
  return model;
}

PsModel newton_multinomial(const Cohort& cohort, const PsFormula& formula,
                           const PsConfig& config, PsModel::Kind kind) {
  const Matrix f = design_matrix(cohort, formula);
  check_arms_and_rank(cohort, f);
  std::vector<int> arm(static_cast<size_t>(cohort.n()));
  for (Index i = 0; i < cohort.n(); ++i)
    arm[static_cast<size_t>(i)] =
        cohort.subjects[static_cast<size_t>(i)].treatment;
  const Index q = f.cols();
  const Index k1 = static_cast<Index>(cohort.k) - 1;

  auto unflatten = [q, k1](const Vector& v) {
    return Matrix(Eigen::Map<const Matrix>(v.data(), q, k1).transpose());
  };
  auto eval_ll = [&](const Vector& v, double ridge) {
    return log_likelihood(f, arm, unflatten(v), ridge);
  };
  auto eval_derivs = [&](const Vector& v, double ridge, Vector* g, Matrix* h) {
    grad_and_hess(f, arm, unflatten(v), ridge, g, h);
  };
  return newton_fit(cohort, formula, config, kind, k1 * q, eval_ll,
                    eval_derivs);
}

// Dedicated Bernoulli route for K = 2; kept separate from the multinomial
// code so the two can cross-check each other.
PsModel newton_binary(const Cohort& cohort, const PsFormula& formula,
                      const PsConfig& config) {
  const Matrix f = design_matrix(cohort, formula);
  check_arms_and_rank(cohort, f);
  const Index n = f.rows();
  Vector y(n);
  for (Index i = 0; i < n; ++i)
    y[i] = cohort.subjects[static_cast<size_t>(i)].treatment == 1 ? 1.0 : 0.0;

  auto eval_ll = [&](const Vector& beta, double ridge) {
    double ll = 0.0;
    for (Index i = 0; i < n; ++i) {
      const double eta = f.row(i).dot(beta);
      // log expit(eta) resp. log(1 - expit(eta)), stable in both tails
      ll += y[i] * eta - (eta > 0.0 ? eta + std::log1p(std::exp(-eta))
                                    : std::log1p(std::exp(eta)));
    }
    return ll - 0.5 * ridge * beta.squaredNorm();
  };
  auto eval_derivs = [&](const Vector& beta, double ridge, Vector* grad,
                         Matrix* hess) {
    *grad = Vector::Zero(f.cols());
    *hess = Matrix::Zero(f.cols(), f.cols());
    for (Index i = 0; i < n; ++i) {
      const double p = 1.0 / (1.0 + std::exp(-f.row(i).dot(beta)));
      *grad += (y[i] - p) * f.row(i).transpose();
      hess->noalias() += p * (1.0 - p) * f.row(i).transpose() * f.row(i);
    }
    *grad -= ridge * beta;
    hess->diagonal().array() += ridge;
  };
  return newton_fit(cohort, formula, config, PsModel::Kind::BinaryLogit,
                    f.cols(), eval_ll, eval_derivs);
}

}  // namespace

PsModel fit_propensity(const Cohort& cohort, const PsFormula& formula,
                       const PsConfig& config) {
  if (cohort.k == 2) return newton_binary(cohort, formula, config);
  return newton_multinomial(cohort, formula, config,
                            PsModel::Kind::MultinomialLogit);
}

PsModel fit_propensity(const Cohort& cohort,
                       const std::vector<Index>& covariates,
                       const PsConfig& config) {
  std::vector<Index> idx = covariates;
  if (idx.empty())
    for (Index j = 0; j < cohort.p; ++j) idx.push_back(j);
  return fit_propensity(cohort, PsFormula::from_indices(idx), config);
}

PsModel fit_multinomial_logit(const Cohort& cohort, const PsFormula& formula,
                              const PsConfig& config) {
  return newton_multinomial(cohort, formula, config,
                            PsModel::Kind::MultinomialLogit);
}

Vector predict_ps_all(const PsModel& model, const Vector& x) {
  if (model.kind == PsModel::Kind::ExternalTable)
    throw InputError("external propensity table is keyed by subject id");
  const Vector f = feature_row(model.formula, x);
  Vector probs = class_probs(model.coefficients, f);
  // Truncate for weight stability, then renormalise.
  probs = probs.cwiseMax(PsModel::kClipEps).cwiseMin(1.0 - PsModel::kClipEps);
  return probs / probs.sum();
}

double predict_ps(const PsModel& model, const Vector& x, int a) {
  if (a < 0 || a >= model.arms)
    throw InputError("propensity: arm index out of range");
  return predict_ps_all(model, x)[a];
}

double ps_for_subject(const PsModel& model, const Subject& subject, int a) {
  if (model.kind != PsModel::Kind::ExternalTable)
    return predict_ps(model, subject.covariates, a);
  auto it = model.table.find(subject.id);
  if (it == model.table.end())
    throw InputError("external propensity table has no row for subject '" +
                     subject.id + "'");
  if (a < 0 || a >= it->second.size())
    throw InputError("propensity: arm index out of range");
  return it->second[a];
}

PsModel load_external_ps(const std::string& text) {
  auto table = csv::parse_csv(text);
  if (table.header.empty() || table.header[0] != "id")
    throw InputError("external propensity table must start with an id column");
  const int k = static_cast<int>(table.header.size()) - 1;
  if (k < 2) throw InputError("external propensity table needs >= 2 arms");
  for (int a = 0; a < k; ++a)
    if (table.header[static_cast<size_t>(a) + 1] != "ps_" + std::to_string(a))
      throw InputError("external propensity table: expected column ps_" +
                       std::to_string(a));
  PsModel model;
  model.kind = PsModel::Kind::ExternalTable;
  model.arms = k;
  for (const auto& row : table.rows) {
    Vector probs(k);
    double sum = 0.0;
    for (int a = 0; a < k; ++a) {
      const double v = csv::parse_double(row[static_cast<size_t>(a) + 1],
                                         "propensity of id '" + row[0] + "'");
      if (!(v > 0.0 && v < 1.0))
        throw InputError("propensity of id '" + row[0] +
                         "' outside (0, 1)");
      probs[a] = v;
      sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-6)
      throw InputError("propensity row of id '" + row[0] +
                       "' sums to " + csv::format_double(sum));
    if (!model.table.emplace(row[0], std::move(probs)).second)
      throw InputError("duplicate propensity row for id '" + row[0] + "'");
  }
  if (model.table.empty()) throw InputError("external propensity table empty");
  return model;
}

std::string export_ps_table(const PsModel& model, const Cohort& cohort) {
  std::ostringstream out;
  out << "id";
  for (int a = 0; a < model.arms; ++a) out << ",ps_" << a;
  out << '\n';
  for (const auto& s : cohort.subjects) {
    out << s.id;
    for (int a = 0; a < model.arms; ++a)
      out << ',' << csv::format_double(ps_for_subject(model, s, a));
    out << '\n';
  }
  return out.str();
}

std::string ps_summary(const PsModel& model,
                       const std::vector<std::string>& covariate_names) {
  std::ostringstream out;
  switch (model.kind) {
    case PsModel::Kind::BinaryLogit:
      out << "binary logistic propensity model\n";
      break;
    case PsModel::Kind::MultinomialLogit:
      out << "multinomial logistic propensity model (arm 0 reference)\n";
      break;
    case PsModel::Kind::ExternalTable:
      out << "external propensity table (" << model.table.size()
          << " subjects)\n";
      return out.str();
  }
  out << "formula: arm ~ " << model.formula.describe(covariate_names) << "\n";
  for (Index j = 0; j < model.coefficients.rows(); ++j) {
    out << "arm " << (j + 1) << " coefficients:";
    for (Index c = 0; c < model.coefficients.cols(); ++c)
      out << ' ' << csv::format_double(model.coefficients(j, c));
    out << '\n';
  }
  out << "iterations: " << model.iterations
      << "\ngrad_norm: " << csv::format_double(model.grad_norm) << '\n';
  for (const auto& w : model.warnings) out << "warning: " << w << '\n';
  return out.str();
}

}  // namespace recl
