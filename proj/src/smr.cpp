#include "recl/smr.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

#include "recl/csv.hpp"

namespace recl {

Vector build_design(const Vector& x, int a, int k) {
  const Index p = x.size();
  Vector z = Vector::Zero(design_dim(p, k));
  z.head(p) = x;
  if (a > 0) {
    const Index offset = p + static_cast<Index>(a - 1) * (p + 1);
    z[offset] = 1.0;
    z.segment(offset + 1, p) = x;
  }
  return z;
}

namespace {

struct RiskPass {
  Vector score;        // U(theta)
  Matrix curvature;    // sum_s d(s) V(s; theta), the minus-Jacobian
  Vector s0_by_event;  // sum_{j at risk} exp(theta'Z_j) per distinct time
  bool finite = true;
};

struct SmrData {
  Matrix design;                    // n x dim
  std::vector<double> censor;      // per subject
  std::vector<Index> by_censor;    // subject order, censoring descending
  std::vector<double> event_times; // distinct, descending
  std::vector<double> event_mult;  // d(s)
  std::vector<Vector> event_zsum;  // sum of Z over events at s
};

SmrData prepare(const Cohort& cohort) {
  SmrData data;
  const Index n = cohort.n();
  const Index dim = design_dim(cohort.p, cohort.k);
  data.design.resize(n, dim);
  data.censor.resize(static_cast<size_t>(n));
  for (Index i = 0; i < n; ++i) {
    const Subject& s = cohort.subjects[static_cast<size_t>(i)];
    data.design.row(i) = build_design(s.covariates, s.treatment, cohort.k);
    data.censor[static_cast<size_t>(i)] = s.censor_time;
  }
  data.by_censor.resize(static_cast<size_t>(n));
  std::iota(data.by_censor.begin(), data.by_censor.end(), Index{0});
  std::sort(data.by_censor.begin(), data.by_censor.end(),
            [&](Index a, Index b) {
              return data.censor[static_cast<size_t>(a)] >
                     data.censor[static_cast<size_t>(b)];
            });

  std::map<double, std::pair<double, Vector>> events;  // time -> (d, Zsum)
  for (Index i = 0; i < n; ++i) {
    const Subject& s = cohort.subjects[static_cast<size_t>(i)];
    for (double e : s.event_times) {
      auto [it, inserted] =
          events.try_emplace(e, 0.0, Vector::Zero(dim).eval());
      it->second.first += 1.0;
      it->second.second += data.design.row(i).transpose();
    }
  }
  for (auto it = events.rbegin(); it != events.rend(); ++it) {
    data.event_times.push_back(it->first);
    data.event_mult.push_back(it->second.first);
    data.event_zsum.push_back(std::move(it->second.second));
  }
  return data;
}

// One descending sweep over event times, growing the risk set as the
// time drops past each subject's censoring time.
RiskPass evaluate(const SmrData& data, const Vector& theta) {
  const Index dim = data.design.cols();
  RiskPass pass;
  pass.score = Vector::Zero(dim);
  pass.curvature = Matrix::Zero(dim, dim);
  pass.s0_by_event.resize(static_cast<Index>(data.event_times.size()));

  double s0 = 0.0;
  Vector s1 = Vector::Zero(dim);
  Matrix s2 = Matrix::Zero(dim, dim);
  size_t ptr = 0;
  for (size_t j = 0; j < data.event_times.size(); ++j) {
    const double s = data.event_times[j];
    while (ptr < data.by_censor.size() &&
           data.censor[static_cast<size_t>(data.by_censor[ptr])] >= s) {
      const Index i = data.by_censor[ptr];
      const double w = std::exp(theta.dot(data.design.row(i)));
      if (!std::isfinite(w)) {
        pass.finite = false;
        return pass;
      }
      s0 += w;
      s1 += w * data.design.row(i).transpose();
      s2.noalias() += w * data.design.row(i).transpose() * data.design.row(i);
      ++ptr;
    }
    const Vector zbar = s1 / s0;
    pass.score += data.event_zsum[j] - data.event_mult[j] * zbar;
    pass.curvature.noalias() +=
        data.event_mult[j] * (s2 / s0 - zbar * zbar.transpose());
    pass.s0_by_event[static_cast<Index>(j)] = s0;
  }
  if (!pass.score.allFinite() || !pass.curvature.allFinite())
    pass.finite = false;
  return pass;
}

}  // namespace

SmrFit fit_smr(const Cohort& cohort, const SmrConfig& config) {
  if (cohort.n() == 0) throw InputError("smr: empty cohort");
  const Index dim = design_dim(cohort.p, cohort.k);
  SmrData data = prepare(cohort);
  if (data.event_times.empty()) throw InputError("smr: no events in cohort");

  Vector theta = Vector::Zero(dim);
  RiskPass pass = evaluate(data, theta);

  {
    Eigen::ColPivHouseholderQR<Matrix> qr(pass.curvature);
    if (qr.rank() < dim)
      throw InputError(
          "smr: design rank deficient on the at-risk sets (rank " +
          std::to_string(qr.rank()) + " of " + std::to_string(dim) + ")");
  }

  int iterations = 0;
  double score_norm = pass.score.lpNorm<Eigen::Infinity>();
  while (score_norm >= config.tol) {
    if (iterations >= config.max_iter)
      throw NumericError("smr: no convergence after " +
                         std::to_string(config.max_iter) +
                         " iterations (score norm " +
                         csv::format_double(score_norm) + ")");
    Matrix h = pass.curvature;
    Vector delta;
    {
      Eigen::LDLT<Matrix> ldlt(h);
      delta = ldlt.solve(pass.score);
      if (ldlt.info() != Eigen::Success || !delta.allFinite()) {
        h.diagonal().array() += 1e-8;  // ridge fallback for a singular step
        delta = Eigen::LDLT<Matrix>(h).solve(pass.score);
      }
    }
    double step = 1.0;
    int halvings = 0;
    for (;; ++halvings) {
      if (halvings > 30)
        throw NumericError("smr: step-halving failed at iteration " +
                           std::to_string(iterations));
      const Vector candidate = theta + step * delta;
      RiskPass next = evaluate(data, candidate);
      if (next.finite &&
          next.score.lpNorm<Eigen::Infinity>() < score_norm) {
        theta = candidate;
        pass = std::move(next);
        break;
      }
      step *= 0.5;
    }
    score_norm = pass.score.lpNorm<Eigen::Infinity>();
    ++iterations;
  }

  // Breslow-type baseline: jump d(s) / S0(s; theta) at each event time.
  // The sweep stored S0 in descending time order.
  const size_t m = data.event_times.size();
  std::vector<double> knots(m), values(m);
  double acc = 0.0;
  for (size_t j = 0; j < m; ++j) {
    const size_t rev = m - 1 - j;
    knots[j] = data.event_times[rev];
    acc += data.event_mult[rev] / pass.s0_by_event[static_cast<Index>(rev)];
    values[j] = acc;
  }

  SmrFit fit;
  fit.theta = theta;
  fit.baseline = StepFunction(std::move(knots), std::move(values));
  fit.iterations = iterations;
  fit.score_norm = score_norm;
  fit.arms = cohort.k;
  std::ostringstream spec;
  spec << "Z = (x[1.." << cohort.p << "]";
  for (int a = 1; a < cohort.k; ++a)
    spec << ", I(a=" << a << ")*(1, x)";
  spec << ")";
  fit.design_spec = spec.str();
  return fit;
}

double predict_mean(const SmrFit& fit, const Vector& x, int a, double t) {
  const Vector z = build_design(x, a, fit.arms);
  return std::exp(fit.theta.dot(z)) * fit.baseline(t);
}

std::string smr_summary(const SmrFit& fit) {
  std::ostringstream out;
  out << "semiparametric multiplicative rates fit\n";
  out << "design: " << fit.design_spec << "\n";
  out << "coefficients:";
  for (Index j = 0; j < fit.theta.size(); ++j)
    out << ' ' << csv::format_double(fit.theta[j]);
  out << "\niterations: " << fit.iterations
      << "\nscore_norm: " << csv::format_double(fit.score_norm)
      << "\nbaseline_knots: " << fit.baseline.knots().size() << "\n";
  return out.str();
}

}  // namespace recl
