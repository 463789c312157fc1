#include "recl/contrast.hpp"

#include <sstream>

#include "recl/csv.hpp"

namespace recl {

std::string method_name(CostMethod m) {
  switch (m) {
    case CostMethod::OR: return "OR";
    case CostMethod::IPW: return "IPW";
    case CostMethod::AIPW: return "AIPW";
  }
  return "?";
}

CostMethod method_from_name(const std::string& name) {
  if (name == "OR" || name == "SMR") return CostMethod::OR;
  if (name == "IPW") return CostMethod::IPW;
  if (name == "AIPW") return CostMethod::AIPW;
  throw InputError("unknown cost method '" + name + "' (OR, IPW or AIPW)");
}

double arm_signal_or(const SmrFit& fit, const Vector& x, int a, double t) {
  return predict_mean(fit, x, a, t);
}

double arm_signal_ipw(double po, int a_obs, int a, double ps_a) {
  return a_obs == a ? po / ps_a : 0.0;
}

double arm_signal_aipw(double po, int a_obs, int a, double ps_a,
                       double mu_star) {
  if (a_obs != a) return mu_star;
  return po / ps_a + (1.0 - 1.0 / ps_a) * mu_star;
}

CostMatrix costs_from_signals(const Matrix& signals, CostMethod method,
                              double t) {
  const Index n = signals.rows();
  const int k = static_cast<int>(signals.cols());
  if (k < 2) throw InputError("cost matrix needs at least two arms");
  CostMatrix cm;
  cm.t = t;
  cm.method = method;
  cm.raw_signals = signals;
  cm.costs.resize(n, k);
  cm.best_label.resize(n);
  for (Index i = 0; i < n; ++i) {
    int best = 0;
    double lo = signals(i, 0);
    for (int a = 1; a < k; ++a) {
      if (signals(i, a) < lo) {  // strict: ties keep the smallest arm
        lo = signals(i, a);
        best = a;
      }
    }
    cm.best_label[i] = best;
    for (int a = 0; a < k; ++a) cm.costs(i, a) = signals(i, a) - lo;
    cm.costs(i, best) = 0.0;  // exact zero at the argmin
  }
  return cm;
}

CostMatrix cost_matrix(const Cohort& cohort, CostMethod method, double t,
                       const SmrFit* fit, const PsModel* ps,
                       const Vector* pos) {
  const Index n = cohort.n();
  const int k = cohort.k;
  const bool needs_fit = method != CostMethod::IPW;
  const bool needs_ps = method != CostMethod::OR;
  if (needs_fit && fit == nullptr)
    throw InputError(method_name(method) +
                     " costs require an outcome-regression fit");
  if (needs_ps && ps == nullptr)
    throw InputError(method_name(method) + " costs require a propensity model");
  if (needs_ps && pos == nullptr)
    throw InputError(method_name(method) +
                     " costs require pseudo-observations");
  if (needs_ps && pos->size() != n)
    throw InputError("pseudo-observation vector length mismatch");

  Matrix signals(n, k);
  for (Index i = 0; i < n; ++i) {
    const Subject& s = cohort.subjects[static_cast<size_t>(i)];
    for (int a = 0; a < k; ++a) {
      switch (method) {
        case CostMethod::OR:
          signals(i, a) = arm_signal_or(*fit, s.covariates, a, t);
          break;
        case CostMethod::IPW:
          signals(i, a) = arm_signal_ipw((*pos)[i], s.treatment, a,
                                         ps_for_subject(*ps, s, a));
          break;
        case CostMethod::AIPW:
          signals(i, a) = arm_signal_aipw(
              (*pos)[i], s.treatment, a, ps_for_subject(*ps, s, a),
              arm_signal_or(*fit, s.covariates, a, t));
          break;
      }
    }
  }
  return costs_from_signals(signals, method, t);
}

BinaryContrast binary_contrast(const Cohort& cohort, CostMethod method,
                               double t, const SmrFit* fit, const PsModel* ps,
                               const Vector* pos) {
  if (cohort.k != 2)
    throw InputError("binary contrast requires exactly two arms, cohort has " +
                     std::to_string(cohort.k));
  const CostMatrix cm = cost_matrix(cohort, method, t, fit, ps, pos);
  BinaryContrast bc;
  bc.contrast = cm.raw_signals.col(1) - cm.raw_signals.col(0);
  bc.label.resize(cm.n());
  for (Index i = 0; i < cm.n(); ++i)
    bc.label[i] = bc.contrast[i] < 0.0 ? 1 : 0;
  return bc;
}

std::string CostMatrix::to_csv(const Cohort& cohort) const {
  std::ostringstream out;
  out << "id";
  for (int a = 0; a < arms(); ++a) out << ",cost_" << a;
  out << ",best_label\n";
  for (Index i = 0; i < n(); ++i) {
    out << cohort.subjects[static_cast<size_t>(i)].id;
    for (int a = 0; a < arms(); ++a)
      out << ',' << csv::format_double(costs(i, a));
    out << ',' << cohort.label_for(best_label[i]) << '\n';
  }
  return out.str();
}

}  // namespace recl
