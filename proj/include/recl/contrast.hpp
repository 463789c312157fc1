#pragma once

#include <optional>
#include <string>

#include "recl/cohort.hpp"
#include "recl/propensity.hpp"
#include "recl/smr.hpp"
#include "recl/types.hpp"

namespace recl {

enum class CostMethod { OR, IPW, AIPW };

std::string method_name(CostMethod m);
CostMethod method_from_name(const std::string& name);

/// Estimated misclassification costs at horizon t: per subject and arm,
/// cost = signal(arm) - min over arms of signal, so every row attains 0
/// at `best_label` (argmin, ties to the smallest arm index).
/// `raw_signals` keeps the pre-shift per-arm quantities for audit.
struct CostMatrix {
  double t = 0.0;
  CostMethod method = CostMethod::AIPW;
  Matrix costs;        // n x K, nonnegative, row-min 0
  IntVector best_label;
  Matrix raw_signals;  // n x K

  Index n() const { return costs.rows(); }
  int arms() const { return static_cast<int>(costs.cols()); }

  /// "id,cost_0,...,cost_{K-1},best_label" audit export.
  std::string to_csv(const Cohort& cohort) const;
};

/// Outcome-regression arm signal mu*(t, x, a).
double arm_signal_or(const SmrFit& fit, const Vector& x, int a, double t);

/// Inverse-probability-weighted arm signal I(a_obs = a) * po / ps_a,
/// where ps_a is the (truncated) propensity of the queried arm a.
double arm_signal_ipw(double po, int a_obs, int a, double ps_a);

/// Augmented arm signal
///   I(a_obs = a) po / ps_a + [1 - I(a_obs = a)/ps_a] mu_star,
/// which reduces to mu_star off the observed arm and to po when ps_a = 1
/// on it.
double arm_signal_aipw(double po, int a_obs, int a, double ps_a,
                       double mu_star);

/// Shifts each row of `signals` by its minimum and takes the row argmin
/// as the label. Pure; exposed for the argmin-invariance properties.
CostMatrix costs_from_signals(const Matrix& signals, CostMethod method,
                              double t);

/// Builds the n x K signal matrix for `method` and reduces it with
/// costs_from_signals. Requirements: OR needs `fit`; IPW needs `ps` and
/// `pos`; AIPW needs all three.
CostMatrix cost_matrix(const Cohort& cohort, CostMethod method, double t,
                       const SmrFit* fit = nullptr, const PsModel* ps = nullptr,
                       const Vector* pos = nullptr);

/// Binary contrast C = signal(1) - signal(0) and label W = I(C < 0);
/// |C| is the nonzero entry of the K = 2 cost matrix.
struct BinaryContrast {
  Vector contrast;
  IntVector label;
};

BinaryContrast binary_contrast(const Cohort& cohort, CostMethod method,
                               double t, const SmrFit* fit = nullptr,
                               const PsModel* ps = nullptr,
                               const Vector* pos = nullptr);

}  // namespace recl
