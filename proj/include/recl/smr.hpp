#pragma once

#include <string>

#include "recl/cohort.hpp"
#include "recl/step_function.hpp"
#include "recl/types.hpp"

namespace recl {

struct SmrConfig {
  double tol = 1e-8;  // sup-norm of the score at the solution
  int max_iter = 50;
};

/// Fitted semiparametric multiplicative rates model
///   E[dN(t) | X, A] = exp(theta' Z(X, A)) dmu(t)
/// with Z the design vector of build_design and mu the nonparametric
/// Breslow-type baseline.
struct SmrFit {
  Vector theta;
  StepFunction baseline;  // mu(t): jump d(s) / sum_j Y_j(s) exp(theta'Z_j)
  std::string design_spec;
  int iterations = 0;
  double score_norm = 0.0;
  int arms = 2;
};

/// Design vector Z = (x, block_1, ..., block_{k-1}) with
/// block_j = I(a = j) * (1, x). No intercept in the covariate part (the
/// baseline absorbs it); each treatment block carries its own intercept
/// so arm main effects are identified.
Vector build_design(const Vector& x, int a, int k);

inline Index design_dim(Index p, int k) { return p + (k - 1) * (p + 1); }

/// Solves the estimating equation
///   U(theta) = sum_i int_0^tau { Z_i - Zbar(s; theta) } dN_i(s) = 0
/// by Newton iterations with step-halving; Zbar is the exp(theta'Z)-
/// weighted mean of Z over the risk set. The negative Jacobian is the
/// weighted covariance of Z accumulated over events, checked for full
/// rank at the start and ridge-stabilised (1e-8 on the diagonal) when a
/// step comes out non-finite.
SmrFit fit_smr(const Cohort& cohort, const SmrConfig& config = {});

/// mu*(t, x, a) = exp(theta' Z(x, a)) * mu(t). Zero before the first
/// event knot.
double predict_mean(const SmrFit& fit, const Vector& x, int a, double t);

/// Coefficients, convergence state and baseline knot count, for audit
/// output.
std::string smr_summary(const SmrFit& fit);

}  // namespace recl
