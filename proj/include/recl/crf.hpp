#pragma once

#include <string>
#include <vector>

#include "recl/cohort.hpp"
#include "recl/step_function.hpp"
#include "recl/types.hpp"

namespace recl {

/// Marginal cumulative rate function estimate: a jump of d(s)/R(s) at
/// each distinct event time s, with d(s) the events at s across subjects
/// and R(s) = sum_j I(C_j >= s) the risk set.
StepFunction nelson_aalen(const Cohort& cohort);

/// Same estimator restricted to the subjects named in `member`.
StepFunction group_crf(const Cohort& cohort,
                       const std::vector<std::string>& member);

/// Jackknife pseudo-observations of the cumulative rate function at t:
/// PO_i = n * L(t) - (n-1) * L^{-i}(t). Uses the leave-one-out identity
/// L^{-i}(t) = sum_{s<=t} (d(s) - dN_i(s)) / (R(s) - Y_i(s)), one pass
/// over event times per subject. Each increment is evaluated as a single
/// rational expression, so with no censoring before t the result is the
/// observed count N_i(t) exactly.
Vector pseudo_observations(const Cohort& cohort, double t);

/// One pass over the knots for several horizons; column j holds the
/// pseudo-observations at times[j].
Matrix pseudo_observations_grid(const Cohort& cohort,
                                const std::vector<double>& times);

/// Reference implementation that refits the Nelson-Aalen estimator n
/// times; O(n^2 E). Kept as the verification oracle for
/// pseudo_observations.
Vector pseudo_observations_naive(const Cohort& cohort, double t);

}  // namespace recl
