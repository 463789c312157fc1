#pragma once

#include <string>
#include <vector>

#include "recl/cohort.hpp"
#include "recl/propensity.hpp"
#include "recl/step_function.hpp"
#include "recl/tree.hpp"
#include "recl/types.hpp"

namespace recl {

/// Inverse-propensity-weighted mean of the pseudo-observations over the
/// subjects whose observed arm matches the regime:
///   sum_i PO_i(t) I(A_i = g_i) / ps(A_i, X_i)
///   -------------------------------------------
///   sum_i         I(A_i = g_i) / ps(A_i, X_i)
/// The weight uses the probability of the *received* arm. Errors when no
/// subject is concordant.
double empirical_value(const Cohort& cohort,
                       const std::function<int(const Vector&)>& regime,
                       const PsModel& ps, double t,
                       const std::string& regime_name = "regime");

double empirical_value(const Cohort& cohort, const TreeRegime& regime,
                       const PsModel& ps, double t);

/// Ids partitioned by I(A_i = regime(X_i)); disjoint and exhaustive.
struct ConcordanceSplit {
  std::vector<std::string> concordant;
  std::vector<std::string> disconcordant;
};

ConcordanceSplit concordance_split(
    const Cohort& cohort, const std::function<int(const Vector&)>& regime);

ConcordanceSplit concordance_split(const Cohort& cohort,
                                   const TreeRegime& regime);

/// Per-group Nelson-Aalen curves sampled on `grid` as "time,value" CSV
/// text. These are unadjusted subgroup curves; an empty group yields a
/// header-only file.
struct GroupCrfCsvs {
  std::string concordant_csv;
  std::string disconcordant_csv;
};

GroupCrfCsvs export_group_crfs(const Cohort& cohort,
                               const ConcordanceSplit& split,
                               const std::vector<double>& grid);

/// Minimal SVG rendering of step curves, one polyline per curve.
std::string step_curves_svg(const std::vector<StepFunction>& curves,
                            const std::vector<std::string>& labels,
                            double t_max);

}  // namespace recl
