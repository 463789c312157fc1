#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "recl/cohort.hpp"
#include "recl/contrast.hpp"
#include "recl/crf.hpp"
#include "recl/propensity.hpp"
#include "recl/smr.hpp"
#include "recl/tree.hpp"
#include "recl/types.hpp"

namespace recl {

/// End-to-end fitting configuration: which cost estimator, at which
/// horizon, where the propensities come from, and how the tree is grown.
struct RunConfig {
  CostMethod method = CostMethod::AIPW;
  double t = 0.0;
  // IPW/AIPW need one propensity source: a covariate formula to fit, or
  // an external per-subject table. Neither given is an error.
  std::vector<Index> ps_covariates;
  std::string ps_external_path;
  TreeConfig tree;
  SmrConfig smr;
  std::uint64_t seed = 0;  // recorded in the manifest; the fit is deterministic
};

/// Everything a fit produces: the regime plus the audit trail.
struct FitResult {
  TreeRegime tree;
  CostMatrix costs;
  std::optional<SmrFit> smr;
  std::optional<PsModel> ps;
  Vector pos;  // pseudo-observations when the method needed them
  std::vector<std::string> warnings;
};

/// Pseudo-observations (IPW/AIPW) -> SMR fit (OR/AIPW) -> propensity
/// (IPW/AIPW) -> cost matrix -> data-space expansion -> weighted tree.
/// Errors from a stage are rethrown with the stage name prefixed.
FitResult fit_itr(const Cohort& cohort, const RunConfig& config);

/// Binary-treatment route through binary_contrast; produces the same
/// tree as fit_itr on K = 2 cohorts.
FitResult fit_itr_binary(const Cohort& cohort, const RunConfig& config);

/// Plain-text "key = value" configuration file; '#' starts a comment.
std::map<std::string, std::string> parse_config(const std::string& text);

}  // namespace recl
