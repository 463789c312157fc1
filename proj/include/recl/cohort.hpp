#pragma once

#include <string>
#include <vector>

#include "recl/types.hpp"

namespace recl {

/// One subject of the observed sample: covariates, assigned treatment,
/// recurrent event times and right-censoring time. Event times are
/// strictly increasing and lie in (0, censor_time]; an event exactly at
/// the censoring time counts as observed.
struct Subject {
  std::string id;
  Vector covariates;
  int treatment = 0;  // contiguous index in [0, k)
  std::vector<double> event_times;
  double censor_time = 0.0;
};

/// Immutable-by-convention collection of subjects with a shared covariate
/// dimension, arm count and maximum follow-up tau. Built by parse_cohort
/// or the simulation generators; validated at those boundaries.
struct Cohort {
  std::vector<Subject> subjects;
  Index p = 0;
  int k = 0;
  double tau = 0.0;
  std::vector<std::string> covariate_names;   // may be empty
  std::vector<std::string> treatment_labels;  // raw label per index; may be empty

  Index n() const { return static_cast<Index>(subjects.size()); }

  /// n x p matrix of covariate rows, subject order preserved.
  Matrix covariate_matrix() const;

  std::string label_for(int arm) const;
};

/// Column mapping for the long-format CSV. An empty `covariates` list
/// means: every header column not otherwise mapped, in header order.
struct CohortSchema {
  std::string id = "id";
  std::string time = "time";
  std::string status = "status";
  std::string treatment = "treatment";
  std::vector<std::string> covariates;
};

/// Reads a long-format CSV (one row per event plus exactly one status-0
/// row per id carrying the censoring time) into a validated Cohort.
/// Treatments are re-coded to contiguous indices 0..K-1 in ascending
/// order of their raw labels (numeric order when all labels parse as
/// numbers); the raw labels are retained in `treatment_labels`.
/// If tau <= 0 it is set to the largest censoring time.
Cohort parse_cohort(const std::string& text, const CohortSchema& schema = {},
                    double tau = 0.0);

/// Inverse of parse_cohort up to id ordering: emits the long-format CSV.
std::string serialize_cohort(const Cohort& cohort,
                             const CohortSchema& schema = {});

/// Checks every structural invariant (event ordering, event <= censoring,
/// dimensions, arm indices, censoring <= tau). Hard violations throw
/// InputError; soft issues (an arm with no subjects) come back as
/// warnings.
std::vector<std::string> validate_cohort(const Cohort& cohort);

/// Observed count N_i(min(t, C_i)): number of events in [0, t], saturating
/// at the censoring time.
int count_at(const Subject& subject, double t);

/// At-risk indicator Y_i(t) = I(C_i >= t).
int at_risk(const Subject& subject, double t);

}  // namespace recl
