#pragma once

#include <map>
#include <string>
#include <vector>

#include "recl/cohort.hpp"
#include "recl/types.hpp"

namespace recl {

/// One regressor of the propensity model: a covariate index plus an
/// optional transform. Exp covers misspecification studies of the form
/// "A ~ X1 + exp(X3)".
struct PsTerm {
  Index covariate = 0;
  enum class Transform { Identity, Exp } transform = Transform::Identity;
};

struct PsFormula {
  std::vector<PsTerm> terms;

  static PsFormula from_indices(const std::vector<Index>& idx);
  std::string describe(const std::vector<std::string>& names) const;
};

/// Propensity model P(A = a | X): binary logit (K = 2), multinomial logit
/// with arm 0 as reference (K > 2), or an externally supplied per-subject
/// probability table. Predicted probabilities are clipped to
/// [eps, 1 - eps] with eps = 1e-3 and renormalised, which caps inverse
/// weights at about 1/eps.
struct PsModel {
  enum class Kind { BinaryLogit, MultinomialLogit, ExternalTable };
  Kind kind = Kind::BinaryLogit;
  int arms = 2;
  PsFormula formula;
  // (K-1) x (q+1) coefficients on (1, features), row j for arm j+1.
  Matrix coefficients;
  std::map<std::string, Vector> table;  // external kind only
  std::vector<std::string> warnings;
  int iterations = 0;
  double grad_norm = 0.0;
  std::vector<double> ll_trace;  // penalised log-likelihood per iteration

  static constexpr double kClipEps = 1e-3;
};

struct PsConfig {
  double tol = 1e-8;  // sup-norm of the (penalised) score
  int max_iter = 100;
  double separation_coef_norm = 30.0;  // trips the 1e-6 ridge
  double ridge = 1e-6;
};

/// Maximum-likelihood logit fit by Newton with step-halving. When the
/// coefficient norm crosses `separation_coef_norm` the fit restarts the
/// objective with the ridge penalty and records a warning (separated
/// data would otherwise diverge).
PsModel fit_propensity(const Cohort& cohort, const PsFormula& formula,
                       const PsConfig& config = {});

/// Convenience overload: identity terms on the given covariate indices
/// (all covariates when empty).
PsModel fit_propensity(const Cohort& cohort,
                       const std::vector<Index>& covariates = {},
                       const PsConfig& config = {});

/// Forces the multinomial parameterisation even at K = 2; fit_propensity
/// delegates here for K > 2. Exposed so the two can be compared.
PsModel fit_multinomial_logit(const Cohort& cohort, const PsFormula& formula,
                              const PsConfig& config = {});

/// Full probability vector at x (clipped and renormalised). Not available
/// for table-backed models, which are keyed by subject id.
Vector predict_ps_all(const PsModel& model, const Vector& x);

double predict_ps(const PsModel& model, const Vector& x, int a);

/// Probability of arm a for a cohort subject; resolves table-backed
/// models by id and parametric ones through the covariates.
double ps_for_subject(const PsModel& model, const Subject& subject, int a);

/// Parses "id,ps_0,...,ps_{K-1}": every probability in (0,1), every row
/// summing to 1 within 1e-6.
PsModel load_external_ps(const std::string& text);

/// Per-subject probability table in the external-PS schema; reloading it
/// reproduces ps_for_subject exactly.
std::string export_ps_table(const PsModel& model, const Cohort& cohort);

std::string ps_summary(const PsModel& model,
                       const std::vector<std::string>& covariate_names);

}  // namespace recl
