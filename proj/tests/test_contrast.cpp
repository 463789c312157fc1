#include <doctest.h>

#include <cmath>

#include "recl/contrast.hpp"
#include "recl/crf.hpp"
#include "recl/sim.hpp"
#include "recl/smr.hpp"

using namespace recl;

TEST_CASE("ipw arm signal") {
  CHECK(arm_signal_ipw(2.0, 1, 1, 0.5) == doctest::Approx(4.0));
  CHECK(arm_signal_ipw(2.0, 1, 0, 0.5) == 0.0);       // indicator off
  CHECK(arm_signal_ipw(-0.5, 0, 0, 0.25) == -2.0);    // negative POs pass through
}

TEST_CASE("aipw arm signal") {
  CHECK(arm_signal_aipw(2.0, 1, 0, 0.5, 1.3) == 1.3);  // off-arm: mu* exactly
  CHECK(arm_signal_aipw(2.0, 1, 1, 1.0, 1.3) == doctest::Approx(2.0));
  CHECK(arm_signal_aipw(2.0, 1, 1, 0.5, 1.0) == doctest::Approx(3.0));
}

TEST_CASE("costs_from_signals shifts rows to a zero minimum") {
  Matrix signals(2, 2);
  signals << 1.0, 0.4,  // arm 1 better
      0.2, 0.9;
  const CostMatrix cm = costs_from_signals(signals, CostMethod::OR, 2.0);
  CHECK(cm.costs(0, 0) == doctest::Approx(0.6));
  CHECK(cm.costs(0, 1) == 0.0);
  CHECK(cm.best_label[0] == 1);
  CHECK(cm.best_label[1] == 0);
  // K = 2 reconciliation: W = I(C < 0) with C = s1 - s0
  CHECK(cm.best_label[0] == (signals(0, 1) - signals(0, 0) < 0 ? 1 : 0));
}

TEST_CASE("sparse IPW row with tie-break to the smallest arm") {
  Matrix signals(1, 3);
  signals << 0.0, 6.0, 0.0;  // a_obs = 1, po = 3, ps = 0.5
  const CostMatrix cm = costs_from_signals(signals, CostMethod::IPW, 1.0);
  CHECK(cm.costs(0, 0) == 0.0);
  CHECK(cm.costs(0, 1) == 6.0);
  CHECK(cm.costs(0, 2) == 0.0);
  CHECK(cm.best_label[0] == 0);
}

TEST_CASE("row-shift invariance of costs and labels") {
  Rng rng(5, 0, 0);
  for (int r = 0; r < 20; ++r) {
    Matrix signals(4, 3);
    for (Index i = 0; i < 4; ++i)
      for (Index a = 0; a < 3; ++a) signals(i, a) = rng.normal();
    const CostMatrix base = costs_from_signals(signals, CostMethod::AIPW, 1.0);
    Matrix shifted = signals;
    for (Index i = 0; i < 4; ++i) shifted.row(i).array() += rng.normal();
    const CostMatrix moved = costs_from_signals(shifted, CostMethod::AIPW, 1.0);
    for (Index i = 0; i < 4; ++i) {
      CHECK(moved.best_label[i] == base.best_label[i]);
      for (Index a = 0; a < 3; ++a)
        CHECK(moved.costs(i, a) == doctest::Approx(base.costs(i, a)));
      CHECK(base.costs.row(i).minCoeff() == 0.0);
    }
  }
}

TEST_CASE("binary contrast boundary and sign conventions") {
  // Direct construction through signals: C = 0 must map to W = 0.
  Matrix signals(2, 2);
  signals << 1.0, 1.0,   // C = 0
      0.7, 0.2;          // C = -0.5
  const CostMatrix cm = costs_from_signals(signals, CostMethod::OR, 1.0);
  CHECK(cm.best_label[0] == 0);  // strict inequality I(C < 0)
  CHECK(cm.best_label[1] == 1);
}

TEST_CASE("aipw cost matrix against a scalar recomputation") {
  // Models fitted on the full cohort; the first five rows of the cost
  // matrix recomputed cell by cell with plain scalar arithmetic,
  // independent of the matrix code path.
  Rng rng(77, 0, 0);
  const Cohort cohort = random_cohort(rng, 40, 2);
  const double t = 3.0;
  const SmrFit fit = fit_smr(cohort);
  const PsModel ps = fit_propensity(cohort, std::vector<Index>{0});
  const Vector pos = pseudo_observations(cohort, t);
  const CostMatrix cm = cost_matrix(cohort, CostMethod::AIPW, t, &fit, &ps,
                                    &pos);
  for (Index i = 0; i < 5; ++i) {
    const Subject& s = cohort.subjects[static_cast<size_t>(i)];
    double signal[2];
    for (int a = 0; a < 2; ++a) {
      const double pa = ps_for_subject(ps, s, a);
      const double mu = std::exp(fit.theta.dot(build_design(
                            s.covariates, a, 2))) *
                        fit.baseline(t);
      const double ind = s.treatment == a ? 1.0 : 0.0;
      signal[a] = ind * pos[i] / pa + (1.0 - ind / pa) * mu;
    }
    const double lo = std::min(signal[0], signal[1]);
    CHECK(cm.costs(i, 0) == doctest::Approx(signal[0] - lo).epsilon(1e-12));
    CHECK(cm.costs(i, 1) == doctest::Approx(signal[1] - lo).epsilon(1e-12));
    CHECK(cm.best_label[i] == (signal[1] < signal[0] ? 1 : 0));
  }
}

TEST_CASE("cost_matrix validates its inputs per method") {
  Rng rng(9, 0, 0);
  const Cohort cohort = random_cohort(rng, 10, 2);
  const Vector pos = pseudo_observations(cohort, 3.0);
  const PsModel ps = fit_propensity(cohort, std::vector<Index>{0});
  CHECK_THROWS_AS(cost_matrix(cohort, CostMethod::OR, 3.0), InputError);
  CHECK_THROWS_AS(cost_matrix(cohort, CostMethod::IPW, 3.0, nullptr, &ps),
                  InputError);
  CHECK_THROWS_AS(
      cost_matrix(cohort, CostMethod::AIPW, 3.0, nullptr, &ps, &pos),
      InputError);
  CHECK_THROWS_AS(binary_contrast(random_cohort(rng, 10, 3),
                                  CostMethod::IPW, 3.0, nullptr, &ps, &pos),
                  InputError);  // K != 2
}

TEST_CASE("Monte-Carlo: IPW signals are marginally unbiased") {
  // Scenario-1 style data with the exact propensity; the mean IPW signal
  // per arm estimates E[N^a(t)] = E_x[rate(x, a)] * 0.5 t.
  const int scenario = 1;
  ScenarioSpec spec;
  spec.scenario = scenario;
  spec.n = 4000;
  spec.seed = 11;
  const Cohort cohort = gen_scenario(spec, 0);
  const double t = 3.5;  // beyond tau - 1, so censoring is active
  const Vector pos = pseudo_observations(cohort, t);

  for (int a = 0; a < 2; ++a) {
    // analytic E[rate(X, a)] by Monte Carlo over a fresh large sample
    Rng rng(123, 0, 9);
    double truth = 0.0;
    const int m = 200000;
    for (int i = 0; i < m; ++i) {
      Vector x(3);
      x << rng.normal(), rng.normal(), rng.normal();
      truth += true_mean_count(scenario, x, a, t);
    }
    truth /= m;

    double mean = 0.0, ss = 0.0;
    for (Index i = 0; i < cohort.n(); ++i) {
      const Subject& s = cohort.subjects[static_cast<size_t>(i)];
      const double w = true_ps(scenario, s.covariates, a);
      const double signal = arm_signal_ipw(pos[i], s.treatment, a, w);
      mean += signal;
      ss += signal * signal;
    }
    mean /= static_cast<double>(cohort.n());
    const double var =
        (ss / static_cast<double>(cohort.n()) - mean * mean) /
        static_cast<double>(cohort.n());
    CHECK(std::abs(mean - truth) < 3.0 * std::sqrt(var));
  }
}
