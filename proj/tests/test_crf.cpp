#include <doctest.h>

#include <cmath>
#include <set>

#include "recl/cohort.hpp"
#include "recl/crf.hpp"
#include "recl/sim.hpp"

using namespace recl;

namespace {

Subject make_subject(const std::string& id, std::vector<double> events,
                     double censor) {
  Subject s;
  s.id = id;
  s.covariates = Vector::Zero(1);
  s.event_times = std::move(events);
  s.censor_time = censor;
  return s;
}

// 3 subjects, events at 1.0 (s1, s2) and 2.0 (s2).
Cohort three_subjects(double c1) {
  Cohort c;
  c.p = 1;
  c.k = 1;
  c.tau = 4.0;
  c.subjects = {make_subject("s1", {1.0}, c1),
                make_subject("s2", {1.0, 2.0}, 4.0),
                make_subject("s3", {}, 4.0)};
  return c;
}

}  // namespace

TEST_CASE("nelson_aalen with no events is the zero function") {
  Cohort c;
  c.p = 1;
  c.k = 1;
  c.tau = 4.0;
  c.subjects = {make_subject("a", {}, 3.0), make_subject("b", {}, 4.0)};
  const StepFunction na = nelson_aalen(c);
  CHECK(na.empty());
  CHECK(na(2.0) == 0.0);
}

TEST_CASE("nelson_aalen hand sums") {
  // Uncensored: jump 2/3 at s=1, 1/3 at s=2.
  CHECK(nelson_aalen(three_subjects(4.0))(2.0) == doctest::Approx(1.0));
  // s1 censored at 1.5: risk set at s=2 shrinks to 2.
  CHECK(nelson_aalen(three_subjects(1.5))(2.0) ==
        doctest::Approx(2.0 / 3.0 + 0.5));
  // per-increment recomputation oracle on the censored variant
  const StepFunction na = nelson_aalen(three_subjects(1.5));
  REQUIRE(na.knots().size() == 2);
  CHECK(na.values()[0] == doctest::Approx(2.0 / 3.0));
  CHECK(na.values()[1] - na.values()[0] == doctest::Approx(1.0 / 2.0));
}

TEST_CASE("nelson_aalen rejects an empty cohort") {
  Cohort c;
  c.p = 1;
  c.k = 1;
  c.tau = 1.0;
  CHECK_THROWS_AS(nelson_aalen(c), InputError);
}

TEST_CASE("pseudo-observations equal counts without censoring before t") {
  const Cohort c = three_subjects(4.0);
  const Vector pos = pseudo_observations(c, 2.0);
  CHECK(pos[0] == 1.0);  // exact, not approximate
  CHECK(pos[1] == 2.0);
  CHECK(pos[2] == 0.0);
}

TEST_CASE("pseudo-observations censored hand example") {
  const Cohort c = three_subjects(1.5);
  const Vector pos = pseudo_observations(c, 2.0);
  // L(2) = 7/6; leave-one-out of s1 drops one event at 1.0: 1/2 + 1/2 = 1.
  CHECK(pos[0] == doctest::Approx(3.0 * 7.0 / 6.0 - 2.0 * 1.0));
  // s3 contributes no events; its PO is negative here.
  const Vector naive = pseudo_observations_naive(c, 2.0);
  CHECK(pos[2] == doctest::Approx(naive[2]));
  CHECK(naive[2] < 0.0);
  for (Index i = 0; i < 3; ++i)
    CHECK(std::abs(pos[i] - naive[i]) < 1e-12);
}

TEST_CASE("pseudo-observations preconditions") {
  Cohort c;
  c.p = 1;
  c.k = 1;
  c.tau = 4.0;
  c.subjects = {make_subject("only", {1.0}, 4.0)};
  CHECK_THROWS_AS(pseudo_observations(c, 2.0), InputError);  // n < 2
  CHECK_THROWS_AS(pseudo_observations(three_subjects(4.0), 0.0), InputError);
  CHECK_THROWS_AS(pseudo_observations(three_subjects(4.0), 5.0), InputError);
}

TEST_CASE("degenerate leave-one-out risk set is reported") {
  // Invalid by construction (an event after the subject's own censoring):
  // only s1 is at risk at 3.5, but s2 has an event there, so removing s1
  // leaves an event with an empty risk set.
  Cohort c;
  c.p = 1;
  c.k = 1;
  c.tau = 4.0;
  c.subjects = {make_subject("s1", {}, 4.0),
                make_subject("s2", {3.5}, 2.0)};
  try {
    pseudo_observations(c, 4.0);
    FAIL("expected InputError");
  } catch (const InputError& e) {
    // names the offending subject and time
    CHECK(std::string(e.what()).find("s1") != std::string::npos);
    CHECK(std::string(e.what()).find("3.5") != std::string::npos);
  }
}

TEST_CASE("efficient pseudo-observations match the naive n-refit oracle") {
  for (int r = 0; r < 30; ++r) {
    Rng rng(42 + r, 0, 0);
    const Cohort c = random_cohort(rng, 5 + r, 2 + r % 2);
    const double t = 0.3 * c.tau + 0.5 * (r % 3);
    const Vector fast = pseudo_observations(c, t);
    const Vector naive = pseudo_observations_naive(c, t);
    CHECK((fast - naive).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("pseudo-observation grid matches single-horizon calls") {
  Rng rng(11, 0, 0);
  const Cohort c = random_cohort(rng, 30, 2);
  const std::vector<double> ts = {3.5, 1.0, 2.4};
  const Matrix grid = pseudo_observations_grid(c, ts);
  for (size_t h = 0; h < ts.size(); ++h) {
    const Vector single = pseudo_observations(c, ts[h]);
    CHECK((grid.col(static_cast<Index>(h)) - single).cwiseAbs().maxCoeff() ==
          0.0);
  }
}

TEST_CASE("Monte-Carlo: mean pseudo-observation approaches the Poisson mean") {
  // Homogeneous rate 0.7 with Uniform(2,4) censoring; POs at t = 3 are
  // unbiased for 0.7 * 3 = 2.1 up to jackknife error.
  const double lambda = 0.7, t = 3.0;
  const Index n = 4000;
  Rng rng(2024, 0, 0);
  Cohort c;
  c.p = 1;
  c.k = 1;
  c.tau = 4.0;
  for (Index i = 0; i < n; ++i) {
    Subject s = make_subject("p" + std::to_string(i), {}, rng.uniform(2.0, 4.0));
    const int count = rng.poisson(lambda * s.censor_time);
    for (int e = 0; e < count; ++e) {
      double u = 0.0;
      while (u <= 0.0) u = rng.uniform(0.0, s.censor_time);
      s.event_times.push_back(u);
    }
    std::sort(s.event_times.begin(), s.event_times.end());
    c.subjects.push_back(std::move(s));
  }
  const Vector pos = pseudo_observations(c, t);
  const double mean = pos.mean();
  const double sd = std::sqrt((pos.array() - mean).square().sum() /
                              static_cast<double>(n - 1));
  const double se = sd / std::sqrt(static_cast<double>(n));
  CHECK(std::abs(mean - lambda * t) < 3.0 * se);
}

TEST_CASE("group_crf") {
  const Cohort c = three_subjects(1.5);
  SUBCASE("all ids reproduce the pooled estimator") {
    const StepFunction all = group_crf(c, {"s1", "s2", "s3"});
    const StepFunction pooled = nelson_aalen(c);
    CHECK(all(2.0) == pooled(2.0));
    CHECK(all(1.0) == pooled(1.0));
  }
  SUBCASE("singleton subgroup") {
    Cohort one;
    one.p = 1;
    one.k = 1;
    one.tau = 4.0;
    one.subjects = {make_subject("solo", {1.0}, 4.0)};
    const StepFunction f = group_crf(one, {"solo"});
    CHECK(f(1.0) == doctest::Approx(1.0));
    CHECK(f(0.5) == 0.0);
  }
  SUBCASE("two-subject subgroup hand sum") {
    // s1 (event at 1, C=1.5) and s3 (no events, C=4): jump 1/2 at s=1.
    const StepFunction f = group_crf(c, {"s1", "s3"});
    CHECK(f(2.0) == doctest::Approx(0.5));
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(group_crf(c, {}), InputError);
    CHECK_THROWS_AS(group_crf(c, {"nope"}), InputError);
  }
}

TEST_CASE("nelson_aalen output is nondecreasing with jumps at event times") {
  Rng rng(17, 0, 0);
  const Cohort c = random_cohort(rng, 40, 2);
  const StepFunction na = nelson_aalen(c);
  for (size_t j = 1; j < na.values().size(); ++j) {
    CHECK(na.values()[j] > na.values()[j - 1]);
    CHECK(na.knots()[j] > na.knots()[j - 1]);
  }
  // knots are exactly the distinct observed event times
  std::set<double> expected;
  for (const auto& s : c.subjects)
    for (double e : s.event_times) expected.insert(e);
  CHECK(na.knots().size() == expected.size());
}
