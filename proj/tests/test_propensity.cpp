#include <doctest.h>

#include <cmath>

#include "recl/cohort.hpp"
#include "recl/propensity.hpp"
#include "recl/sim.hpp"

using namespace recl;

namespace {

Cohort logit_cohort(Index n, double b1, double b2, std::uint64_t seed) {
  Rng rng(seed, 0, 0);
  Cohort c;
  c.p = 3;
  c.k = 2;
  c.tau = 4.0;
  for (Index i = 0; i < n; ++i) {
    Subject s;
    s.id = "l" + std::to_string(i);
    Vector x(3);
    x << rng.normal(), rng.normal(), rng.normal();
    s.covariates = x;
    const double p1 = 1.0 / (1.0 + std::exp(-(b1 * x[0] + b2 * x[1])));
    s.treatment = rng.uniform01() < p1 ? 1 : 0;
    s.censor_time = 3.5;
    c.subjects.push_back(std::move(s));
  }
  return c;
}

}  // namespace

TEST_CASE("null model: slopes near zero, intercept near the log odds") {
  Rng rng(3, 0, 0);
  Cohort c;
  c.p = 2;
  c.k = 2;
  c.tau = 4.0;
  Index n1 = 0;
  const Index n = 2000;
  for (Index i = 0; i < n; ++i) {
    Subject s;
    s.id = std::to_string(i);
    Vector x(2);
    x << rng.normal(), rng.normal();
    s.covariates = x;
    s.treatment = rng.uniform01() < 0.5 ? 1 : 0;
    n1 += s.treatment;
    s.censor_time = 4.0;
    c.subjects.push_back(std::move(s));
  }
  const PsModel m = fit_propensity(c);
  REQUIRE(m.coefficients.cols() == 3);
  const double logodds =
      std::log(static_cast<double>(n1) / static_cast<double>(n - n1));
  CHECK(m.coefficients(0, 0) == doctest::Approx(logodds).epsilon(0.02));
  CHECK(std::abs(m.coefficients(0, 1)) < 0.1);
  CHECK(std::abs(m.coefficients(0, 2)) < 0.1);
}

TEST_CASE("logit recovery of (0.3, -0.5) at n=2000") {
  const Cohort c = logit_cohort(2000, 0.3, -0.5, 8);
  const PsModel m = fit_propensity(c, std::vector<Index>{0, 1});
  CHECK(std::abs(m.coefficients(0, 1) - 0.3) < 0.15);
  CHECK(std::abs(m.coefficients(0, 2) + 0.5) < 0.15);
  CHECK(m.grad_norm < 1e-8);
}

TEST_CASE("separated data triggers the ridge and a warning") {
  // Narrow margin keeps the likelihood climbing well past the
  // coefficient-norm monitor before the gradient could reach tolerance.
  Cohort c;
  c.p = 1;
  c.k = 2;
  c.tau = 4.0;
  for (int i = 0; i < 20; ++i) {
    Subject s;
    s.id = std::to_string(i);
    s.covariates =
        Vector::Constant(1, i < 10 ? -0.05 - 0.005 * i : 0.05 + 0.005 * i);
    s.treatment = i < 10 ? 0 : 1;  // perfectly separated on x
    s.censor_time = 4.0;
    c.subjects.push_back(std::move(s));
  }
  const PsModel m = fit_propensity(c);
  REQUIRE(m.warnings.size() == 1);
  CHECK(m.warnings[0].find("separation") != std::string::npos);
  CHECK(std::isfinite(m.coefficients(0, 0)));
  CHECK(std::isfinite(m.coefficients(0, 1)));
}

TEST_CASE("zero-coefficient predictions are uniform") {
  PsModel m;
  m.kind = PsModel::Kind::BinaryLogit;
  m.arms = 2;
  m.formula = PsFormula::from_indices({0});
  m.coefficients = Matrix::Zero(1, 2);
  Vector x(1);
  x << 1.7;
  CHECK(predict_ps(m, x, 0) == doctest::Approx(0.5));
  CHECK(predict_ps(m, x, 1) == doctest::Approx(0.5));

  PsModel m3;
  m3.kind = PsModel::Kind::MultinomialLogit;
  m3.arms = 3;
  m3.formula = PsFormula::from_indices({0});
  m3.coefficients = Matrix::Zero(2, 2);
  for (int a = 0; a < 3; ++a)
    CHECK(predict_ps(m3, x, a) == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("probabilities sum to one and respect the clip") {
  const Cohort c = logit_cohort(200, 0.8, -1.2, 12);
  const PsModel m = fit_propensity(c, std::vector<Index>{0, 1});
  for (const auto& s : c.subjects) {
    const Vector probs = predict_ps_all(m, s.covariates);
    CHECK(std::abs(probs.sum() - 1.0) < 1e-12);
    CHECK(probs.minCoeff() >= PsModel::kClipEps / 2.0);
  }
  // force the truncation with an extreme covariate value
  Vector far(3);
  far << 40.0, -40.0, 0.0;  // raw probability ~ 1 for arm 1
  const Vector clipped = predict_ps_all(m, far);
  CHECK(clipped.minCoeff() == doctest::Approx(PsModel::kClipEps));
  CHECK(clipped.maxCoeff() == doctest::Approx(1.0 - PsModel::kClipEps));
  CHECK(std::abs(clipped.sum() - 1.0) < 1e-12);
}

TEST_CASE("penalised log-likelihood is nondecreasing over iterations") {
  const Cohort c = logit_cohort(400, 0.5, -0.4, 23);
  const PsModel m = fit_propensity(c, std::vector<Index>{0, 1});
  REQUIRE(m.ll_trace.size() >= 2);
  // nondecreasing up to the rounding slack the line search permits
  for (size_t j = 1; j < m.ll_trace.size(); ++j)
    CHECK(m.ll_trace[j] >=
          m.ll_trace[j - 1] - 1e-10 * (1.0 + std::abs(m.ll_trace[j - 1])));
}

TEST_CASE("binary and forced-multinomial fits agree at K=2") {
  const Cohort c = logit_cohort(500, 0.3, -0.5, 31);
  const PsFormula f = PsFormula::from_indices({0, 1});
  const PsModel binary = fit_propensity(c, f);
  const PsModel multi = fit_multinomial_logit(c, f);
  CHECK(binary.kind == PsModel::Kind::BinaryLogit);
  CHECK(multi.kind == PsModel::Kind::MultinomialLogit);
  for (const auto& s : c.subjects)
    for (int a = 0; a < 2; ++a)
      CHECK(std::abs(predict_ps(binary, s.covariates, a) -
                     predict_ps(multi, s.covariates, a)) < 1e-8);
}

TEST_CASE("single-arm cohorts are rejected") {
  Cohort c;
  c.p = 1;
  c.k = 2;
  c.tau = 4.0;
  for (int i = 0; i < 5; ++i) {
    Subject s;
    s.id = std::to_string(i);
    s.covariates = Vector::Constant(1, 0.1 * i);
    s.treatment = 0;
    s.censor_time = 4.0;
    c.subjects.push_back(std::move(s));
  }
  CHECK_THROWS_AS(fit_propensity(c), InputError);
}

TEST_CASE("external propensity tables") {
  SUBCASE("uniform table predicts 1/K") {
    const PsModel m = load_external_ps(
        "id,ps_0,ps_1\n"
        "a,0.5,0.5\n"
        "b,0.5,0.5\n");
    Subject s;
    s.id = "a";
    s.covariates = Vector::Zero(1);
    CHECK(ps_for_subject(m, s, 0) == 0.5);
    CHECK(ps_for_subject(m, s, 1) == 0.5);
  }
  SUBCASE("row-sum violation is rejected") {
    CHECK_THROWS_AS(load_external_ps("id,ps_0,ps_1\na,0.4,0.5\n"), InputError);
  }
  SUBCASE("unknown subject at use time") {
    const PsModel m = load_external_ps("id,ps_0,ps_1\na,0.5,0.5\n");
    Subject s;
    s.id = "missing";
    s.covariates = Vector::Zero(1);
    CHECK_THROWS_AS(ps_for_subject(m, s, 0), InputError);
  }
  SUBCASE("export then reload reproduces predictions exactly") {
    const Cohort c = logit_cohort(60, 0.6, -0.9, 44);
    const PsModel fitted = fit_propensity(c, std::vector<Index>{0, 1});
    const PsModel table = load_external_ps(export_ps_table(fitted, c));
    for (const auto& s : c.subjects)
      for (int a = 0; a < 2; ++a)
        CHECK(std::abs(ps_for_subject(fitted, s, a) -
                       ps_for_subject(table, s, a)) < 1e-12);
  }
}

TEST_CASE("multinomial recovery on a three-arm cohort") {
  // True log-odds vs arm 0: arm1 ~ x1 - x2, arm2 ~ 0.5 x1 - x2.
  Rng rng(66, 0, 0);
  Cohort c;
  c.p = 3;
  c.k = 3;
  c.tau = 4.0;
  for (Index i = 0; i < 8000; ++i) {
    Subject s;
    s.id = std::to_string(i);
    Vector x(3);
    x << rng.normal(), rng.normal(), rng.normal();
    s.covariates = x;
    const double w1 = 1.0, w2 = std::exp(x[0] - x[1]),
                 w3 = std::exp(0.5 * x[0] - x[1]);
    const double u = rng.uniform01() * (w1 + w2 + w3);
    s.treatment = u < w1 ? 0 : (u < w1 + w2 ? 1 : 2);
    s.censor_time = 4.0;
    c.subjects.push_back(std::move(s));
  }
  const PsModel m = fit_propensity(c, std::vector<Index>{0, 1});
  REQUIRE(m.coefficients.rows() == 2);
  CHECK(std::abs(m.coefficients(0, 1) - 1.0) < 0.15);
  CHECK(std::abs(m.coefficients(0, 2) + 1.0) < 0.15);
  CHECK(std::abs(m.coefficients(1, 1) - 0.5) < 0.15);
  CHECK(std::abs(m.coefficients(1, 2) + 1.0) < 0.15);
}
