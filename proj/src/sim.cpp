#include "recl/sim.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <sstream>

#include "recl/contrast.hpp"
#include "recl/crf.hpp"
#include "recl/csv.hpp"
#include "recl/propensity.hpp"
#include "recl/smr.hpp"

namespace recl {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr double kTwoPi = 6.283185307179586476925286766559;

}  // namespace

Rng::Rng(std::uint64_t seed, std::uint64_t replicate, std::uint64_t stream)
    : gen_(splitmix64(splitmix64(splitmix64(seed) ^ replicate) ^ stream)) {}

double Rng::uniform01() {
  return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double a, double b) { return a + (b - a) * uniform01(); }

double Rng::normal() {
  const double u1 = 1.0 - uniform01();  // (0, 1]
  const double u2 = uniform01();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(kTwoPi * u2);
}

int Rng::poisson(double mean) {
  if (!(mean > 0.0)) return 0;
  int k = 0;
  double acc = 0.0;
  for (;;) {
    acc += -std::log1p(-uniform01());  // unit-exponential arrival gap
    if (acc > mean) break;
    ++k;
  }
  return k;
}

int scenario_arms(int scenario) {
  switch (scenario) {
    case 1: return 2;
    case 2: return 3;
  }
  throw InputError("unknown scenario " + std::to_string(scenario));
}

int optimal_regime(int scenario, const Vector& x) {
  if (scenario == 1) return (x[0] > -1.0 && x[1] > -0.5) ? 1 : 0;
  if (scenario == 2)
    return x[0] > -0.5 ? (x[1] > -0.5 ? 1 : 0) + (x[1] > 0.5 ? 1 : 0) : 0;
  throw InputError("unknown scenario " + std::to_string(scenario));
}

double true_rate(int scenario, const Vector& x, int a) {
  const int g = optimal_regime(scenario, x);
  const double diff = static_cast<double>(a - g);
  if (scenario == 1)
    return std::exp(x[1] + std::abs(1.5 * x[0] - 0.5) * diff * diff - 0.8);
  return std::exp(0.3 * std::abs(1.5 * x[0] - 0.5) * diff * diff - 0.3);
}

double true_mean_count(int scenario, const Vector& x, int a, double t) {
  return true_rate(scenario, x, a) * 0.5 * t;  // baseline mu(t) = 0.5 t
}

double true_ps(int scenario, const Vector& x, int a) {
  if (scenario == 1) {
    const double p1 = 1.0 / (1.0 + std::exp(-(0.3 * x[0] - 0.5 * x[1])));
    return a == 1 ? p1 : 1.0 - p1;
  }
  const double w1 = 1.0;
  const double w2 = std::exp(x[0] - x[1]);
  const double w3 = std::exp(0.5 * x[0] - x[1]);
  const double sum = w1 + w2 + w3;
  switch (a) {
    case 0: return w1 / sum;
    case 1: return w2 / sum;
    case 2: return w3 / sum;
  }
  throw InputError("arm out of range for scenario 2");
}

Cohort gen_scenario(const ScenarioSpec& spec, int replicate) {
  if (spec.n < 2) throw InputError("scenario: sample size must be >= 2");
  const int k = scenario_arms(spec.scenario);
  Rng rng(spec.seed, static_cast<std::uint64_t>(replicate), kStreamTraining);
  Cohort cohort;
  cohort.p = 3;
  cohort.k = k;
  cohort.tau = spec.tau;
  cohort.covariate_names = {"x1", "x2", "x3"};
  cohort.treatment_labels.clear();
  for (int a = 0; a < k; ++a)
    cohort.treatment_labels.push_back(
        std::to_string(spec.scenario == 2 ? a + 1 : a));

  cohort.subjects.reserve(static_cast<size_t>(spec.n));
  for (Index i = 0; i < spec.n; ++i) {
    Subject s;
    s.id = "s" + std::to_string(i + 1);
    Vector x(3);
    x << rng.normal(), rng.normal(), rng.normal();
    s.covariates = x;

    const double u = rng.uniform01();
    double acc = 0.0;
    int a = k - 1;
    for (int c = 0; c < k; ++c) {
      acc += true_ps(spec.scenario, x, c);
      if (u < acc) {
        a = c;
        break;
      }
    }
    s.treatment = a;

    s.censor_time = rng.uniform(spec.tau - 1.0, spec.tau);
    const double mean = true_rate(spec.scenario, x, a) * 0.5 * s.censor_time;
    const int count = rng.poisson(mean);
    // Homogeneous process: count then sorted uniform order statistics.
    for (;;) {
      s.event_times.clear();
      s.event_times.reserve(static_cast<size_t>(count));
      for (int e = 0; e < count; ++e) {
        double time = 0.0;
        while (time <= 0.0) time = rng.uniform(0.0, s.censor_time);
        s.event_times.push_back(time);
      }
      std::sort(s.event_times.begin(), s.event_times.end());
      if (std::adjacent_find(s.event_times.begin(), s.event_times.end()) ==
          s.event_times.end())
        break;  // re-draw on a floating-point tie
    }
    cohort.subjects.push_back(std::move(s));
  }
  return cohort;
}

Matrix gen_test_covariates(const ScenarioSpec& spec, int replicate) {
  Rng rng(spec.seed, static_cast<std::uint64_t>(replicate), kStreamTest);
  Matrix x(spec.test_size, 3);
  for (Index i = 0; i < spec.test_size; ++i)
    for (Index j = 0; j < 3; ++j) x(i, j) = rng.normal();
  return x;
}

RegimeMetrics evaluate_regime(const std::function<int(const Vector&)>& regime,
                              const Matrix& test_x, int scenario, double t) {
  const Index n = test_x.rows();
  if (n == 0) throw InputError("evaluate_regime: empty test set");
  double hits = 0.0;
  double value = 0.0;
  for (Index i = 0; i < n; ++i) {
    const Vector x = test_x.row(i);
    const int a = regime(x);
    if (a == optimal_regime(scenario, x)) hits += 1.0;
    value += true_mean_count(scenario, x, a, t);
  }
  return {hits / static_cast<double>(n), value / static_cast<double>(n)};
}

RegimeMetrics evaluate_regime(const TreeRegime& tree, const Matrix& test_x,
                              int scenario, double t) {
  return evaluate_regime([&](const Vector& x) { return assign(tree, x); },
                         test_x, scenario, t);
}

std::string method_name(SimMethod m) {
  switch (m) {
    case SimMethod::AipwTrue: return "ReCL-AIPW-T";
    case SimMethod::AipwFalse: return "ReCL-AIPW-F";
    case SimMethod::Ipw: return "ReCL-IPW";
    case SimMethod::Smr: return "ReCL-SMR";
    case SimMethod::First: return "First";
    case SimMethod::Random: return "Random";
    case SimMethod::Optimal: return "Optimal";
  }
  return "?";
}

SimMethod sim_method_from_name(const std::string& name) {
  for (SimMethod m : all_sim_methods())
    if (method_name(m) == name) return m;
  throw InputError("unknown method '" + name + "'");
}

const std::vector<SimMethod>& all_sim_methods() {
  static const std::vector<SimMethod> methods = {
      SimMethod::AipwTrue, SimMethod::AipwFalse, SimMethod::Ipw,
      SimMethod::Smr,      SimMethod::First,     SimMethod::Random,
      SimMethod::Optimal};
  return methods;
}

std::vector<MethodSummary> ExperimentReport::summary() const {
  std::vector<MethodSummary> out;
  std::vector<SimMethod> seen;
  for (const auto& row : rows)
    if (std::find(seen.begin(), seen.end(), row.method) == seen.end())
      seen.push_back(row.method);
  for (SimMethod m : seen) {
    MethodSummary s;
    s.method = m;
    std::vector<double> acc, val;
    for (const auto& row : rows) {
      if (row.method != m || row.failed) continue;
      acc.push_back(row.accuracy);
      val.push_back(row.value);
    }
    s.replicates = static_cast<int>(acc.size());
    auto mean_se = [](const std::vector<double>& v, double* mean, double* se) {
      *mean = 0.0;
      *se = 0.0;
      if (v.empty()) return;
      for (double x : v) *mean += x;
      *mean /= static_cast<double>(v.size());
      if (v.size() < 2) return;
      double ss = 0.0;
      for (double x : v) ss += (x - *mean) * (x - *mean);
      const double sd = std::sqrt(ss / static_cast<double>(v.size() - 1));
      *se = sd / std::sqrt(static_cast<double>(v.size()));
    };
    mean_se(acc, &s.mean_accuracy, &s.se_accuracy);
    mean_se(val, &s.mean_value, &s.se_value);
    out.push_back(s);
  }
  return out;
}

std::string ExperimentReport::to_csv() const {
  std::ostringstream out;
  out << "replicate,method,accuracy,value\n";
  for (const auto& row : rows) {
    out << row.replicate << ',' << method_name(row.method) << ',';
    if (row.failed)
      out << "NA,NA";
    else
      out << csv::format_double(row.accuracy) << ','
          << csv::format_double(row.value);
    out << '\n';
  }
  return out.str();
}

std::string ExperimentReport::summary_csv() const {
  std::ostringstream out;
  out << "method,replicates,mean_accuracy,se_accuracy,mean_value,se_value\n";
  for (const auto& s : summary()) {
    out << method_name(s.method) << ',' << s.replicates << ','
        << csv::format_double(s.mean_accuracy) << ','
        << csv::format_double(s.se_accuracy) << ','
        << csv::format_double(s.mean_value) << ','
        << csv::format_double(s.se_value) << '\n';
  }
  return out.str();
}

namespace {

template <typename T>
struct Fitted {
  std::optional<T> value;
  std::string error;

  const T& require() const {
    if (!value) throw NumericError(error);
    return *value;
  }
};

template <typename T, typename Fn>
Fitted<T> try_fit(const std::string& stage, Fn&& fn) {
  Fitted<T> out;
  try {
    out.value = fn();
  } catch (const std::exception& e) {
    out.error = stage + ": " + e.what();
  }
  return out;
}

}  // namespace

Cohort random_cohort(Rng& rng, Index n, int k, double tau, Index p) {
  Cohort cohort;
  cohort.p = p;
  cohort.k = k;
  cohort.tau = tau;
  for (Index i = 0; i < n; ++i) {
    Subject s;
    s.id = "r" + std::to_string(i + 1);
    Vector x(p);
    for (Index j = 0; j < p; ++j) x[j] = rng.normal();
    s.covariates = x;
    s.treatment = std::min(k - 1, static_cast<int>(rng.uniform01() * k));
    s.censor_time = rng.uniform(0.5 * tau, tau);
    const double rate =
        std::exp(0.3 * x[0] - 0.2 * x[std::min<Index>(1, p - 1)] +
                 0.1 * s.treatment) *
        0.4;
    const int count = rng.poisson(rate * s.censor_time);
    for (;;) {
      s.event_times.clear();
      for (int e = 0; e < count; ++e) {
        double time = 0.0;
        while (time <= 0.0) time = rng.uniform(0.0, s.censor_time);
        s.event_times.push_back(time);
      }
      std::sort(s.event_times.begin(), s.event_times.end());
      if (std::adjacent_find(s.event_times.begin(), s.event_times.end()) ==
          s.event_times.end())
        break;
    }
    cohort.subjects.push_back(std::move(s));
  }
  return cohort;
}

Vector first_event_pseudo_observations(const Cohort& cohort, double t) {
  const Index n = cohort.n();
  if (n < 2)
    throw InputError("first_event_pseudo_observations: need >= 2 subjects");
  if (!(t > 0.0) || t > cohort.tau)
    throw InputError("first_event_pseudo_observations: horizon outside (0, tau]");

  // Kaplan-Meier data on the first-event process stopped at its jump.
  std::vector<double> obs_time(static_cast<size_t>(n));
  std::vector<bool> has_event(static_cast<size_t>(n));
  std::map<double, double> mult;
  for (Index i = 0; i < n; ++i) {
    const Subject& s = cohort.subjects[static_cast<size_t>(i)];
    const bool ev = !s.event_times.empty();
    has_event[static_cast<size_t>(i)] = ev;
    obs_time[static_cast<size_t>(i)] = ev ? s.event_times[0] : s.censor_time;
    if (ev) mult[s.event_times[0]] += 1.0;
  }
  std::vector<double> sorted_obs = obs_time;
  std::sort(sorted_obs.begin(), sorted_obs.end());

  std::vector<double> times, d, risk;
  for (const auto& [s, count] : mult) {
    if (s > t) break;
    times.push_back(s);
    d.push_back(count);
    const auto below =
        std::lower_bound(sorted_obs.begin(), sorted_obs.end(), s);
    risk.push_back(static_cast<double>(sorted_obs.end() - below));
  }

  double surv = 1.0;
  for (size_t j = 0; j < times.size(); ++j) surv *= 1.0 - d[j] / risk[j];
  const double dn = static_cast<double>(n);

  Vector pos(n);
  for (Index i = 0; i < n; ++i) {
    double loo_surv = 1.0;
    for (size_t j = 0; j < times.size(); ++j) {
      const double yi = obs_time[static_cast<size_t>(i)] >= times[j] ? 1 : 0;
      const double di = (has_event[static_cast<size_t>(i)] &&
                         obs_time[static_cast<size_t>(i)] == times[j])
                            ? 1.0
                            : 0.0;
      const double r = risk[j] - yi;
      if (r == 0.0) {
        if (d[j] - di > 0.0)
          throw InputError(
              "first_event_pseudo_observations: empty leave-one-out risk set "
              "at time " +
              csv::format_double(times[j]));
        continue;  // no one at risk, no factor
      }
      loo_surv *= 1.0 - (d[j] - di) / r;
    }
    pos[i] = dn * (1.0 - surv) - (dn - 1.0) * (1.0 - loo_surv);
  }
  return pos;
}

Vector first_event_pseudo_observations_naive(const Cohort& cohort, double t) {
  const Index n = cohort.n();
  if (n < 2)
    throw InputError("first_event_pseudo_observations: need >= 2 subjects");
  auto km_complement = [t](const std::vector<std::pair<double, bool>>& data) {
    std::map<double, double> mult;
    std::vector<double> obs;
    obs.reserve(data.size());
    for (const auto& [time, ev] : data) {
      obs.push_back(time);
      if (ev) mult[time] += 1.0;
    }
    std::sort(obs.begin(), obs.end());
    double surv = 1.0;
    for (const auto& [s, count] : mult) {
      if (s > t) break;
      const auto below = std::lower_bound(obs.begin(), obs.end(), s);
      const double risk = static_cast<double>(obs.end() - below);
      if (risk > 0.0) surv *= 1.0 - count / risk;
    }
    return 1.0 - surv;
  };

  std::vector<std::pair<double, bool>> all;
  for (const auto& s : cohort.subjects)
    all.emplace_back(s.event_times.empty() ? s.censor_time : s.event_times[0],
                     !s.event_times.empty());
  const double full = km_complement(all);
  Vector pos(n);
  for (Index i = 0; i < n; ++i) {
    std::vector<std::pair<double, bool>> rest;
    for (Index j = 0; j < n; ++j)
      if (j != i) rest.push_back(all[static_cast<size_t>(j)]);
    pos[i] = static_cast<double>(n) * full -
             static_cast<double>(n - 1) * km_complement(rest);
  }
  return pos;
}

std::vector<ExperimentReport> run_experiment(
    const ScenarioSpec& spec, const std::vector<SimMethod>& methods) {
  if (spec.horizons.empty()) throw InputError("no horizons requested");
  for (double t : spec.horizons)
    if (!(t > 0.0) || t > spec.tau)
      throw InputError("horizon outside (0, tau]");

  auto wants = [&](SimMethod m) {
    return std::find(methods.begin(), methods.end(), m) != methods.end();
  };
  const bool needs_smr = wants(SimMethod::AipwTrue) ||
                         wants(SimMethod::AipwFalse) || wants(SimMethod::Smr);
  const bool needs_ps_true = wants(SimMethod::AipwTrue) ||
                             wants(SimMethod::Ipw) || wants(SimMethod::First);
  const bool needs_ps_false = wants(SimMethod::AipwFalse);
  const bool needs_pos = wants(SimMethod::AipwTrue) ||
                         wants(SimMethod::AipwFalse) || wants(SimMethod::Ipw);

  std::vector<ExperimentReport> reports;
  for (double t : spec.horizons) {
    ExperimentReport report;
    report.scenario = spec.scenario;
    report.t = t;
    reports.push_back(report);
  }

  for (int rep = 0; rep < spec.replicates; ++rep) {
    const Cohort cohort = gen_scenario(spec, rep);
    const Matrix x = cohort.covariate_matrix();
    const Matrix test_x = gen_test_covariates(spec, rep);

    // Uniform comparator arms, drawn once per replicate on a dedicated
    // stream so they do not depend on which methods run.
    std::vector<int> random_arms;
    if (wants(SimMethod::Random)) {
      Rng rng(spec.seed, static_cast<std::uint64_t>(rep), kStreamRandomArm);
      random_arms.resize(static_cast<size_t>(test_x.rows()));
      for (auto& a : random_arms)
        a = std::min(cohort.k - 1,
                     static_cast<int>(rng.uniform01() * cohort.k));
    }

    Fitted<SmrFit> smr;
    if (needs_smr)
      smr = try_fit<SmrFit>("smr", [&] { return fit_smr(cohort); });
    Fitted<PsModel> ps_true;
    if (needs_ps_true)
      ps_true = try_fit<PsModel>("propensity", [&] {
        return fit_propensity(cohort, std::vector<Index>{0, 1});
      });
    Fitted<PsModel> ps_false;
    if (needs_ps_false)
      ps_false = try_fit<PsModel>("propensity(misspecified)", [&] {
        PsFormula f;
        f.terms = {{0, PsTerm::Transform::Identity},
                   {2, PsTerm::Transform::Exp}};
        return fit_propensity(cohort, f);
      });

    for (size_t h = 0; h < spec.horizons.size(); ++h) {
      const double t = spec.horizons[h];
      Fitted<Vector> pos;
      if (needs_pos)
        pos = try_fit<Vector>("pseudo-observations", [&] {
          return pseudo_observations(cohort, t);
        });
      Fitted<Vector> first_pos;
      if (wants(SimMethod::First))
        first_pos = try_fit<Vector>("first-event pseudo-observations", [&] {
          return first_event_pseudo_observations(cohort, t);
        });

      for (SimMethod m : methods) {
        ReplicateResult row;
        row.replicate = rep;
        row.method = m;
        try {
          RegimeMetrics metrics;
          switch (m) {
            case SimMethod::Optimal:
              metrics = evaluate_regime(
                  [&](const Vector& xi) {
                    return optimal_regime(spec.scenario, xi);
                  },
                  test_x, spec.scenario, t);
              break;
            case SimMethod::Random: {
              Index i = 0;
              metrics = evaluate_regime(
                  [&](const Vector&) {
                    return random_arms[static_cast<size_t>(i++)];
                  },
                  test_x, spec.scenario, t);
              break;
            }
            default: {
              CostMatrix cm;
              switch (m) {
                case SimMethod::AipwTrue:
                  cm = cost_matrix(cohort, CostMethod::AIPW, t, &smr.require(),
                                   &ps_true.require(), &pos.require());
                  break;
                case SimMethod::AipwFalse:
                  cm = cost_matrix(cohort, CostMethod::AIPW, t, &smr.require(),
                                   &ps_false.require(), &pos.require());
                  break;
                case SimMethod::Ipw:
                  cm = cost_matrix(cohort, CostMethod::IPW, t, nullptr,
                                   &ps_true.require(), &pos.require());
                  break;
                case SimMethod::Smr:
                  cm = cost_matrix(cohort, CostMethod::OR, t, &smr.require());
                  break;
                case SimMethod::First:
                  cm = cost_matrix(cohort, CostMethod::IPW, t, nullptr,
                                   &ps_true.require(), &first_pos.require());
                  break;
                default: break;
              }
              const TreeRegime tree = fit_weighted_tree(expand(cm, x));
              metrics = evaluate_regime(tree, test_x, spec.scenario, t);
            }
          }
          row.accuracy = metrics.accuracy;
          row.value = metrics.value;
        } catch (const std::exception& e) {
          row.failed = true;
          row.error = e.what();
        }
        reports[h].rows.push_back(row);
      }
    }
  }
  return reports;
}

}  // namespace recl
