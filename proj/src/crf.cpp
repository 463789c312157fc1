#include "recl/crf.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "recl/csv.hpp"

namespace recl {

namespace {

// Distinct event times with multiplicities d(s) and risk counts
// R(s) = #{j : C_j >= s}.
struct EventTable {
  std::vector<double> times;
  std::vector<double> d;
  std::vector<double> risk;
};

EventTable build_event_table(const std::vector<const Subject*>& subjects) {
  EventTable table;
  std::map<double, double> counts;
  for (const auto* s : subjects)
    for (double e : s->event_times) counts[e] += 1.0;
  std::vector<double> censors;
  censors.reserve(subjects.size());
  for (const auto* s : subjects) censors.push_back(s->censor_time);
  std::sort(censors.begin(), censors.end());
  table.times.reserve(counts.size());
  table.d.reserve(counts.size());
  table.risk.reserve(counts.size());
  for (const auto& [time, d] : counts) {
    auto below = std::lower_bound(censors.begin(), censors.end(), time);
    const auto at_risk = censors.end() - below;  // #{C >= time}
    table.times.push_back(time);
    table.d.push_back(d);
    table.risk.push_back(static_cast<double>(at_risk));
  }
  return table;
}

std::vector<const Subject*> all_subjects(const Cohort& cohort) {
  std::vector<const Subject*> out;
  out.reserve(cohort.subjects.size());
  for (const auto& s : cohort.subjects) out.push_back(&s);
  return out;
}

StepFunction nelson_aalen_impl(const std::vector<const Subject*>& subjects) {
  if (subjects.empty()) throw InputError("nelson_aalen: empty cohort");
  EventTable table = build_event_table(subjects);
  std::vector<double> values(table.times.size());
  double acc = 0.0;
  for (size_t j = 0; j < table.times.size(); ++j) {
    acc += table.d[j] / table.risk[j];
    values[j] = acc;
  }
  return StepFunction(std::move(table.times), std::move(values));
}

}  // namespace

StepFunction nelson_aalen(const Cohort& cohort) {
  return nelson_aalen_impl(all_subjects(cohort));
}

StepFunction group_crf(const Cohort& cohort,
                       const std::vector<std::string>& member) {
  if (member.empty()) throw InputError("group_crf: empty subgroup");
  std::set<std::string> wanted(member.begin(), member.end());
  std::vector<const Subject*> subset;
  for (const auto& s : cohort.subjects)
    if (wanted.erase(s.id) > 0) subset.push_back(&s);
  if (!wanted.empty())
    throw InputError("group_crf: unknown subject id '" + *wanted.begin() + "'");
  return nelson_aalen_impl(subset);
}

Matrix pseudo_observations_grid(const Cohort& cohort,
                                const std::vector<double>& times) {
  const Index n = cohort.n();
  if (n < 2) throw InputError("pseudo_observations: need at least 2 subjects");
  for (double t : times)
    if (!(t > 0.0) || t > cohort.tau)
      throw InputError("pseudo_observations: horizon " +
                       csv::format_double(t) + " outside (0, tau]");

  EventTable table = build_event_table(all_subjects(cohort));

  // Horizons in ascending order, output columns in caller order.
  std::vector<size_t> order(times.size());
  for (size_t h = 0; h < times.size(); ++h) order[h] = h;
  std::sort(order.begin(), order.end(),
            [&](size_t a, size_t b) { return times[a] < times[b]; });

  Matrix pos(n, static_cast<Index>(times.size()));
  const double dn = static_cast<double>(n);
  for (Index i = 0; i < n; ++i) {
    const Subject& subject = cohort.subjects[static_cast<size_t>(i)];
    size_t own = 0;  // cursor into the subject's event times
    double acc = 0.0;
    size_t h = 0;
    for (size_t j = 0; j <= table.times.size(); ++j) {
      const double knot =
          j < table.times.size() ? table.times[j] : cohort.tau + 1.0;
      while (h < order.size() && times[order[h]] < knot) {
        pos(i, static_cast<Index>(order[h])) = acc;
        ++h;
      }
      if (j == table.times.size()) break;
      const double s = table.times[j];
      const double d = table.d[j];
      const double risk = table.risk[j];
      double di = 0.0;
      while (own < subject.event_times.size() &&
             subject.event_times[own] < s)
        ++own;
      if (own < subject.event_times.size() && subject.event_times[own] == s)
        di = 1.0;
      const double yi = subject.censor_time >= s ? 1.0 : 0.0;
      const double loo_risk = risk - yi;
      double inc;
      if (loo_risk == 0.0) {
        if (d - di > 0.0)
          throw InputError(
              "pseudo_observations: leave-one-out risk set empty at time " +
              csv::format_double(s) + " for subject '" + subject.id + "'");
        inc = dn * d / risk;
      } else {
        // n*d/R - (n-1)*(d-di)/(R-yi) as one rational expression; with no
        // censoring before s this reduces to exactly di.
        inc = (dn * d * loo_risk - (dn - 1.0) * (d - di) * risk) /
              (risk * loo_risk);
      }
      acc += inc;
    }
    for (; h < order.size(); ++h)
      pos(i, static_cast<Index>(order[h])) = acc;
  }
  return pos;
}

Vector pseudo_observations(const Cohort& cohort, double t) {
  return pseudo_observations_grid(cohort, {t}).col(0);
}

Vector pseudo_observations_naive(const Cohort& cohort, double t) {
  const Index n = cohort.n();
  if (n < 2) throw InputError("pseudo_observations: need at least 2 subjects");
  const StepFunction full = nelson_aalen(cohort);
  const double full_at_t = full(t);
  Vector pos(n);
  for (Index i = 0; i < n; ++i) {
    std::vector<const Subject*> rest;
    rest.reserve(static_cast<size_t>(n - 1));
    for (Index j = 0; j < n; ++j)
      if (j != i) rest.push_back(&cohort.subjects[static_cast<size_t>(j)]);
    const StepFunction loo = nelson_aalen_impl(rest);
    pos[i] = static_cast<double>(n) * full_at_t -
             static_cast<double>(n - 1) * loo(t);
  }
  return pos;
}

}  // namespace recl
