#include "recl/cohort.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "recl/csv.hpp"

namespace recl {

namespace {

bool parse_number(const std::string& s, double* out) {
  const char* last = s.data() + s.size();
  auto res = std::from_chars(s.data(), last, *out);
  return res.ec == std::errc() && res.ptr == last;
}

int require_column(const csv::Table& table, const std::string& name) {
  int j = table.column(name);
  if (j < 0) throw InputError("missing column '" + name + "'");
  return j;
}

}  // namespace

Matrix Cohort::covariate_matrix() const {
  Matrix x(n(), p);
  for (Index i = 0; i < n(); ++i) x.row(i) = subjects[i].covariates;
  return x;
}

std::string Cohort::label_for(int arm) const {
  if (arm >= 0 && arm < static_cast<int>(treatment_labels.size()))
    return treatment_labels[arm];
  return std::to_string(arm);
}

int count_at(const Subject& subject, double t) {
  const double cap = std::min(t, subject.censor_time);
  auto it = std::upper_bound(subject.event_times.begin(),
                             subject.event_times.end(), cap);
  return static_cast<int>(it - subject.event_times.begin());
}

int at_risk(const Subject& subject, double t) {
  return subject.censor_time >= t ? 1 : 0;
}

std::vector<std::string> validate_cohort(const Cohort& cohort) {
  std::vector<std::string> warnings;
  if (cohort.k < 1) throw InputError("cohort: arm count must be positive");
  std::vector<int> arm_counts(static_cast<size_t>(cohort.k), 0);
  std::set<std::string> ids;
  for (const auto& s : cohort.subjects) {
    if (!ids.insert(s.id).second)
      throw InputError("cohort: duplicate subject id '" + s.id + "'");
    if (s.covariates.size() != cohort.p)
      throw InputError("subject '" + s.id + "': covariate length " +
                       std::to_string(s.covariates.size()) + " != p = " +
                       std::to_string(cohort.p));
    if (!s.covariates.allFinite())
      throw InputError("subject '" + s.id + "': non-finite covariate");
    if (s.treatment < 0 || s.treatment >= cohort.k)
      throw InputError("subject '" + s.id + "': treatment index out of range");
    if (!(s.censor_time >= 0.0) || !std::isfinite(s.censor_time))
      throw InputError("subject '" + s.id + "': invalid censoring time");
    if (s.censor_time > cohort.tau)
      throw InputError("subject '" + s.id + "': censoring time exceeds tau");
    double prev = 0.0;
    for (double e : s.event_times) {
      if (!(e > 0.0))
        throw InputError("subject '" + s.id + "': event time must be positive");
      if (e <= prev && prev > 0.0)
        throw InputError("subject '" + s.id +
                         "': duplicated or unordered event time " +
                         csv::format_double(e));
      if (e > s.censor_time)
        throw InputError("subject '" + s.id + "': event at " +
                         csv::format_double(e) + " after censoring at " +
                         csv::format_double(s.censor_time));
      prev = e;
    }
    arm_counts[static_cast<size_t>(s.treatment)]++;
  }
  for (int a = 0; a < cohort.k; ++a)
    if (arm_counts[static_cast<size_t>(a)] == 0)
      warnings.push_back("arm " + cohort.label_for(a) + " has no subjects");
  return warnings;
}

Cohort parse_cohort(const std::string& text, const CohortSchema& schema,
                    double tau) {
  auto table = csv::parse_csv(text);
  const int id_col = require_column(table, schema.id);
  const int time_col = require_column(table, schema.time);
  const int status_col = require_column(table, schema.status);
  const int trt_col = require_column(table, schema.treatment);

  std::vector<int> cov_cols;
  std::vector<std::string> cov_names;
  if (schema.covariates.empty()) {
    for (size_t j = 0; j < table.header.size(); ++j) {
      const int ij = static_cast<int>(j);
      if (ij == id_col || ij == time_col || ij == status_col || ij == trt_col)
        continue;
      cov_cols.push_back(ij);
      cov_names.push_back(table.header[j]);
    }
  } else {
    for (const auto& name : schema.covariates) {
      cov_cols.push_back(require_column(table, name));
      cov_names.push_back(name);
    }
  }
  const Index p = static_cast<Index>(cov_cols.size());

  struct Raw {
    std::vector<double> events;
    double censor = -1.0;
    bool has_censor = false;
    std::string treatment;
    Vector covariates;
  };
  std::map<std::string, Raw> by_id;
  std::vector<std::string> id_order;

  for (const auto& row : table.rows) {
    const std::string& id = row[static_cast<size_t>(id_col)];
    const std::string context = "row of id '" + id + "'";
    const double time =
        csv::parse_double(row[static_cast<size_t>(time_col)], context);
    const double status =
        csv::parse_double(row[static_cast<size_t>(status_col)], context);
    const std::string& trt = row[static_cast<size_t>(trt_col)];
    Vector x(p);
    for (Index j = 0; j < p; ++j)
      x[j] = csv::parse_double(row[static_cast<size_t>(cov_cols[j])], context);

    auto [it, inserted] = by_id.try_emplace(id);
    Raw& raw = it->second;
    if (inserted) {
      id_order.push_back(id);
      raw.treatment = trt;
      raw.covariates = x;
    } else {
      if (raw.treatment != trt)
        throw InputError("subject '" + id + "': treatment changes across rows");
      if ((raw.covariates - x).cwiseAbs().maxCoeff() != 0.0)
        throw InputError("subject '" + id + "': covariates change across rows");
    }
    if (status == 0.0) {
      if (raw.has_censor)
        throw InputError("subject '" + id + "': more than one censoring row");
      raw.has_censor = true;
      raw.censor = time;
    } else if (status == 1.0) {
      raw.events.push_back(time);
    } else {
      throw InputError("subject '" + id + "': status must be 0 or 1");
    }
  }
  if (by_id.empty()) throw InputError("cohort file has no data rows");

  // Re-code treatments: ascending numeric order when every label is a
  // number, ascending lexicographic otherwise.
  std::set<std::string> label_set;
  for (const auto& [id, raw] : by_id) label_set.insert(raw.treatment);
  std::vector<std::string> labels(label_set.begin(), label_set.end());
  bool all_numeric = true;
  for (const auto& l : labels) {
    double v;
    if (!parse_number(l, &v)) {
      all_numeric = false;
      break;
    }
  }
  if (all_numeric) {
    std::sort(labels.begin(), labels.end(),
              [](const std::string& a, const std::string& b) {
                double va, vb;
                parse_number(a, &va);
                parse_number(b, &vb);
                return va < vb;
              });
  }
  std::map<std::string, int> label_index;
  for (size_t a = 0; a < labels.size(); ++a)
    label_index[labels[a]] = static_cast<int>(a);

  Cohort cohort;
  cohort.p = p;
  cohort.k = static_cast<int>(labels.size());
  cohort.covariate_names = cov_names;
  cohort.treatment_labels = labels;

  double max_censor = 0.0;
  for (const auto& id : id_order) {
    Raw& raw = by_id[id];
    if (!raw.has_censor)
      throw InputError("subject '" + id + "': missing censoring (status 0) row");
    std::sort(raw.events.begin(), raw.events.end());
    Subject s;
    s.id = id;
    s.covariates = raw.covariates;
    s.treatment = label_index[raw.treatment];
    s.event_times = std::move(raw.events);
    s.censor_time = raw.censor;
    max_censor = std::max(max_censor, s.censor_time);
    cohort.subjects.push_back(std::move(s));
  }
  cohort.tau = tau > 0.0 ? tau : max_censor;
  validate_cohort(cohort);
  return cohort;
}

std::string serialize_cohort(const Cohort& cohort, const CohortSchema& schema) {
  std::ostringstream out;
  out << schema.id << ',' << schema.time << ',' << schema.status << ','
      << schema.treatment;
  for (Index j = 0; j < cohort.p; ++j) {
    if (j < static_cast<Index>(cohort.covariate_names.size()))
      out << ',' << cohort.covariate_names[static_cast<size_t>(j)];
    else
      out << ",x" << (j + 1);
  }
  out << '\n';
  for (const auto& s : cohort.subjects) {
    auto row = [&](double time, int status) {
      out << s.id << ',' << csv::format_double(time) << ',' << status << ','
          << cohort.label_for(s.treatment);
      for (Index j = 0; j < cohort.p; ++j)
        out << ',' << csv::format_double(s.covariates[j]);
      out << '\n';
    };
    for (double e : s.event_times) row(e, 1);
    row(s.censor_time, 0);
  }
  return out.str();
}

}  // namespace recl
