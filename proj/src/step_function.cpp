#include "recl/step_function.hpp"

#include <algorithm>
#include <sstream>

#include "recl/csv.hpp"
#include "recl/types.hpp"

namespace recl {

StepFunction::StepFunction(std::vector<double> knots,
                           std::vector<double> values)
    : knots_(std::move(knots)), values_(std::move(values)) {
  if (knots_.size() != values_.size())
    throw InputError("step function: knots and values differ in length");
  for (size_t i = 1; i < knots_.size(); ++i) {
    if (!(knots_[i] > knots_[i - 1]))
      throw InputError("step function: knots not strictly increasing");
    if (values_[i] < values_[i - 1])
      throw InputError("step function: values decreasing");
  }
}

double StepFunction::operator()(double t) const {
  // Right-continuous: the jump at a knot is included at that knot.
  auto it = std::upper_bound(knots_.begin(), knots_.end(), t);
  if (it == knots_.begin()) return 0.0;
  return values_[static_cast<size_t>(it - knots_.begin()) - 1];
}

std::string StepFunction::to_csv() const {
  std::ostringstream out;
  out << "time,value\n";
  for (size_t i = 0; i < knots_.size(); ++i)
    out << csv::format_double(knots_[i]) << ','
        << csv::format_double(values_[i]) << '\n';
  return out.str();
}

StepFunction StepFunction::from_csv(const std::string& text) {
  auto table = csv::parse_csv(text);
  std::vector<double> knots, values;
  knots.reserve(table.rows.size());
  values.reserve(table.rows.size());
  for (const auto& row : table.rows) {
    knots.push_back(csv::parse_double(row[0], "step function time"));
    values.push_back(csv::parse_double(row[1], "step function value"));
  }
  return StepFunction(std::move(knots), std::move(values));
}

}  // namespace recl
