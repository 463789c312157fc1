#pragma once

#include <string>
#include <vector>

namespace recl {

/// Nondecreasing right-continuous step function, zero before the first
/// knot. Holds cumulative values at strictly increasing knots; the jump
/// at a knot is included in the value there.
class StepFunction {
 public:
  StepFunction() = default;
  StepFunction(std::vector<double> knots, std::vector<double> values);

  double operator()(double t) const;

  const std::vector<double>& knots() const { return knots_; }
  const std::vector<double>& values() const { return values_; }
  bool empty() const { return knots_.empty(); }

  /// Two-column CSV: "time,value", one row per knot.
  std::string to_csv() const;
  static StepFunction from_csv(const std::string& text);

 private:
  std::vector<double> knots_;
  std::vector<double> values_;
};

}  // namespace recl
