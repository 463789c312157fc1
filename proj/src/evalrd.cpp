#include "recl/evalrd.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "recl/crf.hpp"
#include "recl/csv.hpp"

namespace recl {

double empirical_value(const Cohort& cohort,
                       const std::function<int(const Vector&)>& regime,
                       const PsModel& ps, double t,
                       const std::string& regime_name) {
  const Vector pos = pseudo_observations(cohort, t);
  double num = 0.0;
  double den = 0.0;
  for (Index i = 0; i < cohort.n(); ++i) {
    const Subject& s = cohort.subjects[static_cast<size_t>(i)];
    if (regime(s.covariates) != s.treatment) continue;
    const double w = 1.0 / ps_for_subject(ps, s, s.treatment);
    num += pos[i] * w;
    den += w;
  }
  if (den <= 0.0)
    throw InputError("empirical_value: no subject concordant with '" +
                     regime_name + "'");
  return num / den;
}

double empirical_value(const Cohort& cohort, const TreeRegime& regime,
                       const PsModel& ps, double t) {
  return empirical_value(
      cohort, [&](const Vector& x) { return assign(regime, x); }, ps, t,
      "tree regime");
}

ConcordanceSplit concordance_split(
    const Cohort& cohort, const std::function<int(const Vector&)>& regime) {
  ConcordanceSplit split;
  for (const auto& s : cohort.subjects) {
    if (regime(s.covariates) == s.treatment)
      split.concordant.push_back(s.id);
    else
      split.disconcordant.push_back(s.id);
  }
  return split;
}

ConcordanceSplit concordance_split(const Cohort& cohort,
                                   const TreeRegime& regime) {
  return concordance_split(
      cohort, [&](const Vector& x) { return assign(regime, x); });
}

namespace {

std::string sampled_curve_csv(const Cohort& cohort,
                              const std::vector<std::string>& member,
                              const std::vector<double>& grid) {
  std::ostringstream out;
  out << "time,value\n";
  if (member.empty()) return out.str();  // header only
  const StepFunction curve = group_crf(cohort, member);
  for (double g : grid)
    out << csv::format_double(g) << ',' << csv::format_double(curve(g))
        << '\n';
  return out.str();
}

}  // namespace

GroupCrfCsvs export_group_crfs(const Cohort& cohort,
                               const ConcordanceSplit& split,
                               const std::vector<double>& grid) {
  GroupCrfCsvs out;
  out.concordant_csv = sampled_curve_csv(cohort, split.concordant, grid);
  out.disconcordant_csv = sampled_curve_csv(cohort, split.disconcordant, grid);
  return out;
}

std::string step_curves_svg(const std::vector<StepFunction>& curves,
                            const std::vector<std::string>& labels,
                            double t_max) {
  if (curves.size() != labels.size())
    throw InputError("step_curves_svg: one label per curve required");
  const int width = 640, height = 420, margin = 50;
  double y_max = 1e-12;
  for (const auto& c : curves) y_max = std::max(y_max, c(t_max));
  const char* palette[] = {"#1b6ca8", "#c44536", "#3a7d44", "#7d3ac1"};

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
      << "\" height=\"" << height << "\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  auto px = [&](double t) {
    return margin + t / t_max * (width - 2 * margin);
  };
  auto py = [&](double v) {
    return height - margin - v / y_max * (height - 2 * margin);
  };
  svg << "<line x1=\"" << px(0) << "\" y1=\"" << py(0) << "\" x2=\""
      << px(t_max) << "\" y2=\"" << py(0)
      << "\" stroke=\"black\"/>\n";
  svg << "<line x1=\"" << px(0) << "\" y1=\"" << py(0) << "\" x2=\"" << px(0)
      << "\" y2=\"" << py(y_max) << "\" stroke=\"black\"/>\n";
  for (size_t c = 0; c < curves.size(); ++c) {
    const auto& fn = curves[c];
    std::ostringstream pts;
    double last_v = 0.0;
    pts << px(0) << ',' << py(0);
    for (size_t j = 0; j < fn.knots().size(); ++j) {
      const double kt = fn.knots()[j];
      if (kt > t_max) break;
      pts << ' ' << px(kt) << ',' << py(last_v);  // horizontal run
      last_v = fn.values()[j];
      pts << ' ' << px(kt) << ',' << py(last_v);  // jump
    }
    pts << ' ' << px(t_max) << ',' << py(last_v);
    const char* color = palette[c % 4];
    svg << "<polyline fill=\"none\" stroke=\"" << color
        << "\" stroke-width=\"1.5\" points=\"" << pts.str() << "\"/>\n";
    svg << "<text x=\"" << margin + 8 << "\" y=\""
        << margin + 16 * (c + 1) << "\" fill=\"" << color << "\">"
        << labels[c] << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace recl
