#include "recl/pipeline.hpp"

#include <fstream>
#include <sstream>

#include "recl/csv.hpp"
#include "recl/tree.hpp"

namespace recl {

namespace {

template <typename Fn>
auto stage(const std::string& name, Fn&& fn) {
  try {
    return fn();
  } catch (const InputError& e) {
    throw InputError(name + ": " + e.what());
  } catch (const NumericError& e) {
    throw NumericError(name + ": " + e.what());
  }
}

PsModel load_ps_stage(const Cohort& cohort, const RunConfig& config,
                      std::vector<std::string>* warnings) {
  if (config.ps_external_path.empty() && config.ps_covariates.empty())
    throw InputError(
        "propensity required: give a covariate formula or an external table");
  if (!config.ps_external_path.empty()) {
    std::ifstream in(config.ps_external_path, std::ios::binary);
    if (!in)
      throw InputError("cannot open propensity file: " +
                       config.ps_external_path);
    std::ostringstream buf;
    buf << in.rdbuf();
    PsModel ps = load_external_ps(buf.str());
    if (ps.arms != cohort.k)
      throw InputError("external propensity table has " +
                       std::to_string(ps.arms) + " arms, cohort has " +
                       std::to_string(cohort.k));
    return ps;
  }
  PsModel ps = fit_propensity(cohort, config.ps_covariates);
  warnings->insert(warnings->end(), ps.warnings.begin(), ps.warnings.end());
  return ps;
}

void attach_labels(TreeRegime* tree, const Cohort& cohort) {
  tree->feature_names = cohort.covariate_names;
  tree->action_labels = cohort.treatment_labels;
  if (tree->action_labels.empty())
    for (int a = 0; a < cohort.k; ++a)
      tree->action_labels.push_back(std::to_string(a));
}

}  // namespace

FitResult fit_itr(const Cohort& cohort, const RunConfig& config) {
  if (!(config.t > 0.0) || config.t > cohort.tau)
    throw InputError("fit: horizon t must lie in (0, tau]");
  FitResult result;

  const bool needs_pos = config.method != CostMethod::OR;
  const bool needs_smr = config.method != CostMethod::IPW;
  if (needs_pos) {
    result.pos = stage("pseudo-observations",
                       [&] { return pseudo_observations(cohort, config.t); });
    result.ps = stage("propensity", [&] {
      return load_ps_stage(cohort, config, &result.warnings);
    });
  }
  if (needs_smr)
    result.smr =
        stage("outcome-regression", [&] { return fit_smr(cohort, config.smr); });

  result.costs = stage("cost-matrix", [&] {
    return cost_matrix(cohort, config.method, config.t,
                       result.smr ? &*result.smr : nullptr,
                       result.ps ? &*result.ps : nullptr,
                       needs_pos ? &result.pos : nullptr);
  });

  result.tree = stage("classification", [&] {
    auto examples = expand(result.costs, cohort.covariate_matrix());
    TreeRegime tree = fit_weighted_tree(examples, config.tree);
    tree.method = config.method;
    tree.t = config.t;
    return tree;
  });
  attach_labels(&result.tree, cohort);
  return result;
}

FitResult fit_itr_binary(const Cohort& cohort, const RunConfig& config) {
  if (cohort.k != 2)
    throw InputError("binary pipeline requires a two-arm cohort");
  if (!(config.t > 0.0) || config.t > cohort.tau)
    throw InputError("fit: horizon t must lie in (0, tau]");
  FitResult result;

  const bool needs_pos = config.method != CostMethod::OR;
  const bool needs_smr = config.method != CostMethod::IPW;
  if (needs_pos) {
    result.pos = stage("pseudo-observations",
                       [&] { return pseudo_observations(cohort, config.t); });
    result.ps = stage("propensity", [&] {
      return load_ps_stage(cohort, config, &result.warnings);
    });
  }
  if (needs_smr)
    result.smr =
        stage("outcome-regression", [&] { return fit_smr(cohort, config.smr); });

  const BinaryContrast bc = stage("contrast", [&] {
    return binary_contrast(cohort, config.method, config.t,
                           result.smr ? &*result.smr : nullptr,
                           result.ps ? &*result.ps : nullptr,
                           needs_pos ? &result.pos : nullptr);
  });
  // Weighted classification with weight |C| on label W, plus the inert
  // zero-weight twin so the example layout matches the expanded path.
  result.tree = stage("classification", [&] {
    std::vector<ExpandedExample> examples;
    examples.reserve(static_cast<size_t>(2 * cohort.n()));
    for (Index i = 0; i < cohort.n(); ++i) {
      const double c = bc.contrast[i];
      const int label = bc.label[i];
      for (int a = 0; a < 2; ++a) {
        ExpandedExample ex;
        ex.covariates = cohort.subjects[static_cast<size_t>(i)].covariates;
        ex.label = a;
        ex.weight = a == label ? std::abs(c) : 0.0;
        examples.push_back(std::move(ex));
      }
    }
    TreeRegime tree = fit_weighted_tree(examples, config.tree);
    tree.method = config.method;
    tree.t = config.t;
    return tree;
  });
  attach_labels(&result.tree, cohort);

  // Cost-matrix audit output for parity with fit_itr.
  result.costs = stage("cost-matrix", [&] {
    return cost_matrix(cohort, config.method, config.t,
                       result.smr ? &*result.smr : nullptr,
                       result.ps ? &*result.ps : nullptr,
                       needs_pos ? &result.pos : nullptr);
  });
  return result;
}

std::map<std::string, std::string> parse_config(const std::string& text) {
  std::map<std::string, std::string> out;
  std::istringstream in(text);
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    const auto notspace = line.find_first_not_of(" \t");
    if (notspace == std::string::npos) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw InputError("config line " + std::to_string(lineno) +
                       ": expected 'key = value'");
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t");
      const auto e = s.find_last_not_of(" \t");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty())
      throw InputError("config line " + std::to_string(lineno) + ": empty key");
    out[key] = value;
  }
  return out;
}

}  // namespace recl
