// Command-line front end: simulate / fit / assign / evaluate / verify.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "recl/cohort.hpp"
#include "recl/contrast.hpp"
#include "recl/crf.hpp"
#include "recl/csv.hpp"
#include "recl/evalrd.hpp"
#include "recl/pipeline.hpp"
#include "recl/propensity.hpp"
#include "recl/sim.hpp"
#include "recl/smr.hpp"
#include "recl/step_function.hpp"
#include "recl/tree.hpp"
#include "recl/types.hpp"

namespace {

constexpr const char* kVersion = "recl 0.1.0";

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw recl::InputError("cannot open file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else if (c != ' ') {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

std::vector<recl::Index> parse_index_list(const std::string& s) {
  std::vector<recl::Index> out;
  for (const auto& item : split_list(s))
    out.push_back(static_cast<recl::Index>(
        recl::csv::parse_double(item, "covariate index list")));
  return out;
}

struct SchemaFlags {
  std::string id = "id", time = "time", status = "status",
              treatment = "treatment";
  std::string covariates;  // comma-separated names, empty = the rest
  double tau = 0.0;

  void attach(CLI::App* cmd) {
    cmd->add_option("--id-col", id, "id column name");
    cmd->add_option("--time-col", time, "time column name");
    cmd->add_option("--status-col", status, "status column name");
    cmd->add_option("--treatment-col", treatment, "treatment column name");
    cmd->add_option("--covariates", covariates,
                    "comma-separated covariate column names");
    cmd->add_option("--tau", tau, "maximum follow-up (default: max censoring)");
  }

  recl::CohortSchema schema() const {
    recl::CohortSchema s;
    s.id = id;
    s.time = time;
    s.status = status;
    s.treatment = treatment;
    s.covariates = split_list(covariates);
    return s;
  }
};

void write_manifest(const std::string& dir, const std::string& subcommand,
                    const std::vector<std::pair<std::string, std::string>>& kv,
                    const std::vector<std::string>& warnings) {
  std::ostringstream out;
  out << "tool = " << kVersion << '\n';
  out << "subcommand = " << subcommand << '\n';
  for (const auto& [k, v] : kv) out << k << " = " << v << '\n';
  for (const auto& w : warnings) out << "warning = " << w << '\n';
  recl::csv::write_file_atomic(dir + "/manifest.txt", out.str());
}

// --------------------------------------------------------------- simulate

struct SimulateArgs {
  int scenario = 1;
  recl::Index n = 600;
  std::vector<double> horizons;
  int reps = 20;
  recl::Index test_size = 5000;
  std::uint64_t seed = 0;
  std::string methods;
  std::string out = ".";
};

int run_simulate(const SimulateArgs& args) {
  recl::ScenarioSpec spec;
  spec.scenario = args.scenario;
  spec.n = args.n;
  spec.horizons = args.horizons.empty() ? std::vector<double>{3.0}
                                        : args.horizons;
  spec.seed = args.seed;
  spec.replicates = args.reps;
  spec.test_size = args.test_size;

  std::vector<recl::SimMethod> methods;
  if (args.methods.empty()) {
    methods = recl::all_sim_methods();
  } else {
    for (const auto& name : split_list(args.methods))
      methods.push_back(recl::sim_method_from_name(name));
  }

  const auto reports = recl::run_experiment(spec, methods);
  std::vector<std::string> failures;
  for (const auto& report : reports) {
    const std::string tag = recl::csv::format_double(report.t);
    recl::csv::write_file_atomic(args.out + "/report_t" + tag + ".csv",
                                 report.to_csv());
    recl::csv::write_file_atomic(args.out + "/summary_t" + tag + ".csv",
                                 report.summary_csv());
    for (const auto& row : report.rows)
      if (row.failed)
        failures.push_back("t=" + tag + " replicate " +
                           std::to_string(row.replicate) + " " +
                           recl::method_name(row.method) + ": " + row.error);
  }
  if (!failures.empty()) {
    std::ostringstream out;
    for (const auto& f : failures) out << f << '\n';
    recl::csv::write_file_atomic(args.out + "/failures.txt", out.str());
  }

  std::vector<std::pair<std::string, std::string>> kv = {
      {"scenario", std::to_string(spec.scenario)},
      {"n", std::to_string(spec.n)},
      {"replicates", std::to_string(spec.replicates)},
      {"test_size", std::to_string(spec.test_size)},
      {"seed", std::to_string(spec.seed)},
      {"failures", std::to_string(failures.size())},
  };
  std::string names;
  for (auto m : methods) names += (names.empty() ? "" : ",") + method_name(m);
  kv.emplace_back("methods", names);
  std::string ts;
  for (double t : spec.horizons)
    ts += (ts.empty() ? "" : ",") + recl::csv::format_double(t);
  kv.emplace_back("horizons", ts);
  write_manifest(args.out, "simulate", kv, {});

  for (const auto& report : reports) {
    std::cout << "t=" << recl::csv::format_double(report.t) << '\n'
              << report.summary_csv();
  }
  return 0;
}

// -------------------------------------------------------------------- fit

struct FitArgs {
  std::string data;
  std::string config_path;
  std::string method;
  double t = 0.0;
  std::string ps_formula;
  std::string ps_external;
  int tree_depth = -1;
  double tree_min_leaf_weight = -1.0;
  double tree_min_split_gain = -1.0;
  double smr_tol = -1.0;
  int smr_max_iter = -1;
  std::uint64_t seed = 0;
  std::string out = ".";
  SchemaFlags schema;
};

recl::Cohort load_cohort(const std::string& path, const SchemaFlags& flags) {
  return recl::parse_cohort(read_file(path), flags.schema(), flags.tau);
}

int run_fit(FitArgs args, const CLI::App* cmd) {
  // Config file first, explicit flags override.
  if (!args.config_path.empty()) {
    const auto cfg = recl::parse_config(read_file(args.config_path));
    static const std::vector<std::string> known = {
        "data",          "method",          "t",
        "ps_formula",    "ps_external",     "tree_max_depth",
        "tree_min_leaf_weight", "tree_min_split_gain",
        "smr_tol",       "smr_max_iter",    "out",
        "seed",          "id_col",          "time_col",
        "status_col",    "treatment_col",   "covariates",
        "tau"};
    for (const auto& [key, value] : cfg)
      if (std::find(known.begin(), known.end(), key) == known.end())
        throw recl::InputError("config: unknown key '" + key + "'");
    auto take = [&](const char* key, auto& slot, auto parse) {
      auto it = cfg.find(key);
      if (it != cfg.end()) slot = parse(it->second);
    };
    auto as_string = [](const std::string& v) { return v; };
    auto as_double = [](const std::string& v) {
      return recl::csv::parse_double(v, "config value");
    };
    auto as_int = [&](const std::string& v) {
      return static_cast<int>(as_double(v));
    };
    auto not_set = [&](const char* flag) {
      return cmd->get_option(flag)->count() == 0;
    };
    if (not_set("--data")) take("data", args.data, as_string);
    if (not_set("--method")) take("method", args.method, as_string);
    if (not_set("--t")) take("t", args.t, as_double);
    if (not_set("--ps-formula")) take("ps_formula", args.ps_formula, as_string);
    if (not_set("--ps-external")) take("ps_external", args.ps_external, as_string);
    if (not_set("--tree-depth")) take("tree_max_depth", args.tree_depth, as_int);
    if (not_set("--tree-min-leaf-weight"))
      take("tree_min_leaf_weight", args.tree_min_leaf_weight, as_double);
    if (not_set("--tree-min-gain"))
      take("tree_min_split_gain", args.tree_min_split_gain, as_double);
    if (not_set("--smr-tol")) take("smr_tol", args.smr_tol, as_double);
    if (not_set("--smr-max-iter"))
      take("smr_max_iter", args.smr_max_iter, as_int);
    if (not_set("--out")) take("out", args.out, as_string);
    if (not_set("--seed"))
      take("seed", args.seed, [&](const std::string& v) {
        return static_cast<std::uint64_t>(as_double(v));
      });
    if (not_set("--id-col")) take("id_col", args.schema.id, as_string);
    if (not_set("--time-col")) take("time_col", args.schema.time, as_string);
    if (not_set("--status-col"))
      take("status_col", args.schema.status, as_string);
    if (not_set("--treatment-col"))
      take("treatment_col", args.schema.treatment, as_string);
    if (not_set("--covariates"))
      take("covariates", args.schema.covariates, as_string);
    if (not_set("--tau")) take("tau", args.schema.tau, as_double);
  }
  if (args.data.empty()) throw recl::InputError("fit: data file required");
  if (args.method.empty()) throw recl::InputError("fit: method required");
  if (!(args.t > 0.0)) throw recl::InputError("fit: horizon t required");

  const recl::Cohort cohort = load_cohort(args.data, args.schema);
  std::vector<std::string> warnings = recl::validate_cohort(cohort);

  recl::RunConfig config;
  config.method = recl::method_from_name(args.method);
  config.t = args.t;
  if (!args.ps_formula.empty())
    config.ps_covariates = parse_index_list(args.ps_formula);
  config.ps_external_path = args.ps_external;
  if (args.tree_depth >= 0) config.tree.max_depth = args.tree_depth;
  if (args.tree_min_leaf_weight >= 0.0)
    config.tree.min_leaf_weight = args.tree_min_leaf_weight;
  if (args.tree_min_split_gain >= 0.0)
    config.tree.min_split_gain = args.tree_min_split_gain;
  if (args.smr_tol > 0.0) config.smr.tol = args.smr_tol;
  if (args.smr_max_iter > 0) config.smr.max_iter = args.smr_max_iter;
  config.seed = args.seed;

  const recl::FitResult result = recl::fit_itr(cohort, config);
  warnings.insert(warnings.end(), result.warnings.begin(),
                  result.warnings.end());

  recl::csv::write_file_atomic(args.out + "/regime.tree",
                               recl::serialize_tree(result.tree));
  recl::csv::write_file_atomic(args.out + "/tree.txt",
                               recl::render_tree(result.tree));
  recl::csv::write_file_atomic(args.out + "/cost_matrix.csv",
                               result.costs.to_csv(cohort));
  if (result.smr) {
    recl::csv::write_file_atomic(args.out + "/smr_summary.txt",
                                 recl::smr_summary(*result.smr));
    recl::csv::write_file_atomic(args.out + "/smr_baseline.csv",
                                 result.smr->baseline.to_csv());
  }
  if (result.ps) {
    recl::csv::write_file_atomic(
        args.out + "/ps_summary.txt",
        recl::ps_summary(*result.ps, cohort.covariate_names));
    recl::csv::write_file_atomic(args.out + "/ps_table.csv",
                                 recl::export_ps_table(*result.ps, cohort));
  }
  {
    std::ostringstream assigned;
    assigned << "id,action\n";
    for (const auto& s : cohort.subjects)
      assigned << s.id << ','
               << cohort.label_for(recl::assign(result.tree, s.covariates))
               << '\n';
    recl::csv::write_file_atomic(args.out + "/assignments.csv",
                                 assigned.str());
  }

  std::vector<std::pair<std::string, std::string>> kv = {
      {"data", args.data},
      {"method", recl::method_name(config.method)},
      {"t", recl::csv::format_double(config.t)},
      {"n", std::to_string(cohort.n())},
      {"arms", std::to_string(cohort.k)},
      {"tau", recl::csv::format_double(cohort.tau)},
      {"tree_max_depth", std::to_string(config.tree.max_depth)},
      {"tree_min_leaf_weight",
       recl::csv::format_double(config.tree.min_leaf_weight)},
      {"tree_min_split_gain",
       recl::csv::format_double(config.tree.min_split_gain)},
      {"seed", std::to_string(config.seed)},
  };
  for (int a = 0; a < cohort.k; ++a)
    kv.emplace_back("treatment_index_" + std::to_string(a),
                    cohort.label_for(a));
  if (!args.ps_formula.empty()) kv.emplace_back("ps_formula", args.ps_formula);
  if (!args.ps_external.empty()) kv.emplace_back("ps_external", args.ps_external);
  write_manifest(args.out, "fit", kv, warnings);

  std::cout << recl::render_tree(result.tree);
  for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';
  return 0;
}

// ------------------------------------------------------------------ assign

struct AssignArgs {
  std::string regime;
  std::string covariates;
  std::string out;
};

int run_assign(const AssignArgs& args) {
  const recl::TreeRegime tree = recl::parse_tree(read_file(args.regime));
  const auto table = recl::csv::parse_csv(read_file(args.covariates));

  // Columns by the regime's feature names when available, otherwise every
  // non-id column in header order.
  std::vector<int> cols;
  const int id_col = table.column("id");
  if (!tree.feature_names.empty()) {
    for (const auto& name : tree.feature_names) {
      const int j = table.column(name);
      if (j < 0)
        throw recl::InputError("covariate file missing column '" + name + "'");
      cols.push_back(j);
    }
  } else {
    for (size_t j = 0; j < table.header.size(); ++j)
      if (static_cast<int>(j) != id_col) cols.push_back(static_cast<int>(j));
  }
  if (static_cast<recl::Index>(cols.size()) != tree.p)
    throw recl::InputError("regime expects " + std::to_string(tree.p) +
                           " covariates, file provides " +
                           std::to_string(cols.size()));

  std::ostringstream out;
  out << "id,action\n";
  for (size_t r = 0; r < table.rows.size(); ++r) {
    recl::Vector x(tree.p);
    for (recl::Index j = 0; j < tree.p; ++j)
      x[j] = recl::csv::parse_double(
          table.rows[r][static_cast<size_t>(cols[static_cast<size_t>(j)])],
          "covariate row " + std::to_string(r + 1));
    const int action = recl::assign(tree, x);
    const std::string label =
        action < static_cast<int>(tree.action_labels.size())
            ? tree.action_labels[static_cast<size_t>(action)]
            : std::to_string(action);
    out << (id_col >= 0 ? table.rows[r][static_cast<size_t>(id_col)]
                        : std::to_string(r + 1))
        << ',' << label << '\n';
  }
  if (args.out.empty())
    std::cout << out.str();
  else
    recl::csv::write_file_atomic(args.out, out.str());
  return 0;
}

// ---------------------------------------------------------------- evaluate

struct EvaluateArgs {
  std::string regime;
  std::string data;
  std::vector<double> horizons;
  std::string ps_formula;
  std::string ps_external;
  int grid_points = 200;
  bool svg = false;
  std::uint64_t seed = 0;
  std::string out = ".";
  SchemaFlags schema;
};

int run_evaluate(const EvaluateArgs& args) {
  const recl::TreeRegime tree = recl::parse_tree(read_file(args.regime));
  const recl::Cohort cohort = load_cohort(args.data, args.schema);
  std::vector<std::string> warnings = recl::validate_cohort(cohort);
  if (tree.arms != cohort.k)
    throw recl::InputError("regime has " + std::to_string(tree.arms) +
                           " actions, cohort has " + std::to_string(cohort.k) +
                           " arms");
  if (!tree.action_labels.empty() &&
      tree.action_labels != cohort.treatment_labels)
    warnings.push_back("regime action labels differ from the cohort's "
                       "treatment labels; indices are compared as-is");

  std::vector<double> horizons = args.horizons;
  if (horizons.empty()) {
    // Readmission-style files default to the one-third quantile and the
    // maximum observed day.
    const auto& names = cohort.covariate_names;
    const bool readmission =
        std::find(names.begin(), names.end(), "sex") != names.end() &&
        std::find(names.begin(), names.end(), "stage") != names.end();
    if (!readmission)
      throw recl::InputError("evaluate: at least one --t horizon required");
    horizons = {316.0, 2176.0};
  }

  recl::PsModel ps;
  if (!args.ps_external.empty()) {
    ps = recl::load_external_ps(read_file(args.ps_external));
  } else {
    std::vector<recl::Index> idx;
    if (!args.ps_formula.empty()) idx = parse_index_list(args.ps_formula);
    ps = recl::fit_propensity(cohort, idx);
    warnings.insert(warnings.end(), ps.warnings.begin(), ps.warnings.end());
  }

  // Table-style value report: observed treatments, the supplied regime,
  // and a seeded uniform-random baseline.
  std::vector<int> random_arms(static_cast<size_t>(cohort.n()));
  {
    recl::Rng rng(args.seed, 0, recl::kStreamRandomArm);
    for (auto& a : random_arms)
      a = std::min(cohort.k - 1,
                   static_cast<int>(rng.uniform01() * cohort.k));
  }
  // Wide layout, one horizon per row and one column per method.
  std::ostringstream report;
  report << "t,Observed,Regime,Random\n";
  for (double t : horizons) {
    report << recl::csv::format_double(t);
    {
      recl::Index i = 0;
      auto observed = [&](const recl::Vector&) {
        return cohort.subjects[static_cast<size_t>(i++)].treatment;
      };
      report << ','
             << recl::csv::format_double(recl::empirical_value(
                    cohort, observed, ps, t, "observed treatments"));
    }
    report << ','
           << recl::csv::format_double(
                  recl::empirical_value(cohort, tree, ps, t));
    {
      recl::Index i = 0;
      auto random_rule = [&](const recl::Vector&) {
        return random_arms[static_cast<size_t>(i++)];
      };
      try {
        report << ','
               << recl::csv::format_double(recl::empirical_value(
                      cohort, random_rule, ps, t, "random baseline"));
      } catch (const recl::InputError&) {
        report << ",NA";  // no concordant subject drawn
      }
    }
    report << '\n';
  }
  recl::csv::write_file_atomic(args.out + "/value_report.csv", report.str());

  const recl::ConcordanceSplit split = recl::concordance_split(cohort, tree);
  {
    std::ostringstream groups;
    groups << "id,group\n";
    for (const auto& id : split.concordant) groups << id << ",concordant\n";
    for (const auto& id : split.disconcordant)
      groups << id << ",disconcordant\n";
    recl::csv::write_file_atomic(args.out + "/concordance.csv", groups.str());
  }

  std::vector<double> grid;
  for (int g = 1; g <= args.grid_points; ++g)
    grid.push_back(cohort.tau * g / args.grid_points);
  const recl::GroupCrfCsvs curves =
      recl::export_group_crfs(cohort, split, grid);
  recl::csv::write_file_atomic(args.out + "/crf_concordant_unadjusted.csv",
                               curves.concordant_csv);
  recl::csv::write_file_atomic(args.out + "/crf_disconcordant_unadjusted.csv",
                               curves.disconcordant_csv);
  if (args.svg) {
    std::vector<recl::StepFunction> fns;
    std::vector<std::string> labels;
    if (!split.concordant.empty()) {
      fns.push_back(recl::group_crf(cohort, split.concordant));
      labels.push_back("concordant (unadjusted)");
    }
    if (!split.disconcordant.empty()) {
      fns.push_back(recl::group_crf(cohort, split.disconcordant));
      labels.push_back("disconcordant (unadjusted)");
    }
    recl::csv::write_file_atomic(
        args.out + "/crf_curves_unadjusted.svg",
        recl::step_curves_svg(fns, labels, cohort.tau));
  }

  std::vector<std::pair<std::string, std::string>> kv = {
      {"regime", args.regime},
      {"data", args.data},
      {"n", std::to_string(cohort.n())},
      {"concordant", std::to_string(split.concordant.size())},
      {"disconcordant", std::to_string(split.disconcordant.size())},
      {"seed", std::to_string(args.seed)},
      {"crf_adjustment", "none (unadjusted subgroup curves)"},
  };
  for (int a = 0; a < cohort.k; ++a)
    kv.emplace_back("treatment_index_" + std::to_string(a),
                    cohort.label_for(a));
  std::string ts;
  for (double t : horizons)
    ts += (ts.empty() ? "" : ",") + recl::csv::format_double(t);
  kv.emplace_back("horizons", ts);
  write_manifest(args.out, "evaluate", kv, warnings);

  std::cout << report.str();
  return 0;
}

// ------------------------------------------------------------------ verify

bool check(const std::string& name, bool ok) {
  std::cout << (ok ? "PASS" : "FAIL") << "  " << name << '\n';
  return ok;
}

int run_verify(std::uint64_t seed) {
  bool all_ok = true;

  {  // efficient vs naive pseudo-observations
    double worst = 0.0;
    for (int r = 0; r < 50; ++r) {
      recl::Rng rng(seed, static_cast<std::uint64_t>(r), 100);
      const recl::Cohort cohort =
          recl::random_cohort(rng, 5 + r % 36, 2 + r % 2);
      const double t = 0.75 * cohort.tau;
      const recl::Vector a = recl::pseudo_observations(cohort, t);
      const recl::Vector b = recl::pseudo_observations_naive(cohort, t);
      worst = std::max(worst, (a - b).cwiseAbs().maxCoeff());
    }
    all_ok &= check("pseudo-observations: efficient == naive (50 cohorts, "
                    "tol 1e-10)",
                    worst < 1e-10);
  }

  {  // uncensored pseudo-observations are the raw counts
    bool exact = true;
    for (int r = 0; r < 20; ++r) {
      recl::Rng rng(seed, static_cast<std::uint64_t>(r), 101);
      const recl::Cohort cohort = recl::random_cohort(rng, 12 + r, 2);
      const double t = 0.4 * cohort.tau;  // before every censoring time
      const recl::Vector pos = recl::pseudo_observations(cohort, t);
      for (recl::Index i = 0; i < cohort.n(); ++i)
        exact &=
            pos[i] ==
            recl::count_at(cohort.subjects[static_cast<size_t>(i)], t);
    }
    all_ok &= check("pseudo-observations: equal to counts with no censoring "
                    "before t (exact)",
                    exact);
  }

  {  // expansion objective identity: the expanded misclassification loss
     // of any regime differs from the direct cost objective by a
     // regime-independent constant
    double worst = 0.0;
    for (int r = 0; r < 50; ++r) {
      recl::Rng rng(seed, static_cast<std::uint64_t>(r), 102);
      const int n = 4 + r % 5, k = 2 + r % 2;
      recl::Matrix signals(n, k);
      recl::Matrix x(n, 2);
      for (int i = 0; i < n; ++i) {
        for (int a = 0; a < k; ++a) signals(i, a) = rng.normal();
        x(i, 0) = rng.normal();
        x(i, 1) = rng.normal();
      }
      const recl::CostMatrix cm =
          recl::costs_from_signals(signals, recl::CostMethod::AIPW, 1.0);
      const auto examples = recl::expand(cm, x);
      double weight_sum = 0.0, row_max_sum = 0.0;
      for (const auto& ex : examples) weight_sum += ex.weight;
      for (int i = 0; i < n; ++i) row_max_sum += cm.costs.row(i).maxCoeff();
      const double constant = weight_sum - row_max_sum;
      for (int g = 0; g < k; ++g) {  // constant regimes reach every label
        double expanded = 0.0, direct = 0.0;
        for (const auto& ex : examples)
          if (ex.label != g) expanded += ex.weight;
        for (int i = 0; i < n; ++i) direct += cm.costs(i, g);
        worst = std::max(worst, std::abs(expanded - (constant + direct)));
      }
    }
    all_ok &= check("data-space expansion: objective identity (tol 1e-10)",
                    worst < 1e-10);
  }

  {  // fitted tree vs exhaustive oracle: grid-valued covariates so the
     // candidate splits cover every threshold the greedy tree can use
    int agreed = 0;
    const int trials = 25;
    for (int r = 0; r < trials; ++r) {
      recl::Rng rng(seed, static_cast<std::uint64_t>(r), 103);
      const int n = 8, k = 2 + r % 2;
      recl::Matrix signals(n, k), x(n, 2);
      for (int i = 0; i < n; ++i) {
        for (int a = 0; a < k; ++a) signals(i, a) = rng.normal();
        x(i, 0) = static_cast<double>(static_cast<int>(rng.uniform01() * 3)) -
                  1.0;
        x(i, 1) = static_cast<double>(static_cast<int>(rng.uniform01() * 3)) -
                  1.0;
      }
      const recl::CostMatrix cm =
          recl::costs_from_signals(signals, recl::CostMethod::AIPW, 1.0);
      const std::vector<recl::CandidateSplit> splits = {
          {0, -0.5}, {0, 0.5}, {1, -0.5}, {1, 0.5}};
      const auto oracle = recl::brute_force_regime(cm, x, splits, 2);
      const auto examples = recl::expand(cm, x);
      recl::TreeConfig config;
      config.max_depth = 2;
      const recl::TreeRegime tree = recl::fit_weighted_tree(examples, config);
      const double tree_obj = recl::regime_cost(tree, cm.costs, x);
      if (tree_obj >= oracle.objective - 1e-10) ++agreed;
    }
    all_ok &= check(
        "weighted tree: objective never beats the covering exhaustive oracle "
        "(25 instances)",
        agreed == trials);
  }

  {  // binary and expanded K = 2 routes agree
    bool same = true;
    for (int r = 0; r < 10; ++r) {
      recl::Rng rng(seed, static_cast<std::uint64_t>(r), 104);
      const recl::Cohort cohort = recl::random_cohort(rng, 40, 2);
      recl::RunConfig config;
      config.method = recl::CostMethod::IPW;
      config.t = 0.75 * cohort.tau;
      config.ps_covariates = {0, 1, 2};
      const auto a = recl::fit_itr(cohort, config);
      const auto b = recl::fit_itr_binary(cohort, config);
      same &= recl::serialize_tree(a.tree) == recl::serialize_tree(b.tree);
    }
    all_ok &= check("binary route == expanded route on K=2 cohorts (10 "
                    "cohorts, bit-identical trees)",
                    same);
  }

  {  // first-event pseudo-observations
    double worst = 0.0;
    for (int r = 0; r < 25; ++r) {
      recl::Rng rng(seed, static_cast<std::uint64_t>(r), 105);
      const recl::Cohort cohort = recl::random_cohort(rng, 5 + r, 2);
      const double t = 0.75 * cohort.tau;
      const recl::Vector a = recl::first_event_pseudo_observations(cohort, t);
      const recl::Vector b =
          recl::first_event_pseudo_observations_naive(cohort, t);
      worst = std::max(worst, (a - b).cwiseAbs().maxCoeff());
    }
    all_ok &= check("first-event pseudo-observations: efficient == naive "
                    "(25 cohorts, tol 1e-10)",
                    worst < 1e-10);
  }

  return all_ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "recl: interpretable treatment regimes from recurrent-event data"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  SimulateArgs sim_args;
  auto* sim_cmd =
      app.add_subcommand("simulate", "run a replicated scenario experiment");
  sim_cmd->add_option("--scenario", sim_args.scenario, "1 (binary) or 2 (3-arm)")
      ->check(CLI::Range(1, 2));
  sim_cmd->add_option("--n", sim_args.n, "training sample size");
  sim_cmd->add_option("--t", sim_args.horizons, "horizon(s), repeatable");
  sim_cmd->add_option("--reps", sim_args.reps, "number of replicates");
  sim_cmd->add_option("--test-size", sim_args.test_size, "evaluation sample");
  sim_cmd->add_option("--seed", sim_args.seed, "random seed")->required();
  sim_cmd->add_option("--methods", sim_args.methods,
                      "comma-separated method names (default: all)");
  sim_cmd->add_option("--out", sim_args.out, "output directory");

  FitArgs fit_args;
  auto* fit_cmd = app.add_subcommand("fit", "estimate a tree regime");
  fit_cmd->add_option("--data", fit_args.data, "long-format cohort CSV");
  fit_cmd->add_option("--config", fit_args.config_path,
                      "key = value configuration file");
  fit_cmd->add_option("--method", fit_args.method, "OR, IPW or AIPW");
  fit_cmd->add_option("--t", fit_args.t, "horizon");
  fit_cmd->add_option("--ps-formula", fit_args.ps_formula,
                      "propensity covariate indices, e.g. 0,1");
  fit_cmd->add_option("--ps-external", fit_args.ps_external,
                      "external propensity CSV (id,ps_0,...)");
  fit_cmd->add_option("--tree-depth", fit_args.tree_depth, "max tree depth");
  fit_cmd->add_option("--tree-min-leaf-weight", fit_args.tree_min_leaf_weight,
                      "minimum child weight per split");
  fit_cmd->add_option("--tree-min-gain", fit_args.tree_min_split_gain,
                      "minimum impurity gain per split");
  fit_cmd->add_option("--smr-tol", fit_args.smr_tol,
                      "outcome-model score tolerance");
  fit_cmd->add_option("--smr-max-iter", fit_args.smr_max_iter,
                      "outcome-model Newton iteration cap");
  fit_cmd->add_option("--seed", fit_args.seed, "seed recorded in the manifest");
  fit_cmd->add_option("--out", fit_args.out, "output directory");
  fit_args.schema.attach(fit_cmd);

  AssignArgs assign_args;
  auto* assign_cmd =
      app.add_subcommand("assign", "apply a regime to covariate rows");
  assign_cmd->add_option("--regime", assign_args.regime, "regime.tree file")
      ->required();
  assign_cmd
      ->add_option("--covariates", assign_args.covariates, "covariate CSV")
      ->required();
  assign_cmd->add_option("--out", assign_args.out,
                         "output CSV (default: stdout)");

  EvaluateArgs eval_args;
  auto* eval_cmd = app.add_subcommand(
      "evaluate", "empirical value and concordance on observed data");
  eval_cmd->add_option("--regime", eval_args.regime, "regime.tree file")
      ->required();
  eval_cmd->add_option("--data", eval_args.data, "long-format cohort CSV")
      ->required();
  eval_cmd->add_option("--t", eval_args.horizons, "horizon(s), repeatable");
  eval_cmd->add_option("--ps-formula", eval_args.ps_formula,
                       "propensity covariate indices");
  eval_cmd->add_option("--ps-external", eval_args.ps_external,
                       "external propensity CSV");
  eval_cmd->add_option("--grid-points", eval_args.grid_points,
                       "CRF sampling grid size");
  eval_cmd->add_flag("--svg", eval_args.svg, "also write an SVG step plot");
  eval_cmd->add_option("--seed", eval_args.seed, "seed for the Random row");
  eval_cmd->add_option("--out", eval_args.out, "output directory");
  eval_args.schema.attach(eval_cmd);

  std::uint64_t verify_seed = 1;
  auto* verify_cmd = app.add_subcommand(
      "verify", "run the small-instance oracle property suites");
  verify_cmd->add_option("--seed", verify_seed, "suite seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim_cmd->parsed()) return run_simulate(sim_args);
    if (fit_cmd->parsed()) return run_fit(fit_args, fit_cmd);
    if (assign_cmd->parsed()) return run_assign(assign_args);
    if (eval_cmd->parsed()) return run_evaluate(eval_args);
    if (verify_cmd->parsed()) return run_verify(verify_seed);
  } catch (const recl::InputError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const recl::NumericError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
