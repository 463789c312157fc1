#include "recl/tree.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "recl/csv.hpp"

namespace recl {

std::vector<ExpandedExample> expand(const CostMatrix& cm, const Matrix& X) {
  if (X.rows() != cm.n())
    throw InputError("expand: covariate rows do not match the cost matrix");
  std::vector<ExpandedExample> out;
  out.reserve(static_cast<size_t>(cm.n()) * static_cast<size_t>(cm.arms()));
  for (Index i = 0; i < cm.n(); ++i) {
    const double row_max = cm.costs.row(i).maxCoeff();
    for (int a = 0; a < cm.arms(); ++a) {
      ExpandedExample ex;
      ex.covariates = X.row(i);
      ex.label = a;
      ex.weight = row_max - cm.costs(i, a);
      out.push_back(std::move(ex));
    }
  }
  return out;
}

namespace {

// Total-weighted Gini impurity: W - sum_k W_k^2 / W, zero on empty or
// weightless sets.
double gini(const std::vector<double>& class_w, double total) {
  if (total <= 0.0) return 0.0;
  double sq = 0.0;
  for (double w : class_w) sq += w * w;
  return total - sq / total;
}

struct Builder {
  const std::vector<ExpandedExample>& examples;
  const TreeConfig& config;
  int arms;
  Index p;
  double total_count;
  std::vector<TreeNode> nodes;
  int max_depth_reached = 0;

  int build(std::vector<int>& idx, int depth) {
    std::vector<double> class_w(static_cast<size_t>(arms), 0.0);
    for (int i : idx)
      class_w[static_cast<size_t>(examples[static_cast<size_t>(i)].label)] +=
          examples[static_cast<size_t>(i)].weight;
    const double total_w =
        std::accumulate(class_w.begin(), class_w.end(), 0.0);

    TreeNode node;
    node.pop_share = static_cast<double>(idx.size()) / total_count;
    node.action_dist.assign(static_cast<size_t>(arms), 0.0);
    if (total_w > 0.0)
      for (int a = 0; a < arms; ++a)
        node.action_dist[static_cast<size_t>(a)] =
            class_w[static_cast<size_t>(a)] / total_w;
    node.action = 0;
    for (int a = 1; a < arms; ++a)
      if (class_w[static_cast<size_t>(a)] >
          class_w[static_cast<size_t>(node.action)])
        node.action = a;
    max_depth_reached = std::max(max_depth_reached, depth);

    int best_feature = -1;
    double best_threshold = 0.0;
    double best_gain = config.min_split_gain;
    if (depth < config.max_depth && total_w > 0.0) {
      const double parent_imp = gini(class_w, total_w);
      std::vector<int> order;
      std::vector<double> left_w(static_cast<size_t>(arms));
      for (Index f = 0; f < p; ++f) {
        order = idx;
        std::sort(order.begin(), order.end(), [&](int a, int b) {
          const double va =
              examples[static_cast<size_t>(a)].covariates[f];
          const double vb =
              examples[static_cast<size_t>(b)].covariates[f];
          return va != vb ? va < vb : a < b;
        });
        std::fill(left_w.begin(), left_w.end(), 0.0);
        double left_total = 0.0;
        for (size_t j = 0; j + 1 < order.size(); ++j) {
          const auto& ex = examples[static_cast<size_t>(order[j])];
          left_w[static_cast<size_t>(ex.label)] += ex.weight;
          left_total += ex.weight;
          const double v = ex.covariates[f];
          const double v_next =
              examples[static_cast<size_t>(order[j + 1])].covariates[f];
          if (v == v_next) continue;
          if (left_total < config.min_leaf_weight ||
              total_w - left_total < config.min_leaf_weight)
            continue;
          double left_sq = 0.0, right_sq = 0.0;
          for (int a = 0; a < arms; ++a) {
            const double lw = left_w[static_cast<size_t>(a)];
            const double rw = class_w[static_cast<size_t>(a)] - lw;
            left_sq += lw * lw;
            right_sq += rw * rw;
          }
          const double right_total = total_w - left_total;
          const double left_imp =
              left_total > 0.0 ? left_total - left_sq / left_total : 0.0;
          const double right_imp =
              right_total > 0.0 ? right_total - right_sq / right_total : 0.0;
          const double gain = parent_imp - left_imp - right_imp;
          if (gain > best_gain) {  // strict: ties keep the earlier candidate
            best_gain = gain;
            best_feature = static_cast<int>(f);
            best_threshold = v + 0.5 * (v_next - v);
          }
        }
      }
    }

    const int self = static_cast<int>(nodes.size());
    nodes.push_back(node);
    if (best_feature < 0) return self;

    std::vector<int> left_idx, right_idx;
    for (int i : idx) {
      if (examples[static_cast<size_t>(i)].covariates[best_feature] <=
          best_threshold)
        left_idx.push_back(i);
      else
        right_idx.push_back(i);
    }
    nodes[static_cast<size_t>(self)].is_leaf = false;
    nodes[static_cast<size_t>(self)].feature = best_feature;
    nodes[static_cast<size_t>(self)].threshold = best_threshold;
    const int left = build(left_idx, depth + 1);
    nodes[static_cast<size_t>(self)].left = left;
    const int right = build(right_idx, depth + 1);
    nodes[static_cast<size_t>(self)].right = right;
    return self;
  }
};

}  // namespace

TreeRegime fit_weighted_tree(const std::vector<ExpandedExample>& examples,
                             const TreeConfig& config) {
  TreeRegime tree;
  if (examples.empty()) {
    tree.nodes.push_back(TreeNode{});
    tree.nodes[0].action_dist = {0.0, 0.0};
    return tree;
  }
  int arms = 2;
  for (const auto& ex : examples) arms = std::max(arms, ex.label + 1);
  const Index p = examples[0].covariates.size();
  for (const auto& ex : examples) {
    if (ex.covariates.size() != p)
      throw InputError("fit_weighted_tree: ragged covariate lengths");
    if (!(ex.weight >= 0.0))
      throw InputError("fit_weighted_tree: negative example weight");
  }

  Builder builder{examples, config, arms, p,
                  static_cast<double>(examples.size()), {}, 0};
  std::vector<int> idx(examples.size());
  std::iota(idx.begin(), idx.end(), 0);
  builder.build(idx, 0);

  tree.nodes = std::move(builder.nodes);
  tree.depth = builder.max_depth_reached;
  tree.arms = arms;
  tree.p = p;
  return tree;
}

int assign(const TreeRegime& tree, const Vector& x) {
  if (tree.empty()) throw InputError("assign: empty tree");
  if (x.size() != tree.p)
    throw InputError("assign: covariate length " + std::to_string(x.size()) +
                     " != tree dimension " + std::to_string(tree.p));
  int node = 0;
  while (!tree.nodes[static_cast<size_t>(node)].is_leaf) {
    const TreeNode& n = tree.nodes[static_cast<size_t>(node)];
    node = x[n.feature] <= n.threshold ? n.left : n.right;
  }
  return tree.nodes[static_cast<size_t>(node)].action;
}

namespace {

std::string join(const std::vector<std::string>& parts, char sep) {
  std::string out;
  for (size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

std::vector<std::string> split_on(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

void render_node(const TreeRegime& tree, int node_id,
                 const std::vector<std::string>& fnames,
                 const std::vector<std::string>& anames,
                 const std::string& prefix, std::ostringstream& out) {
  const TreeNode& node = tree.nodes[static_cast<size_t>(node_id)];
  out << "action=" << anames[static_cast<size_t>(node.action)];
  if (tree.arms == 2)
    out << "  p(" << anames[1] << ")=" << csv::format_double(node.action_dist[1]);
  else {
    out << "  dist=(";
    for (size_t a = 0; a < node.action_dist.size(); ++a)
      out << (a ? "," : "") << csv::format_double(node.action_dist[a]);
    out << ")";
  }
  out << "  pop=" << csv::format_double(node.pop_share) << '\n';
  if (node.is_leaf) return;
  const std::string& fname = fnames[static_cast<size_t>(node.feature)];
  out << prefix << "+- " << fname
      << " <= " << csv::format_double(node.threshold) << ": ";
  render_node(tree, node.left, fnames, anames, prefix + "|  ", out);
  out << prefix << "+- " << fname << " > "
      << csv::format_double(node.threshold) << ": ";
  render_node(tree, node.right, fnames, anames, prefix + "   ", out);
}

}  // namespace

std::string render_tree(const TreeRegime& tree,
                        const std::vector<std::string>& feature_names,
                        const std::vector<std::string>& action_names) {
  if (tree.empty()) throw InputError("render_tree: empty tree");
  std::vector<std::string> fnames = feature_names;
  if (fnames.empty()) fnames = tree.feature_names;
  if (fnames.empty())
    for (Index j = 0; j < tree.p; ++j)
      fnames.push_back("x" + std::to_string(j + 1));
  if (static_cast<Index>(fnames.size()) != tree.p)
    throw InputError("render_tree: " + std::to_string(fnames.size()) +
                     " feature names for dimension " + std::to_string(tree.p));
  std::vector<std::string> anames = action_names;
  if (anames.empty()) anames = tree.action_labels;
  if (anames.empty())
    for (int a = 0; a < tree.arms; ++a) anames.push_back(std::to_string(a));
  if (static_cast<int>(anames.size()) != tree.arms)
    throw InputError("render_tree: " + std::to_string(anames.size()) +
                     " action names for " + std::to_string(tree.arms) +
                     " arms");
  std::ostringstream out;
  out << "tree regime (method=" << method_name(tree.method)
      << ", t=" << csv::format_double(tree.t) << ", depth=" << tree.depth
      << ")\n";
  render_node(tree, 0, fnames, anames, "", out);
  return out.str();
}

namespace {

void serialize_node(const TreeRegime& tree, int node_id,
                    std::ostringstream& out) {
  const TreeNode& node = tree.nodes[static_cast<size_t>(node_id)];
  std::vector<std::string> dist;
  for (double v : node.action_dist) dist.push_back(csv::format_double(v));
  if (node.is_leaf) {
    out << "leaf " << node.action << ' ' << csv::format_double(node.pop_share)
        << ' ' << join(dist, ',') << '\n';
    return;
  }
  out << "split " << node.feature << ' ' << csv::format_double(node.threshold)
      << ' ' << node.action << ' ' << csv::format_double(node.pop_share) << ' '
      << join(dist, ',') << '\n';
  serialize_node(tree, node.left, out);
  serialize_node(tree, node.right, out);
}

}  // namespace

std::string serialize_tree(const TreeRegime& tree) {
  if (tree.empty()) throw InputError("serialize_tree: empty tree");
  std::ostringstream out;
  out << "recl-tree 1\n";
  out << "arms " << tree.arms << '\n';
  out << "p " << tree.p << '\n';
  out << "depth " << tree.depth << '\n';
  out << "method " << method_name(tree.method) << '\n';
  out << "horizon " << csv::format_double(tree.t) << '\n';
  if (!tree.feature_names.empty())
    out << "feature_names " << join(tree.feature_names, ',') << '\n';
  if (!tree.action_labels.empty())
    out << "action_labels " << join(tree.action_labels, ',') << '\n';
  out << "nodes " << tree.nodes.size() << '\n';
  serialize_node(tree, 0, out);
  return out.str();
}

namespace {

struct TreeParser {
  std::vector<std::string> lines;
  size_t pos = 0;

  const std::string& next() {
    if (pos >= lines.size()) throw InputError("tree file truncated");
    return lines[pos++];
  }

  int parse_node(TreeRegime* tree) {
    const std::string line = next();
    auto fields = split_on(line, ' ');
    const int self = static_cast<int>(tree->nodes.size());
    tree->nodes.emplace_back();
    if (fields[0] == "leaf") {
      if (fields.size() != 4)
        throw InputError("tree file: malformed leaf line '" + line + "'");
      TreeNode node;
      node.is_leaf = true;
      node.action = static_cast<int>(
          csv::parse_double(fields[1], "tree leaf action"));
      node.pop_share = csv::parse_double(fields[2], "tree leaf pop");
      for (const auto& v : split_on(fields[3], ','))
        node.action_dist.push_back(csv::parse_double(v, "tree leaf dist"));
      tree->nodes[static_cast<size_t>(self)] = std::move(node);
      return self;
    }
    if (fields[0] != "split" || fields.size() != 6)
      throw InputError("tree file: malformed node line '" + line + "'");
    TreeNode node;
    node.is_leaf = false;
    node.feature =
        static_cast<int>(csv::parse_double(fields[1], "tree split feature"));
    node.threshold = csv::parse_double(fields[2], "tree split threshold");
    node.action =
        static_cast<int>(csv::parse_double(fields[3], "tree split action"));
    node.pop_share = csv::parse_double(fields[4], "tree split pop");
    for (const auto& v : split_on(fields[5], ','))
      node.action_dist.push_back(csv::parse_double(v, "tree split dist"));
    tree->nodes[static_cast<size_t>(self)] = std::move(node);
    const int left = parse_node(tree);
    tree->nodes[static_cast<size_t>(self)].left = left;
    const int right = parse_node(tree);
    tree->nodes[static_cast<size_t>(self)].right = right;
    return self;
  }
};

}  // namespace

TreeRegime parse_tree(const std::string& text) {
  TreeParser parser;
  for (const auto& raw : split_on(text, '\n')) {
    std::string line = raw;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) parser.lines.push_back(line);
  }
  if (parser.lines.empty() || parser.lines[0] != "recl-tree 1")
    throw InputError("not a recl-tree file (missing 'recl-tree 1' tag)");
  parser.pos = 1;
  TreeRegime tree;
  size_t declared_nodes = 0;
  while (parser.pos < parser.lines.size()) {
    const std::string& line = parser.lines[parser.pos];
    auto sp = line.find(' ');
    const std::string key = line.substr(0, sp);
    const std::string value = sp == std::string::npos ? "" : line.substr(sp + 1);
    if (key == "arms")
      tree.arms = static_cast<int>(csv::parse_double(value, "tree arms"));
    else if (key == "p")
      tree.p = static_cast<Index>(csv::parse_double(value, "tree p"));
    else if (key == "depth")
      tree.depth = static_cast<int>(csv::parse_double(value, "tree depth"));
    else if (key == "method") tree.method = method_from_name(value);
    else if (key == "horizon") tree.t = csv::parse_double(value, "tree horizon");
    else if (key == "feature_names") tree.feature_names = split_on(value, ',');
    else if (key == "action_labels") tree.action_labels = split_on(value, ',');
    else if (key == "nodes") {
      declared_nodes =
          static_cast<size_t>(csv::parse_double(value, "tree node count"));
      ++parser.pos;
      break;
    } else {
      throw InputError("tree file: unknown header line '" + line + "'");
    }
    ++parser.pos;
  }
  parser.parse_node(&tree);
  if (tree.nodes.size() != declared_nodes)
    throw InputError("tree file: node count mismatch");
  for (const auto& node : tree.nodes) {
    if (!node.is_leaf && (node.feature < 0 || node.feature >= tree.p))
      throw InputError("tree file: split feature out of range");
    if (node.action < 0 || node.action >= tree.arms)
      throw InputError("tree file: action out of range");
  }
  return tree;
}

// ---------------------------------------------------------------------
// exhaustive oracle

namespace {

struct BfNode {
  int action = -1;  // >= 0 for a leaf
  int split = -1;   // candidate index otherwise
  int left = -1, right = -1;
};

// Exhausts the depth <= d tree space over a row set: cost is additive
// over rows, so the best tree is min(best leaf, best split with both
// subtrees optimised on the induced partitions). Ties prefer the leaf,
// then the smaller action / earlier split (strict '<' throughout).
struct BfSearch {
  const Matrix& losses;
  const std::vector<CandidateSplit>& splits;
  std::vector<std::vector<bool>> goes_left;
  int arms;

  double subtree(int depth, const std::vector<int>& rows,
                 std::vector<BfNode>* nodes_out) const;
};

double BfSearch::subtree(int depth, const std::vector<int>& rows,
                         std::vector<BfNode>* nodes_out) const {
  double best = std::numeric_limits<double>::infinity();
  int best_action = 0;
  for (int a = 0; a < arms; ++a) {
    double c = 0.0;
    for (int r : rows) c += losses(r, a);
    if (c < best) {
      best = c;
      best_action = a;
    }
  }
  std::vector<BfNode> best_sub{{best_action, -1, -1, -1}};
  if (depth > 0) {
    for (size_t s = 0; s < splits.size(); ++s) {
      std::vector<int> left_rows, right_rows;
      for (int r : rows)
        (goes_left[s][static_cast<size_t>(r)] ? left_rows : right_rows)
            .push_back(r);
      std::vector<BfNode> lnodes, rnodes;
      const double lc = subtree(depth - 1, left_rows, &lnodes);
      const double rc = subtree(depth - 1, right_rows, &rnodes);
      if (lc + rc < best) {
        best = lc + rc;
        best_sub.clear();
        BfNode root;
        root.split = static_cast<int>(s);
        root.left = 1;
        root.right = 1 + static_cast<int>(lnodes.size());
        best_sub.push_back(root);
        for (auto& nd : lnodes) {
          if (nd.left >= 0) nd.left += 1;
          if (nd.right >= 0) nd.right += 1;
          best_sub.push_back(nd);
        }
        const int off = 1 + static_cast<int>(lnodes.size());
        for (auto& nd : rnodes) {
          if (nd.left >= 0) nd.left += off;
          if (nd.right >= 0) nd.right += off;
          best_sub.push_back(nd);
        }
      }
    }
  }
  *nodes_out = std::move(best_sub);
  return best;
}

}  // namespace

BruteForceResult brute_force_regime(const Matrix& losses, const Matrix& X,
                                    const std::vector<CandidateSplit>& splits,
                                    int max_depth) {
  const Index n = losses.rows();
  const int arms = static_cast<int>(losses.cols());
  if (n > 12 || arms > 3 || splits.size() > 6 || max_depth > 2)
    throw InputError(
        "brute_force_regime: instance too large (limits: n <= 12, arms <= 3, "
        "splits <= 6, depth <= 2)");
  if (X.rows() != n) throw InputError("brute_force_regime: row mismatch");

  BfSearch search{losses, splits, {}, arms};
  search.goes_left.resize(splits.size());
  for (size_t s = 0; s < splits.size(); ++s) {
    search.goes_left[s].resize(static_cast<size_t>(n));
    if (splits[s].feature < 0 || splits[s].feature >= X.cols())
      throw InputError("brute_force_regime: split feature out of range");
    for (Index r = 0; r < n; ++r)
      search.goes_left[s][static_cast<size_t>(r)] =
          X(r, splits[s].feature) <= splits[s].threshold;
  }
  std::vector<int> rows(static_cast<size_t>(n));
  std::iota(rows.begin(), rows.end(), 0);
  std::vector<BfNode> nodes;
  const double obj = search.subtree(max_depth, rows, &nodes);

  BruteForceResult result;
  result.objective = obj;
  result.regime.arms = arms;
  result.regime.p = X.cols();
  result.regime.depth = max_depth;
  for (const auto& nd : nodes) {
    TreeNode out;
    out.action_dist.assign(static_cast<size_t>(arms), 0.0);
    if (nd.action >= 0) {
      out.is_leaf = true;
      out.action = nd.action;
    } else {
      out.is_leaf = false;
      out.feature = splits[static_cast<size_t>(nd.split)].feature;
      out.threshold = splits[static_cast<size_t>(nd.split)].threshold;
      out.left = nd.left;
      out.right = nd.right;
    }
    result.regime.nodes.push_back(std::move(out));
  }
  return result;
}

BruteForceResult brute_force_regime(const CostMatrix& cm, const Matrix& X,
                                    const std::vector<CandidateSplit>& splits,
                                    int max_depth) {
  auto result = brute_force_regime(cm.costs, X, splits, max_depth);
  result.regime.method = cm.method;
  result.regime.t = cm.t;
  return result;
}

double regime_cost(const TreeRegime& tree, const Matrix& losses,
                   const Matrix& X) {
  double total = 0.0;
  for (Index i = 0; i < X.rows(); ++i)
    total += losses(i, assign(tree, X.row(i)));
  return total;
}

}  // namespace recl
