#pragma once

#include <string>
#include <vector>

#include "recl/contrast.hpp"
#include "recl/types.hpp"

namespace recl {

/// One row of the expanded classification data set: the subject's
/// covariates labelled with arm `label` and a nonnegative benefit weight.
struct ExpandedExample {
  Vector covariates;
  int label = 0;
  double weight = 0.0;
};

/// Data-space expansion of a cost matrix: one example per (subject, arm)
/// with benefit weight w_i^k = max_s C_i^s - C_i^k. For any regime g the
/// expanded weighted misclassification sum_i sum_k w_i^k I(g(X_i) != k)
/// equals sum_i C_i^{g(X_i)} plus a regime-independent constant, so the
/// weighted classifier minimises the original cost objective. At K = 2
/// this reduces to weight |C| on label W with an inert zero-weight twin.
std::vector<ExpandedExample> expand(const CostMatrix& cm, const Matrix& X);

struct TreeNode {
  bool is_leaf = true;
  int feature = -1;        // splits only
  double threshold = 0.0;  // splits only; left branch is (value <= threshold)
  int left = -1;
  int right = -1;
  int action = 0;              // leaf decision; majority arm on splits
  double pop_share = 1.0;      // fraction of examples reaching the node
  std::vector<double> action_dist;  // weighted share per arm at the node
};

/// Binary decision tree over covariates, mapping a vector to an arm
/// index. Value type; serialisable ("recl-tree 1" format) and renderable
/// as indented text with per-node action / weighted-share / population
/// boxes.
struct TreeRegime {
  std::vector<TreeNode> nodes;  // index 0 is the root; pre-order layout
  int depth = 0;
  int arms = 2;
  Index p = 0;
  CostMethod method = CostMethod::AIPW;
  double t = 0.0;
  std::vector<std::string> feature_names;  // optional
  std::vector<std::string> action_labels;  // optional raw labels

  bool empty() const { return nodes.empty(); }
};

struct TreeConfig {
  int max_depth = 3;
  double min_leaf_weight = 0.0;
  double min_split_gain = 1e-12;
};

/// Greedy weighted-Gini CART. Thresholds are midpoints of consecutive
/// distinct feature values; a split is kept only if it beats
/// min_split_gain, ties resolved to the smallest feature index, then the
/// smallest threshold. Leaves predict the weighted-majority label, ties
/// to the smallest arm. Degenerate input (zero total weight) yields a
/// root-only tree predicting arm 0.
TreeRegime fit_weighted_tree(const std::vector<ExpandedExample>& examples,
                             const TreeConfig& config = {});

/// Leaf action for x by threshold descent; boundary values go left.
int assign(const TreeRegime& tree, const Vector& x);

/// Human-readable rendering; `feature_names`/`action_names` default to
/// the tree's own labels and must match its arity when given.
std::string render_tree(const TreeRegime& tree,
                        const std::vector<std::string>& feature_names = {},
                        const std::vector<std::string>& action_names = {});

std::string serialize_tree(const TreeRegime& tree);
TreeRegime parse_tree(const std::string& text);

struct CandidateSplit {
  int feature = 0;
  double threshold = 0.0;
};

struct BruteForceResult {
  TreeRegime regime;
  double objective = 0.0;
};

/// Exhaustive minimiser of sum_i loss(i, g(X_i)) over every depth <= d
/// threshold tree built from the candidate splits. Tractability guard:
/// n <= 12, arms <= 3, splits <= 6, d <= 2. Test / verification oracle
/// only.
BruteForceResult brute_force_regime(const Matrix& losses, const Matrix& X,
                                    const std::vector<CandidateSplit>& splits,
                                    int max_depth);

BruteForceResult brute_force_regime(const CostMatrix& cm, const Matrix& X,
                                    const std::vector<CandidateSplit>& splits,
                                    int max_depth);

/// sum_i cost(i, g(X_i)) for a fitted tree on the rows of X.
double regime_cost(const TreeRegime& tree, const Matrix& losses,
                   const Matrix& X);

}  // namespace recl
