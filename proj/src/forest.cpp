#include <algorithm>
#include <numeric>

#include "contesta/error.hpp"
#include "contesta/models.hpp"
#include "contesta/rng.hpp"

namespace contesta {

bool DecisionTree::votes_losnec(std::span<const double> x) const {
  int node = 0;
  while (nodes[node].feature >= 0) {
    const auto& n = nodes[node];
    node = x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
  }
  return nodes[node].votes_losnec;
}

bool DecisionTree::uses_feature(int feature) const {
  return std::any_of(nodes.begin(), nodes.end(),
                     [&](const TreeNode& n) { return n.feature == feature; });
}

double Forest::vote_fraction(std::span<const double> x) const {
  if (trees.empty()) return 0.0;
  std::size_t votes = 0;
  for (const auto& t : trees) votes += t.votes_losnec(x) ? 1 : 0;
  return static_cast<double>(votes) / static_cast<double>(trees.size());
}

namespace {

struct SplitChoice {
  int feature = -1;
  double threshold = 0.0;
  double decrease = 0.0;
  std::size_t left_count = 0;
};

double gini_sum(std::size_t pos, std::size_t total) {
  // total * gini impurity, without the constant factor
  const double p = static_cast<double>(pos);
  const double n = static_cast<double>(total - pos);
  return total == 0 ? 0.0 : (p * p + n * n) / static_cast<double>(total);
}

class TreeGrower {
 public:
  TreeGrower(const std::vector<std::vector<double>>& rows, std::span<const Label> labels,
             const RandomForestHypers& hypers, Rng& rng)
      : rows_(rows), labels_(labels), hypers_(hypers), rng_(rng) {
    num_features_ = rows.empty() ? 0 : rows.front().size();
    feature_pool_.resize(num_features_);
  }

  DecisionTree grow(std::vector<std::size_t> sample) {
    DecisionTree tree;
    tree.nodes.emplace_back();
    struct Pending {
      int node;
      std::vector<std::size_t> idx;
    };
    std::vector<Pending> stack;
    stack.push_back({0, std::move(sample)});
    while (!stack.empty()) {
      Pending job = std::move(stack.back());
      stack.pop_back();
      const std::size_t pos = count_pos(job.idx);
      const auto choice = (pos == 0 || pos == job.idx.size()) ? SplitChoice{} : best_split(job.idx, pos);
      if (choice.feature < 0) {
        tree.nodes[job.node].votes_losnec = 2 * pos >= job.idx.size();
        continue;
      }
      std::vector<std::size_t> left, right;
      for (auto i : job.idx)
        (rows_[i][static_cast<std::size_t>(choice.feature)] <= choice.threshold ? left : right)
            .push_back(i);
      const int l = static_cast<int>(tree.nodes.size());
      tree.nodes.emplace_back();
      const int r = static_cast<int>(tree.nodes.size());
      tree.nodes.emplace_back();
      auto& node = tree.nodes[job.node];
      node.feature = choice.feature;
      node.threshold = choice.threshold;
      node.left = l;
      node.right = r;
      stack.push_back({r, std::move(right)});
      stack.push_back({l, std::move(left)});
    }
    return tree;
  }

 private:
  std::size_t count_pos(const std::vector<std::size_t>& idx) const {
    std::size_t pos = 0;
    for (auto i : idx) pos += labels_[i] == Label::LosNec ? 1 : 0;
    return pos;
  }

  SplitChoice best_split(const std::vector<std::size_t>& idx, std::size_t pos) {
    const std::size_t n = idx.size();
    const auto min_leaf = static_cast<std::size_t>(std::max(1, hypers_.min_leaf));
    SplitChoice best;
    if (n < 2 * min_leaf) return best;

    std::iota(feature_pool_.begin(), feature_pool_.end(), 0);
    const auto mtry = std::clamp<std::size_t>(static_cast<std::size_t>(hypers_.features_per_split),
                                              1, num_features_);
    // partial Fisher-Yates: the first mtry entries are the candidates
    for (std::size_t k = 0; k < mtry; ++k) {
      const auto j = k + static_cast<std::size_t>(rng_.below(num_features_ - k));
      std::swap(feature_pool_[k], feature_pool_[j]);
    }

    const double parent = gini_sum(pos, n);
    for (std::size_t k = 0; k < mtry; ++k) {
      const auto f = feature_pool_[k];
      sorted_.clear();
      for (auto i : idx) sorted_.emplace_back(rows_[i][f], labels_[i] == Label::LosNec);
      std::sort(sorted_.begin(), sorted_.end());
      std::size_t left_pos = 0;
      for (std::size_t s = 0; s + 1 < n; ++s) {
        left_pos += sorted_[s].second ? 1 : 0;
        const std::size_t left_n = s + 1;
        if (sorted_[s].first == sorted_[s + 1].first) continue;
        if (left_n < min_leaf || n - left_n < min_leaf) continue;
        const double score = gini_sum(left_pos, left_n) + gini_sum(pos - left_pos, n - left_n);
        const double decrease = score - parent;
        if (decrease > best.decrease + 1e-12) {
          best.feature = static_cast<int>(f);
          best.threshold = 0.5 * (sorted_[s].first + sorted_[s + 1].first);
          best.decrease = decrease;
          best.left_count = left_n;
        }
      }
    }
    return best;
  }

  const std::vector<std::vector<double>>& rows_;
  std::span<const Label> labels_;
  const RandomForestHypers& hypers_;
  Rng& rng_;
  std::size_t num_features_ = 0;
  std::vector<std::size_t> feature_pool_;
  std::vector<std::pair<double, bool>> sorted_;
};

}  // namespace

Forest grow_forest(const std::vector<std::vector<double>>& rows, std::span<const Label> labels,
                   const RandomForestHypers& hypers, std::uint64_t seed) {
  if (rows.size() != labels.size() || rows.empty())
    fail(ErrorCode::InvalidArgument, "forest needs matching, non-empty rows and labels");
  if (hypers.trees < 1) fail(ErrorCode::InvalidArgument, "forest needs at least one tree");
  Forest forest;
  forest.trees.reserve(static_cast<std::size_t>(hypers.trees));
  const std::size_t n = rows.size();
  for (int t = 0; t < hypers.trees; ++t) {
    Rng rng(derive_seed(seed, {hash_tag("tree"), static_cast<std::uint64_t>(t)}));
    std::vector<std::size_t> sample(n);
    for (auto& s : sample) s = static_cast<std::size_t>(rng.below(n));
    TreeGrower grower(rows, labels, hypers, rng);
    forest.trees.push_back(grower.grow(std::move(sample)));
  }
  return forest;
}

}  // namespace contesta
