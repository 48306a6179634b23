#pragma once

#include <cstddef>
#include <limits>
#include <span>
#include <vector>

namespace drbart {

/// Axis index used by split rules on the latent coordinate u.
inline constexpr int kLatentAxis = -1;

/// A point of the augmented covariate space (x, u).
struct Point {
  std::span<const double> x;
  double u = 0.0;

  double coordinate(int axis) const {
    return axis == kLatentAxis ? u : x[static_cast<std::size_t>(axis)];
  }
};

/// Axis-aligned decision "coordinate < cut". Strictly-less goes left, ties go
/// right.
struct SplitRule {
  int axis = 0;
  double cut = 0.5;

  bool goes_left(const Point& p) const { return p.coordinate(axis) < cut; }
  bool operator==(const SplitRule&) const = default;
};

/// Half-open interval [lo, hi).
struct Interval {
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();

  bool contains(double v) const { return v >= lo && v < hi; }
  double length() const { return hi - lo; }
  bool operator==(const Interval&) const = default;
};

/// Hyper-rectangle of a node: one interval per x axis plus the latent one.
struct Cell {
  std::vector<Interval> x;
  Interval u{0.0, 1.0};

  const Interval& along(int axis) const {
    return axis == kLatentAxis ? u : x[static_cast<std::size_t>(axis)];
  }
  Interval& along(int axis) {
    return axis == kLatentAxis ? u : x[static_cast<std::size_t>(axis)];
  }
  bool contains(const Point& p) const;
};

/// One constant piece of u -> tree(x, u) at a fixed x.
struct LatentSegment {
  double lo = 0.0;
  double hi = 1.0;
  int leaf = 0;
};

/// Binary decision tree stored as explicit node records with child indices.
/// Node 0 is always the root. Leaves carry one real parameter: a mean
/// contribution for mean trees, a log-variance contribution for variance
/// trees.
class Tree {
 public:
  struct Node {
    int parent = -1;
    int left = -1;
    int right = -1;
    int depth = 0;
    SplitRule rule{};
    double value = 0.0;

    bool is_leaf() const { return left < 0; }
  };

  Tree() : Tree(0.0) {}
  explicit Tree(double leaf_value);

  const std::vector<Node>& nodes() const { return nodes_; }
  const Node& node(int id) const { return nodes_[static_cast<std::size_t>(id)]; }
  std::size_t size() const { return nodes_.size(); }

  int find_leaf(const Point& p) const;
  double evaluate(const Point& p) const;

  /// Leaf ids in preorder; the order used by leaf_occupancy.
  std::vector<int> leaves() const;
  std::size_t leaf_count() const;
  /// Internal nodes whose two children are both leaves (death candidates).
  std::vector<int> prunable_nodes() const;
  std::size_t prunable_count() const;
  int max_depth() const;
  bool splits_on_latent() const;
  bool is_prunable(int id) const;

  /// Bounds of node `id`, for a space with `x_axes` covariates. x axes start
  /// unbounded, the latent axis starts at [0, 1).
  Cell cell(int id, std::size_t x_axes) const;
  /// Latent-axis bounds of node `id` (cheaper than cell()).
  Interval latent_interval(int id) const;

  /// Turns leaf `id` into an internal node; returns the new child ids.
  std::pair<int, int> split(int id, const SplitRule& rule, double left_value,
                            double right_value);
  /// Collapses node `id`, whose children must both be leaves, into a leaf.
  /// Node ids above the removed children may be renumbered.
  void prune(int id, double value);
  /// Replaces the rule of node `id`, whose children must both be leaves.
  void set_rule(int id, const SplitRule& rule);

  void set_value(int leaf, double value) {
    nodes_[static_cast<std::size_t>(leaf)].value = value;
  }

  /// Pieces of u -> leaf at fixed x, ascending and tiling [0, 1).
  void latent_segments(std::span<const double> x,
                       std::vector<LatentSegment>& out) const;

  /// Builds a tree from a preorder listing: internal nodes carry a rule,
  /// leaves a value. Throws StructuralError if the listing is not a complete
  /// binary tree.
  struct PreorderEntry {
    bool leaf = true;
    SplitRule rule{};
    double value = 0.0;
    bool operator==(const PreorderEntry&) const = default;
  };
  static Tree from_preorder(std::span<const PreorderEntry> entries);
  std::vector<PreorderEntry> to_preorder() const;

  /// Throws StructuralError on a half-linked node, broken parent link or
  /// a leaf without a finite parameter.
  void validate() const;

  bool operator==(const Tree& other) const {
    return to_preorder() == other.to_preorder();
  }

 private:
  void remove_node(int id);
  void latent_segments_from(int id, std::span<const double> x, double lo,
                            double hi, std::vector<LatentSegment>& out) const;

  std::vector<Node> nodes_;
};

enum class EnsembleKind { Mean, Variance };

/// Sum-of-trees. For the mean kind the sum is f(x, u); for the variance kind
/// it is the log-variance offset v(x, u).
struct Ensemble {
  EnsembleKind kind = EnsembleKind::Mean;
  std::vector<Tree> trees;

  Ensemble() = default;
  Ensemble(EnsembleKind k, std::size_t count) : kind(k), trees(count) {}

  double evaluate(const Point& p) const;
  std::size_t size() const { return trees.size(); }
  bool operator==(const Ensemble&) const = default;
};

/// Row-major covariates with per-observation latent coordinates.
struct PointSet {
  std::span<const double> x;
  std::size_t p = 0;
  std::span<const double> u;

  std::size_t size() const { return u.size(); }
  Point at(std::size_t i) const { return {x.subspan(i * p, p), u[i]}; }
};

double evaluate_tree(const Tree& tree, const Point& p);
double evaluate_ensemble(const Ensemble& ens, const Point& p);

/// {0, 1} together with every latent cutpoint reachable from x in either
/// ensemble, ascending and deduplicated. (f, v) is constant between
/// consecutive entries.
std::vector<double> u_breakpoints(const Ensemble& mean, const Ensemble& var,
                                  std::span<const double> x);

/// Number of trees in which p1 and p2 share a leaf.
std::size_t shared_leaf_count(const Ensemble& ens, const Point& p1,
                              const Point& p2);

/// Observations per leaf, aligned with tree.leaves().
std::vector<std::size_t> leaf_occupancy(const Tree& tree, const PointSet& pts);

/// The piecewise-constant map u -> (f(x,u), v(x,u)) at fixed x. Interval k is
/// [breaks[k], breaks[k+1]) with mean[k] and log_var[k].
struct LatentProfile {
  std::vector<double> breaks;
  std::vector<double> mean;
  std::vector<double> log_var;

  std::size_t intervals() const { return mean.size(); }
  double width(std::size_t k) const { return breaks[k + 1] - breaks[k]; }
};

/// Builds the profile with scratch buffers reused across calls.
class LatentProfiler {
 public:
  void build(const Ensemble& mean, const Ensemble* var,
             std::span<const double> x, LatentProfile& out);
  /// Profile of base + the given trees only; the caller folds the (u-free)
  /// contribution of every other tree into the base values.
  void build(std::span<const Tree* const> mean_trees,
             std::span<const Tree* const> var_trees, std::span<const double> x,
             double base_mean, double base_var, LatentProfile& out);

 private:
  struct Event {
    double at;
    double d_mean;
    double d_var;
  };
  void collect(const Tree& tree, std::span<const double> x, bool is_var,
               double& base_mean, double& base_var);
  void finish(double base_mean, double base_var, LatentProfile& out);

  std::vector<LatentSegment> segments_;
  std::vector<Event> events_;
};

LatentProfile latent_profile(const Ensemble& mean, const Ensemble* var,
                             std::span<const double> x);

}  // namespace drbart
