#include "drbart/tree.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "drbart/errors.hpp"

namespace drbart {

bool Cell::contains(const Point& p) const {
  if (!u.contains(p.u)) return false;
  for (std::size_t j = 0; j < x.size(); ++j)
    if (!x[j].contains(p.x[j])) return false;
  return true;
}

Tree::Tree(double leaf_value) {
  Node root;
  root.value = leaf_value;
  nodes_.push_back(root);
}

int Tree::find_leaf(const Point& p) const {
  int id = 0;
  const Node* n = nodes_.data();
  while (!n[id].is_leaf()) id = n[id].rule.goes_left(p) ? n[id].left : n[id].right;
  return id;
}

double Tree::evaluate(const Point& p) const {
  const Node& leaf = node(find_leaf(p));
  if (!std::isfinite(leaf.value))
    throw StructuralError("tree leaf has no finite parameter");
  return leaf.value;
}

std::vector<int> Tree::leaves() const {
  std::vector<int> out;
  std::vector<int> stack{0};
  while (!stack.empty()) {
    int id = stack.back();
    stack.pop_back();
    const Node& n = node(id);
    if (n.is_leaf()) {
      out.push_back(id);
    } else {
      stack.push_back(n.right);
      stack.push_back(n.left);
    }
  }
  return out;
}

std::size_t Tree::leaf_count() const {
  return static_cast<std::size_t>(
      std::count_if(nodes_.begin(), nodes_.end(), [](const Node& n) { return n.is_leaf(); }));
}

bool Tree::is_prunable(int id) const {
  const Node& n = node(id);
  return !n.is_leaf() && node(n.left).is_leaf() && node(n.right).is_leaf();
}

std::vector<int> Tree::prunable_nodes() const {
  std::vector<int> out;
  for (int id = 0; id < static_cast<int>(nodes_.size()); ++id)
    if (is_prunable(id)) out.push_back(id);
  return out;
}

std::size_t Tree::prunable_count() const {
  std::size_t c = 0;
  for (int id = 0; id < static_cast<int>(nodes_.size()); ++id)
    if (is_prunable(id)) ++c;
  return c;
}

int Tree::max_depth() const {
  int d = 0;
  for (const Node& n : nodes_) d = std::max(d, n.depth);
  return d;
}

bool Tree::splits_on_latent() const {
  return std::any_of(nodes_.begin(), nodes_.end(), [](const Node& n) {
    return !n.is_leaf() && n.rule.axis == kLatentAxis;
  });
}

Cell Tree::cell(int id, std::size_t x_axes) const {
  Cell c;
  c.x.assign(x_axes, Interval{});
  int child = id;
  int parent = node(id).parent;
  while (parent >= 0) {
    const Node& pn = node(parent);
    Interval& iv = c.along(pn.rule.axis);
    if (pn.left == child)
      iv.hi = std::min(iv.hi, pn.rule.cut);
    else
      iv.lo = std::max(iv.lo, pn.rule.cut);
    child = parent;
    parent = pn.parent;
  }
  return c;
}

Interval Tree::latent_interval(int id) const {
  Interval iv{0.0, 1.0};
  int child = id;
  int parent = node(id).parent;
  while (parent >= 0) {
    const Node& pn = node(parent);
    if (pn.rule.axis == kLatentAxis) {
      if (pn.left == child)
        iv.hi = std::min(iv.hi, pn.rule.cut);
      else
        iv.lo = std::max(iv.lo, pn.rule.cut);
    }
    child = parent;
    parent = pn.parent;
  }
  return iv;
}

std::pair<int, int> Tree::split(int id, const SplitRule& rule, double left_value,
                                double right_value) {
  if (!node(id).is_leaf()) throw StructuralError("split target is not a leaf");
  const int depth = node(id).depth + 1;
  const int l = static_cast<int>(nodes_.size());
  const int r = l + 1;
  Node left;
  left.parent = id;
  left.depth = depth;
  left.value = left_value;
  Node right = left;
  right.value = right_value;
  nodes_.push_back(left);
  nodes_.push_back(right);
  Node& n = nodes_[static_cast<std::size_t>(id)];
  n.rule = rule;
  n.left = l;
  n.right = r;
  return {l, r};
}

void Tree::remove_node(int id) {
  const int last = static_cast<int>(nodes_.size()) - 1;
  if (id != last) {
    nodes_[static_cast<std::size_t>(id)] = nodes_.back();
    Node& moved = nodes_[static_cast<std::size_t>(id)];
    if (moved.parent >= 0) {
      Node& p = nodes_[static_cast<std::size_t>(moved.parent)];
      if (p.left == last) p.left = id;
      if (p.right == last) p.right = id;
    }
    if (!moved.is_leaf()) {
      nodes_[static_cast<std::size_t>(moved.left)].parent = id;
      nodes_[static_cast<std::size_t>(moved.right)].parent = id;
    }
  }
  nodes_.pop_back();
}

void Tree::prune(int id, double value) {
  if (!is_prunable(id)) throw StructuralError("prune target does not have two leaf children");
  Node& n = nodes_[static_cast<std::size_t>(id)];
  const int hi = std::max(n.left, n.right);
  const int lo = std::min(n.left, n.right);
  n.left = n.right = -1;
  n.value = value;
  remove_node(hi);
  remove_node(lo);
}

void Tree::set_rule(int id, const SplitRule& rule) {
  if (!is_prunable(id)) throw StructuralError("rule change target does not have two leaf children");
  nodes_[static_cast<std::size_t>(id)].rule = rule;
}

void Tree::latent_segments_from(int id, std::span<const double> x, double lo,
                                double hi, std::vector<LatentSegment>& out) const {
  const Node* n = nodes_.data();
  for (;;) {
    const Node& nd = n[id];
    if (nd.is_leaf()) {
      out.push_back({lo, hi, id});
      return;
    }
    if (nd.rule.axis != kLatentAxis) {
      id = x[static_cast<std::size_t>(nd.rule.axis)] < nd.rule.cut ? nd.left : nd.right;
      continue;
    }
    const double c = nd.rule.cut;
    if (c <= lo) {
      id = nd.right;
    } else if (c >= hi) {
      id = nd.left;
    } else {
      latent_segments_from(nd.left, x, lo, c, out);
      lo = c;
      id = nd.right;
    }
  }
}

void Tree::latent_segments(std::span<const double> x,
                           std::vector<LatentSegment>& out) const {
  out.clear();
  latent_segments_from(0, x, 0.0, 1.0, out);
}

Tree Tree::from_preorder(std::span<const PreorderEntry> entries) {
  if (entries.empty()) throw StructuralError("empty preorder listing");
  Tree t;
  t.nodes_.clear();
  // Stack of nodes still waiting for their right child.
  std::vector<int> open;
  for (std::size_t k = 0; k < entries.size(); ++k) {
    const PreorderEntry& e = entries[k];
    Node n;
    n.value = e.leaf ? e.value : 0.0;
    if (k > 0) {
      if (open.empty()) throw StructuralError("preorder listing has trailing nodes");
      const int parent = open.back();
      Node& pn = t.nodes_[static_cast<std::size_t>(parent)];
      n.parent = parent;
      n.depth = pn.depth + 1;
      const int id = static_cast<int>(t.nodes_.size());
      if (pn.left < 0) {
        pn.left = id;
      } else {
        pn.right = id;
        open.pop_back();
      }
    }
    if (!e.leaf) n.rule = e.rule;
    t.nodes_.push_back(n);
    if (!e.leaf) {
      // Mark as internal; children are attached as they arrive.
      t.nodes_.back().left = -2;
      open.push_back(static_cast<int>(t.nodes_.size()) - 1);
    }
  }
  if (!open.empty()) throw StructuralError("preorder listing ends with an incomplete node");
  // Replace the -2 placeholders, which are only left on malformed input.
  for (const Node& n : t.nodes_)
    if (n.left == -2 || (n.left >= 0) != (n.right >= 0))
      throw StructuralError("internal node missing a child");
  t.validate();
  return t;
}

std::vector<Tree::PreorderEntry> Tree::to_preorder() const {
  std::vector<PreorderEntry> out;
  out.reserve(nodes_.size());
  std::vector<int> stack{0};
  while (!stack.empty()) {
    int id = stack.back();
    stack.pop_back();
    const Node& n = node(id);
    if (n.is_leaf()) {
      out.push_back({true, {}, n.value});
    } else {
      out.push_back({false, n.rule, 0.0});
      stack.push_back(n.right);
      stack.push_back(n.left);
    }
  }
  return out;
}

void Tree::validate() const {
  for (int id = 0; id < static_cast<int>(nodes_.size()); ++id) {
    const Node& n = node(id);
    if ((n.left < 0) != (n.right < 0))
      throw StructuralError("node " + std::to_string(id) + " has exactly one child");
    if (n.is_leaf()) {
      if (!std::isfinite(n.value))
        throw StructuralError("leaf " + std::to_string(id) + " has no finite parameter");
      continue;
    }
    for (int c : {n.left, n.right}) {
      if (c <= 0 || c >= static_cast<int>(nodes_.size()) || node(c).parent != id)
        throw StructuralError("node " + std::to_string(id) + " has a broken child link");
      if (node(c).depth != n.depth + 1)
        throw StructuralError("node " + std::to_string(c) + " has an inconsistent depth");
    }
  }
  if (nodes_.empty() || nodes_[0].parent != -1) throw StructuralError("tree has no root");
}

double Ensemble::evaluate(const Point& p) const {
  double s = 0.0;
  for (const Tree& t : trees) s += t.evaluate(p);
  return s;
}

double evaluate_tree(const Tree& tree, const Point& p) { return tree.evaluate(p); }

double evaluate_ensemble(const Ensemble& ens, const Point& p) { return ens.evaluate(p); }

std::vector<double> u_breakpoints(const Ensemble& mean, const Ensemble& var,
                                  std::span<const double> x) {
  std::vector<double> out{0.0, 1.0};
  std::vector<LatentSegment> segs;
  for (const Ensemble* e : {&mean, &var}) {
    for (const Tree& t : e->trees) {
      t.latent_segments(x, segs);
      for (std::size_t k = 1; k < segs.size(); ++k) out.push_back(segs[k].lo);
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::size_t shared_leaf_count(const Ensemble& ens, const Point& p1, const Point& p2) {
  std::size_t c = 0;
  for (const Tree& t : ens.trees)
    if (t.find_leaf(p1) == t.find_leaf(p2)) ++c;
  return c;
}

std::vector<std::size_t> leaf_occupancy(const Tree& tree, const PointSet& pts) {
  std::vector<std::size_t> by_node(tree.size(), 0);
  for (std::size_t i = 0; i < pts.size(); ++i) ++by_node[static_cast<std::size_t>(tree.find_leaf(pts.at(i)))];
  std::vector<std::size_t> out;
  for (int leaf : tree.leaves()) out.push_back(by_node[static_cast<std::size_t>(leaf)]);
  return out;
}

void LatentProfiler::collect(const Tree& tree, std::span<const double> x, bool is_var,
                             double& base_mean, double& base_var) {
  tree.latent_segments(x, segments_);
  double prev = tree.node(segments_[0].leaf).value;
  (is_var ? base_var : base_mean) += prev;
  for (std::size_t k = 1; k < segments_.size(); ++k) {
    const double v = tree.node(segments_[k].leaf).value;
    const double d = v - prev;
    events_.push_back({segments_[k].lo, is_var ? 0.0 : d, is_var ? d : 0.0});
    prev = v;
  }
}

void LatentProfiler::build(const Ensemble& mean, const Ensemble* var,
                           std::span<const double> x, LatentProfile& out) {
  events_.clear();
  double base_mean = 0.0;
  double base_var = 0.0;
  for (const Tree& t : mean.trees) collect(t, x, false, base_mean, base_var);
  if (var)
    for (const Tree& t : var->trees) collect(t, x, true, base_mean, base_var);
  finish(base_mean, base_var, out);
}

void LatentProfiler::build(std::span<const Tree* const> mean_trees,
                           std::span<const Tree* const> var_trees, std::span<const double> x,
                           double base_mean, double base_var, LatentProfile& out) {
  events_.clear();
  for (const Tree* t : mean_trees) collect(*t, x, false, base_mean, base_var);
  for (const Tree* t : var_trees) collect(*t, x, true, base_mean, base_var);
  finish(base_mean, base_var, out);
}

void LatentProfiler::finish(double base_mean, double base_var, LatentProfile& out) {
  std::sort(events_.begin(), events_.end(),
            [](const Event& a, const Event& b) { return a.at < b.at; });

  out.breaks.clear();
  out.mean.clear();
  out.log_var.clear();
  out.breaks.push_back(0.0);
  double m = base_mean;
  double v = base_var;
  std::size_t k = 0;
  while (k < events_.size()) {
    const double at = events_[k].at;
    out.mean.push_back(m);
    out.log_var.push_back(v);
    out.breaks.push_back(at);
    while (k < events_.size() && events_[k].at == at) {
      m += events_[k].d_mean;
      v += events_[k].d_var;
      ++k;
    }
  }
  out.mean.push_back(m);
  out.log_var.push_back(v);
  out.breaks.push_back(1.0);
}

LatentProfile latent_profile(const Ensemble& mean, const Ensemble* var,
                             std::span<const double> x) {
  LatentProfiler p;
  LatentProfile out;
  p.build(mean, var, x, out);
  return out;
}

}  // namespace drbart
