#include "drbart/sampler.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <exception>
#include <iostream>
#include <limits>
#include <thread>

#include "drbart/errors.hpp"
#include "drbart/kernels.hpp"
#include "drbart/special_math.hpp"

namespace drbart {

const char* variant_name(Variant v) {
  switch (v) {
    case Variant::L: return "l";
    case Variant::LH: return "lh";
    case Variant::Full: return "full";
  }
  return "?";
}

Variant parse_variant(const std::string& s) {
  std::string t;
  for (char c : s) t += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (t == "l") return Variant::L;
  if (t == "lh") return Variant::LH;
  if (t == "full") return Variant::Full;
  throw UsageError("unknown variant '" + s + "' (expected l, lh or full)");
}

void ChainConfig::validate() const {
  if (n_iter < 0 || n_burn < 0) throw UsageError("iteration counts must be non-negative");
  if (thin < 1) throw UsageError("thin must be at least 1");
  if (!(change_prob >= 0.0 && change_prob < 1.0)) throw UsageError("change probability must be in [0, 1)");
  hp.validate();
  s0.validate();
  if (variant != Variant::L) {
    if (vhp.m_v < 1) throw UsageError("variants lh and full need at least one variance tree");
    vhp.validate();
    if (s0.mode != Sigma0Spec::Mode::Fixed)
      throw UsageError("variants lh and full use a fixed sigma0");
  }
}

// ---- Leaf math -------------------------------------------------------------

double mean_leaf_log_marginal(double sum_w, double sum_wr, double sigma_mu) {
  const double prior_prec = 1.0 / (sigma_mu * sigma_mu);
  const double s2 = 1.0 / (prior_prec + sum_w);
  return 0.5 * std::log(s2 * prior_prec) + 0.5 * s2 * sum_wr * sum_wr;
}

double mean_leaf_log_likelihood(const MeanLeafStats& s, double sigma_mu) {
  return -static_cast<double>(s.n) * kLogSqrt2Pi + 0.5 * s.sum_log_w - 0.5 * s.sum_wr2 +
         mean_leaf_log_marginal(s.sum_w, s.sum_wr, sigma_mu);
}

double sample_mean_leaf(Rng& rng, double sum_w, double sum_wr, double sigma_mu) {
  const double s2 = 1.0 / (1.0 / (sigma_mu * sigma_mu) + sum_w);
  return s2 * sum_wr + std::sqrt(s2) * rng.normal();
}

VarLeafTerms var_leaf_terms(const VarLeafStats& s, double a, double b) {
  VarLeafTerms t;
  if (s.n == 0) {
    t.log_ig = t.log_gig = std::log(0.5);
    t.log_total = 0.0;
    return t;
  }
  const double h = 0.5 * static_cast<double>(s.n);
  // An exact fit has no finite GIG component; a tiny r^2 keeps the ratio finite.
  const double r2 = std::max(s.r2, 1e-300);
  const double common =
      -static_cast<double>(s.n) * kLogSqrt2Pi + std::log(0.5) + a * std::log(b) - std::lgamma(a);
  t.log_ig = common + std::lgamma(h + a) - (h + a) * std::log(b + 0.5 * r2);
  t.log_gig = common + std::log(2.0) + log_bessel_k(h - a, std::sqrt(2.0 * b * r2)) -
              0.5 * (a - h) * std::log(2.0 * b / r2);
  const double mx = std::max(t.log_ig, t.log_gig);
  t.log_total = mx + std::log(std::exp(t.log_ig - mx) + std::exp(t.log_gig - mx));
  return t;
}

double sample_var_leaf(Rng& rng, const VarLeafStats& s, double a, double b, bool* degenerate) {
  if (degenerate) *degenerate = false;
  if (s.n == 0) return std::log(sample_leaf_scale_prior(rng, a, b));
  if (!(s.r2 > 0.0)) {
    if (degenerate) *degenerate = true;
    return std::log(sample_leaf_scale_prior(rng, a, b));
  }
  const VarLeafTerms t = var_leaf_terms(s, a, b);
  const double h = 0.5 * static_cast<double>(s.n);
  const double p_ig = std::exp(t.log_ig - t.log_total);
  double tau = 0.0;
  if (rng.uniform() < p_ig)
    tau = sample_inverse_gamma(rng, h + a, b + 0.5 * s.r2);
  else
    tau = sample_gig(rng, {a - h, 2.0 * b, s.r2});
  return std::log(tau);
}

double ols_half_residual_sd(const Dataset& data) {
  const auto n = static_cast<Eigen::Index>(data.n());
  const auto p = static_cast<Eigen::Index>(data.p);
  if (n < p + 2) throw InputError("too few observations for the least-squares sigma0 guess");
  Eigen::MatrixXd X(n, p + 1);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    X(i, 0) = 1.0;
    for (Eigen::Index j = 0; j < p; ++j)
      X(i, j + 1) = data.x[static_cast<std::size_t>(i * p + j)];
    y(i) = data.y[static_cast<std::size_t>(i)];
  }
  const Eigen::VectorXd beta = X.colPivHouseholderQr().solve(y);
  const Eigen::VectorXd res = y - X * beta;
  const double mean = res.mean();
  const double sd = std::sqrt((res.array() - mean).square().sum() / static_cast<double>(n - 1));
  if (!(sd > 0.0)) throw InputError("least-squares residuals have zero spread; set sigma0 explicitly");
  return 0.5 * sd;
}

// ---- Sampler ---------------------------------------------------------------

namespace {

struct LeafAcc {
  std::size_t n = 0;
  double a = 0.0;
  double b = 0.0;
};

struct MeanModel {
  const double* w;
  const double* wr;
  double sigma_mu;

  void add(LeafAcc& s, std::size_t i) const {
    ++s.n;
    s.a += w[i];
    s.b += wr[i];
  }
  double log_lik(const LeafAcc& s) const { return mean_leaf_log_marginal(s.a, s.b, sigma_mu); }
  double draw(Rng& rng, const LeafAcc& s, MoveStats&) const {
    return sample_mean_leaf(rng, s.a, s.b, sigma_mu);
  }
};

struct VarModel {
  const double* r2;
  double a;
  double b;

  void add(LeafAcc& s, std::size_t i) const {
    ++s.n;
    s.a += r2[i];
  }
  double log_lik(const LeafAcc& s) const { return var_leaf_terms({s.n, s.a}, a, b).log_total; }
  double draw(Rng& rng, const LeafAcc& s, MoveStats& st) const {
    bool degenerate = false;
    const double v = sample_var_leaf(rng, {s.n, s.a}, a, b, &degenerate);
    if (degenerate) {
      if (st.degenerate_leaves == 0)
        std::cerr << "warning: variance leaf with zero residual sum of squares; drawing from the prior\n";
      ++st.degenerate_leaves;
    }
    return v;
  }
};

LeafAcc merge(const LeafAcc& l, const LeafAcc& r) { return {l.n + r.n, l.a + r.a, l.b + r.b}; }

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

Sampler::Sampler(Dataset data, const ChainConfig& cfg, Rng& rng)
    : data_(std::move(data)), cfg_(cfg) {
  cfg_.validate();
  if (data_.n() < static_cast<std::size_t>(cfg_.hp.min_leaf))
    throw InputError("fewer observations than min_leaf");
  state_.variant = cfg_.variant;
  state_.mean = Ensemble(EnsembleKind::Mean, static_cast<std::size_t>(cfg_.hp.m));
  state_.var = Ensemble(EnsembleKind::Variance,
                        cfg_.variant == Variant::L ? 0 : static_cast<std::size_t>(cfg_.vhp.m_v));
  state_.sigma0_sq =
      cfg_.s0.mode == Sigma0Spec::Mode::Fixed ? cfg_.s0.fixed_value : cfg_.s0.xi0;
  state_.u.resize(data_.n());
  for (double& u : state_.u) u = cfg_.use_latent ? rng.uniform() : 0.5;
  init_caches();
}

Sampler::Sampler(Dataset data, const ChainConfig& cfg, ModelState initial)
    : data_(std::move(data)), cfg_(cfg), state_(std::move(initial)) {
  cfg_.validate();
  if (state_.u.size() != data_.n()) throw InputError("latent count does not match the data");
  if (state_.variant != cfg_.variant) throw InputError("state variant does not match the config");
  if (state_.mean.size() != static_cast<std::size_t>(cfg_.hp.m))
    throw InputError("mean ensemble size does not match m");
  const std::size_t want_mv =
      cfg_.variant == Variant::L ? 0 : static_cast<std::size_t>(cfg_.vhp.m_v);
  if (state_.var.size() != want_mv) throw InputError("variance ensemble size does not match m_v");
  for (const Tree& t : state_.var.trees)
    if (t.splits_on_latent() && (cfg_.variant != Variant::Full || !cfg_.use_latent))
      throw InputError("variance tree splits on u under a variant without latent variance");
  if (!cfg_.use_latent)
    for (const Tree& t : state_.mean.trees)
      if (t.splits_on_latent()) throw InputError("mean tree splits on u with the latent axis off");
  init_caches();
  if (!feasible()) throw InputError("initial state has a leaf below min_leaf");
}

void Sampler::init_caches() {
  m_ = state_.mean.size();
  mv_ = state_.var.size();
  mean_space_ = SplitSpace::from_columns(data_.x, data_.p, cfg_.use_latent);
  var_space_ = mean_space_;
  if (cfg_.variant != Variant::Full) var_space_ = var_space_.without_latent();
  const std::size_t n = data_.n();
  caches_.assign(m_ + mv_, {});
  for (std::size_t t = 0; t < m_ + mv_; ++t) rebuild_cache(tree_at(t), caches_[t]);
  f_.assign(n, 0.0);
  v_.assign(n, 0.0);
  w_.assign(n, 0.0);
  wr_.assign(n, 0.0);
  r2_.assign(n, 0.0);
  tmp_.assign(n, 0.0);
  e_.assign(n, 0.0);
  vm_.assign(n, 0.0);
  weights_dirty_ = true;
  recompute_fit();
  refresh_latent_trees();
}

void Sampler::rebuild_cache(const Tree& tree, TreeCache& c) {
  const std::size_t n = data_.n();
  c.leaf_of.resize(n);
  c.count.assign(tree.size(), 0);
  for (std::size_t i = 0; i < n; ++i) {
    const int leaf = tree.find_leaf(point(i));
    c.leaf_of[i] = leaf;
    ++c.count[static_cast<std::size_t>(leaf)];
  }
  c.latent = tree.splits_on_latent();
}

void Sampler::recompute_fit() {
  const std::size_t n = data_.n();
  std::fill(f_.begin(), f_.end(), 0.0);
  std::fill(v_.begin(), v_.end(), 0.0);
  for (std::size_t t = 0; t < m_ + mv_; ++t) {
    const std::vector<Tree::Node>& nodes = tree_at(t).nodes();
    const std::vector<int>& leaf_of = caches_[t].leaf_of;
    std::vector<double>& out = t < m_ ? f_ : v_;
    for (std::size_t i = 0; i < n; ++i) out[i] += nodes[static_cast<std::size_t>(leaf_of[i])].value;
  }
  weights_dirty_ = true;
}

void Sampler::refresh_latent_trees() {
  latent_trees_.clear();
  latent_mean_ptrs_.clear();
  latent_var_ptrs_.clear();
  for (std::size_t t = 0; t < m_ + mv_; ++t) {
    if (!caches_[t].latent) continue;
    latent_trees_.push_back(t);
    (t < m_ ? latent_mean_ptrs_ : latent_var_ptrs_).push_back(&tree_at(t));
  }
}

void Sampler::refresh_weights() {
  if (!weights_dirty_) return;
  kernels::scaled_exp_neg(v_, 1.0 / state_.sigma0_sq, w_);
  weights_dirty_ = false;
}

template <class Model>
bool Sampler::tree_update(Tree& tree, TreeCache& c, const SplitSpace& space, double alpha,
                          double beta, const Model& model, MoveCounts& counts, Rng& rng) {
  const std::size_t n = data_.n();
  const std::size_t min_leaf = static_cast<std::size_t>(cfg_.hp.min_leaf);
  const std::size_t p = data_.p;
  const std::size_t b = tree.leaf_count();
  // Birth and death share 1 - change_prob; a lone leaf can only grow.
  const double pgd = 0.5 * (1.0 - cfg_.change_prob);
  auto p_birth_at = [&](std::size_t leaves) { return leaves == 1 ? 1.0 : pgd; };
  const double move = b == 1 ? 0.0 : rng.uniform();
  const bool birth = move < p_birth_at(b);
  const bool death = !birth && move < 2.0 * pgd;
  bool accepted = false;

  if (birth) {
    ++counts.birth_proposed;
    const std::vector<int> leaves = tree.leaves();
    const int eta = leaves[rng.index(b)];
    const Cell cell = tree.cell(eta, p);
    space.available_axes(cell, axes_);
    if (!axes_.empty()) {
      const int axis = axes_[rng.index(axes_.size())];
      const double cut = space.sample_cut(rng, axis, cell);
      const SplitRule rule{axis, cut};
      LeafAcc sl, sr;
      for (std::size_t i = 0; i < n; ++i) {
        if (c.leaf_of[i] != eta) continue;
        model.add(rule.goes_left(point(i)) ? sl : sr, i);
      }
      if (sl.n >= min_leaf && sr.n >= min_leaf) {
        const int depth = tree.node(eta).depth;
        const double ps = split_probability(depth, alpha, beta);
        const double pd = split_probability(depth + 1, alpha, beta);
        Cell cl = cell, cr = cell;
        cl.along(axis).hi = cut;
        cr.along(axis).lo = cut;
        const double pl = space.can_split(cl) ? pd : 0.0;
        const double pr = space.can_split(cr) ? pd : 0.0;
        const int parent = tree.node(eta).parent;
        const std::size_t nog_new =
            tree.prunable_count() + 1 - ((parent >= 0 && tree.is_prunable(parent)) ? 1 : 0);
        const double log_r = model.log_lik(sl) + model.log_lik(sr) - model.log_lik(merge(sl, sr)) +
                             std::log(ps) + std::log1p(-pl) + std::log1p(-pr) - std::log1p(-ps) +
                             std::log(pgd / static_cast<double>(nog_new)) -
                             std::log(p_birth_at(b) / static_cast<double>(b)) + birth_bias_;
        if (std::isnan(log_r)) {
          ++stats_.nan_ratios;
        } else if (std::log(rng.uniform()) < log_r) {
          const auto [l, r] = tree.split(eta, rule, 0.0, 0.0);
          for (std::size_t i = 0; i < n; ++i)
            if (c.leaf_of[i] == eta) c.leaf_of[i] = rule.goes_left(point(i)) ? l : r;
          accepted = true;
          ++counts.birth_accepted;
        }
      }
    }
  } else if (death) {
    ++counts.death_proposed;
    const std::vector<int> prunable = tree.prunable_nodes();
    const std::size_t nog = prunable.size();
    const int eta = prunable[rng.index(nog)];
    const int left = tree.node(eta).left;
    const int right = tree.node(eta).right;
    LeafAcc sl, sr;
    for (std::size_t i = 0; i < n; ++i) {
      if (c.leaf_of[i] == left)
        model.add(sl, i);
      else if (c.leaf_of[i] == right)
        model.add(sr, i);
    }
    const int depth = tree.node(eta).depth;
    const double ps = space.can_split(tree.cell(eta, p)) ? split_probability(depth, alpha, beta) : 0.0;
    const double pd = split_probability(depth + 1, alpha, beta);
    const double pl = space.can_split(tree.cell(left, p)) ? pd : 0.0;
    const double pr = space.can_split(tree.cell(right, p)) ? pd : 0.0;
    const std::size_t b_new = b - 1;
    const double log_r = model.log_lik(merge(sl, sr)) - model.log_lik(sl) - model.log_lik(sr) +
                         std::log1p(-ps) - std::log(ps) - std::log1p(-pl) - std::log1p(-pr) +
                         std::log(p_birth_at(b_new) / static_cast<double>(b_new)) -
                         std::log(pgd / static_cast<double>(nog));
    if (std::isnan(log_r)) {
      ++stats_.nan_ratios;
    } else if (std::log(rng.uniform()) < log_r) {
      tree.prune(eta, 0.0);
      // Pruning may renumber nodes, so the leaf map is rebuilt.
      rebuild_cache(tree, c);
      accepted = true;
      ++counts.death_accepted;
    }
  } else {
    // New rule for a node with two leaf children, drawn as its prior would
    // draw it in the same cell, so rule prior and proposal cancel.
    ++counts.change_proposed;
    const std::vector<int> prunable = tree.prunable_nodes();
    const int eta = prunable[rng.index(prunable.size())];
    const int left = tree.node(eta).left;
    const int right = tree.node(eta).right;
    const Cell cell = tree.cell(eta, p);
    space.available_axes(cell, axes_);
    const int axis = axes_[rng.index(axes_.size())];
    const double cut = space.sample_cut(rng, axis, cell);
    const SplitRule rule{axis, cut};
    LeafAcc ol, orr, nl, nr;
    for (std::size_t i = 0; i < n; ++i) {
      const int leaf = c.leaf_of[i];
      if (leaf != left && leaf != right) continue;
      model.add(leaf == left ? ol : orr, i);
      model.add(rule.goes_left(point(i)) ? nl : nr, i);
    }
    if (nl.n >= min_leaf && nr.n >= min_leaf) {
      const double pd = split_probability(tree.node(eta).depth + 1, alpha, beta);
      Cell cl = cell, cr = cell;
      cl.along(axis).hi = cut;
      cr.along(axis).lo = cut;
      const double log_r = model.log_lik(nl) + model.log_lik(nr) - model.log_lik(ol) - model.log_lik(orr) +
                           std::log1p(space.can_split(cl) ? -pd : 0.0) +
                           std::log1p(space.can_split(cr) ? -pd : 0.0) -
                           std::log1p(space.can_split(tree.cell(left, p)) ? -pd : 0.0) -
                           std::log1p(space.can_split(tree.cell(right, p)) ? -pd : 0.0);
      if (std::isnan(log_r)) {
        ++stats_.nan_ratios;
      } else if (std::log(rng.uniform()) < log_r) {
        tree.set_rule(eta, rule);
        for (std::size_t i = 0; i < n; ++i)
          if (c.leaf_of[i] == left || c.leaf_of[i] == right)
            c.leaf_of[i] = rule.goes_left(point(i)) ? left : right;
        accepted = true;
        ++counts.change_accepted;
      }
    }
  }

  // Leaf parameters from their full conditionals.
  const std::size_t nodes = tree.size();
  std::vector<LeafAcc> acc(nodes);
  for (std::size_t i = 0; i < n; ++i) model.add(acc[static_cast<std::size_t>(c.leaf_of[i])], i);
  c.count.assign(nodes, 0);
  for (int leaf : tree.leaves()) {
    const LeafAcc& s = acc[static_cast<std::size_t>(leaf)];
    c.count[static_cast<std::size_t>(leaf)] = static_cast<int>(s.n);
    tree.set_value(leaf, model.draw(rng, s, stats_));
  }
  c.latent = tree.splits_on_latent();
  return accepted;
}

bool Sampler::mean_tree_update(std::size_t h, Rng& rng) {
  refresh_weights();
  Tree& tree = state_.mean.trees[h];
  TreeCache& c = caches_[h];
  const std::size_t n = data_.n();
  const std::vector<Tree::Node>& nodes = tree.nodes();
  for (std::size_t i = 0; i < n; ++i) {
    const double g = nodes[static_cast<std::size_t>(c.leaf_of[i])].value;
    tmp_[i] = g;
    wr_[i] = w_[i] * (data_.y[i] - f_[i] + g);
  }
  const bool was_latent = c.latent;
  const MeanModel model{w_.data(), wr_.data(), cfg_.hp.sigma_mu};
  const bool acc = tree_update(tree, c, mean_space_, cfg_.hp.alpha, cfg_.hp.beta, model,
                               stats_.mean, rng);
  const std::vector<Tree::Node>& after = tree.nodes();
  for (std::size_t i = 0; i < n; ++i)
    f_[i] += after[static_cast<std::size_t>(c.leaf_of[i])].value - tmp_[i];
  if (was_latent || c.latent) refresh_latent_trees();
  return acc;
}

bool Sampler::variance_tree_update(std::size_t h, Rng& rng) {
  if (cfg_.variant == Variant::L) throw ContractError("variance trees are not used under variant l");
  Tree& tree = state_.var.trees[h];
  TreeCache& c = caches_[m_ + h];
  const std::size_t n = data_.n();
  const std::vector<Tree::Node>& nodes = tree.nodes();
  for (std::size_t i = 0; i < n; ++i) {
    const double g = nodes[static_cast<std::size_t>(c.leaf_of[i])].value;
    tmp_[i] = g;
    vm_[i] = v_[i] - g;
    e_[i] = data_.y[i] - f_[i];
  }
  kernels::scaled_squares(e_, vm_, 1.0 / state_.sigma0_sq, r2_);
  const bool was_latent = c.latent;
  const VarModel model{r2_.data(), cfg_.vhp.a, cfg_.vhp.b};
  const bool acc = tree_update(tree, c, var_space_, cfg_.vhp.alpha, cfg_.vhp.beta, model,
                               stats_.var, rng);
  const std::vector<Tree::Node>& after = tree.nodes();
  for (std::size_t i = 0; i < n; ++i)
    v_[i] = vm_[i] + after[static_cast<std::size_t>(c.leaf_of[i])].value;
  weights_dirty_ = true;
  if (was_latent || c.latent) refresh_latent_trees();
  return acc;
}

double Sampler::sigma0_update(Rng& rng) {
  if (cfg_.variant != Variant::L || cfg_.s0.mode != Sigma0Spec::Mode::InverseGamma)
    throw ContractError("sigma0 is only updated under variant l with an inverse-gamma prior");
  double sse = 0.0;
  for (std::size_t i = 0; i < data_.n(); ++i) {
    const double e = data_.y[i] - f_[i];
    sse += e * e;
  }
  const double nu0 = cfg_.s0.nu0;
  state_.sigma0_sq = sample_inverse_gamma(rng, 0.5 * (nu0 + static_cast<double>(data_.n())),
                                          0.5 * (nu0 * cfg_.s0.xi0 + sse));
  weights_dirty_ = true;
  return state_.sigma0_sq;
}

Sampler::LatentContext Sampler::latent_context(std::size_t i) {
  LatentContext ctx;
  ctx.base_mean = f_[i];
  ctx.base_var = v_[i];
  const std::size_t min_leaf = static_cast<std::size_t>(cfg_.hp.min_leaf);
  for (std::size_t t : latent_trees_) {
    const Tree& tree = tree_at(t);
    const int leaf = caches_[t].leaf_of[i];
    const double val = tree.node(leaf).value;
    (t < m_ ? ctx.base_mean : ctx.base_var) -= val;
    // A leaf at exactly min_leaf cannot lose observation i, so u_i must stay
    // inside that leaf's latent interval.
    if (static_cast<std::size_t>(caches_[t].count[static_cast<std::size_t>(leaf)]) <= min_leaf) {
      const Interval iv = tree.latent_interval(leaf);
      ctx.lo = std::max(ctx.lo, iv.lo);
      ctx.hi = std::min(ctx.hi, iv.hi);
    }
  }
  return ctx;
}

double Sampler::latent_log_lik(std::size_t i, const LatentContext& ctx, double u) const {
  double m = ctx.base_mean;
  double v = ctx.base_var;
  const Point pt = point(i, u);
  for (const Tree* t : latent_mean_ptrs_) m += t->evaluate(pt);
  for (const Tree* t : latent_var_ptrs_) v += t->evaluate(pt);
  return normal_log_pdf(data_.y[i] - m, std::sqrt(state_.sigma0_sq) * std::exp(0.5 * v));
}

void Sampler::move_latent(std::size_t i, const LatentContext& ctx, double u_new) {
  state_.u[i] = u_new;
  double m = ctx.base_mean;
  double v = ctx.base_var;
  const Point pt = point(i);
  for (std::size_t t : latent_trees_) {
    const Tree& tree = tree_at(t);
    TreeCache& c = caches_[t];
    const int leaf = tree.find_leaf(pt);
    const int old = c.leaf_of[i];
    if (leaf != old) {
      --c.count[static_cast<std::size_t>(old)];
      ++c.count[static_cast<std::size_t>(leaf)];
      c.leaf_of[i] = leaf;
    }
    (t < m_ ? m : v) += tree.node(leaf).value;
  }
  f_[i] = m;
  if (v != v_[i]) {
    v_[i] = v;
    if (!weights_dirty_) w_[i] = std::exp(-v) / state_.sigma0_sq;
  }
}

LatentLaw Sampler::latent_law(std::size_t i) {
  const LatentContext ctx = latent_context(i);
  profiler_.build(latent_mean_ptrs_, latent_var_ptrs_, data_.row(i), ctx.base_mean, ctx.base_var,
                  profile_);
  LatentLaw law;
  const double sigma0 = std::sqrt(state_.sigma0_sq);
  logw_.clear();
  for (std::size_t k = 0; k < profile_.intervals(); ++k) {
    const double lo = std::max(profile_.breaks[k], ctx.lo);
    const double hi = std::min(profile_.breaks[k + 1], ctx.hi);
    if (!(hi > lo)) continue;
    law.lo.push_back(lo);
    law.hi.push_back(hi);
    logw_.push_back(std::log(hi - lo) +
                    normal_log_pdf(data_.y[i] - profile_.mean[k],
                                   sigma0 * std::exp(0.5 * profile_.log_var[k])));
  }
  const double total = log_sum_exp(logw_);
  law.prob.resize(logw_.size());
  for (std::size_t k = 0; k < logw_.size(); ++k) law.prob[k] = std::exp(logw_[k] - total);
  return law;
}

double Sampler::latent_update_gibbs(std::size_t i, Rng& rng) {
  const LatentContext ctx = latent_context(i);
  const LatentLaw law = latent_law(i);
  if (law.prob.empty()) return state_.u[i];
  const double target = rng.uniform();
  std::size_t k = 0;
  double cum = law.prob[0];
  while (cum < target && k + 1 < law.prob.size()) cum += law.prob[++k];
  double u = rng.uniform(law.lo[k], law.hi[k]);
  if (!(u < law.hi[k])) u = std::nextafter(law.hi[k], law.lo[k]);
  move_latent(i, ctx, u);
  return u;
}

double Sampler::latent_update_slice(std::size_t i, Rng& rng) {
  const LatentContext ctx = latent_context(i);
  const double u0 = state_.u[i];
  const double log_level = latent_log_lik(i, ctx, u0) + std::log(rng.uniform());
  double lo = ctx.lo;
  double hi = ctx.hi;
  double u = u0;
  for (;;) {
    u = rng.uniform(lo, hi);
    if (!(u < hi)) u = lo;
    if (latent_log_lik(i, ctx, u) > log_level) break;
    if (u < u0)
      lo = u;
    else
      hi = u;
    if (!(hi - lo > 1e-14)) {
      u = u0;
      break;
    }
  }
  move_latent(i, ctx, u);
  return u;
}

void Sampler::sweep(Rng& rng) {
  using clock = std::chrono::steady_clock;
  recompute_fit();
  auto t0 = clock::now();
  for (std::size_t h = 0; h < m_; ++h) mean_tree_update(h, rng);
  stats_.seconds_mean += seconds_since(t0);
  t0 = clock::now();
  for (std::size_t h = 0; h < mv_; ++h) variance_tree_update(h, rng);
  stats_.seconds_var += seconds_since(t0);
  if (cfg_.variant == Variant::L && cfg_.s0.mode == Sigma0Spec::Mode::InverseGamma) {
    t0 = clock::now();
    sigma0_update(rng);
    stats_.seconds_sigma0 += seconds_since(t0);
  }
  if (cfg_.use_latent) {
    t0 = clock::now();
    refresh_weights();
    const std::size_t n = data_.n();
    if (cfg_.latent_update == LatentUpdate::Gibbs)
      for (std::size_t i = 0; i < n; ++i) latent_update_gibbs(i, rng);
    else
      for (std::size_t i = 0; i < n; ++i) latent_update_slice(i, rng);
    stats_.seconds_latent += seconds_since(t0);
  }
}

void Sampler::set_response(std::span<const double> y) {
  if (y.size() != data_.n()) throw InputError("response length does not match the data");
  data_.y.assign(y.begin(), y.end());
}

PosteriorDraw Sampler::snapshot(int iter) const {
  PosteriorDraw d;
  d.iter = iter;
  d.sigma0_sq = state_.sigma0_sq;
  d.mean = state_.mean;
  d.var = state_.var;
  if (cfg_.save_latents) d.latents = state_.u;
  return d;
}

bool Sampler::feasible() const {
  const std::size_t min_leaf = static_cast<std::size_t>(cfg_.hp.min_leaf);
  const PointSet pts{data_.x, data_.p, state_.u};
  for (std::size_t t = 0; t < m_ + mv_; ++t)
    for (std::size_t c : leaf_occupancy(tree_at(t), pts))
      if (c < min_leaf) return false;
  return true;
}

double Sampler::cache_error() const {
  double worst = 0.0;
  for (std::size_t i = 0; i < data_.n(); ++i) {
    const Point p = point(i);
    worst = std::max(worst, std::fabs(f_[i] - state_.mean.evaluate(p)));
    worst = std::max(worst, std::fabs(v_[i] - state_.var.evaluate(p)));
    for (std::size_t t = 0; t < m_ + mv_; ++t)
      if (caches_[t].leaf_of[i] != tree_at(t).find_leaf(p))
        worst = std::numeric_limits<double>::infinity();
  }
  return worst;
}

// ---- Chains ----------------------------------------------------------------

void validate_data(const Dataset& data, const ChainConfig& cfg) {
  const std::size_t n = data.n();
  if (n <= 2 * static_cast<std::size_t>(cfg.hp.min_leaf))
    throw InputError("need more than 2*min_leaf observations (have " + std::to_string(n) + ")");
  if (data.x.size() != n * data.p) throw InputError("covariate matrix size does not match n*p");
  for (double v : data.x)
    if (!std::isfinite(v) || v < 0.0 || v > 1.0)
      throw InputError("covariates must be finite and standardized to [0, 1]");
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (double v : data.y) {
    if (!std::isfinite(v)) throw InputError("response contains a non-finite value");
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  if (!(hi > lo)) throw InputError("zero response range");
}

MoveStats run_chain(const Dataset& data, const ChainConfig& cfg,
                    const std::function<void(const PosteriorDraw&)>& sink) {
  cfg.validate();
  validate_data(data, cfg);
  Rng rng(cfg.seed);
  Sampler s(data, cfg, rng);
  const int total = cfg.n_burn + cfg.n_iter;
  for (int it = 0; it < total; ++it) {
    s.sweep(rng);
    if (it >= cfg.n_burn && (it - cfg.n_burn) % cfg.thin == 0) sink(s.snapshot(it));
  }
  return s.stats();
}

ChainResult run_chain(const Dataset& data, const ChainConfig& cfg) {
  ChainResult r;
  r.stats = run_chain(data, cfg, [&](const PosteriorDraw& d) { r.draws.push_back(d); });
  return r;
}

std::uint64_t chain_seed(std::uint64_t seed, int k) {
  return k == 0 ? seed : Rng::derive(seed, static_cast<std::uint64_t>(k));
}

std::vector<MoveStats> run_chains(const Dataset& data, const ChainConfig& cfg, int chains,
                                  const std::function<void(int, const PosteriorDraw&)>& sink) {
  if (chains < 1) throw UsageError("chains must be at least 1");
  std::vector<MoveStats> out(static_cast<std::size_t>(chains));
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(chains));
  std::vector<std::thread> threads;
  for (int k = 0; k < chains; ++k) {
    threads.emplace_back([&, k] {
      try {
        ChainConfig c = cfg;
        c.seed = chain_seed(cfg.seed, k);
        out[static_cast<std::size_t>(k)] =
            run_chain(data, c, [&](const PosteriorDraw& d) { sink(k, d); });
      } catch (...) {
        errors[static_cast<std::size_t>(k)] = std::current_exception();
      }
    });
  }
  for (std::thread& t : threads) t.join();
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

std::vector<ChainResult> run_chains(const Dataset& data, const ChainConfig& cfg, int chains) {
  std::vector<ChainResult> out(static_cast<std::size_t>(std::max(chains, 0)));
  const std::vector<MoveStats> stats = run_chains(
      data, cfg, chains,
      [&](int k, const PosteriorDraw& d) { out[static_cast<std::size_t>(k)].draws.push_back(d); });
  for (std::size_t k = 0; k < out.size(); ++k) out[k].stats = stats[k];
  return out;
}

}  // namespace drbart
