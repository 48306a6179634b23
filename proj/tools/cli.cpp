#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iostream>
#include <memory>
#include <mutex>
#include <sstream>

#include "drbart/checks.hpp"
#include "drbart/errors.hpp"
#include "drbart/io.hpp"
#include "drbart/predict.hpp"
#include "drbart/sampler.hpp"
#include "drbart/simbench.hpp"

namespace drbart {

namespace {

std::string one_line(std::string s) {
  std::replace(s.begin(), s.end(), '\n', ' ');
  while (!s.empty() && s.back() == ' ') s.pop_back();
  return s;
}

double parse_number(const std::string& text, const std::string& what) {
  std::string t = text;
  t.erase(0, t.find_first_not_of(" \t"));
  t.erase(t.find_last_not_of(" \t") + 1);
  double v = 0.0;
  const auto r = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || r.ec != std::errc() || r.ptr != t.data() + t.size() || !std::isfinite(v))
    throw UsageError(what + ": '" + text + "' is not a number");
  return v;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  return out;
}

std::vector<double> parse_list(const std::string& s, const std::string& what) {
  std::vector<double> v;
  for (const std::string& part : split(s, ',')) v.push_back(parse_number(part, what));
  if (v.empty()) throw UsageError(what + " is empty");
  return v;
}

/// "a,b,c", "lo..hi" (step 0.01) or "lo..hi:step".
std::vector<double> parse_levels(const std::string& s) {
  const auto dots = s.find("..");
  if (dots == std::string::npos) return parse_list(s, "--s");
  const double lo = parse_number(s.substr(0, dots), "--s");
  std::string rest = s.substr(dots + 2);
  double step = 0.01;
  if (const auto colon = rest.find(':'); colon != std::string::npos) {
    step = parse_number(rest.substr(colon + 1), "--s step");
    rest = rest.substr(0, colon);
  }
  const double hi = parse_number(rest, "--s");
  if (!(step > 0.0) || hi < lo) throw UsageError("--s range must be ascending with a positive step");
  std::vector<double> v;
  const int count = static_cast<int>(std::floor((hi - lo) / step + 1e-9));
  for (int k = 0; k <= count; ++k) v.push_back(std::round((lo + k * step) * 1e12) / 1e12);
  return v;
}

std::string chain_path(const std::string& out, int k, int chains) {
  if (chains == 1) return out;
  const auto slash = out.find_last_of('/');
  const auto dot = out.find_last_of('.');
  const std::string tag = ".chain" + std::to_string(k);
  if (dot == std::string::npos || (slash != std::string::npos && dot < slash)) return out + tag;
  return out.substr(0, dot) + tag + out.substr(dot);
}

/// Draws pooled from one or more files that share a standardization.
struct PooledDraws {
  Standardization standardization;
  std::vector<PosteriorDraw> draws;
};

PooledDraws load_pooled(const std::vector<std::string>& paths) {
  PooledDraws p;
  for (std::size_t i = 0; i < paths.size(); ++i) {
    DrawFile f = load_draws(paths[i]);
    if (i == 0)
      p.standardization = f.header.standardization;
    else if (!(f.header.standardization == p.standardization))
      throw InputError("draw files '" + paths[0] + "' and '" + paths[i] +
                       "' were fitted to differently scaled data");
    for (PosteriorDraw& d : f.draws) p.draws.push_back(std::move(d));
  }
  if (p.draws.empty()) throw InputError("draw files contain no posterior draws");
  return p;
}

std::vector<double> query_row(const std::string& x, const Standardization& st) {
  std::vector<double> row = parse_list(x, "--x");
  if (row.size() != st.p())
    throw UsageError("--x has " + std::to_string(row.size()) + " values but the model has " +
                     std::to_string(st.p()) + " covariates");
  return row;
}

/// Table output to --out when given, else to the default stream.
class Output {
 public:
  Output(const std::string& path, std::ostream& fallback) : stream_(&fallback) {
    if (!path.empty()) {
      file_ = std::make_unique<std::ofstream>(path);
      if (!*file_) throw InputError("cannot write '" + path + "'");
      stream_ = file_.get();
    }
  }
  std::ostream& operator*() { return *stream_; }

 private:
  std::unique_ptr<std::ofstream> file_;
  std::ostream* stream_;
};

struct FitArgs {
  std::string data, response, covars, variant = "full", sigma0 = "auto", latent = "slice", out;
  int m = 250, mv = 100, iters = 1000, burn = 1000, thin = 1, chains = 1, min_leaf = 5;
  double k = 2.0, a0_range = 4.0, nu0 = 3.0, xi0 = 0.0, change_prob = 0.5;
  std::uint64_t seed = 1;
  bool save_latents = false;
};

int cmd_fit(const FitArgs& a, const CLI::App& sub, std::ostream& err) {
  const Variant variant = parse_variant(a.variant);
  if (variant != Variant::L && (sub.count("--nu0") || sub.count("--xi0")))
    throw UsageError("--nu0 and --xi0 apply only to variant l");
  if (variant == Variant::L && (sub.count("--sigma0") || sub.count("--mv") || sub.count("--a0-range")))
    throw UsageError("--sigma0, --mv and --a0-range do not apply to variant l");
  if (a.latent != "slice" && a.latent != "gibbs") throw UsageError("--latent must be slice or gibbs");

  std::vector<std::string> covars;
  if (!a.covars.empty())
    for (const std::string& c : split(a.covars, ',')) covars.push_back(c);
  const LoadedData data = load_csv(a.data, a.response, covars);
  const double ys = data.standardization.y_scale();

  ChainConfig c;
  c.n_iter = a.iters;
  c.n_burn = a.burn;
  c.thin = a.thin;
  c.seed = a.seed;
  c.variant = variant;
  c.latent_update = a.latent == "gibbs" ? LatentUpdate::Gibbs : LatentUpdate::Slice;
  c.change_prob = a.change_prob;
  c.save_latents = a.save_latents;
  c.hp = BartHyperParams::calibrated(a.m, a.k, 0.95, 2.0, a.min_leaf);
  if (variant == Variant::L) {
    c.vhp = VarianceHyperParams::from_a0(1, 1.0);
    c.vhp.m_v = 0;
    const double xi0 = a.xi0 > 0.0 ? a.xi0 / (ys * ys) : std::pow(ols_half_residual_sd(data.model), 2);
    c.s0 = Sigma0Spec::inverse_gamma(a.nu0, xi0);
  } else {
    if (!(a.a0_range > 1.0)) throw UsageError("--a0-range must exceed 1");
    c.vhp = VarianceHyperParams::from_a0(a.mv, calibrate_a0(a.a0_range));
    const double s0 = a.sigma0 == "auto" ? ols_half_residual_sd(data.model)
                                         : parse_number(a.sigma0, "--sigma0") / ys;
    if (!(s0 > 0.0)) throw UsageError("--sigma0 must be positive");
    c.s0 = Sigma0Spec::fixed(s0 * s0);
  }
  try {
    c.validate();
  } catch (const DomainError& e) {
    throw UsageError(e.what());
  }
  validate_data(data.model, c);

  std::vector<std::unique_ptr<DrawWriter>> writers;
  for (int k = 0; k < a.chains; ++k) {
    DrawFileHeader h;
    h.config = c;
    h.config.seed = chain_seed(a.seed, k);
    h.standardization = data.standardization;
    h.chain = k;
    writers.push_back(std::make_unique<DrawWriter>(chain_path(a.out, k, a.chains), h));
  }
  const std::vector<MoveStats> stats = run_chains(
      data.model, c, a.chains,
      [&](int k, const PosteriorDraw& d) { writers[static_cast<std::size_t>(k)]->append(d); });
  for (auto& w : writers) w->close();
  for (std::size_t k = 0; k < stats.size(); ++k) {
    const MoveStats& s = stats[k];
    auto rate = [](const MoveCounts& m) {
      const double p = static_cast<double>(m.birth_proposed + m.death_proposed + m.change_proposed);
      return p > 0 ? static_cast<double>(m.birth_accepted + m.death_accepted + m.change_accepted) / p : 0.0;
    };
    err << "chain " << k << ": " << chain_path(a.out, static_cast<int>(k), a.chains)
        << ", mean-tree acceptance " << rate(s.mean) << ", variance-tree acceptance " << rate(s.var)
        << "\n";
  }
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"DR-BART density regression"};
  app.name(args.empty() ? "drbart" : args[0]);
  app.require_subcommand(1);

  FitArgs fa;
  CLI::App* fit = app.add_subcommand("fit", "Run the sampler and write posterior draws");
  fit->add_option("--data", fa.data, "CSV file with a header row")->required();
  fit->add_option("--response", fa.response, "Response column")->required();
  fit->add_option("--covars", fa.covars, "Comma-separated covariate columns (default: all others)");
  fit->add_option("--variant", fa.variant, "l, lh or full")->capture_default_str();
  fit->add_option("--m", fa.m, "Mean trees")->capture_default_str();
  fit->add_option("--mv", fa.mv, "Variance trees")->capture_default_str();
  fit->add_option("--k", fa.k, "Leaf-scale calibration k")->capture_default_str();
  fit->add_option("--a0-range", fa.a0_range, "d in a0 = log(sqrt d)^-2")->capture_default_str();
  fit->add_option("--nu0", fa.nu0, "Inverse-gamma prior degrees of freedom (variant l)");
  fit->add_option("--xi0", fa.xi0, "Inverse-gamma prior scale, response units squared (variant l)");
  fit->add_option("--sigma0", fa.sigma0, "auto or a value in response units")->capture_default_str();
  fit->add_option("--iters", fa.iters, "Kept sweeps after burn-in")->capture_default_str();
  fit->add_option("--burn", fa.burn, "Burn-in sweeps")->capture_default_str();
  fit->add_option("--thin", fa.thin, "Keep every thin-th sweep")->capture_default_str();
  fit->add_option("--seed", fa.seed, "Random seed")->capture_default_str();
  fit->add_option("--latent", fa.latent, "slice or gibbs")->capture_default_str();
  fit->add_option("--change-prob", fa.change_prob, "Share of rule-change proposals (0: birth/death only)")
      ->capture_default_str();
  fit->add_option("--min-leaf", fa.min_leaf, "Minimum observations per leaf")->capture_default_str();
  fit->add_option("--chains", fa.chains, "Independent chains, one file each")->capture_default_str();
  fit->add_flag("--save-latents", fa.save_latents, "Store latent coordinates with each draw");
  fit->add_option("--out", fa.out, "Draw file (JSON Lines)")->required();

  std::vector<std::string> draw_paths;
  std::string x_text, out_path, s_text = "0.01..0.99";
  double grid_min = NAN, grid_max = NAN, level = 0.95;
  int grid_n = 512;
  CLI::App* density = app.add_subcommand("density", "Posterior predictive density at one x");
  density->add_option("--draws", draw_paths, "Draw file(s)")->required();
  density->add_option("--x", x_text, "Comma-separated covariate values")->required();
  density->add_option("--grid-min", grid_min, "Lowest y (default: data range - 25%)");
  density->add_option("--grid-max", grid_max, "Highest y (default: data range + 25%)");
  density->add_option("--grid-n", grid_n, "Grid points")->capture_default_str();
  density->add_option("--level", level, "Credible band level")->capture_default_str();
  density->add_option("--out", out_path, "CSV output (default: stdout)");

  CLI::App* quantile = app.add_subcommand("quantile", "Posterior predictive quantiles at one x");
  quantile->add_option("--draws", draw_paths, "Draw file(s)")->required();
  quantile->add_option("--x", x_text, "Comma-separated covariate values")->required();
  quantile->add_option("--s", s_text, "Levels: list or lo..hi[:step]")->capture_default_str();
  quantile->add_option("--level", level, "Credible interval level")->capture_default_str();
  quantile->add_option("--out", out_path, "CSV output (default: stdout)");

  std::string dgp = "base", probes = "0.1,0.5,0.8", truth_out, truth_spec;
  double a_coef = 0.0;
  int n = 800, test_n = 1000, max_draws = 200;
  std::uint64_t seed = 1, test_seed = 1000003;
  CLI::App* simulate = app.add_subcommand("simulate", "Draw a data set from a simulation design");
  simulate->add_option("--dgp", dgp, "base, irrelevant14, gapx or quadratic")->capture_default_str();
  simulate->add_option("--a", a_coef, "Curvature of the quadratic design")->capture_default_str();
  simulate->add_option("--n", n, "Observations")->capture_default_str();
  simulate->add_option("--seed", seed, "Random seed")->capture_default_str();
  simulate->add_option("--out", out_path, "Data CSV")->required();
  simulate->add_option("--truth-out", truth_out, "True densities CSV (default: <out>.truth.csv)");
  simulate->add_option("--x-probes", probes, "x values for the true densities")->capture_default_str();
  simulate->add_option("--grid-n", grid_n, "Grid points")->capture_default_str();

  CLI::App* evaluate = app.add_subcommand("evaluate", "Score a fit against a simulation design");
  evaluate->add_option("--draws", draw_paths, "Draw file(s)")->required();
  evaluate->add_option("--truth-spec", truth_spec, "Design, e.g. base or quadratic:a=5")->required();
  evaluate->add_option("--x-probes", probes, "x values")->capture_default_str();
  evaluate->add_option("--grid-n", grid_n, "Grid points")->capture_default_str();
  evaluate->add_option("--level", level, "Band, HDR and predictive level")->capture_default_str();
  evaluate->add_option("--test-n", test_n, "Fresh test points for predictive coverage")->capture_default_str();
  evaluate->add_option("--test-seed", test_seed, "Seed of the test points")->capture_default_str();
  evaluate->add_option("--max-draws", max_draws, "Draws used for predictive coverage")->capture_default_str();
  evaluate->add_option("--out", out_path, "CSV output (default: stdout)");

  CLI::App* prior_check = app.add_subcommand("prior-check", "Monte Carlo checks of the priors");
  prior_check->add_option("--seed", seed, "Random seed")->capture_default_str();

  std::vector<std::string> argv_store(args.begin(), args.end());
  if (argv_store.empty()) argv_store.push_back("drbart");
  std::vector<char*> argv;
  for (std::string& s : argv_store) argv.push_back(s.data());

  try {
    try {
      app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
      if (e.get_exit_code() == 0) return app.exit(e, out, err);
      err << "error: " << one_line(e.what()) << "\n";
      return kExitUsage;
    }

    if (fit->parsed()) return cmd_fit(fa, *fit, err);

    if (!(level >= 0.0 && level < 1.0)) throw UsageError("--level must lie in [0, 1)");
    if (grid_n < 2) throw UsageError("--grid-n must be at least 2");

    if (density->parsed()) {
      const PooledDraws p = load_pooled(draw_paths);
      const std::vector<double> x = query_row(x_text, p.standardization);
      std::vector<double> grid = default_y_grid(p.standardization, static_cast<std::size_t>(grid_n));
      const double lo = std::isnan(grid_min) ? grid.front() : grid_min;
      const double hi = std::isnan(grid_max) ? grid.back() : grid_max;
      if (!(hi > lo)) throw UsageError("--grid-max must exceed --grid-min");
      grid = linspace(lo, hi, static_cast<std::size_t>(grid_n));
      const DensitySummary s = summarize(density_grid(p.draws, x, grid, p.standardization), level);
      std::vector<std::vector<double>> rows;
      for (std::size_t j = 0; j < grid.size(); ++j)
        rows.push_back({grid[j], s.mean[j], s.band.lower[j], s.band.upper[j]});
      Output o(out_path, out);
      write_csv(*o, {"y", "mean", "lower", "upper"}, rows);
      return kExitOk;
    }

    if (quantile->parsed()) {
      const std::vector<double> s = parse_levels(s_text);
      for (double v : s)
        if (!(v > 0.0 && v < 1.0)) throw UsageError("--s levels must lie in (0, 1)");
      const PooledDraws p = load_pooled(draw_paths);
      const std::vector<double> x = query_row(x_text, p.standardization);
      const auto q = quantile_summaries(p.draws, x, s, p.standardization, level);
      std::vector<std::vector<double>> rows;
      for (std::size_t k = 0; k < s.size(); ++k) rows.push_back({s[k], q[k].mean, q[k].lower, q[k].upper});
      Output o(out_path, out);
      write_csv(*o, {"s", "mean", "lower", "upper"}, rows);
      return kExitOk;
    }

    if (simulate->parsed()) {
      DgpSpec spec{parse_dgp(dgp), a_coef, n, seed};
      try {
        spec.validate();
      } catch (const InputError& e) {
        throw UsageError(e.what());
      }
      const Dataset d = dgp_sample(spec);
      std::vector<std::string> header;
      for (std::size_t j = 0; j < d.p; ++j) header.push_back("x" + std::to_string(j + 1));
      header.push_back("y");
      std::vector<std::vector<double>> rows;
      for (std::size_t i = 0; i < d.n(); ++i) {
        std::vector<double> r(d.row(i).begin(), d.row(i).end());
        r.push_back(d.y[i]);
        rows.push_back(std::move(r));
      }
      {
        Output o(out_path, out);
        write_csv(*o, header, rows);
      }
      const std::vector<double> xs = parse_list(probes, "--x-probes");
      const Standardization st = Standardization::fit(d.x, d.p, d.y);
      const std::vector<double> grid = default_y_grid(st, static_cast<std::size_t>(grid_n));
      std::vector<std::string> th{"y"};
      std::vector<std::vector<double>> dens;
      for (double x : xs) {
        std::ostringstream name;
        name << "x=" << x;
        th.push_back(name.str());
        dens.push_back(dgp_true_density(x, grid, spec));
      }
      std::vector<std::vector<double>> trows;
      for (std::size_t j = 0; j < grid.size(); ++j) {
        std::vector<double> r{grid[j]};
        for (const auto& v : dens) r.push_back(v[j]);
        trows.push_back(std::move(r));
      }
      const std::string tpath = truth_out.empty() ? out_path + ".truth.csv" : truth_out;
      Output t(tpath, out);
      write_csv(*t, th, trows);
      return kExitOk;
    }

    if (evaluate->parsed()) {
      const auto parts = split(truth_spec, ':');
      if (parts.empty()) throw UsageError("--truth-spec is empty");
      DgpSpec spec{parse_dgp(parts[0]), 0.0, test_n, test_seed};
      for (std::size_t i = 1; i < parts.size(); ++i) {
        if (parts[i].rfind("a=", 0) != 0) throw UsageError("unknown --truth-spec field '" + parts[i] + "'");
        spec.a = parse_number(parts[i].substr(2), "--truth-spec a");
      }
      try {
        spec.validate();
      } catch (const InputError& e) {
        throw UsageError(e.what());
      }
      const PooledDraws p = load_pooled(draw_paths);
      if (p.standardization.p() != spec.p())
        throw InputError("draws have " + std::to_string(p.standardization.p()) +
                         " covariates but the design has " + std::to_string(spec.p()));
      const std::vector<double> grid = default_y_grid(p.standardization, static_cast<std::size_t>(grid_n));
      std::ostringstream csv;
      csv << "metric,x,value\n";
      for (double x : parse_list(probes, "--x-probes")) {
        const std::vector<double> row = dgp_probe_row(spec, x);
        const DensitySummary s = summarize(density_grid(p.draws, row, grid, p.standardization), level);
        const std::vector<double> truth = dgp_true_density(x, grid, spec);
        csv << "w1," << x << "," << wasserstein1(grid, s.mean, grid, truth) << "\n";
        csv << "band_coverage," << x << "," << (band_coverage(s.band, grid, truth, level) ? 1 : 0) << "\n";
      }
      std::vector<PosteriorDraw> thinned;
      const std::size_t stride = std::max<std::size_t>(1, p.draws.size() / static_cast<std::size_t>(std::max(1, max_draws)));
      for (std::size_t d = 0; d < p.draws.size(); d += stride) thinned.push_back(p.draws[d]);
      const Dataset test = dgp_sample(spec);
      csv << "predictive_coverage,," << predictive_coverage(thinned, test, p.standardization, grid, level) << "\n";
      Output o(out_path, out);
      *o << csv.str();
      return kExitOk;
    }

    if (prior_check->parsed()) {
      bool all = true;
      for (const CheckResult& r : prior_checks(seed)) {
        out << (r.pass ? "PASS " : "FAIL ") << r.name << ": " << r.detail << "\n";
        all = all && r.pass;
      }
      return all ? kExitOk : kExitRuntime;
    }
    return kExitUsage;
  } catch (const UsageError& e) {
    err << "error: " << one_line(e.what()) << "\n";
    return kExitUsage;
  } catch (const InputError& e) {
    err << "error: " << one_line(e.what()) << "\n";
    return kExitInput;
  } catch (const DomainError& e) {
    err << "error: " << one_line(e.what()) << "\n";
    return kExitInput;
  } catch (const std::exception& e) {
    err << "error: " << one_line(e.what()) << "\n";
    return kExitRuntime;
  }
}

}  // namespace drbart
