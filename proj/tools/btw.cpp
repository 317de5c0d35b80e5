// btw: Monte Carlo scenarios for biased walks on branching-random-walk
// environments. Subcommands cover environment diagnostics, tail estimation,
// the typed-tree equivalences, spine checks, and the one-dimensional tilted
// walks; every run writes CSV plus a JSON summary sidecar and is a pure
// function of (seed, replica count).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "btw/csv.hpp"
#include "btw/env_tree.hpp"
#include "btw/law.hpp"
#include "btw/ltgw.hpp"
#include "btw/parallel.hpp"
#include "btw/rng.hpp"
#include "btw/rw1d.hpp"
#include "btw/spine.hpp"
#include "btw/stats.hpp"
#include "btw/walk.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace btw;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitAssertion = 2;
constexpr int kExitConfig = 3;

struct Ctx {
  std::string law_path;
  std::string out_dir = ".";
  std::string config_path;
  std::string plot_path;
  std::string format = "csv";
  std::uint64_t seed = 12345;
  std::size_t replicas = 16;
  std::size_t samples = 0;  // 0 = scenario default
  json config;

  std::uint64_t cfg_u64(const std::string& key, std::uint64_t def) const {
    if (config.contains(key)) return config[key].get<std::uint64_t>();
    return def;
  }
  double cfg_f64(const std::string& key, double def) const {
    if (config.contains(key)) return config[key].get<double>();
    return def;
  }
  std::size_t n_samples(std::size_t def) const {
    return samples ? samples : cfg_u64("samples", def);
  }
};

// contiguous index ranges across replicas; per-sample substreams and the
// index-ordered merge make artifacts independent of the worker count
template <typename T, typename F>
std::vector<T> mc_rows(std::size_t total, std::size_t replicas, F&& per_sample) {
  replicas = std::max<std::size_t>(1, std::min(replicas, total ? total : 1));
  auto chunks = par::run_replicas<std::vector<T>>(replicas, [&](std::size_t r) {
    std::size_t lo = total * r / replicas;
    std::size_t hi = total * (r + 1) / replicas;
    std::vector<T> rows;
    rows.reserve(hi - lo);
    for (std::size_t i = lo; i < hi; ++i) rows.push_back(per_sample(i));
    return rows;
  });
  std::vector<T> out;
  out.reserve(total);
  for (auto& c : chunks)
    for (auto& row : c) out.push_back(std::move(row));
  return out;
}

void write_summary(const Ctx& ctx, const std::string& scenario, const json& extra) {
  json j = extra;
  j["scenario"] = scenario;
  j["seed"] = ctx.seed;
  j["replicas"] = ctx.replicas;
  j["law"] = ctx.law_path;
  std::ofstream out(fs::path(ctx.out_dir) / "summary.json");
  out << j.dump(2) << "\n";
}

void write_table(const Ctx& ctx, const std::string& name, const std::string& comment,
                 const std::vector<std::string>& header,
                 const std::vector<std::vector<std::string>>& rows) {
  if (ctx.format == "json") {
    json arr = json::array();
    for (const auto& r : rows) {
      json obj;
      for (std::size_t i = 0; i < header.size(); ++i) obj[header[i]] = r[i];
      arr.push_back(obj);
    }
    std::ofstream out(fs::path(ctx.out_dir) / (name + ".json"));
    out << arr.dump(2) << "\n";
    return;
  }
  csv::Writer w((fs::path(ctx.out_dir) / (name + ".csv")).string());
  w.comment(comment);
  w.row(header);
  for (const auto& r : rows) w.row(r);
}

// ---------------------------------------------------------------------------
// SVG emission: log-log survival scatter with optional fitted slope lines
// ---------------------------------------------------------------------------

struct PlotSeries {
  std::string name;
  std::vector<std::pair<double, double>> points;  // (x, survival), positive
};

struct PlotLine {
  double slope = 0.0;
  double intercept = 0.0;  // ln c
  std::string label;
};

void emit_plot(const std::string& path, const std::string& title,
               const std::vector<PlotSeries>& series, const std::vector<PlotLine>& lines) {
  const double W = 640, H = 480, L = 70, R = 20, T = 40, B = 50;
  double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
  for (const auto& s : series)
    for (auto [x, y] : s.points) {
      if (!(x > 0.0) || !(y > 0.0)) continue;
      xmin = std::min(xmin, std::log(x));
      xmax = std::max(xmax, std::log(x));
      ymin = std::min(ymin, std::log(y));
      ymax = std::max(ymax, std::log(y));
    }
  if (xmin > xmax) {  // empty input: axes only
    xmin = 0, xmax = 1, ymin = -1, ymax = 0;
  }
  if (xmax - xmin < 1e-9) xmax = xmin + 1;
  if (ymax - ymin < 1e-9) ymax = ymin + 1;
  auto px = [&](double lx) { return L + (lx - xmin) / (xmax - xmin) * (W - L - R); };
  auto py = [&](double ly) { return H - B - (ly - ymin) / (ymax - ymin) * (H - T - B); };
  std::ofstream out(path);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
      << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << W / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">"
      << title << "</text>\n";
  out << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\""
      << H - B << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B
      << "\" stroke=\"black\"/>\n";
  out << "<text x=\"" << W / 2 << "\" y=\"" << H - 12
      << "\" text-anchor=\"middle\" font-size=\"12\">ln x</text>\n";
  out << "<text x=\"18\" y=\"" << H / 2 << "\" font-size=\"12\" transform=\"rotate(-90 18 "
      << H / 2 << ")\">ln S(x)</text>\n";
  const char* colors[] = {"#1f6fb2", "#c23b22", "#3a7d44", "#8250a0"};
  int ci = 0;
  for (const auto& s : series) {
    const char* col = colors[ci % 4];
    for (auto [x, y] : s.points) {
      if (!(x > 0.0) || !(y > 0.0)) continue;
      out << "<circle cx=\"" << px(std::log(x)) << "\" cy=\"" << py(std::log(y))
          << "\" r=\"2.5\" fill=\"" << col << "\"/>\n";
    }
    out << "<text x=\"" << W - R - 5 << "\" y=\"" << T + 16 + 16 * ci
        << "\" text-anchor=\"end\" font-size=\"12\" fill=\"" << col << "\">" << s.name
        << "</text>\n";
    ++ci;
  }
  for (const auto& l : lines) {
    double y1 = l.intercept + l.slope * xmin;
    double y2 = l.intercept + l.slope * xmax;
    out << "<line x1=\"" << px(xmin) << "\" y1=\"" << py(y1) << "\" x2=\"" << px(xmax)
        << "\" y2=\"" << py(y2)
        << "\" stroke=\"#555\" stroke-dasharray=\"6 4\" stroke-width=\"1.2\"/>\n";
    out << "<text x=\"" << W - R - 5 << "\" y=\"" << T + 16 + 16 * ci
        << "\" text-anchor=\"end\" font-size=\"12\" fill=\"#555\">" << l.label
        << "</text>\n";
    ++ci;
  }
  out << "</svg>\n";
}

std::vector<double> log_grid(double lo, double hi, std::size_t n) {
  std::vector<double> g;
  for (std::size_t i = 0; i < n; ++i) {
    double f = n > 1 ? static_cast<double>(i) / static_cast<double>(n - 1) : 0.0;
    g.push_back(std::exp(std::log(lo) + f * (std::log(hi) - std::log(lo))));
  }
  return g;
}

// quantile-anchored grid for tail fits: from the q-quantile up to the value
// with min_exceed exceedances
std::vector<double> tail_grid(std::vector<double> sorted, double q, std::size_t min_exceed,
                              std::size_t n_points) {
  if (sorted.empty()) return {};
  std::size_t lo_idx = static_cast<std::size_t>(q * static_cast<double>(sorted.size() - 1));
  std::size_t hi_idx = sorted.size() > min_exceed ? sorted.size() - min_exceed : lo_idx;
  double lo = std::max(sorted[lo_idx], 1e-12);
  double hi = std::max(sorted[hi_idx], lo * 1.0001);
  return log_grid(lo, hi, n_points);
}

ReproductionLaw load_law(const Ctx& ctx) {
  if (ctx.law_path.empty())
    throw LawError("law", "--law PATH is required for this scenario");
  return ReproductionLaw::from_json_file(ctx.law_path);
}

// ---------------------------------------------------------------------------
// env-report
// ---------------------------------------------------------------------------

int run_env_report(const Ctx& ctx) {
  auto law = load_law(ctx);
  auto rep = law.validate();
  std::vector<std::vector<std::string>> rows;
  auto add = [&](const std::string& name, const std::string& value, bool pass) {
    rows.push_back({name, value, pass ? "pass" : "FAIL"});
  };
  add("psi0_supercritical", csv::fmt(rep.psi0), rep.supercritical);
  add("psi1_normalized", csv::fmt(rep.psi1), rep.normalized);
  add("psi1_prime_negative", csv::fmt(rep.psi1_prime), rep.negative_slope);
  add("kappa", rep.kappa.infinite ? "inf" : csv::fmt(rep.kappa.value), rep.kappa_ok);
  add("non_lattice_heuristic", rep.non_lattice ? "yes" : "no (warning)", true);
  write_table(ctx, "conditions", "condition checks; kappa=inf means psi<1 for all t>1",
              {"condition", "value", "status"}, rows);

  std::vector<std::vector<std::string>> psi_rows;
  double t_hi = rep.kappa.infinite ? 8.0 : rep.kappa.value + 1.0;
  for (double t = 0.0; t <= t_hi + 1e-9; t += t_hi / 32.0)
    psi_rows.push_back({csv::fmt(t), csv::fmt(law.psi(t)), csv::fmt(law.psi_prime(t))});
  write_table(ctx, "psi_grid", "Laplace transform grid", {"t", "psi", "psi_prime"},
              psi_rows);

  json summary;
  summary["kappa"] = rep.kappa.infinite ? json("inf") : json(rep.kappa.value);
  summary["kappa_residual"] = rep.kappa.residual;
  summary["psi0"] = rep.psi0;
  summary["psi1"] = rep.psi1;
  summary["psi1_prime"] = rep.psi1_prime;
  summary["conditions_ok"] = rep.all_required();
  summary["non_lattice"] = rep.non_lattice;
  summary["messages"] = rep.messages;
  write_summary(ctx, "env-report", summary);

  for (const auto& r : rows)
    std::cout << r[0] << " = " << r[1] << " [" << r[2] << "]\n";
  if (!rep.all_required()) {
    for (const auto& m : rep.messages) std::cerr << "error: condition: " << m << "\n";
    return kExitConfig;
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// tail-w-m
// ---------------------------------------------------------------------------

struct WmRow {
  double w = 0.0, me = 1.0, wm = 0.0;
  int depth = 0;
  bool censored = false;
};

int run_tail_w_m(const Ctx& ctx) {
  auto law = load_law(ctx);
  auto kr = law.solve_kappa();
  env::EnvCaps ecaps;
  if (!kr.infinite) ecaps.barrier = env::default_barrier(kr.value);
  ecaps.w_cut = ctx.cfg_f64("w_cut", ecaps.w_cut);
  ecaps.max_nodes = ctx.cfg_u64("max_nodes", ecaps.max_nodes);
  const std::size_t N = ctx.n_samples(200000);
  const std::uint64_t tag = 0x77696e66;
  auto rows = mc_rows<WmRow>(N, ctx.replicas, [&](std::size_t i) {
    env::EnvTree tree(&law, mix64(mix64(ctx.seed, tag), i));
    RngStream tie(ctx.seed, tag + 1, i);
    auto wp = env::sample_w_pair(tree, ecaps, tie);
    return WmRow{wp.W_inf, wp.M_e, wp.W_M, wp.depth_used, wp.censored};
  });
  std::vector<std::vector<std::string>> table;
  table.reserve(rows.size());
  std::vector<double> ws, mes;
  std::size_t censored = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    table.push_back({csv::fmt(static_cast<std::uint64_t>(i)), csv::fmt(r.w), csv::fmt(r.me),
                     csv::fmt(r.wm), csv::fmt(static_cast<std::int64_t>(r.depth)),
                     r.censored ? "1" : "0"});
    if (!r.censored) {
      ws.push_back(r.w);
      mes.push_back(r.me);
    } else {
      ++censored;
    }
  }
  write_table(ctx, "w_m_samples",
              "joint samples; W_inf and M_e are truncated-tree estimates; censored=1 rows "
              "hit a budget and are lower bounds",
              {"run_id", "w_inf", "m_e", "w_m", "depth_used", "censored"}, table);

  json summary;
  summary["censored_fraction"] =
      static_cast<double>(censored) / static_cast<double>(std::max<std::size_t>(1, N));
  auto put_tail = [&](const char* name, std::vector<double>& xs) {
    auto est = stats::hill_scan_average(xs);
    summary[name] = {{"alpha", est.alpha},
                     {"se", est.se},
                     {"k_order", est.k_order},
                     {"c_hat", est.c_hat}};
  };
  put_tail("hill_w", ws);
  put_tail("hill_me", mes);
  if (!kr.infinite) {
    // joint tail grid: x^kappa P(W >= a x, M_e >= x) for a battery of a
    std::vector<double> as{0.0, 0.5, 1.0, 2.0};
    std::vector<double> sorted_me(mes);
    std::sort(sorted_me.begin(), sorted_me.end());
    auto grid = tail_grid(sorted_me, 0.9, 200, 10);
    json jt = json::array();
    for (double a : as) {
      json row;
      row["a"] = a;
      json vals = json::array();
      for (double x : grid) {
        std::size_t cnt = 0;
        for (std::size_t i = 0; i < mes.size(); ++i)
          if (mes[i] >= x && ws[i] >= a * x) ++cnt;
        double p = static_cast<double>(cnt) / static_cast<double>(mes.size());
        vals.push_back({{"x", x}, {"scaled", p * std::pow(x, kr.value)}});
      }
      row["grid"] = vals;
      jt.push_back(row);
    }
    summary["joint_tail"] = jt;
    summary["kappa"] = kr.value;
  }
  write_summary(ctx, "tail-w-m", summary);

  if (!ctx.plot_path.empty()) {
    std::vector<double> sorted(mes);
    std::sort(sorted.begin(), sorted.end());
    auto grid = tail_grid(sorted, 0.5, 50, 24);
    auto curve = stats::survival_curve(mes, grid);
    PlotSeries s{"S(M_e)", {}};
    for (auto& p : curve) s.points.emplace_back(p.x, p.survival);
    std::vector<PlotLine> lines;
    if (!kr.infinite)
      lines.push_back(
          {-kr.value,
           std::log(stats::fixed_slope_intercept(curve, -kr.value, grid.front(),
                                                 grid.back(), 50)),
           "slope -kappa"});
    emit_plot(ctx.plot_path, "M_e survival", {s}, lines);
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// tail-maxl
// ---------------------------------------------------------------------------

struct MaxlRow {
  std::uint64_t tau = 0;
  std::uint64_t max_lt = 0;
  std::uint32_t nodes = 0;
  bool censored = false;
};

int run_tail_maxl(const Ctx& ctx) {
  auto law = load_law(ctx);
  auto kr = law.solve_kappa();
  walk::WalkCaps wcaps;
  wcaps.max_steps = ctx.cfg_u64("max_steps", wcaps.max_steps);
  wcaps.max_nodes = ctx.cfg_u64("max_nodes", wcaps.max_nodes);
  const auto n_exc = static_cast<std::uint32_t>(ctx.cfg_u64("n_excursions", 1));
  const std::size_t N = ctx.n_samples(100000);
  const std::uint64_t tag = 0x6d61786c;
  auto rows = mc_rows<MaxlRow>(N, ctx.replicas, [&](std::size_t i) {
    env::EnvTree tree(&law, mix64(mix64(ctx.seed, tag), i));
    RngStream rng(ctx.seed, tag + 1, i);
    auto st = walk::run_excursions(tree, n_exc, wcaps, rng);
    return MaxlRow{st.steps, st.max_beta(), st.nodes_touched, st.censored};
  });
  std::vector<std::vector<std::string>> table;
  std::vector<double> maxs;
  std::vector<std::uint8_t> cens;
  std::size_t censored = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    table.push_back({csv::fmt(static_cast<std::uint64_t>(i)),
                     csv::fmt(static_cast<std::uint64_t>(n_exc)), csv::fmt(r.tau),
                     csv::fmt(r.max_lt), csv::fmt(static_cast<std::uint64_t>(r.nodes)),
                     r.censored ? "1" : "0"});
    maxs.push_back(static_cast<double>(r.max_lt));
    cens.push_back(r.censored ? 1 : 0);
    if (r.censored) ++censored;
  }
  write_table(ctx, "maxl_samples",
              "max edge local time (crossings) over n excursions; censored=1 rows carry "
              "the running max as a lower bound",
              {"run_id", "n", "tau_n", "max_lt", "nodes_touched", "censored"}, table);

  std::vector<double> sorted(maxs);
  std::sort(sorted.begin(), sorted.end());
  auto grid = tail_grid(sorted, 0.95, 100, 20);
  json summary;
  summary["censored_fraction"] =
      static_cast<double>(censored) / static_cast<double>(std::max<std::size_t>(1, N));
  std::vector<stats::SurvivalPoint> curve;
  if (!grid.empty() && grid.back() > grid.front() * 1.5) {
    curve = stats::survival_curve(maxs, cens, grid);
    try {
      auto fit = stats::loglog_fit(curve, grid.front(), grid.back(), 100);
      summary["loglog_slope"] = fit.slope;
      summary["loglog_intercept"] = fit.intercept;
      summary["loglog_r2"] = fit.r2;
      double cslope = kr.infinite ? -1.0 : (kr.value < 2.0 ? -1.0 : -kr.value / 2.0);
      summary["c_star_fixed_slope"] =
          stats::fixed_slope_intercept(curve, cslope, grid.front(), grid.back(), 100);
      summary["fixed_slope"] = cslope;
    } catch (const stats::StatsError& e) {
      summary["loglog_error"] = e.what();
    }
  }
  // moment stability across doubling sample sizes (light-tail regimes)
  json moments = json::array();
  for (std::size_t part : {N / 4, N / 2, N}) {
    json row;
    row["samples"] = part;
    for (int p = 1; p <= 4; ++p) {
      double m = 0.0;
      for (std::size_t i = 0; i < part && i < maxs.size(); ++i)
        m += std::pow(maxs[i], p);
      row["m" + std::to_string(p)] = m / static_cast<double>(std::max<std::size_t>(1, part));
    }
    moments.push_back(row);
  }
  summary["moments"] = moments;
  write_summary(ctx, "tail-maxl", summary);

  if (!ctx.plot_path.empty()) {
    PlotSeries s{"S(max L)", {}};
    for (auto& p : curve) s.points.emplace_back(p.x, p.survival);
    std::vector<PlotLine> lines;
    if (summary.contains("loglog_slope"))
      lines.push_back({summary["loglog_slope"].get<double>(),
                       summary["loglog_intercept"].get<double>(), "fit"});
    emit_plot(ctx.plot_path, "max edge local time survival", {s}, lines);
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// maxln-converge
// ---------------------------------------------------------------------------

int run_maxln_converge(const Ctx& ctx) {
  auto law = load_law(ctx);
  auto kr = law.solve_kappa();
  walk::WalkCaps wcaps;
  wcaps.max_steps = ctx.cfg_u64("max_steps", 100'000'000);
  wcaps.max_nodes = ctx.cfg_u64("max_nodes", std::size_t{1} << 22);
  env::EnvCaps ecaps;
  if (!kr.infinite) ecaps.barrier = env::default_barrier(kr.value);
  const auto n_exc = static_cast<std::uint32_t>(ctx.cfg_u64("n_excursions", 500));
  const std::size_t N = ctx.n_samples(5000);
  const std::uint64_t tag = 0x6d6c6e63;

  struct Row {
    std::uint64_t max_lt = 0;
    std::uint32_t n_done = 0;
    double w = 0.0, me = 1.0;
    bool censored = false;
  };
  auto rows = mc_rows<Row>(N, ctx.replicas, [&](std::size_t i) {
    env::EnvTree tree(&law, mix64(mix64(ctx.seed, tag), i));
    RngStream wrng(ctx.seed, tag + 1, i);
    RngStream tie(ctx.seed, tag + 2, i);
    auto joint = walk::max_over_excursions(tree, n_exc, wcaps, ecaps, wrng, tie);
    return Row{joint.max_lt, joint.n_done, joint.W_inf, joint.M_e, joint.censored};
  });
  // independent reference sample of (W_inf, M_e)
  auto ref = mc_rows<WmRow>(N, ctx.replicas, [&](std::size_t i) {
    env::EnvTree tree(&law, mix64(mix64(ctx.seed, tag + 3), i));
    RngStream tie(ctx.seed, tag + 4, i);
    auto wp = env::sample_w_pair(tree, ecaps, tie);
    return WmRow{wp.W_inf, wp.M_e, wp.W_M, wp.depth_used, wp.censored};
  });

  std::vector<std::vector<std::string>> table;
  std::vector<double> ratios, mes_ref, w_ref;
  std::size_t censored = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    table.push_back({csv::fmt(static_cast<std::uint64_t>(i)), csv::fmt(r.max_lt),
                     csv::fmt(static_cast<std::uint64_t>(r.n_done)), csv::fmt(r.w),
                     csv::fmt(r.me), r.censored ? "1" : "0"});
    if (!r.censored)
      ratios.push_back(static_cast<double>(r.max_lt) / static_cast<double>(n_exc));
    else
      ++censored;
  }
  for (const auto& r : ref)
    if (!r.censored) {
      mes_ref.push_back(r.me);
      w_ref.push_back(r.w);
    }
  write_table(ctx, "maxln_samples",
              "max edge local time over n excursions with same-environment (W_inf, M_e); "
              "censored=1 rows are lower bounds",
              {"run_id", "max_lt", "n_done", "w_inf", "m_e", "censored"}, table);

  json summary;
  summary["n_excursions"] = n_exc;
  summary["censored_fraction"] =
      static_cast<double>(censored) / static_cast<double>(std::max<std::size_t>(1, N));
  auto ks = stats::ks_two_sample(ratios, mes_ref);
  summary["ks_maxln_vs_me"] = {{"d", ks.value}, {"p", ks.p_value}};
  // pointwise CDF gap on a quantile grid of M_e (stochastic domination check)
  std::vector<double> sorted_me(mes_ref);
  std::sort(sorted_me.begin(), sorted_me.end());
  std::vector<double> sorted_ratio(ratios);
  std::sort(sorted_ratio.begin(), sorted_ratio.end());
  auto cdf = [](const std::vector<double>& s, double x) {
    return static_cast<double>(std::upper_bound(s.begin(), s.end(), x) - s.begin()) /
           static_cast<double>(s.size());
  };
  double worst_gap = -1.0;
  json dom = json::array();
  for (std::size_t gi = 1; gi <= 20; ++gi) {
    double t = sorted_me[std::min(sorted_me.size() - 1, sorted_me.size() * gi / 21)];
    double gap = cdf(sorted_ratio, t) - cdf(sorted_me, t);
    worst_gap = std::max(worst_gap, gap);
    dom.push_back({{"t", t}, {"cdf_gap", gap}});
  }
  summary["domination_grid"] = dom;
  summary["worst_cdf_gap"] = worst_gap;

  if (!kr.infinite && kr.value < 2.0) {
    // self-consistency against F(t) = E[exp(-c* W / t); M_e <= t]
    double c_star = ctx.cfg_f64("c_star", 0.0);
    if (c_star <= 0.0) {
      const std::size_t M = ctx.cfg_u64("c_star_samples", 100000);
      walk::WalkCaps c1caps;
      auto tails = mc_rows<MaxlRow>(M, ctx.replicas, [&](std::size_t i) {
        env::EnvTree tree(&law, mix64(mix64(ctx.seed, tag + 5), i));
        RngStream rng(ctx.seed, tag + 6, i);
        auto st = walk::run_excursions(tree, 1, c1caps, rng);
        return MaxlRow{st.steps, st.max_beta(), st.nodes_touched, st.censored};
      });
      std::vector<double> m1;
      std::vector<std::uint8_t> c1;
      for (const auto& r : tails) {
        m1.push_back(static_cast<double>(r.max_lt));
        c1.push_back(r.censored ? 1 : 0);
      }
      std::vector<double> s1(m1);
      std::sort(s1.begin(), s1.end());
      auto grid = tail_grid(s1, 0.95, 100, 20);
      auto curve = stats::survival_curve(m1, c1, grid);
      c_star = stats::fixed_slope_intercept(curve, -1.0, grid.front(), grid.back(), 100);
    }
    summary["c_star"] = c_star;
    auto F = [&](double t) {
      if (!(t > 0.0)) return 0.0;
      double acc = 0.0;
      for (std::size_t i = 0; i < mes_ref.size(); ++i)
        if (mes_ref[i] <= t) acc += std::exp(-c_star * w_ref[i] / t);
      return acc / static_cast<double>(mes_ref.size());
    };
    summary["ks_maxln_vs_limit_fit"] = stats::ks_distance(ratios, F);
  }
  write_summary(ctx, "maxln-converge", summary);

  if (!ctx.plot_path.empty()) {
    auto grid = log_grid(std::max(1e-3, sorted_me.front()), sorted_me.back() * 1.5, 24);
    auto c1 = stats::survival_curve(ratios, grid);
    auto c2 = stats::survival_curve(mes_ref, grid);
    PlotSeries s1{"max L / n", {}}, s2{"M_e", {}};
    for (auto& p : c1) s1.points.emplace_back(p.x, p.survival);
    for (auto& p : c2) s2.points.emplace_back(p.x, p.survival);
    emit_plot(ctx.plot_path, "max L over n vs M_e", {s1, s2}, {});
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// nbm-check
// ---------------------------------------------------------------------------

int run_nbm_check(const Ctx& ctx) {
  const std::size_t N = ctx.n_samples(200000);
  std::vector<std::vector<double>> stars{{1.0}, {0.6, 0.4}, {1.25}};
  std::vector<double> alphas{1.0, 2.0, 3.0, 4.0};
  std::vector<std::vector<std::string>> table;
  double c2_fitted = 0.0;
  bool variance_ok = true;
  int row_id = 0;
  for (std::size_t si = 0; si < stars.size(); ++si) {
    for (double alpha : alphas) {
      for (std::uint32_t n : {1u, 4u}) {
        RngStream rng(ctx.seed, 0x6e626d, static_cast<std::uint64_t>(row_id));
        std::vector<double> z(stars[si].size(), 1.0);
        auto rep = ltgw::nbm_moment_probe(stars[si], z, n, alpha, N, rng);
        c2_fitted = std::max(c2_fitted, rep.ratio);
        if (alpha == 2.0 && stars[si].size() == 1) {
          double a = stars[si][0];
          double exact = n * (a + a * a);
          if (std::fabs(rep.lhs - exact) > 4.0 * rep.lhs_se + 1e-9) variance_ok = false;
        }
        table.push_back({csv::fmt(static_cast<std::uint64_t>(row_id++)),
                         std::to_string(si), csv::fmt(alpha),
                         csv::fmt(static_cast<std::uint64_t>(n)), csv::fmt(rep.lhs),
                         csv::fmt(rep.lhs_se), csv::fmt(rep.bracket),
                         csv::fmt(rep.ratio)});
      }
    }
  }
  // random parameter battery
  RngStream prng(ctx.seed, 0x6e626d32);
  bool all_finite = true;
  for (int t = 0; t < 20; ++t) {
    std::vector<double> w(3), z(3);
    for (int j = 0; j < 3; ++j) {
      w[static_cast<std::size_t>(j)] = 0.1 + prng.u01();
      z[static_cast<std::size_t>(j)] = prng.u01() * 2.0;
    }
    double alpha = 1.0 + 3.0 * prng.u01();
    auto n = static_cast<std::uint32_t>(1 + prng.below(6));
    RngStream rng(ctx.seed, 0x6e626d33, static_cast<std::uint64_t>(t));
    auto rep = ltgw::nbm_moment_probe(w, z, n, alpha, N / 10, rng);
    if (!std::isfinite(rep.ratio)) all_finite = false;
    c2_fitted = std::max(c2_fitted, rep.ratio);
    table.push_back({csv::fmt(static_cast<std::uint64_t>(row_id++)), "random",
                     csv::fmt(alpha), csv::fmt(static_cast<std::uint64_t>(n)),
                     csv::fmt(rep.lhs), csv::fmt(rep.lhs_se), csv::fmt(rep.bracket),
                     csv::fmt(rep.ratio)});
  }
  write_table(ctx, "nbm_probes",
              "centered-moment probe: lhs = E|sum z zeta - n sum A z|^alpha vs the bound "
              "bracket; ratio = lhs/bracket",
              {"row", "star", "alpha", "n", "lhs", "lhs_se", "bracket", "ratio"}, table);
  json summary;
  summary["c2_fitted"] = c2_fitted;
  summary["variance_identity_ok"] = variance_ok;
  summary["all_ratios_finite"] = all_finite;
  write_summary(ctx, "nbm-check", summary);
  if (!variance_ok || !all_finite) {
    std::cerr << "error: nbm-check: moment identity violated\n";
    return kExitAssertion;
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// tree-equivalence
// ---------------------------------------------------------------------------

int run_tree_equivalence(const Ctx& ctx) {
  auto law = load_law(ctx);
  const std::size_t N = ctx.n_samples(100000);
  walk::WalkCaps wcaps;
  ltgw::TreeCaps tcaps;
  const std::uint64_t tag = 0x74726565;
  struct Cell {
    int children = 0;
    std::uint64_t z1 = 0;
    bool censored = false;
  };
  auto walk_rows = mc_rows<Cell>(N, ctx.replicas, [&](std::size_t i) {
    env::EnvTree tree(&law, mix64(mix64(ctx.seed, tag), i));
    RngStream rng(ctx.seed, tag + 1, i);
    walk::WalkTrace trace;
    auto st = walk::run_excursions(tree, 1, wcaps, rng, &trace);
    if (st.censored) return Cell{0, 0, true};
    auto bt = walk::local_time_tree(tree, trace);
    return Cell{bt.root_child_count(), bt.z_at(1), false};
  });
  auto gw_rows = mc_rows<Cell>(N, ctx.replicas, [&](std::size_t i) {
    RngStream rng(ctx.seed, tag + 2, i);
    auto t = ltgw::sample_tree(1, law, tcaps, rng);
    if (t.censored) return Cell{0, 0, true};
    return Cell{t.root_child_count(), t.z_at(1), false};
  });
  std::size_t max_children = 0;
  for (const auto& c : walk_rows)
    max_children = std::max(max_children, static_cast<std::size_t>(c.children));
  for (const auto& c : gw_rows)
    max_children = std::max(max_children, static_cast<std::size_t>(c.children));
  const std::size_t zcap = 64;
  std::vector<double> ca((max_children + 1) * (zcap + 1), 0.0), cb(ca.size(), 0.0);
  std::size_t cens_a = 0, cens_b = 0;
  for (const auto& c : walk_rows) {
    if (c.censored) {
      ++cens_a;
      continue;
    }
    ca[static_cast<std::size_t>(c.children) * (zcap + 1) +
       std::min<std::uint64_t>(c.z1, zcap)] += 1.0;
  }
  for (const auto& c : gw_rows) {
    if (c.censored) {
      ++cens_b;
      continue;
    }
    cb[static_cast<std::size_t>(c.children) * (zcap + 1) +
       std::min<std::uint64_t>(c.z1, zcap)] += 1.0;
  }
  auto r = stats::chi_square_two_sample(ca, cb);
  std::vector<std::vector<std::string>> table;
  table.push_back({"walk_vs_gw_joint_children_z1", csv::fmt(r.value),
                   csv::fmt(static_cast<std::uint64_t>(r.df)), csv::fmt(r.p_value)});
  write_table(ctx, "equivalence", "two-sample chi-square on the joint (children, Z1) law",
              {"test", "chi2", "df", "p_value"}, table);
  json summary;
  summary["chi2"] = r.value;
  summary["df"] = r.df;
  summary["p_value"] = r.p_value;
  summary["censored_walk"] = cens_a;
  summary["censored_gw"] = cens_b;
  write_summary(ctx, "tree-equivalence", summary);
  if (r.p_value <= 0.001) {
    std::cerr << "error: tree-equivalence: joint law mismatch (p=" << r.p_value << ")\n";
    return kExitAssertion;
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// spine-check
// ---------------------------------------------------------------------------

int run_spine_check(const Ctx& ctx) {
  auto law = load_law(ctx);
  auto kr = law.solve_kappa();
  spine::PijTable table(&law);
  json summary;
  bool ok = true;

  // (a) row stochasticity
  double worst_gap = 0.0;
  for (std::uint32_t i = 1; i <= 10; ++i) {
    const auto& row = table.row(i);
    worst_gap = std::max(worst_gap, std::fabs(row.sum - 1.0));
  }
  summary["worst_row_gap"] = worst_gap;
  if (worst_gap > 1e-6) ok = false;

  // (b) killed-walk transitions from state 1
  const std::size_t N = ctx.n_samples(100000);
  const std::uint64_t tag = 0x7370696e;
  spine::KilledWalkCaps kcaps;
  kcaps.max_steps = ctx.cfg_u64("max_steps", 100'000'000);
  struct Obs {
    std::uint32_t b1 = 0;
    bool censored = false;
  };
  auto obs = mc_rows<Obs>(N, ctx.replicas, [&](std::size_t i) {
    auto senv = spine::sample_qstar_env(law, 1, mix64(mix64(ctx.seed, tag), i));
    RngStream rng(ctx.seed, tag + 1, i);
    auto sbt = spine::killed_walk_beta(senv, kcaps, rng);
    if (sbt.censored) return Obs{0, true};
    return Obs{sbt.spine_types[1], false};
  });
  const auto& row1 = table.row(1);
  std::size_t jcap = std::min<std::size_t>(row1.p.size(), 64);
  std::vector<double> counts(jcap, 0.0), expected(jcap, 0.0);
  std::size_t censored = 0;
  for (const auto& o : obs) {
    if (o.censored) {
      ++censored;
      continue;
    }
    counts[std::min<std::size_t>(o.b1, jcap) - 1] += 1.0;
  }
  for (std::size_t j = 1; j < jcap; ++j) expected[j - 1] = row1.p[j - 1];
  for (std::size_t j = jcap; j <= row1.p.size(); ++j) expected[jcap - 1] += row1.p[j - 1];
  auto gof = stats::chi_square_gof(counts, expected, 5.0);
  summary["killed_walk_transition"] = {{"chi2", gof.value},
                                       {"df", gof.df},
                                       {"p_value", gof.p_value},
                                       {"censored", censored}};
  if (gof.p_value <= 0.001) ok = false;

  // (c) q* spine displacement law vs the unit tilt
  auto tilted = rw1d::tilt(law, 1.0);
  const std::size_t M = std::min<std::size_t>(N, 60000);
  auto quant = [](double x) { return std::round(x * 1e9) / 1e9; };
  auto qincr = mc_rows<double>(M, ctx.replicas, [&](std::size_t i) {
    auto senv = spine::sample_qstar_env(law, 1, mix64(mix64(ctx.seed, tag + 2), i));
    return quant(senv.tree.node(senv.spine[1]).V);
  });
  std::vector<double> tincr;
  RngStream trng(ctx.seed, tag + 3);
  for (std::size_t i = 0; i < M; ++i) tincr.push_back(quant(tilted.draw(trng)));
  auto ks = stats::ks_two_sample(qincr, tincr);
  summary["qstar_displacement_ks"] = {{"d", ks.value}, {"p", ks.p_value}};
  if (ks.p_value <= 0.001) ok = false;

  // (d) K_A table from the exact spine chain
  std::vector<std::uint32_t> As{4, 8, 16, 32};
  if (ctx.config.contains("A_list")) {
    As.clear();
    for (const auto& a : ctx.config["A_list"]) As.push_back(a.get<std::uint32_t>());
  }
  if (!kr.infinite) {
    const std::size_t C = ctx.cfg_u64("chain_samples", 400000);
    std::uint32_t a_max = *std::max_element(As.begin(), As.end());
    struct Ka {
      std::vector<double> num;
      std::vector<double> hits;
    };
    std::size_t reps = std::max<std::size_t>(1, ctx.replicas);
    auto partial = par::run_replicas<Ka>(reps, [&](std::size_t r) {
      spine::PijTable local(&law);
      Ka acc{std::vector<double>(As.size(), 0.0), std::vector<double>(As.size(), 0.0)};
      RngStream rng(ctx.seed, tag + 4, r);
      std::size_t lo = C * r / reps, hi = C * (r + 1) / reps;
      for (std::size_t s = lo; s < hi; ++s) {
        auto seq = spine::run_chain_to_stop(local, 1, a_max, 1000000, rng);
        for (std::size_t ai = 0; ai < As.size(); ++ai) {
          auto hit = spine::spine_hitting(seq, As[ai]);
          if (!hit.censored && hit.sigma_before_tau) {
            acc.num[ai] += std::pow(static_cast<double>(hit.beta_sigma), kr.value - 1.0);
            acc.hits[ai] += 1.0;
          }
        }
      }
      return acc;
    });
    std::vector<std::vector<std::string>> ka_rows;
    json ka_json = json::array();
    for (std::size_t ai = 0; ai < As.size(); ++ai) {
      double num = 0.0, hits = 0.0;
      for (const auto& p : partial) {
        num += p.num[ai];
        hits += p.hits[ai];
      }
      double k_hat = num / static_cast<double>(C);
      ka_rows.push_back({csv::fmt(static_cast<std::uint64_t>(As[ai])), csv::fmt(k_hat),
                         csv::fmt(hits / static_cast<double>(C))});
      ka_json.push_back(
          {{"A", As[ai]}, {"K_A", k_hat}, {"hit_freq", hits / static_cast<double>(C)}});
    }
    write_table(ctx, "k_a",
                "K_A = E[(beta-1)^{kappa-1}; sigma_A < tau_1] from spine chains",
                {"A", "K_A", "hit_freq"}, ka_rows);
    summary["K_A"] = ka_json;
  }

  write_summary(ctx, "spine-check", summary);
  if (!ok) {
    std::cerr << "error: spine-check: consistency assertion failed\n";
    return kExitAssertion;
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// pij-table
// ---------------------------------------------------------------------------

int run_pij_table(const Ctx& ctx) {
  auto law = load_law(ctx);
  spine::PijTable table(&law);
  auto i_max = static_cast<std::uint32_t>(ctx.cfg_u64("i_max", 10));
  std::vector<std::vector<std::string>> rows;
  for (std::uint32_t i = 1; i <= i_max; ++i) {
    const auto& row = table.row(i);
    for (std::size_t j = 1; j <= row.p.size(); ++j)
      rows.push_back({csv::fmt(static_cast<std::uint64_t>(i)),
                      csv::fmt(static_cast<std::uint64_t>(j)), csv::fmt(row.p[j - 1]),
                      csv::fmt(row.tail_bound)});
  }
  write_table(ctx, "pij",
              "spine type-chain transition probabilities; rows truncated once the "
              "geometric tail bound drops below 1e-9",
              {"i", "j", "p_ij", "row_tail_bound"}, rows);
  json summary;
  summary["i_max"] = i_max;
  write_summary(ctx, "pij-table", summary);
  return kExitOk;
}

// ---------------------------------------------------------------------------
// mto-check
// ---------------------------------------------------------------------------

struct BoxFunctional {
  std::string name;
  std::size_t n;
  rw1d::PathFunctional g;
};

std::vector<BoxFunctional> box_battery() {
  // box faces chosen away from the displacement-lattice combinations of the
  // reference laws
  std::vector<BoxFunctional> fs;
  fs.push_back({"const_1", 1, [](std::span<const double>) { return 1.0; }});
  fs.push_back({"min_gt_-0.1_n3", 3, [](std::span<const double> p) {
                  for (double v : p)
                    if (v <= -0.1) return 0.0;
                  return 1.0;
                }});
  fs.push_back({"band_n2", 2, [](std::span<const double> p) {
                  return (p[0] > 0.3 && p[1] < 1.7) ? 1.0 : 0.0;
                }});
  fs.push_back({"abs_lt_2.3_n5", 5, [](std::span<const double> p) {
                  for (double v : p)
                    if (std::fabs(v) >= 2.3) return 0.0;
                  return 1.0;
                }});
  fs.push_back({"end_in_band_n4", 4, [](std::span<const double> p) {
                  return (p.back() > 0.55 && p.back() < 2.15) ? 1.0 : 0.0;
                }});
  return fs;
}

int run_mto_check(const Ctx& ctx) {
  auto law = load_law(ctx);
  const std::size_t N = ctx.n_samples(1000000);
  auto battery = box_battery();
  std::vector<std::vector<std::string>> rows;
  double worst_z = 0.0;
  for (std::size_t bi = 0; bi < battery.size(); ++bi) {
    const auto& b = battery[bi];
    auto rep = rw1d::many_to_one_check(law, b.n, b.g, N, mix64(ctx.seed, bi));
    worst_z = std::max(worst_z, std::max(rep.z_many_to_one, rep.z_change_of_measure));
    rows.push_back({b.name, csv::fmt(static_cast<std::uint64_t>(b.n)),
                    csv::fmt(rep.env_mean), csv::fmt(rep.env_se), csv::fmt(rep.tilt_mean),
                    csv::fmt(rep.tilt_se), csv::fmt(rep.z_many_to_one),
                    csv::fmt(rep.s_mean), csv::fmt(rep.sk_mean),
                    csv::fmt(rep.z_change_of_measure)});
  }
  write_table(ctx, "mto",
              "both sides of the many-to-one identity and the S <-> S^(kappa) change of "
              "measure; z in combined standard errors",
              {"functional", "n", "env_mean", "env_se", "tilt_mean", "tilt_se", "z_mto",
               "s_mean", "sk_mean", "z_com"},
              rows);
  json summary;
  summary["worst_z"] = worst_z;
  write_summary(ctx, "mto-check", summary);
  if (worst_z > 4.0) {
    std::cerr << "error: mto-check: identity violated (z=" << worst_z << ")\n";
    return kExitAssertion;
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// ladder-report
// ---------------------------------------------------------------------------

int run_ladder_report(const Ctx& ctx) {
  auto law = load_law(ctx);
  auto kr = law.solve_kappa();
  if (kr.infinite) {
    std::cerr << "error: ladder-report: needs a finite kappa (negative-drift tilt)\n";
    return kExitConfig;
  }
  auto tilted = rw1d::tilt(law, kr.value);
  double glo = ctx.cfg_f64("grid_lo", 0.0);
  double ghi = ctx.cfg_f64("grid_hi", 10.0);
  auto gn = static_cast<std::size_t>(ctx.cfg_u64("grid_n", 21));
  std::vector<double> grid;
  for (std::size_t i = 0; i < gn; ++i)
    grid.push_back(glo + (ghi - glo) * static_cast<double>(i) / static_cast<double>(gn - 1));
  const std::size_t N = ctx.n_samples(40000);
  auto est = rw1d::ladder_renewal(tilted, grid, N, mix64(ctx.seed, 0x6c616464));
  std::vector<std::vector<std::string>> rows;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    rows.push_back({csv::fmt(grid[i]), csv::fmt(est.r_plus[i]), csv::fmt(est.r_plus_se[i]),
                    "strict_ascending"});
    rows.push_back({csv::fmt(grid[i]), csv::fmt(est.r_minus[i]),
                    csv::fmt(est.r_minus_se[i]), "strict_descending"});
    rows.push_back({csv::fmt(grid[i]), csv::fmt(est.u_w_plus[i]),
                    csv::fmt(est.u_w_plus_se[i]), "weak_ascending"});
  }
  write_table(ctx, "ladder", "renewal function estimates for the kappa-tilted walk",
              {"x", "estimate", "se", "kind"}, rows);
  json summary;
  summary["kappa"] = kr.value;
  summary["c_s_plus_estimate"] = est.r_plus.back();
  summary["c_s_plus_se"] = est.r_plus_se.back();
  write_summary(ctx, "ladder-report", summary);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Monte Carlo toolkit for randomly biased walks on branching random walk "
      "environments"};
  app.require_subcommand(1);

  Ctx ctx;
  app.add_option("--law", ctx.law_path, "law JSON file");
  app.add_option("--out", ctx.out_dir, "output directory");
  app.add_option("--config", ctx.config_path, "scenario config JSON");
  app.add_option("--seed", ctx.seed, "master seed");
  app.add_option("--replicas", ctx.replicas, "replica count for work splitting");
  app.add_option("--samples", ctx.samples, "sample count override");
  app.add_option("--format", ctx.format, "csv|json")->check(CLI::IsMember({"csv", "json"}));
  app.add_option("--plot", ctx.plot_path, "emit an SVG plot to this path");

  std::map<std::string, int (*)(const Ctx&)> scenarios{
      {"env-report", run_env_report},       {"tail-w-m", run_tail_w_m},
      {"tail-maxl", run_tail_maxl},         {"maxln-converge", run_maxln_converge},
      {"nbm-check", run_nbm_check},         {"tree-equivalence", run_tree_equivalence},
      {"spine-check", run_spine_check},     {"pij-table", run_pij_table},
      {"mto-check", run_mto_check},         {"ladder-report", run_ladder_report}};
  for (auto& [name, fn] : scenarios) {
    (void)fn;
    app.add_subcommand(name, name)->fallthrough();
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (!ctx.config_path.empty()) {
      std::ifstream in(ctx.config_path);
      if (!in) {
        std::cerr << "error: config: cannot open " << ctx.config_path << "\n";
        return kExitConfig;
      }
      try {
        in >> ctx.config;
      } catch (const std::exception& e) {
        std::cerr << "error: config: invalid JSON: " << e.what() << "\n";
        return kExitConfig;
      }
    }
    fs::create_directories(ctx.out_dir);
    for (auto& [name, fn] : scenarios)
      if (app.get_subcommand(name)->parsed()) return fn(ctx);
    return kExitConfig;
  } catch (const LawError& e) {
    std::cerr << "error: " << e.field << ": " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }
}
