#include "btw/rw1d.hpp"

#include <algorithm>
#include <cmath>

#include "btw/stats.hpp"

namespace btw::rw1d {

TiltedIncrementLaw tilt(const ReproductionLaw& law, double exponent) {
  double norm = law.psi(exponent);
  if (std::fabs(norm - 1.0) > 1e-9) throw NotNormalized(norm);
  TiltedIncrementLaw out;
  out.exponent = exponent;
  for (const auto& b : law.branches()) {
    for (std::size_t j = 0; j < b.weights.size(); ++j) {
      double p = b.prob * std::pow(b.weights[j], exponent) / norm;
      out.values.push_back(b.displacements[j]);
      out.probs.push_back(p);
      out.mean += p * b.displacements[j];
    }
  }
  double acc = 0.0;
  for (double p : out.probs) {
    acc += p;
    out.cdf.push_back(acc);
  }
  out.cdf.back() = 1.0;
  return out;
}

std::vector<double> sample_path(const TiltedIncrementLaw& law, std::size_t n,
                                RngStream& rng) {
  std::vector<double> path;
  path.reserve(n);
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    s += law.draw(rng);
    path.push_back(s);
  }
  return path;
}

namespace {

// sum of g over all depth-n ancestral paths of one environment realization
double env_path_sum(const ReproductionLaw& law, std::size_t n, const PathFunctional& g,
                    RngStream& rng, std::vector<double>& path) {
  if (path.size() == n) return g(path);
  const Branch& b = law.branches()[law.draw_branch(rng)];
  double base = path.empty() ? 0.0 : path.back();
  double sum = 0.0;
  for (double d : b.displacements) {
    path.push_back(base + d);
    sum += env_path_sum(law, n, g, rng, path);
    path.pop_back();
  }
  return sum;
}

}  // namespace

MtoReport many_to_one_check(const ReproductionLaw& law, std::size_t n,
                            const PathFunctional& g, std::size_t num_samples,
                            std::uint64_t seed) {
  TiltedIncrementLaw s1 = tilt(law, 1.0);
  KappaResult kr = law.solve_kappa();
  std::vector<double> env_vals, tilt_vals, s_vals, sk_vals;
  env_vals.reserve(num_samples);
  tilt_vals.reserve(num_samples);
  std::vector<double> path;
  path.reserve(n);
  RngStream env_rng(seed, 0x656e76);
  RngStream tilt_rng(seed, 0x74696c74);
  for (std::size_t i = 0; i < num_samples; ++i) {
    path.clear();
    env_vals.push_back(env_path_sum(law, n, g, env_rng, path));
    auto sp = sample_path(s1, n, tilt_rng);
    tilt_vals.push_back(std::exp(sp.back()) * g(sp));
    s_vals.push_back(g(sp));
  }
  MtoReport rep;
  auto e = stats::mean_se(env_vals);
  auto t = stats::mean_se(tilt_vals);
  rep.env_mean = e.mean;
  rep.env_se = e.se;
  rep.tilt_mean = t.mean;
  rep.tilt_se = t.se;
  double comb = std::sqrt(e.se * e.se + t.se * t.se);
  rep.z_many_to_one = comb > 0.0 ? std::fabs(e.mean - t.mean) / comb : 0.0;
  if (!kr.infinite) {
    TiltedIncrementLaw sk = tilt(law, kr.value);
    RngStream sk_rng(seed, 0x736b70);
    for (std::size_t i = 0; i < num_samples; ++i) {
      auto sp = sample_path(sk, n, sk_rng);
      sk_vals.push_back(std::exp((kr.value - 1.0) * sp.back()) * g(sp));
    }
    auto s = stats::mean_se(s_vals);
    auto k = stats::mean_se(sk_vals);
    rep.s_mean = s.mean;
    rep.s_se = s.se;
    rep.sk_mean = k.mean;
    rep.sk_se = k.se;
    double comb2 = std::sqrt(s.se * s.se + k.se * k.se);
    rep.z_change_of_measure = comb2 > 0.0 ? std::fabs(s.mean - k.mean) / comb2 : 0.0;
  }
  return rep;
}

LadderEstimate ladder_renewal(const TiltedIncrementLaw& tilted, std::span<const double> grid,
                              std::size_t num_samples, std::uint64_t seed,
                              std::size_t epoch_cap) {
  if (!(tilted.mean < 0.0))
    throw std::invalid_argument("ladder_renewal: needs the negative-drift tilt");
  LadderEstimate out;
  out.grid.assign(grid.begin(), grid.end());
  const std::size_t G = grid.size();
  std::vector<double> acc_p(G, 0.0), acc_p2(G, 0.0);
  std::vector<double> acc_m(G, 0.0), acc_m2(G, 0.0);
  std::vector<double> acc_w(G, 0.0), acc_w2(G, 0.0);
  const double x_max = *std::max_element(grid.begin(), grid.end());
  RngStream rng(seed, 0x6c616464);
  for (std::size_t s = 0; s < num_samples; ++s) {
    // pass 1: counts before the weak/strict descending stops
    std::vector<double> cnt_p(G, 0.0), cnt_w(G, 0.0);
    double S = 0.0;
    bool weak_stopped = false;
    std::size_t steps = 0;
    std::uint32_t first_descent = 0;
    while (true) {
      if (!weak_stopped)
        for (std::size_t gi = 0; gi < G; ++gi)
          if (S <= grid[gi]) cnt_p[gi] += 1.0;
      for (std::size_t gi = 0; gi < G; ++gi)
        if (S <= grid[gi]) cnt_w[gi] += 1.0;
      S += tilted.draw(rng);
      ++steps;
      if (steps > epoch_cap) throw EpochCapExceeded();
      if (!weak_stopped && S <= 0.0) weak_stopped = true;
      if (S < 0.0) {
        first_descent = static_cast<std::uint32_t>(steps);
        break;
      }
    }
    // pass 2: strict descending ladder heights until below -x_max
    std::vector<double> cnt_m(G, 0.0);
    double S2 = 0.0, run_min = 0.0;
    for (std::size_t gi = 0; gi < G; ++gi) cnt_m[gi] += 1.0;  // H_0 = 0
    steps = 0;
    while (run_min >= -x_max) {
      S2 += tilted.draw(rng);
      ++steps;
      if (steps > epoch_cap) throw EpochCapExceeded();
      if (S2 < run_min) {
        run_min = S2;
        for (std::size_t gi = 0; gi < G; ++gi)
          if (run_min >= -grid[gi]) cnt_m[gi] += 1.0;
      }
    }
    for (std::size_t gi = 0; gi < G; ++gi) {
      acc_p[gi] += cnt_p[gi];
      acc_p2[gi] += cnt_p[gi] * cnt_p[gi];
      acc_m[gi] += cnt_m[gi];
      acc_m2[gi] += cnt_m[gi] * cnt_m[gi];
      acc_w[gi] += cnt_w[gi];
      acc_w2[gi] += cnt_w[gi] * cnt_w[gi];
    }
    if (out.first_descent_epochs.size() < 10000)
      out.first_descent_epochs.push_back(first_descent);
  }
  const auto N = static_cast<double>(num_samples);
  auto finish = [N](std::vector<double>& mean, std::vector<double>& m2,
                    std::vector<double>& se_out) {
    se_out.resize(mean.size());
    for (std::size_t i = 0; i < mean.size(); ++i) {
      double m = mean[i] / N;
      double var = std::max(0.0, m2[i] / N - m * m);
      mean[i] = m;
      se_out[i] = std::sqrt(var / N);
    }
  };
  out.r_plus = std::move(acc_p);
  finish(out.r_plus, acc_p2, out.r_plus_se);
  out.r_minus = std::move(acc_m);
  finish(out.r_minus, acc_m2, out.r_minus_se);
  out.u_w_plus = std::move(acc_w);
  finish(out.u_w_plus, acc_w2, out.u_w_plus_se);
  return out;
}

}  // namespace btw::rw1d
