#include "btw/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <boost/math/special_functions/gamma.hpp>

namespace btw::stats {

MeanSe mean_se(std::span<const double> xs) {
  MeanSe out;
  out.n = xs.size();
  if (xs.empty()) return out;
  double sum = std::accumulate(xs.begin(), xs.end(), 0.0);
  out.mean = sum / static_cast<double>(xs.size());
  if (xs.size() < 2) return out;
  double ss = 0.0;
  for (double x : xs) ss += (x - out.mean) * (x - out.mean);
  double var = ss / static_cast<double>(xs.size() - 1);
  out.se = std::sqrt(var / static_cast<double>(xs.size()));
  return out;
}

double gamma_q(double a, double x) {
  if (x <= 0.0) return 1.0;
  return boost::math::gamma_q(a, x);
}

double chi2_sf(double x, std::size_t df) {
  return gamma_q(static_cast<double>(df) / 2.0, x / 2.0);
}

double ks_p_value(double d, double n_eff) {
  if (d <= 0.0) return 1.0;
  double sn = std::sqrt(n_eff);
  double lambda = (sn + 0.12 + 0.11 / sn) * d;
  // two-sided Kolmogorov series
  double sum = 0.0;
  for (int k = 1; k <= 100; ++k) {
    double term = 2.0 * ((k % 2 == 1) ? 1.0 : -1.0) *
                  std::exp(-2.0 * k * k * lambda * lambda);
    sum += term;
    if (std::fabs(term) < 1e-12) break;
  }
  return std::clamp(sum, 0.0, 1.0);
}

TailEstimate hill(std::span<const double> samples, std::size_t k) {
  return hill(samples, std::span<const std::uint8_t>{}, k);
}

TailEstimate hill(std::span<const double> values, std::span<const std::uint8_t> censored,
                  std::size_t k) {
  std::vector<double> xs;
  xs.reserve(values.size());
  std::size_t n_cens = 0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!censored.empty() && censored[i]) {
      ++n_cens;
      continue;
    }
    xs.push_back(values[i]);
  }
  TailEstimate out;
  out.censored_fraction =
      values.empty() ? 0.0 : static_cast<double>(n_cens) / static_cast<double>(values.size());
  if (k == 0 || xs.size() < 10 * k) {
    out.flag = TailFlag::too_few_samples;
    throw StatsError("hill: need >= 10*k uncensored samples");
  }
  std::sort(xs.begin(), xs.end(), std::greater<>());
  double xk = xs[k];  // (k+1)-th largest, the threshold
  if (!(xk > 0.0) || xs[0] <= xk) {
    out.flag = TailFlag::too_few_samples;
    throw StatsError("hill: too few distinct positive order statistics");
  }
  double s = 0.0;
  std::size_t distinct = 0;
  for (std::size_t i = 0; i < k; ++i) {
    s += std::log(xs[i] / xk);
    if (xs[i] > xk) ++distinct;
  }
  if (distinct == 0 || s <= 0.0) {
    out.flag = TailFlag::too_few_samples;
    throw StatsError("hill: degenerate top order statistics");
  }
  out.alpha = static_cast<double>(k) / s;
  out.se = out.alpha / std::sqrt(static_cast<double>(k));
  out.k_order = k;
  out.fit_lo = xk;
  out.fit_hi = xs[0];
  // survival constant implied at the threshold: S(xk) = k/n
  out.c_hat = (static_cast<double>(k) / static_cast<double>(xs.size())) *
              std::pow(xk, out.alpha);
  return out;
}

TailEstimate hill_auto(std::span<const double> samples) {
  const std::size_t n = samples.size();
  if (n < 100) throw StatsError("hill_auto: too few samples");
  const std::size_t k_lo = static_cast<std::size_t>(std::pow(static_cast<double>(n), 0.5));
  const std::size_t k_hi =
      std::min(n / 10, static_cast<std::size_t>(std::pow(static_cast<double>(n), 0.8)));
  const std::size_t k_def = std::min(n / 10, static_cast<std::size_t>(
                                                 std::pow(static_cast<double>(n), 2.0 / 3.0)));
  const int n_scan = 17;
  std::vector<std::size_t> ks;
  std::vector<double> alphas;
  for (int i = 0; i < n_scan; ++i) {
    double f = static_cast<double>(i) / (n_scan - 1);
    auto k = static_cast<std::size_t>(
        std::round(std::exp(std::log(static_cast<double>(k_lo)) +
                            f * (std::log(static_cast<double>(k_hi)) -
                                 std::log(static_cast<double>(k_lo))))));
    k = std::max<std::size_t>(k, 5);
    if (!ks.empty() && k <= ks.back()) continue;
    ks.push_back(k);
    alphas.push_back(hill(samples, k).alpha);
  }
  // most stable window: 5 consecutive scan points with minimal relative range
  std::size_t best = 0;
  double best_spread = std::numeric_limits<double>::infinity();
  const std::size_t w = std::min<std::size_t>(5, alphas.size());
  for (std::size_t i = 0; i + w <= alphas.size(); ++i) {
    auto [mn, mx] = std::minmax_element(alphas.begin() + i, alphas.begin() + i + w);
    double spread = (*mx - *mn) / std::max(1e-12, *mn);
    if (spread < best_spread) {
      best_spread = spread;
      best = i;
    }
  }
  std::size_t k_star = ks[best + w / 2];
  TailEstimate out = hill(samples, k_star);
  // drift check: monotone trend across the scan dominating the noise level
  double lo = alphas.front(), hi = alphas.back();
  double rel_change = std::fabs(hi - lo) / std::max(1e-12, std::min(lo, hi));
  std::size_t n_incr = 0;
  for (std::size_t i = 1; i < alphas.size(); ++i)
    if (alphas[i] > alphas[i - 1]) ++n_incr;
  double frac_incr = static_cast<double>(n_incr) / static_cast<double>(alphas.size() - 1);
  if (rel_change > 0.6 && (frac_incr > 0.85 || frac_incr < 0.15) && best_spread > 0.08)
    out.flag = TailFlag::no_plateau;
  (void)k_def;
  return out;
}

TailEstimate hill_scan_average(std::span<const double> samples) {
  const std::size_t n = samples.size();
  if (n < 100) throw StatsError("hill_scan_average: too few samples");
  const double k_lo = std::pow(static_cast<double>(n), 0.5);
  const double k_hi =
      std::min(static_cast<double>(n) / 10.0, std::pow(static_cast<double>(n), 0.8));
  const int n_scan = 33;
  double sum = 0.0, sum_se = 0.0;
  std::size_t k_mid = 0;
  int cnt = 0;
  std::size_t prev_k = 0;
  for (int i = 0; i < n_scan; ++i) {
    double f = static_cast<double>(i) / (n_scan - 1);
    auto k = static_cast<std::size_t>(
        std::round(std::exp(std::log(k_lo) + f * (std::log(k_hi) - std::log(k_lo)))));
    k = std::max<std::size_t>(k, 5);
    if (k == prev_k) continue;
    prev_k = k;
    auto est = hill(samples, k);
    sum += est.alpha;
    sum_se += est.se;
    if (i == n_scan / 2) k_mid = k;
    ++cnt;
  }
  TailEstimate out = hill(samples, k_mid ? k_mid : prev_k);
  out.alpha = sum / cnt;
  out.se = sum_se / cnt;  // conservative: scan points are strongly dependent
  return out;
}

std::vector<SurvivalPoint> survival_curve(std::span<const double> values,
                                          std::span<const double> grid) {
  return survival_curve(values, std::span<const std::uint8_t>{}, grid);
}

std::vector<SurvivalPoint> survival_curve(std::span<const double> values,
                                          std::span<const std::uint8_t> censored,
                                          std::span<const double> grid) {
  if (values.empty()) throw StatsError("survival_curve: empty sample");
  struct Obs {
    double x;
    bool cens;
  };
  std::vector<Obs> obs(values.size());
  for (std::size_t i = 0; i < values.size(); ++i)
    obs[i] = {values[i], !censored.empty() && censored[i] != 0};
  std::sort(obs.begin(), obs.end(), [](const Obs& a, const Obs& b) {
    if (a.x != b.x) return a.x < b.x;
    return a.cens < b.cens;  // deaths before censorings at ties
  });
  // Kaplan-Meier: S(x) = prod_{t_i <= x, death} (1 - d_i / n_i)
  std::vector<SurvivalPoint> out;
  out.reserve(grid.size());
  std::size_t i = 0;
  std::size_t at_risk = obs.size();
  double s = 1.0;
  for (double g : grid) {
    while (i < obs.size() && obs[i].x <= g) {
      // process all observations at the same value together
      double x = obs[i].x;
      std::size_t deaths = 0, cens = 0;
      std::size_t j = i;
      while (j < obs.size() && obs[j].x == x) {
        if (obs[j].cens)
          ++cens;
        else
          ++deaths;
        ++j;
      }
      if (deaths > 0 && at_risk > 0)
        s *= 1.0 - static_cast<double>(deaths) / static_cast<double>(at_risk);
      at_risk -= deaths + cens;
      i = j;
    }
    std::size_t exceed = obs.size() - i;
    out.push_back({g, s, exceed});
  }
  return out;
}

LinFit loglog_fit(std::span<const SurvivalPoint> points, double lo, double hi,
                  std::size_t min_exceed) {
  std::vector<double> xs, ys;
  for (const auto& p : points) {
    if (p.x < lo || p.x > hi) continue;
    if (p.exceed < min_exceed) continue;
    if (!(p.x > 0.0) || !(p.survival > 0.0)) continue;
    xs.push_back(std::log(p.x));
    ys.push_back(std::log(p.survival));
  }
  if (xs.size() < 5) throw StatsError("loglog_fit: empty or underpopulated fit range");
  double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / xs.size();
  double my = std::accumulate(ys.begin(), ys.end(), 0.0) / ys.size();
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  if (sxx <= 0.0) throw StatsError("loglog_fit: degenerate x range");
  LinFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.r2 = (syy > 0.0) ? (sxy * sxy) / (sxx * syy) : 1.0;
  fit.n_points = xs.size();
  return fit;
}

double fixed_slope_intercept(std::span<const SurvivalPoint> points, double slope,
                             double lo, double hi, std::size_t min_exceed) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& p : points) {
    if (p.x < lo || p.x > hi || p.exceed < min_exceed) continue;
    if (!(p.x > 0.0) || !(p.survival > 0.0)) continue;
    sum += std::log(p.survival) - slope * std::log(p.x);
    ++n;
  }
  if (n == 0) throw StatsError("fixed_slope_intercept: empty fit range");
  return std::exp(sum / static_cast<double>(n));
}

TwoSampleResult ks_two_sample(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw StatsError("ks_two_sample: empty input");
  std::vector<double> sa(a.begin(), a.end()), sb(b.begin(), b.end());
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  double d = 0.0;
  std::size_t i = 0, j = 0;
  const double na = static_cast<double>(sa.size()), nb = static_cast<double>(sb.size());
  while (i < sa.size() && j < sb.size()) {
    double x = std::min(sa[i], sb[j]);
    while (i < sa.size() && sa[i] <= x) ++i;
    while (j < sb.size() && sb[j] <= x) ++j;
    d = std::max(d, std::fabs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  TwoSampleResult r;
  r.kind = "ks";
  r.value = d;
  r.n1 = sa.size();
  r.n2 = sb.size();
  r.p_value = ks_p_value(d, na * nb / (na + nb));
  return r;
}

double ks_distance(std::span<const double> sample, const std::function<double(double)>& cdf) {
  if (sample.empty()) throw StatsError("ks_distance: empty sample");
  std::vector<double> s(sample.begin(), sample.end());
  std::sort(s.begin(), s.end());
  const double n = static_cast<double>(s.size());
  double d = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    double f = cdf(s[i]);
    d = std::max(d, std::fabs(static_cast<double>(i + 1) / n - f));
    d = std::max(d, std::fabs(f - static_cast<double>(i) / n));
  }
  return d;
}

TwoSampleResult chi_square_gof(std::span<const double> observed,
                               std::span<const double> expected,
                               double min_expected) {
  if (observed.empty() || observed.size() != expected.size())
    throw StatsError("chi_square_gof: size mismatch or empty input");
  double n_obs = std::accumulate(observed.begin(), observed.end(), 0.0);
  double n_exp = std::accumulate(expected.begin(), expected.end(), 0.0);
  if (n_obs <= 0.0 || n_exp <= 0.0) throw StatsError("chi_square_gof: zero totals");
  double scale = n_obs / n_exp;
  std::vector<double> po, pe;
  double acc_o = 0.0, acc_e = 0.0;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    acc_o += observed[i];
    acc_e += expected[i] * scale;
    if (acc_e >= std::max(min_expected, 1e-300)) {
      po.push_back(acc_o);
      pe.push_back(acc_e);
      acc_o = acc_e = 0.0;
    }
  }
  if (acc_e > 0.0 || acc_o > 0.0) {
    if (!po.empty()) {
      po.back() += acc_o;
      pe.back() += acc_e;
    } else {
      po.push_back(acc_o);
      pe.push_back(std::max(acc_e, 1e-300));
    }
  }
  double chi2 = 0.0;
  for (std::size_t i = 0; i < po.size(); ++i)
    chi2 += (po[i] - pe[i]) * (po[i] - pe[i]) / pe[i];
  TwoSampleResult r;
  r.kind = "chi2";
  r.value = chi2;
  r.n1 = static_cast<std::size_t>(n_obs);
  r.n2 = static_cast<std::size_t>(n_exp);
  r.df = po.size() > 1 ? po.size() - 1 : 1;
  r.p_value = chi2_sf(chi2, r.df);
  return r;
}

TwoSampleResult chi_square_two_sample(std::span<const double> counts_a,
                                      std::span<const double> counts_b,
                                      double min_expected) {
  if (counts_a.size() != counts_b.size() || counts_a.empty())
    throw StatsError("chi_square_two_sample: size mismatch or empty input");
  double na = std::accumulate(counts_a.begin(), counts_a.end(), 0.0);
  double nb = std::accumulate(counts_b.begin(), counts_b.end(), 0.0);
  if (na <= 0.0 || nb <= 0.0) throw StatsError("chi_square_two_sample: zero totals");
  // pool sparse cells so every pooled expected count is >= min_expected
  std::vector<double> pa, pb;
  double acc_a = 0.0, acc_b = 0.0;
  const double tot = na + nb;
  for (std::size_t i = 0; i < counts_a.size(); ++i) {
    acc_a += counts_a[i];
    acc_b += counts_b[i];
    double pooled = acc_a + acc_b;
    if (pooled * na / tot >= min_expected && pooled * nb / tot >= min_expected) {
      pa.push_back(acc_a);
      pb.push_back(acc_b);
      acc_a = acc_b = 0.0;
    }
  }
  if (acc_a + acc_b > 0.0) {
    if (!pa.empty()) {
      pa.back() += acc_a;
      pb.back() += acc_b;
    } else {
      pa.push_back(acc_a);
      pb.push_back(acc_b);
    }
  }
  TwoSampleResult r;
  r.kind = "chi2";
  r.n1 = static_cast<std::size_t>(na);
  r.n2 = static_cast<std::size_t>(nb);
  if (pa.size() < 2) {
    r.value = 0.0;
    r.df = 1;
    r.p_value = 1.0;
    return r;
  }
  double chi2 = 0.0;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    double pooled = pa[i] + pb[i];
    double ea = pooled * na / tot;
    double eb = pooled * nb / tot;
    chi2 += (pa[i] - ea) * (pa[i] - ea) / ea;
    chi2 += (pb[i] - eb) * (pb[i] - eb) / eb;
  }
  r.value = chi2;
  r.df = pa.size() - 1;
  r.p_value = chi2_sf(chi2, r.df);
  return r;
}

}  // namespace btw::stats
