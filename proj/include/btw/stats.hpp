#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace btw::stats {

struct StatsError : std::runtime_error {
  explicit StatsError(const std::string& what) : std::runtime_error(what) {}
};

enum class TailFlag { ok, no_plateau, too_few_samples };

// Tail-index estimate from top order statistics. `c_hat` is the survival
// constant implied by the fit range (S(x) ~ c x^-alpha), `censored_fraction`
// the share of the input that was right-censored and excluded from the order
// statistics.
struct TailEstimate {
  double alpha = 0.0;
  double se = 0.0;
  double c_hat = 0.0;
  std::size_t k_order = 0;
  double censored_fraction = 0.0;
  double fit_lo = 0.0;
  double fit_hi = 0.0;
  TailFlag flag = TailFlag::ok;
};

struct TwoSampleResult {
  std::string kind;  // "ks" | "chi2"
  double value = 0.0;
  double p_value = 1.0;
  std::size_t n1 = 0;
  std::size_t n2 = 0;
  std::size_t df = 0;
};

struct LinFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
  std::size_t n_points = 0;
};

struct SurvivalPoint {
  double x = 0.0;
  double survival = 1.0;
  std::size_t exceed = 0;  // uncensored+censored samples known to be >= x
};

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
  std::size_t n = 0;
};

MeanSe mean_se(std::span<const double> xs);

// Regularized upper incomplete gamma Q(a, x); chi-square upper tail is
// Q(df/2, x/2).
double gamma_q(double a, double x);
double chi2_sf(double x, std::size_t df);
// Kolmogorov survival function with finite-sample correction (two-sided).
double ks_p_value(double d, double n_eff);

// Hill estimator on the top `k` order statistics of the uncensored samples.
// Censored values must be excluded by the caller or passed via the censored
// overload below.
TailEstimate hill(std::span<const double> samples, std::size_t k);
TailEstimate hill(std::span<const double> values, std::span<const std::uint8_t> censored,
                  std::size_t k);
// Plateau scan over k in [n^(1/2), n^(4/5)], default pick k = floor(n^(2/3));
// flags no_plateau when the scan trends instead of stabilizing.
TailEstimate hill_auto(std::span<const double> samples);
// Averaged Hill over the same k-scan. Samples with atoms (lattice-like
// staircases in the survival function) make alpha-hat(k) oscillate
// deterministically; averaging over the bandwidth range cancels the
// oscillation to first order.
TailEstimate hill_scan_average(std::span<const double> samples);

// Least squares on (ln x, ln s) for survival points with x in [lo, hi],
// requiring >= 5 grid points with >= `min_exceed` exceedances each.
LinFit loglog_fit(std::span<const SurvivalPoint> points, double lo, double hi,
                  std::size_t min_exceed = 100);

// Survival constant c in S(x) ~ c x^{slope} with the slope held fixed:
// exp(mean of ln s - slope ln x) over the admissible fit points.
double fixed_slope_intercept(std::span<const SurvivalPoint> points, double slope,
                             double lo, double hi, std::size_t min_exceed = 100);

// Kaplan-Meier survival estimate evaluated on `grid` (non-increasing,
// right-continuous). Censored samples enter as right-censored lower bounds.
std::vector<SurvivalPoint> survival_curve(std::span<const double> values,
                                          std::span<const std::uint8_t> censored,
                                          std::span<const double> grid);
std::vector<SurvivalPoint> survival_curve(std::span<const double> values,
                                          std::span<const double> grid);

TwoSampleResult ks_two_sample(std::span<const double> a, std::span<const double> b);
// One-sample KS distance against a cdf (no p-value; used for convergence-in-law
// distances with an estimated limit law).
double ks_distance(std::span<const double> sample, const std::function<double(double)>& cdf);

// Pearson goodness of fit of observed counts against expected counts
// (expected need not be normalized; it is scaled to the observed total).
// When min_expected > 0, adjacent cells are pooled until every pooled
// expected count reaches it.
TwoSampleResult chi_square_gof(std::span<const double> observed,
                               std::span<const double> expected,
                               double min_expected = 0.0);
// Two-sample homogeneity chi-square on aligned count vectors; cells with
// pooled expected count below `min_expected` are merged into the last cell.
TwoSampleResult chi_square_two_sample(std::span<const double> counts_a,
                                      std::span<const double> counts_b,
                                      double min_expected = 5.0);

}  // namespace btw::stats
