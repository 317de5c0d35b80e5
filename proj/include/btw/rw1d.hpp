#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

#include "btw/law.hpp"
#include "btw/rng.hpp"

namespace btw::rw1d {

struct NotNormalized : std::runtime_error {
  explicit NotNormalized(double psi_val)
      : std::runtime_error("tilt exponent t has |psi(t)-1| > 1e-9: psi=" +
                           std::to_string(psi_val)) {}
};

// Increment law of the tilted one-dimensional walk: atom -ln A with
// probability prob_b * A^exponent (exactly normalized when psi(exponent)=1).
struct TiltedIncrementLaw {
  std::vector<double> values;
  std::vector<double> probs;
  std::vector<double> cdf;
  double exponent = 1.0;
  double mean = 0.0;

  double draw(RngStream& rng) const {
    double u = rng.u01();
    std::size_t lo = 0, hi = cdf.size() - 1;
    while (lo < hi) {
      std::size_t mid = (lo + hi) / 2;
      if (cdf[mid] < u)
        lo = mid + 1;
      else
        hi = mid;
    }
    return values[lo];
  }
};

TiltedIncrementLaw tilt(const ReproductionLaw& law, double exponent);

// partial sums S_1..S_n
std::vector<double> sample_path(const TiltedIncrementLaw& law, std::size_t n,
                                RngStream& rng);

using PathFunctional = std::function<double(std::span<const double>)>;

struct MtoReport {
  double env_mean = 0.0, env_se = 0.0;      // E[sum_{|z|=n} g(V(z_1..z_n))]
  double tilt_mean = 0.0, tilt_se = 0.0;    // E[e^{S_n} g(S_1..S_n)]
  double s_mean = 0.0, s_se = 0.0;          // E[g(S_1..S_n)]
  double sk_mean = 0.0, sk_se = 0.0;        // E[e^{(kappa-1) S^k_n} g(S^k_1..S^k_n)]
  double z_many_to_one = 0.0;               // |env - tilt| in combined SEs
  double z_change_of_measure = 0.0;         // |s - sk| in combined SEs
};

// Monte Carlo of both sides of the many-to-one identity and of the S <->
// S^(kappa) change of measure, for a bounded path functional.
MtoReport many_to_one_check(const ReproductionLaw& law, std::size_t n,
                            const PathFunctional& g, std::size_t num_samples,
                            std::uint64_t seed);

struct EpochCapExceeded : std::runtime_error {
  EpochCapExceeded() : std::runtime_error("ladder simulation exceeded the epoch cap") {}
};

struct LadderEstimate {
  std::vector<double> grid;
  // strict ascending renewal function (counts before the weak descending stop)
  std::vector<double> r_plus, r_plus_se;
  // strict descending renewal function (ladder heights >= -x)
  std::vector<double> r_minus, r_minus_se;
  // weak ascending renewal measure (counts before the strict descending stop)
  std::vector<double> u_w_plus, u_w_plus_se;
  std::vector<std::uint32_t> first_descent_epochs;  // sample of hat-tau^- epochs
};

// Ladder-epoch simulation for the kappa-tilted (negative drift) walk.
LadderEstimate ladder_renewal(const TiltedIncrementLaw& tilted, std::span<const double> grid,
                              std::size_t num_samples, std::uint64_t seed,
                              std::size_t epoch_cap = 1'000'000);

}  // namespace btw::rw1d
