#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "btw/rng.hpp"

namespace btw {

using Rational = boost::multiprecision::cpp_rational;

struct LawError : std::runtime_error {
  std::string field;
  LawError(std::string f, const std::string& what)
      : std::runtime_error(what), field(std::move(f)) {}
};

// One atom of the reproduction point process: with probability `prob` the
// vertex begets children whose edge weights are A_j = e^{-dV_j}.
struct Branch {
  double prob = 0.0;
  std::vector<double> weights;        // A_j
  std::vector<double> displacements;  // -ln A_j
  double weight_sum = 0.0;            // sum_j A_j
};

struct KappaResult {
  double value = 0.0;  // root of psi(t)=1 on (1, t_max], when finite
  bool infinite = false;
  double lo = 0.0, hi = 0.0;  // final bisection bracket
  double residual = 0.0;      // |psi(value) - 1|
};

struct ConditionReport {
  bool supercritical = false;      // psi(0) > 1
  bool normalized = false;         // psi(1) = 1 within 1e-9
  bool negative_slope = false;     // psi'(1) < 0
  bool kappa_ok = false;           // finite root or verified infinite
  bool non_lattice = true;         // heuristic, warning only
  double psi0 = 0.0;
  double psi1 = 0.0;
  double psi1_prime = 0.0;
  KappaResult kappa;
  std::vector<std::string> messages;
  bool all_required() const {
    return supercritical && normalized && negative_slope && kappa_ok;
  }
};

class ReproductionLaw {
 public:
  static ReproductionLaw from_json_file(const std::string& path);
  static ReproductionLaw from_json_text(const std::string& text);
  // numeric construction (no exact rationals available)
  static ReproductionLaw from_branches(std::vector<Branch> branches);

  const std::vector<Branch>& branches() const { return branches_; }

  double psi(double t) const;
  double psi_prime(double t) const;

  // Exact rational psi(t) for integer t, available when the law was parsed
  // from decimal strings.
  bool exact_available() const { return !exact_probs_.empty(); }
  Rational psi_exact(unsigned t) const;

  KappaResult solve_kappa(double t_max = 64.0, double tol = 1e-12) const;
  ConditionReport validate() const;

  std::size_t draw_branch(RngStream& rng) const;        // by prob
  std::size_t draw_branch_qstar(RngStream& rng) const;  // by prob * weight_sum
  // spine child within a branch, chosen with probability A_j / sum A
  std::size_t draw_spine_child(std::size_t branch, RngStream& rng) const;

  double mean_offspring() const { return psi(0.0); }
  double max_weight() const;

 private:
  void finalize();

  std::vector<Branch> branches_;
  std::vector<double> branch_cdf_;
  std::vector<double> qstar_cdf_;
  std::vector<std::vector<double>> spine_cdf_;
  std::vector<Rational> exact_probs_;
  std::vector<std::vector<Rational>> exact_weights_;

  friend class LawBuilder;
};

// Parses a plain decimal string ("0.25", "-1.5e0" is rejected) to a rational.
std::optional<Rational> parse_decimal_rational(const std::string& s);

}  // namespace btw
