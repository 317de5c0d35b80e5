#include "btw/law.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace btw {

namespace {

double cdf_draw(const std::vector<double>& cdf, RngStream& rng) {
  double u = rng.u01();
  auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
  std::size_t idx = static_cast<std::size_t>(it - cdf.begin());
  if (idx >= cdf.size()) idx = cdf.size() - 1;
  return static_cast<double>(idx);
}

}  // namespace

std::optional<Rational> parse_decimal_rational(const std::string& s) {
  if (s.empty()) return std::nullopt;
  std::size_t i = 0;
  bool neg = false;
  if (s[i] == '+' || s[i] == '-') {
    neg = s[i] == '-';
    ++i;
  }
  boost::multiprecision::cpp_int num = 0;
  boost::multiprecision::cpp_int den = 1;
  bool any_digit = false, seen_dot = false;
  for (; i < s.size(); ++i) {
    char c = s[i];
    if (c == '.') {
      if (seen_dot) return std::nullopt;
      seen_dot = true;
      continue;
    }
    if (c < '0' || c > '9') return std::nullopt;
    num = num * 10 + (c - '0');
    if (seen_dot) den *= 10;
    any_digit = true;
  }
  if (!any_digit) return std::nullopt;
  Rational r(num, den);
  if (neg) r = -r;
  return r;
}

ReproductionLaw ReproductionLaw::from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw LawError("path", "cannot open law file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json_text(ss.str());
}

ReproductionLaw ReproductionLaw::from_json_text(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const std::exception& e) {
    throw LawError("json", std::string("law file is not valid JSON: ") + e.what());
  }
  if (!j.contains("branches") || !j["branches"].is_array() || j["branches"].empty())
    throw LawError("branches", "law needs a non-empty 'branches' array");

  ReproductionLaw law;
  bool exact_ok = true;
  std::vector<Rational> eprobs;
  std::vector<std::vector<Rational>> eweights;
  for (const auto& jb : j["branches"]) {
    Branch b;
    std::vector<Rational> ew;
    auto read_value = [&](const nlohmann::json& v, const char* field) -> double {
      if (v.is_string()) {
        auto r = parse_decimal_rational(v.get<std::string>());
        if (r) {
          if (field[0] == 'p')
            eprobs.push_back(*r);
          else
            ew.push_back(*r);
          return static_cast<double>(*r);
        }
        exact_ok = false;
        try {
          return std::stod(v.get<std::string>());
        } catch (...) {
          throw LawError(field, "unparsable numeric string in law file");
        }
      }
      if (v.is_number()) {
        exact_ok = false;
        return v.get<double>();
      }
      throw LawError(field, "expected number or decimal string");
    };
    if (!jb.contains("prob")) throw LawError("prob", "branch missing 'prob'");
    b.prob = read_value(jb["prob"], "prob");
    if (!jb.contains("weights") || !jb["weights"].is_array() || jb["weights"].empty())
      throw LawError("weights", "branch needs a non-empty 'weights' array");
    for (const auto& w : jb["weights"]) b.weights.push_back(read_value(w, "weights"));
    for (double w : b.weights) {
      if (!(w > 0.0)) throw LawError("weights", "weights must be positive");
      b.displacements.push_back(-std::log(w));
      b.weight_sum += w;
    }
    if (!(b.prob >= 0.0)) throw LawError("prob", "branch probabilities must be nonnegative");
    law.branches_.push_back(std::move(b));
    eweights.push_back(std::move(ew));
  }
  if (exact_ok && eprobs.size() == law.branches_.size()) {
    law.exact_probs_ = std::move(eprobs);
    law.exact_weights_ = std::move(eweights);
  }
  law.finalize();
  return law;
}

ReproductionLaw ReproductionLaw::from_branches(std::vector<Branch> branches) {
  ReproductionLaw law;
  for (auto& b : branches) {
    b.displacements.clear();
    b.weight_sum = 0.0;
    for (double w : b.weights) {
      if (!(w > 0.0)) throw LawError("weights", "weights must be positive");
      b.displacements.push_back(-std::log(w));
      b.weight_sum += w;
    }
    law.branches_.push_back(std::move(b));
  }
  law.finalize();
  return law;
}

void ReproductionLaw::finalize() {
  double psum = 0.0;
  for (const auto& b : branches_) psum += b.prob;
  if (std::fabs(psum - 1.0) > 1e-12)
    throw LawError("prob", "branch probabilities must sum to 1 within 1e-12");
  double acc = 0.0;
  for (const auto& b : branches_) {
    acc += b.prob;
    branch_cdf_.push_back(acc);
  }
  branch_cdf_.back() = 1.0;
  // Q* branch tilt: prob_b * W_b; psi(1)=1 makes this a probability vector
  double qacc = 0.0;
  for (const auto& b : branches_) qacc += b.prob * b.weight_sum;
  double qrun = 0.0;
  for (const auto& b : branches_) {
    qrun += b.prob * b.weight_sum / qacc;
    qstar_cdf_.push_back(qrun);
  }
  qstar_cdf_.back() = 1.0;
  for (const auto& b : branches_) {
    std::vector<double> cdf;
    double wrun = 0.0;
    for (double w : b.weights) {
      wrun += w / b.weight_sum;
      cdf.push_back(wrun);
    }
    cdf.back() = 1.0;
    spine_cdf_.push_back(std::move(cdf));
  }
}

double ReproductionLaw::psi(double t) const {
  double s = 0.0;
  for (const auto& b : branches_) {
    double bs = 0.0;
    for (double w : b.weights) bs += std::pow(w, t);
    s += b.prob * bs;
  }
  return s;
}

double ReproductionLaw::psi_prime(double t) const {
  // d/dt sum prob * A^t = sum prob * A^t ln A
  double s = 0.0;
  for (const auto& b : branches_) {
    double bs = 0.0;
    for (double w : b.weights) bs += std::pow(w, t) * std::log(w);
    s += b.prob * bs;
  }
  return s;
}

Rational ReproductionLaw::psi_exact(unsigned t) const {
  if (!exact_available()) throw LawError("exact", "law has no exact rational representation");
  Rational s = 0;
  for (std::size_t i = 0; i < branches_.size(); ++i) {
    Rational bs = 0;
    for (const auto& w : exact_weights_[i]) {
      Rational p = 1;
      for (unsigned k = 0; k < t; ++k) p *= w;
      bs += p;
    }
    s += exact_probs_[i] * bs;
  }
  return s;
}

KappaResult ReproductionLaw::solve_kappa(double t_max, double tol) const {
  KappaResult out;
  // probe grid right of 1: psi dips below 1 (psi'(1)<0), find re-crossing
  const int grid_n = 4096;
  double prev_t = 1.0;
  double lo = 0.0, hi = 0.0;
  bool bracketed = false;
  bool dipped = false;
  for (int i = 1; i <= grid_n; ++i) {
    double t = 1.0 + (t_max - 1.0) * static_cast<double>(i) / grid_n;
    double v = psi(t);
    if (v < 1.0) dipped = true;
    if (dipped && v >= 1.0) {
      lo = prev_t;
      hi = t;
      bracketed = true;
      break;
    }
    prev_t = t;
  }
  if (!bracketed) {
    if (!dipped && psi(t_max) > 1.0)
      throw LawError("kappa", "NO_ROOT_BRACKET: psi never dips below 1 on the probe grid");
    // psi stays < 1 up to t_max; declare infinite if still heading down or flat
    out.infinite = true;
    out.lo = 1.0;
    out.hi = t_max;
    out.residual = std::fabs(psi(t_max) - 1.0);
    return out;
  }
  while (hi - lo > tol) {
    double mid = 0.5 * (lo + hi);
    if (psi(mid) < 1.0)
      lo = mid;
    else
      hi = mid;
  }
  out.value = 0.5 * (lo + hi);
  out.lo = lo;
  out.hi = hi;
  out.residual = std::fabs(psi(out.value) - 1.0);
  return out;
}

ConditionReport ReproductionLaw::validate() const {
  ConditionReport r;
  r.psi0 = psi(0.0);
  r.psi1 = psi(1.0);
  r.psi1_prime = psi_prime(1.0);
  r.supercritical = r.psi0 > 1.0;
  r.normalized = std::fabs(r.psi1 - 1.0) <= 1e-9;
  r.negative_slope = r.psi1_prime < 0.0;
  if (!r.supercritical) r.messages.push_back("psi(0) <= 1: tree is not supercritical");
  if (!r.normalized) r.messages.push_back("psi(1) != 1: law is not normalized");
  if (!r.negative_slope) r.messages.push_back("psi'(1) >= 0: drift condition violated");
  try {
    r.kappa = solve_kappa();
    r.kappa_ok = r.kappa.infinite || (r.kappa.value > 1.0 && r.kappa.residual <= 1e-9);
  } catch (const LawError& e) {
    r.kappa_ok = false;
    r.messages.push_back(e.what());
  }
  // Non-lattice heuristic: two displacements whose ratio defeats small
  // rational approximations (denominator <= 1e6). Warning only.
  std::vector<double> disp;
  for (const auto& b : branches_)
    for (double d : b.displacements)
      if (std::fabs(d) > 1e-12) disp.push_back(d);
  bool found_irrational_pair = false;
  for (std::size_t i = 0; i < disp.size() && !found_irrational_pair; ++i) {
    for (std::size_t j = i + 1; j < disp.size() && !found_irrational_pair; ++j) {
      double ratio = disp[i] / disp[j];
      // continued-fraction check for a close rational with small denominator
      double x = std::fabs(ratio);
      double a = x;
      std::uint64_t p0 = 0, q0 = 1, p1 = 1, q1 = 0;
      bool rational_like = false;
      for (int it = 0; it < 40; ++it) {
        auto ai = static_cast<std::uint64_t>(std::floor(a));
        std::uint64_t p2 = ai * p1 + p0, q2 = ai * q1 + q0;
        if (q2 == 0 || q2 > 1000000) break;
        double approx = static_cast<double>(p2) / static_cast<double>(q2);
        if (std::fabs(approx - x) < 1e-12 * std::max(1.0, x)) {
          rational_like = true;
          break;
        }
        p0 = p1;
        q0 = q1;
        p1 = p2;
        q1 = q2;
        double frac = a - std::floor(a);
        if (frac < 1e-15) break;
        a = 1.0 / frac;
      }
      if (!rational_like) found_irrational_pair = true;
    }
  }
  r.non_lattice = found_irrational_pair;
  if (!found_irrational_pair)
    r.messages.push_back(
        "non-lattice heuristic: all displacement ratios look rational (warning only)");
  return r;
}

std::size_t ReproductionLaw::draw_branch(RngStream& rng) const {
  return static_cast<std::size_t>(cdf_draw(branch_cdf_, rng));
}

std::size_t ReproductionLaw::draw_branch_qstar(RngStream& rng) const {
  return static_cast<std::size_t>(cdf_draw(qstar_cdf_, rng));
}

std::size_t ReproductionLaw::draw_spine_child(std::size_t branch, RngStream& rng) const {
  return static_cast<std::size_t>(cdf_draw(spine_cdf_[branch], rng));
}

double ReproductionLaw::max_weight() const {
  double m = 0.0;
  for (const auto& b : branches_)
    for (double w : b.weights) m = std::max(m, w);
  return m;
}

}  // namespace btw
