#pragma once

// Reservoir pole distributions on (-alpha0, alpha0): the uniform prior, the
// optimal density proportional to 1 / (1 - beta^2), and its reweighting by a
// non-uniform prior on the target pole.

#include "lesn/lti.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <vector>

namespace lesn {

/// Per-sample iteration cap of the rejection samplers.
inline constexpr long kRejectionCap = 1'000'000;

using Rng = std::mt19937_64;

/// Stateless 64-bit mixer (splitmix64 finaliser).
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Seed of the random stream owned by one (trial, purpose) pair. Independent
/// of evaluation order, so trials can be scheduled freely.
constexpr std::uint64_t substream_seed(std::uint64_t base_seed, std::uint64_t trial,
                                       std::uint64_t purpose) {
  return mix64(mix64(mix64(base_seed) ^ trial) ^ (purpose * 0xd1b54a32d192ed03ULL));
}

/// Uniform draw in [0, 1) from the top 53 bits of the engine output.
template <typename Scalar = double, typename Urbg>
Scalar uniform01(Urbg& rng) {
  static_assert(Urbg::max() == ~std::uint64_t{0} && Urbg::min() == 0,
                "uniform01 expects a full-range 64-bit engine");
  return Scalar(static_cast<double>(rng() >> 11) * 0x1.0p-53);
}

template <typename Scalar = double, typename Urbg>
Scalar uniform(Urbg& rng, Scalar lo, Scalar hi) {
  return lo + (hi - lo) * uniform01<Scalar>(rng);
}

namespace detail {

inline void require_design_range(double alpha0) {
  if (!(alpha0 > 0.0 && alpha0 < 1.0))
    throw std::domain_error("alpha0 must lie in (0, 1)");
}

template <typename Scalar, typename F>
Scalar simpson_step(const F& f, Scalar a, Scalar b, Scalar fa, Scalar fm, Scalar fb,
                    Scalar whole, Scalar tol, int depth) {
  using std::abs;
  const Scalar m = (a + b) / 2;
  const Scalar lm = (a + m) / 2;
  const Scalar rm = (m + b) / 2;
  const Scalar flm = f(lm);
  const Scalar frm = f(rm);
  const Scalar left = (m - a) / 6 * (fa + 4 * flm + fm);
  const Scalar right = (b - m) / 6 * (fm + 4 * frm + fb);
  const Scalar diff = left + right - whole;
  if (depth <= 0 || abs(diff) <= 15 * tol) return left + right + diff / 15;
  return simpson_step(f, a, m, fa, flm, fm, left, tol / 2, depth - 1) +
         simpson_step(f, m, b, fm, frm, fb, right, tol / 2, depth - 1);
}

/// Adaptive Simpson quadrature of f over [a, b] to absolute tolerance tol.
template <typename Scalar, typename F>
Scalar adaptive_simpson(const F& f, Scalar a, Scalar b, Scalar tol, int max_depth = 50) {
  const Scalar fa = f(a);
  const Scalar fb = f(b);
  const Scalar fm = f((a + b) / 2);
  const Scalar whole = (b - a) / 6 * (fa + 4 * fm + fb);
  return simpson_step(f, a, b, fa, fm, fb, whole, tol, max_depth);
}

}  // namespace detail

/// Target pole prior alpha ~ U(-alpha0, alpha0).
template <typename Scalar = double>
class UniformPrior {
 public:
  explicit UniformPrior(Scalar alpha0) : alpha0_(alpha0) {
    detail::require_design_range(static_cast<double>(alpha0));
  }

  Scalar alpha0() const { return alpha0_; }

  Scalar pdf(Scalar x) const {
    using std::abs;
    return abs(x) < alpha0_ ? Scalar(1) / (2 * alpha0_) : Scalar(0);
  }

  /// Draws from the open interval; endpoint hits are redrawn.
  template <typename Urbg>
  Scalar operator()(Urbg& rng) const {
    for (;;) {
      const Scalar x = uniform<Scalar>(rng, -alpha0_, alpha0_);
      if (x > -alpha0_ && x < alpha0_) return x;
    }
  }

  template <typename Urbg>
  std::vector<Pole<Scalar>> sample(Urbg& rng, std::size_t n) const {
    std::vector<Pole<Scalar>> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.emplace_back((*this)(rng));
    return out;
  }

 private:
  Scalar alpha0_;
};

/// Reservoir pole density (1/C) / (1 - beta^2) on (-alpha0, alpha0) with
/// C = log((1 + alpha0) / (1 - alpha0)).
template <typename Scalar = double>
class OptimalPoleDistribution {
 public:
  explicit OptimalPoleDistribution(Scalar alpha0) : alpha0_(alpha0) {
    detail::require_design_range(static_cast<double>(alpha0));
    using std::log;
    normalizer_ = log((1 + alpha0) / (1 - alpha0));
  }

  Scalar alpha0() const { return alpha0_; }
  Scalar normalizer() const { return normalizer_; }

  /// Zero outside the open support.
  Scalar pdf(Scalar beta) const {
    using std::abs;
    if (!(abs(beta) < alpha0_)) return Scalar(0);
    return Scalar(1) / (normalizer_ * (1 - beta * beta));
  }

  /// (artanh beta + artanh alpha0) / C, clamped to [0, 1].
  Scalar cdf(Scalar beta) const {
    using std::atanh;
    if (beta <= -alpha0_) return Scalar(0);
    if (beta >= alpha0_) return Scalar(1);
    return (atanh(beta) + atanh(alpha0_)) / normalizer_;
  }

  Scalar inverse_cdf(Scalar u) const {
    using std::atanh;
    using std::tanh;
    return tanh(normalizer_ * u - atanh(alpha0_));
  }

  /// Envelope height of the rejection sampler: the density supremum at the
  /// support edges.
  Scalar envelope() const { return Scalar(1) / (normalizer_ * (1 - alpha0_ * alpha0_)); }

  /// Von Neumann rejection against a uniform proposal on (-alpha0, alpha0).
  template <typename Urbg>
  Scalar draw_rejection(Urbg& rng) const {
    const Scalar edge = 1 - alpha0_ * alpha0_;
    for (long it = 0; it < kRejectionCap; ++it) {
      const Scalar beta = uniform<Scalar>(rng, -alpha0_, alpha0_);
      const Scalar u = uniform01<Scalar>(rng);
      if (!(beta > -alpha0_ && beta < alpha0_)) continue;
      // u * envelope <= pdf(beta)  <=>  u <= (1 - alpha0^2) / (1 - beta^2)
      if (u * (1 - beta * beta) <= edge) return beta;
    }
    throw std::runtime_error("rejection sampler exceeded its iteration cap");
  }

  template <typename Urbg>
  Scalar draw_inverse_cdf(Urbg& rng) const {
    for (;;) {
      const Scalar beta = inverse_cdf(uniform01<Scalar>(rng));
      if (beta > -alpha0_ && beta < alpha0_) return beta;
    }
  }

  template <typename Urbg>
  std::vector<Pole<Scalar>> sample(Urbg& rng, std::size_t n) const {
    std::vector<Pole<Scalar>> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.emplace_back(draw_rejection(rng));
    return out;
  }

  template <typename Urbg>
  std::vector<Pole<Scalar>> sample_inverse_cdf(Urbg& rng, std::size_t n) const {
    std::vector<Pole<Scalar>> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.emplace_back(draw_inverse_cdf(rng));
    return out;
  }

 private:
  Scalar alpha0_;
  Scalar normalizer_{};
};

/// Optimal pole density under a non-uniform target prior q:
/// proportional to q(beta) / (1 - beta^2). The prior is only ever evaluated
/// inside (-alpha0, alpha0); it need not be normalised.
template <typename Scalar = double>
class ReweightedDistribution {
 public:
  using Density = std::function<Scalar(Scalar)>;

  static constexpr int kEnvelopeGrid = 10'000;
  static constexpr double kEnvelopeSafety = 1.05;
  static constexpr double kQuadratureTolerance = 1e-8;

  ReweightedDistribution(Scalar alpha0, Density prior)
      : alpha0_(alpha0), prior_(std::move(prior)) {
    detail::require_design_range(static_cast<double>(alpha0));
    if (!prior_) throw std::invalid_argument("reweighted: empty prior density");

    Scalar peak(0);
    Scalar coarse(0);
    const Scalar h = 2 * alpha0_ / kEnvelopeGrid;
    for (int i = 0; i < kEnvelopeGrid; ++i) {
      const Scalar beta = -alpha0_ + (Scalar(i) + Scalar(0.5)) * h;
      const Scalar q = prior_(beta);
      if (!(q >= 0) || !std::isfinite(static_cast<double>(q)))
        throw std::domain_error("reweighted: prior density negative or non-finite");
      const Scalar v = unnormalized(beta);
      peak = std::max(peak, v);
      coarse += v * h;
    }
    if (!(coarse > 0)) throw std::domain_error("reweighted: prior has zero mass on (-alpha0, alpha0)");

    auto f = [this](Scalar b) { return unnormalized(b); };
    normalizer_ = detail::adaptive_simpson<Scalar>(f, -alpha0_, alpha0_,
                                                   Scalar(kQuadratureTolerance) * coarse);
    if (!(normalizer_ > 0)) throw std::domain_error("reweighted: prior has zero mass on (-alpha0, alpha0)");
    envelope_ = Scalar(kEnvelopeSafety) * peak;
  }

  /// Convenience for the base case: q = p(.; alpha0) uniform.
  static ReweightedDistribution from(const OptimalPoleDistribution<Scalar>& base, Density prior) {
    return ReweightedDistribution(base.alpha0(), std::move(prior));
  }

  Scalar alpha0() const { return alpha0_; }
  Scalar normalizer() const { return normalizer_; }
  /// Unnormalised envelope height used by the sampler.
  Scalar envelope() const { return envelope_; }

  Scalar pdf(Scalar beta) const {
    using std::abs;
    if (!(abs(beta) < alpha0_)) return Scalar(0);
    return unnormalized(beta) / normalizer_;
  }

  template <typename Urbg>
  Scalar draw(Urbg& rng) const {
    for (long it = 0; it < kRejectionCap; ++it) {
      const Scalar beta = uniform<Scalar>(rng, -alpha0_, alpha0_);
      const Scalar u = uniform01<Scalar>(rng);
      if (!(beta > -alpha0_ && beta < alpha0_)) continue;
      if (u * envelope_ <= unnormalized(beta)) return beta;
    }
    throw std::runtime_error("rejection sampler exceeded its iteration cap");
  }

  template <typename Urbg>
  std::vector<Pole<Scalar>> sample(Urbg& rng, std::size_t n) const {
    std::vector<Pole<Scalar>> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.emplace_back(draw(rng));
    return out;
  }

 private:
  Scalar unnormalized(Scalar beta) const { return prior_(beta) / (1 - beta * beta); }

  Scalar alpha0_;
  Density prior_;
  Scalar normalizer_{};
  Scalar envelope_{};
};

template <typename Scalar>
ReweightedDistribution<Scalar> reweighted(const OptimalPoleDistribution<Scalar>& base,
                                          typename ReweightedDistribution<Scalar>::Density prior) {
  return ReweightedDistribution<Scalar>::from(base, std::move(prior));
}

}  // namespace lesn
