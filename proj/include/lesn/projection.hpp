#pragma once

// Orthogonal projection of a unit-norm single-pole impulse response onto the
// span of M single-pole basis responses, plus the closed-form two-pole
// neighbourhood error and its mid-point expansions.

#include "lesn/lti.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <initializer_list>
#include <stdexcept>
#include <vector>

namespace lesn {

/// Relative eigenvalue cutoff used when inverting the Gram matrix.
inline constexpr double kGramTruncation = 1e-12;
/// Poles closer than this are the same basis function.
inline constexpr double kPoleDistinctness = 1e-12;

/// Distinct reservoir poles {beta_1..beta_M}. Near-duplicates are dropped on
/// construction, keeping the first occurrence.
template <typename Scalar = double>
class PoleSet {
 public:
  PoleSet() = default;

  explicit PoleSet(std::span<const Pole<Scalar>> poles) {
    std::vector<Scalar> kept;
    kept.reserve(poles.size());
    for (const auto& p : poles) {
      bool duplicate = false;
      for (Scalar q : kept) {
        using std::abs;
        if (abs(q - p.value()) < Scalar(kPoleDistinctness)) {
          duplicate = true;
          break;
        }
      }
      if (!duplicate) kept.push_back(p.value());
    }
    values_ = Eigen::Map<const Vector<Scalar>>(kept.data(), static_cast<Eigen::Index>(kept.size()));
  }

  explicit PoleSet(const std::vector<Pole<Scalar>>& poles)
      : PoleSet(std::span<const Pole<Scalar>>(poles)) {}

  PoleSet(std::initializer_list<Scalar> values) {
    std::vector<Pole<Scalar>> poles;
    for (Scalar v : values) poles.emplace_back(v);
    *this = PoleSet(poles);
  }

  template <typename Derived>
  static PoleSet from_values(const Eigen::MatrixBase<Derived>& values) {
    std::vector<Pole<Scalar>> poles;
    poles.reserve(values.size());
    for (Eigen::Index i = 0; i < values.size(); ++i) poles.emplace_back(values(i));
    return PoleSet(poles);
  }

  const Vector<Scalar>& values() const { return values_; }
  Eigen::Index size() const { return values_.size(); }
  bool empty() const { return values_.size() == 0; }
  Scalar operator[](Eigen::Index i) const { return values_(i); }

 private:
  Vector<Scalar> values_;
};

/// <s_a, s_b> = sum_n (ab)^n = 1 / (1 - ab).
template <typename Scalar>
Scalar basis_inner_product(Scalar a, Scalar b) {
  return Scalar(1) / (Scalar(1) - a * b);
}

template <typename Scalar>
Scalar basis_inner_product(Pole<Scalar> a, Pole<Scalar> b) {
  return basis_inner_product(a.value(), b.value());
}

/// Gram matrix of the basis and its correlation with the normalised target.
template <typename Scalar = double>
struct GramSystem {
  Matrix<Scalar> sigma;
  Vector<Scalar> r;
  Pole<Scalar> target;
};

template <typename Scalar>
GramSystem<Scalar> build_gram(const PoleSet<Scalar>& poles, Pole<Scalar> target) {
  if (poles.empty()) throw std::invalid_argument("build_gram: empty pole set");
  using std::sqrt;
  const Eigen::Index m = poles.size();
  const Scalar alpha = target.value();
  const Scalar norm = sqrt(Scalar(1) - alpha * alpha);
  GramSystem<Scalar> gram{Matrix<Scalar>(m, m), Vector<Scalar>(m), target};
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) {
      const Scalar v = basis_inner_product(poles[i], poles[j]);
      gram.sigma(i, j) = v;
      gram.sigma(j, i) = v;
    }
    gram.r(i) = norm / (Scalar(1) - alpha * poles[i]);
  }
  return gram;
}

template <typename Scalar = double>
struct ProjectionResult {
  Vector<Scalar> weights;
  /// Squared distance from the unit-norm target to its projection, in [0, 1].
  Scalar error{};
  /// Number of Gram eigenvalues kept by the truncated inverse.
  Eigen::Index rank{};

  /// True when the Gram matrix was numerically singular and the result is
  /// the truncated (pseudo-inverse) solution.
  bool rank_deficient() const { return rank < weights.size(); }
};

/// Solves sigma w = r through a truncated symmetric eigendecomposition and
/// returns w together with 1 - r^T w.
template <typename Scalar>
ProjectionResult<Scalar> project(const GramSystem<Scalar>& gram,
                                 Scalar relative_cutoff = Scalar(kGramTruncation)) {
  Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> eig(gram.sigma);
  if (eig.info() != Eigen::Success)
    throw std::runtime_error("project: eigendecomposition failed");
  const auto& lambda = eig.eigenvalues();
  const auto& vecs = eig.eigenvectors();
  const Scalar threshold = relative_cutoff * lambda.maxCoeff();

  Vector<Scalar> coeffs = vecs.transpose() * gram.r;
  Eigen::Index rank = 0;
  for (Eigen::Index k = 0; k < lambda.size(); ++k) {
    if (lambda(k) > threshold) {
      coeffs(k) /= lambda(k);
      ++rank;
    } else {
      coeffs(k) = Scalar(0);
    }
  }

  ProjectionResult<Scalar> out;
  out.weights = vecs * coeffs;
  out.error = std::clamp(Scalar(1) - gram.r.dot(out.weights), Scalar(0), Scalar(1));
  out.rank = rank;
  return out;
}

template <typename Scalar>
ProjectionResult<Scalar> project(const PoleSet<Scalar>& poles, Pole<Scalar> target) {
  return project(build_gram(poles, target));
}

/// Two-pole projection error in factored form,
///   ((alpha - b1)(alpha - b2) / ((1 - alpha b1)(1 - alpha b2)))^2,
/// which is algebraically identical to the expanded expression but free of
/// the 1/(b1 - b2)^2 cancellation.
template <typename Scalar>
Scalar two_pole_error(Scalar alpha, Scalar beta1, Scalar beta2) {
  if (beta1 == beta2) throw std::invalid_argument("two_pole_error: coincident poles");
  const Scalar f = (alpha - beta1) * (alpha - beta2) /
                   ((Scalar(1) - alpha * beta1) * (Scalar(1) - alpha * beta2));
  return f * f;
}

template <typename Scalar>
Scalar two_pole_error(Pole<Scalar> alpha, Pole<Scalar> beta1, Pole<Scalar> beta2) {
  return two_pole_error(alpha.value(), beta1.value(), beta2.value());
}

/// Two-pole error evaluated term by term as 1 - (1-a^2)(1-b1 b2)/(b1-b2)^2 (...).
/// Loses roughly log10(1/(b1-b2)^2) digits; kept for cross-checking.
template <typename Scalar>
Scalar two_pole_error_expanded(Scalar alpha, Scalar beta1, Scalar beta2) {
  if (beta1 == beta2) throw std::invalid_argument("two_pole_error: coincident poles");
  const Scalar one(1);
  const Scalar p = one - beta1 * beta2;
  const Scalar d1 = one - alpha * beta1;
  const Scalar d2 = one - alpha * beta2;
  const Scalar q1 = one - beta1 * beta1;
  const Scalar q2 = one - beta2 * beta2;
  const Scalar gap = beta1 - beta2;
  const Scalar bracket = q1 * p / (d1 * d1) - Scalar(2) * q1 * q2 / (d1 * d2) + q2 * p / (d2 * d2);
  return one - (one - alpha * alpha) * p / (gap * gap) * bracket;
}

namespace detail {
template <typename Scalar>
void require_neighbourhood(Scalar beta, Scalar delta) {
  using std::abs;
  if (!(delta > Scalar(0)) || !(abs(beta) + delta < Scalar(1)))
    throw std::domain_error("neighbourhood (beta - delta, beta + delta) must lie inside (-1, 1)");
}
}  // namespace detail

/// Two-pole error at the mid-point alpha = beta of poles beta -/+ delta:
///   delta^4 / (1 + beta^4 - beta^2 (2 + delta^2))^2.
template <typename Scalar>
Scalar midpoint_error_exact(Scalar beta, Scalar delta) {
  detail::require_neighbourhood(beta, delta);
  const Scalar b2 = beta * beta;
  const Scalar d2 = delta * delta;
  const Scalar den = Scalar(1) + b2 * b2 - b2 * (Scalar(2) + d2);
  return d2 * d2 / (den * den);
}

/// Leading term delta^4 / (1 - beta^2)^4.
template <typename Scalar>
Scalar midpoint_error_leading(Scalar beta, Scalar delta) {
  detail::require_neighbourhood(beta, delta);
  const Scalar q = Scalar(1) - beta * beta;
  const Scalar d2 = delta * delta;
  return d2 * d2 / (q * q * q * q);
}

/// d/d(alpha) of the two-pole error at the mid-point:
///   4 beta (1 - beta^2 + delta^2) delta^4 / ((1 - beta^2)^2 - beta^2 delta^2)^3.
template <typename Scalar>
Scalar midpoint_derivative_exact(Scalar beta, Scalar delta) {
  detail::require_neighbourhood(beta, delta);
  const Scalar b2 = beta * beta;
  const Scalar d2 = delta * delta;
  const Scalar q = Scalar(1) - b2;
  const Scalar den = q * q - b2 * d2;
  return Scalar(4) * beta * (q + d2) * d2 * d2 / (den * den * den);
}

/// Leading term 4 beta delta^4 / (1 - beta^2)^5.
template <typename Scalar>
Scalar midpoint_derivative_leading(Scalar beta, Scalar delta) {
  detail::require_neighbourhood(beta, delta);
  const Scalar q = Scalar(1) - beta * beta;
  const Scalar d2 = delta * delta;
  return Scalar(4) * beta * d2 * d2 / (q * q * q * q * q);
}

/// Upper bound on the worst two-pole error inside (beta - delta, beta + delta):
/// mid-point error plus delta times the magnitude of its slope there.
template <typename Scalar>
Scalar error_bound(Scalar beta, Scalar delta) {
  using std::abs;
  return midpoint_error_exact(beta, delta) + delta * abs(midpoint_derivative_exact(beta, delta));
}

/// delta^4 / (1-beta^2)^4 + 4|beta| delta^5 / (1-beta^2)^5.
template <typename Scalar>
Scalar error_bound_leading(Scalar beta, Scalar delta) {
  using std::abs;
  return midpoint_error_leading(beta, delta) + delta * abs(midpoint_derivative_leading(beta, delta));
}

}  // namespace lesn
