#pragma once

// Discrete-time all-pole IIR systems: single-pole impulse responses, pole
// expansion into denominator coefficients and zero-state filtering.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <span>
#include <sstream>
#include <string>
#include <stdexcept>
#include <vector>

namespace lesn {

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// Finite real sample sequence x[0..L).
template <typename Scalar = double>
using Signal = Vector<Scalar>;

template <typename Derived>
void require_finite(const Eigen::MatrixBase<Derived>& samples, const char* what) {
  if (!samples.allFinite())
    throw std::domain_error(std::string(what) + ": non-finite sample");
}

/// A real pole strictly inside the unit interval (-1, 1).
template <typename Scalar = double>
class Pole {
 public:
  constexpr Pole() = default;

  explicit Pole(Scalar value) : value_(value) {
    using std::abs;
    if (!(abs(value) < Scalar(1))) {
      std::ostringstream msg;
      msg << "pole " << value << " is not strictly inside (-1, 1)";
      throw std::domain_error(msg.str());
    }
  }

  constexpr Scalar value() const { return value_; }
  constexpr explicit operator Scalar() const { return value_; }

  friend constexpr bool operator==(Pole, Pole) = default;

 private:
  Scalar value_{0};
};

/// Impulse response of the first-order system 1 / (1 - p z^-1) at lag n.
/// 0^0 is 1, so the zero pole is the unit impulse.
template <typename Scalar>
Scalar impulse_response(Pole<Scalar> pole, int n) {
  if (n < 0) throw std::invalid_argument("impulse_response: negative lag");
  // Repeated multiplication, so the value is bit-identical to running the
  // recursion x[n] = p x[n-1].
  Scalar out(1);
  for (int k = 0; k < n; ++k) out *= pole.value();
  return out;
}

/// All-pole system H(z) = 1 / (1 + a_1 z^-1 + ... + a_K z^-K).
template <typename Scalar = double>
class RationalIIR {
 public:
  RationalIIR() = default;

  /// Throws std::domain_error unless every root of the denominator lies
  /// strictly inside the unit disk.
  explicit RationalIIR(Vector<Scalar> denominator)
      : denominator_(std::move(denominator)) {
    if (!denominator_.allFinite())
      throw std::domain_error("RationalIIR: non-finite coefficient");
    if (order() > 0 && spectral_radius() >= Scalar(1))
      throw std::domain_error("RationalIIR: unstable denominator");
  }

  /// Coefficients a_1..a_K (the leading 1 is implicit).
  const Vector<Scalar>& denominator() const { return denominator_; }
  Eigen::Index order() const { return denominator_.size(); }

  /// Roots of z^K + a_1 z^(K-1) + ... + a_K via the companion matrix.
  Eigen::Matrix<std::complex<Scalar>, Eigen::Dynamic, 1> poles() const {
    const Eigen::Index k = order();
    if (k == 0) return {};
    Matrix<Scalar> companion = Matrix<Scalar>::Zero(k, k);
    companion.row(0) = -denominator_.transpose();
    companion.diagonal(-1).setOnes();
    Eigen::EigenSolver<Matrix<Scalar>> solver(companion, false);
    return solver.eigenvalues();
  }

  Scalar spectral_radius() const {
    if (order() == 0) return Scalar(0);
    return poles().cwiseAbs().maxCoeff();
  }

 private:
  Vector<Scalar> denominator_;
};

/// Expands prod_i (1 - p_i z^-1) into 1 + sum_k a_k z^-k.
template <typename Scalar>
RationalIIR<Scalar> system_from_poles(std::span<const Pole<Scalar>> poles) {
  // coeffs(0) is the implicit leading 1.
  Vector<Scalar> coeffs = Vector<Scalar>::Zero(poles.size() + 1);
  coeffs(0) = Scalar(1);
  Eigen::Index filled = 0;
  for (const auto& p : poles) {
    ++filled;
    for (Eigen::Index k = filled; k >= 1; --k) coeffs(k) -= p.value() * coeffs(k - 1);
  }
  return RationalIIR<Scalar>(coeffs.tail(poles.size()));
}

template <typename Scalar>
RationalIIR<Scalar> system_from_poles(const std::vector<Pole<Scalar>>& poles) {
  return system_from_poles(std::span<const Pole<Scalar>>(poles));
}

/// Zero-state recursion y[n] = x[n] - sum_k a_k y[n-k].
template <typename Scalar, typename Derived>
Vector<Scalar> filter(const RationalIIR<Scalar>& system,
                      const Eigen::MatrixBase<Derived>& input) {
  const auto& a = system.denominator();
  const Eigen::Index order = a.size();
  const Eigen::Index length = input.size();
  Vector<Scalar> out(length);
  for (Eigen::Index n = 0; n < length; ++n) {
    Scalar acc = input(n);
    const Eigen::Index taps = std::min(order, n);
    for (Eigen::Index k = 1; k <= taps; ++k) acc -= a(k - 1) * out(n - k);
    out(n) = acc;
  }
  return out;
}

/// Length-L unit impulse.
template <typename Scalar = double>
Vector<Scalar> unit_impulse(Eigen::Index length) {
  Vector<Scalar> x = Vector<Scalar>::Zero(length);
  if (length > 0) x(0) = Scalar(1);
  return x;
}

}  // namespace lesn
