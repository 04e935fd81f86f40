#pragma once

// Linear echo state network: x[n] = W_res x[n-1] + W_in u[n], y[n] = W_out . x[n].

#include "lesn/lti.hpp"
#include "lesn/projection.hpp"
#include "lesn/sampling.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace lesn {

/// Non-interconnected reservoir: W_res = diag(poles).
template <typename Scalar = double>
struct DiagonalReservoir {
  Vector<Scalar> poles;

  DiagonalReservoir() = default;
  explicit DiagonalReservoir(const PoleSet<Scalar>& set) : poles(set.values()) {}
  explicit DiagonalReservoir(Vector<Scalar> values) : poles(std::move(values)) {
    if (poles.size() > 0 && !(poles.cwiseAbs().maxCoeff() < Scalar(1)))
      throw std::domain_error("diagonal reservoir pole outside (-1, 1)");
  }

  Eigen::Index size() const { return poles.size(); }
};

/// Interconnected reservoir with an explicit (possibly sparse) weight matrix.
template <typename Scalar = double>
struct DenseReservoir {
  Matrix<Scalar> weights;
  Scalar sparsity{0};
  Scalar spectral_radius{0};

  Eigen::Index size() const { return weights.rows(); }
};

template <typename Scalar>
Scalar spectral_radius(const Matrix<Scalar>& w) {
  if (w.size() == 0) return Scalar(0);
  Eigen::EigenSolver<Matrix<Scalar>> solver(w, false);
  return solver.eigenvalues().cwiseAbs().maxCoeff();
}

template <typename Scalar = double>
class EsnModel {
 public:
  using Reservoir = std::variant<DiagonalReservoir<Scalar>, DenseReservoir<Scalar>>;

  /// Unit input weights, as used for the diagonal reservoir analysis.
  explicit EsnModel(DiagonalReservoir<Scalar> reservoir)
      : reservoir_(std::move(reservoir)) {
    const auto m = std::get<0>(reservoir_).size();
    input_weights_ = Vector<Scalar>::Ones(m);
  }

  EsnModel(Reservoir reservoir, Vector<Scalar> input_weights)
      : reservoir_(std::move(reservoir)), input_weights_(std::move(input_weights)) {
    if (input_weights_.size() != size())
      throw std::invalid_argument("EsnModel: input weight length does not match reservoir size");
  }

  Eigen::Index size() const {
    return std::visit([](const auto& r) { return r.size(); }, reservoir_);
  }

  const Reservoir& reservoir() const { return reservoir_; }
  bool is_diagonal() const { return reservoir_.index() == 0; }
  const Vector<Scalar>& input_weights() const { return input_weights_; }

  bool trained() const { return output_weights_.has_value(); }

  const Vector<Scalar>& output_weights() const {
    if (!output_weights_) throw std::logic_error("EsnModel: output weights not trained");
    return *output_weights_;
  }

  EsnModel with_output_weights(Vector<Scalar> w) const {
    if (w.size() != size())
      throw std::invalid_argument("EsnModel: output weight length does not match reservoir size");
    EsnModel copy = *this;
    copy.output_weights_ = std::move(w);
    return copy;
  }

 private:
  Reservoir reservoir_;
  Vector<Scalar> input_weights_;
  std::optional<Vector<Scalar>> output_weights_;
};

/// Reservoir states from rest; column n holds x[n].
template <typename Scalar, typename Derived>
Matrix<Scalar> run_states(const EsnModel<Scalar>& model, const Eigen::MatrixBase<Derived>& input) {
  const Eigen::Index m = model.size();
  const Eigen::Index length = input.size();
  const auto& w_in = model.input_weights();
  Matrix<Scalar> states(m, length);
  Vector<Scalar> x = Vector<Scalar>::Zero(m);

  if (const auto* diag = std::get_if<DiagonalReservoir<Scalar>>(&model.reservoir())) {
    for (Eigen::Index n = 0; n < length; ++n) {
      x = diag->poles.cwiseProduct(x) + w_in * input(n);
      states.col(n) = x;
    }
  } else {
    const auto& w = std::get<DenseReservoir<Scalar>>(model.reservoir()).weights;
    Vector<Scalar> next(m);
    for (Eigen::Index n = 0; n < length; ++n) {
      next.noalias() = w * x;
      next += w_in * input(n);
      x.swap(next);
      states.col(n) = x;
    }
  }
  return states;
}

struct TrainConfig {
  /// Singular values below this fraction of the largest are discarded.
  double rank_tolerance = 1e-12;
  /// Leading states of every sequence excluded from the fit.
  Eigen::Index washout = 0;
};

template <typename Scalar = double>
struct LeastSquaresFit {
  Vector<Scalar> weights;
  /// Mean squared residual per fitted sample.
  Scalar loss{};
  Eigen::Index rank{};
};

/// Minimum-norm least squares fit of target[n] ~ w . states.col(n).
template <typename Scalar>
LeastSquaresFit<Scalar> fit_readout(const Matrix<Scalar>& states, const Vector<Scalar>& target,
                                    double rank_tolerance = 1e-12) {
  if (states.cols() != target.size())
    throw std::invalid_argument("fit_readout: state and target lengths differ");
  if (states.cols() == 0 || states.isZero(0))
    throw std::domain_error("fit_readout: state matrix is identically zero (degenerate input)");
  const Matrix<Scalar> design = states.transpose();
  Eigen::BDCSVD<Matrix<Scalar>> svd(design, Eigen::ComputeThinU | Eigen::ComputeThinV);
  svd.setThreshold(Scalar(rank_tolerance));
  LeastSquaresFit<Scalar> fit;
  fit.weights = svd.solve(target);
  fit.rank = svd.rank();
  fit.loss = (design * fit.weights - target).squaredNorm() / Scalar(target.size());
  return fit;
}

template <typename Scalar = double>
struct TrainResult {
  EsnModel<Scalar> model;
  /// Mean squared training error per sample.
  Scalar training_loss{};
  Eigen::Index rank{};
};

/// Pseudo-inverse readout over the column-concatenated states of all
/// training sequences.
template <typename Scalar>
TrainResult<Scalar> train(const EsnModel<Scalar>& model, std::span<const Signal<Scalar>> inputs,
                          std::span<const Signal<Scalar>> targets, const TrainConfig& cfg = {}) {
  if (inputs.empty()) throw std::invalid_argument("train: no training sequences");
  if (inputs.size() != targets.size())
    throw std::invalid_argument("train: input and target sequence counts differ");
  if (!(cfg.rank_tolerance > 0) || cfg.washout < 0)
    throw std::invalid_argument("train: invalid configuration");

  Eigen::Index kept = 0;
  for (std::size_t p = 0; p < inputs.size(); ++p) {
    if (inputs[p].size() != targets[p].size())
      throw std::invalid_argument("train: input and target lengths differ");
    require_finite(inputs[p], "train input");
    require_finite(targets[p], "train target");
    kept += std::max<Eigen::Index>(0, inputs[p].size() - cfg.washout);
  }
  if (kept == 0) throw std::invalid_argument("train: washout leaves no samples");

  Matrix<Scalar> states(model.size(), kept);
  Vector<Scalar> y(kept);
  Eigen::Index col = 0;
  for (std::size_t p = 0; p < inputs.size(); ++p) {
    const Eigen::Index n = inputs[p].size() - cfg.washout;
    if (n <= 0) continue;
    states.middleCols(col, n) = run_states(model, inputs[p]).rightCols(n);
    y.segment(col, n) = targets[p].tail(n);
    col += n;
  }

  auto fit = fit_readout(states, y, cfg.rank_tolerance);
  return {model.with_output_weights(std::move(fit.weights)), fit.loss, fit.rank};
}

template <typename Scalar>
TrainResult<Scalar> train(const EsnModel<Scalar>& model, const std::vector<Signal<Scalar>>& inputs,
                          const std::vector<Signal<Scalar>>& targets, const TrainConfig& cfg = {}) {
  return train(model, std::span<const Signal<Scalar>>(inputs),
               std::span<const Signal<Scalar>>(targets), cfg);
}

template <typename Scalar, typename Derived>
Signal<Scalar> predict(const EsnModel<Scalar>& model, const Eigen::MatrixBase<Derived>& input) {
  const auto& w_out = model.output_weights();
  return run_states(model, input).transpose() * w_out;
}

/// Entries U(-1, 1), each zeroed with probability kappa, then rescaled to
/// the requested spectral radius. All-zero draws are redrawn.
template <typename Scalar = double, typename Urbg>
DenseReservoir<Scalar> random_dense_reservoir(Eigen::Index m, Scalar kappa, Scalar target_radius,
                                              Urbg& rng) {
  if (m < 1) throw std::invalid_argument("random_dense_reservoir: size must be positive");
  if (!(kappa >= 0 && kappa < 1))
    throw std::invalid_argument("random_dense_reservoir: sparsity must lie in [0, 1)");
  if (!(target_radius > 0 && target_radius < 1))
    throw std::invalid_argument("random_dense_reservoir: spectral radius must lie in (0, 1)");

  for (;;) {
    Matrix<Scalar> w(m, m);
    for (Eigen::Index j = 0; j < m; ++j) {
      for (Eigen::Index i = 0; i < m; ++i) {
        const Scalar value = uniform<Scalar>(rng, Scalar(-1), Scalar(1));
        const Scalar keep = uniform01<Scalar>(rng);
        w(i, j) = keep < kappa ? Scalar(0) : value;
      }
    }
    const Scalar rho = spectral_radius(w);
    if (!(rho > 0)) continue;
    w *= target_radius / rho;
    return {std::move(w), kappa, target_radius};
  }
}

template <typename Scalar = double>
struct EquivalenceReport {
  bool checked = false;
  std::string diagnostic;
  /// 2-norm condition number of the eigenvector matrix Q.
  Scalar condition_number{};
  Vector<Scalar> eigenvalues;
  Matrix<Scalar> eigenvectors;
  /// Q^-1 W_in.
  Vector<Scalar> transformed_input;
  Scalar dense_loss{};
  Scalar diagonal_loss{};
  /// Max |y_dense - y_diag| when the dense readout is mapped through Q^T.
  Scalar mapped_output_residual{};
};

/// Rewrites W_res = Q diag(lambda) Q^-1 as the diagonal reservoir diag(lambda)
/// driven by Q^-1 W_in and compares least-squares fits of `target` from both
/// state sequences. Only real eigendecompositions with cond(Q) below
/// `max_condition` are checked.
template <typename Scalar, typename DIn, typename DTarget>
EquivalenceReport<Scalar> diagonalize_check(const DenseReservoir<Scalar>& dense,
                                            const Vector<Scalar>& input_weights,
                                            const Eigen::MatrixBase<DIn>& input,
                                            const Eigen::MatrixBase<DTarget>& target,
                                            Scalar max_condition = Scalar(1e8),
                                            double rank_tolerance = 1e-12) {
  using std::abs;
  const auto& w = dense.weights;
  const Eigen::Index m = w.rows();
  EquivalenceReport<Scalar> report;

  if (w.isDiagonal(0)) {
    report.eigenvalues = w.diagonal();
    report.eigenvectors = Matrix<Scalar>::Identity(m, m);
  } else if (w.isApprox(w.transpose(), Scalar(0))) {
    Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> eig(w);
    report.eigenvalues = eig.eigenvalues();
    report.eigenvectors = eig.eigenvectors();
  } else {
    Eigen::EigenSolver<Matrix<Scalar>> eig(w);
    const auto& lambda = eig.eigenvalues();
    const Scalar scale = std::max(lambda.cwiseAbs().maxCoeff(), Scalar(1));
    if (lambda.imag().cwiseAbs().maxCoeff() > Scalar(1e-10) * scale) {
      report.diagnostic = "skipped: spectrum is not real";
      return report;
    }
    report.eigenvalues = lambda.real();
    report.eigenvectors = eig.eigenvectors().real();
  }

  Eigen::JacobiSVD<Matrix<Scalar>> qsvd(report.eigenvectors);
  const auto& sv = qsvd.singularValues();
  report.condition_number = sv(m - 1) > 0 ? sv(0) / sv(m - 1) : std::numeric_limits<Scalar>::infinity();
  if (!(report.condition_number <= max_condition)) {
    report.diagnostic = "skipped: eigenvector matrix is ill-conditioned";
    return report;
  }

  Eigen::PartialPivLU<Matrix<Scalar>> lu(report.eigenvectors);
  report.transformed_input = lu.solve(input_weights);

  const EsnModel<Scalar> dense_model(dense, input_weights);
  const EsnModel<Scalar> diag_model(DiagonalReservoir<Scalar>(report.eigenvalues), report.transformed_input);
  const Matrix<Scalar> xs_dense = run_states(dense_model, input);
  const Matrix<Scalar> xs_diag = run_states(diag_model, input);
  const Vector<Scalar> y = target;

  const auto dense_fit = fit_readout(xs_dense, y, rank_tolerance);
  const auto diag_fit = fit_readout(xs_diag, y, rank_tolerance);
  report.dense_loss = dense_fit.loss;
  report.diagonal_loss = diag_fit.loss;

  const Vector<Scalar> mapped = report.eigenvectors.transpose() * dense_fit.weights;
  report.mapped_output_residual =
      (xs_dense.transpose() * dense_fit.weights - xs_diag.transpose() * mapped).cwiseAbs().maxCoeff();
  report.checked = true;
  return report;
}

}  // namespace lesn
