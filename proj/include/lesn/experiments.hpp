#pragma once

// Seeded Monte-Carlo drivers for the projection, sequence, train/test,
// interconnected and higher-order experiment families.

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace lesn {

enum class SamplerKind { optimal, uniform, grid };
enum class ReservoirKind { diagonal, dense };

std::string to_string(SamplerKind kind);
std::string to_string(ReservoirKind kind);
SamplerKind parse_sampler(const std::string& name);
ReservoirKind parse_reservoir(const std::string& name);

/// Random-stream purposes; each (trial, purpose) pair owns one substream.
enum class Purpose : std::uint64_t {
  target = 1,
  poles = 2,
  train_input = 3,
  test_input = 4,
  reservoir = 5,
  input_weights = 6,
};

struct MonteCarloConfig {
  int n_sim = 2000;
  std::vector<int> reservoir_sizes{4, 8, 16, 32, 64};
  double alpha0 = 0.95;
  int sequence_length = 1000;
  int n_train_sequences = 1;
  int n_test_sequences = 10;
  SamplerKind sampler = SamplerKind::optimal;
  ReservoirKind reservoir = ReservoirKind::diagonal;
  double sparsity = 0.2;
  double spectral_radius = 0.95;
  int target_order = 1;
  std::uint64_t base_seed = 1;
  /// Replace the first reservoir pole by the target pole (first-order only).
  bool include_target_pole = false;
  /// Worker threads; results do not depend on this.
  int jobs = 1;

  /// Throws std::invalid_argument naming the first offending field.
  void validate() const;
};

struct ResultRow {
  int reservoir_size = 0;
  double mean = 0;
  double stderr_of_mean = 0;
};

struct ExperimentResult {
  std::string metric;
  MonteCarloConfig config;
  std::vector<ResultRow> rows;

  std::string sampler_label() const;
  std::string reservoir_label() const;
};

struct LossCurves {
  ExperimentResult train;
  ExperimentResult test;
};

struct InterconnectedResult {
  LossCurves dense;
  /// Optimally sampled diagonal reservoir on the same targets and inputs.
  LossCurves baseline;
};

/// Mean projection error versus M for alpha ~ U(-alpha0, alpha0).
ExperimentResult projection_scaling(const MonteCarloConfig& cfg);

/// Mean per-sample squared error between the normalised first-order target
/// and the ESN with closed-form readout, driven by white Gaussian noise.
ExperimentResult sequence_scaling(const MonteCarloConfig& cfg);

/// Pseudo-inverse training on N_p sequences, testing on N_d fresh ones.
/// The target is of order cfg.target_order with roots U(-alpha0, alpha0).
LossCurves train_test(const MonteCarloConfig& cfg);

/// Dense reservoirs (cfg.sparsity, cfg.spectral_radius) against the optimal
/// diagonal baseline under common random numbers.
InterconnectedResult interconnected(const MonteCarloConfig& cfg);

/// train_test for higher-order all-pole targets; requires target_order >= 1.
LossCurves higher_order(const MonteCarloConfig& cfg);

/// OLS slope of log(mean) against log(M).
double fit_loglog_slope(const ExperimentResult& result);

/// round((4 N_p)^(1/5)), the minimiser of 1/M^4 + M/N_p.
int aic_optimal_order(long long n_train_sequences);
double aic_optimal_order_real(long long n_train_sequences);

// Output formats.
std::string format_double(double v);
void write_csv(std::ostream& os, std::span<const ExperimentResult> results);
std::string to_json(std::span<const ExperimentResult> results);

}  // namespace lesn
