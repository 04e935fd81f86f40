#include "lesn/experiments.hpp"

#include "lesn/lti.hpp"
#include "lesn/projection.hpp"
#include "lesn/reservoir.hpp"
#include "lesn/sampling.hpp"

#include "json.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <exception>
#include <functional>
#include <mutex>
#include <ostream>
#include <random>
#include <stdexcept>
#include <thread>

namespace lesn {

namespace {

using Poles = std::vector<Pole<double>>;

Rng stream(const MonteCarloConfig& cfg, int trial, Purpose purpose) {
  return Rng(substream_seed(cfg.base_seed, static_cast<std::uint64_t>(trial),
                            static_cast<std::uint64_t>(purpose)));
}

/// M evenly spaced interior points of (-range, range).
Poles grid_poles(double range, int m) {
  Poles out;
  out.reserve(m);
  for (int i = 0; i < m; ++i) out.emplace_back(-range + 2.0 * range * (i + 1) / (m + 1));
  return out;
}

/// The first M draws of the trial's pole stream, so pole sets are nested in M.
Poles draw_poles(const MonteCarloConfig& cfg, int trial, int m) {
  Rng rng = stream(cfg, trial, Purpose::poles);
  switch (cfg.sampler) {
    case SamplerKind::optimal:
      return OptimalPoleDistribution<double>(cfg.alpha0).sample(rng, m);
    case SamplerKind::uniform:
      return UniformPrior<double>(cfg.alpha0).sample(rng, m);
    case SamplerKind::grid:
      return grid_poles(cfg.alpha0, m);
  }
  throw std::logic_error("unknown sampler");
}

Signal<double> white_noise(Rng& rng, int length) {
  std::normal_distribution<double> normal;
  Signal<double> x(length);
  for (int n = 0; n < length; ++n) x(n) = normal(rng);
  return x;
}

/// Runs `trial(t, out)` for every trial; `out` has `width` slots. Rows are
/// reduced in trial order, so results do not depend on cfg.jobs.
std::vector<std::vector<double>> run_trials(
    const MonteCarloConfig& cfg, std::size_t width,
    const std::function<void(int, std::span<double>)>& trial) {
  std::vector<std::vector<double>> table(cfg.n_sim, std::vector<double>(width));
  const int workers = std::max(1, std::min(cfg.jobs, cfg.n_sim));
  if (workers == 1) {
    for (int t = 0; t < cfg.n_sim; ++t) trial(t, table[t]);
    return table;
  }

  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto work = [&] {
    for (int t = next++; t < cfg.n_sim; t = next++) {
      try {
        trial(t, table[t]);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = cfg.n_sim;
      }
    }
  };
  std::vector<std::thread> pool;
  for (int i = 0; i < workers; ++i) pool.emplace_back(work);
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
  return table;
}

ExperimentResult aggregate(const MonteCarloConfig& cfg, std::string metric,
                           const std::vector<std::vector<double>>& table, std::size_t offset,
                           std::size_t stride) {
  ExperimentResult result{std::move(metric), cfg, {}};
  const double n = static_cast<double>(table.size());
  for (std::size_t k = 0; k < cfg.reservoir_sizes.size(); ++k) {
    const std::size_t col = offset + k * stride;
    double sum = 0;
    for (const auto& row : table) sum += row[col];
    const double mean = sum / n;
    double ss = 0;
    for (const auto& row : table) ss += (row[col] - mean) * (row[col] - mean);
    const double se = table.size() > 1 ? std::sqrt(ss / (n - 1) / n) : 0.0;
    result.rows.push_back({cfg.reservoir_sizes[k], mean, se});
  }
  std::sort(result.rows.begin(), result.rows.end(),
            [](const ResultRow& a, const ResultRow& b) { return a.reservoir_size < b.reservoir_size; });
  return result;
}

struct TargetSystem {
  RationalIIR<double> system;
  std::vector<double> roots;
};

TargetSystem draw_target(const MonteCarloConfig& cfg, int trial) {
  Rng rng = stream(cfg, trial, Purpose::target);
  const auto roots = UniformPrior<double>(cfg.alpha0).sample(rng, cfg.target_order);
  TargetSystem out{system_from_poles(roots), {}};
  for (const auto& r : roots) out.roots.push_back(r.value());
  return out;
}

EsnModel<double> build_model(const MonteCarloConfig& cfg, int trial, int m, double target_root) {
  if (cfg.reservoir == ReservoirKind::dense) {
    Rng rr = stream(cfg, trial, Purpose::reservoir);
    auto dense = random_dense_reservoir<double>(m, cfg.sparsity, cfg.spectral_radius, rr);
    Rng rw = stream(cfg, trial, Purpose::input_weights);
    Vector<double> w_in(m);
    for (int i = 0; i < m; ++i) w_in(i) = uniform<double>(rw, -1.0, 1.0);
    return EsnModel<double>(std::move(dense), std::move(w_in));
  }
  Poles poles = draw_poles(cfg, trial, m);
  if (cfg.include_target_pole) poles.front() = Pole<double>(target_root);
  return EsnModel<double>(DiagonalReservoir<double>(PoleSet<double>(poles)));
}

/// Shared train/test protocol; writes (train, test) per reservoir size.
void train_test_trial(const MonteCarloConfig& cfg, int t, std::span<double> out) {
  const TargetSystem target = draw_target(cfg, t);

  std::vector<Signal<double>> train_in, train_out, test_in, test_out;
  Rng rtr = stream(cfg, t, Purpose::train_input);
  for (int p = 0; p < cfg.n_train_sequences; ++p) {
    train_in.push_back(white_noise(rtr, cfg.sequence_length));
    train_out.push_back(filter(target.system, train_in.back()));
  }
  Rng rte = stream(cfg, t, Purpose::test_input);
  for (int d = 0; d < cfg.n_test_sequences; ++d) {
    test_in.push_back(white_noise(rte, cfg.sequence_length));
    test_out.push_back(filter(target.system, test_in.back()));
  }

  for (std::size_t k = 0; k < cfg.reservoir_sizes.size(); ++k) {
    const auto model = build_model(cfg, t, cfg.reservoir_sizes[k], target.roots.front());
    const auto fitted = train(model, train_in, train_out);
    double sq = 0;
    for (int d = 0; d < cfg.n_test_sequences; ++d)
      sq += (predict(fitted.model, test_in[d]) - test_out[d]).squaredNorm();
    out[2 * k] = fitted.training_loss;
    out[2 * k + 1] = sq / (static_cast<double>(cfg.n_test_sequences) * cfg.sequence_length);
  }
}

LossCurves run_train_test(const MonteCarloConfig& cfg) {
  const auto table = run_trials(cfg, 2 * cfg.reservoir_sizes.size(),
                                [&](int t, std::span<double> out) { train_test_trial(cfg, t, out); });
  return {aggregate(cfg, "train_loss", table, 0, 2), aggregate(cfg, "test_loss", table, 1, 2)};
}

}  // namespace

std::string to_string(SamplerKind kind) {
  switch (kind) {
    case SamplerKind::optimal: return "optimal";
    case SamplerKind::uniform: return "uniform";
    case SamplerKind::grid: return "grid";
  }
  return "?";
}

std::string to_string(ReservoirKind kind) {
  return kind == ReservoirKind::dense ? "dense" : "diagonal";
}

SamplerKind parse_sampler(const std::string& name) {
  if (name == "optimal") return SamplerKind::optimal;
  if (name == "uniform") return SamplerKind::uniform;
  if (name == "grid") return SamplerKind::grid;
  throw std::invalid_argument("unknown sampler '" + name + "'");
}

ReservoirKind parse_reservoir(const std::string& name) {
  if (name == "diagonal") return ReservoirKind::diagonal;
  if (name == "dense") return ReservoirKind::dense;
  throw std::invalid_argument("unknown reservoir '" + name + "'");
}

void MonteCarloConfig::validate() const {
  auto fail = [](const std::string& what) { throw std::invalid_argument(what); };
  if (n_sim < 1) fail("n_sim must be positive");
  if (reservoir_sizes.empty()) fail("reservoir_sizes must not be empty");
  for (int m : reservoir_sizes)
    if (m < 1) fail("reservoir sizes must be positive");
  if (!(alpha0 > 0 && alpha0 < 1)) fail("alpha0 must lie in (0, 1)");
  if (sequence_length < 1) fail("sequence_length must be positive");
  if (n_train_sequences < 1) fail("n_train_sequences must be positive");
  if (n_test_sequences < 1) fail("n_test_sequences must be positive");
  if (!(sparsity >= 0 && sparsity < 1)) fail("sparsity must lie in [0, 1)");
  if (!(spectral_radius > 0 && spectral_radius < 1)) fail("spectral_radius must lie in (0, 1)");
  if (target_order < 1) fail("target_order must be positive");
  if (jobs < 1) fail("jobs must be positive");
  if (include_target_pole && target_order != 1) fail("include_target_pole needs a first-order target");
  if (include_target_pole && reservoir == ReservoirKind::dense)
    fail("include_target_pole needs a diagonal reservoir");
}

std::string ExperimentResult::sampler_label() const {
  if (config.reservoir == ReservoirKind::dense) return "random";
  return to_string(config.sampler) + (config.include_target_pole ? "+target" : "");
}

std::string ExperimentResult::reservoir_label() const {
  if (config.reservoir == ReservoirKind::diagonal) return "diagonal";
  return "dense:kappa=" + format_double(config.sparsity) +
         ":radius=" + format_double(config.spectral_radius);
}

ExperimentResult projection_scaling(const MonteCarloConfig& cfg) {
  cfg.validate();
  const auto table = run_trials(cfg, cfg.reservoir_sizes.size(), [&](int t, std::span<double> out) {
    Rng rt = stream(cfg, t, Purpose::target);
    const Pole<double> alpha(UniformPrior<double>(cfg.alpha0)(rt));
    for (std::size_t k = 0; k < cfg.reservoir_sizes.size(); ++k) {
      Poles poles = draw_poles(cfg, t, cfg.reservoir_sizes[k]);
      if (cfg.include_target_pole) poles.front() = alpha;
      out[k] = project(PoleSet<double>(poles), alpha).error;
    }
  });
  return aggregate(cfg, "projection_error", table, 0, 1);
}

ExperimentResult sequence_scaling(const MonteCarloConfig& cfg) {
  cfg.validate();
  const auto table = run_trials(cfg, cfg.reservoir_sizes.size(), [&](int t, std::span<double> out) {
    Rng rt = stream(cfg, t, Purpose::target);
    const Pole<double> alpha(UniformPrior<double>(cfg.alpha0)(rt));
    Rng ri = stream(cfg, t, Purpose::train_input);
    const Signal<double> x = white_noise(ri, cfg.sequence_length);
    const double scale = std::sqrt(1 - alpha.value() * alpha.value());
    const Signal<double> y_lti = scale * filter(system_from_poles(Poles{alpha}), x);

    for (std::size_t k = 0; k < cfg.reservoir_sizes.size(); ++k) {
      Poles poles = draw_poles(cfg, t, cfg.reservoir_sizes[k]);
      if (cfg.include_target_pole) poles.front() = alpha;
      const PoleSet<double> set(poles);
      const auto proj = project(set, alpha);
      const auto model = EsnModel<double>(DiagonalReservoir<double>(set)).with_output_weights(proj.weights);
      out[k] = (y_lti - predict(model, x)).squaredNorm() / cfg.sequence_length;
    }
  });
  return aggregate(cfg, "sequence_error", table, 0, 1);
}

LossCurves train_test(const MonteCarloConfig& cfg) {
  cfg.validate();
  return run_train_test(cfg);
}

InterconnectedResult interconnected(const MonteCarloConfig& cfg) {
  MonteCarloConfig dense = cfg;
  dense.reservoir = ReservoirKind::dense;
  dense.include_target_pole = false;
  dense.validate();
  MonteCarloConfig baseline = cfg;
  baseline.reservoir = ReservoirKind::diagonal;
  baseline.sampler = SamplerKind::optimal;
  baseline.include_target_pole = false;
  return {run_train_test(dense), run_train_test(baseline)};
}

LossCurves higher_order(const MonteCarloConfig& cfg) {
  cfg.validate();
  return run_train_test(cfg);
}

double fit_loglog_slope(const ExperimentResult& result) {
  const auto& rows = result.rows;
  if (rows.size() < 3) throw std::invalid_argument("fit_loglog_slope: need at least 3 rows");
  double sx = 0, sy = 0;
  for (const auto& r : rows) {
    if (!(r.mean > 0)) throw std::domain_error("fit_loglog_slope: non-positive mean");
    sx += std::log(static_cast<double>(r.reservoir_size));
    sy += std::log(r.mean);
  }
  const double n = static_cast<double>(rows.size());
  const double mx = sx / n, my = sy / n;
  double sxy = 0, sxx = 0;
  for (const auto& r : rows) {
    const double dx = std::log(static_cast<double>(r.reservoir_size)) - mx;
    sxy += dx * (std::log(r.mean) - my);
    sxx += dx * dx;
  }
  if (!(sxx > 0)) throw std::invalid_argument("fit_loglog_slope: reservoir sizes must differ");
  return sxy / sxx;
}

double aic_optimal_order_real(long long n_train_sequences) {
  if (n_train_sequences < 1) throw std::invalid_argument("aic: N_p must be positive");
  return std::pow(4.0 * static_cast<double>(n_train_sequences), 0.2);
}

int aic_optimal_order(long long n_train_sequences) {
  return std::max(1, static_cast<int>(std::lround(aic_optimal_order_real(n_train_sequences))));
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

void write_csv(std::ostream& os, std::span<const ExperimentResult> results) {
  os << "metric,M,mean,stderr,n_sim,sampler,reservoir,seed\n";
  for (const auto& r : results) {
    for (const auto& row : r.rows) {
      os << r.metric << ',' << row.reservoir_size << ',' << format_double(row.mean) << ','
         << format_double(row.stderr_of_mean) << ',' << r.config.n_sim << ',' << r.sampler_label()
         << ',' << r.reservoir_label() << ',' << r.config.base_seed << '\n';
    }
  }
}

std::string to_json(std::span<const ExperimentResult> results) {
  nlohmann::ordered_json doc = nlohmann::ordered_json::array();
  for (const auto& r : results) {
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (const auto& row : r.rows)
      rows.push_back({{"M", row.reservoir_size}, {"mean", row.mean}, {"stderr", row.stderr_of_mean}});
    const auto& c = r.config;
    doc.push_back({
        {"metric", r.metric},
        {"n_sim", c.n_sim},
        {"sampler", r.sampler_label()},
        {"reservoir", r.reservoir_label()},
        {"seed", c.base_seed},
        {"config",
         {{"alpha0", c.alpha0},
          {"sizes", c.reservoir_sizes},
          {"length", c.sequence_length},
          {"np", c.n_train_sequences},
          {"nd", c.n_test_sequences},
          {"order", c.target_order}}},
        {"rows", rows},
    });
  }
  return doc.dump(2);
}

}  // namespace lesn
