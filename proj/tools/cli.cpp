#include "cli.hpp"

#include "lesn/experiments.hpp"
#include "lesn/projection.hpp"
#include "lesn/sampling.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace lesn::cli {

namespace {

std::vector<int> parse_sizes(const std::string& text) {
  std::vector<int> sizes;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    const int m = std::stoi(item, &used);
    if (used != item.size()) throw std::invalid_argument("bad reservoir size '" + item + "'");
    sizes.push_back(m);
  }
  if (sizes.empty()) throw std::invalid_argument("empty --sizes list");
  return sizes;
}

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> values;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    values.push_back(std::stod(item, &used));
    if (used != item.size()) throw std::invalid_argument("bad number '" + item + "'");
  }
  return values;
}

/// Flag values shared by every experiment subcommand.
struct Options {
  MonteCarloConfig mc;
  std::string sizes = "4,8,16,32,64";
  std::string sampler = "optimal";
  std::string reservoir = "diagonal";
  std::string format = "csv";
  std::string output = "-";
  std::string config;

  // pdf / sample / project / aic
  int points = 1001;
  int count = 1000;
  std::string method = "rejection";
  double alpha = 0;
  std::string poles;
  int grid = 0;
  double range = 1.0;
  long long np_aic = 100000;
};

enum Flag : unsigned {
  kNSim = 1u << 0,
  kSizes = 1u << 1,
  kAlpha0 = 1u << 2,
  kLength = 1u << 3,
  kNp = 1u << 4,
  kNd = 1u << 5,
  kSampler = 1u << 6,
  kReservoir = 1u << 7,
  kDense = 1u << 8,
  kOrder = 1u << 9,
  kSeed = 1u << 10,
  kJobs = 1u << 11,
  kIncludeTarget = 1u << 12,
  kFormat = 1u << 13,
};

void add_common(CLI::App* sub, Options& o, unsigned flags) {
  auto& mc = o.mc;
  if (flags & kNSim) sub->add_option("--n-sim", mc.n_sim, "Monte-Carlo trials")->check(CLI::PositiveNumber);
  if (flags & kSizes) sub->add_option("--sizes", o.sizes, "Comma-separated reservoir sizes M");
  if (flags & kAlpha0)
    sub->add_option("--alpha0", mc.alpha0, "Design range (-alpha0, alpha0)")->check(CLI::Range(0.0, 1.0));
  if (flags & kLength) sub->add_option("--length", mc.sequence_length, "Sequence length L")->check(CLI::PositiveNumber);
  if (flags & kNp) sub->add_option("--np", mc.n_train_sequences, "Training sequences N_p")->check(CLI::PositiveNumber);
  if (flags & kNd) sub->add_option("--nd", mc.n_test_sequences, "Test sequences N_d")->check(CLI::PositiveNumber);
  if (flags & kSampler)
    sub->add_option("--sampler", o.sampler, "Pole sampler")->check(CLI::IsMember({"optimal", "uniform", "grid"}));
  if (flags & kReservoir)
    sub->add_option("--reservoir", o.reservoir, "Reservoir kind")->check(CLI::IsMember({"diagonal", "dense"}));
  if (flags & kDense) {
    sub->add_option("--kappa", mc.sparsity, "Dense reservoir sparsity");
    sub->add_option("--radius", mc.spectral_radius, "Dense reservoir spectral radius");
  }
  if (flags & kOrder) sub->add_option("--order", mc.target_order, "Target denominator order K_den")->check(CLI::PositiveNumber);
  if (flags & kSeed) sub->add_option("--seed", mc.base_seed, "Base seed");
  if (flags & kJobs) sub->add_option("--jobs", mc.jobs, "Worker threads")->check(CLI::PositiveNumber);
  if (flags & kIncludeTarget)
    sub->add_flag("--include-target", mc.include_target_pole, "Put the target pole in the reservoir");
  if (flags & kFormat) sub->add_option("--format", o.format, "Output format")->check(CLI::IsMember({"csv", "json"}));
  sub->add_option("--output,-o", o.output, "Output path ('-' for standard output)");
  sub->add_option("--config", o.config, "JSON file whose keys are flag names; flags override it");
}

/// Reads --config from the raw arguments and splices its entries in front of
/// the explicit flags, which therefore take precedence.
std::vector<std::string> expand_config(const std::vector<std::string>& args, const CLI::App& app) {
  std::string path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
    else if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
  }
  if (path.empty() || args.empty()) return args;

  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read config file '" + path + "'");
  const auto doc = nlohmann::json::parse(in);
  if (!doc.is_object()) throw std::runtime_error("config file must hold a JSON object");

  const CLI::App* sub = nullptr;
  for (const auto* s : app.get_subcommands({})) {
    if (s->get_name() == args.front()) sub = s;
  }
  if (sub == nullptr) return args;

  std::vector<std::string> tokens;
  for (const auto& [key, value] : doc.items()) {
    if (key == "config") throw std::runtime_error("config file may not name another config");
    const CLI::Option* opt = sub->get_option_no_throw("--" + key);
    if (opt == nullptr) throw std::runtime_error("unknown config key '" + key + "'");
    if (value.is_boolean()) {
      if (opt->get_expected_max() != 0) throw std::runtime_error("config key '" + key + "' is not a flag");
      if (value.get<bool>()) tokens.push_back("--" + key);
      continue;
    }
    tokens.push_back("--" + key);
    if (value.is_string()) {
      tokens.push_back(value.get<std::string>());
    } else if (value.is_array()) {
      std::string joined;
      for (const auto& v : value) joined += (joined.empty() ? "" : ",") + v.dump();
      tokens.push_back(joined);
    } else {
      tokens.push_back(value.dump());
    }
  }

  std::vector<std::string> out{args.front()};
  out.insert(out.end(), tokens.begin(), tokens.end());
  out.insert(out.end(), args.begin() + 1, args.end());
  return out;
}

void emit(const Options& o, std::ostream& out, const std::function<void(std::ostream&)>& body) {
  std::ostringstream buffer;
  body(buffer);
  if (o.output == "-") {
    out << buffer.str();
    return;
  }
  std::ofstream file(o.output, std::ios::binary);
  if (!file) throw std::runtime_error("cannot open output '" + o.output + "'");
  file << buffer.str();
  if (!file) throw std::runtime_error("failed writing '" + o.output + "'");
}

void emit_results(const Options& o, std::ostream& out, const std::vector<ExperimentResult>& results) {
  emit(o, out, [&](std::ostream& os) {
    if (o.format == "json") os << to_json(results) << '\n';
    else write_csv(os, results);
  });
}

MonteCarloConfig finish_config(Options& o) {
  MonteCarloConfig cfg = o.mc;
  cfg.reservoir_sizes = parse_sizes(o.sizes);
  cfg.sampler = parse_sampler(o.sampler);
  cfg.reservoir = parse_reservoir(o.reservoir);
  cfg.validate();
  return cfg;
}

}  // namespace

int run(const std::vector<std::string>& raw_args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Linear echo state network experiments", "lesn"};
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

  // Separate option blocks per subcommand so defaults can differ.
  std::map<std::string, Options> opts;
  auto make = [&](const std::string& name, const std::string& help) {
    return std::pair{app.add_subcommand(name, help), &opts[name]};
  };

  auto [pdf, o_pdf] = make("pdf", "Optimal pole density on a beta grid (CSV beta,density)");
  add_common(pdf, *o_pdf, kAlpha0);
  pdf->add_option("--points", o_pdf->points, "Grid points inside (-alpha0, alpha0)")->check(CLI::PositiveNumber);

  auto [smp, o_smp] = make("sample", "Draw reservoir poles (CSV beta)");
  add_common(smp, *o_smp, kAlpha0 | kSeed);
  smp->add_option("--count", o_smp->count, "Number of draws")->check(CLI::NonNegativeNumber);
  smp->add_option("--method", o_smp->method, "Sampler")
      ->check(CLI::IsMember({"rejection", "inverse-cdf", "uniform"}));

  auto [prj, o_prj] = make("project", "Projection error of a first-order target onto a pole set");
  add_common(prj, *o_prj, 0);
  auto* alpha_opt = prj->add_option("--alpha", o_prj->alpha, "Target pole; omit to sweep alpha");
  prj->add_option("--poles", o_prj->poles, "Comma-separated reservoir poles");
  prj->add_option("--grid", o_prj->grid, "Use M evenly spaced poles in (-range, range)")->check(CLI::NonNegativeNumber);
  prj->add_option("--range", o_prj->range, "Half-width of the grid and the alpha sweep")->check(CLI::Range(0.0, 1.0));
  prj->add_option("--points", o_prj->points, "Alpha sweep points")->check(CLI::PositiveNumber);

  const unsigned mc = kNSim | kSizes | kAlpha0 | kSeed | kJobs | kFormat;
  auto [scl, o_scl] = make("scaling", "Mean projection error versus M");
  add_common(scl, *o_scl, mc | kSampler | kIncludeTarget);

  auto [seq, o_seq] = make("sequence", "Mean sequence approximation error versus M");
  o_seq->mc.sequence_length = 1000;
  add_common(seq, *o_seq, mc | kSampler | kLength | kIncludeTarget);

  auto [tt, o_tt] = make("train-test", "Finite-sample train and test loss versus M");
  o_tt->mc.n_sim = 500;
  o_tt->mc.sequence_length = 500;
  add_common(tt, *o_tt, mc | kSampler | kReservoir | kDense | kLength | kNp | kNd | kIncludeTarget);

  auto [ic, o_ic] = make("interconnected", "Dense reservoirs against the optimal diagonal baseline");
  o_ic->mc.n_sim = 500;
  o_ic->mc.sequence_length = 500;
  add_common(ic, *o_ic, mc | kDense | kLength | kNp | kNd);

  auto [ho, o_ho] = make("higher-order", "Train and test loss for higher-order all-pole targets");
  o_ho->mc.n_sim = 500;
  o_ho->mc.sequence_length = 10;
  o_ho->mc.target_order = 3;
  add_common(ho, *o_ho, mc | kSampler | kOrder | kLength | kNp | kNd);

  auto [aic, o_aic] = make("aic", "Order-of-magnitude optimal reservoir size for N_p sequences");
  add_common(aic, *o_aic, 0);
  aic->add_option("--np", o_aic->np_aic, "Training sequences N_p")->check(CLI::PositiveNumber);

  try {
    std::vector<std::string> args = expand_config(raw_args, app);
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }

  try {
    const std::string name = app.get_subcommands().front()->get_name();
    Options& o = opts[name];

    if (name == "pdf") {
      const OptimalPoleDistribution<double> dist(o.mc.alpha0);
      emit(o, out, [&](std::ostream& os) {
        os << "beta,density\n";
        for (int i = 0; i < o.points; ++i) {
          const double beta = -o.mc.alpha0 + 2.0 * o.mc.alpha0 * (i + 0.5) / o.points;
          os << format_double(beta) << ',' << format_double(dist.pdf(beta)) << '\n';
        }
      });
    } else if (name == "sample") {
      Rng rng(o.mc.base_seed);
      std::vector<Pole<double>> draws;
      if (o.method == "rejection") draws = OptimalPoleDistribution<double>(o.mc.alpha0).sample(rng, o.count);
      else if (o.method == "inverse-cdf")
        draws = OptimalPoleDistribution<double>(o.mc.alpha0).sample_inverse_cdf(rng, o.count);
      else draws = UniformPrior<double>(o.mc.alpha0).sample(rng, o.count);
      emit(o, out, [&](std::ostream& os) {
        os << "beta\n";
        for (const auto& p : draws) os << format_double(p.value()) << '\n';
      });
    } else if (name == "project") {
      std::vector<Pole<double>> poles;
      if (o.grid > 0) {
        for (int i = 0; i < o.grid; ++i) poles.emplace_back(-o.range + 2.0 * o.range * (i + 1) / (o.grid + 1));
      }
      for (double v : parse_list(o.poles)) poles.emplace_back(v);
      if (poles.empty()) throw std::invalid_argument("project needs --poles or --grid");
      const PoleSet<double> set(poles);
      std::vector<double> alphas;
      if (alpha_opt->count() > 0) {
        alphas.push_back(o.alpha);
      } else {
        for (int i = 0; i < o.points; ++i) alphas.push_back(-o.range + 2.0 * o.range * (i + 0.5) / o.points);
      }
      emit(o, out, [&](std::ostream& os) {
        os << "alpha,error,rank\n";
        for (double a : alphas) {
          const auto res = project(set, Pole<double>(a));
          os << format_double(a) << ',' << format_double(res.error) << ',' << res.rank << '\n';
        }
      });
    } else if (name == "aic") {
      emit(o, out, [&](std::ostream& os) { os << aic_optimal_order(o.np_aic) << '\n'; });
    } else {
      const MonteCarloConfig cfg = finish_config(o);
      std::vector<ExperimentResult> results;
      if (name == "scaling") {
        results.push_back(projection_scaling(cfg));
      } else if (name == "sequence") {
        results.push_back(sequence_scaling(cfg));
      } else if (name == "train-test") {
        auto r = train_test(cfg);
        results = {std::move(r.train), std::move(r.test)};
      } else if (name == "interconnected") {
        auto r = interconnected(cfg);
        results = {std::move(r.dense.train), std::move(r.dense.test), std::move(r.baseline.train),
                   std::move(r.baseline.test)};
      } else if (name == "higher-order") {
        auto r = higher_order(cfg);
        results = {std::move(r.train), std::move(r.test)};
      }
      emit_results(o, out, results);
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace lesn::cli
