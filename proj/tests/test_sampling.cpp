#include "lesn/sampling.hpp"

#include "doctest.h"
#include "oracles.hpp"

#include <numeric>

using namespace lesn;

namespace {

std::vector<double> values(const std::vector<Pole<double>>& poles) {
  std::vector<double> out;
  out.reserve(poles.size());
  for (const auto& p : poles) out.push_back(p.value());
  return out;
}

}  // namespace

TEST_CASE("substream seeds") {
  CHECK(substream_seed(1, 0, 1) != substream_seed(1, 1, 1));
  CHECK(substream_seed(1, 0, 1) != substream_seed(1, 0, 2));
  CHECK(substream_seed(1, 0, 1) != substream_seed(2, 0, 1));
  CHECK(substream_seed(9, 4, 3) == substream_seed(9, 4, 3));
  Rng rng(1);
  for (int i = 0; i < 1000; ++i) {
    const double u = uniform01(rng);
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
}

TEST_CASE("OptimalPoleDistribution normaliser and density") {
  const OptimalPoleDistribution<double> d(0.95);
  CHECK(d.normalizer() == doctest::Approx(3.6635616461296464).epsilon(1e-14));
  CHECK(std::abs(d.normalizer() - 3.6636) <= 5e-4);
  CHECK(d.pdf(0.0) == doctest::Approx(0.27295842040939740).epsilon(1e-14));
  CHECK(std::abs(d.pdf(0.0) - 0.273) <= 5e-4);
  CHECK(OptimalPoleDistribution<double>(0.8).pdf(0.0) == doctest::Approx(0.45511961331341870).epsilon(1e-14));
  CHECK(d.pdf(0.95) == 0.0);
  CHECK(d.pdf(-0.99) == 0.0);
  CHECK_THROWS_AS(OptimalPoleDistribution<double>(1.0), std::domain_error);
  CHECK_THROWS_AS(OptimalPoleDistribution<double>(0.0), std::domain_error);
}

TEST_CASE("density integrates to one") {
  for (double a0 : {0.5, 0.8, 0.95, 0.99}) {
    const OptimalPoleDistribution<double> d(a0);
    const double mass = oracle::simpson([&](double b) { return 1.0 / (d.normalizer() * (1 - b * b)); },
                                        -a0, a0, 200'000);
    CHECK(std::abs(mass - 1.0) <= 1e-9);
    CHECK(std::abs(d.normalizer() - std::log((1 + a0) / (1 - a0))) <= 1e-12);
  }
}

TEST_CASE("density is even with its minimum at zero") {
  const OptimalPoleDistribution<double> d(0.9);
  double previous = d.pdf(0.0);
  for (int i = 1; i < 900; ++i) {
    const double b = i * 1e-3;
    CHECK(d.pdf(b) == d.pdf(-b));
    CHECK(d.pdf(b) > previous);
    previous = d.pdf(b);
  }
}

TEST_CASE("inverse CDF") {
  const OptimalPoleDistribution<double> d(0.95);
  CHECK(std::abs(d.inverse_cdf(0.5)) <= 1e-15);
  CHECK(d.inverse_cdf(1.0 - 1e-12) < 0.95);
  CHECK(d.inverse_cdf(1.0 - 1e-12) > 0.9499);
  for (double u : {0.01, 0.2, 0.5, 0.77, 0.99}) CHECK(d.cdf(d.inverse_cdf(u)) == doctest::Approx(u).epsilon(1e-12));
  CHECK(d.cdf(-1.0) == 0.0);
  CHECK(d.cdf(0.96) == 1.0);
}

TEST_CASE("rejection sampler") {
  const OptimalPoleDistribution<double> d(0.95);
  Rng rng(substream_seed(7, 0, 2));
  CHECK(d.sample(rng, 0).empty());

  const auto xs = values(d.sample(rng, 100'000));
  for (double x : xs) {
    CHECK(x > -0.95);
    CHECK(x < 0.95);
  }
  CHECK(oracle::ks_one_sample(xs, [&](double b) { return (std::atanh(b) + std::atanh(0.95)) / d.normalizer(); }) < 0.01);

  const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / xs.size();
  double var = 0;
  for (double x : xs) var += (x - mean) * (x - mean);
  const double sd = std::sqrt(var / (xs.size() - 1));
  CHECK(std::abs(mean) <= 3 * sd / std::sqrt(static_cast<double>(xs.size())));

  Rng rng2(substream_seed(7, 1, 2));
  const auto ys = values(d.sample_inverse_cdf(rng2, 100'000));
  CHECK(oracle::ks_two_sample(xs, ys) < 0.012);
}

TEST_CASE("samplers are deterministic per seed") {
  const OptimalPoleDistribution<double> d(0.8);
  Rng a(123), b(123);
  CHECK(values(d.sample(a, 1000)) == values(d.sample(b, 1000)));
  Rng c(123), e(123);
  const UniformPrior<double> prior(0.8);
  CHECK(values(prior.sample(c, 1000)) == values(prior.sample(e, 1000)));
}

TEST_CASE("UniformPrior") {
  const UniformPrior<double> p(0.5);
  CHECK(p.pdf(0.0) == 1.0);
  CHECK(p.pdf(0.6) == 0.0);
  Rng rng(3);
  for (const auto& x : p.sample(rng, 10'000)) CHECK(std::abs(x.value()) < 0.5);
  CHECK_THROWS_AS(UniformPrior<double>(-0.1), std::domain_error);
}

TEST_CASE("reweighted distribution") {
  const OptimalPoleDistribution<double> base(0.95);

  SUBCASE("uniform prior recovers the base density") {
    const auto r = reweighted(base, [](double) { return 1.0 / 1.9; });
    for (double b = -0.94; b < 0.95; b += 0.01) CHECK(std::abs(r.pdf(b) - base.pdf(b)) <= 1e-8);
  }
  SUBCASE("triangular prior") {
    const double a0 = 0.95;
    const auto r = reweighted(base, [a0](double b) { return 1 - std::abs(b) / a0; });
    const double z = 1.2131375398366616;
    CHECK(r.normalizer() == doctest::Approx(z).epsilon(1e-8));
    for (double b : {-0.9, -0.3, 0.0, 0.4, 0.8})
      CHECK(r.pdf(b) == doctest::Approx((1 - std::abs(b) / a0) / (1 - b * b) / z).epsilon(1e-8));
    const double mass = oracle::simpson([&](double b) { return r.pdf(b); }, -a0, a0, 200'000);
    CHECK(std::abs(mass - 1) <= 1e-6);
    CHECK(r.pdf(0.0) >= 0.0);
    CHECK(r.envelope() >= 1 / (1 - 0.0));
  }
  SUBCASE("one-sided prior yields positive draws") {
    const auto r = reweighted(base, [](double b) { return b > 0 ? 1.0 : 0.0; });
    Rng rng(11);
    for (const auto& x : r.sample(rng, 5000)) CHECK(x.value() > 0.0);
  }
  SUBCASE("sampler matches its density") {
    const double a0 = 0.95;
    const auto r = reweighted(base, [a0](double b) { return 1 - std::abs(b) / a0; });
    Rng rng(13);
    const auto xs = values(r.sample(rng, 50'000));
    const auto cdf = [&](double x) { return oracle::simpson([&](double b) { return r.pdf(b); }, -a0, x, 2000); };
    CHECK(oracle::ks_one_sample(xs, cdf) < 0.01);
  }
  SUBCASE("invalid priors") {
    CHECK_THROWS_AS(reweighted(base, [](double) { return 0.0; }), std::domain_error);
    CHECK_THROWS_AS(reweighted(base, [](double b) { return b; }), std::domain_error);
    CHECK_THROWS_AS(reweighted(base, {}), std::invalid_argument);
  }
}
