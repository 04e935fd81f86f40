#include "lesn/reservoir.hpp"

#include "doctest.h"
#include "oracles.hpp"

using namespace lesn;
using Vec = Vector<double>;
using Mat = Matrix<double>;

namespace {

Vec normal_signal(Rng& rng, Eigen::Index n) {
  std::normal_distribution<double> normal;
  Vec x(n);
  for (Eigen::Index i = 0; i < n; ++i) x(i) = normal(rng);
  return x;
}

Mat random_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
  Mat m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = uniform(rng, -1.0, 1.0);
  return m;
}

EsnModel<double> diagonal_model(std::initializer_list<double> poles) {
  return EsnModel<double>(DiagonalReservoir<double>(PoleSet<double>(poles)));
}

}  // namespace

TEST_CASE("run_states on a diagonal reservoir") {
  const auto model = diagonal_model({0.5, -0.3, 0.9});
  SUBCASE("impulse reproduces impulse responses") {
    const Mat x = run_states(model, unit_impulse(30));
    for (Eigen::Index m = 0; m < 3; ++m)
      for (int n = 0; n < 30; ++n)
        CHECK(x(m, n) == impulse_response(Pole<double>(std::get<0>(model.reservoir()).poles(m)), n));
  }
  SUBCASE("input weights scale the response") {
    Vec w_in(3);
    w_in << 2.0, -1.0, 0.5;
    const EsnModel<double> scaled(DiagonalReservoir<double>(PoleSet<double>{0.5, -0.3, 0.9}), w_in);
    const Mat x = run_states(scaled, unit_impulse(10));
    for (int n = 0; n < 10; ++n) CHECK(x(0, n) == doctest::Approx(2.0 * std::pow(0.5, n)));
  }
  SUBCASE("zero input") {
    CHECK(run_states(model, Vec::Zero(20)).isZero(0));
  }
}

TEST_CASE("run_states on a dense reservoir matches hand recursion") {
  Rng rng(2);
  const Mat w = random_matrix(rng, 3, 3) * 0.4;
  const Vec w_in = random_matrix(rng, 3, 1);
  const Vec input = normal_signal(rng, 5);
  const EsnModel<double> model(DenseReservoir<double>{w, 0.0, spectral_radius(w)}, w_in);
  const Mat x = run_states(model, input);
  Vec state = Vec::Zero(3);
  for (int n = 0; n < 5; ++n) {
    Vec next(3);
    for (int i = 0; i < 3; ++i) {
      next(i) = w_in(i) * input(n);
      for (int j = 0; j < 3; ++j) next(i) += w(i, j) * state(j);
    }
    state = next;
    CHECK((x.col(n) - state).cwiseAbs().maxCoeff() <= 1e-14);
  }
}

TEST_CASE("EsnModel") {
  const auto model = diagonal_model({0.1, 0.2});
  CHECK(model.size() == 2);
  CHECK(model.is_diagonal());
  CHECK_FALSE(model.trained());
  CHECK_THROWS_AS(model.output_weights(), std::logic_error);
  CHECK_THROWS_AS(predict(model, Vec::Ones(3)), std::logic_error);
  CHECK_THROWS_AS(model.with_output_weights(Vec::Ones(3)), std::invalid_argument);
  CHECK_THROWS_AS(EsnModel<double>(DiagonalReservoir<double>(PoleSet<double>{0.1}), Vec::Ones(2)),
                  std::invalid_argument);
  Vec bad(1);
  bad << 1.5;
  CHECK_THROWS_AS(DiagonalReservoir<double>{bad}, std::domain_error);
}

TEST_CASE("train") {
  Rng rng(7);

  SUBCASE("realizable target is recovered exactly") {
    const auto model = diagonal_model({0.9, 0.3, -0.4, -0.8});
    Vec w_true(4);
    w_true << 0.5, -1.2, 2.0, 0.25;
    const Vec input = normal_signal(rng, 200);
    const Vec target = run_states(model, input).transpose() * w_true;
    const auto fit = train(model, std::vector<Vec>{input}, std::vector<Vec>{target});
    CHECK((fit.model.output_weights() - w_true).cwiseAbs().maxCoeff() <= 1e-8);
    CHECK(fit.training_loss < 1e-16);
    CHECK(fit.rank == 4);
  }

  SUBCASE("target pole in the reservoir") {
    const auto model = diagonal_model({-0.7, 0.2, 0.6});
    const Vec input = normal_signal(rng, 300);
    const Vec target = filter(system_from_poles(std::vector<Pole<double>>{Pole<double>(0.2)}), input);
    CHECK(train(model, std::vector<Vec>{input}, std::vector<Vec>{target}).training_loss < 1e-12);
  }

  SUBCASE("long impulse regression converges to the projection weights") {
    const auto model = diagonal_model({-0.5, 0.5});
    const Vec input = unit_impulse(10'000);
    const Vec target = unit_impulse(10'000);  // pole 0: the unit impulse itself
    const auto fit = train(model, std::vector<Vec>{input}, std::vector<Vec>{target});
    const auto proj = project(PoleSet<double>{-0.5, 0.5}, Pole<double>(0.0));
    // Target normalisation sqrt(1 - 0^2) = 1.
    CHECK((fit.model.output_weights() - proj.weights).cwiseAbs().maxCoeff() <= 1e-4);
  }

  SUBCASE("multiple sequences and washout") {
    const auto model = diagonal_model({0.8, -0.1});
    std::vector<Vec> inputs, targets;
    for (int p = 0; p < 3; ++p) {
      inputs.push_back(normal_signal(rng, 50));
      targets.push_back(run_states(model, inputs.back()).transpose() * Vec::Ones(2));
    }
    const auto fit = train(model, inputs, targets, TrainConfig{1e-12, 10});
    CHECK((fit.model.output_weights() - Vec::Ones(2)).cwiseAbs().maxCoeff() <= 1e-10);
  }

  SUBCASE("trained weights are a local minimum") {
    const auto model = diagonal_model({0.9, 0.5, 0.0, -0.5, -0.9});
    const Vec input = normal_signal(rng, 400);
    const Vec target = filter(system_from_poles(std::vector<Pole<double>>{Pole<double>(0.7)}), input);
    const auto fit = train(model, std::vector<Vec>{input}, std::vector<Vec>{target});
    const Mat states = run_states(model, input);
    const auto loss = [&](const Vec& w) { return (states.transpose() * w - target).squaredNorm() / 400.0; };
    const double base = loss(fit.model.output_weights());
    CHECK(base == doctest::Approx(fit.training_loss).epsilon(1e-9));
    for (int k = 0; k < 200; ++k) {
      Vec dir = random_matrix(rng, 5, 1);
      dir.normalize();
      CHECK(loss(fit.model.output_weights() + 1e-3 * dir) >= base);
    }
  }

  SUBCASE("appending a neuron never increases training loss") {
    const Vec input = normal_signal(rng, 300);
    const Vec target = filter(system_from_poles(std::vector<Pole<double>>{Pole<double>(0.33)}), input);
    std::vector<double> poles;
    double previous = std::numeric_limits<double>::infinity();
    for (int m = 0; m < 12; ++m) {
      poles.push_back(uniform(rng, -0.95, 0.95));
      Vec v = Eigen::Map<Vec>(poles.data(), m + 1);
      const EsnModel<double> model{DiagonalReservoir<double>(v)};
      const double l = train(model, std::vector<Vec>{input}, std::vector<Vec>{target}).training_loss;
      CHECK(l <= previous + 1e-12);
      previous = l;
    }
  }

  SUBCASE("predict reproduces the training loss and is linear") {
    const auto model = diagonal_model({0.4, -0.6, 0.85});
    const Vec input = normal_signal(rng, 100);
    const Vec target = normal_signal(rng, 100);
    const auto fit = train(model, std::vector<Vec>{input}, std::vector<Vec>{target});
    const Vec y = predict(fit.model, input);
    CHECK((y - target).squaredNorm() / 100.0 == doctest::Approx(fit.training_loss).epsilon(1e-10));
    const Vec y3 = predict(fit.model, (3.0 * input).eval());
    CHECK((y3 - 3.0 * y).cwiseAbs().maxCoeff() <= 1e-10);
  }

  SUBCASE("errors") {
    const auto model = diagonal_model({0.4});
    CHECK_THROWS_AS(train(model, std::vector<Vec>{Vec::Zero(10)}, std::vector<Vec>{Vec::Ones(10)}),
                    std::domain_error);
    CHECK_THROWS_AS(train(model, std::vector<Vec>{Vec::Ones(10)}, std::vector<Vec>{Vec::Ones(9)}),
                    std::invalid_argument);
    CHECK_THROWS_AS(train(model, std::vector<Vec>{}, std::vector<Vec>{}), std::invalid_argument);
    CHECK_THROWS_AS(train(model, std::vector<Vec>{Vec::Ones(3)}, std::vector<Vec>{Vec::Ones(3)}, TrainConfig{1e-12, 5}),
                    std::invalid_argument);
    Vec nan = Vec::Ones(3);
    nan(1) = std::nan("");
    CHECK_THROWS(train(model, std::vector<Vec>{nan}, std::vector<Vec>{Vec::Ones(3)}));
  }
}

TEST_CASE("random_dense_reservoir") {
  Rng rng(19);
  SUBCASE("scalar reservoir") {
    const auto r = random_dense_reservoir<double>(1, 0.0, 0.95, rng);
    CHECK(std::abs(std::abs(r.weights(0, 0)) - 0.95) <= 1e-15);
  }
  SUBCASE("sparsity and radius") {
    const auto r = random_dense_reservoir<double>(50, 0.5, 0.95, rng);
    const auto zeros = (r.weights.array() == 0.0).count();
    CHECK(zeros >= 1250 - 106);
    CHECK(zeros <= 1250 + 106);
    CHECK(std::abs(spectral_radius(r.weights) - 0.95) <= 1e-8);
  }
  SUBCASE("radius after scaling for many draws") {
    for (int rep = 0; rep < 50; ++rep) {
      const auto r = random_dense_reservoir<double>(2 + rep % 20, 0.2, 0.95, rng);
      CHECK(std::abs(spectral_radius(r.weights) - 0.95) <= 1e-8);
    }
  }
  SUBCASE("invalid arguments") {
    CHECK_THROWS_AS(random_dense_reservoir<double>(0, 0.2, 0.95, rng), std::invalid_argument);
    CHECK_THROWS_AS(random_dense_reservoir<double>(3, 1.0, 0.95, rng), std::invalid_argument);
    CHECK_THROWS_AS(random_dense_reservoir<double>(3, 0.2, 1.0, rng), std::invalid_argument);
  }
  SUBCASE("deterministic per seed") {
    Rng a(5), b(5);
    CHECK(random_dense_reservoir<double>(10, 0.3, 0.9, a).weights ==
          random_dense_reservoir<double>(10, 0.3, 0.9, b).weights);
  }
}

TEST_CASE("diagonalize_check") {
  Rng rng(43);
  const Vec input = normal_signal(rng, 300);
  const Vec target = normal_signal(rng, 300);

  SUBCASE("symmetric reservoir") {
    const Mat a = random_matrix(rng, 5, 5);
    Mat w = (a + a.transpose()) / 2;
    w *= 0.9 / spectral_radius(w);
    const Vec w_in = random_matrix(rng, 5, 1);
    const auto rep = diagonalize_check(DenseReservoir<double>{w, 0.0, 0.9}, w_in, input, target);
    REQUIRE(rep.checked);
    CHECK(std::abs(rep.dense_loss - rep.diagonal_loss) <= 1e-8);
    CHECK(rep.mapped_output_residual <= 1e-8);
  }
  SUBCASE("diagonal reservoir is the identity transformation") {
    Mat w = Mat::Zero(4, 4);
    w.diagonal() << 0.5, -0.2, 0.8, 0.1;
    const Vec w_in = random_matrix(rng, 4, 1);
    const auto rep = diagonalize_check(DenseReservoir<double>{w, 0.0, 0.8}, w_in, input, target);
    REQUIRE(rep.checked);
    CHECK(rep.eigenvectors == Mat::Identity(4, 4));
    CHECK(rep.transformed_input == w_in);
    CHECK(std::abs(rep.dense_loss - rep.diagonal_loss) <= 1e-14);
  }
  SUBCASE("constructed diagonalisable reservoir") {
    for (int trial = 0; trial < 10; ++trial) {
      Vec lambda(6);
      lambda << -0.8, -0.4, 0.05, 0.3, 0.6, 0.9;
      Mat q = Mat::Identity(6, 6) + 0.3 * random_matrix(rng, 6, 6);
      const Mat w = q * lambda.asDiagonal() * q.inverse();
      const Vec w_in = random_matrix(rng, 6, 1);
      const auto rep = diagonalize_check(DenseReservoir<double>{w, 0.0, 0.9}, w_in, input, target);
      REQUIRE(rep.checked);
      CHECK(std::abs(rep.dense_loss - rep.diagonal_loss) <= 1e-7);
    }
  }
  SUBCASE("complex spectrum is skipped") {
    Mat w(2, 2);
    w << 0.0, -0.5, 0.5, 0.0;
    const auto rep = diagonalize_check(DenseReservoir<double>{w, 0.0, 0.5}, Vec(Vec::Ones(2)), input, target);
    CHECK_FALSE(rep.checked);
    CHECK_FALSE(rep.diagnostic.empty());
  }
  SUBCASE("ill-conditioned eigenbasis is skipped") {
    Mat w(2, 2);
    w << 0.5, 1.0, 0.0, 0.5 + 1e-9;
    const auto rep = diagonalize_check(DenseReservoir<double>{w, 0.0, 0.5}, Vec(Vec::Ones(2)), input, target);
    CHECK_FALSE(rep.checked);
    CHECK(rep.condition_number > 1e8);
  }
}
