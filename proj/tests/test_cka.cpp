#include "repshare/cka.hpp"
#include "repshare/error.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

#include <Eigen/QR>
#include <doctest.h>

#include <cmath>
#include <random>

using namespace repshare;
using test_support::random_tensor;

namespace {

Eigen::MatrixXd gaussian(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng);
  return m;
}

Eigen::MatrixXd random_orthogonal(Eigen::Index p, std::mt19937_64& rng) {
  return Eigen::HouseholderQR<Eigen::MatrixXd>(gaussian(p, p, rng)).householderQ();
}

}  // namespace

TEST_CASE("gram_linear hand examples") {
  Eigen::MatrixXd x(2, 2);
  x << 1, 0, 0, 1;
  CHECK(gram_linear(x).isApprox(Eigen::MatrixXd::Identity(2, 2)));

  Eigen::MatrixXd x3(3, 2);
  x3 << 1, 0, 0, 1, 1, 1;
  Eigen::MatrixXd expected(3, 3);
  expected << 1, 0, 1, 0, 1, 1, 1, 1, 2;
  CHECK(gram_linear(x3) == expected);

  Eigen::MatrixXd one(1, 2);
  one << 1, 1;
  CHECK_THROWS_AS(gram_linear(one), DegenerateInput);
}

TEST_CASE("cka hand example matches brute-force evaluation") {
  Eigen::MatrixXd x(3, 2);
  x << 1, 0, 0, 1, 1, 1;
  Eigen::MatrixXd y(3, 1);
  y << 1, 2, 3;
  // Frozen from an exact rational evaluation: (1/4) / sqrt(5/18) = sqrt(3.6) / 4.
  const double frozen = 0.47434164902525688;
  const double brute = oracle::cka_bruteforce({{1, 0}, {0, 1}, {1, 1}}, {{1}, {2}, {3}});
  CHECK(brute == doctest::Approx(frozen).epsilon(1e-15));
  CHECK(std::abs(cka(x, y) - frozen) <= 1e-9);
  CHECK(std::abs(cka(x, y) - std::sqrt(3.6) / 4.0) <= 1e-12);
}

TEST_CASE("cka agrees with brute force on random inputs of differing widths") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const Tensor x = random_tensor({9, 2, 3, 2}, rng);
    const Tensor y = random_tensor({9, 5}, rng);
    CHECK(std::abs(cka(x, y) - oracle::cka_bruteforce(oracle::to_matrix(x), oracle::to_matrix(y))) <= 1e-9);
  }
}

TEST_CASE("cka invariants") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 25; ++trial) {
    const Eigen::MatrixXd x = gaussian(12, 6, rng);
    const Eigen::MatrixXd y = gaussian(12, 4, rng);
    const double s = cka(x, y);
    CHECK(s >= 0.0);
    CHECK(s <= 1.0);
    CHECK(std::abs(cka(x, x) - 1.0) <= 1e-9);
    CHECK(std::abs(cka(y, x) - s) <= 1e-12);
    CHECK(std::abs(cka(-2.5 * x, 0.01 * y) - s) <= 1e-9);
    CHECK(std::abs(cka(x * random_orthogonal(6, rng), y) - s) <= 1e-6);
    CHECK(std::abs(cka(x, x * random_orthogonal(6, rng)) - 1.0) <= 1e-6);
  }
}

TEST_CASE("two-example inputs are always perfectly similar") {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 10; ++trial) {
    CHECK(std::abs(cka(gaussian(2, 3, rng), gaussian(2, 7, rng)) - 1.0) <= 1e-9);
  }
}

TEST_CASE("cka error paths") {
  Eigen::MatrixXd same = Eigen::MatrixXd::Constant(4, 3, 0.1);
  Eigen::MatrixXd y(4, 1);
  y << 1, 2, 3, 4;
  CHECK_THROWS_AS(cka(same, y), UndefinedSimilarity);
  CHECK_THROWS_AS(cka(Eigen::MatrixXd::Zero(4, 2), y), UndefinedSimilarity);
  CHECK_THROWS_AS(cka(Eigen::MatrixXd::Ones(5, 2), y), ShapeError);
}

TEST_CASE("cka is deterministic and independent of thread count") {
  std::mt19937_64 rng(13);
  const Tensor x = random_tensor({40, 8, 4, 4}, rng);
  const Tensor y = random_tensor({40, 3, 8, 8}, rng);
  const double first = cka(x, y);
  set_thread_count(4);
  const double threaded = cka(x, y);
  set_thread_count(1);
  CHECK(first == cka(x, y));
  CHECK(first == threaded);
}

TEST_CASE("similarity matrices") {
  std::mt19937_64 rng(17);
  RepresentationSet a, b;
  a.add(0, random_tensor({10, 4, 2, 2}, rng));
  a.add(1, random_tensor({10, 8, 1, 1}, rng));
  a.add(2, random_tensor({10, 2, 3, 3}, rng));

  SUBCASE("identical dumps have a unit diagonal") {
    const auto sim = similarity_matrix(a, a, SimilarityMode::cross_stage);
    for (Eigen::Index i = 0; i < 3; ++i) CHECK(std::abs(sim.values(i, i) - 1.0) <= 1e-9);
    CHECK((sim.values.array() >= 0.0).all());
    CHECK((sim.values.array() <= 1.0).all());
    CHECK(sim.values(0, 2) == cka(a.at(0), a.at(2)));
  }
  SUBCASE("same-stage fills only the diagonal") {
    const auto sim = similarity_matrix(a, a, SimilarityMode::same_stage);
    CHECK(sim.has(1, 1));
    CHECK_FALSE(sim.has(0, 1));
    CHECK_THROWS_AS(sim.at(0, 1), PlanError);
  }
  SUBCASE("same-stage needs equal stage counts") {
    b.add(0, random_tensor({10, 3}, rng));
    CHECK_THROWS_AS(similarity_matrix(a, b, SimilarityMode::same_stage), ShapeError);
    CHECK_NOTHROW(similarity_matrix(a, b, SimilarityMode::cross_stage));
  }
  SUBCASE("mismatched batches name both n") {
    b.add(0, random_tensor({12, 3}, rng));
    try {
      similarity_matrix(a, b, SimilarityMode::cross_stage);
      FAIL("expected ShapeError");
    } catch (const ShapeError& e) {
      CHECK(std::string(e.what()).find("n = 10") != std::string::npos);
      CHECK(std::string(e.what()).find("n = 12") != std::string::npos);
    }
  }
  SUBCASE("noise added after stage 1 lowers stage-2 similarity") {
    RepresentationSet clean, noisy;
    const Tensor s1 = random_tensor({16, 6}, rng);
    const Tensor s2 = random_tensor({16, 6}, rng);
    clean.add(1, s1);
    clean.add(2, s2);
    Tensor corrupted = s2;
    const Tensor noise = random_tensor({16, 6}, rng);
    for (std::size_t i = 0; i < corrupted.size(); ++i) corrupted[i] += noise[i];
    noisy.add(1, s1);
    noisy.add(2, corrupted);
    const auto sim = similarity_matrix(clean, noisy, SimilarityMode::same_stage);
    CHECK(sim.at(2, 2) < sim.at(1, 1));
  }
}

TEST_CASE("similarity serialization") {
  SimilarityMatrix sim;
  sim.stages_a = {0, 3};
  sim.stages_b = {1, 2};
  sim.values.resize(2, 2);
  sim.values << 0.5, std::nan(""), 0.25, 1.0;
  const auto back = similarity_from_json(similarity_to_json(sim));
  CHECK(back.stages_a == sim.stages_a);
  CHECK(back.stages_b == sim.stages_b);
  CHECK(back.values(0, 0) == 0.5);
  CHECK(std::isnan(back.values(0, 1)));
  CHECK(similarity_to_csv(sim) == ",1,2\n0,0.5,\n3,0.25,1\n");
  CHECK(similarity_to_json(sim).find("null") != std::string::npos);
  CHECK_THROWS_AS(similarity_from_json("{\"stages_a\": [0]}"), FormatError);
}

TEST_CASE("noise added after the first stage lowers only the later similarity") {
  std::mt19937_64 rng(23);
  const Tensor first = random_tensor({16, 4, 2, 2}, rng);
  const Tensor second = random_tensor({16, 6, 1, 1}, rng);
  Tensor noisy = second;
  const Tensor noise = random_tensor({16, 6, 1, 1}, rng);
  for (std::size_t i = 0; i < noisy.size(); ++i) noisy[i] += noise[i];

  RepresentationSet a, b;
  a.add(1, first);
  a.add(2, second);
  b.add(1, first);
  b.add(2, noisy);
  const auto sim = similarity_matrix(a, b, SimilarityMode::same_stage);
  CHECK(sim.at(2, 2) < sim.at(1, 1));
  CHECK(std::abs(sim.at(1, 1) - 1.0) <= 1e-9);
}
