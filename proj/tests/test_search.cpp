#include "doctest.h"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "nstab/gauss_core.hpp"
#include "nstab/partition.hpp"
#include "nstab/product_space.hpp"
#include "nstab/rng.hpp"
#include "nstab/search.hpp"

using namespace nstab;

namespace {

JointDist random_binary(CounterRng& rng) {
  Eigen::MatrixXd p(2, 2);
  for (Eigen::Index i = 0; i < 2; ++i)
    for (Eigen::Index j = 0; j < 2; ++j) p(i, j) = 0.05 + rng.uniform();
  return JointDist(p / p.sum());
}

}  // namespace

TEST_SUITE("search") {

TEST_CASE("cover enumeration") {
  const auto six = enumerate_cover(2, 1, 1, CoverGrid{1.0, 1.0, 1u << 20});
  CHECK(six.size() == 6);
  for (const auto& c : six) {
    const auto p = poly_from_params(1, 1, c.params[0]);
    CHECK(p.variance() == doctest::Approx(1.0).epsilon(1e-9));
  }
  const auto constants = enumerate_cover(3, 2, 0, CoverGrid{1.0, 0.5, 1u << 20});
  CHECK(constants.size() == 3);
  for (const auto& c : constants) CHECK(c.constant_label.has_value());

  const auto three = enumerate_cover(3, 1, 1, CoverGrid{1.0, 1.0, 1u << 20});
  CHECK(three.size() == 6 * 6 * 6);
  CHECK_THROWS(enumerate_cover(3, 2, 2, CoverGrid{1.0, 0.1, 1000}));
  CHECK(poly_basis(2, 2).size() == 6);
}

TEST_CASE("grid search recovers the median halfspace") {
  SearchConfig cfg;
  cfg.samples = 200000;
  const auto r = optimize_stability(cfg);
  CHECK(r.feasible);
  CHECK(std::fabs(r.stability.per_label[0] - 1.0 / 3) <= 0.01);
  CHECK(std::fabs(r.stability.value - 2.0 / 3) <= 0.02);
  // Boundary of the selected PTF (-p, p) with p = c0 + c1 x.
  REQUIRE(r.best_params.size() == 2);
  CHECK(std::fabs(r.best_params[0] / r.best_params[1]) <= 0.05);
  CHECK(r.evaluations <= cfg.budget);
  CHECK_FALSE(r.trace.empty());
}

TEST_CASE("degenerate target gives a constant partition") {
  SearchConfig cfg;
  cfg.target_mu = {1.0, 0.0};
  cfg.samples = 50000;
  const auto r = optimize_stability(cfg);
  CHECK(r.feasible);
  CHECK(r.stability.value == 1.0);
  CHECK(r.measures.mu[0] == 1.0);
}

TEST_CASE("search is reproducible and monotone in budget") {
  SearchConfig cfg;
  cfg.grid.step = 0.25;
  cfg.samples = 100000;
  cfg.budget = 30;
  const auto small = optimize_stability(cfg);
  REQUIRE(small.feasible);
  const auto again = optimize_stability(cfg);
  CHECK(small.stability.value == again.stability.value);
  CHECK(small.best_params == again.best_params);
  cfg.budget = 60;
  const auto big = optimize_stability(cfg);
  CHECK(big.feasible);
  CHECK(big.stability.value >= small.stability.value - 6.0 * small.stability.std_error);
  SearchConfig serial = cfg;
  CHECK(optimize_stability(serial, Exec::serial).stability.value == big.stability.value);
}

TEST_CASE("positive scaling of cover parameters keeps labels") {
  CoverCandidate c;
  c.params = {{0.3, -0.8, 0.5}, {-0.1, 0.4, 0.9}, {0.2, 0.2, -0.7}};
  CoverCandidate scaled = c;
  for (auto& v : scaled.params)
    for (double& x : v) x *= 3.7;
  const auto f = cover_partition(c, 3, 2, 1), g = cover_partition(scaled, 3, 2, 1);
  CounterRng rng(81, 0);
  for (int i = 0; i < 2000; ++i) {
    std::vector<double> x{rng.normal(), rng.normal()};
    CHECK(f(x) == g(x));
  }
}

TEST_CASE("local search reaches the three-label baselines") {
  SearchConfig cfg;
  cfg.k = 3;
  cfg.n0 = 2;
  cfg.d = 1;
  cfg.target_mu = {1.0 / 3, 1.0 / 3, 1.0 / 3};
  cfg.mode = SearchMode::local;
  cfg.samples = 50000;
  cfg.measure_samples = 20000;
  cfg.budget = 60;
  cfg.spectral_degree = 12;
  cfg.restarts = 2;
  const auto r = optimize_stability(cfg);
  CHECK(r.feasible);
  const double a = normal_quantile(1.0 / 3), b = normal_quantile(2.0 / 3);
  const auto slabs = estimate_stability(PartitionFn::slabs(2, 0, {a, b}, {0, 1, 2}), cfg.t, cfg.samples, cfg.seed);
  const auto sectors = estimate_stability(PartitionFn::callback(3, 2, [](std::span<const double> x) {
                                            double th = std::atan2(x[1], x[0]);
                                            if (th < 0) th += 2.0 * std::numbers::pi;
                                            return static_cast<unsigned>(th / (2.0 * std::numbers::pi / 3.0)) % 3;
                                          }),
                                          cfg.t, cfg.samples, cfg.seed);
  MESSAGE("local " << r.stability.value << " slabs " << slabs.value << " sectors " << sectors.value);
  CHECK(r.stability.value >= std::max(slabs.value, sectors.value) - 0.01);
}

TEST_CASE("config validation") {
  SearchConfig bad;
  bad.measure_tol = 0.0;
  CHECK_THROWS(bad.validate());
  SearchConfig mismatch;
  mismatch.target_mu = {0.5, 0.3};
  CHECK_THROWS(mismatch.validate());
  CHECK(parse_search_mode("random-restart-local") == SearchMode::local);
  CHECK(to_string(SearchMode::grid_cover) == "grid-cover");
}

TEST_CASE("decider examples") {
  NcdConfig cfg;
  Eigen::MatrixXd diag = Eigen::Vector2d(0.5, 0.5).asDiagonal();
  const auto d = ncd_decide(JointDist(diag), {0.5, 0.5}, {0.5, 0.5}, 1.0, 0.01, 1, cfg);
  CHECK(d.feasible);
  REQUIRE(d.witness);
  CHECK(d.witness->n == 1);
  CHECK(d.achieved == doctest::Approx(1.0));

  Eigen::VectorXd u(2);
  u << 0.5, 0.5;
  const auto ind = ncd_decide(product_dist(u, u), {0.5, 0.5}, {0.5, 0.5}, 0.9, 0.05, 2, cfg);
  CHECK_FALSE(ind.feasible);
  CHECK(ind.achieved <= 0.5 + 6.0 * ind.std_error + 1e-12);
  CHECK(ind.note.find("not a proof") != std::string::npos);

  const auto bsc = ncd_decide(binary_symmetric(0.5), {0.5, 0.5}, {0.5, 0.5}, 0.75, 0.02, 1, cfg);
  CHECK(bsc.feasible);
  CHECK(bsc.achieved == doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("oracle examples") {
  Eigen::MatrixXd diag = Eigen::Vector2d(0.4, 0.6).asDiagonal();
  CHECK(ncd_brute_oracle(JointDist(diag), {0.4, 0.6}, {0.4, 0.6}, 2, 1, 0.0).value == doctest::Approx(1.0));
  Eigen::VectorXd u(2);
  u << 0.5, 0.5;
  const auto ind = ncd_brute_oracle(product_dist(u, u), {0.5, 0.5}, {0.5, 0.5}, 2, 1, 0.0);
  CHECK(ind.pairs == 16);
  CHECK(ind.value == doctest::Approx(0.5));
  const auto J = binary_symmetric(0.5);
  CHECK(ncd_brute_oracle(J, {0.5, 0.5}, {0.5, 0.5}, 2, 1, 0.0).value == doctest::Approx(0.75));
  CHECK(ncd_brute_oracle(J, {0.5, 0.5}, {0.5, 0.5}, 2, 2, 0.0).value == doctest::Approx(0.75));
  CHECK_THROWS(ncd_brute_oracle(J, {0.5, 0.5}, {0.5, 0.5}, 2, 3, 0.0));
}

TEST_CASE("decider matches the oracle on random binary sources") {
  CounterRng rng(82, 0);
  NcdConfig cfg;
  for (int trial = 0; trial < 10; ++trial) {
    const auto P = random_binary(rng);
    const double m = 0.3 + 0.4 * rng.uniform();
    const std::vector<double> mu{m, 1 - m}, nu{0.5, 0.5};
    const double delta = 0.25;
    double oracle = 0.0;
    bool any = false;
    for (std::size_t n = 1; n <= 2; ++n) {
      const auto o = ncd_brute_oracle(P, mu, nu, 2, n, delta);
      if (o.feasible) {
        any = true;
        oracle = std::max(oracle, o.value);
      }
    }
    cfg.block_lengths = {};
    const auto d = ncd_decide(P, mu, nu, 1.0, delta, 2, cfg);
    CHECK(d.any_feasible_pair == any);
    if (any) CHECK(std::fabs(d.achieved - oracle) <= 6.0 * d.std_error + 1e-12);
  }
}

TEST_CASE("decider never reports less than the oracle") {
  CounterRng rng(83, 0);
  NcdConfig cfg;
  for (int trial = 0; trial < 5; ++trial) {
    const auto P = random_binary(rng);
    const std::vector<double> mu{0.5, 0.5};
    const auto d = ncd_decide(P, mu, mu, 1.0, 0.3, 8, cfg);
    const auto o = ncd_brute_oracle(P, mu, mu, 2, 2, 0.3);
    if (o.feasible) CHECK(d.achieved >= o.value - 6.0 * d.std_error - 1e-12);
  }
}

}
