#include "doctest.h"

#include <cmath>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "nstab/partition.hpp"
#include "nstab/product_space.hpp"
#include "nstab/rng.hpp"

using namespace nstab;

namespace {

JointDist random_joint(CounterRng& rng, std::size_t a, std::size_t b) {
  Eigen::MatrixXd p(a, b);
  for (std::size_t i = 0; i < a; ++i)
    for (std::size_t j = 0; j < b; ++j) p(i, j) = 0.05 + rng.uniform();
  return JointDist(p / p.sum());
}

ProductTable random_table(CounterRng& rng, std::size_t n, std::size_t m, std::size_t k) {
  ProductTable t{n, k, m, {}};
  std::size_t points = 1;
  for (std::size_t i = 0; i < n; ++i) points *= m;
  t.values.resize(points * k);
  for (auto& v : t.values) v = rng.normal();
  return t;
}

/// One-hot table of a labeling.
ProductTable one_hot(const std::vector<unsigned>& labels, std::size_t n, std::size_t m, std::size_t k) {
  ProductTable t{n, k, m, std::vector<double>(labels.size() * k, 0.0)};
  for (std::size_t p = 0; p < labels.size(); ++p) t.values[p * k + labels[p]] = 1.0;
  return t;
}

double expected_sq(const ProductTable& f, const Eigen::VectorXd& pa) {
  double s = 0.0;
  for (std::size_t p = 0; p < f.points(); ++p) {
    double w = 1.0;
    std::size_t rest = p;
    for (std::size_t i = 0; i < f.n; ++i) {
      w *= pa[rest % f.m];
      rest /= f.m;
    }
    for (std::size_t j = 0; j < f.k; ++j) s += w * f.values[p * f.k + j] * f.values[p * f.k + j];
  }
  return s;
}

void check_basis(const JointDist& P, double tol) {
  const auto b = correlation_basis(P);
  const Eigen::VectorXd pa = P.marginal_a(), pb = P.marginal_b();
  for (Eigen::Index a = 0; a < b.X.rows(); ++a) CHECK(b.X(a, 0) == doctest::Approx(1.0).epsilon(tol));
  for (Eigen::Index c = 0; c < b.Y.rows(); ++c) CHECK(b.Y(c, 0) == doctest::Approx(1.0).epsilon(tol));
  const Eigen::MatrixXd gx = b.X.transpose() * pa.asDiagonal() * b.X;
  const Eigen::MatrixXd gy = b.Y.transpose() * pb.asDiagonal() * b.Y;
  CHECK((gx - Eigen::MatrixXd::Identity(gx.rows(), gx.cols())).cwiseAbs().maxCoeff() <= tol);
  CHECK((gy - Eigen::MatrixXd::Identity(gy.rows(), gy.cols())).cwiseAbs().maxCoeff() <= tol);
  const Eigen::MatrixXd cross = b.X.transpose() * P.P * b.Y;
  for (Eigen::Index i = 0; i < cross.rows(); ++i)
    for (Eigen::Index j = 0; j < cross.cols(); ++j)
      CHECK(std::fabs(cross(i, j) - (i == j ? b.rho[i] : 0.0)) <= tol);
  CHECK(b.rho[0] == doctest::Approx(1.0).epsilon(tol));
  for (Eigen::Index i = 1; i < b.rho.size(); ++i) CHECK(b.rho[i] <= b.rho[i - 1] + tol);
}

}  // namespace

TEST_SUITE("product_space") {

TEST_CASE("joint distribution validation") {
  Eigen::MatrixXd neg(2, 2);
  neg << 0.6, -0.1, 0.25, 0.25;
  CHECK_THROWS(JointDist(neg));
  Eigen::MatrixXd off(2, 2);
  off << 0.3, 0.3, 0.3, 0.3;
  CHECK_THROWS(JointDist(off));
  Eigen::MatrixXd zero_row(2, 2);
  zero_row << 0.5, 0.5, 0.0, 0.0;
  CHECK_THROWS(JointDist(zero_row));
}

TEST_CASE("basis examples") {
  Eigen::VectorXd pa(3), pb(2);
  pa << 0.2, 0.3, 0.5;
  pb << 0.6, 0.4;
  const auto ind = correlation_basis(product_dist(pa, pb));
  CHECK(std::fabs(ind.maximal_correlation()) <= 1e-12);

  const auto bsc = correlation_basis(binary_symmetric(0.6));
  CHECK(bsc.maximal_correlation() == doctest::Approx(0.6).epsilon(1e-10));
  CHECK(bsc.X(0, 1) > 0.0);
  CHECK(bsc.X(0, 1) == doctest::Approx(1.0));
  CHECK(bsc.X(1, 1) == doctest::Approx(-1.0));

  const auto diag = correlation_basis(JointDist(Eigen::MatrixXd(Eigen::Vector3d(0.2, 0.3, 0.5).asDiagonal())));
  for (Eigen::Index j = 0; j < 3; ++j) CHECK(diag.rho[j] == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("basis properties on random joints") {
  CounterRng rng(61, 0);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t a = 2 + rng() % 4, b = 2 + rng() % 4;
    check_basis(random_joint(rng, a, b), 1e-10);
  }
}

TEST_CASE("coarsening never raises maximal correlation") {
  CounterRng rng(62, 0);
  for (int trial = 0; trial < 30; ++trial) {
    const auto P = random_joint(rng, 4, 3);
    Eigen::MatrixXd merged(3, 3);
    merged.row(0) = P.P.row(0) + P.P.row(1);
    merged.row(1) = P.P.row(2);
    merged.row(2) = P.P.row(3);
    CHECK(correlation_basis(JointDist(merged)).maximal_correlation() <=
          correlation_basis(P).maximal_correlation() + 1e-10);
  }
}

TEST_CASE("fourier examples and parseval") {
  const auto P = binary_symmetric(0.4);
  const auto b = correlation_basis(P);
  const Eigen::VectorXd pa = P.marginal_a();

  ProductTable constant{3, 1, 2, std::vector<double>(8, 2.5)};
  const auto fc = tensor_fourier(constant, b.X, pa);
  CHECK(fc.coeffs[0] == doctest::Approx(2.5));
  for (std::size_t i = 1; i < fc.size(); ++i) CHECK(std::fabs(fc.coeffs[i]) <= 1e-12);
  CHECK(influence(fc, 0) <= 1e-24);

  ProductTable first{3, 1, 2, std::vector<double>(8)};
  for (std::size_t p = 0; p < 8; ++p) first.values[p] = b.X(p % 2, 1);
  const auto ff = tensor_fourier(first, b.X, pa);
  CHECK(ff.coeffs[1] == doctest::Approx(1.0).epsilon(1e-12));
  for (std::size_t i = 0; i < ff.size(); ++i)
    if (i != 1) CHECK(std::fabs(ff.coeffs[i]) <= 1e-12);
  CHECK(influence(ff, 0) == doctest::Approx(1.0));
  CHECK(influence(ff, 1) <= 1e-24);
  CHECK_THROWS(influence(ff, 3));

  CounterRng rng(63, 0);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t m = 2 + trial % 3, n = 1 + trial % 3;
    const auto J = random_joint(rng, m, m);
    const auto bb = correlation_basis(J);
    const auto f = random_table(rng, n, m, 2);
    const auto F = tensor_fourier(f, bb.X, J.marginal_a());
    double mass = 0.0;
    for (std::size_t i = 0; i < F.size(); ++i) mass += F.norm_sq(i);
    CHECK(mass == doctest::Approx(expected_sq(f, J.marginal_a())).epsilon(1e-10));
  }
}

TEST_CASE("symmetric functions have equal influences") {
  const auto J = binary_symmetric(0.3);
  const auto b = correlation_basis(J);
  std::vector<unsigned> maj(8);
  for (std::size_t p = 0; p < 8; ++p) maj[p] = ((p & 1) + ((p >> 1) & 1) + ((p >> 2) & 1)) >= 2;
  const auto F = tensor_fourier(one_hot(maj, 3, 2, 2), b.X, J.marginal_a());
  CHECK(influence(F, 0) == doctest::Approx(influence(F, 1)).epsilon(1e-12));
  CHECK(influence(F, 1) == doctest::Approx(influence(F, 2)).epsilon(1e-12));
}

TEST_CASE("smoothing") {
  CounterRng rng(64, 0);
  const auto J = random_joint(rng, 3, 3);
  const auto b = correlation_basis(J);
  const auto f = random_table(rng, 2, 3, 2);
  const auto F = tensor_fourier(f, b.X, J.marginal_a());
  CHECK(smooth(F, 0.0).coeffs == F.coeffs);
  const auto killed = smooth(F, 1.0);
  for (std::size_t i = 1; i < killed.size(); ++i) CHECK(killed.norm_sq(i) == 0.0);
  CHECK_THROWS(smooth(F, 1.5));

  const double delta = 0.3;
  const auto S = smooth(F, delta);
  for (unsigned d = 0; d < 2; ++d) {
    double before = 0.0, after = 0.0;
    for (std::size_t i = 0; i < F.size(); ++i)
      if (F.degree(i) > d) {
        before += F.norm_sq(i);
        after += S.norm_sq(i);
      }
    CHECK(after <= before * std::pow(1 - delta, 2.0 * (d + 1)) + 1e-15);
  }

  for (std::size_t n : {1u, 2u}) {
    const auto g = random_table(rng, n, 3, 2);
    const auto lhs = tensor_fourier(noise_convolve(g, J.marginal_a(), delta), b.X, J.marginal_a());
    const auto rhs = smooth(tensor_fourier(g, b.X, J.marginal_a()), delta);
    for (std::size_t i = 0; i < lhs.coeffs.size(); ++i) CHECK(lhs.coeffs[i] == doctest::Approx(rhs.coeffs[i]).epsilon(1e-10).scale(1.0));
  }
}

TEST_CASE("correlation formula against enumeration") {
  const auto J = binary_symmetric(0.5);
  const auto b = correlation_basis(J);
  const auto id = one_hot({0, 1}, 1, 2, 2);
  const auto Fx = tensor_fourier(id, b.X, J.marginal_a());
  const auto Gy = tensor_fourier(id, b.Y, J.marginal_b());
  CHECK(correlation(Fx, Gy, b.rho) == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(correlation_enumerate(id, id, J) == doctest::Approx(0.75).epsilon(1e-12));

  Eigen::VectorXd ones = Eigen::VectorXd::Ones(2);
  CHECK(correlation(Fx, Fx, ones) == doctest::Approx(1.0));
  Eigen::VectorXd indep(2);
  indep << 1.0, 0.0;
  CHECK(correlation(Fx, Gy, indep) == doctest::Approx(Fx.coeffs[0] * Gy.coeffs[0] + Fx.coeffs[1] * Gy.coeffs[1]));

  CounterRng rng(65, 0);
  for (int trial = 0; trial < 27; ++trial) {
    const std::size_t n = 1 + trial % 3, ma = 2 + (trial / 3) % 2, mb = 2 + (trial / 9) % 2, k = 1 + trial % 3;
    const auto P = random_joint(rng, ma, mb);
    const auto bb = correlation_basis(P);
    const auto f = random_table(rng, n, ma, k);
    const auto g = random_table(rng, n, mb, k);
    const double formula = correlation(tensor_fourier(f, bb.X, P.marginal_a()), tensor_fourier(g, bb.Y, P.marginal_b()), bb.rho);
    CHECK(formula == doctest::Approx(correlation_enumerate(f, g, P)).epsilon(1e-10).scale(1.0));
  }
}

TEST_CASE("block strategies") {
  const auto J = binary_symmetric(0.5);
  const auto b = correlation_basis(J);
  std::vector<double> xvals{b.X(0, 1), b.X(1, 1)}, yvals{b.Y(0, 1), b.Y(1, 1)};

  const auto constant = block_strategy(PartitionFn::constant(2, 1, 1), xvals, 8);
  std::vector<std::uint32_t> word(8, 0);
  CHECK(constant.eval(word) == 1);
  word[3] = 1;
  CHECK(constant.eval(word) == 1);
  CHECK(constant.description.find("H=empty") != std::string::npos);

  const auto g = PartitionFn::halfspace({0.0}, {1.0});
  const auto f1 = block_strategy(g, xvals, 1);
  const auto g1 = block_strategy(g, yvals, 1);
  CHECK(f1.eval(std::vector<std::uint32_t>{0}) == 1);  // X_1(0) = +1
  CHECK(f1.eval(std::vector<std::uint32_t>{1}) == 0);
  const auto exact = exact_discrete_corr(f1, g1, J);
  CHECK(exact.exact);
  CHECK(exact.marginals_f.mu[0] == doctest::Approx(0.5));
  CHECK(exact.agreement.value == doctest::Approx(0.75));
  const auto sampled = estimate_discrete_corr(f1, g1, J, 200000, 3);
  CHECK(std::fabs(sampled.marginals_f.mu[0] - 0.5) <= 3.0 * sampled.marginals_f.std_error[0]);
  CHECK(std::fabs(sampled.agreement.value - 0.75) <= 3.0 * sampled.agreement.std_error);

  const auto f64 = block_strategy(g, xvals, 64);
  const auto g64 = block_strategy(g, yvals, 64);
  const auto c = estimate_discrete_corr(f64, g64, J, 100000, 4);
  CHECK(std::fabs(c.agreement.value - 2.0 / 3) <= 0.03);
  // An even block sum hits 0 with probability C(64,32)/2^64, which all goes to
  // label 0; odd block lengths have no atom and match the orthant value.
  CHECK(c.marginals_f.mu[0] == doctest::Approx(0.5 + 0.5 * 0.0993).epsilon(0.02));
  const auto c65 = estimate_discrete_corr(block_strategy(g, xvals, 65), block_strategy(g, yvals, 65), J, 100000, 4);
  CHECK(std::fabs(c65.agreement.per_label[0] - 1.0 / 3) <= 0.03);
}

TEST_CASE("discrete correlation examples") {
  Eigen::MatrixXd diag = Eigen::Vector3d(0.2, 0.3, 0.5).asDiagonal();
  const JointDist D(diag);
  const auto first = table_strategy({0, 1, 2}, 3, 3, 1);
  CHECK(estimate_discrete_corr(first, first, D, 10000, 1).agreement.value == 1.0);
  CHECK(exact_discrete_corr(first, first, D).agreement.value == doctest::Approx(1.0));

  Eigen::VectorXd pa(3), pb(3);
  pa << 0.2, 0.3, 0.5;
  pb << 0.5, 0.25, 0.25;
  const auto I = product_dist(pa, pb);
  const auto c = estimate_discrete_corr(first, first, I, 300000, 2);
  const double want = 0.2 * 0.5 + 0.3 * 0.25 + 0.5 * 0.25;
  CHECK(std::fabs(c.agreement.value - want) <= 3.0 * c.agreement.std_error);
  CHECK(exact_discrete_corr(first, first, I).agreement.value == doctest::Approx(want));
}

TEST_CASE("serial and parallel discrete estimates agree") {
  const auto J = binary_symmetric(0.3);
  const auto b = correlation_basis(J);
  const auto g = PartitionFn::halfspace({0.0}, {1.0});
  const auto f = block_strategy(g, {b.X(0, 1), b.X(1, 1)}, 4);
  const auto h = block_strategy(g, {b.Y(0, 1), b.Y(1, 1)}, 4);
  const auto s = estimate_discrete_corr(f, h, J, 50000, 5, Exec::serial);
  const auto p = estimate_discrete_corr(f, h, J, 50000, 5, Exec::parallel);
  CHECK(s.agreement.value == p.agreement.value);
  CHECK(s.marginals_f.mu == p.marginals_f.mu);
}

}
