// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.
#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "nstab/cube.hpp"
#include "nstab/gauss_core.hpp"
#include "nstab/hermite_analysis.hpp"
#include "nstab/partition.hpp"
#include "nstab/poly_gauss.hpp"
#include "nstab/product_space.hpp"
#include "nstab/rng.hpp"
#include "nstab/rounding.hpp"
#include "nstab/search.hpp"
#include "nstab/symmetric_tensor.hpp"
#include "nstab/tensor_ops.hpp"
#include "test_util.hpp"

using namespace nstab;
using nstab::testing::all_multisets;
using nstab::testing::random_tensor;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok && pass) detail << "failed: " << what << "; ";
    pass = pass && ok;
  }
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

VectorFunction scalar(std::size_t n, std::function<double(std::span<const double>)> fn) {
  return {n, 1, [fn](std::span<const double> x, std::span<double> out) { out[0] = fn(x); }};
}

JointDist random_joint(CounterRng& rng, std::size_t a, std::size_t b) {
  Eigen::MatrixXd p(a, b);
  for (std::size_t i = 0; i < a; ++i)
    for (std::size_t j = 0; j < b; ++j) p(i, j) = 0.05 + rng.uniform();
  return JointDist(p / p.sum());
}

PolyGauss random_unit_poly(CounterRng& rng, std::size_t dim, unsigned max_order) {
  PolyGauss p(dim);
  const unsigned top = 1 + static_cast<unsigned>(rng() % max_order);
  for (unsigned q = 1; q <= top; ++q) p.add_component(random_tensor(rng, q, dim));
  return p.scaled(1.0 / std::sqrt(p.variance()));
}

// Random cell partition on n <= 2 axes using every one of k labels.
PartitionFn random_cells(CounterRng& rng, std::size_t n, std::size_t k) {
  std::vector<std::vector<double>> bp(n);
  std::size_t cells = 1;
  for (auto& axis : bp) {
    const std::size_t cuts = 1 + rng() % 2;
    for (std::size_t c = 0; c < cuts; ++c) axis.push_back(1.5 * rng.normal());
    std::sort(axis.begin(), axis.end());
    cells *= cuts + 1;
  }
  std::vector<unsigned> labels(cells);
  for (std::size_t c = 0; c < cells; ++c) labels[c] = static_cast<unsigned>(c < k ? c : rng() % k);
  for (std::size_t c = cells - 1; c > 0; --c) std::swap(labels[c], labels[rng() % (c + 1)]);
  return PartitionFn::cells(bp, labels, k);
}

ProductTable random_table(CounterRng& rng, std::size_t n, std::size_t m, std::size_t k) {
  ProductTable t{n, k, m, {}};
  std::size_t points = 1;
  for (std::size_t i = 0; i < n; ++i) points *= m;
  t.values.resize(points * k);
  for (auto& v : t.values) v = rng.normal();
  return t;
}

Eigen::MatrixXd random_gram(CounterRng& rng, std::size_t size) {
  Eigen::MatrixXd a(size + 1, size);
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j) a(i, j) = rng.normal();
  Eigen::MatrixXd g = a.transpose() * a;
  const Eigen::VectorXd d = g.diagonal().cwiseSqrt().cwiseInverse();
  return d.asDiagonal() * g * d.asDiagonal();
}

void borell_anchor(Outcome& o) {
  const auto start = Clock::now();
  const auto f = PartitionFn::halfspace({0.0}, {1.0});
  const auto s = estimate_stability_rho(f, 0.5, 1000000, 1);
  const double elapsed = seconds_since(start);
  const double rho = 0.5, slope = rho / std::sqrt(1 - rho * rho);
  const double orthant = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
      [slope](double x) {
        return std::exp(-0.5 * x * x) / std::sqrt(2 * std::numbers::pi) * normal_cdf(slope * x);
      },
      0.0, std::numeric_limits<double>::infinity(), 15, 1e-14);
  o.detail << "per-label " << s.per_label[0] << " +- " << s.per_label_std_error[0] << ", agreement "
           << s.value << ", orthant " << orthant << ", " << elapsed << " s; ";
  o.require(std::fabs(s.per_label[0] - 1.0 / 3) <= 3 * s.per_label_std_error[0], "label-0 stability");
  o.require(std::fabs(s.per_label[1] - 1.0 / 3) <= 3 * s.per_label_std_error[1], "label-1 stability");
  o.require(std::fabs(s.value - 2.0 / 3) <= 3 * s.std_error, "agreement");
  o.require(std::fabs(orthant - 1.0 / 3) <= 1e-8, "orthant integral");
  o.require(std::fabs(sheppard_orthant(0.5) - orthant) <= 1e-8, "closed form vs integral");
  o.require(elapsed < 5.0, "runtime");
}

void ou_eigenrelation(Outcome& o) {
  CounterRng rng(2, 0);
  double worst = 0.0;
  for (std::size_t n = 1; n <= 3; ++n) {
    for (unsigned deg = 0; deg <= 4; ++deg) {
      for (const auto& ms : all_multisets(deg, n)) {
        HermiteIndex s{std::vector<unsigned>(n, 0)};
        for (auto i : ms) ++s.entries[i];
        const auto h = scalar(n, [s](auto x) { return hermite_multi_eval(s, x); });
        for (double t : {0.1, 0.5, 1.0}) {
          for (int p = 0; p < 10; ++p) {
            std::vector<double> x(n);
            draw_gaussian(rng, x);
            const double expect = std::exp(-t * deg) * hermite_multi_eval(s, x);
            worst = std::max(worst, std::fabs(ou_pointwise(h, t, x)[0] - expect));
          }
        }
      }
    }
  }
  o.detail << "max error " << worst << "; ";
  o.require(worst <= 1e-6, "pointwise error");
}

void parseval(Outcome& o) {
  CounterRng rng(3, 0);
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 1 + trial % 2;
    std::vector<double> a(n), b(n);
    draw_gaussian(rng, a);
    draw_gaussian(rng, b);
    const double c = rng.normal();
    const int shape = trial % 3;
    const auto f = scalar(n, [=](auto x) {
      double lin = c, quad = 0.0;
      for (std::size_t i = 0; i < x.size(); ++i) {
        lin += a[i] * x[i];
        quad += b[i] * x[i] * x[i];
      }
      if (shape == 0) return std::tanh(lin + 0.3 * quad);
      if (shape == 1) return std::sin(lin) * std::cos(0.5 * quad);
      return 1.0 / (1.0 + lin * lin + quad * quad);
    });
    const auto report = parseval_check(expand(f, 6));
    worst = std::max(worst, report.residual);
  }
  o.detail << "max residual " << worst << "; ";
  o.require(worst <= 1e-6, "residual");
}

void ito(Outcome& o) {
  CounterRng rng(4, 0);
  const auto grid = tensor_grid(gauss_hermite_rule(10), 3);
  double worst_inner = 0.0, worst_point = 0.0;
  for (unsigned p = 1; p <= 4; ++p) {
    for (unsigned q = 1; q <= 4; ++q) {
      if (p + q > 18) continue;
      const auto f = random_tensor(rng, p, 3);
      const auto g = random_tensor(rng, q, 3);
      double quad = 0.0;
      for (std::size_t i = 0; i < grid.size(); ++i)
        quad += grid.weights[i] * ito_eval(f, grid.point(i)) * ito_eval(g, grid.point(i));
      const double exact = p == q ? inner(f, g) : 0.0;
      worst_inner = std::max(worst_inner, std::fabs(quad - exact) / std::max(1.0, std::fabs(exact)));
      const auto prod = ito_product(f, g);
      for (int k = 0; k < 10; ++k) {
        std::vector<double> x(3);
        draw_gaussian(rng, x);
        double sum = 0.0;
        for (const auto& [order, c] : prod) sum += order == 0 ? c.get({}) : ito_eval(c, x);
        const double direct = ito_eval(f, x) * ito_eval(g, x);
        worst_point = std::max(worst_point, std::fabs(sum - direct) / std::max(1.0, std::fabs(direct)));
      }
    }
  }
  const auto e = SymmetricTensor::unit(1, 0);
  const auto sq = ito_product(e, e);
  o.detail << "inner " << worst_inner << ", pointwise " << worst_point << "; ";
  o.require(worst_inner <= 1e-12, "isometry");
  o.require(worst_point <= 1e-9, "product identity");
  o.require(sq.size() == 2 && sq.at(0).get({}) == 1.0 && sq.at(2).get({0, 0}) == std::sqrt(2.0),
            "first Hermite squared");
}

void rounding_contracts(Outcome& o) {
  CounterRng rng(5, 0);
  double worst_gain = 1.0, worst_l1 = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 1 + trial % 2, k = 2 + (trial / 2) % 2;
    const auto f = random_cells(rng, n, k);
    const auto r = stability_of_rounding(f, std::log(2.0), 0.01, 100000, 500 + trial);
    const double gain = r.stab_g.value - r.stab_f.value + r.slack + 6 * r.stab_f.std_error;
    worst_gain = std::min(worst_gain, gain);
    worst_l1 = std::max(worst_l1, r.search.l1_error);
    o.require(gain >= 0.0, "stability after rounding, trial " + std::to_string(trial));
    o.require(r.search.converged && r.search.l1_error <= 0.01, "measure matching, trial " + std::to_string(trial));
  }
  o.detail << "min margin " << worst_gain << ", max matching error " << worst_l1 << "; ";
}

void truncation_bound(Outcome& o) {
  CounterRng rng(6, 0);
  double min_margin = 1.0;
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 1 + trial % 2, k = 2 + (trial / 2) % 2;
    const unsigned d = 1 + trial % 3;
    const auto h = random_cells(rng, n, k);
    const auto r = ptf_from_truncation(h, d, 40, 100000, 600 + trial);
    const double margin = r.bound + 3 * r.disagreement.std_error - r.disagreement.value;
    min_margin = std::min(min_margin, margin);
    o.require(std::fabs(r.bound - double(k * k) * r.tail) <= 1e-12, "bound formula");
    o.require(margin >= 0.0, "disagreement bound, trial " + std::to_string(trial));
  }
  o.detail << "min margin " << min_margin << "; ";
}

void eigen_blocks(Outcome& o) {
  for (std::size_t kappa : {2u, 4u, 9u, 16u}) {
    PolyGauss p(kappa);
    for (std::size_t b = 0; b < kappa; ++b)
      p = p + hermite_poly(kappa, static_cast<std::uint32_t>(b), 2).scaled(1.0 / std::sqrt(double(kappa)));
    const double ratio = eigenregularity(p).ratio;
    o.detail << "kappa " << kappa << ": " << ratio << "; ";
    o.require(ratio <= 1.0 / std::sqrt(double(kappa)) + 1e-9, "block ratio");
  }
  CounterRng rng(7, 0);
  for (unsigned q = 2; q <= 4; ++q) {
    std::vector<double> v(3);
    draw_gaussian(rng, v);
    PolyGauss p(3);
    p.add_component(SymmetricTensor::outer(std::vector<std::vector<double>>(q, v)));
    o.require(std::fabs(eigenregularity(p).ratio - 1.0) <= 1e-9, "rank-one ratio, order " + std::to_string(q));
  }
}

void variance_bounds_check(Outcome& o) {
  CounterRng rng(8, 0);
  for (int trial = 0; trial < 50; ++trial) {
    const auto p = random_unit_poly(rng, 3, 3);
    const auto q = random_unit_poly(rng, 3, 3);
    const auto b = variance_bounds(p, q);
    const double exact = multiply(p, q).variance();
    o.require(std::fabs(exact - b.product_variance) <= 1e-9 * std::max(1.0, exact), "exact variance");
    o.require(b.lower_top <= exact + 1e-9, "top-chaos lower bound");
    o.require(b.upper.has_value() && exact <= *b.upper + 1e-9, "upper bound");
    o.require(b.upper.has_value() &&
                  std::fabs(*b.upper - std::pow(9.0, b.d) * p.second_moment() * q.second_moment()) <= 1e-9 * *b.upper,
              "upper bound formula");
    o.require(b.lower_schedule.has_value() && *b.lower_schedule <= exact, "schedule lower bound");
  }
}

void matched_families(Outcome& o) {
  CounterRng rng(9, 0);
  double worst_cov = 0.0, worst_excess = -1.0;
  for (int trial = 0; trial < 20; ++trial) {
    GramSpec spec;
    const std::size_t count = 1 + rng() % 2;
    std::vector<unsigned> levels{1, 2, 3};
    for (std::size_t c = 0; c < count; ++c) {
      const unsigned level = levels[rng() % levels.size()];
      levels.erase(std::find(levels.begin(), levels.end(), level));
      spec.levels.push_back({level, random_gram(rng, 1 + rng() % 3)});
    }
    const double delta = 0.25 + 0.25 * rng.uniform();
    const auto fam = matched_family(spec, delta);
    const auto kappa = static_cast<std::size_t>(std::ceil(1.0 / (delta * delta) - 1e-12));
    std::size_t per_block = 0;
    for (const auto& l : spec.levels) per_block += l.level * static_cast<std::size_t>(l.gram.rows());
    o.require(fam.kappa == kappa, "kappa");
    o.require(fam.n0 == kappa * per_block, "dimension formula");
    std::vector<std::size_t> local;
    for (const auto& l : spec.levels)
      for (Eigen::Index i = 0; i < l.gram.rows(); ++i) local.push_back(static_cast<std::size_t>(i));
    for (std::size_t i = 0; i < fam.family.size(); ++i) {
      for (std::size_t j = 0; j < fam.family.size(); ++j) {
        double expect = 0.0;
        if (fam.level_of[i] == fam.level_of[j]) {
          const auto& g = std::find_if(spec.levels.begin(), spec.levels.end(),
                                       [&](const GramLevel& l) { return l.level == fam.level_of[i]; })->gram;
          expect = g(Eigen::Index(local[i]), Eigen::Index(local[j]));
        }
        worst_cov = std::max(worst_cov, std::fabs(poly_inner(fam.family[i], fam.family[j]) - expect));
      }
      if (fam.level_of[i] >= 2) worst_excess = std::max(worst_excess, eigenregularity(fam.family[i]).ratio - delta);
    }
  }
  o.detail << "covariance error " << worst_cov << ", worst ratio minus delta " << worst_excess << "; ";
  o.require(worst_cov <= 1e-9, "covariance reproduction");
  o.require(worst_excess <= 1e-9, "eigenregularity");
}

void monomial_property(Outcome& o, std::size_t samples) {
  const auto start = Clock::now();
  GramSpec spec;
  Eigen::MatrixXd g(3, 3);
  g << 1.0, 0.4, -0.2, 0.4, 1.0, 0.3, -0.2, 0.3, 1.0;
  spec.levels.push_back({2, g});
  const double delta = 0.05;
  const auto a = matched_family(spec, delta);
  CounterRng rng(10, 0);
  Eigen::MatrixXd m(3, 3);
  for (Eigen::Index i = 0; i < 9; ++i) m(i) = rng.normal();
  const Eigen::MatrixXd rot = Eigen::HouseholderQR<Eigen::MatrixXd>(m).householderQ();
  const auto b = matched_family_with_factors(spec, delta, {rot * gram_factor(g)});
  double worst_cov = 0.0;
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j)
      worst_cov = std::max(worst_cov, std::fabs(poly_inner(a.family[i], a.family[j]) -
                                                poly_inner(b.family[i], b.family[j])));
  const auto est = product_expectation_paired(a.family, b.family, samples, 10);
  const double trivial = std::pow(2.0, 3 * 7) * delta;
  const double diff = std::fabs(est.difference.value);
  o.detail << "E[prod] " << est.a.value << " vs " << est.b.value << ", difference " << diff << " +- "
           << est.difference.std_error << ", " << samples << " samples, " << seconds_since(start) << " s; ";
  o.require(worst_cov <= 1e-9, "families share covariances");
  o.require(diff <= trivial, "trivial bound");
  o.require(diff <= delta + 6 * est.difference.std_error, "empirical bound");
}

void correlation_basis_check(Outcome& o) {
  CounterRng rng(11, 0);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t sa = 2 + rng() % 3, sb = 2 + rng() % 3;
    const auto P = random_joint(rng, sa, sb);
    const auto b = correlation_basis(P);
    const Eigen::VectorXd pa = P.marginal_a(), pb = P.marginal_b();
    const Eigen::MatrixXd gx = b.X.transpose() * pa.asDiagonal() * b.X;
    const Eigen::MatrixXd gy = b.Y.transpose() * pb.asDiagonal() * b.Y;
    worst = std::max(worst, (gx - Eigen::MatrixXd::Identity(gx.rows(), gx.cols())).cwiseAbs().maxCoeff());
    worst = std::max(worst, (gy - Eigen::MatrixXd::Identity(gy.rows(), gy.cols())).cwiseAbs().maxCoeff());
    worst = std::max(worst, (b.X.col(0).array() - 1.0).abs().maxCoeff());
    worst = std::max(worst, (b.Y.col(0).array() - 1.0).abs().maxCoeff());
    const Eigen::MatrixXd cross = b.X.transpose() * P.P * b.Y;
    for (Eigen::Index i = 0; i < cross.rows(); ++i)
      for (Eigen::Index j = 0; j < cross.cols(); ++j)
        worst = std::max(worst, std::fabs(cross(i, j) - (i == j ? b.rho[i] : 0.0)));
    for (Eigen::Index i = 1; i < b.rho.size(); ++i) {
      o.require(b.rho[i] <= b.rho[i - 1] + 1e-10, "sorted correlations");
      o.require(b.rho[i] >= -1e-10 && b.rho[i] <= 1.0 + 1e-10, "correlations in [0, 1]");
    }
  }
  const double rho1 = correlation_basis(binary_symmetric(0.6)).maximal_correlation();
  o.detail << "max property error " << worst << ", binary symmetric rho " << rho1 << "; ";
  o.require(worst <= 1e-10, "basis properties");
  o.require(std::fabs(rho1 - 0.6) <= 1e-10, "binary symmetric source");
}

void product_correlation(Outcome& o) {
  CounterRng rng(12, 0);
  double worst = 0.0;
  for (std::size_t n = 1; n <= 3; ++n) {
    for (std::size_t m = 2; m <= 3; ++m) {
      for (std::size_t k = 1; k <= 3; ++k) {
        const auto P = random_joint(rng, m, m);
        const auto b = correlation_basis(P);
        const auto f = random_table(rng, n, m, k);
        const auto g = random_table(rng, n, m, k);
        const double formula = correlation(tensor_fourier(f, b.X, P.marginal_a()),
                                           tensor_fourier(g, b.Y, P.marginal_b()), b.rho);
        const double direct = correlation_enumerate(f, g, P);
        worst = std::max(worst, std::fabs(formula - direct) / std::max(1.0, std::fabs(direct)));
      }
    }
  }
  o.detail << "max error " << worst << "; ";
  o.require(worst <= 1e-10, "formula vs enumeration");
}

void multilinear_lift_check(Outcome& o) {
  CounterRng rng(13, 0);
  double worst_ratio = 0.0, worst_z = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const auto p = random_unit_poly(rng, 2, 3).shifted(rng.normal());
    for (std::size_t T : {4u, 16u}) {
      const auto lift = multilinear_lift(p, T);
      const double d = p.degree();
      const double gap = (lift.r - lift.w).variance();
      o.require(std::fabs(gap - lift.var_gap) <= 1e-12, "reported gap");
      o.require(std::fabs(lift.gap_bound - lift.r.variance() * d * d / double(T)) <= 1e-12, "bound formula");
      o.require(gap <= lift.gap_bound + 1e-12, "gap bound");
      worst_ratio = std::max(worst_ratio, gap / lift.gap_bound);

      // Repeating each coordinate across its block makes the lift equal p(sqrt(T) y).
      std::vector<double> y(p.dim), tiled(lift.r.dim), scaled(p.dim);
      draw_gaussian(rng, y);
      for (std::size_t i = 0; i < p.dim; ++i) {
        scaled[i] = std::sqrt(double(T)) * y[i];
        for (std::size_t b = 0; b < T; ++b) tiled[i * T + b] = y[i];
      }
      const double direct = p.eval(scaled);
      o.require(std::fabs(lift.r.eval(tiled) - direct) <= 1e-9 * std::max(1.0, std::fabs(direct)),
                "tiled evaluation");

      CounterRng draws(1300 + trial * 17 + T, 0);
      const std::size_t N = 200000;
      std::vector<double> x(lift.r.dim);
      const PolyEvaluator eval(lift.r);
      double s = 0.0, s2 = 0.0;
      const double mean = p.mean(), var = p.variance();
      for (std::size_t i = 0; i < N; ++i) {
        draw_gaussian(draws, x);
        const double v = eval(x) - mean;
        s += v;
        s2 += v * v;
      }
      // Exact standard errors from the chaos expansion of the centred polynomial.
      const auto centred = p.shifted(-mean);
      const double fourth = multiply(centred, centred).second_moment();
      const double m1 = s / N, m2 = s2 / N;
      const double se_mean = std::sqrt(var / N), se_var = std::sqrt((fourth - var * var) / N);
      worst_z = std::max({worst_z, std::fabs(m1) / se_mean, std::fabs(m2 - p.variance()) / se_var});
      o.require(std::fabs(m1) <= 3 * se_mean, "lifted mean, trial " + std::to_string(trial));
      o.require(std::fabs(m2 - p.variance()) <= 3 * se_var, "lifted variance, trial " + std::to_string(trial));
    }
  }
  o.detail << "max gap / bound " << worst_ratio << ", largest moment deviation " << worst_z << " SE; ";
}

void cube_checks(Outcome& o) {
  for (double rho : {-0.5, 0.0, 0.3, 0.9}) {
    const auto d = make_voting_rule(VotingRule::dictator, 3, 2);
    o.require(std::fabs(cube_stability(d, rho) - (1 + rho) / 2) <= 1e-15, "dictator");
    const auto maj = make_voting_rule(VotingRule::majority, 3, 2);
    o.require(std::fabs(cube_stability(maj, rho) - cube_stability_bruteforce(maj, rho)) <= 1e-15, "majority");
  }
  o.detail << "Maj3 at 0.5: " << cube_stability(make_voting_rule(VotingRule::majority, 3, 2), 0.5) << "; ";
  CounterRng rng(14, 0);
  for (int trial = 0; trial < 10; ++trial) {
    CubeFn f(6, 2 + trial % 3);
    for (auto& l : f.labels) l = static_cast<std::uint8_t>(rng() % f.k);
    const auto spec = walsh_transform(f);
    const auto inf = cube_influences(spec), brute = cube_influences_bruteforce(f);
    double total = 0.0, weighted = 0.0;
    for (std::size_t i = 0; i < inf.size(); ++i) {
      o.require(std::fabs(inf[i] - brute[i]) <= 1e-12, "influence vs brute force");
      total += inf[i];
    }
    for (std::uint32_t m = 0; m < (1u << 6); ++m) weighted += std::popcount(m) * spec.norm_sq(m);
    o.require(std::fabs(total - weighted) <= 1e-12, "influence sum identity");
  }
}

void search_borell(Outcome& o) {
  const auto start = Clock::now();
  SearchConfig cfg;
  const auto r = optimize_stability(cfg);
  const double elapsed = seconds_since(start);
  const double label0 = r.stability.per_label.empty() ? 0.0 : r.stability.per_label[0];
  o.detail << "best " << r.description << ", agreement " << r.stability.value << ", label-0 " << label0
           << ", " << r.evaluations << " evaluations, " << elapsed << " s; ";
  o.require(r.feasible, "feasible optimum");
  o.require(std::fabs(label0 - 1.0 / 3) <= 0.01, "label-0 stability");
  o.require(std::fabs(r.stability.value - 2.0 / 3) <= 0.01, "agreement");
  o.require(elapsed < 60.0, "runtime");
}

void desk_decider(Outcome& o) {
  CounterRng rng(16, 0);
  NcdConfig cfg;
  cfg.block_lengths = {};
  double worst = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    const auto P = random_joint(rng, 2, 2);
    const double m = 0.3 + 0.4 * rng.uniform();
    const std::vector<double> mu{m, 1 - m}, nu{0.5, 0.5};
    const double delta = 0.25;
    double oracle = 0.0;
    bool any = false;
    for (std::size_t n = 1; n <= 2; ++n) {
      const auto r = ncd_brute_oracle(P, mu, nu, 2, n, delta);
      if (r.feasible) {
        any = true;
        oracle = std::max(oracle, r.value);
      }
    }
    const auto d = ncd_decide(P, mu, nu, 1.0, delta, 2, cfg);
    o.require(d.any_feasible_pair == any, "feasibility agrees");
    if (any) {
      worst = std::max(worst, std::fabs(d.achieved - oracle));
      o.require(std::fabs(d.achieved - oracle) <= 6 * d.std_error + 1e-12, "value agrees");
    }
  }
  const auto bsc = ncd_decide(binary_symmetric(0.5), {0.5, 0.5}, {0.5, 0.5}, 0.75, 0.02, 1, NcdConfig{});
  o.detail << "max |decider - oracle| " << worst << ", binary symmetric achieved " << bsc.achieved << "; ";
  o.require(bsc.feasible, "binary symmetric instance");
}

void block_construction(Outcome& o) {
  const auto J = binary_symmetric(0.5);
  const auto b = correlation_basis(J);
  const std::vector<double> xv{b.X(0, 1), b.X(1, 1)}, yv{b.Y(0, 1), b.Y(1, 1)};
  const auto g = PartitionFn::halfspace({0.0}, {1.0});
  const auto c = estimate_discrete_corr(block_strategy(g, xv, 64), block_strategy(g, yv, 64), J, 400000, 17);
  o.detail << "agreement " << c.agreement.value << " +- " << c.agreement.std_error << ", per-label "
           << c.agreement.per_label[0] << " / " << c.agreement.per_label[1] << "; ";
  o.require(std::fabs(c.agreement.value - 2.0 / 3) <= 0.03, "agreement vs halfspace");
}

}  // namespace

int main(int argc, char** argv) {
  std::size_t monomial_samples = 10000000;
  if (argc > 1) monomial_samples = std::stoull(argv[1]);

  const std::vector<std::pair<std::string, std::function<void(Outcome&)>>> criteria{
      {"median halfspace stability at rho 0.5", borell_anchor},
      {"OU eigenrelation on Hermite products", ou_eigenrelation},
      {"Parseval on bounded functions", parseval},
      {"Ito isometry and multiplication", ito},
      {"threshold rounding does not lose stability", rounding_contracts},
      {"truncation PTF disagreement bound", truncation_bound},
      {"eigenregularity of block sums and rank-one tensors", eigen_blocks},
      {"product variance bounds", variance_bounds_check},
      {"matched families", matched_families},
      {"product expectations of matched families",
       [monomial_samples](Outcome& o) { monomial_property(o, monomial_samples); }},
      {"correlation basis", correlation_basis_check},
      {"product-space correlation formula", product_correlation},
      {"multilinear lift", multilinear_lift_check},
      {"Boolean cube stability and influences", cube_checks},
      {"search recovers the median halfspace", search_borell},
      {"correlation distillation decider", desk_decider},
      {"block strategies on the binary symmetric source", block_construction},
  };

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    const auto start = Clock::now();
    try {
      criteria[i].second(o);
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail << "exception: " << e.what() << "; ";
    }
    failures += o.pass ? 0 : 1;
    std::printf("%s [%zu] %s (%.1f s) %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(),
                seconds_since(start), o.detail.str().c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria failed\n", failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
