#include "doctest.h"

#include <bit>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "nstab/cube.hpp"
#include "nstab/rng.hpp"

using namespace nstab;

TEST_SUITE("cube") {

TEST_CASE("walsh examples") {
  CubeFn constant(3, 2);
  const auto sc = walsh_transform(constant);
  CHECK(sc.coefficient(0)[0] == 1.0);
  for (std::uint32_t m = 1; m < 8; ++m) CHECK(sc.norm_sq(m) == 0.0);

  const auto dict = make_voting_rule(VotingRule::dictator, 3, 2);
  const auto sd = walsh_transform(dict);
  for (std::uint32_t m = 0; m < 8; ++m)
    if (m != 0 && m != 1) CHECK(sd.norm_sq(m) == doctest::Approx(0.0));
  CHECK(sd.norm_sq(1) == doctest::Approx(0.5));

  const auto maj = make_voting_rule(VotingRule::majority, 3, 2);
  const auto sm = walsh_transform(maj);
  for (std::uint32_t i = 0; i < 3; ++i) CHECK(std::fabs(sm.coefficient(1u << i)[0]) == doctest::Approx(0.25));
  CHECK(std::fabs(sm.coefficient(7)[0]) == doctest::Approx(0.25));
  // Brute-force coefficient of label 0 on {x_0}.
  double brute = 0.0;
  for (std::uint32_t p = 0; p < 8; ++p) brute += (maj(p) == 0 ? 1.0 : 0.0) * ((p & 1) ? -1.0 : 1.0) / 8.0;
  CHECK(sm.coefficient(1)[0] == doctest::Approx(brute));
}

TEST_CASE("voting rule tables") {
  const auto d = make_voting_rule(VotingRule::dictator, 4, 2);
  for (std::uint32_t p = 0; p < 16; ++p) CHECK(d(p) == (p & 1));
  const auto m = make_voting_rule(VotingRule::majority, 3, 2);
  for (std::uint32_t p = 0; p < 8; ++p) {
    const int minus = (p & 1) + ((p >> 1) & 1) + ((p >> 2) & 1);
    CHECK(m(p) == (minus >= 2 ? 1u : 0u));
  }
  CHECK_THROWS(make_voting_rule(VotingRule::majority, 4, 2));
  CHECK_THROWS(make_voting_rule(VotingRule::dictator, 21, 2));
  CHECK(parse_voting_rule("slab-embedding") == VotingRule::slab_embedding);
  CHECK_THROWS(parse_voting_rule("borda"));
}

TEST_CASE("stability examples") {
  const auto d = make_voting_rule(VotingRule::dictator, 3, 2);
  CHECK(cube_stability(d, 0.5) == doctest::Approx(0.75).epsilon(1e-14));
  CounterRng rng(71, 0);
  CubeFn random(5, 3);
  for (auto& l : random.labels) l = static_cast<std::uint8_t>(rng() % 3);
  CHECK(cube_stability(random, 1.0) == doctest::Approx(1.0).epsilon(1e-12));
  const auto maj = make_voting_rule(VotingRule::majority, 3, 2);
  CHECK(cube_stability(maj, 0.5) == doctest::Approx(cube_stability_bruteforce(maj, 0.5)).epsilon(1e-14));
  CHECK(cube_stability(maj, 0.5) == doctest::Approx(0.703125));
  CHECK_THROWS(cube_stability(maj, 1.5));
}

TEST_CASE("spectral stability equals pair enumeration") {
  CounterRng rng(72, 0);
  for (unsigned n = 1; n <= 8; ++n) {
    CubeFn f(n, 3);
    for (auto& l : f.labels) l = static_cast<std::uint8_t>(rng() % 3);
    for (double rho : {-0.4, 0.2, 0.9})
      CHECK(std::fabs(cube_stability(f, rho) - cube_stability_bruteforce(f, rho)) <= 1e-12);
  }
}

TEST_CASE("influences") {
  CHECK(cube_influences(CubeFn(4, 2)) == std::vector<double>(4, 0.0));
  const auto d = make_voting_rule(VotingRule::dictator, 4, 2);
  const auto inf = cube_influences(d);
  CHECK(inf[0] == doctest::Approx(cube_variance(d)));
  for (std::size_t i = 1; i < 4; ++i) CHECK(inf[i] == doctest::Approx(0.0));

  CounterRng rng(73, 0);
  for (int trial = 0; trial < 10; ++trial) {
    CubeFn f(6, 2 + trial % 3);
    for (auto& l : f.labels) l = static_cast<std::uint8_t>(rng() % f.k);
    const auto spec = walsh_transform(f);
    const auto a = cube_influences(spec), b = cube_influences_bruteforce(f);
    double total = 0.0, weighted = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-12));
      total += a[i];
    }
    for (std::uint32_t m = 0; m < (1u << 6); ++m) weighted += std::popcount(m) * spec.norm_sq(m);
    CHECK(total == doctest::Approx(weighted).epsilon(1e-12));
  }
}

TEST_CASE("majority influences shrink like one over root n") {
  double prev = 1.0;
  for (unsigned n : {3u, 5u, 7u, 9u}) {
    const auto inf = cube_influences(make_voting_rule(VotingRule::majority, n, 2));
    for (double v : inf) CHECK(v == doctest::Approx(inf[0]).epsilon(1e-12));
    CHECK(inf[0] < prev);
    const double scaled = inf[0] * std::sqrt(double(n));
    MESSAGE("n=" << n << " Inf*sqrt(n)=" << scaled);
    CHECK(scaled > 0.3);
    CHECK(scaled < 0.6);
    prev = inf[0];
  }
}

TEST_CASE("plurality has lower influence than a dictator") {
  const auto p = make_voting_rule(VotingRule::plurality, 4, 3);
  const auto d = make_voting_rule(VotingRule::dictator, 4, 3);
  double mp = 0.0, md = 0.0;
  for (double v : cube_influences(p)) mp = std::max(mp, v);
  for (double v : cube_influences(d)) md = std::max(md, v);
  CHECK(mp < md);
}

TEST_CASE("dictator and majority beat parity") {
  const double par = cube_stability(make_voting_rule(VotingRule::parity, 5, 2), 0.5);
  // Parity's one-hot spectrum is the constant plus mass 1/2 on the full set.
  CHECK(par == doctest::Approx(0.5 + 0.5 * 0.03125).epsilon(1e-14));
  CHECK(cube_stability(make_voting_rule(VotingRule::dictator, 5, 2), 0.5) > par);
  CHECK(cube_stability(make_voting_rule(VotingRule::majority, 5, 2), 0.5) > par);
}

TEST_CASE("base64 round trip and serial transform") {
  std::vector<std::uint8_t> bytes{0, 1, 2, 250, 255, 7, 9};
  for (std::size_t len = 0; len <= bytes.size(); ++len) {
    std::vector<std::uint8_t> part(bytes.begin(), bytes.begin() + len);
    CHECK(base64_decode(base64_encode(part)) == part);
  }
  CHECK_THROWS(base64_decode("a$=="));
  const auto maj = make_voting_rule(VotingRule::majority, 9, 2);
  CHECK(walsh_transform(maj, Exec::serial).coeffs == walsh_transform(maj, Exec::parallel).coeffs);
}

}
