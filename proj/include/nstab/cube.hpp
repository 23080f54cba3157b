#pragma once

// Exact Fourier-Walsh analysis of k-ary functions on {-1,1}^n. Point b in
// [0, 2^n) has x_i = +1 when bit i of b is clear and x_i = -1 when it is set.

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "nstab/parallel.hpp"

namespace nstab {

inline constexpr unsigned kMaxCubeDim = 20;

struct CubeFn {
  unsigned n = 0;
  unsigned k = 2;
  std::vector<std::uint8_t> labels;  // length 2^n

  CubeFn() = default;
  CubeFn(unsigned n, unsigned k);

  std::size_t size() const { return labels.size(); }
  unsigned operator()(std::uint32_t point) const { return labels[point]; }
  void validate() const;
  bool operator==(const CubeFn&) const = default;
};

/// Coefficients of the one-hot embedding: coeffs[mask * k + j] = E[1{f=j} chi_mask].
struct WalshSpectrum {
  unsigned n = 0;
  unsigned k = 0;
  std::vector<double> coeffs;

  double norm_sq(std::uint32_t mask) const;
  std::vector<double> coefficient(std::uint32_t mask) const;
};

WalshSpectrum walsh_transform(const CubeFn& f, Exec exec = Exec::parallel);

/// Sum over S of rho^{|S|} ||f^(S)||^2 = Pr[f(x) = f(y)] for rho-correlated x, y.
double cube_stability(const CubeFn& f, double rho);
double cube_stability(const WalshSpectrum& spectrum, double rho);
/// Direct sum over all correlated pairs; n <= 8.
double cube_stability_bruteforce(const CubeFn& f, double rho);

std::vector<double> cube_influences(const CubeFn& f);
std::vector<double> cube_influences(const WalshSpectrum& spectrum);
/// E over the other coordinates of Var along coordinate i, by enumeration.
std::vector<double> cube_influences_bruteforce(const CubeFn& f);

/// Variance of the one-hot embedding: 1 - sum_j mu_j^2.
double cube_variance(const CubeFn& f);

enum class VotingRule { dictator, majority, plurality, slab_embedding, parity };

VotingRule parse_voting_rule(const std::string& name);
std::string to_string(VotingRule rule);

CubeFn make_voting_rule(VotingRule rule, unsigned n, unsigned k);

std::string base64_encode(const std::vector<std::uint8_t>& bytes);
std::vector<std::uint8_t> base64_decode(const std::string& text);

}  // namespace nstab
