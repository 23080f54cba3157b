#include "nstab/cube.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <stdexcept>

#include "nstab/gauss_core.hpp"

namespace nstab {

CubeFn::CubeFn(unsigned n_, unsigned k_) : n(n_), k(k_) {
  if (n_ > kMaxCubeDim) throw std::invalid_argument("CubeFn: n exceeds 20");
  if (k_ < 1 || k_ > 255) throw std::invalid_argument("CubeFn: k must lie in [1, 255]");
  labels.assign(std::size_t{1} << n_, 0);
}

void CubeFn::validate() const {
  if (n > kMaxCubeDim) throw std::invalid_argument("CubeFn: n exceeds 20");
  if (labels.size() != (std::size_t{1} << n)) throw std::invalid_argument("CubeFn: table length");
  for (auto l : labels)
    if (l >= k) throw std::invalid_argument("CubeFn: label out of range");
}

double WalshSpectrum::norm_sq(std::uint32_t mask) const {
  double s = 0.0;
  for (unsigned j = 0; j < k; ++j) s += coeffs[mask * k + j] * coeffs[mask * k + j];
  return s;
}

std::vector<double> WalshSpectrum::coefficient(std::uint32_t mask) const {
  return {coeffs.begin() + mask * k, coeffs.begin() + (mask + 1) * k};
}

WalshSpectrum walsh_transform(const CubeFn& f, Exec exec) {
  f.validate();
  const std::size_t size = f.size();
  const unsigned k = f.k;
  std::vector<double> work(size * k, 0.0);  // [label][point]
  for (std::size_t b = 0; b < size; ++b) work[f.labels[b] * size + b] = 1.0;

  const bool par = exec == Exec::parallel && size >= kChunkSize;
  for (unsigned j = 0; j < k; ++j) {
    double* a = work.data() + j * size;
    for (std::size_t half = 1; half < size; half <<= 1) {
      const std::int64_t blocks = static_cast<std::int64_t>(size / (2 * half));
#pragma omp parallel for if (par) schedule(static)
      for (std::int64_t blk = 0; blk < blocks; ++blk) {
        const std::size_t base = static_cast<std::size_t>(blk) * 2 * half;
        for (std::size_t i = base; i < base + half; ++i) {
          const double u = a[i];
          const double v = a[i + half];
          a[i] = u + v;
          a[i + half] = u - v;
        }
      }
    }
  }
  WalshSpectrum s;
  s.n = f.n;
  s.k = k;
  s.coeffs.resize(size * k);
  const double scale = 1.0 / static_cast<double>(size);
  for (std::size_t mask = 0; mask < size; ++mask)
    for (unsigned j = 0; j < k; ++j) s.coeffs[mask * k + j] = work[j * size + mask] * scale;
  return s;
}

double cube_stability(const WalshSpectrum& spectrum, double rho) {
  if (!(std::fabs(rho) <= 1.0)) throw std::invalid_argument("cube_stability: |rho| > 1");
  double s = 0.0;
  const std::size_t size = std::size_t{1} << spectrum.n;
  for (std::size_t mask = 0; mask < size; ++mask)
    s += std::pow(rho, std::popcount(mask)) * spectrum.norm_sq(static_cast<std::uint32_t>(mask));
  return s;
}

double cube_stability(const CubeFn& f, double rho) {
  return cube_stability(walsh_transform(f), rho);
}

double cube_stability_bruteforce(const CubeFn& f, double rho) {
  f.validate();
  if (f.n > 8) throw std::invalid_argument("cube_stability_bruteforce: n <= 8");
  if (!(std::fabs(rho) <= 1.0)) throw std::invalid_argument("cube_stability_bruteforce: |rho| > 1");
  const double same = (1.0 + rho) / 2.0;
  const double flip = (1.0 - rho) / 2.0;
  const std::size_t size = f.size();
  double s = 0.0;
  for (std::size_t x = 0; x < size; ++x) {
    for (std::size_t y = 0; y < size; ++y) {
      if (f.labels[x] != f.labels[y]) continue;
      const int flips = std::popcount(x ^ y);
      s += std::pow(same, f.n - flips) * std::pow(flip, flips);
    }
  }
  return s / static_cast<double>(size);
}

std::vector<double> cube_influences(const WalshSpectrum& spectrum) {
  std::vector<double> inf(spectrum.n, 0.0);
  const std::size_t size = std::size_t{1} << spectrum.n;
  for (std::size_t mask = 1; mask < size; ++mask) {
    const double w = spectrum.norm_sq(static_cast<std::uint32_t>(mask));
    for (unsigned i = 0; i < spectrum.n; ++i)
      if (mask & (std::size_t{1} << i)) inf[i] += w;
  }
  return inf;
}

std::vector<double> cube_influences(const CubeFn& f) { return cube_influences(walsh_transform(f)); }

std::vector<double> cube_influences_bruteforce(const CubeFn& f) {
  f.validate();
  // Along coordinate i the embedding takes two values u, v with equal weight;
  // its variance is ||u - v||^2 / 4, which is 1/2 when the labels differ.
  std::vector<double> inf(f.n, 0.0);
  for (unsigned i = 0; i < f.n; ++i) {
    const std::size_t bit = std::size_t{1} << i;
    double s = 0.0;
    for (std::size_t b = 0; b < f.size(); ++b)
      if (!(b & bit) && f.labels[b] != f.labels[b | bit]) s += 0.5;
    inf[i] = s / static_cast<double>(f.size() / 2);
  }
  return inf;
}

double cube_variance(const CubeFn& f) {
  f.validate();
  std::vector<double> mu(f.k, 0.0);
  for (auto l : f.labels) mu[l] += 1.0;
  double s = 0.0;
  for (double m : mu) s += (m / f.size()) * (m / f.size());
  return 1.0 - s;
}

VotingRule parse_voting_rule(const std::string& name) {
  if (name == "dictator") return VotingRule::dictator;
  if (name == "majority") return VotingRule::majority;
  if (name == "plurality") return VotingRule::plurality;
  if (name == "slab-embedding" || name == "slab_embedding") return VotingRule::slab_embedding;
  if (name == "parity") return VotingRule::parity;
  throw std::invalid_argument("unknown voting rule: " + name);
}

std::string to_string(VotingRule rule) {
  switch (rule) {
    case VotingRule::dictator: return "dictator";
    case VotingRule::majority: return "majority";
    case VotingRule::plurality: return "plurality";
    case VotingRule::slab_embedding: return "slab-embedding";
    case VotingRule::parity: return "parity";
  }
  return "unknown";
}

CubeFn make_voting_rule(VotingRule rule, unsigned n, unsigned k) {
  if (n == 0) throw std::invalid_argument("make_voting_rule: n must be >= 1");
  if (k < 2) throw std::invalid_argument("make_voting_rule: k must be >= 2");
  CubeFn f(n, k);
  const std::size_t size = f.size();
  switch (rule) {
    case VotingRule::dictator:
      for (std::size_t b = 0; b < size; ++b) f.labels[b] = static_cast<std::uint8_t>(b & 1u);
      break;
    case VotingRule::majority:
      if (n % 2 == 0) throw std::invalid_argument("make_voting_rule: majority needs odd n");
      if (k != 2) throw std::invalid_argument("make_voting_rule: majority needs k = 2");
      for (std::size_t b = 0; b < size; ++b)
        f.labels[b] = static_cast<std::uint8_t>(2 * std::popcount(b) > static_cast<int>(n));
      break;
    case VotingRule::parity:
      if (k != 2) throw std::invalid_argument("make_voting_rule: parity needs k = 2");
      for (std::size_t b = 0; b < size; ++b) f.labels[b] = static_cast<std::uint8_t>(std::popcount(b) & 1);
      break;
    case VotingRule::plurality: {
      // Groups of ceil(log2 k) bits are read as base-2 numbers and reduced mod k;
      // the most frequent symbol wins, ties to the smallest.
      const unsigned width = std::max(1u, static_cast<unsigned>(std::bit_width(k - 1)));
      const unsigned groups = n / width;
      if (groups == 0) throw std::invalid_argument("make_voting_rule: n too small for plurality");
      std::vector<unsigned> count(k);
      for (std::size_t b = 0; b < size; ++b) {
        std::fill(count.begin(), count.end(), 0u);
        for (unsigned g = 0; g < groups; ++g) {
          const unsigned v = static_cast<unsigned>((b >> (g * width)) & ((1u << width) - 1u));
          ++count[v % k];
        }
        f.labels[b] = static_cast<std::uint8_t>(
            std::max_element(count.begin(), count.end()) - count.begin());
      }
      break;
    }
    case VotingRule::slab_embedding: {
      // Label by the Gaussian slab containing sum(x) / sqrt(n).
      std::vector<double> cut(k - 1);
      for (unsigned j = 1; j < k; ++j) cut[j - 1] = normal_quantile(static_cast<double>(j) / k);
      for (std::size_t b = 0; b < size; ++b) {
        const double s = (static_cast<double>(n) - 2.0 * std::popcount(b)) / std::sqrt(n);
        f.labels[b] = static_cast<std::uint8_t>(
            std::upper_bound(cut.begin(), cut.end(), s) - cut.begin());
      }
      break;
    }
  }
  return f;
}

namespace {
constexpr char kAlphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
}

std::string base64_encode(const std::vector<std::uint8_t>& bytes) {
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  for (std::size_t i = 0; i < bytes.size(); i += 3) {
    const std::uint32_t b0 = bytes[i];
    const std::uint32_t b1 = i + 1 < bytes.size() ? bytes[i + 1] : 0;
    const std::uint32_t b2 = i + 2 < bytes.size() ? bytes[i + 2] : 0;
    const std::uint32_t triple = (b0 << 16) | (b1 << 8) | b2;
    out += kAlphabet[(triple >> 18) & 63];
    out += kAlphabet[(triple >> 12) & 63];
    out += i + 1 < bytes.size() ? kAlphabet[(triple >> 6) & 63] : '=';
    out += i + 2 < bytes.size() ? kAlphabet[triple & 63] : '=';
  }
  return out;
}

std::vector<std::uint8_t> base64_decode(const std::string& text) {
  auto value = [](char c) -> int {
    if (c >= 'A' && c <= 'Z') return c - 'A';
    if (c >= 'a' && c <= 'z') return c - 'a' + 26;
    if (c >= '0' && c <= '9') return c - '0' + 52;
    if (c == '+') return 62;
    if (c == '/') return 63;
    return -1;
  };
  if (text.size() % 4 != 0) throw std::invalid_argument("base64: length not a multiple of 4");
  std::vector<std::uint8_t> out;
  for (std::size_t i = 0; i < text.size(); i += 4) {
    std::uint32_t triple = 0;
    int pad = 0;
    for (int j = 0; j < 4; ++j) {
      const char c = text[i + j];
      int v = 0;
      if (c == '=') {
        ++pad;
      } else {
        v = value(c);
        if (v < 0 || pad > 0) throw std::invalid_argument("base64: invalid character");
      }
      triple = (triple << 6) | static_cast<std::uint32_t>(v);
    }
    out.push_back(static_cast<std::uint8_t>(triple >> 16));
    if (pad < 2) out.push_back(static_cast<std::uint8_t>((triple >> 8) & 255));
    if (pad < 1) out.push_back(static_cast<std::uint8_t>(triple & 255));
  }
  return out;
}

}  // namespace nstab
