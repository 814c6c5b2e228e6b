#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace sbikit {

using Eigen::MatrixXd;
using Eigen::VectorXd;

inline constexpr double kLog2Pi = 1.8378770664093454836;
inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

/// Error in user-supplied configuration or arguments (CLI exit code 1).
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Numerical failure during a run (CLI exit code 2).
struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

// splitmix64 finalizer; decorrelates nearby seeds.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Derives a child seed from a base seed, a textual label, and an index.
/// Used everywhere a run seed fans out into sub-streams ("sim", "train", ...).
inline std::uint64_t derive_seed(std::uint64_t base, std::string_view label,
                                 std::uint64_t index = 0) {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a over the label
  for (char c : label) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return mix64(base ^ mix64(h) ^ mix64(index * 0x9e3779b97f4a7c15ULL + 1));
}

/// Deterministic random generator. Wraps mt19937_64; normal draws use
/// Box-Muller without caching so the stream state is a pure function of
/// the number of draws taken.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  /// Uniform double in [0, 1).
  double uniform() {
    return std::generate_canonical<double, 53>(gen_);
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double normal() {
    double u1 = uniform();
    double u2 = uniform();
    // guard u1 = 0
    u1 = std::max(u1, 1e-300);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
  }

  VectorXd normal_vec(int n) {
    VectorXd v(n);
    for (int i = 0; i < n; ++i) v[i] = normal();
    return v;
  }

  MatrixXd normal_mat(int rows, int cols) {
    MatrixXd m(rows, cols);
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < cols; ++j) m(i, j) = normal();
    return m;
  }

  /// Index in [0, n).
  int index(int n) {
    return static_cast<int>(std::min<double>(n - 1, uniform() * n));
  }

  /// Draws an index from unnormalized nonnegative weights.
  int categorical(const VectorXd& weights) {
    double total = weights.sum();
    double u = uniform() * total;
    double acc = 0.0;
    for (int i = 0; i < weights.size(); ++i) {
      acc += weights[i];
      if (u < acc) return i;
    }
    return static_cast<int>(weights.size()) - 1;
  }

  /// Fisher-Yates shuffle of indices 0..n-1.
  std::vector<int> permutation(int n) {
    std::vector<int> p(n);
    for (int i = 0; i < n; ++i) p[i] = i;
    for (int i = n - 1; i > 0; --i) {
      int j = index(i + 1);
      std::swap(p[i], p[j]);
    }
    return p;
  }

  std::mt19937_64& engine() { return gen_; }

 private:
  std::mt19937_64 gen_;
};

inline double logsumexp(const VectorXd& v) {
  double m = v.maxCoeff();
  if (!std::isfinite(m)) return m;  // all -inf (or a stray +inf)
  return m + std::log((v.array() - m).exp().sum());
}

inline bool all_finite(const MatrixXd& m) { return m.allFinite(); }

inline std::string format_double(double v, int sig_digits = 17) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*g", sig_digits, v);
  return buf;
}

// Lossless base-16 encoding of little-endian float64 buffers (checkpoint
// weight payloads).
std::string doubles_to_hex(const VectorXd& v);
VectorXd hex_to_doubles(const std::string& hex);

}  // namespace sbikit
