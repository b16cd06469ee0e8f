#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace spbe {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

class DimensionMismatch : public Error {
 public:
  explicit DimensionMismatch(const std::string& what) : Error("dimension mismatch: " + what) {}
};

class EnumerationTooLarge : public Error {
 public:
  explicit EnumerationTooLarge(double estimated_count)
      : Error("enumeration too large: estimated " + std::to_string(estimated_count) +
              " weighted branches"),
        estimated_count(estimated_count) {}
  double estimated_count;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& where, const std::string& message)
      : Error("parse error at " + where + ": " + message), where(where), message(message) {}
  std::string where;
  std::string message;
};

// Mixed-radix index helpers for joint (per-player) indices.  Player 0 is the
// most significant digit throughout the library and all file formats.
inline int joint_index(std::span<const int> digits, std::span<const int> sizes) {
  int idx = 0;
  for (size_t i = 0; i < sizes.size(); ++i) idx = idx * sizes[i] + digits[i];
  return idx;
}

inline std::vector<int> split_index(int idx, std::span<const int> sizes) {
  std::vector<int> digits(sizes.size());
  for (size_t i = sizes.size(); i-- > 0;) {
    digits[i] = idx % sizes[i];
    idx /= sizes[i];
  }
  return digits;
}

inline int space_size(std::span<const int> sizes) {
  int n = 1;
  for (int s : sizes) n *= s;
  return n;
}

/// SplitMix64 step; used to derive independent deterministic RNG streams
/// from a single user seed.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline void hash_combine(std::size_t& h, std::size_t v) {
  h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
}

}  // namespace spbe
