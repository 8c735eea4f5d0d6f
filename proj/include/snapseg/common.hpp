// SPDX-FileCopyrightText: 2026 The snapseg Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef SNAPSEG_COMMON_HPP
#define SNAPSEG_COMMON_HPP

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace snapseg {

/// Index of a point inside a PointCloud.
using PointIndex = std::uint32_t;

/// One sample per row (snapshot features, cluster centres, ...).
using FeatureMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Class id reserved for points without a ground-truth or predicted label.
inline constexpr int kUnlabeled = -1;

/// The one random engine used across the pipeline. Every stage takes an
/// explicit seed so runs are reproducible.
using Rng = std::mt19937_64;

/// Derives an independent stream for a sub-stage (worker, seed offset, ...).
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t salt) {
  // splitmix64 finalizer
  std::uint64_t z = base + 0x9E3779B97F4A7C15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed text input; `line()` is 1-based.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error(what + " (line " + std::to_string(line) + ")"), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// Inputs that parse individually but disagree with each other.
class StructuralError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace snapseg

#endif  // SNAPSEG_COMMON_HPP
