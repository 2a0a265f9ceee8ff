#ifndef TAILCP_TYPES_HPP
#define TAILCP_TYPES_HPP

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace tailcp {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad configuration: inconsistent options, missing inputs for a method,
// invalid parameter ranges. Maps to CLI exit code 1.
struct ConfigError : Error {
  using Error::Error;
};

// Bad data: unreadable/malformed files, invalid profiles, degenerate splits.
// Maps to CLI exit code 2.
struct DataError : Error {
  using Error::Error;
};

// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(int rows, int cols, double fill = 0.0)
      : rows_(rows), cols_(cols),
        v_(static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols),
           fill) {}

  int rows() const { return rows_; }
  int cols() const { return cols_; }

  double& at(int i, int j) {
    return v_[static_cast<std::size_t>(i) * cols_ + j];
  }
  double at(int i, int j) const {
    return v_[static_cast<std::size_t>(i) * cols_ + j];
  }

  std::span<double> row(int i) {
    return {v_.data() + static_cast<std::size_t>(i) * cols_,
            static_cast<std::size_t>(cols_)};
  }
  std::span<const double> row(int i) const {
    return {v_.data() + static_cast<std::size_t>(i) * cols_,
            static_cast<std::size_t>(cols_)};
  }

  const std::vector<double>& data() const { return v_; }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<double> v_;
};

// N x K matrix of estimated class posteriors; rows sum to 1.
using ProbMatrix = Matrix;

// Integer labels in [0, K), aligned with ProbMatrix rows.
struct LabeledBatch {
  std::vector<int> labels;

  int n() const { return static_cast<int>(labels.size()); }

  friend bool operator==(const LabeledBatch&, const LabeledBatch&) = default;
};

struct Dataset {
  LabeledBatch batch;
  ProbMatrix probs;
};

// Throws DataError unless every row of `m` is a probability vector
// (entries in [0,1], row sum within `tol` of 1).
void validate_prob_matrix(const Matrix& m, double tol = 1e-9);

}  // namespace tailcp

#endif  // TAILCP_TYPES_HPP
