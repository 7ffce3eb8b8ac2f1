#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "fairreg/matrix.hpp"

namespace fairreg {

inline constexpr double kSimplexTolerance = 1e-9;

// How strictly a ProbBatch checks its probability rows. `shape` only checks
// dimensions, label ranges and finiteness; it exists for finite-difference
// probes that step off the simplex.
enum class Validation { full, shape };

// N predicted distributions over K_t target classes together with the
// ground-truth target and sensitive labels of each sample.
class ProbBatch {
 public:
  // num_groups == 0 infers K_s as max(2, max sensitive label + 1).
  ProbBatch(Matrix probs, std::vector<int> target, std::vector<int> sensitive,
            int num_groups = 0, Validation validation = Validation::full);

  std::size_t size() const noexcept { return probs_.rows(); }
  int num_classes() const noexcept { return static_cast<int>(probs_.cols()); }
  int num_groups() const noexcept { return num_groups_; }

  const Matrix& probs() const noexcept { return probs_; }
  std::span<const int> target() const noexcept { return target_; }
  std::span<const int> sensitive() const noexcept { return sensitive_; }

  // Same labels, new probabilities.
  ProbBatch with_probs(Matrix probs, Validation validation = Validation::full) const;

 private:
  Matrix probs_;
  std::vector<int> target_;
  std::vector<int> sensitive_;
  int num_groups_ = 0;
};

// Index of the largest entry; ties go to the lowest index.
int argmax(std::span<const double> row);

}  // namespace fairreg
