#include "fairreg/prob_batch.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "fairreg/error.hpp"

namespace fairreg {

std::string_view to_string(ErrorCategory category) {
  switch (category) {
    case ErrorCategory::input: return "input";
    case ErrorCategory::parse: return "parse";
    case ErrorCategory::io: return "io";
    case ErrorCategory::config: return "config";
    case ErrorCategory::runtime: return "runtime";
  }
  return "runtime";
}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols) {
    input_error("matrix data has " + std::to_string(data_.size()) +
                " entries, expected " + std::to_string(rows * cols));
  }
}

ProbBatch::ProbBatch(Matrix probs, std::vector<int> target, std::vector<int> sensitive,
                     int num_groups, Validation validation)
    : probs_(std::move(probs)),
      target_(std::move(target)),
      sensitive_(std::move(sensitive)) {
  const std::size_t n = probs_.rows();
  if (n == 0) input_error("batch must contain at least one sample");
  if (target_.size() != n || sensitive_.size() != n) {
    input_error("batch dimension mismatch: " + std::to_string(n) + " probability rows, " +
                std::to_string(target_.size()) + " target labels, " +
                std::to_string(sensitive_.size()) + " sensitive labels");
  }
  const int kt = num_classes();
  if (kt < 2) input_error("need at least 2 target classes");

  int max_group = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (target_[i] < 0 || target_[i] >= kt) {
      input_error("target label " + std::to_string(target_[i]) + " out of range at row " +
                  std::to_string(i));
    }
    if (sensitive_[i] < 0) {
      input_error("negative sensitive label at row " + std::to_string(i));
    }
    max_group = std::max(max_group, sensitive_[i]);
  }
  if (num_groups == 0) {
    num_groups_ = std::max(2, max_group + 1);
  } else {
    if (num_groups < 2) input_error("need at least 2 sensitive groups");
    if (max_group >= num_groups) {
      input_error("sensitive label " + std::to_string(max_group) + " out of range for " +
                  std::to_string(num_groups) + " groups");
    }
    num_groups_ = num_groups;
  }

  for (std::size_t i = 0; i < n; ++i) {
    double sum = 0.0;
    for (double p : probs_.row(i)) {
      if (!std::isfinite(p)) input_error("non-finite probability at row " + std::to_string(i));
      if (validation == Validation::full && (p < 0.0 || p > 1.0)) {
        input_error("probability outside [0,1] at row " + std::to_string(i));
      }
      sum += p;
    }
    if (validation == Validation::full && std::abs(sum - 1.0) > kSimplexTolerance) {
      input_error("probability row " + std::to_string(i) + " sums to " + std::to_string(sum));
    }
  }
}

ProbBatch ProbBatch::with_probs(Matrix probs, Validation validation) const {
  return ProbBatch(std::move(probs), target_, sensitive_, num_groups_, validation);
}

int argmax(std::span<const double> row) {
  int best = 0;
  for (std::size_t a = 1; a < row.size(); ++a) {
    if (row[a] > row[best]) best = static_cast<int>(a);
  }
  return best;
}

}  // namespace fairreg
