#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "fairreg/matrix.hpp"
#include "fairreg/prob_batch.hpp"

namespace fairreg {

// Clamp applied to every log argument so information terms stay finite.
inline constexpr double kLogFloor = 1e-12;

enum class Axis { pred = 0, target = 1, sensitive = 2 };

// Batch estimate of p(y_t, y_t*, y_s*). Cell (a, b, c) holds the
// probability-weighted frequency of predicted class a among samples with
// ground-truth target b and sensitive group c. Alongside it the empirical
// (y_t*, y_s*) frequencies are kept, since the loss denominators are
// ground-truth quantities and do not move with the predictions.
class JointDistribution {
 public:
  JointDistribution(int num_classes, int num_groups, std::vector<double> table,
                    std::vector<double> label_freq, std::size_t num_samples);

  int num_classes() const noexcept { return kt_; }
  int num_groups() const noexcept { return ks_; }
  std::size_t num_samples() const noexcept { return n_; }

  double operator()(int a, int b, int c) const;
  std::span<const double> table() const noexcept { return table_; }

  // Empirical p(y_t* = b, y_s* = c), row-major K_t x K_s.
  double label_freq(int b, int c) const { return label_freq_[b * ks_ + c]; }
  std::span<const double> label_freq() const noexcept { return label_freq_; }

  std::size_t extent(Axis axis) const;

 private:
  int kt_;
  int ks_;
  std::vector<double> table_;
  std::vector<double> label_freq_;
  std::size_t n_;
};

// Distribution over a subset of the joint's axes, stored row-major in the
// canonical axis order (pred, target, sensitive).
struct Distribution {
  std::vector<Axis> axes;
  std::vector<std::size_t> shape;
  std::vector<double> values;

  double at(std::span<const std::size_t> index) const;
  double sum() const;
};

JointDistribution estimate_joint(const ProbBatch& batch);

// Sums out every axis not listed in `keep`.
Distribution marginal(const JointDistribution& joint, std::span<const Axis> keep);

// Distribution of the remaining two axes given `given == value`; nullopt when
// the conditioning value carries no mass in this batch.
std::optional<Distribution> conditional(const JointDistribution& joint, Axis given, int value);

// Shannon entropy in nats with 0 log 0 = 0. Entries must be nonnegative.
double entropy(std::span<const double> dist);

// dL/dprobs from dL/dtable through the soft-count estimator: each cell's
// derivative with respect to probs[i][a] is 1/N when sample i's labels match.
Matrix joint_backward(const ProbBatch& batch, std::span<const double> dtable);

}  // namespace fairreg
