#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fairreg/matrix.hpp"
#include "fairreg/model.hpp"
#include "fairreg/prob_batch.hpp"

namespace fairreg {

inline constexpr int kDatasetFormatVersion = 1;
inline constexpr int kPredictionFormatVersion = 1;

enum class Partition { train, val, test };

std::string_view to_string(Partition partition);
std::optional<Partition> parse_partition(std::string_view text);

// Desk-scale biased classification problem.
//
// Each group c draws its target from a mix of the uniform distribution and a
// preference for class (c mod K_t), the preference weighted by
// bias_strength * label_coupling. Features are a class centroid scaled by
// 1 - bias_strength * c / (K_s - 1), so higher-indexed groups are harder to
// separate, plus a per-group offset of size group_signal on one of the
// trailing feature axes and isotropic Gaussian noise.
//
// With group_axes = g > 0 the class centroid is split between a shared block
// of K_t axes (weight sqrt(1 - g)) and a block owned by the group (weight
// sqrt(g)); the distance between class means is unchanged.
struct SyntheticSpec {
  std::size_t n_samples = 10000;
  int num_classes = 2;
  int num_groups = 2;
  int feature_dim = 4;
  double bias_strength = 0.0;
  std::vector<double> group_imbalance;  // empty means balanced
  double noise_scale = 1.0;
  double class_separation = 3.0;
  double label_coupling = 0.5;
  double group_signal = 1.0;
  double group_axes = 0.0;
  std::uint64_t seed = 1;

  void validate() const;
  // Leading feature axes that carry class signal.
  int class_axes() const;
  std::vector<double> group_weights() const;
};

struct Dataset {
  Matrix features;
  std::vector<int> target;
  std::vector<int> sensitive;
  std::vector<Partition> partition;
  int num_classes = 2;
  int num_groups = 2;

  std::size_t size() const noexcept { return target.size(); }
  LabeledSet subset(Partition which) const;
};

Dataset generate(const SyntheticSpec& spec);

std::string dataset_csv(const Dataset& data);
void write_dataset(const Dataset& data, const std::filesystem::path& path);
// Class and group counts are inferred (at least 2) unless given.
Dataset read_dataset(const std::filesystem::path& path, int num_classes = 0, int num_groups = 0);

struct PredictionDump {
  std::vector<long long> sample_ids;
  ProbBatch batch;
};

// Empty ids means 0..N-1.
std::string prediction_csv(const ProbBatch& batch, std::span<const long long> sample_ids = {});
void write_prediction_dump(const ProbBatch& batch, const std::filesystem::path& path,
                           std::span<const long long> sample_ids = {});
PredictionDump read_prediction_dump(const std::filesystem::path& path, int num_groups = 0);

}  // namespace fairreg
