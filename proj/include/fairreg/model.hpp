#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fairreg/fairloss.hpp"
#include "fairreg/matrix.hpp"
#include "fairreg/prob_batch.hpp"

namespace fairreg {

inline constexpr int kModelFormatVersion = 1;

// hidden == 0 is a linear softmax model; otherwise one tanh layer of that width.
struct Architecture {
  int input_dim = 0;
  int hidden = 0;
  int classes = 0;

  bool operator==(const Architecture&) const = default;
};

struct DenseLayer {
  Matrix weights;  // fan_in x fan_out
  std::vector<double> bias;

  bool operator==(const DenseLayer&) const = default;
};

struct ModelParams {
  Architecture arch;
  std::vector<DenseLayer> layers;

  std::size_t num_parameters() const;
  // Flat views in layer order (weights, then bias).
  std::vector<double> flatten() const;
  void assign_flat(std::span<const double> flat);

  bool operator==(const ModelParams&) const = default;
};

// Weights uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)], zero biases.
ModelParams init_params(const Architecture& arch, std::uint64_t seed);
ModelParams zero_params(const Architecture& arch);

// Row-wise softmax outputs, N x classes.
Matrix forward(const ModelParams& params, const Matrix& features);

// Effective-number-of-samples weights (1 - beta) / (1 - beta^n), mean 1.
struct ClassWeights {
  std::vector<double> values;
};

ClassWeights class_weights(std::span<const long long> class_counts, double beta);
ClassWeights unit_weights(int num_classes);

// -weight[y*] log(max(p[y*], 1e-12)) per sample, gradient w.r.t. probs.
PerSampleLoss weighted_cross_entropy(const ProbBatch& batch, const ClassWeights& weights);

// Features with labels, the unit the trainer consumes.
struct LabeledSet {
  Matrix features;
  std::vector<int> target;
  std::vector<int> sensitive;
  int num_classes = 2;
  int num_groups = 2;

  std::size_t size() const noexcept { return target.size(); }
};

// Summed weighted cross-entropy of the rows plus lambda times the fairness
// loss on the same rows, with its gradient w.r.t. every model parameter.
struct ObjectiveResult {
  double value = 0.0;
  double cross_entropy = 0.0;
  double fairness = 0.0;
  ModelParams grad;
  std::vector<std::string> warnings;
  bool fairness_evaluated = false;
};

ObjectiveResult objective(const ModelParams& params, const LabeledSet& rows,
                          const ClassWeights& weights, std::optional<LossKind> kind,
                          double lambda);

struct TrainConfig {
  double lambda = 0.0;
  std::optional<LossKind> loss_kind;
  std::size_t batch_size = 64;
  double learning_rate = 0.01;
  int epochs = 20;
  std::uint64_t seed = 1;
  std::optional<double> class_weight_beta;

  void validate() const;
};

struct EpochRecord {
  int epoch = 0;
  double train_objective = 0.0;  // mean over the epoch's mini-batches
  double train_accuracy = 0.0;
  double heldout_accuracy = 0.0;
  std::array<double, 5> heldout_fairness{};  // kAllLossKinds order
  std::optional<double> heldout_sigma_iou;
  std::size_t degenerate_batches = 0;
};

struct TrainResult {
  ModelParams params;
  std::vector<EpochRecord> history;
  std::size_t fairness_evaluations = 0;
};

// Plain mini-batch SGD. Deterministic for a given seed; the final mini-batch
// of an epoch is dropped when it is smaller than the number of groups.
TrainResult train(const LabeledSet& train_set, const LabeledSet& held_out,
                  const TrainConfig& config, const ModelParams& init);

ProbBatch predict(const ModelParams& params, const LabeledSet& rows);

std::string serialize_model(const ModelParams& params);
ModelParams deserialize_model(std::string_view text, const std::string& source = "<model>");
void save_model(const ModelParams& params, const std::filesystem::path& path);
ModelParams load_model(const std::filesystem::path& path);

std::string history_csv(const std::vector<EpochRecord>& history);

}  // namespace fairreg
