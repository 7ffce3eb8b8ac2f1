#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fairreg/audit.hpp"
#include "fairreg/fairloss.hpp"
#include "fairreg/model.hpp"

namespace fairreg {

enum class SweepStrategy { ladder, random };

std::string_view to_string(SweepStrategy strategy);
std::optional<SweepStrategy> parse_sweep_strategy(std::string_view text);

inline constexpr double kDefaultFloorMargin = 0.02;

struct SweepConfig {
  double lambda_low = 0.1;
  double lambda_high = 1000.0;  // exclusive
  int n_trials = 20;
  SweepStrategy strategy = SweepStrategy::ladder;
  LossKind loss_kind = LossKind::iou;
  // Validation accuracy a trial must keep; defaults to baseline - 0.02.
  std::optional<double> accuracy_floor;
  double ladder_ratio = std::sqrt(10.0);
  std::uint64_t seed = 1;
  // Fine-tuning settings; lambda, loss_kind and seed are set per trial.
  TrainConfig base;

  void validate() const;
};

struct TrialRecord {
  int trial = 0;
  double lambda = 0.0;
  std::uint64_t seed = 0;
  std::optional<double> val_sigma_iou;
  double val_accuracy = 0.0;
  std::array<double, 5> val_fairness{};
};

struct SweepResult {
  LossKind loss_kind = LossKind::iou;
  SweepStrategy strategy = SweepStrategy::ladder;
  double baseline_accuracy = 0.0;
  std::optional<double> baseline_sigma_iou;
  std::array<double, 5> baseline_fairness{};
  double accuracy_floor = 0.0;

  std::vector<TrialRecord> trials;
  std::optional<int> selected_trial;  // nullopt: fell back to the baseline
  double selected_lambda = 0.0;
  ModelParams selected_params;
  AuditReport selected_test_report;

  std::string stop_reason;
  std::vector<std::string> warnings;
};

struct SweepData {
  const LabeledSet& train;
  const LabeledSet& val;
  const LabeledSet& test;
  const ModelParams& baseline;
};

// Trial seed derived from the sweep seed and the trial index.
std::uint64_t trial_seed(std::uint64_t sweep_seed, int trial);

// Trains one trial from the baseline and evaluates it on the validation rows.
TrialRecord run_trial(const SweepConfig& config, const SweepData& data, int trial, double lambda,
                      ModelParams* params_out = nullptr);

// Geometric ladder low * r^k in increasing order; stops at the first trial
// below the accuracy floor, at the top of the range, or after n_trials.
SweepResult ladder(const SweepConfig& config, const SweepData& data);

// n_trials log-uniform lambdas from the seeded generator, run in parallel.
SweepResult random_search(const SweepConfig& config, const SweepData& data);

SweepResult run_sweep(const SweepConfig& config, const SweepData& data);

// Minimal validation sigma_IoU among trials at or above the floor; lowest
// trial index wins ties.
std::optional<int> select_trial(std::span<const TrialRecord> trials, double accuracy_floor);

// Spearman rank correlation with average ranks; 0 when either side is constant.
double spearman(std::span<const double> x, std::span<const double> y);

struct Trend {
  std::optional<double> spearman_fairness;  // log lambda vs sigma_IoU
  std::optional<double> spearman_accuracy;  // log lambda vs accuracy
  std::vector<int> pareto_set;              // trial indices, ascending
};

Trend trend(const SweepResult& result);

std::string trials_jsonl(const SweepResult& result);
nlohmann::ordered_json summary_json(const SweepResult& result);

}  // namespace fairreg
