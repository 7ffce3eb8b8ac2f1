#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fairreg/matrix.hpp"
#include "fairreg/prob_batch.hpp"
#include "fairreg/stats.hpp"

namespace fairreg {

// The five group-fairness penalties, in reporting column order.
enum class LossKind { iou, l2_eo, mi_eo, l2_dp, mi_dp };

inline constexpr std::array<LossKind, 5> kAllLossKinds = {
    LossKind::iou, LossKind::l2_eo, LossKind::mi_eo, LossKind::l2_dp, LossKind::mi_dp};

// Stable report key: l_iou, l2_eo, mi_eo, l2_dp, mi_dp.
std::string_view to_string(LossKind kind);

// Accepts the report keys plus short aliases (iou, eo-l2, dp-mi, ...).
std::optional<LossKind> parse_loss_kind(std::string_view text);

struct LossResult {
  double value = 0.0;
  Matrix grad;  // dL/dprobs, N x K_t
  std::vector<std::string> warnings;

  bool degenerate() const noexcept { return !warnings.empty(); }
};

// Loss value and its gradient with respect to the joint table cells.
struct TableLoss {
  double value = 0.0;
  std::vector<double> dtable;
  std::vector<std::string> warnings;
};

TableLoss table_loss(LossKind kind, const JointDistribution& joint);

LossResult dp_l2(const ProbBatch& batch);
LossResult dp_mi(const ProbBatch& batch);
LossResult eo_l2(const ProbBatch& batch);
LossResult eo_mi(const ProbBatch& batch);
LossResult iou_loss(const ProbBatch& batch);
LossResult fairness_loss(LossKind kind, const ProbBatch& batch);

// Soft IoU terms. A cell is absent when its union mass is zero; a group is
// absent when none of its cells is present. Averages run over present cells.
struct IouComponents {
  int num_classes = 0;
  int num_groups = 0;
  std::vector<std::optional<double>> per_class_group;  // K_t x K_s, row-major
  std::vector<std::optional<double>> per_class;        // K_t, whole batch
  std::vector<std::optional<double>> per_group;        // K_s
  double overall = 0.0;

  const std::optional<double>& at(int a, int c) const {
    return per_class_group[static_cast<std::size_t>(a) * num_groups + c];
  }
};

IouComponents iou_components(const JointDistribution& joint);
IouComponents iou_components(const ProbBatch& batch);

// Per-sample terms of the primary loss with their dL/dprobs rows.
struct PerSampleLoss {
  std::vector<double> values;
  Matrix grad;
};

// Sum of the per-sample terms plus lambda times the fairness loss. With
// lambda == 0 the fairness loss is not evaluated at all.
LossResult combined_loss(const ProbBatch& batch, const PerSampleLoss& primary, LossKind kind,
                         double lambda);

struct SqueezeParams {
  double alpha = 1.0;  // in (0, 1]
};

// Mixes every row with the uniform distribution: p' = alpha p + (1 - alpha) / K_t.
ProbBatch squeeze(const ProbBatch& batch, SqueezeParams params);

}  // namespace fairreg
