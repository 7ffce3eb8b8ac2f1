#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "fairreg/fairloss.hpp"
#include "fairreg/prob_batch.hpp"

namespace fairreg {

// soft: probability-weighted statistics, the quantities the losses optimize.
// hard: every row replaced by the one-hot vector of its argmax.
enum class AuditMode { soft, hard };

std::string_view to_string(AuditMode mode);
std::optional<AuditMode> parse_audit_mode(std::string_view text);

// Fraction of rows whose argmax (lowest index on ties) equals the target.
double accuracy(const ProbBatch& batch);

// Tie-corrected Mann-Whitney AUC of the class-1 score. Requires K_t == 2;
// nullopt when only one class is present.
std::optional<double> auc(const ProbBatch& batch);

// Bessel-corrected standard deviation over the present group IoUs; nullopt
// with fewer than two present groups.
std::optional<double> sigma_iou(std::span<const std::optional<double>> group_ious);
std::optional<double> sigma_iou(const ProbBatch& batch);

ProbBatch harden(const ProbBatch& batch);

struct AuditReport {
  AuditMode mode = AuditMode::soft;
  std::size_t num_samples = 0;
  int num_classes = 0;
  int num_groups = 0;
  double accuracy = 0.0;
  std::optional<double> auc;
  std::array<double, 5> fairness{};  // kAllLossKinds order
  double iou_overall = 0.0;
  std::vector<std::optional<double>> iou_per_group;
  std::optional<double> sigma_iou;
  std::vector<std::string> warnings;

  double metric(LossKind kind) const { return fairness[static_cast<std::size_t>(kind)]; }
};

AuditReport audit(const ProbBatch& batch, AuditMode mode = AuditMode::soft);
AuditReport audit_dump(const std::filesystem::path& dump, AuditMode mode = AuditMode::soft,
                       int num_groups = 0);

nlohmann::ordered_json to_json(const AuditReport& report);
std::string report_json(const AuditReport& report);
// Fixed-width table: Acc, AUC, L_iou, L2_eo, MI_eo, L2_dp, MI_dp, sigma_IoU.
std::string report_text(const AuditReport& report);

// Two whitespace-separated columns with a commented header line.
std::string plot_data(std::string_view x_name, std::string_view y_name,
                      std::span<const double> xs, std::span<const double> ys);

}  // namespace fairreg
