#include "fairreg/audit.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "fairreg/data.hpp"
#include "fairreg/error.hpp"
#include "fairreg/io_util.hpp"
#include "fairreg/stats.hpp"

namespace fairreg {

std::string_view to_string(AuditMode mode) {
  return mode == AuditMode::soft ? "soft" : "hard";
}

std::optional<AuditMode> parse_audit_mode(std::string_view text) {
  if (text == "soft") return AuditMode::soft;
  if (text == "hard") return AuditMode::hard;
  return std::nullopt;
}

double accuracy(const ProbBatch& batch) {
  std::size_t correct = 0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    if (argmax(batch.probs().row(i)) == batch.target()[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(batch.size());
}

std::optional<double> auc(const ProbBatch& batch) {
  if (batch.num_classes() != 2) input_error("AUC is only defined for two target classes");
  const std::size_t n = batch.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  const auto& probs = batch.probs();
  std::sort(order.begin(), order.end(),
            [&](std::size_t x, std::size_t y) { return probs(x, 1) < probs(y, 1); });

  // Average ranks over tied scores.
  double positive_rank_sum = 0.0;
  std::size_t positives = 0;
  for (std::size_t start = 0; start < n;) {
    std::size_t end = start + 1;
    while (end < n && probs(order[end], 1) == probs(order[start], 1)) ++end;
    const double rank = 0.5 * static_cast<double>(start + 1 + end);
    for (std::size_t k = start; k < end; ++k) {
      if (batch.target()[order[k]] == 1) {
        positive_rank_sum += rank;
        ++positives;
      }
    }
    start = end;
  }
  const std::size_t negatives = n - positives;
  if (positives == 0 || negatives == 0) return std::nullopt;
  const double np = static_cast<double>(positives);
  return (positive_rank_sum - np * (np + 1.0) / 2.0) / (np * static_cast<double>(negatives));
}

std::optional<double> sigma_iou(std::span<const std::optional<double>> group_ious) {
  std::vector<double> present;
  for (const auto& v : group_ious) {
    if (v) present.push_back(*v);
  }
  if (present.size() < 2) return std::nullopt;
  const double mean =
      std::accumulate(present.begin(), present.end(), 0.0) / static_cast<double>(present.size());
  double ss = 0.0;
  for (double v : present) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / static_cast<double>(present.size() - 1));
}

std::optional<double> sigma_iou(const ProbBatch& batch) {
  return sigma_iou(iou_components(batch).per_group);
}

ProbBatch harden(const ProbBatch& batch) {
  Matrix hard(batch.size(), static_cast<std::size_t>(batch.num_classes()), 0.0);
  for (std::size_t i = 0; i < batch.size(); ++i) hard(i, argmax(batch.probs().row(i))) = 1.0;
  return batch.with_probs(std::move(hard));
}

AuditReport audit(const ProbBatch& batch, AuditMode mode) {
  AuditReport report;
  report.mode = mode;
  report.num_samples = batch.size();
  report.num_classes = batch.num_classes();
  report.num_groups = batch.num_groups();
  report.accuracy = accuracy(batch);
  // Ranking metric: always computed on the scores, never on hard decisions.
  if (batch.num_classes() == 2) {
    report.auc = auc(batch);
    if (!report.auc) report.warnings.emplace_back("auc: only one target class present");
  }

  const ProbBatch evaluated = mode == AuditMode::hard ? harden(batch) : batch;
  const JointDistribution joint = estimate_joint(evaluated);
  for (std::size_t k = 0; k < kAllLossKinds.size(); ++k) {
    TableLoss loss = table_loss(kAllLossKinds[k], joint);
    report.fairness[k] = loss.value;
    for (auto& w : loss.warnings) {
      report.warnings.push_back(std::string(to_string(kAllLossKinds[k])) + ": " + w);
    }
  }
  const IouComponents iou = iou_components(joint);
  report.iou_overall = iou.overall;
  report.iou_per_group = iou.per_group;
  report.sigma_iou = sigma_iou(iou.per_group);
  for (int c = 0; c < iou.num_groups; ++c) {
    if (!iou.per_group[c]) {
      report.warnings.push_back("sensitive group " + std::to_string(c) + " absent");
      continue;
    }
    for (int a = 0; a < iou.num_classes; ++a) {
      if (!iou.at(a, c)) {
        report.warnings.push_back("iou cell (class " + std::to_string(a) + ", group " +
                                  std::to_string(c) + ") absent");
      }
    }
  }
  return report;
}

AuditReport audit_dump(const std::filesystem::path& dump, AuditMode mode, int num_groups) {
  return audit(read_prediction_dump(dump, num_groups).batch, mode);
}

nlohmann::ordered_json to_json(const AuditReport& report) {
  using nlohmann::ordered_json;
  auto optional_value = [](const std::optional<double>& v) {
    return v ? ordered_json(*v) : ordered_json(nullptr);
  };
  ordered_json j;
  j["mode"] = std::string(to_string(report.mode));
  j["n_samples"] = report.num_samples;
  j["k_t"] = report.num_classes;
  j["k_s"] = report.num_groups;
  j["accuracy"] = report.accuracy;
  j["auc"] = optional_value(report.auc);
  for (std::size_t k = 0; k < kAllLossKinds.size(); ++k) {
    j[std::string(to_string(kAllLossKinds[k]))] = report.fairness[k];
  }
  j["iou_overall"] = report.iou_overall;
  ordered_json groups = ordered_json::array();
  for (const auto& v : report.iou_per_group) groups.push_back(optional_value(v));
  j["iou_per_group"] = groups;
  j["sigma_iou"] = optional_value(report.sigma_iou);
  j["warnings"] = report.warnings;
  return j;
}

std::string report_json(const AuditReport& report) { return to_json(report).dump(2) + "\n"; }

std::string report_text(const AuditReport& report) {
  auto cell = [](const std::optional<double>& v) {
    char buf[32];
    if (v) {
      std::snprintf(buf, sizeof(buf), "%12.4e", *v);
    } else {
      std::snprintf(buf, sizeof(buf), "%12s", "-");
    }
    return std::string(buf);
  };
  std::ostringstream out;
  out << "mode=" << to_string(report.mode) << " n=" << report.num_samples
      << " K_t=" << report.num_classes << " K_s=" << report.num_groups << "\n";
  const char* heads[] = {"Acc", "AUC", "L_iou", "L2_eo", "MI_eo", "L2_dp", "MI_dp", "sigma_IoU"};
  for (const char* h : heads) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%12s", h);
    out << buf;
  }
  out << "\n";
  char acc[32];
  std::snprintf(acc, sizeof(acc), "%12.4f", report.accuracy);
  out << acc;
  if (report.auc) {
    std::snprintf(acc, sizeof(acc), "%12.4f", *report.auc);
    out << acc;
  } else {
    out << cell(std::nullopt);
  }
  for (double v : report.fairness) out << cell(v);
  out << cell(report.sigma_iou) << "\n";
  out << "iou_overall " << format_double(report.iou_overall) << "\n";
  for (std::size_t c = 0; c < report.iou_per_group.size(); ++c) {
    out << "iou_group_" << c << " "
        << (report.iou_per_group[c] ? format_double(*report.iou_per_group[c]) : "absent") << "\n";
  }
  for (const auto& w : report.warnings) out << "warning: " << w << "\n";
  return out.str();
}

std::string plot_data(std::string_view x_name, std::string_view y_name,
                      std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) input_error("plot columns differ in length");
  std::string out = "# " + std::string(x_name) + " " + std::string(y_name) + "\n";
  for (std::size_t i = 0; i < xs.size(); ++i) {
    out += format_double(xs[i]) + " " + format_double(ys[i]) + "\n";
  }
  return out;
}

}  // namespace fairreg
