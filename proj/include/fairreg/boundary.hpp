#pragma once

// Flat entry points for foreign-language wrappers. Inputs are copied into
// library types and validated again; nothing is retained between calls.

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "fairreg/audit.hpp"
#include "fairreg/fairloss.hpp"

namespace fairreg::boundary {

struct LossAndGrad {
  double value = 0.0;
  std::vector<double> grad;  // row-major N x K_t
  std::vector<std::string> warnings;
};

// probs is row-major N x num_classes. num_groups = 0 infers K_s from the labels.
LossAndGrad loss_and_grad(std::span<const double> probs, std::size_t num_classes,
                          std::span<const int> target, std::span<const int> sensitive,
                          LossKind kind, int num_groups = 0);

// Same fields as the JSON audit report.
nlohmann::ordered_json audit_dump(const std::filesystem::path& path, AuditMode mode = AuditMode::soft);

struct VersionInfo {
  std::string library;
  int model_format = 0;
  int dataset_format = 0;
  int prediction_format = 0;
  int audit_report_format = 0;
};

VersionInfo version();

}  // namespace fairreg::boundary
