#include "fairreg/boundary.hpp"

#include "fairreg/data.hpp"
#include "fairreg/error.hpp"
#include "fairreg/model.hpp"
#include "fairreg/version.hpp"

namespace fairreg::boundary {

LossAndGrad loss_and_grad(std::span<const double> probs, std::size_t num_classes,
                          std::span<const int> target, std::span<const int> sensitive,
                          LossKind kind, int num_groups) {
  if (num_classes == 0 || probs.size() != target.size() * num_classes) {
    input_error("probability buffer does not match N x K_t");
  }
  Matrix m(target.size(), num_classes, std::vector<double>(probs.begin(), probs.end()));
  const ProbBatch batch(std::move(m), std::vector<int>(target.begin(), target.end()),
                        std::vector<int>(sensitive.begin(), sensitive.end()), num_groups);
  LossResult r = fairness_loss(kind, batch);
  const auto g = r.grad.values();
  return {r.value, std::vector<double>(g.begin(), g.end()), std::move(r.warnings)};
}

nlohmann::ordered_json audit_dump(const std::filesystem::path& path, AuditMode mode) {
  return to_json(fairreg::audit_dump(path, mode));
}

VersionInfo version() {
  return {kVersion, kModelFormatVersion, kDatasetFormatVersion, kPredictionFormatVersion,
          kAuditReportFormatVersion};
}

}  // namespace fairreg::boundary
