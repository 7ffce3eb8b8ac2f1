#include <gtest/gtest.h>

#include <filesystem>
#include <random>

#include "fairreg/boundary.hpp"
#include "fairreg/data.hpp"
#include "fairreg/error.hpp"
#include "fairreg/version.hpp"
#include "generators.hpp"

using namespace fairreg;
namespace fs = std::filesystem;

namespace {

boundary::LossAndGrad through_boundary(const ProbBatch& b, LossKind kind) {
  const auto v = b.probs().values();
  // caller-owned copies, as a host runtime would hand them over
  const std::vector<double> probs(v.begin(), v.end());
  const std::vector<int> t(b.target().begin(), b.target().end());
  const std::vector<int> s(b.sensitive().begin(), b.sensitive().end());
  return boundary::loss_and_grad(probs, static_cast<std::size_t>(b.num_classes()), t, s, kind,
                                 b.num_groups());
}

}  // namespace

TEST(Boundary, MatchesLibraryOnRandomBatches) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto s = gen::random_batch(rng, {1 + rng() % 40, 2 + static_cast<int>(rng() % 2),
                                           2 + static_cast<int>(rng() % 3), 0.0});
    const LossKind kind = kAllLossKinds[trial % 5];
    const auto got = through_boundary(s.batch, kind);
    const auto want = fairness_loss(kind, s.batch);
    ASSERT_EQ(got.value, want.value);
    ASSERT_TRUE(std::equal(got.grad.begin(), got.grad.end(), want.grad.values().begin(),
                           want.grad.values().end()));
    ASSERT_EQ(got.warnings, want.warnings);
  }
}

TEST(Boundary, PerfectAndConstantBatches) {
  std::mt19937_64 rng(2);
  EXPECT_EQ(through_boundary(gen::perfect_batch(rng, 20, 2, 2), LossKind::iou).value, 0.0);
  EXPECT_LT(through_boundary(gen::constant_batch(rng, 20, 2, 3), LossKind::mi_dp).value, 1e-12);
}

TEST(Boundary, InvalidInputCarriesCategory) {
  const std::vector<double> probs{0.5, 0.5, 0.9};
  const std::vector<int> t{0, 1};
  const std::vector<int> s{0, 1};
  try {
    boundary::loss_and_grad(probs, 2, t, s, LossKind::iou);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.category(), ErrorCategory::input);
  }
  const std::vector<double> bad_rows{0.5, 0.6, 0.5, 0.5};
  EXPECT_THROW(boundary::loss_and_grad(bad_rows, 2, t, s, LossKind::iou), Error);
}

TEST(Boundary, AuditDumpMirrorsJsonReport) {
  const fs::path dump = fs::path(FAIRREG_TEST_DIR) / "fixtures" / "golden_dump.csv";
  for (AuditMode mode : {AuditMode::soft, AuditMode::hard}) {
    EXPECT_EQ(boundary::audit_dump(dump, mode).dump(2) + "\n", report_json(audit_dump(dump, mode)));
  }
  try {
    boundary::audit_dump(fs::path(FAIRREG_TEST_DIR) / "fixtures" / "dataset3.csv");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("dataset3.csv:1"), std::string::npos) << e.what();
  }
}

TEST(Boundary, VersionInfo) {
  const auto v = boundary::version();
  EXPECT_EQ(v.library, kVersion);
  EXPECT_EQ(v.model_format, kModelFormatVersion);
  EXPECT_EQ(v.dataset_format, kDatasetFormatVersion);
  EXPECT_EQ(v.prediction_format, kPredictionFormatVersion);
  EXPECT_EQ(v.audit_report_format, kAuditReportFormatVersion);
}
