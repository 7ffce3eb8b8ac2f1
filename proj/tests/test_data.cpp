#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "fairreg/audit.hpp"
#include "fairreg/data.hpp"
#include "fairreg/error.hpp"
#include "fairreg/io_util.hpp"
#include "fairreg/model.hpp"
#include "generators.hpp"
#include "oracle.hpp"

using namespace fairreg;
namespace fs = std::filesystem;

namespace {

const fs::path kFixtures = fs::path(FAIRREG_TEST_DIR) / "fixtures";

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "fairreg_test_data";
  fs::create_directories(dir);
  return dir / name;
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream(p, std::ios::binary) << text;
}

template <typename F>
std::size_t parse_error_line(F&& f) {
  try {
    f();
  } catch (const ParseError& e) {
    return e.line();
  }
  return 0;
}

// Empirical mutual information between the two label columns, in nats.
double label_mi(const Dataset& d) {
  std::vector<oracle::Real> joint(d.num_classes * d.num_groups, 0);
  std::vector<oracle::Real> pt(d.num_classes, 0);
  std::vector<oracle::Real> ps(d.num_groups, 0);
  const oracle::Real w = oracle::Real(1) / d.size();
  for (std::size_t i = 0; i < d.size(); ++i) {
    joint[d.target[i] * d.num_groups + d.sensitive[i]] += w;
    pt[d.target[i]] += w;
    ps[d.sensitive[i]] += w;
  }
  return static_cast<double>(oracle::entropy(pt) + oracle::entropy(ps) - oracle::entropy(joint));
}

ModelParams quick_baseline(const Dataset& d) {
  TrainConfig c;
  c.epochs = 10;
  c.batch_size = 32;
  return train(d.subset(Partition::train), d.subset(Partition::val), c,
               init_params({static_cast<int>(d.features.cols()), 0, d.num_classes}, 1))
      .params;
}

double group_accuracy(const ProbBatch& b, int group) {
  std::size_t n = 0;
  std::size_t hit = 0;
  for (std::size_t i = 0; i < b.size(); ++i) {
    if (b.sensitive()[i] != group) continue;
    ++n;
    hit += argmax(b.probs().row(i)) == b.target()[i];
  }
  return static_cast<double>(hit) / static_cast<double>(n);
}

}  // namespace

TEST(Generate, DeterministicBytes) {
  SyntheticSpec s;
  s.n_samples = 500;
  s.bias_strength = 0.5;
  s.seed = 3;
  EXPECT_EQ(dataset_csv(generate(s)), dataset_csv(generate(s)));
  s.seed = 4;
  const auto other = dataset_csv(generate(s));
  s.seed = 3;
  EXPECT_NE(dataset_csv(generate(s)), other);
}

TEST(Generate, PartitionFractionsAndDisjointness) {
  for (std::size_t n : {10u, 11u, 999u, 10000u}) {
    SyntheticSpec s;
    s.n_samples = n;
    const auto d = generate(s);
    std::size_t counts[3] = {0, 0, 0};
    for (auto p : d.partition) ++counts[static_cast<int>(p)];
    EXPECT_EQ(counts[0] + counts[1] + counts[2], n);
    EXPECT_LE(std::fabs(counts[0] - 0.7 * n), 1.0);
    EXPECT_LE(std::fabs(counts[1] - 0.2 * n), 1.0);
    EXPECT_LE(std::fabs(counts[2] - 0.1 * n), 2.0);
    EXPECT_EQ(d.subset(Partition::train).size(), counts[0]);
  }
}

TEST(Generate, PartitionDependsOnlyOnSeedAndIndex) {
  SyntheticSpec a;
  a.n_samples = 300;
  a.seed = 8;
  SyntheticSpec b = a;
  b.bias_strength = 0.9;
  b.noise_scale = 3.0;
  EXPECT_EQ(generate(a).partition, generate(b).partition);
}

TEST(Generate, UnbiasedLabelsAreIndependent) {
  SyntheticSpec s;
  s.n_samples = 20000;
  s.bias_strength = 0.0;
  s.label_coupling = 1.0;
  EXPECT_LT(label_mi(generate(s)), 0.01);
}

TEST(Generate, LabelMarginalsConverge) {
  SyntheticSpec s;
  s.n_samples = 10000;
  s.num_classes = 3;
  s.num_groups = 3;
  s.bias_strength = 0.6;
  s.label_coupling = 0.5;
  s.group_imbalance = {0.6, 0.3, 0.1};
  s.seed = 2;
  const auto d = generate(s);
  // p(c) = w_c; p(t | c) = (1 - tilt)/K_t + tilt [t = c mod K_t]
  const double tilt = 0.3;
  std::vector<double> expected_t(3, 0.0);
  for (int c = 0; c < 3; ++c) {
    for (int t = 0; t < 3; ++t) {
      expected_t[t] += s.group_imbalance[c] * ((1 - tilt) / 3 + (t == c ? tilt : 0.0));
    }
  }
  std::vector<double> got_t(3, 0.0);
  std::vector<double> got_s(3, 0.0);
  for (std::size_t i = 0; i < d.size(); ++i) {
    got_t[d.target[i]] += 1.0 / d.size();
    got_s[d.sensitive[i]] += 1.0 / d.size();
  }
  double l1_t = 0.0;
  double l1_s = 0.0;
  for (int k = 0; k < 3; ++k) {
    l1_t += std::fabs(got_t[k] - expected_t[k]);
    l1_s += std::fabs(got_s[k] - s.group_imbalance[k]);
  }
  EXPECT_LT(l1_t, 0.02);
  EXPECT_LT(l1_s, 0.02);
}

TEST(Generate, GroupAxesKeepClassDistance) {
  SyntheticSpec s;
  s.n_samples = 100;
  s.noise_scale = 1e-9;
  s.group_signal = 0.0;
  s.class_separation = 4.0;
  s.feature_dim = 7;
  s.group_axes = 0.5;
  EXPECT_EQ(s.class_axes(), 6);
  const auto d = generate(s);
  for (std::size_t i = 0; i < d.size(); ++i) {
    double norm = 0.0;
    for (double v : d.features.row(i)) norm += v * v;
    // centroid (+-2, -+2) split over two blocks keeps |x|^2 = 8
    ASSERT_NEAR(norm, 8.0, 1e-6);
  }
  s.feature_dim = 5;
  EXPECT_THROW(generate(s), Error);
}

TEST(Generate, RejectsInvalidSpecs) {
  SyntheticSpec s;
  s.n_samples = 9;
  EXPECT_THROW(generate(s), Error);
  s = {};
  s.bias_strength = 1.5;
  EXPECT_THROW(generate(s), Error);
  s = {};
  s.group_imbalance = {0.5, 0.4};
  EXPECT_THROW(generate(s), Error);
  s = {};
  s.group_imbalance = {0.5, 0.5, 0.0};
  EXPECT_THROW(generate(s), Error);
  s = {};
  s.noise_scale = 0.0;
  EXPECT_THROW(generate(s), Error);
  s = {};
  s.num_groups = 1;
  EXPECT_THROW(generate(s), Error);
}

TEST(Generate, UnbiasedGroupsAreEquallyHard) {
  SyntheticSpec s;
  s.n_samples = 20000;
  s.bias_strength = 0.0;
  s.seed = 6;
  const auto d = generate(s);
  const auto preds = predict(quick_baseline(d), d.subset(Partition::test));
  EXPECT_LT(std::fabs(group_accuracy(preds, 0) - group_accuracy(preds, 1)), 0.02);
}

TEST(Generate, BiasInflatesSigmaIou) {
  SyntheticSpec fair;
  fair.n_samples = 20000;
  fair.seed = 7;
  SyntheticSpec biased = fair;
  biased.bias_strength = 0.8;
  biased.group_imbalance = {0.9, 0.1};
  const auto df = generate(fair);
  const auto db = generate(biased);
  const double sf = *sigma_iou(predict(quick_baseline(df), df.subset(Partition::val)));
  const double sb = *sigma_iou(predict(quick_baseline(db), db.subset(Partition::val)));
  EXPECT_GE(sb, 3.0 * sf) << sb << " vs " << sf;
}

TEST(DatasetFile, HandWrittenFixture) {
  const auto d = read_dataset(kFixtures / "dataset3.csv");
  ASSERT_EQ(d.size(), 3u);
  EXPECT_EQ(d.features.cols(), 2u);
  EXPECT_EQ(d.features(0, 0), 0.5);
  EXPECT_EQ(d.features(0, 1), -1.25);
  EXPECT_EQ(d.features(1, 0), 3.0);
  EXPECT_EQ(d.features(1, 1), 1e-3);
  EXPECT_EQ(d.features(2, 0), -0.125);
  EXPECT_EQ(d.target, (std::vector<int>{1, 0, 1}));
  EXPECT_EQ(d.sensitive, (std::vector<int>{0, 1, 2}));
  EXPECT_EQ(d.partition, (std::vector<Partition>{Partition::train, Partition::val, Partition::test}));
  EXPECT_EQ(d.num_classes, 2);
  EXPECT_EQ(d.num_groups, 3);
}

TEST(DatasetFile, RoundTripIsLossless) {
  SyntheticSpec s;
  s.n_samples = 300;
  s.num_classes = 3;
  s.num_groups = 4;
  s.feature_dim = 5;
  s.bias_strength = 0.4;
  const auto d = generate(s);
  const auto path = scratch("round_trip.csv");
  write_dataset(d, path);
  const auto back = read_dataset(path, 3, 4);
  EXPECT_EQ(back.features, d.features);
  EXPECT_EQ(back.target, d.target);
  EXPECT_EQ(back.sensitive, d.sensitive);
  EXPECT_EQ(back.partition, d.partition);
  EXPECT_EQ(dataset_csv(back), read_file(path));
}

TEST(DatasetFile, ErrorsCarryLineNumbers) {
  const auto path = scratch("bad.csv");
  write_text(path, "feature_0,y_t_star,y_s_star,partition\n");
  EXPECT_EQ(parse_error_line([&] { read_dataset(path); }), 1u);
  write_text(path, "feature_0,y_t_star,y_s_star,partition\n1,0,0,train\n1,0,train\n");
  EXPECT_EQ(parse_error_line([&] { read_dataset(path); }), 3u);
  write_text(path, "feature_0,y_t_star,y_s_star,partition\n1,0,0,train\nabc,1,0,val\n");
  EXPECT_EQ(parse_error_line([&] { read_dataset(path); }), 3u);
  write_text(path, "feature_0,y_t_star,y_s_star,partition\n1,0,0,train\n\n1,0,5,val\n");
  EXPECT_EQ(parse_error_line([&] { read_dataset(path, 2, 2); }), 4u);
  write_text(path, "feature_0,y_t_star,y_s_star,partition\n1,0,0,holdout\n");
  EXPECT_EQ(parse_error_line([&] { read_dataset(path); }), 2u);
  write_text(path, "x,y_t_star,y_s_star,partition\n1,0,0,train\n");
  EXPECT_EQ(parse_error_line([&] { read_dataset(path); }), 1u);
  EXPECT_THROW(read_dataset(scratch("missing.csv")), Error);
}

TEST(PredictionFile, FixtureAndRoundTrip) {
  const auto dump = read_prediction_dump(kFixtures / "preds5.csv");
  EXPECT_EQ(dump.sample_ids, (std::vector<long long>{0, 1, 2, 3, 4}));
  EXPECT_EQ(dump.batch.probs()(4, 0), 0.55);
  EXPECT_EQ(dump.batch.num_groups(), 2);

  std::mt19937_64 rng(3);
  const auto s = gen::random_batch(rng, {50, 3, 4, 0.0});
  const std::vector<long long> ids(50, 7);
  const auto path = scratch("preds.csv");
  write_prediction_dump(s.batch, path, ids);
  const auto back = read_prediction_dump(path, 4);
  EXPECT_EQ(back.batch.probs(), s.batch.probs());
  EXPECT_EQ(back.sample_ids, ids);
  EXPECT_EQ(prediction_csv(back.batch, back.sample_ids), read_file(path));
}

TEST(PredictionFile, ErrorsCarryLineNumbers) {
  const auto path = scratch("bad_preds.csv");
  write_text(path, "sample_id,p_0,p_1,y_t_star,y_s_star\n");
  EXPECT_EQ(parse_error_line([&] { read_prediction_dump(path); }), 1u);
  write_text(path, "sample_id,p_0,p_1,y_t_star,y_s_star\n0,0.5,0.5,0,0\n1,0.5,0.6,0,0\n");
  EXPECT_EQ(parse_error_line([&] { read_prediction_dump(path); }), 3u);
  write_text(path, "sample_id,p_0,p_1,y_t_star,y_s_star\n0,0.5,0.5,2,0\n");
  EXPECT_EQ(parse_error_line([&] { read_prediction_dump(path); }), 2u);
  write_text(path, "sample_id,p_0,p_1,y_t_star,y_s_star\n0,1.5,-0.5,0,0\n");
  EXPECT_EQ(parse_error_line([&] { read_prediction_dump(path); }), 2u);
  write_text(path, "sample_id,p_1,p_0,y_t_star,y_s_star\n0,0.5,0.5,0,0\n");
  EXPECT_EQ(parse_error_line([&] { read_prediction_dump(path); }), 1u);
}

TEST(IoUtil, NumbersRoundTripAndRejectGarbage) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  for (int k = 0; k < 1000; ++k) {
    const double v = u(rng) * std::pow(10.0, static_cast<int>(rng() % 40) - 20);
    double back = 0.0;
    ASSERT_TRUE(parse_double(format_double(v), back));
    ASSERT_EQ(back, v);
  }
  double d = 0.0;
  long long i = 0;
  EXPECT_FALSE(parse_double("1.5x", d));
  EXPECT_FALSE(parse_double("", d));
  EXPECT_FALSE(parse_int("12a", i));
  EXPECT_TRUE(parse_int("-12", i));
  EXPECT_EQ(i, -12);
}

TEST(IoUtil, AtomicWriteReplacesFile) {
  const auto path = scratch("atomic.txt");
  write_file_atomic(path, "first");
  write_file_atomic(path, "second");
  EXPECT_EQ(read_file(path), "second");
  for (const auto& entry : fs::directory_iterator(path.parent_path())) {
    EXPECT_EQ(entry.path().string().find(".tmp"), std::string::npos) << entry.path();
  }
  EXPECT_THROW(write_file_atomic(scratch("no_such_dir") / "x.txt", "y"), Error);
}
