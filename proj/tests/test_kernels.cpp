#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include <omp.h>

#include "fairreg/kernels.hpp"
#include "generators.hpp"

using fairreg::Matrix;
namespace kernels = fairreg::kernels;

namespace {

Matrix random_matrix(std::mt19937_64& rng, std::size_t r, std::size_t c) {
  std::normal_distribution<double> z(0.0, 1.0);
  Matrix m(r, c);
  for (double& v : m.values()) v = z(rng);
  return m;
}

struct JointInput {
  Matrix probs;
  std::vector<int> target;
  std::vector<int> sensitive;
};

JointInput joint_input(std::mt19937_64& rng, std::size_t n, int kt, int ks) {
  return {gen::random_probs(rng, n, kt, 0.0), gen::labels(rng, n, kt), gen::labels(rng, n, ks)};
}

std::vector<double> joint_serial(const JointInput& in, int kt, int ks) {
  std::vector<double> t(kt * kt * ks, 0.0);
  kernels::serial::accumulate_joint(in.probs, in.target, in.sensitive, ks, t);
  return t;
}

std::vector<double> joint_parallel(const JointInput& in, int kt, int ks) {
  std::vector<double> t(kt * kt * ks, 0.0);
  kernels::parallel::accumulate_joint(in.probs, in.target, in.sensitive, ks, t);
  return t;
}

// Restores the thread count when a test ends.
struct ThreadCount {
  int saved = omp_get_max_threads();
  explicit ThreadCount(int n) { omp_set_num_threads(n); }
  ~ThreadCount() { omp_set_num_threads(saved); }
};

}  // namespace

TEST(Kernels, SerialJointMatchesNaiveSum) {
  std::mt19937_64 rng(1);
  const auto in = joint_input(rng, 77, 3, 4);
  const auto t = joint_serial(in, 3, 4);
  for (int a = 0; a < 3; ++a) {
    for (int b = 0; b < 3; ++b) {
      for (int c = 0; c < 4; ++c) {
        double s = 0.0;
        for (std::size_t i = 0; i < 77; ++i) {
          if (in.target[i] == b && in.sensitive[i] == c) s += in.probs(i, a);
        }
        EXPECT_NEAR(t[kernels::joint_index(a, b, c, 3, 4)], s, 1e-12);
      }
    }
  }
}

TEST(Kernels, SmallInputsBitIdentical) {
  std::mt19937_64 rng(2);
  for (std::size_t n : {1u, 7u, 100u, 256u}) {
    const auto in = joint_input(rng, n, 3, 5);
    EXPECT_EQ(joint_serial(in, 3, 5), joint_parallel(in, 3, 5)) << n;

    const Matrix x = random_matrix(rng, n, 6);
    const Matrix w = random_matrix(rng, 6, 3);
    const std::vector<double> bias{0.1, -0.2, 0.3};
    Matrix o1(n, 3);
    Matrix o2(n, 3);
    kernels::serial::affine(x, w, bias, o1);
    kernels::parallel::affine(x, w, bias, o2);
    EXPECT_EQ(o1, o2);

    Matrix dw1(6, 3);
    Matrix dw2(6, 3);
    std::vector<double> db1(3);
    std::vector<double> db2(3);
    kernels::serial::accumulate_affine_grad(x, o1, dw1, db1);
    kernels::parallel::accumulate_affine_grad(x, o1, dw2, db2);
    EXPECT_EQ(dw1, dw2);
    EXPECT_EQ(db1, db2);
  }
}

TEST(Kernels, LargeInputsAgreeAndIgnoreThreadCount) {
  std::mt19937_64 rng(3);
  const std::size_t n = 5000;
  const auto in = joint_input(rng, n, 2, 3);
  const auto serial = joint_serial(in, 2, 3);
  std::vector<double> one;
  std::vector<double> four;
  {
    ThreadCount tc(1);
    one = joint_parallel(in, 2, 3);
  }
  {
    ThreadCount tc(4);
    four = joint_parallel(in, 2, 3);
  }
  EXPECT_EQ(one, four);
  for (std::size_t k = 0; k < serial.size(); ++k) EXPECT_NEAR(serial[k], one[k], 1e-10);

  const Matrix x = random_matrix(rng, n, 5);
  const Matrix g = random_matrix(rng, n, 2);
  Matrix dws(5, 2);
  Matrix dw1(5, 2);
  Matrix dw4(5, 2);
  std::vector<double> dbs(2);
  std::vector<double> db1(2);
  std::vector<double> db4(2);
  kernels::serial::accumulate_affine_grad(x, g, dws, dbs);
  {
    ThreadCount tc(1);
    kernels::parallel::accumulate_affine_grad(x, g, dw1, db1);
  }
  {
    ThreadCount tc(4);
    kernels::parallel::accumulate_affine_grad(x, g, dw4, db4);
  }
  EXPECT_EQ(dw1, dw4);
  EXPECT_EQ(db1, db4);
  for (std::size_t k = 0; k < dws.values().size(); ++k) {
    EXPECT_NEAR(dws.values()[k], dw1.values()[k], 1e-9);
  }
}

TEST(Kernels, RowwiseKernelsAgreeExactly) {
  std::mt19937_64 rng(4);
  const std::size_t n = 1000;
  const Matrix dout = random_matrix(rng, n, 3);
  const Matrix w = random_matrix(rng, 4, 3);
  Matrix dx1(n, 4);
  Matrix dx2(n, 4);
  kernels::serial::backprop_input(dout, w, dx1);
  kernels::parallel::backprop_input(dout, w, dx2);
  EXPECT_EQ(dx1, dx2);

  Matrix s1 = random_matrix(rng, n, 4);
  Matrix s2 = s1;
  kernels::serial::softmax_rows(s1);
  kernels::parallel::softmax_rows(s2);
  EXPECT_EQ(s1, s2);

  std::vector<double> dtable(2 * 2 * 3);
  for (double& v : dtable) v = std::normal_distribution<double>(0.0, 1.0)(rng);
  const auto t = gen::labels(rng, n, 2);
  const auto s = gen::labels(rng, n, 3);
  Matrix g1(n, 2);
  Matrix g2(n, 2);
  kernels::serial::scatter_joint_grad(dtable, 3, t, s, 0.5, g1);
  kernels::parallel::scatter_joint_grad(dtable, 3, t, s, 0.5, g2);
  EXPECT_EQ(g1, g2);
  for (std::size_t i = 0; i < n; ++i) {
    for (int a = 0; a < 2; ++a) {
      ASSERT_EQ(g1(i, a), 0.5 * dtable[kernels::joint_index(a, t[i], s[i], 2, 3)]);
    }
  }
}

TEST(Kernels, SoftmaxRowsAreDistributions) {
  std::mt19937_64 rng(5);
  Matrix z = random_matrix(rng, 50, 4);
  z(0, 0) = 800.0;  // overflow without max subtraction
  kernels::serial::softmax_rows(z);
  for (std::size_t i = 0; i < z.rows(); ++i) {
    double sum = 0.0;
    for (double p : z.row(i)) {
      ASSERT_TRUE(std::isfinite(p));
      sum += p;
    }
    ASSERT_NEAR(sum, 1.0, 1e-12);
  }
  EXPECT_NEAR(z(0, 0), 1.0, 1e-12);
}
