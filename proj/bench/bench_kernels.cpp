#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "fairreg/fairloss.hpp"
#include "fairreg/kernels.hpp"
#include "fairreg/matrix.hpp"

namespace {

using fairreg::Matrix;
namespace kernels = fairreg::kernels;

constexpr int kClasses = 3;
constexpr int kGroups = 5;

struct Inputs {
  Matrix probs;
  Matrix features;
  Matrix weights;
  std::vector<double> bias;
  std::vector<int> target;
  std::vector<int> sensitive;
};

Inputs make_inputs(std::size_t n, std::size_t dim) {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Inputs in{Matrix(n, kClasses), Matrix(n, dim), Matrix(dim, kClasses),
            std::vector<double>(kClasses, 0.1), {}, {}};
  for (std::size_t i = 0; i < n; ++i) {
    double sum = 0.0;
    for (int a = 0; a < kClasses; ++a) sum += in.probs(i, a) = u(rng) + 1e-3;
    for (int a = 0; a < kClasses; ++a) in.probs(i, a) /= sum;
    for (std::size_t d = 0; d < dim; ++d) in.features(i, d) = u(rng) - 0.5;
    in.target.push_back(static_cast<int>(rng() % kClasses));
    in.sensitive.push_back(static_cast<int>(rng() % kGroups));
  }
  for (double& w : in.weights.values()) w = u(rng) - 0.5;
  return in;
}

template <bool Parallel>
void BM_AccumulateJoint(benchmark::State& state) {
  const auto in = make_inputs(static_cast<std::size_t>(state.range(0)), 4);
  std::vector<double> table(kClasses * kClasses * kGroups);
  for (auto _ : state) {
    std::fill(table.begin(), table.end(), 0.0);
    if constexpr (Parallel) {
      kernels::parallel::accumulate_joint(in.probs, in.target, in.sensitive, kGroups, table);
    } else {
      kernels::serial::accumulate_joint(in.probs, in.target, in.sensitive, kGroups, table);
    }
    benchmark::DoNotOptimize(table.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <bool Parallel>
void BM_Affine(benchmark::State& state) {
  const auto in = make_inputs(static_cast<std::size_t>(state.range(0)), 32);
  Matrix out(in.features.rows(), kClasses);
  for (auto _ : state) {
    if constexpr (Parallel) {
      kernels::parallel::affine(in.features, in.weights, in.bias, out);
    } else {
      kernels::serial::affine(in.features, in.weights, in.bias, out);
    }
    benchmark::DoNotOptimize(out.values().data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <bool Parallel>
void BM_AffineGrad(benchmark::State& state) {
  const auto in = make_inputs(static_cast<std::size_t>(state.range(0)), 32);
  Matrix dw(32, kClasses);
  std::vector<double> db(kClasses);
  for (auto _ : state) {
    std::fill(dw.values().begin(), dw.values().end(), 0.0);
    std::fill(db.begin(), db.end(), 0.0);
    if constexpr (Parallel) {
      kernels::parallel::accumulate_affine_grad(in.features, in.probs, dw, db);
    } else {
      kernels::serial::accumulate_affine_grad(in.features, in.probs, dw, db);
    }
    benchmark::DoNotOptimize(dw.values().data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_FairnessLoss(benchmark::State& state) {
  const auto in = make_inputs(static_cast<std::size_t>(state.range(0)), 4);
  const fairreg::ProbBatch batch(in.probs, in.target, in.sensitive, kGroups);
  const auto kind = fairreg::kAllLossKinds[static_cast<std::size_t>(state.range(1))];
  for (auto _ : state) {
    auto result = fairreg::fairness_loss(kind, batch);
    benchmark::DoNotOptimize(result.value);
  }
  state.SetLabel(std::string(fairreg::to_string(kind)));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

BENCHMARK(BM_AccumulateJoint<false>)->RangeMultiplier(8)->Range(256, 1 << 18);
BENCHMARK(BM_AccumulateJoint<true>)->RangeMultiplier(8)->Range(256, 1 << 18);
BENCHMARK(BM_Affine<false>)->RangeMultiplier(8)->Range(256, 1 << 18);
BENCHMARK(BM_Affine<true>)->RangeMultiplier(8)->Range(256, 1 << 18);
BENCHMARK(BM_AffineGrad<false>)->RangeMultiplier(8)->Range(256, 1 << 18);
BENCHMARK(BM_AffineGrad<true>)->RangeMultiplier(8)->Range(256, 1 << 18);
BENCHMARK(BM_FairnessLoss)->ArgsProduct({{4096, 65536}, {0, 1, 2, 3, 4}});

}  // namespace

BENCHMARK_MAIN();
