#include "fairreg/stats.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "fairreg/error.hpp"
#include "fairreg/kernels.hpp"

namespace fairreg {

JointDistribution::JointDistribution(int num_classes, int num_groups, std::vector<double> table,
                                     std::vector<double> label_freq, std::size_t num_samples)
    : kt_(num_classes),
      ks_(num_groups),
      table_(std::move(table)),
      label_freq_(std::move(label_freq)),
      n_(num_samples) {
  const auto cells = static_cast<std::size_t>(kt_) * kt_ * ks_;
  if (table_.size() != cells) input_error("joint table has wrong size");
  if (label_freq_.size() != static_cast<std::size_t>(kt_) * ks_) {
    input_error("label frequency table has wrong size");
  }
}

double JointDistribution::operator()(int a, int b, int c) const {
  return table_[kernels::joint_index(a, b, c, kt_, ks_)];
}

std::size_t JointDistribution::extent(Axis axis) const {
  return axis == Axis::sensitive ? static_cast<std::size_t>(ks_) : static_cast<std::size_t>(kt_);
}

double Distribution::at(std::span<const std::size_t> index) const {
  std::size_t flat = 0;
  for (std::size_t k = 0; k < shape.size(); ++k) flat = flat * shape[k] + index[k];
  return values[flat];
}

double Distribution::sum() const {
  double s = 0.0;
  for (double v : values) s += v;
  return s;
}

JointDistribution estimate_joint(const ProbBatch& batch) {
  const int kt = batch.num_classes();
  const int ks = batch.num_groups();
  const auto n = batch.size();
  std::vector<double> table(static_cast<std::size_t>(kt) * kt * ks, 0.0);
  kernels::parallel::accumulate_joint(batch.probs(), batch.target(), batch.sensitive(), ks,
                                      table);
  // Divide rather than scale by 1/N so hard counts come out exact.
  const auto dn = static_cast<double>(n);
  for (double& v : table) v /= dn;

  std::vector<double> freq(static_cast<std::size_t>(kt) * ks, 0.0);
  for (std::size_t i = 0; i < n; ++i) freq[batch.target()[i] * ks + batch.sensitive()[i]] += 1.0;
  for (double& v : freq) v /= dn;
  return JointDistribution(kt, ks, std::move(table), std::move(freq), n);
}

Distribution marginal(const JointDistribution& joint, std::span<const Axis> keep) {
  if (keep.empty()) input_error("marginal needs at least one axis to keep");
  std::array<bool, 3> kept{};
  for (Axis axis : keep) kept[static_cast<int>(axis)] = true;

  Distribution out;
  for (int k = 0; k < 3; ++k) {
    if (!kept[k]) continue;
    out.axes.push_back(static_cast<Axis>(k));
    out.shape.push_back(joint.extent(static_cast<Axis>(k)));
  }
  std::size_t cells = 1;
  for (auto s : out.shape) cells *= s;
  out.values.assign(cells, 0.0);

  const int kt = joint.num_classes();
  const int ks = joint.num_groups();
  for (int a = 0; a < kt; ++a) {
    for (int b = 0; b < kt; ++b) {
      for (int c = 0; c < ks; ++c) {
        const std::array<int, 3> idx{a, b, c};
        std::size_t flat = 0;
        for (std::size_t k = 0; k < out.axes.size(); ++k) {
          flat = flat * out.shape[k] + idx[static_cast<int>(out.axes[k])];
        }
        out.values[flat] += joint(a, b, c);
      }
    }
  }
  return out;
}

std::optional<Distribution> conditional(const JointDistribution& joint, Axis given, int value) {
  if (value < 0 || static_cast<std::size_t>(value) >= joint.extent(given)) {
    input_error("conditioning value " + std::to_string(value) + " out of range");
  }
  std::vector<Axis> rest;
  for (int k = 0; k < 3; ++k) {
    if (static_cast<Axis>(k) != given) rest.push_back(static_cast<Axis>(k));
  }

  Distribution out;
  out.axes = rest;
  for (Axis axis : rest) out.shape.push_back(joint.extent(axis));
  out.values.assign(out.shape[0] * out.shape[1], 0.0);

  const int kt = joint.num_classes();
  const int ks = joint.num_groups();
  double mass = 0.0;
  for (int a = 0; a < kt; ++a) {
    for (int b = 0; b < kt; ++b) {
      for (int c = 0; c < ks; ++c) {
        const std::array<int, 3> idx{a, b, c};
        if (idx[static_cast<int>(given)] != value) continue;
        const std::size_t flat =
            idx[static_cast<int>(rest[0])] * out.shape[1] + idx[static_cast<int>(rest[1])];
        out.values[flat] += joint(a, b, c);
        mass += joint(a, b, c);
      }
    }
  }
  if (!(mass > 0.0)) return std::nullopt;
  for (double& v : out.values) v /= mass;
  return out;
}

double entropy(std::span<const double> dist) {
  double h = 0.0;
  for (double p : dist) {
    if (p < 0.0) input_error("entropy of a distribution with a negative entry");
    if (p > 0.0) h -= p * std::log(std::max(p, kLogFloor));
  }
  return std::max(h, 0.0);
}

Matrix joint_backward(const ProbBatch& batch, std::span<const double> dtable) {
  Matrix grad(batch.size(), static_cast<std::size_t>(batch.num_classes()));
  kernels::parallel::scatter_joint_grad(dtable, batch.num_groups(), batch.target(),
                                        batch.sensitive(),
                                        1.0 / static_cast<double>(batch.size()), grad);
  return grad;
}

}  // namespace fairreg
