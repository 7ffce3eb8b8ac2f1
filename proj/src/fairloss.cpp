#include "fairreg/fairloss.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <string>

#include "fairreg/error.hpp"
#include "fairreg/kernels.hpp"

namespace fairreg {

namespace {

using kernels::joint_index;

double xlogx(double p) { return p > 0.0 ? p * std::log(std::max(p, kLogFloor)) : 0.0; }

// Derivative of xlogx, consistent with the clamp.
double dxlogx(double p) { return p >= kLogFloor ? std::log(p) + 1.0 : std::log(kLogFloor); }

// Squared deviation of p(y_t | y_t* = b, y_s*) from p(y_t | y_t* = b) when
// `b` is given, or of p(y_t | y_s*) from p(y_t) when b is nullopt. `cell` maps
// (a, c) to the joint mass (summed over y_t* for demographic parity) and
// `freq` maps c to the ground-truth mass of the condition.
struct Deviation {
  double value = 0.0;
  std::vector<double> dmass;  // K_t x K_s
  int present_groups = 0;
};

template <typename Mass, typename Freq>
Deviation l2_deviation(int kt, int ks, Mass cell, Freq freq) {
  Deviation out;
  out.dmass.assign(static_cast<std::size_t>(kt) * ks, 0.0);
  double total = 0.0;
  for (int c = 0; c < ks; ++c) total += freq(c);
  if (!(total > 0.0)) return out;

  std::vector<double> overall(kt, 0.0);
  for (int a = 0; a < kt; ++a) {
    for (int c = 0; c < ks; ++c) overall[a] += cell(a, c);
    overall[a] /= total;
  }
  std::vector<double> dev_sum(kt, 0.0);
  for (int c = 0; c < ks; ++c) {
    const double fc = freq(c);
    if (!(fc > 0.0)) continue;
    ++out.present_groups;
    for (int a = 0; a < kt; ++a) {
      const double d = cell(a, c) / fc - overall[a];
      out.value += d * d;
      out.dmass[a * ks + c] += 2.0 * d / fc;
      dev_sum[a] += 2.0 * d;
    }
  }
  for (int a = 0; a < kt; ++a) {
    for (int c = 0; c < ks; ++c) out.dmass[a * ks + c] -= dev_sum[a] / total;
  }
  return out;
}

// I(y_t; y_s*) for the (possibly conditioned) slice given by `cell`, written
// as H(y_t) + H(y_s*) - H(y_t, y_s*) with ground-truth group mass `freq`.
template <typename Mass, typename Freq>
Deviation mi_deviation(int kt, int ks, Mass cell, Freq freq) {
  Deviation out;
  out.dmass.assign(static_cast<std::size_t>(kt) * ks, 0.0);
  double total = 0.0;
  for (int c = 0; c < ks; ++c) {
    total += freq(c);
    if (freq(c) > 0.0) ++out.present_groups;
  }
  if (!(total > 0.0)) return out;

  double joint_term = 0.0;
  double pred_term = 0.0;
  double group_term = 0.0;
  std::vector<double> pred(kt, 0.0);
  for (int a = 0; a < kt; ++a) {
    for (int c = 0; c < ks; ++c) {
      const double q = cell(a, c) / total;
      joint_term += xlogx(q);
      pred[a] += q;
    }
    pred_term += xlogx(pred[a]);
  }
  for (int c = 0; c < ks; ++c) group_term += xlogx(freq(c) / total);
  out.value = std::max(0.0, joint_term - pred_term - group_term);

  for (int a = 0; a < kt; ++a) {
    const double dpred = dxlogx(pred[a]);
    for (int c = 0; c < ks; ++c) {
      out.dmass[a * ks + c] = (dxlogx(cell(a, c) / total) - dpred) / total;
    }
  }
  return out;
}

TableLoss demographic_parity(const JointDistribution& joint, bool mutual_information) {
  const int kt = joint.num_classes();
  const int ks = joint.num_groups();
  // Prediction mass per (a, c) and group mass per c, summed over y_t*.
  std::vector<double> pred_group(static_cast<std::size_t>(kt) * ks, 0.0);
  std::vector<double> group(ks, 0.0);
  for (int a = 0; a < kt; ++a) {
    for (int b = 0; b < kt; ++b) {
      for (int c = 0; c < ks; ++c) pred_group[a * ks + c] += joint(a, b, c);
    }
  }
  for (int b = 0; b < kt; ++b) {
    for (int c = 0; c < ks; ++c) group[c] += joint.label_freq(b, c);
  }
  auto cell = [&](int a, int c) { return pred_group[a * ks + c]; };
  auto freq = [&](int c) { return group[c]; };
  // The squared form compares conditionals p(y_t|y_s*) with p(y_t) directly;
  // relative to the joint-vs-product difference its addends carry an extra
  // 1 / p(y_s*)^2 weight whenever the groups are not uniform.
  const Deviation dev = mutual_information ? mi_deviation(kt, ks, cell, freq)
                                           : l2_deviation(kt, ks, cell, freq);

  TableLoss out;
  out.value = dev.value;
  out.dtable.assign(joint.table().size(), 0.0);
  for (int a = 0; a < kt; ++a) {
    for (int b = 0; b < kt; ++b) {
      for (int c = 0; c < ks; ++c) out.dtable[joint_index(a, b, c, kt, ks)] = dev.dmass[a * ks + c];
    }
  }
  if (dev.present_groups < 2) {
    out.warnings.emplace_back("fewer than two sensitive groups present; demographic parity term is zero");
  }
  return out;
}

TableLoss equalized_odds(const JointDistribution& joint, bool mutual_information) {
  const int kt = joint.num_classes();
  const int ks = joint.num_groups();
  TableLoss out;
  out.dtable.assign(joint.table().size(), 0.0);
  bool any_comparable = false;
  for (int b = 0; b < kt; ++b) {
    auto cell = [&](int a, int c) { return joint(a, b, c); };
    auto freq = [&](int c) { return joint.label_freq(b, c); };
    const Deviation dev = mutual_information ? mi_deviation(kt, ks, cell, freq)
                                             : l2_deviation(kt, ks, cell, freq);
    if (dev.present_groups == 0) continue;
    if (dev.present_groups >= 2) any_comparable = true;
    out.value += dev.value;
    for (int a = 0; a < kt; ++a) {
      for (int c = 0; c < ks; ++c) out.dtable[joint_index(a, b, c, kt, ks)] = dev.dmass[a * ks + c];
    }
  }
  if (!any_comparable) {
    out.warnings.emplace_back(
        "no target class has two sensitive groups present; equalized odds term is zero");
  }
  return out;
}

// Intersection and union mass of (y_t = a) with (y_t* = a) inside group c.
struct IouMass {
  std::vector<double> inter;  // K_t x K_s
  std::vector<double> uni;    // K_t x K_s
};

IouMass iou_mass(const JointDistribution& joint) {
  const int kt = joint.num_classes();
  const int ks = joint.num_groups();
  IouMass m;
  m.inter.assign(static_cast<std::size_t>(kt) * ks, 0.0);
  m.uni.assign(static_cast<std::size_t>(kt) * ks, 0.0);
  for (int a = 0; a < kt; ++a) {
    for (int c = 0; c < ks; ++c) {
      double pred = 0.0;
      for (int b = 0; b < kt; ++b) pred += joint(a, b, c);
      const double inter = joint(a, a, c);
      m.inter[a * ks + c] = inter;
      m.uni[a * ks + c] = pred + joint.label_freq(a, c) - inter;
    }
  }
  return m;
}

TableLoss iou_table_loss(const JointDistribution& joint) {
  const int kt = joint.num_classes();
  const int ks = joint.num_groups();
  const IouMass m = iou_mass(joint);
  const IouComponents iou = iou_components(joint);

  TableLoss out;
  out.dtable.assign(joint.table().size(), 0.0);
  std::vector<double> dinter(static_cast<std::size_t>(kt) * ks, 0.0);
  std::vector<double> duni(static_cast<std::size_t>(kt) * ks, 0.0);

  double dev_sum = 0.0;
  int present_groups = 0;
  for (int c = 0; c < ks; ++c) {
    if (!iou.per_group[c]) continue;
    ++present_groups;
    const double diff = *iou.per_group[c] - iou.overall;
    const double e = 2.0 * diff;
    out.value += diff * diff;
    dev_sum += e;
    int cells = 0;
    for (int a = 0; a < kt; ++a) cells += iou.at(a, c) ? 1 : 0;
    for (int a = 0; a < kt; ++a) {
      if (!iou.at(a, c)) continue;
      const double g = e / cells;
      const double u = m.uni[a * ks + c];
      dinter[a * ks + c] += g / u;
      duni[a * ks + c] -= g * m.inter[a * ks + c] / (u * u);
    }
  }

  int present_classes = 0;
  for (int a = 0; a < kt; ++a) present_classes += iou.per_class[a] ? 1 : 0;
  for (int a = 0; a < kt; ++a) {
    if (!iou.per_class[a]) continue;
    double inter = 0.0;
    double uni = 0.0;
    for (int c = 0; c < ks; ++c) {
      inter += m.inter[a * ks + c];
      uni += m.uni[a * ks + c];
    }
    const double g = -dev_sum / present_classes;
    for (int c = 0; c < ks; ++c) {
      dinter[a * ks + c] += g / uni;
      duni[a * ks + c] -= g * inter / (uni * uni);
    }
  }

  // union = pred mass + ground-truth mass - intersection
  for (int a = 0; a < kt; ++a) {
    for (int c = 0; c < ks; ++c) {
      const double du = duni[a * ks + c];
      for (int b = 0; b < kt; ++b) out.dtable[joint_index(a, b, c, kt, ks)] += du;
      out.dtable[joint_index(a, a, c, kt, ks)] += dinter[a * ks + c] - du;
    }
  }
  if (present_groups < 2) {
    out.warnings.emplace_back("fewer than two sensitive groups present; IoU term is zero");
  }
  return out;
}

LossResult to_batch_result(const ProbBatch& batch, TableLoss table) {
  LossResult out;
  out.value = table.value;
  out.grad = joint_backward(batch, table.dtable);
  out.warnings = std::move(table.warnings);
  return out;
}

}  // namespace

std::string_view to_string(LossKind kind) {
  switch (kind) {
    case LossKind::iou: return "l_iou";
    case LossKind::l2_eo: return "l2_eo";
    case LossKind::mi_eo: return "mi_eo";
    case LossKind::l2_dp: return "l2_dp";
    case LossKind::mi_dp: return "mi_dp";
  }
  return "l_iou";
}

std::optional<LossKind> parse_loss_kind(std::string_view text) {
  std::string key;
  for (char ch : text) {
    key.push_back(ch == '-' ? '_' : static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
  }
  if (key == "l_iou" || key == "iou") return LossKind::iou;
  if (key == "l2_eo" || key == "eo_l2") return LossKind::l2_eo;
  if (key == "mi_eo" || key == "eo_mi") return LossKind::mi_eo;
  if (key == "l2_dp" || key == "dp_l2") return LossKind::l2_dp;
  if (key == "mi_dp" || key == "dp_mi") return LossKind::mi_dp;
  return std::nullopt;
}

TableLoss table_loss(LossKind kind, const JointDistribution& joint) {
  switch (kind) {
    case LossKind::iou: return iou_table_loss(joint);
    case LossKind::l2_eo: return equalized_odds(joint, false);
    case LossKind::mi_eo: return equalized_odds(joint, true);
    case LossKind::l2_dp: return demographic_parity(joint, false);
    case LossKind::mi_dp: return demographic_parity(joint, true);
  }
  return {};
}

LossResult fairness_loss(LossKind kind, const ProbBatch& batch) {
  return to_batch_result(batch, table_loss(kind, estimate_joint(batch)));
}

LossResult dp_l2(const ProbBatch& batch) { return fairness_loss(LossKind::l2_dp, batch); }
LossResult dp_mi(const ProbBatch& batch) { return fairness_loss(LossKind::mi_dp, batch); }
LossResult eo_l2(const ProbBatch& batch) { return fairness_loss(LossKind::l2_eo, batch); }
LossResult eo_mi(const ProbBatch& batch) { return fairness_loss(LossKind::mi_eo, batch); }
LossResult iou_loss(const ProbBatch& batch) { return fairness_loss(LossKind::iou, batch); }

IouComponents iou_components(const JointDistribution& joint) {
  const int kt = joint.num_classes();
  const int ks = joint.num_groups();
  const IouMass m = iou_mass(joint);

  IouComponents out;
  out.num_classes = kt;
  out.num_groups = ks;
  out.per_class_group.assign(static_cast<std::size_t>(kt) * ks, std::nullopt);
  out.per_class.assign(kt, std::nullopt);
  out.per_group.assign(ks, std::nullopt);

  for (int a = 0; a < kt; ++a) {
    double inter = 0.0;
    double uni = 0.0;
    for (int c = 0; c < ks; ++c) {
      const double u = m.uni[a * ks + c];
      inter += m.inter[a * ks + c];
      uni += u;
      if (u > 0.0) out.per_class_group[a * ks + c] = m.inter[a * ks + c] / u;
    }
    if (uni > 0.0) out.per_class[a] = inter / uni;
  }
  for (int c = 0; c < ks; ++c) {
    double sum = 0.0;
    int cells = 0;
    for (int a = 0; a < kt; ++a) {
      if (const auto& v = out.at(a, c)) {
        sum += *v;
        ++cells;
      }
    }
    if (cells > 0) out.per_group[c] = sum / cells;
  }
  double sum = 0.0;
  int classes = 0;
  for (const auto& v : out.per_class) {
    if (v) {
      sum += *v;
      ++classes;
    }
  }
  out.overall = classes > 0 ? sum / classes : 0.0;
  return out;
}

IouComponents iou_components(const ProbBatch& batch) {
  return iou_components(estimate_joint(batch));
}

LossResult combined_loss(const ProbBatch& batch, const PerSampleLoss& primary, LossKind kind,
                         double lambda) {
  if (!(lambda >= 0.0)) input_error("fairness weight lambda must be nonnegative");
  if (primary.values.size() != batch.size() || primary.grad.rows() != batch.size() ||
      primary.grad.cols() != static_cast<std::size_t>(batch.num_classes())) {
    input_error("per-sample loss does not match the batch shape");
  }
  LossResult out;
  for (double v : primary.values) out.value += v;
  out.grad = primary.grad;
  if (lambda == 0.0) return out;

  LossResult fair = fairness_loss(kind, batch);
  out.value += lambda * fair.value;
  auto g = out.grad.values();
  const auto fg = fair.grad.values();
  for (std::size_t j = 0; j < g.size(); ++j) g[j] += lambda * fg[j];
  out.warnings = std::move(fair.warnings);
  return out;
}

ProbBatch squeeze(const ProbBatch& batch, SqueezeParams params) {
  if (!(params.alpha > 0.0 && params.alpha <= 1.0)) {
    input_error("squeeze alpha must lie in (0, 1]");
  }
  const double uniform = 1.0 / batch.num_classes();
  Matrix probs = batch.probs();
  for (double& p : probs.values()) p = p * params.alpha + uniform * (1.0 - params.alpha);
  return batch.with_probs(std::move(probs));
}

}  // namespace fairreg
