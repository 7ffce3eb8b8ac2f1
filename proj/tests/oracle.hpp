#pragma once

// Brute-force reference implementations. Everything here is written from the
// loss definitions per sample, in long double, without the joint table or any
// library helper, so agreement with the library is meaningful.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <vector>

namespace oracle {

using Real = long double;
using Rows = std::vector<std::vector<Real>>;

struct Batch {
  Rows probs;
  std::vector<int> target;
  std::vector<int> sensitive;
  int kt = 2;
  int ks = 2;

  std::size_t n() const { return target.size(); }
};

inline Real xlogx(Real p) {
  return p > 0 ? p * std::log(std::max<Real>(p, 1e-12L)) : 0;
}

inline Real entropy(const std::vector<Real>& p) {
  Real h = 0;
  for (Real v : p) h -= xlogx(v);
  return h;
}

// T[a][b][c] by the triple loop over cells, each cell scanning every sample.
inline std::vector<Real> joint(const Batch& b) {
  std::vector<Real> t(static_cast<std::size_t>(b.kt) * b.kt * b.ks, 0);
  for (int a = 0; a < b.kt; ++a) {
    for (int y = 0; y < b.kt; ++y) {
      for (int c = 0; c < b.ks; ++c) {
        Real s = 0;
        for (std::size_t i = 0; i < b.n(); ++i) {
          if (b.target[i] == y && b.sensitive[i] == c) s += b.probs[i][a];
        }
        t[(static_cast<std::size_t>(a) * b.kt + y) * b.ks + c] = s / b.n();
      }
    }
  }
  return t;
}

// Samples selected by `keep` define one comparison: the conditional
// prediction distribution of each group against the pooled one.
using Keep = std::function<bool(std::size_t)>;

inline Real l2_term(const Batch& b, const Keep& keep) {
  Real value = 0;
  std::vector<Real> pooled(b.kt, 0);
  std::size_t pooled_n = 0;
  for (std::size_t i = 0; i < b.n(); ++i) {
    if (!keep(i)) continue;
    ++pooled_n;
    for (int a = 0; a < b.kt; ++a) pooled[a] += b.probs[i][a];
  }
  if (pooled_n == 0) return 0;
  for (int c = 0; c < b.ks; ++c) {
    std::vector<Real> cond(b.kt, 0);
    std::size_t count = 0;
    for (std::size_t i = 0; i < b.n(); ++i) {
      if (!keep(i) || b.sensitive[i] != c) continue;
      ++count;
      for (int a = 0; a < b.kt; ++a) cond[a] += b.probs[i][a];
    }
    if (count == 0) continue;
    for (int a = 0; a < b.kt; ++a) {
      const Real d = cond[a] / count - pooled[a] / pooled_n;
      value += d * d;
    }
  }
  return value;
}

// H(y_t) + H(y_s*) - H(y_t, y_s*) on the selected samples.
inline Real mi_term(const Batch& b, const Keep& keep) {
  std::size_t m = 0;
  for (std::size_t i = 0; i < b.n(); ++i) m += keep(i) ? 1 : 0;
  if (m == 0) return 0;
  std::vector<Real> pq(static_cast<std::size_t>(b.kt) * b.ks, 0);
  std::vector<Real> group(b.ks, 0);
  for (std::size_t i = 0; i < b.n(); ++i) {
    if (!keep(i)) continue;
    group[b.sensitive[i]] += Real(1) / m;
    for (int a = 0; a < b.kt; ++a) pq[a * b.ks + b.sensitive[i]] += b.probs[i][a] / m;
  }
  std::vector<Real> pred(b.kt, 0);
  for (int a = 0; a < b.kt; ++a) {
    for (int c = 0; c < b.ks; ++c) pred[a] += pq[a * b.ks + c];
  }
  return std::max<Real>(0, entropy(pred) + entropy(group) - entropy(pq));
}

inline Real dp_l2(const Batch& b) {
  return l2_term(b, [](std::size_t) { return true; });
}

inline Real dp_mi(const Batch& b) {
  return mi_term(b, [](std::size_t) { return true; });
}

inline Real eo_l2(const Batch& b) {
  Real v = 0;
  for (int y = 0; y < b.kt; ++y) v += l2_term(b, [&](std::size_t i) { return b.target[i] == y; });
  return v;
}

inline Real eo_mi(const Batch& b) {
  Real v = 0;
  for (int y = 0; y < b.kt; ++y) v += mi_term(b, [&](std::size_t i) { return b.target[i] == y; });
  return v;
}

struct Iou {
  std::vector<std::optional<Real>> cell;  // kt x ks
  std::vector<std::optional<Real>> per_class;
  std::vector<std::optional<Real>> per_group;
  Real overall = 0;
  Real loss = 0;
};

// Soft event algebra per sample: intersection p * [y* = a], union by
// inclusion-exclusion, both averaged over the samples of the group.
inline Iou iou(const Batch& b) {
  Iou out;
  out.cell.assign(static_cast<std::size_t>(b.kt) * b.ks, std::nullopt);
  out.per_class.assign(b.kt, std::nullopt);
  out.per_group.assign(b.ks, std::nullopt);
  for (int a = 0; a < b.kt; ++a) {
    Real inter_all = 0;
    Real union_all = 0;
    for (int c = 0; c < b.ks; ++c) {
      Real inter = 0;
      Real uni = 0;
      for (std::size_t i = 0; i < b.n(); ++i) {
        if (b.sensitive[i] != c) continue;
        const Real p = b.probs[i][a];
        const Real g = b.target[i] == a ? 1 : 0;
        inter += p * g / b.n();
        uni += (p + g - p * g) / b.n();
      }
      inter_all += inter;
      union_all += uni;
      if (uni > 0) out.cell[a * b.ks + c] = inter / uni;
    }
    if (union_all > 0) out.per_class[a] = inter_all / union_all;
  }
  for (int c = 0; c < b.ks; ++c) {
    Real s = 0;
    int k = 0;
    for (int a = 0; a < b.kt; ++a) {
      if (out.cell[a * b.ks + c]) {
        s += *out.cell[a * b.ks + c];
        ++k;
      }
    }
    if (k > 0) out.per_group[c] = s / k;
  }
  Real s = 0;
  int k = 0;
  for (const auto& v : out.per_class) {
    if (v) {
      s += *v;
      ++k;
    }
  }
  out.overall = k > 0 ? s / k : 0;
  for (const auto& g : out.per_group) {
    if (g) out.loss += (*g - out.overall) * (*g - out.overall);
  }
  return out;
}

inline Real iou_loss(const Batch& b) { return iou(b).loss; }

// Library column order: l_iou, l2_eo, mi_eo, l2_dp, mi_dp.
inline Real loss(int kind, const Batch& b) {
  switch (kind) {
    case 0: return iou_loss(b);
    case 1: return eo_l2(b);
    case 2: return eo_mi(b);
    case 3: return dp_l2(b);
    default: return dp_mi(b);
  }
}

// Central differences of `f` in every probability entry.
inline Rows finite_difference(const Batch& b, const std::function<Real(const Batch&)>& f,
                              Real step = 1e-6L) {
  Rows grad(b.n(), std::vector<Real>(b.kt, 0));
  Batch probe = b;
  for (std::size_t i = 0; i < b.n(); ++i) {
    for (int a = 0; a < b.kt; ++a) {
      const Real keep = probe.probs[i][a];
      probe.probs[i][a] = keep + step;
      const Real up = f(probe);
      probe.probs[i][a] = keep - step;
      const Real down = f(probe);
      probe.probs[i][a] = keep;
      grad[i][a] = (up - down) / (2 * step);
    }
  }
  return grad;
}

// Effective-number weights (1 - beta) / (1 - beta^n), scaled to mean 1.
inline std::vector<Real> class_weights(const std::vector<long long>& counts, Real beta) {
  std::vector<Real> w;
  Real sum = 0;
  for (long long n : counts) {
    const Real raw = (1 - beta) / (1 - std::pow(beta, static_cast<Real>(n)));
    w.push_back(raw);
    sum += raw;
  }
  for (Real& v : w) v *= static_cast<Real>(counts.size()) / sum;
  return w;
}

// Sample standard deviation.
inline Real bessel_std(const std::vector<Real>& v) {
  Real mean = 0;
  for (Real x : v) mean += x;
  mean /= v.size();
  Real ss = 0;
  for (Real x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / (v.size() - 1));
}

// AUC by counting every (positive, negative) pair, ties worth one half.
inline std::optional<Real> pairwise_auc(const std::vector<double>& score,
                                        const std::vector<int>& label) {
  Real wins = 0;
  long long pairs = 0;
  for (std::size_t i = 0; i < score.size(); ++i) {
    if (label[i] != 1) continue;
    for (std::size_t j = 0; j < score.size(); ++j) {
      if (label[j] != 0) continue;
      ++pairs;
      wins += score[i] > score[j] ? 1 : (score[i] == score[j] ? Real(0.5) : 0);
    }
  }
  if (pairs == 0) return std::nullopt;
  return wins / pairs;
}

}  // namespace oracle
