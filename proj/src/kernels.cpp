#include "fairreg/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include <omp.h>

namespace fairreg::kernels {

namespace {

// Row range [begin, end) of the given block.
struct RowRange {
  std::size_t begin;
  std::size_t end;
};

RowRange block_rows(std::size_t block, std::size_t n) {
  const std::size_t begin = block * kBlockRows;
  return {begin, std::min(n, begin + kBlockRows)};
}

std::size_t num_blocks(std::size_t n) { return (n + kBlockRows - 1) / kBlockRows; }

void accumulate_joint_rows(const Matrix& probs, std::span<const int> target,
                           std::span<const int> sensitive, int num_groups, RowRange rows,
                           std::span<double> table) {
  const int kt = static_cast<int>(probs.cols());
  for (std::size_t i = rows.begin; i < rows.end; ++i) {
    const auto p = probs.row(i);
    const int b = target[i];
    const int c = sensitive[i];
    for (int a = 0; a < kt; ++a) {
      table[joint_index(a, b, c, kt, num_groups)] += p[a];
    }
  }
}

void accumulate_affine_rows(const Matrix& x, const Matrix& dout, RowRange rows,
                            std::span<double> dw, std::span<double> dbias) {
  const std::size_t d = x.cols();
  const std::size_t k = dout.cols();
  for (std::size_t i = rows.begin; i < rows.end; ++i) {
    const auto xi = x.row(i);
    const auto gi = dout.row(i);
    for (std::size_t r = 0; r < d; ++r) {
      const double xr = xi[r];
      double* dw_row = dw.data() + r * k;
      for (std::size_t j = 0; j < k; ++j) dw_row[j] += xr * gi[j];
    }
    for (std::size_t j = 0; j < k; ++j) dbias[j] += gi[j];
  }
}

void affine_row(const Matrix& x, const Matrix& w, std::span<const double> bias,
                std::size_t i, Matrix& out) {
  const std::size_t d = x.cols();
  const std::size_t k = w.cols();
  auto o = out.row(i);
  std::copy(bias.begin(), bias.end(), o.begin());
  const auto xi = x.row(i);
  for (std::size_t r = 0; r < d; ++r) {
    const double xr = xi[r];
    const auto wr = w.row(r);
    for (std::size_t j = 0; j < k; ++j) o[j] += xr * wr[j];
  }
}

void backprop_row(const Matrix& dout, const Matrix& w, std::size_t i, Matrix& dx) {
  const std::size_t d = w.rows();
  const std::size_t k = w.cols();
  const auto g = dout.row(i);
  auto o = dx.row(i);
  for (std::size_t r = 0; r < d; ++r) {
    const auto wr = w.row(r);
    double s = 0.0;
    for (std::size_t j = 0; j < k; ++j) s += g[j] * wr[j];
    o[r] = s;
  }
}

void softmax_row(std::span<double> z) {
  const double m = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (double& v : z) {
    v = std::exp(v - m);
    sum += v;
  }
  for (double& v : z) v /= sum;
}

}  // namespace

namespace serial {

void accumulate_joint(const Matrix& probs, std::span<const int> target,
                      std::span<const int> sensitive, int num_groups,
                      std::span<double> table) {
  accumulate_joint_rows(probs, target, sensitive, num_groups, {0, probs.rows()}, table);
}

void scatter_joint_grad(std::span<const double> dtable, int num_groups,
                        std::span<const int> target, std::span<const int> sensitive,
                        double scale, Matrix& grad) {
  const int kt = static_cast<int>(grad.cols());
  for (std::size_t i = 0; i < grad.rows(); ++i) {
    auto g = grad.row(i);
    for (int a = 0; a < kt; ++a) {
      g[a] = scale * dtable[joint_index(a, target[i], sensitive[i], kt, num_groups)];
    }
  }
}

void affine(const Matrix& x, const Matrix& w, std::span<const double> bias, Matrix& out) {
  for (std::size_t i = 0; i < x.rows(); ++i) affine_row(x, w, bias, i, out);
}

void accumulate_affine_grad(const Matrix& x, const Matrix& dout, Matrix& dw,
                            std::span<double> dbias) {
  accumulate_affine_rows(x, dout, {0, x.rows()}, dw.values(), dbias);
}

void backprop_input(const Matrix& dout, const Matrix& w, Matrix& dx) {
  for (std::size_t i = 0; i < dout.rows(); ++i) backprop_row(dout, w, i, dx);
}

void softmax_rows(Matrix& logits) {
  for (std::size_t i = 0; i < logits.rows(); ++i) softmax_row(logits.row(i));
}

}  // namespace serial

namespace parallel {

void accumulate_joint(const Matrix& probs, std::span<const int> target,
                      std::span<const int> sensitive, int num_groups,
                      std::span<double> table) {
  const std::size_t n = probs.rows();
  const std::size_t blocks = num_blocks(n);
  const std::size_t cells = table.size();
  std::vector<double> partial(blocks * cells, 0.0);

  const auto nb = static_cast<long long>(blocks);
#pragma omp parallel for schedule(static) if (nb > 1)
  for (long long blk = 0; blk < nb; ++blk) {
    std::span<double> out(partial.data() + blk * cells, cells);
    accumulate_joint_rows(probs, target, sensitive, num_groups,
                          block_rows(static_cast<std::size_t>(blk), n), out);
  }
  for (std::size_t blk = 0; blk < blocks; ++blk) {
    for (std::size_t j = 0; j < cells; ++j) table[j] += partial[blk * cells + j];
  }
}

void scatter_joint_grad(std::span<const double> dtable, int num_groups,
                        std::span<const int> target, std::span<const int> sensitive,
                        double scale, Matrix& grad) {
  const int kt = static_cast<int>(grad.cols());
  const auto n = static_cast<long long>(grad.rows());
#pragma omp parallel for schedule(static) if (n > static_cast<long long>(kBlockRows))
  for (long long i = 0; i < n; ++i) {
    auto g = grad.row(static_cast<std::size_t>(i));
    for (int a = 0; a < kt; ++a) {
      g[a] = scale * dtable[joint_index(a, target[i], sensitive[i], kt, num_groups)];
    }
  }
}

void affine(const Matrix& x, const Matrix& w, std::span<const double> bias, Matrix& out) {
  const auto n = static_cast<long long>(x.rows());
#pragma omp parallel for schedule(static) if (n > static_cast<long long>(kBlockRows))
  for (long long i = 0; i < n; ++i) affine_row(x, w, bias, static_cast<std::size_t>(i), out);
}

void accumulate_affine_grad(const Matrix& x, const Matrix& dout, Matrix& dw,
                            std::span<double> dbias) {
  const std::size_t n = x.rows();
  const std::size_t blocks = num_blocks(n);
  const std::size_t wcells = dw.values().size();
  const std::size_t bcells = dbias.size();
  const std::size_t stride = wcells + bcells;
  std::vector<double> partial(blocks * stride, 0.0);

  const auto nb = static_cast<long long>(blocks);
#pragma omp parallel for schedule(static) if (nb > 1)
  for (long long blk = 0; blk < nb; ++blk) {
    double* base = partial.data() + blk * stride;
    accumulate_affine_rows(x, dout, block_rows(static_cast<std::size_t>(blk), n),
                           {base, wcells}, {base + wcells, bcells});
  }
  auto w = dw.values();
  for (std::size_t blk = 0; blk < blocks; ++blk) {
    const double* base = partial.data() + blk * stride;
    for (std::size_t j = 0; j < wcells; ++j) w[j] += base[j];
    for (std::size_t j = 0; j < bcells; ++j) dbias[j] += base[wcells + j];
  }
}

void backprop_input(const Matrix& dout, const Matrix& w, Matrix& dx) {
  const auto n = static_cast<long long>(dout.rows());
#pragma omp parallel for schedule(static) if (n > static_cast<long long>(kBlockRows))
  for (long long i = 0; i < n; ++i) backprop_row(dout, w, static_cast<std::size_t>(i), dx);
}

void softmax_rows(Matrix& logits) {
  const auto n = static_cast<long long>(logits.rows());
#pragma omp parallel for schedule(static) if (n > static_cast<long long>(kBlockRows))
  for (long long i = 0; i < n; ++i) softmax_row(logits.row(static_cast<std::size_t>(i)));
}

}  // namespace parallel

}  // namespace fairreg::kernels
