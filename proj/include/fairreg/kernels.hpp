#pragma once

// Data-parallel inner loops shared by the estimators and the model.
//
// Every kernel exists twice. `serial` is the straightforward reference used by
// tests and the benchmark; `parallel` is the OpenMP version the library calls.
// Reductions in `parallel` split the rows into fixed blocks of kBlockRows,
// reduce each block independently and then add the block partials in block
// order, so the result does not depend on the thread count. For inputs of at
// most kBlockRows rows both versions are bit-identical.

#include <cstddef>
#include <span>

#include "fairreg/matrix.hpp"

namespace fairreg::kernels {

inline constexpr std::size_t kBlockRows = 256;

// Flat index of joint cell (pred a, target b, sensitive c).
inline std::size_t joint_index(int a, int b, int c, int kt, int ks) {
  return (static_cast<std::size_t>(a) * kt + b) * ks + c;
}

namespace serial {

// table[a][b][c] += probs[i][a] for every i with target b and sensitive c.
void accumulate_joint(const Matrix& probs, std::span<const int> target,
                      std::span<const int> sensitive, int num_groups,
                      std::span<double> table);

// grad[i][a] = scale * dtable[a][target[i]][sensitive[i]].
void scatter_joint_grad(std::span<const double> dtable, int num_groups,
                        std::span<const int> target, std::span<const int> sensitive,
                        double scale, Matrix& grad);

// out = x * w + bias (broadcast over rows).
void affine(const Matrix& x, const Matrix& w, std::span<const double> bias, Matrix& out);

// dw += x^T * dout, dbias += column sums of dout.
void accumulate_affine_grad(const Matrix& x, const Matrix& dout, Matrix& dw,
                            std::span<double> dbias);

// dx = dout * w^T.
void backprop_input(const Matrix& dout, const Matrix& w, Matrix& dx);

// In-place row softmax with max subtraction.
void softmax_rows(Matrix& logits);

}  // namespace serial

namespace parallel {

void accumulate_joint(const Matrix& probs, std::span<const int> target,
                      std::span<const int> sensitive, int num_groups,
                      std::span<double> table);

void scatter_joint_grad(std::span<const double> dtable, int num_groups,
                        std::span<const int> target, std::span<const int> sensitive,
                        double scale, Matrix& grad);

void affine(const Matrix& x, const Matrix& w, std::span<const double> bias, Matrix& out);

void accumulate_affine_grad(const Matrix& x, const Matrix& dout, Matrix& dw,
                            std::span<double> dbias);

void backprop_input(const Matrix& dout, const Matrix& w, Matrix& dx);

void softmax_rows(Matrix& logits);

}  // namespace parallel

}  // namespace fairreg::kernels
