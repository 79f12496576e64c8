#pragma once

// Differentiable primitives over rank-2 tensors, plus plain (tape-free)
// counterparts for the handful of ops that are also needed outside training.
//
// Shape rules are strict: no implicit broadcasting. Row/column broadcasts
// go through add_row / add_col / scale_by explicitly.

#include <cstddef>
#include <vector>

#include "tot/numkit/tape.hpp"
#include "tot/numkit/tensor.hpp"

namespace tot::numkit {

// ---- plain tensors ----

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor matmul_nt(const Tensor& a, const Tensor& b);  // a * b^T
Tensor matmul_tn(const Tensor& a, const Tensor& b);  // a^T * b
Tensor softmax_rows(const Tensor& x);
// log(sum(exp(x))) with max subtraction, -inf for an empty or all -inf span.
double log_sum_exp(std::span<const double> x);

// ---- tape ops ----

Var matmul(Var a, Var b);
Var matmul_nt(Var a, Var b);
Var matmul_tn(Var a, Var b);
Var transpose(Var a);

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);  // elementwise
Var scale(Var a, double s);
Var add_scalar(Var a, double s);
// x[m x n] * s where s is a 1 x 1 var.
Var scale_by(Var x, Var s);
// x[m x n] + r[1 x n] on every row.
Var add_row(Var x, Var r);
// x[m x n] + c[m x 1] on every column.
Var add_col(Var x, Var c);

Var relu(Var x);
Var sigmoid(Var x);
Var exp(Var x);
Var log(Var x);
Var cos(Var x);

Var softmax_rows(Var x);
Var lse_rows(Var x);  // [m x 1]
Var lse_cols(Var x);  // [1 x n]
Var row_sums(Var x);  // [m x 1]
Var col_sums(Var x);  // [1 x n]
Var mean_rows(Var x);  // [1 x n], average of the rows
Var sum(Var x);       // [1 x 1]

Var concat_rows(const std::vector<Var>& parts);
Var concat_cols(const std::vector<Var>& parts);
Var slice_rows(Var x, std::size_t begin, std::size_t count);
Var slice_cols(Var x, std::size_t begin, std::size_t count);
Var reshape(Var x, std::size_t rows, std::size_t cols);
// x(r, c) as a 1 x 1 var.
Var pick(Var x, std::size_t r, std::size_t c);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }

}  // namespace tot::numkit
