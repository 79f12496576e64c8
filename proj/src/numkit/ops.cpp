#include "tot/numkit/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "tot/errors.hpp"
#include "tot/numkit/kernels.hpp"

namespace tot::numkit {
namespace {

void check_inner(const Tensor& a, const Tensor& b, std::size_t ka, std::size_t kb, const char* op) {
  if (ka != kb) {
    throw DimensionError(std::string(op) + ": inner dimensions disagree, " + to_string(a.shape()) + " vs " +
                         to_string(b.shape()));
  }
}

void require_same_tape(Var a, Var b, const char* op) {
  if (&a.tape() != &b.tape()) throw InputError(std::string(op) + ": operands live on different tapes");
}

void add_into(Tensor& dst, const Tensor& src) {
  auto d = dst.data();
  auto s = src.data();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] += s[i];
}

// Elementwise unary op whose adjoint is grad_out * dfdx(x, y).
template <class F, class D>
Var unary(const char* op, Var x, F f, D dfdx) {
  require_rank2(x.value(), op);
  const Tensor& xv = x.value();
  Tensor out(xv.shape());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = f(xv[i]);
  return x.tape().record(op, std::move(out), {x}, [x, dfdx](Tape& t, const Tensor& y, const Tensor& g) {
    const Tensor& xv = t.value(x);
    Tensor& gx = t.grad_buffer(x);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * dfdx(xv[i], y[i]);
  });
}

}  // namespace

// ---- plain ----

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank2(a, "matmul");
  require_rank2(b, "matmul");
  check_inner(a, b, a.cols(), b.rows(), "matmul");
  Tensor c = Tensor::zeros(a.rows(), b.cols());
  kernels::active().gemm_nn(a.rows(), b.cols(), a.cols(), a.data().data(), b.data().data(), c.data().data());
  return c;
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  require_rank2(a, "matmul_nt");
  require_rank2(b, "matmul_nt");
  check_inner(a, b, a.cols(), b.cols(), "matmul_nt");
  Tensor c = Tensor::zeros(a.rows(), b.rows());
  kernels::active().gemm_nt(a.rows(), b.rows(), a.cols(), a.data().data(), b.data().data(), c.data().data());
  return c;
}

Tensor matmul_tn(const Tensor& a, const Tensor& b) {
  require_rank2(a, "matmul_tn");
  require_rank2(b, "matmul_tn");
  check_inner(a, b, a.rows(), b.rows(), "matmul_tn");
  Tensor c = Tensor::zeros(a.cols(), b.cols());
  kernels::active().gemm_tn(a.cols(), b.cols(), a.rows(), a.data().data(), b.data().data(), c.data().data());
  return c;
}

double log_sum_exp(std::span<const double> x) {
  double m = -std::numeric_limits<double>::infinity();
  for (double v : x) m = std::max(m, v);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double v : x) s += std::exp(v - m);
  return m + std::log(s);
}

Tensor softmax_rows(const Tensor& x) {
  require_rank2(x, "softmax_rows");
  Tensor out(x.shape());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    auto in = x.row_span(r);
    auto o = out.row_span(r);
    const double m = *std::max_element(in.begin(), in.end());
    double s = 0.0;
    for (std::size_t j = 0; j < in.size(); ++j) s += (o[j] = std::exp(in[j] - m));
    for (double& v : o) v /= s;
  }
  return out;
}

// ---- tape ----

Var matmul(Var a, Var b) {
  require_same_tape(a, b, "matmul");
  return a.tape().record("matmul", matmul(a.value(), b.value()), {a, b},
                         [a, b](Tape& t, const Tensor&, const Tensor& g) {
                           const auto& k = kernels::active();
                           const Tensor& av = t.value(a);
                           const Tensor& bv = t.value(b);
                           const std::size_t m = av.rows(), kk = av.cols(), n = bv.cols();
                           if (t.requires_grad(a))  // dA = G B^T
                             k.gemm_nt(m, kk, n, g.data().data(), bv.data().data(), t.grad_buffer(a).data().data());
                           if (t.requires_grad(b))  // dB = A^T G
                             k.gemm_tn(kk, n, m, av.data().data(), g.data().data(), t.grad_buffer(b).data().data());
                         });
}

Var matmul_nt(Var a, Var b) {
  require_same_tape(a, b, "matmul_nt");
  return a.tape().record("matmul_nt", matmul_nt(a.value(), b.value()), {a, b},
                         [a, b](Tape& t, const Tensor&, const Tensor& g) {
                           const auto& k = kernels::active();
                           const Tensor& av = t.value(a);
                           const Tensor& bv = t.value(b);
                           const std::size_t m = av.rows(), kk = av.cols(), n = bv.rows();
                           if (t.requires_grad(a))  // dA = G B
                             k.gemm_nn(m, kk, n, g.data().data(), bv.data().data(), t.grad_buffer(a).data().data());
                           if (t.requires_grad(b))  // dB = G^T A
                             k.gemm_tn(n, kk, m, g.data().data(), av.data().data(), t.grad_buffer(b).data().data());
                         });
}

Var matmul_tn(Var a, Var b) {
  require_same_tape(a, b, "matmul_tn");
  return a.tape().record("matmul_tn", matmul_tn(a.value(), b.value()), {a, b},
                         [a, b](Tape& t, const Tensor&, const Tensor& g) {
                           const auto& k = kernels::active();
                           const Tensor& av = t.value(a);
                           const Tensor& bv = t.value(b);
                           const std::size_t kk = av.rows(), m = av.cols(), n = bv.cols();
                           if (t.requires_grad(a))  // dA = B G^T
                             k.gemm_nt(kk, m, n, bv.data().data(), g.data().data(), t.grad_buffer(a).data().data());
                           if (t.requires_grad(b))  // dB = A G
                             k.gemm_nn(kk, n, m, av.data().data(), g.data().data(), t.grad_buffer(b).data().data());
                         });
}

Var transpose(Var a) {
  require_rank2(a.value(), "transpose");
  return a.tape().record("transpose", a.value().transposed(), {a}, [a](Tape& t, const Tensor&, const Tensor& g) {
    add_into(t.grad_buffer(a), g.transposed());
  });
}

Var add(Var a, Var b) {
  require_same_tape(a, b, "add");
  require_same_shape(a.value(), b.value(), "add");
  Tensor out = a.value();
  add_into(out, b.value());
  return a.tape().record("add", std::move(out), {a, b}, [a, b](Tape& t, const Tensor&, const Tensor& g) {
    if (t.requires_grad(a)) add_into(t.grad_buffer(a), g);
    if (t.requires_grad(b)) add_into(t.grad_buffer(b), g);
  });
}

Var sub(Var a, Var b) {
  require_same_tape(a, b, "sub");
  require_same_shape(a.value(), b.value(), "sub");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b.value()[i];
  return a.tape().record("sub", std::move(out), {a, b}, [a, b](Tape& t, const Tensor&, const Tensor& g) {
    if (t.requires_grad(a)) add_into(t.grad_buffer(a), g);
    if (t.requires_grad(b)) {
      Tensor& gb = t.grad_buffer(b);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
    }
  });
}

Var mul(Var a, Var b) {
  require_same_tape(a, b, "mul");
  require_same_shape(a.value(), b.value(), "mul");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
  return a.tape().record("mul", std::move(out), {a, b}, [a, b](Tape& t, const Tensor&, const Tensor& g) {
    if (t.requires_grad(a)) {
      Tensor& ga = t.grad_buffer(a);
      const Tensor& bv = t.value(b);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
    }
    if (t.requires_grad(b)) {
      Tensor& gb = t.grad_buffer(b);
      const Tensor& av = t.value(a);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
    }
  });
}

Var scale(Var a, double s) {
  Tensor out = a.value();
  for (double& v : out.data()) v *= s;
  return a.tape().record("scale", std::move(out), {a}, [a, s](Tape& t, const Tensor&, const Tensor& g) {
    Tensor& ga = t.grad_buffer(a);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += s * g[i];
  });
}

Var add_scalar(Var a, double s) {
  Tensor out = a.value();
  for (double& v : out.data()) v += s;
  return a.tape().record("add_scalar", std::move(out), {a},
                         [a](Tape& t, const Tensor&, const Tensor& g) { add_into(t.grad_buffer(a), g); });
}

Var scale_by(Var x, Var s) {
  require_same_tape(x, s, "scale_by");
  if (s.value().size() != 1) throw DimensionError("scale_by: scale must be 1x1, got " + to_string(s.shape()));
  const double sv = s.value()[0];
  Tensor out = x.value();
  for (double& v : out.data()) v *= sv;
  return x.tape().record("scale_by", std::move(out), {x, s}, [x, s](Tape& t, const Tensor&, const Tensor& g) {
    const double sv = t.value(s)[0];
    if (t.requires_grad(x)) {
      Tensor& gx = t.grad_buffer(x);
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += sv * g[i];
    }
    if (t.requires_grad(s)) {
      const Tensor& xv = t.value(x);
      double acc = 0.0;
      for (std::size_t i = 0; i < g.size(); ++i) acc += g[i] * xv[i];
      t.grad_buffer(s)[0] += acc;
    }
  });
}

Var add_row(Var x, Var r) {
  require_same_tape(x, r, "add_row");
  const Tensor& xv = x.value();
  require_rank2(xv, "add_row");
  if (r.value().rank() != 2 || r.rows() != 1 || r.cols() != xv.cols()) {
    throw DimensionError("add_row: row shape " + to_string(r.shape()) + " does not fit " + to_string(xv.shape()));
  }
  Tensor out = xv;
  for (std::size_t i = 0; i < out.rows(); ++i)
    for (std::size_t j = 0; j < out.cols(); ++j) out(i, j) += r.value()[j];
  return x.tape().record("add_row", std::move(out), {x, r}, [x, r](Tape& t, const Tensor&, const Tensor& g) {
    if (t.requires_grad(x)) add_into(t.grad_buffer(x), g);
    if (t.requires_grad(r)) {
      Tensor& gr = t.grad_buffer(r);
      for (std::size_t i = 0; i < g.rows(); ++i)
        for (std::size_t j = 0; j < g.cols(); ++j) gr[j] += g(i, j);
    }
  });
}

Var add_col(Var x, Var c) {
  require_same_tape(x, c, "add_col");
  const Tensor& xv = x.value();
  require_rank2(xv, "add_col");
  if (c.value().rank() != 2 || c.cols() != 1 || c.rows() != xv.rows()) {
    throw DimensionError("add_col: column shape " + to_string(c.shape()) + " does not fit " + to_string(xv.shape()));
  }
  Tensor out = xv;
  for (std::size_t i = 0; i < out.rows(); ++i)
    for (std::size_t j = 0; j < out.cols(); ++j) out(i, j) += c.value()[i];
  return x.tape().record("add_col", std::move(out), {x, c}, [x, c](Tape& t, const Tensor&, const Tensor& g) {
    if (t.requires_grad(x)) add_into(t.grad_buffer(x), g);
    if (t.requires_grad(c)) {
      Tensor& gc = t.grad_buffer(c);
      for (std::size_t i = 0; i < g.rows(); ++i)
        for (std::size_t j = 0; j < g.cols(); ++j) gc[i] += g(i, j);
    }
  });
}

Var relu(Var x) {
  Tape& tape = x.tape();
  if (tape.tracks_branches()) {
    for (double v : x.value().data()) tape.mix_branch(v > 0.0);
  }
  return unary(
      "relu", x, [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Var sigmoid(Var x) {
  return unary(
      "sigmoid", x,
      [](double v) {
        if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Var exp(Var x) {
  return unary(
      "exp", x, [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

Var log(Var x) {
  return unary(
      "log", x, [](double v) { return std::log(v); }, [](double v, double) { return 1.0 / v; });
}

Var cos(Var x) {
  return unary(
      "cos", x, [](double v) { return std::cos(v); }, [](double v, double) { return -std::sin(v); });
}

Var softmax_rows(Var x) {
  return x.tape().record("softmax_rows", softmax_rows(x.value()), {x}, [x](Tape& t, const Tensor& y, const Tensor& g) {
    Tensor& gx = t.grad_buffer(x);
    for (std::size_t r = 0; r < y.rows(); ++r) {
      double dotp = 0.0;
      for (std::size_t j = 0; j < y.cols(); ++j) dotp += g(r, j) * y(r, j);
      for (std::size_t j = 0; j < y.cols(); ++j) gx(r, j) += y(r, j) * (g(r, j) - dotp);
    }
  });
}

Var lse_rows(Var x) {
  const Tensor& xv = x.value();
  require_rank2(xv, "lse_rows");
  Tensor out = Tensor::zeros(xv.rows(), 1);
  for (std::size_t r = 0; r < xv.rows(); ++r) out[r] = log_sum_exp(xv.row_span(r));
  return x.tape().record("lse_rows", std::move(out), {x}, [x](Tape& t, const Tensor& y, const Tensor& g) {
    const Tensor& xv = t.value(x);
    Tensor& gx = t.grad_buffer(x);
    for (std::size_t r = 0; r < xv.rows(); ++r)
      for (std::size_t j = 0; j < xv.cols(); ++j) gx(r, j) += g[r] * std::exp(xv(r, j) - y[r]);
  });
}

Var lse_cols(Var x) {
  const Tensor& xv = x.value();
  require_rank2(xv, "lse_cols");
  const std::size_t m = xv.rows(), n = xv.cols();
  Tensor out = Tensor::zeros(1, n);
  std::vector<double> col(m);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t i = 0; i < m; ++i) col[i] = xv(i, j);
    out[j] = log_sum_exp(col);
  }
  return x.tape().record("lse_cols", std::move(out), {x}, [x](Tape& t, const Tensor& y, const Tensor& g) {
    const Tensor& xv = t.value(x);
    Tensor& gx = t.grad_buffer(x);
    for (std::size_t i = 0; i < xv.rows(); ++i)
      for (std::size_t j = 0; j < xv.cols(); ++j) gx(i, j) += g[j] * std::exp(xv(i, j) - y[j]);
  });
}

Var row_sums(Var x) {
  const Tensor& xv = x.value();
  require_rank2(xv, "row_sums");
  Tensor out = Tensor::zeros(xv.rows(), 1);
  for (std::size_t i = 0; i < xv.rows(); ++i)
    for (std::size_t j = 0; j < xv.cols(); ++j) out[i] += xv(i, j);
  return x.tape().record("row_sums", std::move(out), {x}, [x](Tape& t, const Tensor&, const Tensor& g) {
    Tensor& gx = t.grad_buffer(x);
    for (std::size_t i = 0; i < gx.rows(); ++i)
      for (std::size_t j = 0; j < gx.cols(); ++j) gx(i, j) += g[i];
  });
}

Var col_sums(Var x) {
  const Tensor& xv = x.value();
  require_rank2(xv, "col_sums");
  Tensor out = Tensor::zeros(1, xv.cols());
  for (std::size_t i = 0; i < xv.rows(); ++i)
    for (std::size_t j = 0; j < xv.cols(); ++j) out[j] += xv(i, j);
  return x.tape().record("col_sums", std::move(out), {x}, [x](Tape& t, const Tensor&, const Tensor& g) {
    Tensor& gx = t.grad_buffer(x);
    for (std::size_t i = 0; i < gx.rows(); ++i)
      for (std::size_t j = 0; j < gx.cols(); ++j) gx(i, j) += g[j];
  });
}

Var mean_rows(Var x) {
  if (x.rows() == 0) throw DimensionError("mean_rows of an empty matrix");
  return scale(col_sums(x), 1.0 / static_cast<double>(x.rows()));
}

Var sum(Var x) {
  double s = 0.0;
  for (double v : x.value().data()) s += v;
  return x.tape().record("sum", Tensor::scalar(s), {x}, [x](Tape& t, const Tensor&, const Tensor& g) {
    Tensor& gx = t.grad_buffer(x);
    for (double& v : gx.data()) v += g[0];
  });
}

Var concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw DimensionError("concat_rows of nothing");
  const std::size_t cols = parts.front().cols();
  std::size_t rows = 0;
  for (Var p : parts) {
    require_rank2(p.value(), "concat_rows");
    require_same_tape(parts.front(), p, "concat_rows");
    if (p.cols() != cols) {
      throw DimensionError("concat_rows: column mismatch " + to_string(parts.front().shape()) + " vs " +
                           to_string(p.shape()));
    }
    rows += p.rows();
  }
  std::vector<double> data;
  data.reserve(rows * cols);
  for (Var p : parts) data.insert(data.end(), p.value().data().begin(), p.value().data().end());
  return parts.front().tape().record("concat_rows", Tensor({rows, cols}, std::move(data)), parts,
                                     [parts](Tape& t, const Tensor&, const Tensor& g) {
                                       std::size_t offset = 0;
                                       for (Var p : parts) {
                                         const std::size_t n = t.value(p).size();
                                         if (t.requires_grad(p)) {
                                           Tensor& gp = t.grad_buffer(p);
                                           for (std::size_t i = 0; i < n; ++i) gp[i] += g[offset + i];
                                         }
                                         offset += n;
                                       }
                                     });
}

Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw DimensionError("concat_cols of nothing");
  const std::size_t rows = parts.front().rows();
  std::size_t cols = 0;
  for (Var p : parts) {
    require_rank2(p.value(), "concat_cols");
    require_same_tape(parts.front(), p, "concat_cols");
    if (p.rows() != rows) {
      throw DimensionError("concat_cols: row mismatch " + to_string(parts.front().shape()) + " vs " +
                           to_string(p.shape()));
    }
    cols += p.cols();
  }
  Tensor out = Tensor::zeros(rows, cols);
  std::size_t offset = 0;
  for (Var p : parts) {
    const Tensor& v = p.value();
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < v.cols(); ++j) out(i, offset + j) = v(i, j);
    offset += v.cols();
  }
  return parts.front().tape().record("concat_cols", std::move(out), parts,
                                     [parts](Tape& t, const Tensor&, const Tensor& g) {
                                       std::size_t offset = 0;
                                       for (Var p : parts) {
                                         const std::size_t c = t.value(p).cols();
                                         if (t.requires_grad(p)) {
                                           Tensor& gp = t.grad_buffer(p);
                                           for (std::size_t i = 0; i < g.rows(); ++i)
                                             for (std::size_t j = 0; j < c; ++j) gp(i, j) += g(i, offset + j);
                                         }
                                         offset += c;
                                       }
                                     });
}

Var slice_rows(Var x, std::size_t begin, std::size_t count) {
  const Tensor& xv = x.value();
  require_rank2(xv, "slice_rows");
  if (begin + count > xv.rows()) throw DimensionError("slice_rows out of range for " + to_string(xv.shape()));
  const std::size_t c = xv.cols();
  std::vector<double> data(xv.data().begin() + begin * c, xv.data().begin() + (begin + count) * c);
  return x.tape().record("slice_rows", Tensor({count, c}, std::move(data)), {x},
                         [x, begin](Tape& t, const Tensor&, const Tensor& g) {
                           Tensor& gx = t.grad_buffer(x);
                           const std::size_t off = begin * gx.cols();
                           for (std::size_t i = 0; i < g.size(); ++i) gx[off + i] += g[i];
                         });
}

Var slice_cols(Var x, std::size_t begin, std::size_t count) {
  const Tensor& xv = x.value();
  require_rank2(xv, "slice_cols");
  if (begin + count > xv.cols()) throw DimensionError("slice_cols out of range for " + to_string(xv.shape()));
  Tensor out = Tensor::zeros(xv.rows(), count);
  for (std::size_t i = 0; i < xv.rows(); ++i)
    for (std::size_t j = 0; j < count; ++j) out(i, j) = xv(i, begin + j);
  return x.tape().record("slice_cols", std::move(out), {x}, [x, begin](Tape& t, const Tensor&, const Tensor& g) {
    Tensor& gx = t.grad_buffer(x);
    for (std::size_t i = 0; i < g.rows(); ++i)
      for (std::size_t j = 0; j < g.cols(); ++j) gx(i, begin + j) += g(i, j);
  });
}

Var reshape(Var x, std::size_t rows, std::size_t cols) {
  return x.tape().record("reshape", x.value().reshaped({rows, cols}), {x},
                         [x](Tape& t, const Tensor&, const Tensor& g) {
                           Tensor& gx = t.grad_buffer(x);
                           for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
                         });
}

Var pick(Var x, std::size_t r, std::size_t c) {
  const Tensor& xv = x.value();
  require_rank2(xv, "pick");
  if (r >= xv.rows() || c >= xv.cols()) {
    throw DimensionError("pick (" + std::to_string(r) + "," + std::to_string(c) + ") outside " +
                         to_string(xv.shape()));
  }
  return x.tape().record("pick", Tensor::scalar(xv(r, c)), {x}, [x, r, c](Tape& t, const Tensor&, const Tensor& g) {
    t.grad_buffer(x)(r, c) += g[0];
  });
}

}  // namespace tot::numkit
