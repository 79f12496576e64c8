#include "tot/otcore/sinkhorn.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <string>

#include "tot/errors.hpp"
#include "tot/numkit/ops.hpp"

namespace tot::otcore {
namespace {

std::atomic<std::uint64_t> g_calls{0};

// Plain iterations between attempts at a Newton finish when tol > 0.
constexpr int kPolishEvery = 32;

void check_marginal(std::span<const double> m, std::size_t n, const char* which) {
  if (m.size() != n) {
    throw DimensionError(std::string(which) + " marginal has " + std::to_string(m.size()) + " entries, plan needs " +
                         std::to_string(n));
  }
  double total = 0.0;
  for (double v : m) {
    if (!(v > 0.0) || !std::isfinite(v)) throw InputError(std::string(which) + " marginal entries must be positive");
    total += v;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw InputError(std::string(which) + " marginal sums to " + std::to_string(total) + ", expected 1");
  }
}

std::vector<double> logs(std::span<const double> v) {
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = std::log(v[i]);
  return out;
}

void check_inputs(const Tensor& cost, std::span<const double> a, std::span<const double> b,
                  const SinkhornConfig& cfg) {
  cfg.validate();
  numkit::require_rank2(cost, "sinkhorn");
  check_marginal(a, cost.rows(), "source");
  check_marginal(b, cost.cols(), "target");
}

// Plan whose rows are rescaled to sum exactly to a: P_ij = a_i softmax_j(L_ij + g_j).
Tensor row_normalised(const Tensor& log_k, std::span<const double> g, std::span<const double> a) {
  Tensor z(log_k.shape());
  for (std::size_t i = 0; i < z.rows(); ++i)
    for (std::size_t j = 0; j < z.cols(); ++j) z(i, j) = log_k(i, j) + g[j];
  Tensor p = numkit::softmax_rows(z);
  for (std::size_t i = 0; i < p.rows(); ++i)
    for (double& v : p.row_span(i)) v *= a[i];
  return p;
}

Tensor col_normalised(const Tensor& log_k, std::span<const double> f, std::span<const double> b) {
  Tensor z(log_k.shape());
  for (std::size_t i = 0; i < z.rows(); ++i)
    for (std::size_t j = 0; j < z.cols(); ++j) z(i, j) = log_k(i, j) + f[i];
  Tensor p = numkit::softmax_rows(z.transposed()).transposed();
  for (std::size_t i = 0; i < p.rows(); ++i)
    for (std::size_t j = 0; j < p.cols(); ++j) p(i, j) *= b[j];
  return p;
}

// In-place Cholesky solve of the SPD system h x = r (h is k x k).
bool cholesky_solve(std::vector<double>& h, std::vector<double>& r, std::size_t k) {
  for (std::size_t j = 0; j < k; ++j) {
    double d = h[j * k + j];
    for (std::size_t p = 0; p < j; ++p) d -= h[j * k + p] * h[j * k + p];
    if (!(d > 0.0)) return false;
    d = std::sqrt(d);
    h[j * k + j] = d;
    for (std::size_t i = j + 1; i < k; ++i) {
      double v = h[i * k + j];
      for (std::size_t p = 0; p < j; ++p) v -= h[i * k + p] * h[j * k + p];
      h[i * k + j] = v / d;
    }
  }
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t p = 0; p < i; ++p) r[i] -= h[i * k + p] * r[p];
    r[i] /= h[i * k + i];
  }
  for (std::size_t i = k; i-- > 0;) {
    for (std::size_t p = i + 1; p < k; ++p) r[i] -= h[p * k + i] * r[p];
    r[i] /= h[i * k + i];
  }
  return true;
}

// Newton ascent on the semi-dual  G(g) = <b, g> - sum_i a_i lse_j(L_ij + g_j),
// whose gradient is b minus the column sums of the row-normalised plan. Plain
// scaling slows to a crawl for small eps; this reaches the same fixed point in
// a handful of steps. Returns true (and updates g) once the column violation
// is within tol.
bool newton_polish(const Tensor& log_k, std::span<const double> a, std::span<const double> b, std::vector<double>& g,
                   double tol) {
  const std::size_t n = log_k.rows(), m = log_k.cols();
  if (m < 2) return false;
  const std::size_t k = m - 1;  // g is defined up to a constant; pin g[m-1]
  std::vector<double> z(m), pi(n * m), s(m), grad(m), h(k * k), step(k), trial(m);

  auto evaluate = [&](const std::vector<double>& gv, bool fill) {
    double obj = 0.0;
    for (std::size_t j = 0; j < m; ++j) obj += b[j] * gv[j];
    if (fill) std::fill(s.begin(), s.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < m; ++j) z[j] = log_k(i, j) + gv[j];
      const double l = numkit::log_sum_exp(std::span<const double>(z.data(), m));
      obj -= a[i] * l;
      if (fill)
        for (std::size_t j = 0; j < m; ++j) s[j] += a[i] * (pi[i * m + j] = std::exp(z[j] - l));
    }
    return obj;
  };

  double obj = evaluate(g, true);
  for (int iter = 0; iter < 500; ++iter) {
    double worst = 0.0;
    for (std::size_t j = 0; j < m; ++j) worst = std::max(worst, std::abs(grad[j] = b[j] - s[j]));
    if (worst <= tol) return true;
    double max_diag = 0.0;
    for (std::size_t p = 0; p < k; ++p)
      for (std::size_t q = 0; q < k; ++q) {
        // Diagonal as a_i pi_ip (1 - pi_ip) with 1 - pi_ip summed from the
        // other entries; subtracting from s_p cancels when pi_ip ~ 1.
        double v = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          const double* row = &pi[i * m];
          if (p == q) {
            double rest = 0.0;
            for (std::size_t j = 0; j < m; ++j)
              if (j != p) rest += row[j];
            v += a[i] * row[p] * rest;
          } else {
            v -= a[i] * row[p] * row[q];
          }
        }
        h[p * k + q] = v;
        if (p == q) max_diag = std::max(max_diag, v);
      }
    for (std::size_t p = 0; p < k; ++p) h[p * k + p] += 1e-14 * max_diag + 1e-300;
    for (std::size_t p = 0; p < k; ++p) step[p] = grad[p];
    if (!cholesky_solve(h, step, k)) return false;
    double slope = 0.0;
    for (std::size_t p = 0; p < k; ++p) slope += grad[p] * step[p];
    // Backtracking; the slack admits steps whose gain is below rounding.
    double t = 1.0;
    bool accepted = false;
    for (int ls = 0; ls < 60 && !accepted; ++ls, t *= 0.5) {
      for (std::size_t p = 0; p < k; ++p) trial[p] = g[p] + t * step[p];
      trial[k] = g[k];
      const double cand = evaluate(trial, false);
      if (cand >= obj + 1e-4 * t * slope - 1e-15 * std::abs(obj)) {
        g = trial;
        obj = evaluate(g, true);
        accepted = true;
      }
    }
    if (!accepted) return false;
  }
  return false;
}

}  // namespace

void SinkhornConfig::validate() const {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) {
    throw ConfigError("sinkhorn epsilon must be positive, got " + std::to_string(epsilon));
  }
  if (max_iters < 1) throw ConfigError("sinkhorn max_iters must be at least 1");
  if (!(tol >= 0.0)) throw ConfigError("sinkhorn tolerance must be non-negative");
}

std::vector<double> uniform_marginal(std::size_t n) { return std::vector<double>(n, 1.0 / static_cast<double>(n)); }

double transport_cost(const Tensor& cost, const Tensor& plan) {
  numkit::require_same_shape(cost, plan, "transport_cost");
  double s = 0.0;
  for (std::size_t i = 0; i < cost.size(); ++i) s += cost[i] * plan[i];
  return s;
}

double entropy(const Tensor& plan) {
  double h = 0.0;
  for (double p : plan.data())
    if (p > 0.0) h -= p * (std::log(p) - 1.0);
  return h;
}

double row_violation(const Tensor& plan, std::span<const double> a) {
  double worst = 0.0;
  for (std::size_t i = 0; i < plan.rows(); ++i) {
    double s = 0.0;
    for (double v : plan.row_span(i)) s += v;
    worst = std::max(worst, std::abs(s - a[i]));
  }
  return worst;
}

double col_violation(const Tensor& plan, std::span<const double> b) {
  std::vector<double> s(plan.cols(), 0.0);
  for (std::size_t i = 0; i < plan.rows(); ++i)
    for (std::size_t j = 0; j < plan.cols(); ++j) s[j] += plan(i, j);
  double worst = 0.0;
  for (std::size_t j = 0; j < s.size(); ++j) worst = std::max(worst, std::abs(s[j] - b[j]));
  return worst;
}

std::uint64_t sinkhorn_call_count() { return g_calls.load(std::memory_order_relaxed); }

TransportPlan sinkhorn(const CostMatrix& cost, std::span<const double> a, std::span<const double> b,
                       const SinkhornConfig& cfg) {
  const Tensor& c = cost.values;
  check_inputs(c, a, b, cfg);
  g_calls.fetch_add(1, std::memory_order_relaxed);

  const std::size_t n = c.rows(), m = c.cols();
  Tensor log_k(c.shape());
  for (std::size_t i = 0; i < c.size(); ++i) log_k[i] = c[i] * (-1.0 / cfg.epsilon);
  const std::vector<double> log_a = logs(a), log_b = logs(b);
  std::vector<double> f(n, 0.0), g(m, 0.0), buf(std::max(n, m));

  auto row_step = [&] {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < m; ++j) buf[j] = log_k(i, j) + g[j];
      f[i] = log_a[i] - numkit::log_sum_exp(std::span<const double>(buf.data(), m));
    }
  };
  auto col_step = [&] {
    for (std::size_t j = 0; j < m; ++j) {
      for (std::size_t i = 0; i < n; ++i) buf[i] = log_k(i, j) + f[i];
      g[j] = log_b[j] - numkit::log_sum_exp(std::span<const double>(buf.data(), n));
    }
  };
  // The final half-step divides by the actual sums, so its marginal is exact
  // to rounding even when the potentials are huge.
  auto assemble = [&] {
    return cfg.last == Normalization::Row ? row_normalised(log_k, g, a) : col_normalised(log_k, f, b);
  };
  auto polish = [&] {
    if (cfg.last == Normalization::Row) return newton_polish(log_k, a, b, g, cfg.tol);
    return newton_polish(log_k.transposed(), b, a, f, cfg.tol);
  };

  TransportPlan out;
  out.src_marginal.assign(a.begin(), a.end());
  out.tgt_marginal.assign(b.begin(), b.end());
  for (int it = 0; it < cfg.max_iters; ++it) {
    if (cfg.last == Normalization::Row) {
      col_step();
      row_step();
    } else {
      row_step();
      col_step();
    }
    out.values = assemble();
    out.iterations = it + 1;
    const double open = cfg.last == Normalization::Row ? col_violation(out.values, b) : row_violation(out.values, a);
    const double fixed = cfg.last == Normalization::Row ? row_violation(out.values, a) : col_violation(out.values, b);
    out.violation_history.push_back(std::max(open, fixed));
    if (open <= cfg.tol) {
      out.converged = true;
      break;
    }
    if (cfg.tol > 0.0 && (it + 1) % kPolishEvery == 0) {
      const auto f0 = f, g0 = g;
      if (polish()) {
        if (cfg.last == Normalization::Row)
          row_step();
        else
          col_step();
        Tensor p = assemble();
        const double o = cfg.last == Normalization::Row ? col_violation(p, b) : row_violation(p, a);
        if (o <= cfg.tol) {
          out.values = std::move(p);
          out.violation_history.push_back(
              std::max(o, cfg.last == Normalization::Row ? row_violation(out.values, a) : col_violation(out.values, b)));
          out.converged = true;
          break;
        }
      }
      f = f0;
      g = g0;
    }
  }
  return out;
}

Var sinkhorn(Var cost, std::span<const double> a, std::span<const double> b, const SinkhornConfig& cfg) {
  check_inputs(cost.value(), a, b, cfg);
  g_calls.fetch_add(1, std::memory_order_relaxed);

  auto& tape = cost.tape();
  const std::size_t n = cost.rows(), m = cost.cols();
  const std::vector<double> la = logs(a), lb = logs(b);
  Var log_a = tape.constant(Tensor({n, 1}, la));
  Var log_b = tape.constant(Tensor({1, m}, lb));
  Var log_k = numkit::scale(cost, -1.0 / cfg.epsilon);
  Var f = tape.constant(Tensor::zeros(n, 1));
  Var g = tape.constant(Tensor::zeros(1, m));

  auto row_step = [&] { f = numkit::sub(log_a, numkit::lse_rows(numkit::add_row(log_k, g))); };
  auto col_step = [&] { g = numkit::sub(log_b, numkit::lse_cols(numkit::add_col(log_k, f))); };

  auto assemble = [&] {
    if (cfg.last == Normalization::Row) {
      Tensor scale_a({n, m});
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) scale_a(i, j) = a[i];
      return numkit::mul(numkit::softmax_rows(numkit::add_row(log_k, g)), tape.constant(std::move(scale_a)));
    }
    Tensor scale_b({n, m});
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < m; ++j) scale_b(i, j) = b[j];
    Var cols = numkit::transpose(numkit::softmax_rows(numkit::transpose(numkit::add_col(log_k, f))));
    return numkit::mul(cols, tape.constant(std::move(scale_b)));
  };

  for (int it = 0; it < cfg.max_iters; ++it) {
    if (cfg.last == Normalization::Row) {
      col_step();
      row_step();
    } else {
      row_step();
      col_step();
    }
    if (cfg.tol > 0.0) {
      // Stopping is a value-level decision; only the returned plan is
      // differentiated.
      Tensor probe = assemble().value();
      const double open = cfg.last == Normalization::Row ? col_violation(probe, b) : row_violation(probe, a);
      if (open <= cfg.tol) break;
    }
  }
  return assemble();
}

}  // namespace tot::otcore
