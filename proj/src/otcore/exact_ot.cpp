#include "tot/otcore/exact_ot.hpp"

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "tot/errors.hpp"

namespace tot::otcore {
namespace {

struct Edge {
  std::size_t to;
  std::size_t rev;  // index of the paired edge in adj[to]
  double cap;
  double cost;
};

class FlowNetwork {
 public:
  explicit FlowNetwork(std::size_t nodes) : adj_(nodes) {}

  // Returns the index of the forward edge within adj[from].
  std::size_t add_edge(std::size_t from, std::size_t to, double cap, double cost) {
    adj_[from].push_back({to, adj_[to].size(), cap, cost});
    adj_[to].push_back({from, adj_[from].size() - 1, 0.0, -cost});
    return adj_[from].size() - 1;
  }

  // Pushes up to `demand` units from s to t along successive cheapest paths.
  double min_cost_flow(std::size_t s, std::size_t t, double demand, double flow_eps) {
    const std::size_t n = adj_.size();
    constexpr double kInf = std::numeric_limits<double>::infinity();
    // Relaxations must improve by more than this; stops rounding noise from
    // cycling around zero-cost loops.
    constexpr double kCostSlack = 1e-13;
    double shipped = 0.0;
    std::vector<double> dist(n);
    std::vector<std::size_t> prev_node(n), prev_edge(n);
    const std::size_t max_rounds = 8 * n * n + 64;
    for (std::size_t round = 0; round < max_rounds && demand - shipped > flow_eps; ++round) {
      std::fill(dist.begin(), dist.end(), kInf);
      dist[s] = 0.0;
      for (std::size_t pass = 0; pass + 1 < n; ++pass) {
        bool changed = false;
        for (std::size_t u = 0; u < n; ++u) {
          if (dist[u] == kInf) continue;
          for (std::size_t e = 0; e < adj_[u].size(); ++e) {
            const Edge& ed = adj_[u][e];
            if (ed.cap <= flow_eps) continue;
            const double nd = dist[u] + ed.cost;
            if (nd < dist[ed.to] - kCostSlack) {
              dist[ed.to] = nd;
              prev_node[ed.to] = u;
              prev_edge[ed.to] = e;
              changed = true;
            }
          }
        }
        if (!changed) break;
      }
      if (dist[t] == kInf) break;
      double push = demand - shipped;
      for (std::size_t v = t; v != s; v = prev_node[v]) push = std::min(push, adj_[prev_node[v]][prev_edge[v]].cap);
      for (std::size_t v = t; v != s; v = prev_node[v]) {
        Edge& ed = adj_[prev_node[v]][prev_edge[v]];
        ed.cap -= push;
        adj_[v][ed.rev].cap += push;
      }
      shipped += push;
    }
    return shipped;
  }

  // Flow on a forward edge equals the residual capacity of its reverse.
  double flow(std::size_t from, std::size_t edge) const {
    const Edge& ed = adj_[from][edge];
    return adj_[ed.to][ed.rev].cap;
  }

 private:
  std::vector<std::vector<Edge>> adj_;
};

double checked_total(std::span<const double> m, const char* which) {
  double total = 0.0;
  for (double v : m) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw InputError(std::string(which) + " marginal has a negative entry");
    total += v;
  }
  return total;
}

}  // namespace

ExactPlan exact_ot(const Tensor& cost, std::span<const double> a, std::span<const double> b) {
  numkit::require_rank2(cost, "exact_ot");
  const std::size_t n = cost.rows(), m = cost.cols();
  if (a.size() != n || b.size() != m) {
    throw DimensionError("exact_ot: marginals of length " + std::to_string(a.size()) + "/" + std::to_string(b.size()) +
                         " for cost " + numkit::to_string(cost.shape()));
  }
  if (n > kMaxExactSide || m > kMaxExactSide) {
    throw InputError("exact_ot is a small-problem oracle; cost " + numkit::to_string(cost.shape()) + " is too large");
  }
  const double ta = checked_total(a, "source"), tb = checked_total(b, "target");
  if (std::abs(ta - tb) > 1e-9) {
    throw InputError("exact_ot: infeasible marginals, totals " + std::to_string(ta) + " and " + std::to_string(tb));
  }

  const std::size_t source = 0, sink = n + m + 1;
  FlowNetwork net(n + m + 2);
  for (std::size_t i = 0; i < n; ++i) net.add_edge(source, 1 + i, a[i], 0.0);
  for (std::size_t j = 0; j < m; ++j) net.add_edge(1 + n + j, sink, b[j], 0.0);
  std::vector<std::size_t> edge_of(n * m);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j)
      edge_of[i * m + j] = net.add_edge(1 + i, 1 + n + j, std::numeric_limits<double>::infinity(), cost(i, j));

  const double demand = std::min(ta, tb);
  const double eps = 1e-14 * std::max(1.0, demand);
  const double shipped = net.min_cost_flow(source, sink, demand, eps);
  if (demand - shipped > 1e-10 * std::max(1.0, demand)) {
    throw NumericError("exact_ot: flow solver stalled after shipping " + std::to_string(shipped) + " of " +
                       std::to_string(demand));
  }

  ExactPlan out{Tensor::zeros(n, m), 0.0};
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      out.plan(i, j) = net.flow(1 + i, edge_of[i * m + j]);
      out.cost += out.plan(i, j) * cost(i, j);
    }
  return out;
}

}  // namespace tot::otcore
