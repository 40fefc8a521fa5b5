// SPDX-License-Identifier: Apache-2.0
#include "crpl/transport.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <queue>

#include "crpl/error.hpp"

namespace crpl {

namespace {

constexpr double kMarginalTolerance = 1e-9;
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void check_simplex(const Vector& w, const char* what) {
  require(w.size() > 0, ErrorCode::EmptyInput, what);
  require(w.allFinite() && (w.array() >= 0.0).all(), ErrorCode::InfeasibleMarginals, what);
  require(std::abs(w.sum() - 1.0) <= kMarginalTolerance, ErrorCode::InfeasibleMarginals, what);
}

void check_problem(const Matrix& cost, const Vector& a, const Vector& b) {
  check_simplex(a, "row marginal is not a probability vector");
  check_simplex(b, "column marginal is not a probability vector");
  require(cost.rows() == a.size() && cost.cols() == b.size(), ErrorCode::DimensionMismatch,
          "cost matrix shape does not match the marginals");
  require(cost.allFinite(), ErrorCode::InvalidArgument, "cost matrix has non-finite entries");
}

// Spanning-tree basis of the bipartite transportation graph. Rows are nodes
// [0, K), columns are nodes [K, K + B).
class TransportationSimplex {
 public:
  TransportationSimplex(const Matrix& cost, const Vector& a, const Vector& b)
      : cost_(cost),
        rows_(cost.rows()),
        cols_(cost.cols()),
        flow_(Matrix::Zero(cost.rows(), cost.cols())),
        basic_(cost.rows(), cost.cols()) {
    basic_.setConstant(false);
    north_west_corner(a, b);
  }

  Matrix solve() {
    const double scale = std::max(1.0, cost_.cwiseAbs().maxCoeff());
    const double tol = 1e-12 * scale;
    const long max_pivots = 50L * (rows_ + cols_) * (rows_ * cols_) + 1000;
    int degenerate_run = 0;
    for (long pivot = 0; pivot < max_pivots; ++pivot) {
      compute_potentials();
      // Dantzig pricing, falling back to Bland's rule after a run of
      // degenerate pivots so the method cannot cycle.
      const bool bland = degenerate_run > rows_ + cols_;
      Eigen::Index enter_r = -1, enter_c = -1;
      double best = -tol;
      for (Eigen::Index r = 0; r < rows_ && !(bland && enter_r >= 0); ++r) {
        for (Eigen::Index c = 0; c < cols_; ++c) {
          if (basic_(r, c)) continue;
          const double reduced = cost_(r, c) - u_(r) - v_(c);
          if (reduced < best) {
            best = bland ? -tol : reduced;
            enter_r = r;
            enter_c = c;
            if (bland) break;
          }
        }
      }
      if (enter_r < 0) return finish();
      const double step = pivot_in(enter_r, enter_c);
      degenerate_run = step > 0.0 ? 0 : degenerate_run + 1;
    }
    fail(ErrorCode::InfeasibleMarginals, "transportation simplex did not terminate");
  }

 private:
  struct Cell {
    Eigen::Index r;
    Eigen::Index c;
  };

  void north_west_corner(const Vector& a, const Vector& b) {
    Vector row_left = a;
    Vector col_left = b;
    Eigen::Index r = 0, c = 0;
    // Walks a staircase from (0,0) to (K-1,B-1): always K + B - 1 cells,
    // always a spanning tree, even under degeneracy.
    while (true) {
      const double x = std::max(0.0, std::min(row_left(r), col_left(c)));
      flow_(r, c) = x;
      basic_(r, c) = true;
      row_left(r) -= x;
      col_left(c) -= x;
      if (r == rows_ - 1 && c == cols_ - 1) break;
      if (c == cols_ - 1 || (r < rows_ - 1 && row_left(r) <= col_left(c)))
        ++r;
      else
        ++c;
    }
  }

  std::vector<std::vector<Cell>> adjacency() const {
    std::vector<std::vector<Cell>> adj(static_cast<std::size_t>(rows_ + cols_));
    for (Eigen::Index r = 0; r < rows_; ++r)
      for (Eigen::Index c = 0; c < cols_; ++c)
        if (basic_(r, c)) {
          adj[static_cast<std::size_t>(r)].push_back({r, c});
          adj[static_cast<std::size_t>(rows_ + c)].push_back({r, c});
        }
    return adj;
  }

  void compute_potentials() {
    const auto adj = adjacency();
    u_ = Vector::Constant(rows_, std::numeric_limits<double>::quiet_NaN());
    v_ = Vector::Constant(cols_, std::numeric_limits<double>::quiet_NaN());
    std::vector<bool> seen(adj.size(), false);
    std::queue<std::size_t> frontier;
    u_(0) = 0.0;
    seen[0] = true;
    frontier.push(0);
    while (!frontier.empty()) {
      const auto node = frontier.front();
      frontier.pop();
      for (const Cell& cell : adj[node]) {
        const auto row_node = static_cast<std::size_t>(cell.r);
        const auto col_node = static_cast<std::size_t>(rows_ + cell.c);
        if (!seen[col_node]) {
          v_(cell.c) = cost_(cell.r, cell.c) - u_(cell.r);
          seen[col_node] = true;
          frontier.push(col_node);
        }
        if (!seen[row_node]) {
          u_(cell.r) = cost_(cell.r, cell.c) - v_(cell.c);
          seen[row_node] = true;
          frontier.push(row_node);
        }
      }
    }
  }

  // Returns the flow moved around the cycle.
  double pivot_in(Eigen::Index enter_r, Eigen::Index enter_c) {
    const auto adj = adjacency();
    const auto start = static_cast<std::size_t>(enter_r);
    const auto goal = static_cast<std::size_t>(rows_ + enter_c);
    std::vector<std::optional<Cell>> via(adj.size());
    std::vector<bool> seen(adj.size(), false);
    std::queue<std::size_t> frontier;
    seen[start] = true;
    frontier.push(start);
    while (!frontier.empty() && !seen[goal]) {
      const auto node = frontier.front();
      frontier.pop();
      for (const Cell& cell : adj[node]) {
        const auto row_node = static_cast<std::size_t>(cell.r);
        const auto col_node = static_cast<std::size_t>(rows_ + cell.c);
        const auto next = node == row_node ? col_node : row_node;
        if (seen[next]) continue;
        seen[next] = true;
        via[next] = cell;
        frontier.push(next);
      }
    }
    require(seen[goal], ErrorCode::InfeasibleMarginals, "basis is not a spanning tree");

    // Tree path from the entering column back to the entering row; signs
    // alternate -, +, -, ... starting at the column end.
    std::vector<Cell> path;
    for (auto node = goal; node != start;) {
      const Cell cell = *via[node];
      path.push_back(cell);
      const auto row_node = static_cast<std::size_t>(cell.r);
      node = node == row_node ? static_cast<std::size_t>(rows_ + cell.c) : row_node;
    }
    double step = std::numeric_limits<double>::infinity();
    std::size_t leaving = 0;
    for (std::size_t i = 0; i < path.size(); i += 2) {
      const double x = flow_(path[i].r, path[i].c);
      if (x < step) {
        step = x;
        leaving = i;
      }
    }
    step = std::max(0.0, step);
    for (std::size_t i = 0; i < path.size(); ++i)
      flow_(path[i].r, path[i].c) += (i % 2 == 0 ? -step : step);
    flow_(enter_r, enter_c) = step;
    basic_(enter_r, enter_c) = true;
    basic_(path[leaving].r, path[leaving].c) = false;
    flow_(path[leaving].r, path[leaving].c) = 0.0;
    return step;
  }

  Matrix finish() {
    return flow_.cwiseMax(0.0);
  }

  const Matrix& cost_;
  Eigen::Index rows_;
  Eigen::Index cols_;
  Matrix flow_;
  Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> basic_;
  Vector u_;
  Vector v_;
};

double log_sum_exp(const Vector& x) {
  const double peak = x.maxCoeff();
  if (peak == kNegInf) return kNegInf;
  return peak + std::log((x.array() - peak).exp().sum());
}

}  // namespace

Matrix cost_matrix(const Matrix& taus, const Matrix& zs) {
  require(taus.rows() > 0 && zs.rows() > 0, ErrorCode::EmptyInput, "empty point set");
  require(taus.cols() == zs.cols(), ErrorCode::DimensionMismatch,
          "text and visual embeddings differ in dimension");
  return (1.0 - (taus * zs.transpose()).array()).cwiseMax(0.0).cwiseMin(2.0).matrix();
}

Vector uniform_weights(std::size_t n) {
  require(n > 0, ErrorCode::EmptyInput, "uniform weights over an empty set");
  return Vector::Constant(static_cast<Eigen::Index>(n), 1.0 / static_cast<double>(n));
}

TransportPlan exact_ot(const Matrix& cost, const Vector& a, const Vector& b) {
  check_problem(cost, a, b);
  TransportPlan out;
  out.plan = TransportationSimplex(cost, a, b).solve();
  out.value = out.plan.cwiseProduct(cost).sum();
  return out;
}

SinkhornResult sinkhorn(const Matrix& cost, const Vector& a, const Vector& b,
                        const SinkhornOptions& options) {
  check_problem(cost, a, b);
  require(options.epsilon > 0.0, ErrorCode::InvalidArgument, "sinkhorn epsilon must be positive");
  require(options.max_iter >= 1, ErrorCode::InvalidArgument, "sinkhorn needs >= 1 iteration");
  const double eps = options.epsilon;
  const auto rows = cost.rows();
  const auto cols = cost.cols();
  const Vector log_a = a.array().log().matrix();
  const Vector log_b = b.array().log().matrix();
  Vector f = Vector::Zero(rows);
  Vector g = Vector::Zero(cols);

  auto log_plan = [&](Eigen::Index r, Eigen::Index c) {
    return (f(r) + g(c) - cost(r, c)) / eps;
  };

  SinkhornResult out;
  Vector scratch_row(cols), scratch_col(rows);
  for (int it = 1; it <= options.max_iter; ++it) {
    for (Eigen::Index r = 0; r < rows; ++r) {
      if (a(r) == 0.0) {
        f(r) = kNegInf;
        continue;
      }
      for (Eigen::Index c = 0; c < cols; ++c) scratch_row(c) = (g(c) - cost(r, c)) / eps;
      f(r) = eps * (log_a(r) - log_sum_exp(scratch_row));
    }
    for (Eigen::Index c = 0; c < cols; ++c) {
      if (b(c) == 0.0) {
        g(c) = kNegInf;
        continue;
      }
      for (Eigen::Index r = 0; r < rows; ++r) scratch_col(r) = (f(r) - cost(r, c)) / eps;
      g(c) = eps * (log_b(c) - log_sum_exp(scratch_col));
    }
    // Columns are exact right after the g update; measure the rows.
    double violation = 0.0;
    for (Eigen::Index r = 0; r < rows; ++r) {
      double mass = 0.0;
      for (Eigen::Index c = 0; c < cols; ++c) mass += std::exp(log_plan(r, c));
      violation += std::abs(mass - a(r));
    }
    out.iterations = it;
    out.marginal_violation = violation;
    if (violation <= options.tol) {
      out.converged = true;
      break;
    }
  }

  out.plan.plan.resize(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) out.plan.plan(r, c) = std::exp(log_plan(r, c));
  out.plan.value = out.plan.plan.cwiseProduct(cost).sum();
  return out;
}

WassersteinResult wasserstein_loss(const Matrix& taus, const Matrix& zs, const Vector& pi,
                                   const WassersteinOptions& options) {
  const Matrix cost = cost_matrix(taus, zs);
  const Vector a = pi.size() == 0 ? uniform_weights(static_cast<std::size_t>(taus.rows())) : pi;
  const Vector b = uniform_weights(static_cast<std::size_t>(zs.rows()));
  WassersteinResult out;
  if (static_cast<std::size_t>(cost.size()) <= options.exact_bound) {
    out.plan = exact_ot(cost, a, b);
  } else {
    auto result = sinkhorn(cost, a, b, options.sinkhorn);
    out.plan = std::move(result.plan);
    out.exact = false;
    out.converged = result.converged;
  }
  out.value = out.plan.value;
  return out;
}

Matrix wasserstein_grad_taus(const TransportPlan& plan, const Matrix& zs) {
  require(plan.plan.cols() == zs.rows(), ErrorCode::DimensionMismatch,
          "plan columns must match the batch size");
  return -(plan.plan * zs);
}

double assignment_cost(const Matrix& taus, const Matrix& zs, const Assignment& assignment) {
  require(assignment.sigma.size() == static_cast<std::size_t>(zs.rows()),
          ErrorCode::DimensionMismatch, "one assignment per sample is required");
  const Matrix cost = cost_matrix(taus, zs);
  double total = 0.0;
  for (std::size_t n = 0; n < assignment.sigma.size(); ++n) {
    require(assignment.sigma[n] < static_cast<std::size_t>(taus.rows()),
            ErrorCode::InvalidArgument, "assignment to an unknown class");
    total += cost(static_cast<Eigen::Index>(assignment.sigma[n]), static_cast<Eigen::Index>(n));
  }
  return total / static_cast<double>(zs.rows());
}

namespace {

struct OracleSearch {
  const Matrix& cost;
  std::vector<std::size_t> capacity;
  std::vector<std::size_t> current;
  std::vector<std::size_t> best_sigma;
  double best = std::numeric_limits<double>::infinity();

  void visit(std::size_t n, double partial) {
    if (n == current.size()) {
      if (partial < best) {
        best = partial;
        best_sigma = current;
      }
      return;
    }
    for (std::size_t k = 0; k < capacity.size(); ++k) {
      if (capacity[k] == 0) continue;
      --capacity[k];
      current[n] = k;
      visit(n + 1, partial + cost(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(n)));
      ++capacity[k];
    }
  }
};

}  // namespace

ClusteringResult constrained_clustering_oracle(const Matrix& taus, const Matrix& zs,
                                               const Vector& pi) {
  check_simplex(pi, "pi is not a probability vector");
  require(pi.size() == taus.rows(), ErrorCode::DimensionMismatch, "one pi entry per class");
  const auto batch = static_cast<std::size_t>(zs.rows());
  std::vector<std::size_t> capacity(static_cast<std::size_t>(pi.size()));
  std::size_t assigned = 0;
  for (Eigen::Index k = 0; k < pi.size(); ++k) {
    const double target = static_cast<double>(batch) * pi(k);
    const double rounded = std::round(target);
    require(std::abs(target - rounded) <= 1e-9, ErrorCode::NonIntegralCardinalities,
            "B * pi_k must be integral for every class");
    capacity[static_cast<std::size_t>(k)] = static_cast<std::size_t>(rounded);
    assigned += capacity[static_cast<std::size_t>(k)];
  }
  require(assigned == batch, ErrorCode::NonIntegralCardinalities,
          "cardinalities do not add up to the batch size");

  // Multinomial B! / prod n_k! as a running product.
  double count = 1.0;
  std::size_t placed = 0;
  for (auto n_k : capacity)
    for (std::size_t j = 1; j <= n_k; ++j) count = count * static_cast<double>(++placed) / j;
  require(count <= 1e7, ErrorCode::TooLarge, "too many assignments to enumerate");

  OracleSearch search{cost_matrix(taus, zs), capacity, std::vector<std::size_t>(batch, 0), {}};
  search.visit(0, 0.0);
  return {search.best / static_cast<double>(batch), Assignment{search.best_sigma}};
}

Assignment nearest_assignment(const Matrix& taus, const Matrix& zs) {
  const Matrix cost = cost_matrix(taus, zs);
  Assignment out;
  out.sigma.resize(static_cast<std::size_t>(zs.rows()));
  for (Eigen::Index n = 0; n < cost.cols(); ++n) {
    Eigen::Index best = 0;
    for (Eigen::Index k = 1; k < cost.rows(); ++k)
      if (cost(k, n) < cost(best, n)) best = k;
    out.sigma[static_cast<std::size_t>(n)] = static_cast<std::size_t>(best);
  }
  return out;
}

}  // namespace crpl
