#include "scate/linear_system.hpp"

#include <algorithm>
#include <limits>
#include <set>

#include <cmath>
#include <memory>

#include <Eigen/SparseCholesky>
#include <Eigen/SparseQR>

namespace scate {

std::vector<Key> compute_ordering(const FactorGraph& graph, OrderingMethod method) {
  std::vector<Key> keys(graph.variables().begin(), graph.variables().end());
  if (method == OrderingMethod::Natural || keys.size() <= 1) return keys;

  const int n = static_cast<int>(keys.size());
  std::map<Key, int> index;
  for (int i = 0; i < n; ++i) index[keys[i]] = i;

  std::vector<int> weight(n);
  for (int i = 0; i < n; ++i) {
    switch (keys[i].kind) {
      case VarKind::State: weight[i] = kStateDim; break;
      case VarKind::Control: weight[i] = kControlDim; break;
      case VarKind::Obstacle: weight[i] = kObstacleDim; break;
    }
  }

  std::vector<std::set<int>> adj(n);
  for (const auto& [id, f] : graph.factors()) {
    const auto& fk = f->keys();
    for (std::size_t a = 0; a < fk.size(); ++a) {
      for (std::size_t b = a + 1; b < fk.size(); ++b) {
        const int ia = index.at(fk[a]);
        const int ib = index.at(fk[b]);
        if (ia == ib) continue;
        adj[ia].insert(ib);
        adj[ib].insert(ia);
      }
    }
  }

  auto degree = [&](int v) {
    int d = 0;
    for (int w : adj[v]) d += weight[w];
    return d;
  };

  std::vector<bool> done(n, false);
  std::vector<Key> order;
  order.reserve(n);
  for (int step = 0; step < n; ++step) {
    int best = -1;
    int best_deg = std::numeric_limits<int>::max();
    for (int v = 0; v < n; ++v) {
      if (done[v]) continue;
      const int d = degree(v);
      if (d < best_deg) {  // strict: lowest key wins ties
        best = v;
        best_deg = d;
      }
    }
    // Eliminating `best` turns its neighbourhood into a clique.
    const std::vector<int> nbrs(adj[best].begin(), adj[best].end());
    for (int a : nbrs) {
      adj[a].erase(best);
      for (int b : nbrs) {
        if (a != b) adj[a].insert(b);
      }
    }
    adj[best].clear();
    done[best] = true;
    order.push_back(keys[best]);
  }
  return order;
}

LinearSystem linearize(const FactorGraph& graph, const Values& lin_point) {
  return linearize(graph, lin_point, compute_ordering(graph));
}

LinearSystem linearize(const FactorGraph& graph, const Values& lin_point,
                       const std::vector<Key>& ordering) {
  LinearSystem sys;
  sys.ordering = ordering;
  if (ordering.size() != graph.variables().size()) {
    throw std::invalid_argument("ordering does not cover the graph variables");
  }
  int cols = 0;
  for (const Key& key : ordering) {
    if (!graph.variables().count(key)) {
      throw std::invalid_argument("ordering names unknown variable " + to_string(key));
    }
    const int d = static_cast<int>(lin_point.at(key).size());
    sys.slots[key] = {cols, d};
    cols += d;
  }

  int rows = 0;
  for (const auto& [id, f] : graph.factors()) {
    sys.rows.push_back({id, rows, f->dim()});
    rows += f->dim();
  }

  std::vector<Eigen::Triplet<double>> triplets;
  sys.residual.resize(rows);
  std::vector<Eigen::MatrixXd> jac;
  std::size_t r = 0;
  for (const auto& [id, f] : graph.factors()) {
    const int row0 = sys.rows[r++].offset;
    jac.clear();
    const Eigen::VectorXd res = f->evaluate(lin_point, &jac);
    const auto& W = f->noise().whitener();
    const Eigen::VectorXd wres = W * res;
    if (!wres.allFinite()) {
      throw NonFiniteError(id, "non-finite residual in factor " + std::to_string(id.value) +
                                   " (" + std::string(to_string(f->tag())) + ")");
    }
    sys.residual.segment(row0, f->dim()) = wres;
    for (std::size_t j = 0; j < f->keys().size(); ++j) {
      const Eigen::MatrixXd wj = W * jac[j];
      if (!wj.allFinite()) {
        throw NonFiniteError(id, "non-finite Jacobian in factor " + std::to_string(id.value) +
                                     " (" + std::string(to_string(f->tag())) + ")");
      }
      const VariableSlot& slot = sys.slots.at(f->keys()[j]);
      if (wj.cols() != slot.dim || wj.rows() != f->dim()) {
        throw std::logic_error("Jacobian shape mismatch for " + to_string(f->keys()[j]));
      }
      for (int c = 0; c < wj.cols(); ++c) {
        for (int rr = 0; rr < wj.rows(); ++rr) {
          if (wj(rr, c) != 0.0) triplets.emplace_back(row0 + rr, slot.offset + c, wj(rr, c));
        }
      }
    }
  }
  sys.jacobian.resize(rows, cols);
  sys.jacobian.setFromTriplets(triplets.begin(), triplets.end());
  return sys;
}

namespace {

using SpMat = Eigen::SparseMatrix<double>;

Eigen::VectorXd damping_diagonal(const LinearSystem& system, double lambda, DampingMode mode) {
  const int n = system.num_columns();
  if (mode == DampingMode::Isotropic) return Eigen::VectorXd::Constant(n, lambda);
  const Eigen::VectorXd col_sq = system.jacobian.cwiseAbs2().transpose() * Eigen::VectorXd::Ones(system.num_rows());
  return lambda * col_sq.cwiseMax(1e-6);
}

// Solves min ||J e + b||^2 + ||sqrt(D) e||^2 for several right-hand sides b
// against one factorization.
class DampedSolver {
 public:
  virtual ~DampedSolver() = default;
  virtual Eigen::VectorXd solve(const Eigen::VectorXd& b) = 0;
};

class QrSolver final : public DampedSolver {
 public:
  QrSolver(const SpMat& jacobian, const Eigen::VectorXd& damping) : m_(jacobian.rows()) {
    const int n = static_cast<int>(jacobian.cols());
    std::vector<Eigen::Triplet<double>> t;
    t.reserve(jacobian.nonZeros() + n);
    for (int c = 0; c < jacobian.outerSize(); ++c) {
      for (SpMat::InnerIterator it(jacobian, c); it; ++it) t.emplace_back(it.row(), c, it.value());
    }
    for (int c = 0; c < n; ++c) {
      if (damping[c] > 0.0) t.emplace_back(m_ + c, c, std::sqrt(damping[c]));
    }
    SpMat a(m_ + n, n);
    a.setFromTriplets(t.begin(), t.end());
    a.makeCompressed();
    qr_.compute(a);
    if (qr_.info() != Eigen::Success || qr_.rank() < n) {
      throw SingularSystemError("damped system is rank deficient");
    }
  }
  Eigen::VectorXd solve(const Eigen::VectorXd& b) override {
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(qr_.rows());
    rhs.head(m_) = -b;
    return qr_.solve(rhs);
  }

 private:
  Eigen::Index m_;
  Eigen::SparseQR<SpMat, Eigen::COLAMDOrdering<int>> qr_;
};

class CholeskySolver final : public DampedSolver {
 public:
  CholeskySolver(const SpMat& jacobian, const Eigen::VectorXd& damping) : jacobian_(jacobian) {
    SpMat hessian = SpMat(jacobian.transpose()) * jacobian;
    const int n = static_cast<int>(jacobian.cols());
    SpMat d(n, n);
    d.reserve(Eigen::VectorXi::Constant(n, 1));
    for (int i = 0; i < n; ++i) d.insert(i, i) = damping[i];
    hessian += d;
    chol_.compute(hessian);
    if (chol_.info() != Eigen::Success) {
      throw SingularSystemError("normal equations not positive definite");
    }
  }
  Eigen::VectorXd solve(const Eigen::VectorXd& b) override {
    return chol_.solve(-(jacobian_.transpose() * b));
  }

 private:
  const SpMat& jacobian_;
  Eigen::SimplicialLLT<SpMat, Eigen::Lower, Eigen::NaturalOrdering<int>> chol_;
};

// Row-space form: (J^T J + L)^-1 J^T = L^-1 J^T (J L^-1 J^T + I)^-1. Rounding
// in the poorly conditioned directions of the m x m factor lies in the left
// null space of J and is annihilated by the final product with J^T.
class DualSolver final : public DampedSolver {
 public:
  DualSolver(const SpMat& jacobian, const Eigen::VectorXd& damping)
      : jacobian_(jacobian), inv_damping_(damping.cwiseInverse()) {
    const SpMat scaled = jacobian * inv_damping_.asDiagonal();
    SpMat gram = scaled * SpMat(jacobian.transpose());
    SpMat eye(gram.rows(), gram.cols());
    eye.setIdentity();
    gram += eye;
    chol_.compute(gram);
    if (chol_.info() != Eigen::Success) {
      throw SingularSystemError("row-space system not positive definite");
    }
  }
  Eigen::VectorXd solve(const Eigen::VectorXd& b) override {
    const Eigen::VectorXd y = chol_.solve(-b);
    return inv_damping_.cwiseProduct(jacobian_.transpose() * y);
  }

 private:
  const SpMat& jacobian_;
  Eigen::VectorXd inv_damping_;
  Eigen::SimplicialLLT<SpMat, Eigen::Lower, Eigen::AMDOrdering<int>> chol_;
};

}  // namespace

Eigen::VectorXd solve_linear_flat(const LinearSystem& system, double lambda, const SolveOptions& options) {
  const int n = system.num_columns();
  if (n == 0) return Eigen::VectorXd();
  const Eigen::VectorXd damping =
      lambda > 0.0 ? damping_diagonal(system, lambda, options.damping) : Eigen::VectorXd::Zero(n);

  std::unique_ptr<DampedSolver> solver;
  if (options.solver == LinearSolver::RowSpace && lambda > 0.0) {
    solver = std::make_unique<DualSolver>(system.jacobian, damping);
  } else if (options.solver == LinearSolver::QR) {
    solver = std::make_unique<QrSolver>(system.jacobian, damping);
  } else {
    solver = std::make_unique<CholeskySolver>(system.jacobian, damping);
  }
  Eigen::VectorXd delta = solver->solve(system.residual);
  // Iterated Tikhonov: each pass shrinks the damping bias along singular
  // direction k by lambda / (s_k^2 + lambda) and stays in the row space of J.
  for (int pass = 0; pass < options.refine && lambda > 0.0; ++pass) {
    delta += solver->solve(system.residual + system.jacobian * delta);
  }
  if (!delta.allFinite()) throw SingularSystemError("linear solve failed");
  return delta;
}

Increment unflatten(const LinearSystem& system, const Eigen::VectorXd& delta) {
  Increment out;
  for (const auto& [key, slot] : system.slots) {
    out.emplace(key, delta.segment(slot.offset, slot.dim));
  }
  return out;
}

Increment solve_linear(const LinearSystem& system, double lambda, const SolveOptions& options) {
  return unflatten(system, solve_linear_flat(system, lambda, options));
}

}  // namespace scate
