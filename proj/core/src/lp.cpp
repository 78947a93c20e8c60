#include "gridclear/lp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "gridclear/errors.hpp"

namespace gridclear::lp {

std::string to_string(Status status) {
  switch (status) {
    case Status::Optimal: return "optimal";
    case Status::Infeasible: return "infeasible";
    case Status::IterationLimit: return "iteration_limit";
  }
  return "unknown";
}

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class Origin : std::uint8_t { RowUpper, RowLower, BoundUpper, BoundLower };

// One inequality gᵀx <= h over the free variables, scaled to max |g| = 1.
struct Inequality {
  Origin origin;
  int index;     // problem row or variable
  double scale;  // multiplier of the unscaled row
};

class DualSimplex {
 public:
  DualSimplex(const Problem& p, const Options& opt) : p_(p), opt_(opt) {}

  Result run();

 private:
  void build();
  bool refactor();
  void recompute_primal() { x_free_.noalias() = binv_.transpose() * basic_rhs(); }
  Eigen::VectorXd basic_rhs() const {
    Eigen::VectorXd hb(nf_);
    for (int i = 0; i < nf_; ++i) hb[i] = h_[basis_[static_cast<std::size_t>(i)]];
    return hb;
  }
  Result finish(Status status);

  const Problem& p_;
  const Options& opt_;
  int n_ = 0;
  int nf_ = 0;
  std::vector<int> free_;  // free variable -> problem variable
  Eigen::VectorXd x_;      // full primal point
  Eigen::VectorXd c_free_;
  RowMatrix g_;
  Eigen::VectorXd h_;
  std::vector<Inequality> ineq_;
  std::vector<int> basis_;
  std::vector<int> position_;  // inequality -> basis slot or -1
  Eigen::MatrixXd binv_;
  Eigen::VectorXd y_basic_;
  Eigen::VectorXd x_free_;
  std::vector<int> certificate_;
  int iterations_ = 0;
  bool trivially_infeasible_ = false;
};

void DualSimplex::build() {
  n_ = static_cast<int>(p_.cost.size());
  const int m = static_cast<int>(p_.rows.rows());
  x_ = Eigen::VectorXd::Zero(n_);
  for (int j = 0; j < n_; ++j) {
    if (p_.lower[j] < p_.upper[j])
      free_.push_back(j);
    else
      x_[j] = p_.lower[j];
  }
  nf_ = static_cast<int>(free_.size());
  c_free_.resize(nf_);
  for (int k = 0; k < nf_; ++k) c_free_[k] = p_.cost[free_[static_cast<std::size_t>(k)]];

  Eigen::MatrixXd a_free(m, nf_);
  for (int k = 0; k < nf_; ++k) a_free.col(k) = p_.rows.col(free_[static_cast<std::size_t>(k)]);
  const Eigen::VectorXd fixed_part = p_.rows * x_;  // free entries of x_ are still zero

  std::vector<Eigen::VectorXd> rows;
  std::vector<double> rhs;
  auto add = [&](Eigen::VectorXd g, double h, Origin origin, int index) {
    const double norm = g.cwiseAbs().maxCoeff();
    const double s = 1.0 / norm;
    rows.push_back(g * s);
    rhs.push_back(h * s);
    ineq_.push_back({origin, index, s});
  };
  for (int k = 0; k < nf_; ++k) {
    const int j = free_[static_cast<std::size_t>(k)];
    add(Eigen::VectorXd::Unit(nf_, k), p_.upper[j], Origin::BoundUpper, j);
    add(-Eigen::VectorXd::Unit(nf_, k), -p_.lower[j], Origin::BoundLower, j);
  }
  for (int i = 0; i < m; ++i) {
    const Eigen::VectorXd g = nf_ > 0 ? Eigen::VectorXd(a_free.row(i).transpose()) : Eigen::VectorXd();
    const double norm = nf_ > 0 ? g.cwiseAbs().maxCoeff() : 0.0;
    const double lo = p_.row_lower[i] - fixed_part[i];
    const double hi = p_.row_upper[i] - fixed_part[i];
    if (norm <= 1e-13) {
      // Constant row: it either always holds or makes the problem infeasible.
      const double tol = opt_.feasibility_tol * std::max(1.0, std::abs(fixed_part[i]));
      if (lo > tol || hi < -tol) {
        trivially_infeasible_ = true;
        certificate_.push_back(i);
      }
      continue;
    }
    if (std::isfinite(hi)) add(g, hi, Origin::RowUpper, i);
    if (std::isfinite(lo)) add(-g, -lo, Origin::RowLower, i);
  }
  g_.resize(static_cast<Eigen::Index>(rows.size()), nf_);
  h_.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t k = 0; k < rows.size(); ++k) {
    g_.row(static_cast<Eigen::Index>(k)) = rows[k].transpose();
    h_[static_cast<Eigen::Index>(k)] = rhs[k];
  }
}

bool DualSimplex::refactor() {
  Eigen::MatrixXd b(nf_, nf_);
  for (int i = 0; i < nf_; ++i) b.col(i) = g_.row(basis_[static_cast<std::size_t>(i)]).transpose();
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(b);
  binv_ = lu.inverse();
  if (!binv_.allFinite()) return false;
  y_basic_.noalias() = binv_ * (-c_free_);
  recompute_primal();
  return true;
}

Result DualSimplex::run() {
  build();
  if (trivially_infeasible_) return finish(Status::Infeasible);

  const int k_total = static_cast<int>(h_.size());
  position_.assign(static_cast<std::size_t>(k_total), -1);
  basis_.resize(static_cast<std::size_t>(nf_));
  // Start at the box vertex favoured by the cost; its multipliers are |c|.
  for (int k = 0; k < nf_; ++k) {
    const int row = c_free_[k] <= 0.0 ? 2 * k : 2 * k + 1;
    basis_[static_cast<std::size_t>(k)] = row;
    position_[static_cast<std::size_t>(row)] = k;
  }
  if (nf_ > 0 && !refactor()) throw InternalError("initial basis is singular");

  const double y_tol = 1e-11 * std::max(1.0, c_free_.size() > 0 ? c_free_.cwiseAbs().maxCoeff() : 0.0);
  const int limit = opt_.max_iterations > 0 ? opt_.max_iterations : 50 * (k_total + nf_) + 1000;
  double best_objective = -std::numeric_limits<double>::infinity();
  int stalled = 0;
  bool bland = false;
  Eigen::VectorXd slack(k_total);
  Eigen::VectorXd d(nf_);

  for (;;) {
    if (nf_ > 0) slack.noalias() = h_ - g_ * x_free_;
    else slack = h_;

    int entering = -1;
    double most_negative = -opt_.feasibility_tol;
    for (int k = 0; k < k_total; ++k) {
      if (position_[static_cast<std::size_t>(k)] >= 0) continue;
      if (slack[k] < most_negative) {
        entering = k;
        if (bland) break;
        most_negative = slack[k];
      }
    }
    if (entering < 0) return finish(Status::Optimal);
    if (iterations_ >= limit) return finish(Status::IterationLimit);
    ++iterations_;

    d.noalias() = binv_ * g_.row(entering).transpose();

    // Harris two-pass ratio test on the basic multipliers.
    double bound = std::numeric_limits<double>::infinity();
    for (int i = 0; i < nf_; ++i)
      if (d[i] > opt_.pivot_tol) bound = std::min(bound, (y_basic_[i] + y_tol) / d[i]);
    if (!std::isfinite(bound)) {
      // Unbounded dual ray: the entering row plus the rows it leans on
      // certify that no point satisfies them all.
      certificate_.push_back(entering);
      for (int i = 0; i < nf_; ++i)
        if (d[i] < -opt_.pivot_tol) certificate_.push_back(basis_[static_cast<std::size_t>(i)]);
      return finish(Status::Infeasible);
    }
    int leave = -1;
    for (int i = 0; i < nf_; ++i) {
      if (d[i] <= opt_.pivot_tol || y_basic_[i] / d[i] > bound) continue;
      if (leave < 0) { leave = i; continue; }
      if (bland) {
        const double ri = y_basic_[i] / d[i];
        const double rl = y_basic_[leave] / d[leave];
        if (ri < rl - y_tol || (ri <= rl + y_tol && basis_[static_cast<std::size_t>(i)] < basis_[static_cast<std::size_t>(leave)]))
          leave = i;
      } else if (d[i] > d[leave]) {
        leave = i;
      }
    }
    const double theta = std::max(0.0, y_basic_[leave] / d[leave]);

    y_basic_ -= theta * d;
    y_basic_[leave] = theta;
    position_[static_cast<std::size_t>(basis_[static_cast<std::size_t>(leave)])] = -1;
    basis_[static_cast<std::size_t>(leave)] = entering;
    position_[static_cast<std::size_t>(entering)] = leave;

    if (iterations_ % opt_.refactor_interval == 0) {
      if (!refactor()) throw InternalError("basis became singular during refactorisation");
    } else {
      const double pivot = d[leave];
      binv_.row(leave) /= pivot;
      for (int i = 0; i < nf_; ++i)
        if (i != leave && d[i] != 0.0) binv_.row(i) -= d[i] * binv_.row(leave);
      recompute_primal();
    }

    // Anti-cycling: fall back to smallest-index rules while the objective stalls.
    const double objective = c_free_.dot(x_free_);
    if (objective > best_objective + 1e-12 * std::max(1.0, std::abs(objective))) {
      best_objective = objective;
      stalled = 0;
      bland = false;
    } else if (++stalled > 50) {
      bland = true;
    }
  }
}

Result DualSimplex::finish(Status status) {
  const int m = static_cast<int>(p_.rows.rows());
  Result r;
  r.status = status;
  r.iterations = iterations_;
  r.row_dual_upper = Eigen::VectorXd::Zero(m);
  r.row_dual_lower = Eigen::VectorXd::Zero(m);
  r.bound_dual_upper = Eigen::VectorXd::Zero(n_);
  r.bound_dual_lower = Eigen::VectorXd::Zero(n_);
  for (int k = 0; k < nf_; ++k) x_[free_[static_cast<std::size_t>(k)]] = x_free_.size() ? x_free_[k] : 0.0;
  r.x = x_;
  r.objective = p_.cost.dot(x_);

  if (status == Status::Infeasible) {
    for (int k : certificate_) {
      if (trivially_infeasible_) {
        r.infeasible_rows.push_back(k);
        continue;
      }
      const Inequality& e = ineq_[static_cast<std::size_t>(k)];
      if (e.origin == Origin::RowUpper || e.origin == Origin::RowLower)
        r.infeasible_rows.push_back(e.index);
      else
        r.bounds_in_certificate = true;
    }
    std::sort(r.infeasible_rows.begin(), r.infeasible_rows.end());
    r.infeasible_rows.erase(std::unique(r.infeasible_rows.begin(), r.infeasible_rows.end()),
                            r.infeasible_rows.end());
    return r;
  }
  if (status != Status::Optimal) return r;

  for (int i = 0; i < nf_; ++i) {
    const Inequality& e = ineq_[static_cast<std::size_t>(basis_[static_cast<std::size_t>(i)])];
    const double y = std::max(0.0, y_basic_[i]) * e.scale;
    switch (e.origin) {
      case Origin::RowUpper: r.row_dual_upper[e.index] += y; break;
      case Origin::RowLower: r.row_dual_lower[e.index] += y; break;
      case Origin::BoundUpper: r.bound_dual_upper[e.index] += y; break;
      case Origin::BoundLower: r.bound_dual_lower[e.index] += y; break;
    }
  }
  // Fixed variables absorb their reduced cost in a bound multiplier.
  const Eigen::VectorXd reduced = p_.cost + p_.rows.transpose() * (r.row_dual_upper - r.row_dual_lower);
  for (int j = 0; j < n_; ++j) {
    if (p_.lower[j] < p_.upper[j]) continue;
    if (reduced[j] < 0.0) r.bound_dual_upper[j] = -reduced[j];
    else r.bound_dual_lower[j] = reduced[j];
  }
  return r;
}

}  // namespace

Result solve(const Problem& problem, const Options& options) {
  const Eigen::Index n = problem.cost.size();
  const Eigen::Index m = problem.rows.rows();
  if (problem.lower.size() != n || problem.upper.size() != n || (m > 0 && problem.rows.cols() != n) ||
      problem.row_lower.size() != m || problem.row_upper.size() != m)
    throw ShapeError("inconsistent linear program dimensions");
  for (Eigen::Index j = 0; j < n; ++j) {
    if (!std::isfinite(problem.lower[j]) || !std::isfinite(problem.upper[j]))
      throw DomainError("variable bounds must be finite");
    if (problem.lower[j] > problem.upper[j]) throw DomainError("variable lower bound exceeds upper bound");
  }
  if (m == 0 && problem.rows.cols() != n) {
    Problem shaped = problem;
    shaped.rows.resize(0, n);
    DualSimplex simplex(shaped, options);
    return simplex.run();
  }
  DualSimplex simplex(problem, options);
  return simplex.run();
}

}  // namespace gridclear::lp
