#include "ropf/lp.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace ropf {

void LpProblem::check() const {
  const std::size_t m = a_eq.rows();
  if (cost.size() != n_vars || lower.size() != n_vars || upper.size() != n_vars)
    throw std::invalid_argument("LpProblem: vector length does not match n_vars");
  if (m > 0 && a_eq.cols() != n_vars) throw std::invalid_argument("LpProblem: a_eq has wrong column count");
  if (b_eq.size() != m) throw std::invalid_argument("LpProblem: b_eq length does not match a_eq rows");
  for (std::size_t j = 0; j < n_vars; ++j) {
    if (std::isnan(lower[j]) || std::isnan(upper[j]) || lower[j] > upper[j] || lower[j] == kInf ||
        upper[j] == -kInf)
      throw std::invalid_argument("LpProblem: invalid bounds on variable " + std::to_string(j));
  }
}

std::string_view to_string(LpStatus status) {
  switch (status) {
    case LpStatus::Optimal: return "optimal";
    case LpStatus::Infeasible: return "infeasible";
    case LpStatus::Unbounded: return "unbounded";
    case LpStatus::IterationLimit: return "iteration_limit";
  }
  return "unknown";
}

namespace {

enum class Position { Basic, Lower, Upper, Zero };

// Working state over the n structural columns followed by m artificials.
class Simplex {
 public:
  Simplex(const LpProblem& p, const SimplexOptions& opt)
      : p_(p), opt_(opt), n_(p.n_vars), m_(p.n_rows()), total_(n_ + m_),
        lower_(total_), upper_(total_), cost_(total_, 0.0), x_(total_, 0.0),
        pos_(total_, Position::Lower), sign_(m_, 1.0), head_(m_), binv_(m_, m_),
        alpha_(m_), y_(m_) {
    max_iter_ = opt.max_iterations ? opt.max_iterations : 200 * (n_ + m_) + 1000;
    for (std::size_t j = 0; j < n_; ++j) {
      lower_[j] = p.lower[j];
      upper_[j] = p.upper[j];
      if (std::isfinite(lower_[j])) {
        pos_[j] = Position::Lower;
        x_[j] = lower_[j];
      } else if (std::isfinite(upper_[j])) {
        pos_[j] = Position::Upper;
        x_[j] = upper_[j];
      } else {
        pos_[j] = Position::Zero;
        x_[j] = 0.0;
      }
    }
    for (std::size_t i = 0; i < m_; ++i) {
      double r = p.b_eq[i];
      for (std::size_t j = 0; j < n_; ++j) r -= p.a_eq(i, j) * x_[j];
      sign_[i] = r >= 0.0 ? 1.0 : -1.0;
      const std::size_t a = n_ + i;
      lower_[a] = 0.0;
      upper_[a] = kInf;
      pos_[a] = Position::Basic;
      x_[a] = std::abs(r);
      head_[i] = a;
      binv_(i, i) = sign_[i];
    }
  }

  LpOutcome run() {
    LpOutcome out;
    // Phase 1: minimize the sum of artificials.
    for (std::size_t i = 0; i < m_; ++i) cost_[n_ + i] = 1.0;
    LpStatus s = iterate();
    if (s == LpStatus::IterationLimit) return finish(out, s);
    refactor();
    double worst = 0.0;
    for (std::size_t i = 0; i < m_; ++i) worst = std::max(worst, x_[n_ + i]);
    if (worst > opt_.feasibility_tol) return finish(out, LpStatus::Infeasible);

    drive_out_artificials();
    for (std::size_t i = 0; i < m_; ++i) {
      const std::size_t a = n_ + i;
      cost_[a] = 0.0;
      upper_[a] = 0.0;
      if (pos_[a] != Position::Basic) {
        pos_[a] = Position::Lower;
        x_[a] = 0.0;
      }
    }
    for (std::size_t j = 0; j < n_; ++j) cost_[j] = p_.cost[j];

    // Phase 2.
    s = iterate();
    if (s != LpStatus::Optimal) return finish(out, s);
    refactor();
    return finish(out, LpStatus::Optimal);
  }

 private:
  double column(std::size_t i, std::size_t j) const { return j < n_ ? p_.a_eq(i, j) : (i == j - n_ ? sign_[i] : 0.0); }

  // alpha = B^-1 * a_j
  void ftran(std::size_t j) {
    std::fill(alpha_.begin(), alpha_.end(), 0.0);
    if (j >= n_) {
      const std::size_t r = j - n_;
      for (std::size_t i = 0; i < m_; ++i) alpha_[i] = binv_(i, r) * sign_[r];
      return;
    }
    for (std::size_t k = 0; k < m_; ++k) {
      const double a = p_.a_eq(k, j);
      if (a == 0.0) continue;
      for (std::size_t i = 0; i < m_; ++i) alpha_[i] += binv_(i, k) * a;
    }
  }

  double reduced_cost(std::size_t j) const {
    double d = cost_[j];
    if (j >= n_) return d - y_[j - n_] * sign_[j - n_];
    for (std::size_t i = 0; i < m_; ++i) d -= y_[i] * p_.a_eq(i, j);
    return d;
  }

  void price() {
    std::fill(y_.begin(), y_.end(), 0.0);
    for (std::size_t r = 0; r < m_; ++r) {
      const double c = cost_[head_[r]];
      if (c == 0.0) continue;
      for (std::size_t i = 0; i < m_; ++i) y_[i] += c * binv_(r, i);
    }
  }

  LpStatus iterate() {
    std::size_t since_refactor = 0;
    while (true) {
      if (iterations_ >= max_iter_) return LpStatus::IterationLimit;
      price();

      // Bland: first eligible column by index.
      std::size_t q = total_;
      double dir = 0.0;
      for (std::size_t j = 0; j < total_; ++j) {
        if (pos_[j] == Position::Basic || lower_[j] == upper_[j]) continue;
        const double d = reduced_cost(j);
        const double tol = opt_.optimality_tol * (1.0 + std::abs(cost_[j]));
        if ((pos_[j] == Position::Lower || pos_[j] == Position::Zero) && d < -tol) {
          q = j;
          dir = 1.0;
        } else if ((pos_[j] == Position::Upper || pos_[j] == Position::Zero) && d > tol) {
          q = j;
          dir = -1.0;
        }
        if (q != total_) break;
      }
      if (q == total_) return LpStatus::Optimal;

      ftran(q);

      // Ratio test; ties go to the smallest variable index.
      double t_best = kInf;
      std::size_t leave = m_;
      for (std::size_t i = 0; i < m_; ++i) {
        const double rate = -dir * alpha_[i];
        if (std::abs(alpha_[i]) <= opt_.pivot_tol) continue;
        const std::size_t b = head_[i];
        double t;
        if (rate < 0.0) {
          if (!std::isfinite(lower_[b])) continue;
          t = std::max(0.0, (x_[b] - lower_[b]) / -rate);
        } else {
          if (!std::isfinite(upper_[b])) continue;
          t = std::max(0.0, (upper_[b] - x_[b]) / rate);
        }
        if (leave == m_ || t < t_best - 1e-12) {
          t_best = t;
          leave = i;
        } else if (t <= t_best + 1e-12 && b < head_[leave]) {
          t_best = std::min(t_best, t);
          leave = i;
        }
      }
      const double span = upper_[q] - lower_[q];
      const bool flip = std::isfinite(span) && span <= t_best;
      if (!flip && leave == m_) return LpStatus::Unbounded;
      const double t = flip ? span : t_best;

      ++iterations_;
      x_[q] += dir * t;
      for (std::size_t i = 0; i < m_; ++i) x_[head_[i]] -= dir * t * alpha_[i];

      if (flip) {
        pos_[q] = dir > 0.0 ? Position::Upper : Position::Lower;
        x_[q] = dir > 0.0 ? upper_[q] : lower_[q];
        continue;
      }

      const std::size_t out = head_[leave];
      const bool to_lower = -dir * alpha_[leave] < 0.0;
      pos_[out] = to_lower ? Position::Lower : Position::Upper;
      x_[out] = to_lower ? lower_[out] : upper_[out];
      pivot(leave, q);

      if (++since_refactor >= opt_.refactor_interval) {
        refactor();
        since_refactor = 0;
      }
    }
  }

  // Basis exchange at row r with entering column q; alpha_ must hold B^-1 a_q.
  void pivot(std::size_t r, std::size_t q) {
    const double piv = alpha_[r];
    for (std::size_t c = 0; c < m_; ++c) binv_(r, c) /= piv;
    for (std::size_t i = 0; i < m_; ++i) {
      if (i == r) continue;
      const double f = alpha_[i];
      if (f == 0.0) continue;
      for (std::size_t c = 0; c < m_; ++c) binv_(i, c) -= f * binv_(r, c);
    }
    head_[r] = q;
    pos_[q] = Position::Basic;
  }

  // Rebuilds B^-1 by Gauss-Jordan with partial pivoting and recomputes x_B.
  void refactor() {
    if (m_ == 0) return;
    Matrix b(m_, m_);
    for (std::size_t i = 0; i < m_; ++i)
      for (std::size_t r = 0; r < m_; ++r) b(i, r) = column(i, head_[r]);
    Matrix inv(m_, m_);
    for (std::size_t i = 0; i < m_; ++i) inv(i, i) = 1.0;
    for (std::size_t c = 0; c < m_; ++c) {
      std::size_t best = c;
      for (std::size_t r = c + 1; r < m_; ++r)
        if (std::abs(b(r, c)) > std::abs(b(best, c))) best = r;
      if (b(best, c) == 0.0) return;  // keep the product-form inverse
      if (best != c) {
        for (std::size_t k = 0; k < m_; ++k) {
          std::swap(b(best, k), b(c, k));
          std::swap(inv(best, k), inv(c, k));
        }
      }
      const double d = b(c, c);
      for (std::size_t k = 0; k < m_; ++k) {
        b(c, k) /= d;
        inv(c, k) /= d;
      }
      for (std::size_t r = 0; r < m_; ++r) {
        if (r == c) continue;
        const double f = b(r, c);
        if (f == 0.0) continue;
        for (std::size_t k = 0; k < m_; ++k) {
          b(r, k) -= f * b(c, k);
          inv(r, k) -= f * inv(c, k);
        }
      }
    }
    binv_ = std::move(inv);

    std::vector<double> rhs(p_.b_eq);
    for (std::size_t j = 0; j < total_; ++j) {
      if (pos_[j] == Position::Basic || x_[j] == 0.0) continue;
      for (std::size_t i = 0; i < m_; ++i) rhs[i] -= column(i, j) * x_[j];
    }
    for (std::size_t r = 0; r < m_; ++r) {
      double v = 0.0;
      for (std::size_t i = 0; i < m_; ++i) v += binv_(r, i) * rhs[i];
      x_[head_[r]] = v;
    }
  }

  // After Phase 1 every basic artificial sits at (numerically) zero. Swap each
  // for the first structural column with a usable pivot; rows with none are
  // redundant and keep their artificial, later fixed to [0, 0].
  void drive_out_artificials() {
    for (std::size_t r = 0; r < m_; ++r) {
      if (head_[r] < n_) continue;
      for (std::size_t j = 0; j < n_; ++j) {
        if (pos_[j] == Position::Basic) continue;
        double a = 0.0;
        for (std::size_t i = 0; i < m_; ++i) a += binv_(r, i) * p_.a_eq(i, j);
        if (std::abs(a) <= 1e-7) continue;
        ftran(j);
        const std::size_t out = head_[r];
        pos_[out] = Position::Lower;
        x_[out] = 0.0;
        pivot(r, j);
        refactor();
        break;
      }
    }
  }

  LpOutcome& finish(LpOutcome& out, LpStatus s) {
    out.status = s;
    out.iterations = iterations_;
    if (s == LpStatus::Optimal) {
      out.x.assign(x_.begin(), x_.begin() + static_cast<std::ptrdiff_t>(n_));
      // Snap nonbasic values exactly onto their bounds and clip basic values
      // that drift past a bound by rounding noise.
      for (std::size_t j = 0; j < n_; ++j) out.x[j] = std::clamp(out.x[j], lower_[j], upper_[j]);
      out.objective = 0.0;
      for (std::size_t j = 0; j < n_; ++j) out.objective += p_.cost[j] * out.x[j];
    }
    return out;
  }

  const LpProblem& p_;
  SimplexOptions opt_;
  std::size_t n_, m_, total_;
  std::vector<double> lower_, upper_, cost_, x_;
  std::vector<Position> pos_;
  std::vector<double> sign_;
  std::vector<std::size_t> head_;
  Matrix binv_;
  std::vector<double> alpha_, y_;
  std::size_t iterations_ = 0;
  std::size_t max_iter_ = 0;
};

}  // namespace

LpOutcome solve_lp(const LpProblem& problem, const SimplexOptions& options) {
  problem.check();
  Simplex simplex(problem, options);
  return simplex.run();
}

}  // namespace ropf
