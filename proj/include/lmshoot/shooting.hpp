#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "lmshoot/errors.hpp"
#include "lmshoot/parallel.hpp"
#include "lmshoot/reduction.hpp"
#include "lmshoot/vec.hpp"

namespace lmshoot {

enum class Precision { f32, f64 };

const char* to_string(Precision p);
Precision precision_from_string(const std::string& name);

/// Everything a shooting run needs: kernel width, discretization, mismatch
/// weight, optimizer budget, and the numerical configuration (precision,
/// reduction backend, threading).
struct ShootingConfig {
  double sigma = 1.5;      // Gaussian kernel std (mm)
  int timesteps = 40;      // T; dt = 1/T
  double lambda = 500000;  // mismatch weight
  int max_iter = 400;      // optimizer iteration cap
  Precision precision = Precision::f64;
  ReduceStrategy backend = ReduceStrategy::blocked_tree;
  std::size_t block_size = 256;
  unsigned threads = 0;  // 0 = hardware
  std::uint64_t rng_seed = 0;
  std::size_t memory_budget = std::size_t(4) << 30;

  void validate() const
  {
    if (!(sigma > 0)) throw std::invalid_argument("sigma must be positive");
    if (timesteps < 1) throw std::invalid_argument("timesteps must be >= 1");
    if (lambda < 0) throw std::invalid_argument("lambda must be >= 0");
    if (max_iter < 1) throw std::invalid_argument("max_iter must be >= 1");
    reduce_options().validate();
  }

  ReduceOptions reduce_options() const
  {
    return ReduceOptions{backend, block_size, threads, memory_budget};
  }
};

/// Gaussian kernel on squared distance: exp(-r^2 / (2 sigma^2)), in (0, 1].
/// The landmark kernel matrix K(q) is this scalar per (i, j) block times the
/// d x d identity, so K is only ever handled as an N x N scalar field.
template <class T>
inline T gaussian_kernel(T r_sq, T sigma)
{
  return std::exp(-r_sq / (T(2) * sigma * sigma));
}

// Hot loops evaluate the kernel as exp(r2 * kernel_scale). Shared so every
// module computes the constant with the same rounding.
template <class T>
inline T kernel_scale(double sigma)
{
  T inv_sig2 = T(1) / (T(sigma) * T(sigma));
  return T(-0.5) * inv_sig2;
}

/// Stored forward trajectory: T+1 snapshots of (q_t, p_t) under explicit
/// Euler with dt = 1/T. Snapshot 0 is the input state, snapshot T holds the
/// warped landmarks q(1).
template <class T, int D>
struct Trajectory {
  std::vector<PointArray<T, D>> q;
  std::vector<PointArray<T, D>> p;
  double sigma = 0;
  double dt = 0;

  int steps() const { return static_cast<int>(q.size()) - 1; }
  const PointArray<T, D>& final_q() const { return q.back(); }
};

/// Adjoint of (q, p) propagated backward through the trajectory.
template <class T, int D>
struct AdjointState {
  PointArray<T, D> alpha;
  PointArray<T, D> beta;
};

template <class T, int D>
struct GradientResult {
  double loss = 0;
  double kinetic = 0;   // H(q0, p0)
  double mismatch = 0;  // sum_i |q_i(1) - target_i|^2
  PointArray<T, D> grad;
};

/// The landmark Hamiltonian H(q, p) = 1/2 sum_ij (p_i . p_j) K_ij with
/// K_ij = exp(-|q_i - q_j|^2 / (2 sigma^2)), its derivatives, the Euler flow,
/// and the exact discrete adjoint of that flow. All O(N^2) row sums go
/// through the configured reduction backend; scalar totals (H, loss) always
/// accumulate in 64-bit.
template <class T, int D>
class HamiltonianSystem {
 public:
  using Points = PointArray<T, D>;
  static constexpr int dim = D;

  HamiltonianSystem(double sigma, ReduceOptions reduce)
      : sigma_(sigma), reduce_(reduce)
  {
    if (!(sigma > 0)) throw std::invalid_argument("sigma must be positive");
    inv_sig2_ = T(1) / (T(sigma) * T(sigma));
    k_scale_ = kernel_scale<T>(sigma);
    reduce_.validate();
  }

  double sigma() const { return sigma_; }
  const ReduceOptions& reduce_options() const { return reduce_; }

  /// Kinetic energy; 64-bit row accumulation regardless of T.
  double hamiltonian(const Points& q, const Points& p) const
  {
    require_same("hamiltonian", q, p);
    const std::size_t n = q.size();
    std::vector<double> row(n, 0.0);
    parallel_for(n, reduce_.threads, [&](std::size_t begin, std::size_t end) {
      for (std::size_t i = begin; i < end; ++i) {
        double acc = 0;
        for (std::size_t j = 0; j < n; ++j) {
          T r2 = norm_sq<T, D>(q[i] - q[j]);
          T k = std::exp(r2 * k_scale_);
          acc += double(dot<T, D>(p[i], p[j])) * double(k);
        }
        row[i] = acc;
      }
    });
    double total = 0;
    for (double v : row) total += v;
    return 0.5 * total;
  }

  /// H_q[i] = -(1/sigma^2) sum_j (p_i . p_j) K_ij (q_i - q_j)
  /// H_p[i] = sum_j K_ij p_j
  /// One fused pass per row so each pair evaluates the kernel once.
  void derivatives(const Points& q, const Points& p, Points& hq, Points& hp) const
  {
    require_same("derivatives", q, p);
    const std::size_t n = q.size();
    hq.resize(n);
    hp.resize(n);
    std::vector<std::array<T, 2 * D>> sums(n);
    const Vec<T, D>* qd = q.data();
    const Vec<T, D>* pd = p.data();
    const T neg_inv_sig2 = -inv_sig2_;
    const T k_scale = k_scale_;
    auto term = [qd, pd, neg_inv_sig2, k_scale](std::size_t i, std::size_t j) {
      Vec<T, D> dx = qd[i] - qd[j];
      T r2 = norm_sq<T, D>(dx);
      T k = std::exp(r2 * k_scale);
      T s = dot<T, D>(pd[i], pd[j]) * k * neg_inv_sig2;
      std::array<T, 2 * D> out;
      for (int c = 0; c < D; ++c) {
        out[c] = s * dx[c];
        out[D + c] = k * pd[j][c];
      }
      return out;
    };
    reduce_rows(reduce_, n, n, term, std::span(sums));
    for (std::size_t i = 0; i < n; ++i)
      for (int c = 0; c < D; ++c) {
        hq[i][c] = sums[i][c];
        hp[i][c] = sums[i][D + c];
      }
  }

  /// Explicit Euler flow of dq/dt = H_p, dp/dt = -H_q, storing every
  /// snapshot. Throws DivergedError at the first non-finite state.
  Trajectory<T, D> integrate_forward(const Points& q0, const Points& p0,
                                     int timesteps) const
  {
    require_same("integrate_forward", q0, p0);
    if (timesteps < 1) throw std::invalid_argument("timesteps must be >= 1");
    if (!all_finite<T, D>(q0) || !all_finite<T, D>(p0))
      throw DivergedError(0);

    Trajectory<T, D> traj;
    traj.sigma = sigma_;
    traj.dt = 1.0 / timesteps;
    traj.q.resize(timesteps + 1);
    traj.p.resize(timesteps + 1);
    traj.q[0] = q0;
    traj.p[0] = p0;

    const T dt = T(traj.dt);
    const std::size_t n = q0.size();
    Points hq, hp;
    for (int t = 0; t < timesteps; ++t) {
      derivatives(traj.q[t], traj.p[t], hq, hp);
      auto& qn = traj.q[t + 1];
      auto& pn = traj.p[t + 1];
      qn.resize(n);
      pn.resize(n);
      for (std::size_t i = 0; i < n; ++i)
        for (int c = 0; c < D; ++c) {
          qn[i][c] = traj.q[t][i][c] + dt * hp[i][c];
          pn[i][c] = traj.p[t][i][c] - dt * hq[i][c];
        }
      if (!all_finite<T, D>(qn) || !all_finite<T, D>(pn))
        throw DivergedError(t + 1);
    }
    return traj;
  }

  /// E = H(q(0), p(0)) + lambda sum_i |q_i(1) - target_i|^2, both pieces
  /// accumulated in 64-bit.
  double loss(const Trajectory<T, D>& traj, const Points& target, double lambda) const
  {
    require_same("loss", traj.final_q(), target);
    return hamiltonian(traj.q[0], traj.p[0]) +
           lambda * mismatch_sq(traj.final_q(), target);
  }

  /// Transpose-Jacobian action of the flow field F(q, p) = (H_p, -H_q) on
  /// (alpha, beta). With r_ij = q_i - q_j, c_ij = p_i . p_j:
  ///   d_alpha[i] = (1/s2) sum_j K_ij (q_j - q_i) [(p_i.a_j) + (p_j.a_i)]
  ///              + (1/s2) sum_j c_ij K_ij [ (r_ij.(b_j - b_i))/s2 r_ij - (b_j - b_i) ]
  ///   d_beta[i]  = sum_j K_ij a_j
  ///              + (1/s2) sum_j K_ij ((q_j - q_i).(b_j - b_i)) p_j
  /// One backward Euler-adjoint step is then
  ///   (alpha, beta) += dt * (d_alpha, d_beta).
  void adjoint_step(const Points& q, const Points& p, const AdjointState<T, D>& adj,
                    Points& d_alpha, Points& d_beta) const
  {
    require_same("adjoint_step", q, p);
    require_same("adjoint_step", q, adj.alpha);
    require_same("adjoint_step", q, adj.beta);
    const std::size_t n = q.size();
    d_alpha.resize(n);
    d_beta.resize(n);
    std::vector<std::array<T, 2 * D>> sums(n);
    const Vec<T, D>* qd = q.data();
    const Vec<T, D>* pd = p.data();
    const Vec<T, D>* ad = adj.alpha.data();
    const Vec<T, D>* bd = adj.beta.data();
    const T inv_sig2 = inv_sig2_;
    const T k_scale = k_scale_;
    auto term = [qd, pd, ad, bd, inv_sig2, k_scale](std::size_t i, std::size_t j) {
      Vec<T, D> dx = qd[i] - qd[j];  // r_ij
      T r2 = norm_sq<T, D>(dx);
      T k = std::exp(r2 * k_scale);
      T c = dot<T, D>(pd[i], pd[j]);
      T pa = dot<T, D>(pd[i], ad[j]) + dot<T, D>(pd[j], ad[i]);
      Vec<T, D> db = bd[j] - bd[i];
      T rb = dot<T, D>(dx, db);  // r_ij . (b_j - b_i)
      T kis = k * inv_sig2;
      std::array<T, 2 * D> out;
      for (int cc = 0; cc < D; ++cc) {
        out[cc] = kis * (-dx[cc] * pa + c * (rb * inv_sig2 * dx[cc] - db[cc]));
        out[D + cc] = k * ad[j][cc] - kis * rb * pd[j][cc];
      }
      return out;
    };
    reduce_rows(reduce_, n, n, term, std::span(sums));
    for (std::size_t i = 0; i < n; ++i)
      for (int c = 0; c < D; ++c) {
        d_alpha[i][c] = sums[i][c];
        d_beta[i][c] = sums[i][D + c];
      }
  }

  /// Shoots forward, seeds the adjoint at t = T with
  /// alpha_T = 2 lambda (q(1) - target), beta_T = 0, walks the exact
  /// discrete adjoint back to t = 0, and returns
  /// grad = beta_0 + H_p(q0, p0) — the exact gradient of the discrete loss.
  GradientResult<T, D> compute_gradient(const Points& q0, const Points& p0,
                                        const Points& target, double lambda,
                                        int timesteps) const
  {
    require_same("compute_gradient", q0, target);
    Trajectory<T, D> traj = integrate_forward(q0, p0, timesteps);
    const std::size_t n = q0.size();

    GradientResult<T, D> result;
    result.kinetic = hamiltonian(q0, p0);
    result.mismatch = mismatch_sq(traj.final_q(), target);
    result.loss = result.kinetic + lambda * result.mismatch;

    AdjointState<T, D> adj;
    adj.alpha.resize(n);
    adj.beta.assign(n, Vec<T, D>{});
    const T two_lambda = T(2) * T(lambda);
    for (std::size_t i = 0; i < n; ++i)
      for (int c = 0; c < D; ++c)
        adj.alpha[i][c] = two_lambda * (traj.final_q()[i][c] - target[i][c]);

    const T dt = T(traj.dt);
    Points d_alpha, d_beta;
    for (int t = timesteps - 1; t >= 0; --t) {
      adjoint_step(traj.q[t], traj.p[t], adj, d_alpha, d_beta);
      for (std::size_t i = 0; i < n; ++i)
        for (int c = 0; c < D; ++c) {
          adj.alpha[i][c] += dt * d_alpha[i][c];
          adj.beta[i][c] += dt * d_beta[i][c];
        }
    }

    Points hq, hp;
    derivatives(q0, p0, hq, hp);
    result.grad.resize(n);
    for (std::size_t i = 0; i < n; ++i)
      for (int c = 0; c < D; ++c) result.grad[i][c] = adj.beta[i][c] + hp[i][c];
    return result;
  }

  /// 64-bit sum of squared pointwise distances.
  double mismatch_sq(const Points& a, const Points& b) const
  {
    require_same("mismatch_sq", a, b);
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      for (int c = 0; c < D; ++c) {
        double d = double(a[i][c]) - double(b[i][c]);
        s += d * d;
      }
    }
    return s;
  }

 private:
  static void require_same(const char* op, const Points& a, const Points& b)
  {
    if (a.size() != b.size())
      throw ShapeError(std::string(op) + ": mismatched landmark counts (" +
                       std::to_string(a.size()) + " vs " + std::to_string(b.size()) +
                       ")");
  }

  double sigma_;
  T inv_sig2_;
  T k_scale_;
  ReduceOptions reduce_;
};

/// Calls fn(type_identity<T>, integral_constant<int, D>) for the runtime
/// (precision, dim) pair. fn must return the same type for every combination.
template <class Fn>
decltype(auto) dispatch_precision_dim(Precision precision, int dim, Fn&& fn)
{
  auto with_float = [&](auto tfloat) -> decltype(auto) {
    switch (dim) {
      case 2:
        return fn(tfloat, std::integral_constant<int, 2>{});
      case 3:
        return fn(tfloat, std::integral_constant<int, 3>{});
      default:
        throw ShapeError("dimension must be 2 or 3");
    }
  };
  switch (precision) {
    case Precision::f32:
      return with_float(std::type_identity<float>{});
    case Precision::f64:
      return with_float(std::type_identity<double>{});
  }
  throw std::invalid_argument("bad precision");
}

}  // namespace lmshoot
