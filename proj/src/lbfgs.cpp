#include "lmshoot/lbfgs.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

#include "lmshoot/errors.hpp"

namespace lmshoot {

const char* to_string(StopReason r)
{
  switch (r) {
    case StopReason::gradient_tolerance: return "gradient-tolerance";
    case StopReason::max_iterations: return "max-iterations";
    case StopReason::line_search_failure: return "line-search-failure";
  }
  return "?";
}

namespace {

double dot(std::span<const double> a, std::span<const double> b)
{
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double inf_norm(std::span<const double> v)
{
  double m = 0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

double l2_norm(std::span<const double> v) { return std::sqrt(dot(v, v)); }

bool finite_all(std::span<const double> v)
{
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

struct SearchState {
  const Objective& objective;
  std::span<const double> x;
  std::span<const double> d;
  double f0;
  double df0;  // g0 . d, negative
  double c1;
  double c2;
  int max_evals;
  int evals = 0;

  std::vector<double> xt;
  std::vector<double> gt;

  // Best point satisfying sufficient decrease, kept for failure reporting.
  double best_step = 0;
  double best_f = 0;
  std::vector<double> best_g;

  // phi(a) = f(x + a d); also fills gt.
  double phi(double a)
  {
    for (std::size_t i = 0; i < x.size(); ++i) xt[i] = x[i] + a * d[i];
    ++evals;
    double f = objective(xt, gt);
    if (std::isfinite(f) && f <= f0 + c1 * a * df0 && (best_step == 0 || f < best_f)) {
      best_step = a;
      best_f = f;
      best_g = gt;
    }
    return f;
  }

  LineSearchResult failure()
  {
    LineSearchResult r;
    r.evals = evals;
    r.success = false;
    r.step = best_step;
    r.loss = best_f;
    r.grad = std::move(best_g);
    return r;
  }

  LineSearchResult accept(double a, double f)
  {
    LineSearchResult r;
    r.evals = evals;
    r.success = true;
    r.step = a;
    r.loss = f;
    r.grad = gt;
    return r;
  }

  // Nocedal-Wright zoom: maintains a bracket [lo, hi] (by role, not order)
  // where lo has the lowest sufficient-decrease value seen.
  LineSearchResult zoom(double lo, double f_lo, double df_lo, double hi, double f_hi)
  {
    while (evals < max_evals) {
      double a;
      // Quadratic interpolation from (lo, f_lo, df_lo) and f_hi, safeguarded
      // into the middle 80% of the bracket; bisection otherwise.
      double span = hi - lo;
      double denom = f_hi - f_lo - df_lo * span;
      if (denom != 0 && std::isfinite(denom) && std::isfinite(f_hi)) {
        a = lo - 0.5 * df_lo * span * span / denom;
        double u = (a - lo) / span;
        if (!(u > 0.1 && u < 0.9)) a = lo + 0.5 * span;
      } else {
        a = lo + 0.5 * span;
      }

      double f = phi(a);
      double df = dot(gt, d);
      if (!std::isfinite(f) || f > f0 + c1 * a * df0 || f >= f_lo) {
        hi = a;
        f_hi = f;
      } else {
        if (std::abs(df) <= -c2 * df0) return accept(a, f);
        if (df * (hi - lo) >= 0) {
          hi = lo;
          f_hi = f_lo;
        }
        lo = a;
        f_lo = f;
        df_lo = df;
      }
      if (std::abs(hi - lo) < 1e-16 * std::max(1.0, std::abs(lo))) break;
    }
    return failure();
  }

  LineSearchResult run(double a_init)
  {
    double a_prev = 0, f_prev = f0, df_prev = df0;
    double a = a_init;
    bool first = true;
    while (evals < max_evals) {
      double f = phi(a);
      double df = finite_all(gt) ? dot(gt, d) : 0.0;
      if (!std::isfinite(f) || f > f0 + c1 * a * df0 || (!first && f >= f_prev))
        return zoom(a_prev, f_prev, df_prev, a, f);
      if (std::abs(df) <= -c2 * df0) return accept(a, f);
      if (df >= 0) return zoom(a, f, df, a_prev, f_prev);
      a_prev = a;
      f_prev = f;
      df_prev = df;
      a *= 2;
      first = false;
    }
    return failure();
  }
};

LineSearchResult search_core(const Objective& objective, std::span<const double> x,
                             std::span<const double> d, double f0, double df0,
                             double a_init, double c1, double c2, int max_evals)
{
  SearchState st{objective, x, d, f0, df0, c1, c2, max_evals};
  st.xt.resize(x.size());
  st.gt.resize(x.size());
  return st.run(a_init);
}

}  // namespace

LineSearchResult wolfe_line_search(const Objective& objective,
                                   std::span<const double> x,
                                   std::span<const double> direction,
                                   double initial_step, double c1, double c2,
                                   int max_steps)
{
  std::vector<double> g0(x.size());
  double f0 = objective(x, g0);
  if (!std::isfinite(f0) || !finite_all(g0))
    throw NumericalError("objective non-finite at line search origin");
  double df0 = dot(g0, direction);
  if (!(df0 < 0)) throw std::invalid_argument("not a descent direction");
  return search_core(objective, x, direction, f0, df0, initial_step, c1, c2, max_steps);
}

MinimizeResult minimize(const Objective& objective, std::vector<double> x0,
                        const LbfgsParams& params)
{
  params.validate();
  const std::size_t n = x0.size();

  MinimizeResult out;
  out.x = std::move(x0);
  out.grad.resize(n);
  out.loss = objective(out.x, out.grad);
  out.history.evaluations = 1;
  if (!std::isfinite(out.loss) || !finite_all(out.grad))
    throw NumericalError("objective non-finite at starting point");

  out.history.initial_loss = out.loss;
  out.history.initial_grad_inf_norm = inf_norm(out.grad);
  if (out.history.initial_grad_inf_norm < params.grad_tol) {
    out.history.reason = StopReason::gradient_tolerance;
    return out;
  }

  struct Pair {
    std::vector<double> s, y;
    double rho;
  };
  std::deque<Pair> pairs;
  double gamma = 1.0;

  std::vector<double> d(n), alpha_coef;
  for (int iter = 0; iter < params.max_iter; ++iter) {
    // Two-loop recursion: d = -H g with H built from the stored pairs.
    d.assign(out.grad.begin(), out.grad.end());
    alpha_coef.assign(pairs.size(), 0.0);
    for (std::size_t k = pairs.size(); k-- > 0;) {
      const Pair& pr = pairs[k];
      double a = pr.rho * dot(pr.s, d);
      alpha_coef[k] = a;
      for (std::size_t i = 0; i < n; ++i) d[i] -= a * pr.y[i];
    }
    for (std::size_t i = 0; i < n; ++i) d[i] *= gamma;
    for (std::size_t k = 0; k < pairs.size(); ++k) {
      const Pair& pr = pairs[k];
      double b = pr.rho * dot(pr.y, d);
      for (std::size_t i = 0; i < n; ++i) d[i] += (alpha_coef[k] - b) * pr.s[i];
    }
    for (double& v : d) v = -v;

    double df0 = dot(out.grad, d);
    if (!(df0 < 0)) {
      // Stale curvature; fall back to steepest descent.
      pairs.clear();
      gamma = 1.0;
      for (std::size_t i = 0; i < n; ++i) d[i] = -out.grad[i];
      df0 = -dot(out.grad, out.grad);
    }

    double a_init =
        pairs.empty() ? std::min(1.0, 1.0 / l2_norm(out.grad)) : 1.0;
    LineSearchResult ls = search_core(objective, out.x, d, out.loss, df0, a_init,
                                      params.c1, params.c2, params.max_line_search);
    out.history.evaluations += ls.evals;

    if (ls.step > 0) {
      Pair pr;
      pr.s.resize(n);
      pr.y.resize(n);
      for (std::size_t i = 0; i < n; ++i) {
        pr.s[i] = ls.step * d[i];
        pr.y[i] = ls.grad[i] - out.grad[i];
        out.x[i] += pr.s[i];
      }
      out.loss = ls.loss;
      out.grad = std::move(ls.grad);
      out.history.iterations.push_back(
          {out.loss, inf_norm(out.grad), ls.step, ls.evals});

      double sy = dot(pr.s, pr.y);
      if (sy > 1e-10 * l2_norm(pr.s) * l2_norm(pr.y)) {
        gamma = sy / dot(pr.y, pr.y);
        pr.rho = 1.0 / sy;
        pairs.push_back(std::move(pr));
        if (pairs.size() > static_cast<std::size_t>(params.memory)) pairs.pop_front();
      }
    }

    if (!ls.success) {
      out.history.reason = StopReason::line_search_failure;
      return out;
    }
    if (inf_norm(out.grad) < params.grad_tol) {
      out.history.reason = StopReason::gradient_tolerance;
      return out;
    }
  }
  out.history.reason = StopReason::max_iterations;
  return out;
}

}  // namespace lmshoot
