#pragma once

#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace lmshoot {

struct LbfgsParams {
  int memory = 10;           // stored curvature pairs
  int max_iter = 100;
  double grad_tol = 1e-6;    // on the gradient infinity norm
  double c1 = 1e-4;          // sufficient decrease (strong Wolfe)
  double c2 = 0.9;           // curvature (strong Wolfe)
  int max_line_search = 20;  // objective evaluations per line search

  void validate() const
  {
    if (memory < 1) throw std::invalid_argument("memory must be >= 1");
    if (max_iter < 1) throw std::invalid_argument("max_iter must be >= 1");
    if (!(0 < c1 && c1 < c2 && c2 < 1))
      throw std::invalid_argument("need 0 < c1 < c2 < 1");
    if (max_line_search < 1) throw std::invalid_argument("max_line_search must be >= 1");
  }
};

enum class StopReason { gradient_tolerance, max_iterations, line_search_failure };

const char* to_string(StopReason r);

struct IterationRecord {
  double loss;
  double grad_inf_norm;
  double step;
  int evals;  // objective evaluations spent in this iteration's line search
};

struct OptimHistory {
  double initial_loss = 0;
  double initial_grad_inf_norm = 0;
  std::vector<IterationRecord> iterations;  // accepted iterates only
  StopReason reason = StopReason::max_iterations;
  int evaluations = 0;  // total objective evaluations
};

/// Objective writes the gradient into grad (same length as x) and returns
/// the loss. Must be deterministic.
using Objective = std::function<double(std::span<const double>, std::span<double>)>;

struct LineSearchResult {
  double step = 0;  // 0 when not even a sufficient-decrease point was found
  double loss = 0;
  std::vector<double> grad;
  bool success = false;  // both strong Wolfe conditions hold at `step`
  int evals = 0;
};

/// Strong-Wolfe line search from x along `direction` (bracketing + zoom).
/// Throws std::invalid_argument if the direction is not a descent direction.
/// On failure returns the best sufficient-decrease step seen (flagged), or
/// step 0 when none was found. Non-finite objective values during the search
/// are treated as overshoot and the step shrinks.
LineSearchResult wolfe_line_search(const Objective& objective,
                                   std::span<const double> x,
                                   std::span<const double> direction,
                                   double initial_step, double c1, double c2,
                                   int max_steps);

struct MinimizeResult {
  std::vector<double> x;
  double loss = 0;
  std::vector<double> grad;
  OptimHistory history;
};

/// L-BFGS with two-loop recursion over the last `memory` curvature pairs and
/// strong-Wolfe line search. Curvature pairs with s.y <= 1e-10 |s||y| are
/// discarded. Throws NumericalError if the objective is non-finite at x0.
MinimizeResult minimize(const Objective& objective, std::vector<double> x0,
                        const LbfgsParams& params);

}  // namespace lmshoot
