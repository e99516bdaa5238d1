#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "lmshoot/landmarks.hpp"
#include "lmshoot/lbfgs.hpp"
#include "lmshoot/shooting.hpp"

namespace lmshoot {

struct RegistrationOptions {
  ShootingConfig config;
  bool procrustes = false;  // pre-align target to template space
  double grad_tol = 1e-6;
  bool verbose = false;  // per-iteration progress on stderr
};

struct RegistrationMetrics {
  double avg_before = 0;
  double max_before = 0;
  double avg_after = 0;
  double max_after = 0;
};

struct RegistrationResult {
  ShootingConfig config;
  bool procrustes_applied = false;

  LandmarkSet template_set;  // q(0), after any pre-alignment bookkeeping
  LandmarkSet target_set;    // the target actually matched (post-Procrustes)
  LandmarkSet warped;        // q(1) at the optimum
  std::vector<double> momenta;  // optimized p0, flat N*dim

  RegistrationMetrics metrics;  // 64-bit, before/after
  OptimHistory history;
  double final_loss = 0;

  double total_seconds = 0;
  double eval_seconds_mean = 0;
};

/// Full pipeline: optional Procrustes pre-alignment, p0 = (target - q0)/T,
/// L-BFGS over the flattened momenta driving the discrete-adjoint gradient,
/// then metrics on the warped result.
RegistrationResult register_landmarks(const LandmarkSet& template_set,
                                      const LandmarkSet& target_set,
                                      const RegistrationOptions& options);

/// Re-integrates the stored optimum and warps an arbitrary point set
/// through the resulting flow.
LandmarkSet warp_with_result(const RegistrationResult& result,
                             const LandmarkSet& points);

/// Re-integrates the stored optimum and writes trajectory frames.
void export_result_frames(const RegistrationResult& result,
                          const std::filesystem::path& dir, int stride);

/// Versioned JSON result document (sections: config, metrics, history,
/// momenta, points, timing). Momenta and points round-trip exactly.
void save_result(const RegistrationResult& result, const std::filesystem::path& path);
RegistrationResult load_result(const std::filesystem::path& path);

}  // namespace lmshoot
