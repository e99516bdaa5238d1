#pragma once

#include <cstdint>
#include <string>

#include "lmshoot/landmarks.hpp"
#include "lmshoot/shooting.hpp"

namespace lmshoot {

/// Synthetic template/target generation. The template is a deterministic
/// point layout; the target is the template flowed through the forward model
/// under random initial momenta, so it is exactly reachable and registration
/// quality can be judged against a known-attainable optimum.
struct SynthSpec {
  enum class Kind { sphere, grid };
  Kind kind = Kind::sphere;
  std::size_t count = 1847;
  int dim = 3;
  double extent = 40.0;          // bounding size (mm): sphere diameter / grid span
  double momentum_scale = 0.75;  // stddev per momentum component (mm / unit time)
  std::uint64_t seed = 0;

  void validate() const;
};

SynthSpec::Kind synth_kind_from_string(const std::string& name);
const char* to_string(SynthSpec::Kind kind);

/// Template layout only: Fibonacci sphere (d=3) / uniform circle (d=2), or a
/// jittered grid spanning the extent.
LandmarkSet make_template_points(const SynthSpec& spec);

struct SynthPair {
  LandmarkSet template_set;     // q(0)
  LandmarkSet target_set;       // q(1) under the drawn momenta
  std::vector<double> momenta;  // flat ground-truth p0
};

/// Draws momenta ~ Normal(0, momentum_scale) per component with the given
/// seed and integrates in 64-bit to produce the target.
SynthPair make_synthetic_pair(const SynthSpec& spec, double sigma, int timesteps,
                              const ReduceOptions& reduce = {});

}  // namespace lmshoot
