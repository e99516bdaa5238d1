#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lmshoot/errors.hpp"
#include "lmshoot/vec.hpp"

namespace lmshoot {

/// N landmarks in d dimensions (d = 2 or 3), coordinates in millimeters.
/// Paired sets used in registration correspond by index and must share N and d.
class LandmarkSet {
 public:
  LandmarkSet() = default;
  LandmarkSet(std::size_t count, int dim) : dim_(dim), coords_(count * dim, 0.0) {}

  static LandmarkSet from_flat(std::vector<double> coords, int dim);

  std::size_t size() const { return dim_ ? coords_.size() / dim_ : 0; }
  int dim() const { return dim_; }
  bool empty() const { return coords_.empty(); }

  double& at(std::size_t i, int a) { return coords_[i * dim_ + a]; }
  double at(std::size_t i, int a) const { return coords_[i * dim_ + a]; }

  std::span<const double> row(std::size_t i) const
  {
    return {coords_.data() + i * dim_, static_cast<std::size_t>(dim_)};
  }

  std::span<const double> flat() const { return coords_; }
  std::span<double> flat() { return coords_; }

  bool all_finite() const;

  template <int D>
  PointArray<double, D> points() const
  {
    PointArray<double, D> out(size());
    for (std::size_t i = 0; i < out.size(); ++i)
      for (int a = 0; a < D; ++a) out[i][a] = at(i, a);
    return out;
  }

  template <int D>
  static LandmarkSet from_points(const PointArray<double, D>& pts)
  {
    LandmarkSet s(pts.size(), D);
    for (std::size_t i = 0; i < pts.size(); ++i)
      for (int a = 0; a < D; ++a) s.at(i, a) = pts[i][a];
    return s;
  }

  bool operator==(const LandmarkSet&) const = default;

 private:
  int dim_ = 0;
  std::vector<double> coords_;
};

/// Rotation + translation, no scaling. rotation is row-major d x d.
struct RigidTransform {
  int dim = 3;
  std::array<double, 9> rotation{1, 0, 0, 0, 1, 0, 0, 0, 1};
  std::array<double, 3> translation{0, 0, 0};

  LandmarkSet apply(const LandmarkSet& set) const;
  RigidTransform inverse() const;
};

struct ProcrustesResult {
  RigidTransform transform;
  LandmarkSet aligned;      // transform applied to the moving set
  bool degenerate = false;  // rotation was undefined (coincident moving points)
};

/// Reads a landmark text file: one landmark per line, fields separated by
/// commas and/or whitespace, '#' lines and blank lines skipped. All data
/// lines must have the same field count (= dimension). Errors carry the
/// offending line number.
LandmarkSet load_landmarks(const std::filesystem::path& path,
                           std::optional<int> expected_dim = std::nullopt);

/// Writes the same format with 17 significant digits per coordinate, enough
/// for an exact double round-trip.
void save_landmarks(const LandmarkSet& set, const std::filesystem::path& path);

/// Mean pointwise Euclidean distance (mm), 64-bit accumulation.
double average_dist(const LandmarkSet& a, const LandmarkSet& b);

/// Max pointwise Euclidean distance (mm).
double max_dist(const LandmarkSet& a, const LandmarkSet& b);

/// Least-squares rigid alignment of moving onto fixed: minimizes
/// sum_i |R m_i + t - f_i|^2 over rotations (det +1) and translations.
/// Solved by centering both sets, factoring the cross-covariance, and
/// correcting the determinant so reflections are excluded. A fully
/// degenerate moving set (all points coincident) yields the identity
/// rotation with a centroid-matching translation, flagged as degenerate.
ProcrustesResult procrustes_align(const LandmarkSet& moving, const LandmarkSet& fixed);

}  // namespace lmshoot
