#pragma once

#include <filesystem>

#include "lmshoot/landmarks.hpp"
#include "lmshoot/shooting.hpp"

namespace lmshoot {

/// Dense velocity view of a completed trajectory: the landmark momenta
/// interpolated over all of space through the same Gaussian kernel,
/// v(x, t) = sum_l K(|q_l(t) - x|^2) p_l(t).
template <class T, int D>
struct FlowField {
  const Trajectory<T, D>* trajectory = nullptr;
  ReduceOptions reduce;

  const Trajectory<T, D>& traj() const { return *trajectory; }
};

namespace detail {

// Velocities of a batch of points at one stored snapshot. Writes the same
// arithmetic per (point, landmark) pair as the forward H_p term, so a point
// sitting exactly on q_i(t) reproduces H_p[i] bitwise.
template <class T, int D>
void velocities_at_step(const FlowField<T, D>& field, int t_index,
                        const PointArray<T, D>& points, PointArray<T, D>& out)
{
  const auto& traj = field.traj();
  const PointArray<T, D>& q = traj.q[t_index];
  const PointArray<T, D>& p = traj.p[t_index];
  const std::size_t cols = q.size();
  const Vec<T, D>* qd = q.data();
  const Vec<T, D>* pd = p.data();
  const Vec<T, D>* xd = points.data();
  const T k_scale = kernel_scale<T>(traj.sigma);
  out.resize(points.size());
  auto term = [qd, pd, xd, k_scale](std::size_t m, std::size_t l) {
    Vec<T, D> dx = xd[m] - qd[l];
    T r2 = norm_sq<T, D>(dx);
    T k = std::exp(r2 * k_scale);
    Vec<T, D> v;
    for (int c = 0; c < D; ++c) v[c] = k * pd[l][c];
    return v;
  };
  reduce_rows(field.reduce, points.size(), cols, term, std::span(out));
}

}  // namespace detail

/// v(x, t_index) over the stored snapshot, reduced over landmarks with the
/// configured backend.
template <class T, int D>
Vec<T, D> velocity_at(const Vec<T, D>& x, int t_index, const FlowField<T, D>& field)
{
  if (t_index < 0 || t_index > field.traj().steps())
    throw std::out_of_range("velocity_at: timestep out of range");
  PointArray<T, D> one{x}, out;
  detail::velocities_at_step(field, t_index, one, out);
  return out[0];
}

/// Advances each point through the flow with the trajectory's own Euler
/// scheme and dt, so warping the template landmarks reproduces q(T) exactly.
template <class T, int D>
PointArray<T, D> warp_points(const PointArray<T, D>& points, const FlowField<T, D>& field)
{
  const auto& traj = field.traj();
  const T dt = T(traj.dt);
  PointArray<T, D> x = points, v;
  for (int t = 0; t < traj.steps(); ++t) {
    detail::velocities_at_step(field, t, x, v);
    for (std::size_t m = 0; m < x.size(); ++m) {
      for (int c = 0; c < D; ++c) x[m][c] = x[m][c] + dt * v[m][c];
      if (!is_finite<T, D>(x[m]))
        throw DivergedError(t + 1, static_cast<std::ptrdiff_t>(m));
    }
  }
  return x;
}

template <class T, int D>
void write_frame(const Trajectory<T, D>& traj, const std::filesystem::path& dir, int t)
{
  char name[32];
  std::snprintf(name, sizeof name, "frame_%04d.txt", t);
  LandmarkSet set(traj.q[t].size(), D);
  for (std::size_t i = 0; i < traj.q[t].size(); ++i)
    for (int c = 0; c < D; ++c) set.at(i, c) = double(traj.q[t][i][c]);
  save_landmarks(set, dir / name);
}

/// Writes the landmark snapshots q_t as landmark text files
/// frame_0000.txt, frame_{stride}.txt, ... into dir; the final frame (t = T)
/// is always written.
template <class T, int D>
void export_frames(const FlowField<T, D>& field, const std::filesystem::path& dir,
                   int stride)
{
  if (stride < 1) throw std::invalid_argument("stride must be >= 1");
  std::filesystem::create_directories(dir);
  const auto& traj = field.traj();
  const int steps = traj.steps();
  for (int t = 0; t <= steps; t += stride) write_frame(traj, dir, t);
  if (steps % stride != 0) write_frame(traj, dir, steps);
}

}  // namespace lmshoot
