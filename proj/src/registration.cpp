#include "lmshoot/registration.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "lmshoot/flow.hpp"

namespace lmshoot {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0)
{
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

template <class T, int D>
RegistrationResult register_impl(const LandmarkSet& template_set,
                                 const LandmarkSet& target_in,
                                 const RegistrationOptions& options)
{
  const ShootingConfig& cfg = options.config;
  RegistrationResult result;
  result.config = cfg;
  result.template_set = template_set;

  if (options.procrustes) {
    result.target_set = procrustes_align(target_in, template_set).aligned;
    result.procrustes_applied = true;
  } else {
    result.target_set = target_in;
  }

  result.metrics.avg_before = average_dist(template_set, result.target_set);
  result.metrics.max_before = max_dist(template_set, result.target_set);

  const std::size_t n = template_set.size();
  HamiltonianSystem<T, D> system(cfg.sigma, cfg.reduce_options());
  PointArray<T, D> q0 = convert_points<T>(template_set.points<D>());
  PointArray<T, D> target = convert_points<T>(result.target_set.points<D>());

  // p0 = (target - q0) / T
  std::vector<double> x0(n * D);
  for (std::size_t i = 0; i < n; ++i)
    for (int c = 0; c < D; ++c)
      x0[i * D + c] =
          (result.target_set.at(i, c) - template_set.at(i, c)) / cfg.timesteps;

  auto t_start = Clock::now();
  long eval_count = 0;
  double eval_seconds = 0;

  Objective objective = [&](std::span<const double> x,
                            std::span<double> grad) -> double {
    auto t0 = Clock::now();
    PointArray<T, D> p0(n);
    for (std::size_t i = 0; i < n; ++i)
      for (int c = 0; c < D; ++c) p0[i][c] = T(x[i * D + c]);
    GradientResult<T, D> g =
        system.compute_gradient(q0, p0, target, cfg.lambda, cfg.timesteps);
    for (std::size_t i = 0; i < n; ++i)
      for (int c = 0; c < D; ++c) grad[i * D + c] = double(g.grad[i][c]);
    ++eval_count;
    eval_seconds += seconds_since(t0);
    if (options.verbose)
      std::fprintf(stderr, "eval %4ld  loss %.10g  (H %.6g, mismatch %.6g)\n",
                   eval_count, g.loss, g.kinetic, g.mismatch);
    return g.loss;
  };

  LbfgsParams lp;
  lp.max_iter = cfg.max_iter;
  lp.grad_tol = options.grad_tol;
  MinimizeResult opt = minimize(objective, std::move(x0), lp);

  result.momenta = std::move(opt.x);
  result.history = std::move(opt.history);
  result.final_loss = opt.loss;

  PointArray<T, D> p_star(n);
  for (std::size_t i = 0; i < n; ++i)
    for (int c = 0; c < D; ++c) p_star[i][c] = T(result.momenta[i * D + c]);
  Trajectory<T, D> traj = system.integrate_forward(q0, p_star, cfg.timesteps);

  LandmarkSet warped(n, D);
  for (std::size_t i = 0; i < n; ++i)
    for (int c = 0; c < D; ++c) warped.at(i, c) = double(traj.final_q()[i][c]);
  result.warped = std::move(warped);

  result.metrics.avg_after = average_dist(result.warped, result.target_set);
  result.metrics.max_after = max_dist(result.warped, result.target_set);
  result.total_seconds = seconds_since(t_start);
  result.eval_seconds_mean = eval_count ? eval_seconds / double(eval_count) : 0.0;
  return result;
}

template <class T, int D>
LandmarkSet warp_impl(const RegistrationResult& result, const LandmarkSet& points)
{
  const ShootingConfig& cfg = result.config;
  const std::size_t n = result.template_set.size();
  if (result.momenta.size() != n * D)
    throw ParseError("result document momenta do not match the template shape");

  HamiltonianSystem<T, D> system(cfg.sigma, cfg.reduce_options());
  PointArray<T, D> q0 = convert_points<T>(result.template_set.points<D>());
  PointArray<T, D> p0(n);
  for (std::size_t i = 0; i < n; ++i)
    for (int c = 0; c < D; ++c) p0[i][c] = T(result.momenta[i * D + c]);

  Trajectory<T, D> traj = system.integrate_forward(q0, p0, cfg.timesteps);
  FlowField<T, D> field{&traj, cfg.reduce_options()};
  PointArray<T, D> moved = warp_points(convert_points<T>(points.points<D>()), field);

  LandmarkSet out(moved.size(), D);
  for (std::size_t i = 0; i < moved.size(); ++i)
    for (int c = 0; c < D; ++c) out.at(i, c) = double(moved[i][c]);
  return out;
}

template <class T, int D>
void frames_impl(const RegistrationResult& result, const std::filesystem::path& dir,
                 int stride)
{
  const ShootingConfig& cfg = result.config;
  const std::size_t n = result.template_set.size();
  HamiltonianSystem<T, D> system(cfg.sigma, cfg.reduce_options());
  PointArray<T, D> q0 = convert_points<T>(result.template_set.points<D>());
  PointArray<T, D> p0(n);
  for (std::size_t i = 0; i < n; ++i)
    for (int c = 0; c < D; ++c) p0[i][c] = T(result.momenta[i * D + c]);
  Trajectory<T, D> traj = system.integrate_forward(q0, p0, cfg.timesteps);
  FlowField<T, D> field{&traj, cfg.reduce_options()};
  export_frames(field, dir, stride);
}

}  // namespace

RegistrationResult register_landmarks(const LandmarkSet& template_set,
                                      const LandmarkSet& target_set,
                                      const RegistrationOptions& options)
{
  if (template_set.dim() != target_set.dim() ||
      template_set.size() != target_set.size())
    throw ShapeError("template and target must have equal count and dimension");
  options.config.validate();
  return dispatch_precision_dim(
      options.config.precision, template_set.dim(), [&](auto tf, auto dc) {
        using T = typename decltype(tf)::type;
        return register_impl<T, dc()>(template_set, target_set, options);
      });
}

LandmarkSet warp_with_result(const RegistrationResult& result, const LandmarkSet& points)
{
  if (points.dim() != result.template_set.dim())
    throw ShapeError("points dimension does not match the registration");
  return dispatch_precision_dim(
      result.config.precision, points.dim(), [&](auto tf, auto dc) {
        using T = typename decltype(tf)::type;
        return warp_impl<T, dc()>(result, points);
      });
}

void export_result_frames(const RegistrationResult& result,
                          const std::filesystem::path& dir, int stride)
{
  dispatch_precision_dim(result.config.precision, result.template_set.dim(),
                         [&](auto tf, auto dc) {
                           using T = typename decltype(tf)::type;
                           frames_impl<T, dc()>(result, dir, stride);
                           return 0;
                         });
}

namespace {

nlohmann::json points_to_json(const LandmarkSet& set)
{
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t i = 0; i < set.size(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (int c = 0; c < set.dim(); ++c) row.push_back(set.at(i, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

LandmarkSet points_from_json(const nlohmann::json& rows, int dim)
{
  std::vector<double> flat;
  flat.reserve(rows.size() * dim);
  for (const auto& row : rows)
    for (const auto& v : row) flat.push_back(v.get<double>());
  return LandmarkSet::from_flat(std::move(flat), dim);
}

constexpr int kSchemaVersion = 1;

}  // namespace

void save_result(const RegistrationResult& result, const std::filesystem::path& path)
{
  const ShootingConfig& cfg = result.config;
  nlohmann::json doc;
  doc["schema_version"] = kSchemaVersion;
  doc["config"] = {{"sigma", cfg.sigma},
                   {"timesteps", cfg.timesteps},
                   {"lambda", cfg.lambda},
                   {"max_iter", cfg.max_iter},
                   {"precision", to_string(cfg.precision)},
                   {"backend", to_string(cfg.backend)},
                   {"block_size", cfg.block_size},
                   {"threads", cfg.threads},
                   {"seed", cfg.rng_seed},
                   {"procrustes", result.procrustes_applied}};
  doc["metrics"] = {{"avg_before_mm", result.metrics.avg_before},
                    {"max_before_mm", result.metrics.max_before},
                    {"avg_after_mm", result.metrics.avg_after},
                    {"max_after_mm", result.metrics.max_after}};

  nlohmann::json hist;
  hist["initial_loss"] = result.history.initial_loss;
  hist["stop_reason"] = to_string(result.history.reason);
  hist["iterations"] = result.history.iterations.size();
  hist["evaluations"] = result.history.evaluations;
  nlohmann::json losses = nlohmann::json::array();
  nlohmann::json gnorms = nlohmann::json::array();
  nlohmann::json steps = nlohmann::json::array();
  for (const auto& it : result.history.iterations) {
    losses.push_back(it.loss);
    gnorms.push_back(it.grad_inf_norm);
    steps.push_back(it.step);
  }
  hist["loss"] = std::move(losses);
  hist["grad_inf_norm"] = std::move(gnorms);
  hist["step"] = std::move(steps);
  hist["final_loss"] = result.final_loss;
  doc["history"] = std::move(hist);

  doc["momenta"] = result.momenta;
  doc["points"] = {{"dim", result.template_set.dim()},
                   {"count", result.template_set.size()},
                   {"template", points_to_json(result.template_set)},
                   {"target", points_to_json(result.target_set)},
                   {"warped", points_to_json(result.warped)}};
  doc["timing"] = {{"note", "wall times are environment-dependent"},
                   {"total_seconds", result.total_seconds},
                   {"per_gradient_mean_seconds", result.eval_seconds_mean}};

  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out << doc.dump(2) << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

RegistrationResult load_result(const std::filesystem::path& path)
{
  std::ifstream in(path);
  if (!in) throw IoError("cannot open result document: " + path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("corrupt result document " + path.string() + ": " + e.what());
  }
  try {
    if (doc.at("schema_version").get<int>() != kSchemaVersion)
      throw ParseError("unsupported result schema version in " + path.string());

    RegistrationResult result;
    const auto& c = doc.at("config");
    result.config.sigma = c.at("sigma").get<double>();
    result.config.timesteps = c.at("timesteps").get<int>();
    result.config.lambda = c.at("lambda").get<double>();
    result.config.max_iter = c.at("max_iter").get<int>();
    result.config.precision = precision_from_string(c.at("precision").get<std::string>());
    result.config.backend = strategy_from_string(c.at("backend").get<std::string>());
    result.config.block_size = c.at("block_size").get<std::size_t>();
    result.config.threads = c.at("threads").get<unsigned>();
    result.config.rng_seed = c.at("seed").get<std::uint64_t>();
    result.procrustes_applied = c.at("procrustes").get<bool>();

    const auto& m = doc.at("metrics");
    result.metrics.avg_before = m.at("avg_before_mm").get<double>();
    result.metrics.max_before = m.at("max_before_mm").get<double>();
    result.metrics.avg_after = m.at("avg_after_mm").get<double>();
    result.metrics.max_after = m.at("max_after_mm").get<double>();

    result.final_loss = doc.at("history").at("final_loss").get<double>();
    result.momenta = doc.at("momenta").get<std::vector<double>>();

    const auto& pts = doc.at("points");
    int dim = pts.at("dim").get<int>();
    result.template_set = points_from_json(pts.at("template"), dim);
    result.target_set = points_from_json(pts.at("target"), dim);
    result.warped = points_from_json(pts.at("warped"), dim);
    return result;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("result document " + path.string() +
                     " is missing fields: " + e.what());
  }
}

}  // namespace lmshoot
