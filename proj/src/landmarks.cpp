#include "lmshoot/landmarks.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace lmshoot {

LandmarkSet LandmarkSet::from_flat(std::vector<double> coords, int dim)
{
  if (dim != 2 && dim != 3) throw ShapeError("dimension must be 2 or 3");
  if (coords.empty() || coords.size() % dim != 0)
    throw ShapeError("coordinate count is not a multiple of the dimension");
  LandmarkSet s;
  s.dim_ = dim;
  s.coords_ = std::move(coords);
  return s;
}

bool LandmarkSet::all_finite() const
{
  return std::all_of(coords_.begin(), coords_.end(),
                     [](double v) { return std::isfinite(v); });
}

LandmarkSet RigidTransform::apply(const LandmarkSet& set) const
{
  if (set.dim() != dim) throw ShapeError("transform/landmark dimension mismatch");
  LandmarkSet out(set.size(), dim);
  for (std::size_t i = 0; i < set.size(); ++i) {
    for (int a = 0; a < dim; ++a) {
      double v = translation[a];
      for (int b = 0; b < dim; ++b) v += rotation[a * dim + b] * set.at(i, b);
      out.at(i, a) = v;
    }
  }
  return out;
}

RigidTransform RigidTransform::inverse() const
{
  RigidTransform inv;
  inv.dim = dim;
  // R^-1 = R^T; t' = -R^T t
  for (int a = 0; a < dim; ++a)
    for (int b = 0; b < dim; ++b) inv.rotation[a * dim + b] = rotation[b * dim + a];
  for (int a = 0; a < dim; ++a) {
    double v = 0;
    for (int b = 0; b < dim; ++b) v -= inv.rotation[a * dim + b] * translation[b];
    inv.translation[a] = v;
  }
  return inv;
}

namespace {

bool parse_line_fields(const std::string& line, std::vector<double>& fields,
                       std::size_t line_no)
{
  fields.clear();
  const char* p = line.data();
  const char* end = p + line.size();
  while (p < end) {
    while (p < end && (*p == ' ' || *p == '\t' || *p == ',' || *p == '\r')) ++p;
    if (p >= end) break;
    if (*p == '#') break;  // trailing comment
    double value = 0;
    auto [next, ec] = std::from_chars(p, end, value);
    if (ec != std::errc() || next == p)
      throw ParseError("non-numeric token '" +
                           std::string(p, std::min<std::size_t>(end - p, 16)) + "'",
                       line_no);
    fields.push_back(value);
    p = next;
  }
  return !fields.empty();
}

}  // namespace

LandmarkSet load_landmarks(const std::filesystem::path& path,
                           std::optional<int> expected_dim)
{
  std::ifstream in(path);
  if (!in) throw IoError("cannot open landmark file: " + path.string());

  std::vector<double> coords;
  std::vector<double> fields;
  int dim = 0;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    if (!parse_line_fields(line, fields, line_no)) continue;
    if (dim == 0) {
      if (fields.size() != 2 && fields.size() != 3)
        throw ParseError("expected 2 or 3 fields, found " + std::to_string(fields.size()),
                         line_no);
      dim = static_cast<int>(fields.size());
    } else if (fields.size() != static_cast<std::size_t>(dim)) {
      throw ParseError("inconsistent field count (expected " + std::to_string(dim) +
                           ", found " + std::to_string(fields.size()) + ")",
                       line_no);
    }
    for (double v : fields) {
      if (!std::isfinite(v)) throw ParseError("non-finite coordinate", line_no);
      coords.push_back(v);
    }
  }
  if (coords.empty()) throw ParseError("no landmarks in " + path.string());
  if (expected_dim && dim != *expected_dim)
    throw ShapeError("expected dimension " + std::to_string(*expected_dim) + ", file " +
                     path.string() + " has dimension " + std::to_string(dim));
  return LandmarkSet::from_flat(std::move(coords), dim);
}

void save_landmarks(const LandmarkSet& set, const std::filesystem::path& path)
{
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  char buf[40];
  for (std::size_t i = 0; i < set.size(); ++i) {
    std::string line;
    for (int a = 0; a < set.dim(); ++a) {
      std::snprintf(buf, sizeof buf, "%.17g", set.at(i, a));
      if (a) line += ' ';
      line += buf;
    }
    line += '\n';
    out << line;
  }
  out.flush();
  if (!out) throw IoError("write failed: " + path.string());
}

namespace {

void require_paired(const LandmarkSet& a, const LandmarkSet& b)
{
  if (a.dim() != b.dim() || a.size() != b.size())
    throw ShapeError("landmark sets must have equal count and dimension (" +
                     std::to_string(a.size()) + "x" + std::to_string(a.dim()) + " vs " +
                     std::to_string(b.size()) + "x" + std::to_string(b.dim()) + ")");
}

double pointwise_dist(const LandmarkSet& a, const LandmarkSet& b, std::size_t i)
{
  double s = 0;
  for (int c = 0; c < a.dim(); ++c) {
    double d = a.at(i, c) - b.at(i, c);
    s += d * d;
  }
  return std::sqrt(s);
}

}  // namespace

double average_dist(const LandmarkSet& a, const LandmarkSet& b)
{
  require_paired(a, b);
  double sum = 0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += pointwise_dist(a, b, i);
  return sum / static_cast<double>(a.size());
}

double max_dist(const LandmarkSet& a, const LandmarkSet& b)
{
  require_paired(a, b);
  double best = 0;
  for (std::size_t i = 0; i < a.size(); ++i)
    best = std::max(best, pointwise_dist(a, b, i));
  return best;
}

ProcrustesResult procrustes_align(const LandmarkSet& moving, const LandmarkSet& fixed)
{
  require_paired(moving, fixed);
  const int d = moving.dim();
  const std::size_t n = moving.size();
  if (n < static_cast<std::size_t>(d))
    throw ShapeError("need at least dim landmarks for rigid alignment");

  Eigen::VectorXd cm = Eigen::VectorXd::Zero(d), cf = Eigen::VectorXd::Zero(d);
  for (std::size_t i = 0; i < n; ++i)
    for (int a = 0; a < d; ++a) {
      cm[a] += moving.at(i, a);
      cf[a] += fixed.at(i, a);
    }
  cm /= double(n);
  cf /= double(n);

  // Cross-covariance of centered sets: H = sum_i (m_i - cm)(f_i - cf)^T
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(d, d);
  double moving_spread = 0;
  for (std::size_t i = 0; i < n; ++i) {
    Eigen::VectorXd m(d), f(d);
    for (int a = 0; a < d; ++a) {
      m[a] = moving.at(i, a) - cm[a];
      f[a] = fixed.at(i, a) - cf[a];
    }
    moving_spread += m.squaredNorm();
    H += m * f.transpose();
  }

  ProcrustesResult result;
  result.transform.dim = d;

  if (moving_spread <= 1e-24 * double(n)) {
    // All moving points coincident: rotation undefined, match centroids.
    result.degenerate = true;
    for (int a = 0; a < d; ++a) result.transform.translation[a] = cf[a] - cm[a];
    result.aligned = result.transform.apply(moving);
    return result;
  }

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(H, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::MatrixXd U = svd.matrixU(), V = svd.matrixV();
  // R = V S U^T with S flipping the smallest singular direction if needed to
  // keep det(R) = +1 (no reflections).
  Eigen::VectorXd S = Eigen::VectorXd::Ones(d);
  if ((V * U.transpose()).determinant() < 0) S[d - 1] = -1;
  Eigen::MatrixXd R = V * S.asDiagonal() * U.transpose();
  Eigen::VectorXd t = cf - R * cm;

  for (int a = 0; a < d; ++a) {
    for (int b = 0; b < d; ++b) result.transform.rotation[a * d + b] = R(a, b);
    result.transform.translation[a] = t[a];
  }
  result.aligned = result.transform.apply(moving);
  return result;
}

}  // namespace lmshoot
