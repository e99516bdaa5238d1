#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <vector>

namespace lmshoot {

// Small fixed-dimension point/vector. D is 2 or 3 everywhere in this
// project; T is float or double depending on the configured precision.
template <class T, int D>
using Vec = std::array<T, D>;

template <class T, int D>
using PointArray = std::vector<Vec<T, D>>;

template <class T, int D>
inline Vec<T, D> operator+(const Vec<T, D>& a, const Vec<T, D>& b)
{
  Vec<T, D> r;
  for (int k = 0; k < D; ++k) r[k] = a[k] + b[k];
  return r;
}

template <class T, int D>
inline Vec<T, D> operator-(const Vec<T, D>& a, const Vec<T, D>& b)
{
  Vec<T, D> r;
  for (int k = 0; k < D; ++k) r[k] = a[k] - b[k];
  return r;
}

template <class T, int D>
inline Vec<T, D> operator*(T s, const Vec<T, D>& a)
{
  Vec<T, D> r;
  for (int k = 0; k < D; ++k) r[k] = s * a[k];
  return r;
}

template <class T, int D>
inline Vec<T, D>& operator+=(Vec<T, D>& a, const Vec<T, D>& b)
{
  for (int k = 0; k < D; ++k) a[k] += b[k];
  return a;
}

template <class T, int D>
inline T dot(const Vec<T, D>& a, const Vec<T, D>& b)
{
  T s = a[0] * b[0];
  for (int k = 1; k < D; ++k) s += a[k] * b[k];
  return s;
}

template <class T, int D>
inline T norm_sq(const Vec<T, D>& a)
{
  return dot<T, D>(a, a);
}

template <class T, int D>
inline T norm(const Vec<T, D>& a)
{
  return std::sqrt(norm_sq<T, D>(a));
}

template <class T, int D>
inline bool is_finite(const Vec<T, D>& a)
{
  for (int k = 0; k < D; ++k)
    if (!std::isfinite(a[k])) return false;
  return true;
}

template <class T, int D>
inline bool all_finite(const PointArray<T, D>& pts)
{
  for (const auto& v : pts)
    if (!is_finite<T, D>(v)) return false;
  return true;
}

// Elementwise conversion between precisions.
template <class TOut, class TIn, int D>
inline PointArray<TOut, D> convert_points(const PointArray<TIn, D>& in)
{
  PointArray<TOut, D> out(in.size());
  for (std::size_t i = 0; i < in.size(); ++i)
    for (int k = 0; k < D; ++k) out[i][k] = static_cast<TOut>(in[i][k]);
  return out;
}

}  // namespace lmshoot
