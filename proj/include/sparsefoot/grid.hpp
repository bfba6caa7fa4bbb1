#pragma once

// Dense grid aliases and the exact Euclidean distance transform shared by
// the terrain edge field and the planner's estimated edge distances.

#include <Eigen/Core>

#include <cstdint>
#include <limits>
#include <vector>

namespace sparsefoot {

template <typename Scalar>
using Grid = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

using GridXd = Grid<double>;
using MaskX = Grid<bool>;

/// Half-open cell rectangle [row0, row0 + rows) x [col0, col0 + cols).
struct CellRect {
  Eigen::Index row0 = 0;
  Eigen::Index col0 = 0;
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;

  bool empty() const { return rows <= 0 || cols <= 0; }
  Eigen::Index area() const { return empty() ? 0 : rows * cols; }
  bool contains(Eigen::Index r, Eigen::Index c) const {
    return r >= row0 && r < row0 + rows && c >= col0 && c < col0 + cols;
  }
  bool operator==(const CellRect&) const = default;
};

namespace detail {

// Lower envelope of parabolas (Felzenszwalb & Huttenlocher). Inputs are
// integer-valued squared distances stored in Scalar; infinities are skipped.
template <typename Scalar>
void squared_dt_1d(const std::vector<Scalar>& f, std::vector<Scalar>& out) {
  const auto n = static_cast<std::ptrdiff_t>(f.size());
  constexpr Scalar kInf = std::numeric_limits<Scalar>::infinity();
  out.assign(f.size(), kInf);
  std::vector<std::ptrdiff_t> v(f.size());
  std::vector<Scalar> z(f.size() + 1);
  std::ptrdiff_t k = -1;
  for (std::ptrdiff_t q = 0; q < n; ++q) {
    if (f[q] == kInf) continue;
    if (k < 0) {
      k = 0;
      v[0] = q;
      z[0] = -kInf;
      z[1] = kInf;
      continue;
    }
    Scalar s;
    while (true) {
      const std::ptrdiff_t p = v[k];
      s = ((f[q] + Scalar(q * q)) - (f[p] + Scalar(p * p))) / Scalar(2 * (q - p));
      if (s <= z[k]) {  // z[0] = -inf stops the pop at k = 0
        --k;
      } else {
        break;
      }
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = kInf;
  }
  if (k < 0) return;
  std::ptrdiff_t j = 0;
  for (std::ptrdiff_t q = 0; q < n; ++q) {
    while (z[j + 1] < Scalar(q)) ++j;
    const Scalar d = Scalar(q - v[j]);
    out[q] = d * d + f[v[j]];
  }
}

}  // namespace detail

/// Exact squared Euclidean distance, in cell units, from each cell center to
/// the nearest source cell center. Cells are +inf when there is no source.
template <typename Scalar = double, typename Derived>
Grid<Scalar> squared_distance_transform(const Eigen::ArrayBase<Derived>& sources) {
  const Eigen::Index rows = sources.rows();
  const Eigen::Index cols = sources.cols();
  constexpr Scalar kInf = std::numeric_limits<Scalar>::infinity();
  Grid<Scalar> d2(rows, cols);
  std::vector<Scalar> f, g;

  f.resize(static_cast<std::size_t>(rows));
  for (Eigen::Index c = 0; c < cols; ++c) {
    for (Eigen::Index r = 0; r < rows; ++r) f[r] = sources(r, c) ? Scalar(0) : kInf;
    detail::squared_dt_1d(f, g);
    for (Eigen::Index r = 0; r < rows; ++r) d2(r, c) = g[r];
  }
  f.resize(static_cast<std::size_t>(cols));
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) f[c] = d2(r, c);
    detail::squared_dt_1d(f, g);
    for (Eigen::Index c = 0; c < cols; ++c) d2(r, c) = g[c];
  }
  return d2;
}

}  // namespace sparsefoot
