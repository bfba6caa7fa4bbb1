#pragma once

// Slow, independent reference implementations used as test oracles.
// Nothing here calls the code under test except for plain data access.

#include "sparsefoot/harness.hpp"
#include "sparsefoot/localmap.hpp"
#include "sparsefoot/terrain.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <limits>
#include <tuple>
#include <vector>

namespace oracle {

using sparsefoot::GridXd;
using sparsefoot::MaskX;

// O(n^2): every cell against every source.
inline GridXd squared_edt(const MaskX& src) {
  const double inf = std::numeric_limits<double>::infinity();
  GridXd out = GridXd::Constant(src.rows(), src.cols(), inf);
  std::vector<std::pair<long, long>> sources;
  for (long i = 0; i < src.rows(); ++i)
    for (long j = 0; j < src.cols(); ++j)
      if (src(i, j)) sources.emplace_back(i, j);
  for (long i = 0; i < src.rows(); ++i)
    for (long j = 0; j < src.cols(); ++j)
      for (auto [a, b] : sources)
        out(i, j) = std::min(out(i, j), double((a - i) * (a - i) + (b - j) * (b - j)));
  return out;
}

inline bool is_edge_source(const sparsefoot::HeightField& hf, long i, long j) {
  if (!hf.safe(i, j)) return true;
  const long di[] = {1, -1, 0, 0}, dj[] = {0, 0, 1, -1};
  for (int k = 0; k < 4; ++k) {
    const long a = i + di[k], b = j + dj[k];
    if (a < 0 || b < 0 || a >= hf.rows() || b >= hf.cols()) continue;
    if (hf.safe(a, b) && std::abs(hf.heights(a, b) - hf.heights(i, j)) > sparsefoot::kDiscontinuityM)
      return true;
  }
  return false;
}

// Whole-grid scan for the nearest source square.
inline double edge_distance_at(const sparsefoot::HeightField& hf, const Eigen::Vector2d& p) {
  const long hi = long(std::floor((p.x() - hf.origin.x()) / hf.cell_m));
  const long hj = long(std::floor((p.y() - hf.origin.y()) / hf.cell_m));
  if (hi < 0 || hj < 0 || hi >= hf.rows() || hj >= hf.cols() || !hf.safe(hi, hj)) return 0.0;
  double best = std::numeric_limits<double>::infinity();
  for (long i = 0; i < hf.rows(); ++i) {
    for (long j = 0; j < hf.cols(); ++j) {
      if (!is_edge_source(hf, i, j)) continue;
      const double x0 = hf.origin.x() + i * hf.cell_m, y0 = hf.origin.y() + j * hf.cell_m;
      const double dx = std::max({x0 - p.x(), 0.0, p.x() - (x0 + hf.cell_m)});
      const double dy = std::max({y0 - p.y(), 0.0, p.y() - (y0 + hf.cell_m)});
      best = std::min(best, std::sqrt(dx * dx + dy * dy));
    }
  }
  return best;
}

inline double ref_mev(const sparsefoot::FootstepLog& log, const sparsefoot::HeightField& hf) {
  int hits = 0;
  for (const auto& td : log)
    if (edge_distance_at(hf, td.foot.position.head<2>()) < sparsefoot::kEdgeBandM) ++hits;
  return double(hits) / double(log.size());
}

// Per-cell lookup written straight from the window definition.
struct GtCell {
  bool valid = false;
  double height = 0.0;
};

inline GtCell sample_gt_cell(const sparsefoot::HeightField& hf, const sparsefoot::RobotPose& pose,
                             int i, int j) {
  const Eigen::Vector2d local(-0.5 + 0.05 * (i + 0.5), -0.4 + 0.05 * (j + 0.5));
  const Eigen::Vector2d w = pose.position.head<2>() + Eigen::Rotation2Dd(pose.yaw_rad) * local;
  const long a = long(std::floor((w.x() - hf.origin.x()) / hf.cell_m));
  const long b = long(std::floor((w.y() - hf.origin.y()) / hf.cell_m));
  if (a < 0 || b < 0 || a >= hf.rows() || b >= hf.cols()) return {};
  return {true, hf.heights(a, b) - pose.position.z()};
}

inline double ref_tanh(double x) {
  const long double e = std::expm1(2.0L * (long double)x);
  return double(e / (e + 2.0L));
}

inline double cv(const std::vector<double>& v) {
  long double mean = 0;
  for (double x : v) mean += x;
  mean /= v.size();
  long double ss = 0;
  for (double x : v) ss += (x - mean) * (x - mean);
  const long double sd = std::sqrt(ss / (v.size() - 1));
  if (std::all_of(v.begin(), v.end(), [&](double x) { return x == v[0]; })) return 0.0;
  if (std::abs(mean) < 1e-9L) return sparsefoot::kCvCap;
  return double(std::min<long double>(sd / std::abs(mean), sparsefoot::kCvCap));
}

// Scores every window cell and sorts; returns nullopt-like flag via `found`.
struct PlanResult {
  bool found = false;
  Eigen::Vector2d target = Eigen::Vector2d::Zero();
};

inline PlanResult plan(const sparsefoot::LocalHeightmap& map, const sparsefoot::PlannerConfig& cfg,
                       const Eigen::Vector2d& nominal) {
  using namespace sparsefoot;
  const double support = -kStandingHeightM;
  auto safe = [&](int i, int j) {
    return map.valid(i, j) && std::abs(map.heights(i, j) - support) <= kDiscontinuityM;
  };
  std::vector<std::tuple<long long, long long, long long, int, Eigen::Vector2d>> ranked;
  for (int i = 0; i < kMapRows; ++i) {
    for (int j = 0; j < kMapCols; ++j) {
      if (!safe(i, j)) continue;
      const Eigen::Vector2d c(-0.5 + 0.05 * (i + 0.5), -0.4 + 0.05 * (j + 0.5));
      if (std::abs(c.x() - nominal.x()) > cfg.reach.long_m + 1e-9 ||
          std::abs(c.y() - nominal.y()) > cfg.reach.lat_m + 1e-9)
        continue;
      double edge = kEdgeScoreCapM;
      for (int a = 0; a < kMapRows; ++a)
        for (int b = 0; b < kMapCols; ++b) {
          if (safe(a, b)) continue;
          const double dx = std::max(std::abs(a - i) - 0.5, 0.0) * 0.05;
          const double dy = std::max(std::abs(b - j) - 0.5, 0.0) * 0.05;
          edge = std::min(edge, std::sqrt(dx * dx + dy * dy));
        }
      const double score = cfg.forward_weight * c.x() + cfg.edge_margin_weight * edge;
      auto q = [](double v) { return std::llround(v * 1e9); };
      ranked.emplace_back(-q(score), -q(c.x()), q(std::abs(c.y() - nominal.y())), i * kMapCols + j, c);
    }
  }
  if (ranked.empty()) return {};
  auto best = std::min_element(ranked.begin(), ranked.end(), [](const auto& l, const auto& r) {
    return std::tie(std::get<0>(l), std::get<1>(l), std::get<2>(l), std::get<3>(l)) <
           std::tie(std::get<0>(r), std::get<1>(r), std::get<2>(r), std::get<3>(r));
  });
  return {true, std::get<4>(*best)};
}

}  // namespace oracle
