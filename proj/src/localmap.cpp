#include "sparsefoot/localmap.hpp"

#include "sparsefoot/error.hpp"

#include <algorithm>
#include <cmath>

namespace sparsefoot {

Eigen::Vector2i LocalHeightmap::cell_of(const Eigen::Vector2d& p) {
  const double fi = std::floor((p.x() + kMapBackM) / kMapCellM);
  const double fj = std::floor((p.y() + kMapHalfWidthM) / kMapCellM);
  if (!(fi >= 0.0 && fj >= 0.0 && fi < kMapRows && fj < kMapCols)) return {-1, -1};
  return {int(fi), int(fj)};
}

namespace {

// Bilinear interpolation between cell-center heights; nullopt if any of the
// four supporting centers is off the grid.
std::optional<double> bilinear_height(const HeightField& hf, const Eigen::Vector2d& p) {
  const Eigen::Vector2d g = (p - hf.origin) / hf.cell_m - Eigen::Vector2d::Constant(0.5);
  const double fi = std::floor(g.x()), fj = std::floor(g.y());
  if (fi < 0.0 || fj < 0.0 || fi + 1.0 >= double(hf.rows()) || fj + 1.0 >= double(hf.cols()))
    return std::nullopt;
  const auto i = Eigen::Index(fi), j = Eigen::Index(fj);
  const double a = g.x() - fi, b = g.y() - fj;
  return (1 - a) * (1 - b) * hf.heights(i, j) + a * (1 - b) * hf.heights(i + 1, j) +
         (1 - a) * b * hf.heights(i, j + 1) + a * b * hf.heights(i + 1, j + 1);
}

}  // namespace

LocalHeightmap sample_gt(const HeightField& hf, const RobotPose& pose, SamplingMode mode) {
  LocalHeightmap map;
  map.frame = pose;
  const double c = std::cos(pose.yaw_rad), s = std::sin(pose.yaw_rad);
  const Eigen::Vector2d base = pose.position.head<2>();
  for (int i = 0; i < kMapRows; ++i) {
    for (int j = 0; j < kMapCols; ++j) {
      const Eigen::Vector2d local = LocalHeightmap::cell_center(i, j);
      const Eigen::Vector2d world = base + Eigen::Vector2d(c * local.x() - s * local.y(),
                                                           s * local.x() + c * local.y());
      const auto h = mode == SamplingMode::Nearest ? hf.height_at(world) : bilinear_height(hf, world);
      if (!h) continue;
      map.heights(i, j) = *h - pose.position.z();
      map.valid(i, j) = true;
    }
  }
  if (!map.valid.any()) throw Error(ErrorCode::OutOfBounds, "local map window lies off the terrain");
  return map;
}

std::string_view to_string(FootId foot) {
  switch (foot) {
    case FootId::FL: return "FL";
    case FootId::FR: return "FR";
    case FootId::RL: return "RL";
    case FootId::RR: return "RR";
  }
  return "?";
}

double edge_ramp(double d) { return std::clamp((kEdgeBandM - d) / kEdgeBandM, 0.0, 1.0); }

double edge_penalty(std::span<const FootState> feet, const HeightField& hf) {
  double penalty = 0.0;
  for (const FootState& f : feet) {
    if (!f.contact) continue;
    penalty -= edge_ramp(point_edge_distance(hf, f.position.head<2>(), kEdgeBandM));
  }
  return penalty;
}

bool is_edge_violation(const HeightField& hf, const Eigen::Vector2d& p) {
  return point_edge_distance(hf, p, kEdgeBandM) < kEdgeBandM;
}

double mean_edge_violation(const FootstepLog& log, const HeightField& hf) {
  if (log.empty()) throw Error(ErrorCode::EmptyLog, "footstep log is empty");
  const auto violations = std::count_if(log.begin(), log.end(), [&](const Touchdown& td) {
    return is_edge_violation(hf, td.foot.position.head<2>());
  });
  return double(violations) / double(log.size());
}

}  // namespace sparsefoot
