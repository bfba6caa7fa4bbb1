#pragma once

// Robot-frame local heightmap, the foot-edge penalty and the mean edge
// violation metric.
//
// The map spans 0.5 m behind to 1.1 m ahead of the base and 0.4 m to either
// side, at 0.05 m: 32 rows along base +x and 16 columns along base +y.
// Heights are expressed relative to the base origin, so flat ground under a
// base standing 0.3 m high reads -0.3.

#include "sparsefoot/sensor.hpp"
#include "sparsefoot/terrain.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <limits>
#include <span>
#include <string_view>
#include <vector>

namespace sparsefoot {

inline constexpr int kMapRows = 32;
inline constexpr int kMapCols = 16;
inline constexpr double kMapCellM = 0.05;
inline constexpr double kMapBackM = 0.5;
inline constexpr double kMapFrontM = 1.1;
inline constexpr double kMapHalfWidthM = 0.4;

template <typename Scalar>
using MapArray = Eigen::Array<Scalar, kMapRows, kMapCols>;
using MapGrid = MapArray<double>;
using MapMask = MapArray<bool>;

struct LocalHeightmap {
  MapGrid heights = MapGrid::Zero();
  MapMask valid = MapMask::Constant(false);
  /// Upper bound on each cell's surface from rays that passed over it
  /// (+inf when unknown). Lets refinement tell a sensor hole from a drop
  /// hidden behind an edge.
  MapGrid ceiling = MapGrid::Constant(std::numeric_limits<double>::infinity());
  RobotPose frame;

  /// Cell center in the yaw-aligned base frame.
  static Eigen::Vector2d cell_center(int i, int j) {
    return {-kMapBackM + (i + 0.5) * kMapCellM, -kMapHalfWidthM + (j + 0.5) * kMapCellM};
  }
  /// Cell containing a base-frame point, or (-1, -1).
  static Eigen::Vector2i cell_of(const Eigen::Vector2d& p);
};

enum class SamplingMode { Nearest, Bilinear };

/// Ground-truth local map at `pose`: each cell center is rotated by yaw,
/// translated to the world and looked up. Cells off the terrain are invalid.
/// Throws OutOfBounds when no cell lands on the terrain.
LocalHeightmap sample_gt(const HeightField& hf, const RobotPose& pose,
                         SamplingMode mode = SamplingMode::Nearest);

enum class FootId { FL, FR, RL, RR };

std::string_view to_string(FootId foot);

struct FootState {
  FootId foot = FootId::FL;
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  bool contact = false;
};

struct Touchdown {
  std::int64_t tick = 0;
  FootState foot;
};

using FootstepLog = std::vector<Touchdown>;

/// Width of the band around terrain edges that the penalty and MEV use.
inline constexpr double kEdgeBandM = 0.05;

/// Linear ramp: 1 at the edge, 0 at kEdgeBandM and beyond.
double edge_ramp(double edge_distance_m);

/// -sum_i contact_i * E(p_i) for point feet; feet on unsafe cells count E = 1.
double edge_penalty(std::span<const FootState> feet, const HeightField& hf);

bool is_edge_violation(const HeightField& hf, const Eigen::Vector2d& p);

/// Fraction of touchdowns closer than kEdgeBandM to an edge. Throws EmptyLog.
double mean_edge_violation(const FootstepLog& log, const HeightField& hf);

}  // namespace sparsefoot
