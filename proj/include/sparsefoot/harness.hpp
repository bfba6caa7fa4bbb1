#pragma once

// Kinematic foothold-planning walker and the episode/evaluation runner.
//
// The walker trots: diagonal pairs (FL+RR, FR+RL) alternate, one pair
// touching down every 10 policy ticks, and the base slides to the centroid
// of the four feet during each swing. Footholds are chosen from the local
// heightmap supplied by the configured perception source; ground truth
// decides whether a touchdown falls.

#include "sparsefoot/localmap.hpp"
#include "sparsefoot/reconstructor.hpp"
#include "sparsefoot/sensor.hpp"
#include "sparsefoot/terrain.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace sparsefoot {

enum class Perception { GroundTruth, Reconstructed, Blind };

std::string_view to_string(Perception perception);
/// Throws InvalidSpec on an unknown name.
Perception parse_perception(std::string_view name);

inline constexpr Perception kAllPerceptions[] = {Perception::GroundTruth, Perception::Reconstructed,
                                                 Perception::Blind};

inline constexpr double kStandingHeightM = 0.30;
inline constexpr double kHipLongM = 0.175;  // half the 0.35 m body length
inline constexpr double kHipLatM = 0.10;
inline constexpr double kCourseM = 6.0;
/// Terrain generated beyond the course so the map window never runs off it.
inline constexpr double kCourseExtensionM = 2.0;
inline constexpr int kTicksPerStep = 10;
inline constexpr int kStallLimitTicks = 100;
/// Estimated edge distances saturate here when scoring footholds.
inline constexpr double kEdgeScoreCapM = 0.10;

struct ReachWindow {
  double long_m = 0.15;
  double lat_m = 0.08;
};

struct PlannerConfig {
  Perception perception = Perception::GroundTruth;
  /// Steady-state stride; the nominal foothold sits 0.75 * step ahead of the hip.
  double nominal_step_m = 0.20;
  ReachWindow reach;
  double edge_margin_weight = 2.0;
  double forward_weight = 1.0;
  std::uint64_t seed = 0;

  /// Throws InvalidSpec.
  void validate() const;
};

/// Planner's view of a local map: estimated safety and edge distance per cell.
struct FootholdEstimate {
  /// Cells the perception source has any height for.
  MapMask known = MapMask::Constant(false);
  MapMask safe = MapMask::Constant(false);
  /// Distance from each cell center to the nearest estimated-unsafe cell,
  /// capped at kEdgeScoreCapM.
  MapGrid edge_dist = MapGrid::Zero();
};

/// A cell is estimated safe when valid and within kDiscontinuityM of the
/// expected support height (relative to the base).
FootholdEstimate estimate_footholds(const LocalHeightmap& map,
                                    double support_height = -kStandingHeightM);

/// Foothold target in the base frame. Candidates are map cells whose centers
/// lie in the reach window around `nominal`; the best maximizes
/// forward_weight * x + edge_margin_weight * min(edge, cap), ties going to
/// the more forward, then more central, then lower-index cell. Blind returns
/// `nominal`, and so does Reconstructed when no cell in the window is known
/// yet. Throws OutOfBounds for a nominal outside the map and NoFoothold when
/// no candidate is estimated safe.
Eigen::Vector2d plan_step(const LocalHeightmap& map, const PlannerConfig& planner, FootId foot,
                          const Eigen::Vector2d& nominal);
Eigen::Vector2d plan_step(const FootholdEstimate& estimate, const PlannerConfig& planner,
                          FootId foot, const Eigen::Vector2d& nominal);

struct EpisodeOptions {
  CameraModel camera;
  double course_m = kCourseM;
  double start_x_m = 0.70;
  int max_ticks = 3000;
  int policy_rate_hz = 50;
  int depth_rate_hz = 10;
  /// Record MAE of the refined reconstruction against ground truth at every
  /// depth frame (Reconstructed perception only).
  bool record_mae = true;
};

enum class Termination { Success, Fall, Stall, Timeout };

std::string_view to_string(Termination t);

struct EpisodeResult {
  bool success = false;
  Termination termination = Termination::Timeout;
  double traversing_rate = 0.0;
  double mev = 0.0;
  double reward_sum = 0.0;
  FootstepLog footsteps;
  std::vector<double> mae_trace;
  std::int64_t ticks = 0;
  double distance_m = 0.0;
};

/// distance / course, clamped to [0, 1].
double traversing_rate(double distance_m, double course_m = kCourseM);

/// Runs one episode on a prepared terrain.
EpisodeResult simulate_episode(const HeightField& hf, const PlannerConfig& planner,
                               const NoiseModel& noise, const OdometryNoise& odo_noise,
                               const EpisodeOptions& options = {});

/// Generates the terrain (the spec's course plus kCourseExtensionM) and runs
/// one episode. Throws InvalidSpec when spec.length_m is shorter than the
/// course; propagates SpecInfeasible.
EpisodeResult run_episode(const TerrainSpec& spec, const PlannerConfig& planner,
                          const NoiseModel& noise, const OdometryNoise& odo_noise,
                          const EpisodeOptions& options = {});

/// Scripted straight-line traverse along +x at constant speed, feeding the
/// reconstructor; no footstep planning.
struct TraverseOptions {
  CameraModel camera;
  double start_x_m = 0.70;
  double lateral_m = 0.0;
  double distance_m = 4.0;
  double speed_mps = 0.5;
  int policy_rate_hz = 50;
  int depth_rate_hz = 10;
  /// Most recent frames handed to each update.
  int frame_window = 2;
};

struct TraverseSample {
  std::int64_t tick = 0;
  double mae_cm = 0.0;  // NaN when nothing was jointly valid
  double valid_fraction = 0.0;
};

struct TraverseResult {
  std::vector<TraverseSample> trace;  // one row per depth frame
  ReconstructorState final_state;
  LocalHeightmap final_refined;
  LocalHeightmap final_gt;
  RobotPose final_pose;
};

using FrameCallback = std::function<void(std::int64_t tick, const DepthImage& frame)>;

TraverseResult scripted_traverse(const HeightField& hf, const NoiseModel& noise,
                                 const OdometryNoise& odo_noise, const TraverseOptions& options = {},
                                 const FrameCallback& on_frame = {});

struct AggregateRow {
  TerrainKind kind = TerrainKind::Flat;
  double difficulty = 0.0;
  Perception perception = Perception::GroundTruth;
  int episodes = 0;
  double success_rate = 0.0;
  double trav_mean = 0.0;
  double trav_sd = 0.0;
  double mev = 0.0;
  /// NaN when no reconstruction was scored.
  double mae_cm = 0.0;
};

AggregateRow aggregate(TerrainKind kind, double difficulty, Perception perception,
                       const std::vector<EpisodeResult>& results);

/// Seeds 0..n_seeds-1 for each spec with planner.perception.
std::vector<AggregateRow> evaluate(const std::vector<TerrainSpec>& specs, const PlannerConfig& planner,
                                   int n_seeds, const NoiseModel& noise = {},
                                   const OdometryNoise& odo_noise = {},
                                   const EpisodeOptions& options = {},
                                   std::vector<std::vector<EpisodeResult>>* episodes = nullptr);

void write_aggregate_csv(std::ostream& out, const std::vector<AggregateRow>& rows);
std::vector<AggregateRow> read_aggregate_csv(std::istream& in);
void write_footstep_csv(std::ostream& out, const FootstepLog& log);

/// Cells (kind, difficulty) where success(GT) >= success(RC) >= success(Blind)
/// fails, described one per string.
std::vector<std::string> ordering_violations(const std::vector<AggregateRow>& rows);

}  // namespace sparsefoot
