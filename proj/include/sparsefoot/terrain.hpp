#pragma once

// Procedural sparse-foothold terrains on a regular grid.
//
// Grid convention: row index i runs along world +x (direction of travel),
// column index j along world +y. Cell (i, j) covers
// [origin.x + i*cell, origin.x + (i+1)*cell) x [origin.y + j*cell, ...).

#include "sparsefoot/grid.hpp"
#include "sparsefoot/schedule.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

namespace sparsefoot {

enum class TerrainKind {
  SteppingStones,
  BalanceBeams,
  SteppingBeams,
  Gaps,
  Flat,
  PretrainStones,
  PretrainBeams,
};

/// snake_case names used in configs and CSVs.
std::string_view to_string(TerrainKind kind);
/// Throws InvalidSpec on an unknown name.
TerrainKind parse_terrain_kind(std::string_view name);

/// The four evaluation families.
inline constexpr TerrainKind kEvaluationKinds[] = {
    TerrainKind::SteppingStones, TerrainKind::BalanceBeams, TerrainKind::SteppingBeams,
    TerrainKind::Gaps};

inline constexpr double kApronM = 1.0;
inline constexpr double kSurfaceHeightM = 0.0;
inline constexpr double kVoidDepthM = 0.5;
inline constexpr double kDiscontinuityM = 0.1;
inline constexpr double kEdgeCutoffM = 0.25;
inline constexpr double kHeightQuantumM = 1e-6;
inline constexpr double kLatticeSpacingM = 0.40;
inline constexpr double kGapPlatformM = 0.80;

struct TerrainSpec {
  TerrainKind kind = TerrainKind::Flat;
  double difficulty = 1.0;
  std::uint64_t seed = 0;
  double length_m = 6.0;
  double width_m = 4.0;
  double cell_m = 0.05;

  /// Throws InvalidSpec naming the offending field.
  void validate() const;
  bool operator==(const TerrainSpec&) const = default;
};

/// Generation parameters at one difficulty.
struct TerrainParams {
  double sparsity = 0.0;       ///< target unsafe fraction of the structured band
  double randomness = 0.0;     ///< jitter range as a fraction of spacing
  double feature_m = 0.0;      ///< stone side, bar depth, beam width or gap width
  double spacing_m = 0.0;      ///< lattice pitch (0 where not applicable)
};

/// Difficulty in [0, 1] to generation parameters; linear between anchors.
TerrainParams difficulty_params(TerrainKind kind, double difficulty, double width_m = 4.0);

struct HeightField {
  double cell_m = 0.05;
  Eigen::Vector2d origin = Eigen::Vector2d::Zero();
  GridXd heights;
  MaskX safe;
  /// Cell-center distance to the nearest edge source; +inf beyond kEdgeCutoffM.
  GridXd edge_dist;
  /// Region the sparsity target refers to (aprons excluded).
  CellRect structured_band;

  Eigen::Index rows() const { return heights.rows(); }
  Eigen::Index cols() const { return heights.cols(); }

  Eigen::Vector2d cell_center(Eigen::Index i, Eigen::Index j) const {
    return origin + cell_m * Eigen::Vector2d(double(i) + 0.5, double(j) + 0.5);
  }
  /// Cell containing a world point, if inside the grid.
  std::optional<Eigen::Vector2i> cell_of(const Eigen::Vector2d& p) const;
  /// Height of the containing cell; nullopt outside the grid.
  std::optional<double> height_at(const Eigen::Vector2d& p) const;
  bool safe_at(const Eigen::Vector2d& p) const;
};

/// Builds the terrain. Throws InvalidSpec for invalid specs and
/// SpecInfeasible when the layout cannot be realized.
HeightField generate(const TerrainSpec& spec);

/// Unsafe-cell fraction of `band`. Throws EmptyRegion for an empty band and
/// OutOfBounds for a band outside the grid.
double measure_sparsity(const HeightField& hf, const CellRect& band);

/// Cells that count as edges: unsafe cells, and both cells of any 4-neighbor
/// pair of safe cells whose heights differ by more than kDiscontinuityM.
MaskX edge_sources(const HeightField& hf);

/// Fills edge_dist with the exact cell-center Euclidean distance (meters) to
/// the nearest edge source; distances above `cutoff_m` become +inf.
HeightField edge_distance_transform(HeightField hf, double cutoff_m = kEdgeCutoffM);

/// Distance from a world point to the nearest edge-source cell square, in
/// meters; +inf when none lies within `search_m`. Zero on unsafe cells and
/// off the grid.
double point_edge_distance(const HeightField& hf, const Eigen::Vector2d& p, double search_m = 0.10);

/// Terrain specs for one curriculum stage. Base yields low-randomness
/// pretraining terrains; Advanced levels ramp difficulty up to 1.0.
std::vector<TerrainSpec> curriculum_terrains(const CurriculumStage& stage, std::uint64_t seed);

/// Width of the widest run of safe cells in a column slice (row i).
double measured_beam_width(const HeightField& hf, Eigen::Index row);

/// Longest run of unsafe cells along a row-wise scan of column j, in meters.
double measured_gap_span(const HeightField& hf, Eigen::Index col);

}  // namespace sparsefoot
