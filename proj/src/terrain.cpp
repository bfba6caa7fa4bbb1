#include "sparsefoot/terrain.hpp"

#include "sparsefoot/error.hpp"
#include "sparsefoot/rng.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <string>

namespace sparsefoot {

namespace {

constexpr std::array<std::pair<TerrainKind, std::string_view>, 7> kKindNames{{
    {TerrainKind::SteppingStones, "stepping_stones"},
    {TerrainKind::BalanceBeams, "balance_beams"},
    {TerrainKind::SteppingBeams, "stepping_beams"},
    {TerrainKind::Gaps, "gaps"},
    {TerrainKind::Flat, "flat"},
    {TerrainKind::PretrainStones, "pretrain_stones"},
    {TerrainKind::PretrainBeams, "pretrain_beams"},
}};

double lerp(double a, double b, double t) { return a + (b - a) * t; }

double quantize(double h) { return std::round(h / kHeightQuantumM) * kHeightQuantumM; }

// Half-open index range of cells whose centers fall in [lo, hi).
std::pair<Eigen::Index, Eigen::Index> covered_cells(double lo, double hi, double origin,
                                                     double cell, Eigen::Index n) {
  // center_k = origin + (k + 0.5) cell >= lo  <=>  k >= (lo - origin)/cell - 0.5
  auto first = static_cast<Eigen::Index>(std::ceil((lo - origin) / cell - 0.5));
  auto last = static_cast<Eigen::Index>(std::ceil((hi - origin) / cell - 0.5));
  first = std::clamp<Eigen::Index>(first, 0, n);
  last = std::clamp<Eigen::Index>(last, 0, n);
  return {first, std::max(first, last)};
}

void paint_safe(HeightField& hf, double x0, double x1, double y0, double y1) {
  const auto [i0, i1] = covered_cells(x0, x1, hf.origin.x(), hf.cell_m, hf.rows());
  const auto [j0, j1] = covered_cells(y0, y1, hf.origin.y(), hf.cell_m, hf.cols());
  if (i1 <= i0 || j1 <= j0) return;
  hf.safe.block(i0, j0, i1 - i0, j1 - j0) = true;
}

Eigen::Index to_cells(double meters, double cell) {
  return static_cast<Eigen::Index>(std::llround(meters / cell));
}

}  // namespace

std::string_view to_string(TerrainKind kind) {
  for (const auto& [k, name] : kKindNames)
    if (k == kind) return name;
  return "unknown";
}

TerrainKind parse_terrain_kind(std::string_view name) {
  for (const auto& [k, n] : kKindNames)
    if (n == name) return k;
  throw Error(ErrorCode::InvalidSpec, "unknown terrain kind '" + std::string(name) + "'");
}

void TerrainSpec::validate() const {
  if (!(difficulty >= 0.0 && difficulty <= 1.0))
    throw Error(ErrorCode::InvalidSpec, "difficulty must lie in [0, 1]");
  if (!(cell_m > 0.0) || !std::isfinite(cell_m))
    throw Error(ErrorCode::InvalidSpec, "cell_m must be positive");
  if (!(length_m > 0.0) || !std::isfinite(length_m))
    throw Error(ErrorCode::InvalidSpec, "length_m must be positive");
  if (!(width_m > 0.0) || !std::isfinite(width_m))
    throw Error(ErrorCode::InvalidSpec, "width_m must be positive");
  if (length_m < cell_m || width_m < cell_m)
    throw Error(ErrorCode::InvalidSpec, "length_m and width_m must span at least one cell");
  if (length_m - 2.0 * kApronM < cell_m)
    throw Error(ErrorCode::InvalidSpec, "length_m leaves no room between the aprons");
}

TerrainParams difficulty_params(TerrainKind kind, double d, double width_m) {
  d = std::clamp(d, 0.0, 1.0);
  TerrainParams p;
  switch (kind) {
    case TerrainKind::SteppingStones:
      p.sparsity = lerp(0.30, 0.763, d);
      p.randomness = lerp(0.0, 0.48, d);
      p.spacing_m = kLatticeSpacingM;
      p.feature_m = p.spacing_m * std::sqrt(1.0 - p.sparsity);
      break;
    case TerrainKind::PretrainStones:
      p.sparsity = lerp(0.20, 0.50, d);
      p.spacing_m = kLatticeSpacingM;
      p.feature_m = p.spacing_m * std::sqrt(1.0 - p.sparsity);
      break;
    case TerrainKind::SteppingBeams:
      p.sparsity = lerp(0.30, 0.647, d);
      p.randomness = lerp(0.0, 0.48, d);
      p.spacing_m = kLatticeSpacingM;
      p.feature_m = p.spacing_m * (1.0 - p.sparsity);
      break;
    case TerrainKind::PretrainBeams:
      p.sparsity = lerp(0.20, 0.45, d);
      p.spacing_m = kLatticeSpacingM;
      p.feature_m = p.spacing_m * (1.0 - p.sparsity);
      break;
    case TerrainKind::BalanceBeams:
      p.feature_m = lerp(0.40, 0.175, d);
      p.sparsity = 1.0 - p.feature_m / width_m;
      break;
    case TerrainKind::Gaps:
      p.feature_m = lerp(0.10, 0.70, d);
      p.spacing_m = kGapPlatformM + p.feature_m;
      p.sparsity = p.feature_m / p.spacing_m;
      break;
    case TerrainKind::Flat:
      break;
  }
  return p;
}

std::optional<Eigen::Vector2i> HeightField::cell_of(const Eigen::Vector2d& p) const {
  const double fi = std::floor((p.x() - origin.x()) / cell_m);
  const double fj = std::floor((p.y() - origin.y()) / cell_m);
  if (!(fi >= 0.0 && fj >= 0.0 && fi < double(rows()) && fj < double(cols()))) return std::nullopt;
  return Eigen::Vector2i(int(fi), int(fj));
}

std::optional<double> HeightField::height_at(const Eigen::Vector2d& p) const {
  const auto c = cell_of(p);
  if (!c) return std::nullopt;
  return heights((*c)(0), (*c)(1));
}

bool HeightField::safe_at(const Eigen::Vector2d& p) const {
  const auto c = cell_of(p);
  return c && safe((*c)(0), (*c)(1));
}

HeightField generate(const TerrainSpec& spec) {
  spec.validate();
  const double cell = spec.cell_m;
  HeightField hf;
  hf.cell_m = cell;
  hf.origin = Eigen::Vector2d(0.0, -0.5 * spec.width_m);
  const Eigen::Index rows = std::max<Eigen::Index>(1, to_cells(spec.length_m, cell));
  const Eigen::Index cols = std::max<Eigen::Index>(1, to_cells(spec.width_m, cell));
  hf.heights = GridXd::Zero(rows, cols);  // sized first: rows()/cols() read it
  hf.safe = MaskX::Constant(rows, cols, true);

  const TerrainParams params = difficulty_params(spec.kind, spec.difficulty, spec.width_m);
  const double band_x0 = kApronM;
  const double band_len = spec.length_m - 2.0 * kApronM;
  Rng rng(substream(spec.seed, "terrain"));

  // Structured band extent (meters along x, then lateral), set per family.
  double used_len = band_len;
  double lat0 = -0.5 * spec.width_m;
  double lat1 = 0.5 * spec.width_m;

  auto require_lattice = [&](double spacing, int count, const char* what) {
    if (count < 1)
      throw Error(ErrorCode::SpecInfeasible,
                  std::string("terrain too small for one ") + what + " period of " +
                      std::to_string(spacing) + " m");
  };

  switch (spec.kind) {
    case TerrainKind::Flat:
      break;
    case TerrainKind::SteppingStones:
    case TerrainKind::PretrainStones: {
      const double s = params.spacing_m;
      const double a = params.feature_m;
      if (a + params.randomness * s >= s)
        throw Error(ErrorCode::SpecInfeasible, "stone jitter can close every gap");
      const int nx = int(std::floor(band_len / s + 1e-9));
      const int ny = int(std::floor(spec.width_m / s + 1e-9));
      require_lattice(s, nx, "stone");
      require_lattice(s, ny, "stone");
      used_len = nx * s;
      lat0 = -0.5 * ny * s;
      lat1 = -lat0;
      const auto [i0, i1] = covered_cells(band_x0, band_x0 + used_len, hf.origin.x(), cell, rows);
      hf.safe.block(i0, 0, i1 - i0, cols) = false;
      for (int kx = 0; kx < nx; ++kx) {
        for (int ky = 0; ky < ny; ++ky) {
          const double jx = (rng.uniform() - 0.5) * params.randomness * s;
          const double jy = (rng.uniform() - 0.5) * params.randomness * s;
          const double cx = band_x0 + (kx + 0.5) * s + jx;
          const double cy = lat0 + (ky + 0.5) * s + jy;
          paint_safe(hf, cx - 0.5 * a, cx + 0.5 * a, cy - 0.5 * a, cy + 0.5 * a);
        }
      }
      break;
    }
    case TerrainKind::SteppingBeams:
    case TerrainKind::PretrainBeams: {
      const double s = params.spacing_m;
      const double b = params.feature_m;
      if (b + params.randomness * s >= s)
        throw Error(ErrorCode::SpecInfeasible, "beam jitter can close every gap");
      const int nx = int(std::floor(band_len / s + 1e-9));
      require_lattice(s, nx, "beam");
      used_len = nx * s;
      const auto [i0, i1] = covered_cells(band_x0, band_x0 + used_len, hf.origin.x(), cell, rows);
      hf.safe.block(i0, 0, i1 - i0, cols) = false;
      for (int kx = 0; kx < nx; ++kx) {
        const double cx = band_x0 + (kx + 0.5) * s + (rng.uniform() - 0.5) * params.randomness * s;
        paint_safe(hf, cx - 0.5 * b, cx + 0.5 * b, lat0, lat1);
      }
      break;
    }
    case TerrainKind::BalanceBeams: {
      const auto [i0, i1] = covered_cells(band_x0, band_x0 + used_len, hf.origin.x(), cell, rows);
      hf.safe.block(i0, 0, i1 - i0, cols) = false;
      const double w = params.feature_m;
      paint_safe(hf, band_x0, band_x0 + used_len, -0.5 * w, 0.5 * w);
      break;
    }
    case TerrainKind::Gaps: {
      const double period = params.spacing_m;
      const int n = int(std::floor(band_len / period + 1e-9));
      require_lattice(period, n, "gap");
      used_len = n * period;
      for (int k = 0; k < n; ++k) {
        const double g0 = band_x0 + k * period + kGapPlatformM;
        const auto [i0, i1] = covered_cells(g0, g0 + params.feature_m, hf.origin.x(), cell, rows);
        hf.safe.block(i0, 0, i1 - i0, cols) = false;
      }
      break;
    }
  }

  const auto [bi0, bi1] = covered_cells(band_x0, band_x0 + used_len, hf.origin.x(), cell, rows);
  const auto [bj0, bj1] = covered_cells(lat0, lat1, hf.origin.y(), cell, cols);
  hf.structured_band = CellRect{bi0, bj0, bi1 - bi0, bj1 - bj0};

  hf.heights = hf.safe.select(GridXd::Constant(rows, cols, quantize(kSurfaceHeightM)),
                              GridXd::Constant(rows, cols, quantize(kSurfaceHeightM - kVoidDepthM)));
  return edge_distance_transform(std::move(hf));
}

double measure_sparsity(const HeightField& hf, const CellRect& band) {
  if (band.empty()) throw Error(ErrorCode::EmptyRegion, "sparsity band is empty");
  if (band.row0 < 0 || band.col0 < 0 || band.row0 + band.rows > hf.rows() ||
      band.col0 + band.cols > hf.cols())
    throw Error(ErrorCode::OutOfBounds, "sparsity band exceeds the grid");
  const auto block = hf.safe.block(band.row0, band.col0, band.rows, band.cols);
  const Eigen::Index unsafe = band.area() - block.count();
  return double(unsafe) / double(band.area());
}

MaskX edge_sources(const HeightField& hf) {
  MaskX src = !hf.safe;
  const Eigen::Index rows = hf.rows(), cols = hf.cols();
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) {
      if (!hf.safe(i, j)) continue;
      if (i + 1 < rows && hf.safe(i + 1, j) &&
          std::abs(hf.heights(i, j) - hf.heights(i + 1, j)) > kDiscontinuityM) {
        src(i, j) = true;
        src(i + 1, j) = true;
      }
      if (j + 1 < cols && hf.safe(i, j + 1) &&
          std::abs(hf.heights(i, j) - hf.heights(i, j + 1)) > kDiscontinuityM) {
        src(i, j) = true;
        src(i, j + 1) = true;
      }
    }
  }
  return src;
}

HeightField edge_distance_transform(HeightField hf, double cutoff_m) {
  const GridXd d2 = squared_distance_transform<double>(edge_sources(hf));
  constexpr double kInf = std::numeric_limits<double>::infinity();
  hf.edge_dist = d2.unaryExpr([&](double v) {
    const double d = std::sqrt(v) * hf.cell_m;
    return d > cutoff_m ? kInf : d;
  });
  return hf;
}

double point_edge_distance(const HeightField& hf, const Eigen::Vector2d& p, double search_m) {
  const auto home = hf.cell_of(p);
  if (!home || !hf.safe((*home)(0), (*home)(1))) return 0.0;
  const double cell = hf.cell_m;
  const int reach = int(std::ceil(search_m / cell)) + 1;
  const Eigen::Vector2d local = (p - hf.origin) / cell;  // continuous cell coordinates
  double best = std::numeric_limits<double>::infinity();
  auto is_source = [&](Eigen::Index i, Eigen::Index j) {
    if (!hf.safe(i, j)) return true;
    const double h = hf.heights(i, j);
    const Eigen::Index di[4] = {1, -1, 0, 0};
    const Eigen::Index dj[4] = {0, 0, 1, -1};
    for (int k = 0; k < 4; ++k) {
      const Eigen::Index a = i + di[k], b = j + dj[k];
      if (a < 0 || b < 0 || a >= hf.rows() || b >= hf.cols() || !hf.safe(a, b)) continue;
      if (std::abs(hf.heights(a, b) - h) > kDiscontinuityM) return true;
    }
    return false;
  };
  for (Eigen::Index i = (*home)(0) - reach; i <= (*home)(0) + reach; ++i) {
    for (Eigen::Index j = (*home)(1) - reach; j <= (*home)(1) + reach; ++j) {
      if (i < 0 || j < 0 || i >= hf.rows() || j >= hf.cols()) continue;
      if (!is_source(i, j)) continue;
      const double dx = std::max({double(i) - local.x(), 0.0, local.x() - double(i + 1)});
      const double dy = std::max({double(j) - local.y(), 0.0, local.y() - double(j + 1)});
      best = std::min(best, std::hypot(dx, dy) * cell);
    }
  }
  return best <= search_m ? best : std::numeric_limits<double>::infinity();
}

std::vector<TerrainSpec> curriculum_terrains(const CurriculumStage& stage, std::uint64_t seed) {
  std::vector<TerrainSpec> specs;
  const std::uint64_t level_seed = hash_combine(seed, std::uint64_t(stage.level));
  auto add = [&](TerrainKind kind, double difficulty) {
    TerrainSpec s;
    s.kind = kind;
    s.difficulty = difficulty;
    s.seed = hash_combine(level_seed, specs.size());
    specs.push_back(s);
  };
  if (stage.phase == CurriculumPhase::Base) {
    const double d = 0.3 * double(stage.level + 1) / double(std::max(1, stage.base_levels));
    add(TerrainKind::Flat, 0.0);
    add(TerrainKind::PretrainStones, std::min(d, 0.3));
    add(TerrainKind::PretrainBeams, std::min(d, 0.3));
  } else {
    const int advanced_levels = std::max(1, stage.n_levels - stage.base_levels + 1);
    const int k = std::clamp(stage.level - stage.base_levels + 1, 1, advanced_levels);
    const double d = double(k) / double(advanced_levels);
    for (TerrainKind kind : kEvaluationKinds) add(kind, d);
  }
  return specs;
}

double measured_beam_width(const HeightField& hf, Eigen::Index row) {
  Eigen::Index best = 0, run = 0;
  for (Eigen::Index j = 0; j < hf.cols(); ++j) {
    run = hf.safe(row, j) ? run + 1 : 0;
    best = std::max(best, run);
  }
  return double(best) * hf.cell_m;
}

double measured_gap_span(const HeightField& hf, Eigen::Index col) {
  Eigen::Index best = 0, run = 0;
  for (Eigen::Index i = 0; i < hf.rows(); ++i) {
    run = hf.safe(i, col) ? 0 : run + 1;
    best = std::max(best, run);
  }
  return double(best) * hf.cell_m;
}

}  // namespace sparsefoot
