#include "doctest.h"
#include "oracles.hpp"

#include "sparsefoot/error.hpp"
#include "sparsefoot/localmap.hpp"
#include "sparsefoot/rng.hpp"

#include <cmath>
#include <vector>

using namespace sparsefoot;

namespace {

// Safe below x = 2 m, void beyond.
HeightField cliff_field() {
  HeightField hf;
  hf.cell_m = 0.05;
  hf.origin = Eigen::Vector2d(0.0, -1.0);
  hf.safe = MaskX::Constant(80, 40, true);
  hf.safe.bottomRows(40) = false;
  hf.heights = hf.safe.select(GridXd::Zero(80, 40), GridXd::Constant(80, 40, -0.5));
  return edge_distance_transform(hf);
}

FootState foot_at(double x, double y, bool contact = true) {
  FootState f;
  f.position = Eigen::Vector3d(x, y, 0.0);
  f.contact = contact;
  return f;
}

}  // namespace

TEST_CASE("window geometry") {
  CHECK(kMapRows * kMapCellM == doctest::Approx(kMapBackM + kMapFrontM));
  CHECK(kMapCols * kMapCellM == doctest::Approx(2 * kMapHalfWidthM));
  CHECK(LocalHeightmap::cell_center(0, 0).isApprox(Eigen::Vector2d(-0.475, -0.375)));
  CHECK(LocalHeightmap::cell_center(31, 15).isApprox(Eigen::Vector2d(1.075, 0.375)));
  CHECK(LocalHeightmap::cell_of(Eigen::Vector2d(0.0, 0.0)) == Eigen::Vector2i(10, 8));
  CHECK(LocalHeightmap::cell_of(Eigen::Vector2d(-0.5, -0.4)) == Eigen::Vector2i(0, 0));
  CHECK(LocalHeightmap::cell_of(Eigen::Vector2d(1.1, 0.0)).x() == -1);
  CHECK(LocalHeightmap::cell_of(Eigen::Vector2d(0.0, 0.4)).x() == -1);
  for (int i = 0; i < kMapRows; ++i)
    for (int j = 0; j < kMapCols; ++j)
      REQUIRE(LocalHeightmap::cell_of(LocalHeightmap::cell_center(i, j)) == Eigen::Vector2i(i, j));
}

TEST_CASE("sample_gt matches per-cell lookup on random poses") {
  TerrainSpec spec;
  spec.kind = TerrainKind::SteppingStones;
  spec.seed = 4;
  const HeightField hf = generate(spec);
  Rng rng(2);
  for (int k = 0; k < 200; ++k) {
    RobotPose pose;
    pose.position = Eigen::Vector3d(rng.uniform(-0.5, 6.5), rng.uniform(-2.5, 2.5), rng.uniform(0.2, 0.4));
    pose.yaw_rad = rng.uniform(-3.2, 3.2);
    LocalHeightmap map;
    try {
      map = sample_gt(hf, pose);
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::OutOfBounds);
      continue;
    }
    for (int i = 0; i < kMapRows; ++i) {
      for (int j = 0; j < kMapCols; ++j) {
        const auto cell = oracle::sample_gt_cell(hf, pose, i, j);
        REQUIRE(map.valid(i, j) == cell.valid);
        if (cell.valid) REQUIRE(map.heights(i, j) == cell.height);
      }
    }
  }
}

TEST_CASE("sample_gt: flat ground reads minus the base height") {
  TerrainSpec spec;
  const HeightField hf = generate(spec);
  RobotPose pose;
  pose.position = Eigen::Vector3d(3.0, 0.0, 0.3);
  for (auto mode : {SamplingMode::Nearest, SamplingMode::Bilinear}) {
    const auto map = sample_gt(hf, pose, mode);
    CHECK(map.valid.all());
    CHECK(((map.heights + 0.3).abs() < 1e-12).all());
  }
  pose.position.x() = 50.0;
  CHECK_THROWS_AS(sample_gt(hf, pose), Error);
  // Partly off the terrain: only those cells are invalid.
  pose.position.x() = 0.2;
  const auto partial = sample_gt(hf, pose);
  CHECK_FALSE(partial.valid.row(0).any());
  CHECK(partial.valid.row(31).all());
}

TEST_CASE("bilinear sampling interpolates between centers") {
  HeightField hf;
  hf.cell_m = 0.05;
  hf.origin = Eigen::Vector2d(-1.0, -1.0);
  hf.heights.resize(80, 40);
  for (int i = 0; i < 80; ++i) hf.heights.row(i).setConstant(0.01 * i);  // linear ramp in x
  hf.safe = MaskX::Constant(80, 40, true);
  RobotPose pose;
  pose.position = Eigen::Vector3d(0.5, 0.0, 0.3);
  const auto map = sample_gt(hf, pose, SamplingMode::Bilinear);
  for (int i = 0; i < kMapRows; ++i) {
    const double x = 0.5 + LocalHeightmap::cell_center(i, 0).x();
    const double expected = 0.01 * ((x + 1.0) / 0.05 - 0.5) - 0.3;
    CHECK(map.heights(i, 3) == doctest::Approx(expected));
  }
}

TEST_CASE("edge ramp") {
  CHECK(edge_ramp(0.0) == 1.0);
  CHECK(edge_ramp(0.025) == doctest::Approx(0.5));
  CHECK(edge_ramp(0.05) == 0.0);
  CHECK(edge_ramp(1.0) == 0.0);
  CHECK(edge_ramp(INFINITY) == 0.0);
}

TEST_CASE("edge penalty: linear inside the band, zero outside") {
  const HeightField hf = cliff_field();
  for (int k = 0; k <= 10; ++k) {
    const double d = 0.005 * k;
    const FootState f = foot_at(2.0 - d, 0.0);
    CHECK(edge_penalty(std::span(&f, 1), hf) == doctest::Approx(-(1.0 - d / 0.05)).epsilon(1e-9));
  }
  const std::vector<FootState> feet = {foot_at(2.0, 0.0), foot_at(2.0, 0.3), foot_at(2.0, -0.3, false),
                                       foot_at(1.0, 0.0)};
  CHECK(edge_penalty(feet, hf) == -2.0);
  const FootState void_foot = foot_at(2.5, 0.0);
  CHECK(edge_penalty(std::span(&void_foot, 1), hf) == -1.0);
}

TEST_CASE("mean edge violation matches enumeration") {
  TerrainSpec spec;
  spec.kind = TerrainKind::SteppingStones;
  spec.seed = 12;
  const HeightField hf = generate(spec);
  Rng rng(8);
  for (int trial = 0; trial < 10; ++trial) {
    FootstepLog log;
    const int n = 1 + int(rng.next() % 60);
    for (int k = 0; k < n; ++k)
      log.push_back({k, foot_at(rng.uniform(0.8, 5.2), rng.uniform(-1.5, 1.5))});
    CHECK(mean_edge_violation(log, hf) == oracle::ref_mev(log, hf));
  }
  CHECK_THROWS_AS(mean_edge_violation({}, hf), Error);
}
