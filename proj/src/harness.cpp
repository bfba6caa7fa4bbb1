#include "sparsefoot/harness.hpp"

#include "sparsefoot/error.hpp"
#include "sparsefoot/io.hpp"
#include "sparsefoot/rng.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <deque>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>

namespace sparsefoot {

namespace {

constexpr std::array<std::pair<Perception, std::string_view>, 3> kPerceptionNames{{
    {Perception::GroundTruth, "ground_truth"},
    {Perception::Reconstructed, "reconstructed"},
    {Perception::Blind, "blind"},
}};

struct FootGeometry {
  FootId id;
  double hip_x;
  double hip_y;
};

constexpr std::array<FootGeometry, 4> kFeet{{
    {FootId::FL, kHipLongM, kHipLatM},
    {FootId::FR, kHipLongM, -kHipLatM},
    {FootId::RL, -kHipLongM, kHipLatM},
    {FootId::RR, -kHipLongM, -kHipLatM},
}};

// Trot pairs as indices into kFeet.
constexpr std::array<std::array<int, 2>, 2> kPairs{{{0, 3}, {1, 2}}};

constexpr double kTieEps = 1e-12;

}  // namespace

std::string_view to_string(Perception perception) {
  for (const auto& [p, name] : kPerceptionNames)
    if (p == perception) return name;
  return "unknown";
}

Perception parse_perception(std::string_view name) {
  for (const auto& [p, n] : kPerceptionNames)
    if (n == name) return p;
  throw Error(ErrorCode::InvalidSpec, "unknown perception '" + std::string(name) + "'");
}

std::string_view to_string(Termination t) {
  switch (t) {
    case Termination::Success: return "success";
    case Termination::Fall: return "fall";
    case Termination::Stall: return "stall";
    case Termination::Timeout: return "timeout";
  }
  return "unknown";
}

void PlannerConfig::validate() const {
  if (!(reach.long_m > 0.0) || !(reach.lat_m > 0.0))
    throw Error(ErrorCode::InvalidSpec, "reach window must be positive");
  if (!(edge_margin_weight >= 0.0) || !std::isfinite(edge_margin_weight))
    throw Error(ErrorCode::InvalidSpec, "edge_margin_weight must be finite and >= 0");
  if (!(forward_weight >= 0.0) || !std::isfinite(forward_weight))
    throw Error(ErrorCode::InvalidSpec, "forward_weight must be finite and >= 0");
  if (!(nominal_step_m > 0.0) || !std::isfinite(nominal_step_m))
    throw Error(ErrorCode::InvalidSpec, "nominal_step_m must be positive");
}

FootholdEstimate estimate_footholds(const LocalHeightmap& map, double support_height) {
  FootholdEstimate est;
  est.known = map.valid;
  est.safe = map.valid && ((map.heights - support_height).abs() <= kDiscontinuityM);
  const int reach = int(std::ceil(kEdgeScoreCapM / kMapCellM)) + 1;
  for (int i = 0; i < kMapRows; ++i) {
    for (int j = 0; j < kMapCols; ++j) {
      if (!est.safe(i, j)) continue;
      double best = kEdgeScoreCapM;
      for (int a = std::max(0, i - reach); a <= std::min(kMapRows - 1, i + reach); ++a) {
        for (int b = std::max(0, j - reach); b <= std::min(kMapCols - 1, j + reach); ++b) {
          if (est.safe(a, b)) continue;
          const double dx = std::max(std::abs(a - i) - 0.5, 0.0);
          const double dy = std::max(std::abs(b - j) - 0.5, 0.0);
          best = std::min(best, std::hypot(dx, dy) * kMapCellM);
        }
      }
      est.edge_dist(i, j) = best;
    }
  }
  return est;
}

Eigen::Vector2d plan_step(const FootholdEstimate& est, const PlannerConfig& planner, FootId,
                          const Eigen::Vector2d& nominal) {
  if (LocalHeightmap::cell_of(nominal).x() < 0)
    throw Error(ErrorCode::OutOfBounds, "nominal foothold lies outside the local map");
  if (planner.perception == Perception::Blind) return nominal;
  constexpr double eps = 1e-9;
  auto in_window = [&](const Eigen::Vector2d& c) {
    return std::abs(c.x() - nominal.x()) <= planner.reach.long_m + eps &&
           std::abs(c.y() - nominal.y()) <= planner.reach.lat_m + eps;
  };
  if (planner.perception == Perception::Reconstructed) {
    bool any_known = false;
    for (int i = 0; i < kMapRows && !any_known; ++i)
      for (int j = 0; j < kMapCols && !any_known; ++j)
        any_known = est.known(i, j) && in_window(LocalHeightmap::cell_center(i, j));
    // Nothing seen there yet (e.g. under the body at the start): step blind.
    if (!any_known) return nominal;
  }
  bool found = false;
  double best_score = 0.0, best_x = 0.0, best_offset = 0.0;
  Eigen::Vector2d best(0.0, 0.0);
  for (int i = 0; i < kMapRows; ++i) {
    for (int j = 0; j < kMapCols; ++j) {
      if (!est.safe(i, j)) continue;
      const Eigen::Vector2d c = LocalHeightmap::cell_center(i, j);
      if (!in_window(c)) continue;
      const double score = planner.forward_weight * c.x() +
                           planner.edge_margin_weight * std::min(est.edge_dist(i, j), kEdgeScoreCapM);
      const double offset = std::abs(c.y() - nominal.y());
      // Cells are visited in increasing index, so strict comparisons keep the
      // lower index on a full tie.
      bool better = !found || score > best_score + kTieEps;
      if (!better && std::abs(score - best_score) <= kTieEps) {
        better = c.x() > best_x + kTieEps ||
                 (std::abs(c.x() - best_x) <= kTieEps && offset < best_offset - kTieEps);
      }
      if (better) {
        found = true;
        best_score = score;
        best_x = c.x();
        best_offset = offset;
        best = c;
      }
    }
  }
  if (!found) throw Error(ErrorCode::NoFoothold, "no estimated-safe cell in the reach window");
  return best;
}

Eigen::Vector2d plan_step(const LocalHeightmap& map, const PlannerConfig& planner, FootId foot,
                          const Eigen::Vector2d& nominal) {
  if (planner.perception == Perception::Blind) return plan_step(FootholdEstimate{}, planner, foot, nominal);
  return plan_step(estimate_footholds(map), planner, foot, nominal);
}

double traversing_rate(double distance_m, double course_m) {
  return std::clamp(distance_m / course_m, 0.0, 1.0);
}

EpisodeResult simulate_episode(const HeightField& hf, const PlannerConfig& planner,
                               const NoiseModel& noise, const OdometryNoise& odo_noise,
                               const EpisodeOptions& options) {
  planner.validate();
  const std::int64_t depth_every = [&] {
    sensor_clock(1, options.policy_rate_hz, options.depth_rate_hz);  // validates the rates
    return std::int64_t(options.policy_rate_hz / options.depth_rate_hz);
  }();

  RobotPose pose;
  pose.position = Eigen::Vector3d(options.start_x_m, 0.0, kSurfaceHeightM + kStandingHeightM);
  std::array<Eigen::Vector3d, 4> feet;
  for (std::size_t k = 0; k < kFeet.size(); ++k)
    feet[k] = Eigen::Vector3d(options.start_x_m + kFeet[k].hip_x, kFeet[k].hip_y, kSurfaceHeightM);

  const bool reconstruct = planner.perception == Perception::Reconstructed;
  ReconstructorConfig rc_config;
  rc_config.camera = options.camera;
  std::optional<ReconstructorState> recon;
  if (reconstruct) recon = init_state(pose, rc_config);
  std::deque<DepthImage> frames;
  LocalHeightmap rough;
  RobotPose prev_pose = pose;

  EpisodeResult result;
  const double goal_x = options.start_x_m + options.course_m;
  int next_pair = 0;
  std::int64_t stall_since = -1;  // first NoFoothold tick of the current stall
  double best_x = pose.position.x();  // only net forward progress ends a stall

  struct Swing {
    int pair;
    std::array<Eigen::Vector2d, 2> targets;
    std::int64_t touchdown_tick;
    Eigen::Vector2d base_from;
    Eigen::Vector2d base_to;
  };
  std::optional<Swing> swing;

  auto finish = [&](Termination t, std::int64_t tick) {
    result.termination = t;
    result.ticks = tick;
    result.distance_m = pose.position.x() - options.start_x_m;
    result.success = t == Termination::Success;
    result.traversing_rate = result.success ? 1.0 : traversing_rate(result.distance_m, options.course_m);
    result.mev = result.footsteps.empty() ? 0.0 : mean_edge_violation(result.footsteps, hf);
    return result;
  };

  for (std::int64_t tick = 0; tick < options.max_ticks; ++tick) {
    if (reconstruct) {
      const OdometryDelta delta = perturb(odometry_between(prev_pose, pose), odo_noise, tick);
      if (tick % depth_every == 0) {
        const double stamp = double(tick) / options.policy_rate_hz;
        frames.push_back(apply_noise(render_depth(hf, pose, options.camera, stamp), noise));
        if (frames.size() > 2) frames.pop_front();
      }
      const std::vector<DepthImage> window(frames.begin(), frames.end());
      UpdateResult up = update(std::move(*recon), window, delta, pose);
      recon = std::move(up.state);
      rough = std::move(up.rough);
      if (options.record_mae && tick % depth_every == 0) {
        const LocalHeightmap gt = sample_gt(hf, pose);
        try {
          result.mae_trace.push_back(mae(refine(rough), gt));
        } catch (const Error& e) {
          if (e.code() != ErrorCode::NoValidCells) throw;
        }
      }
    }
    prev_pose = pose;

    if (tick % kTicksPerStep == 0) {
      if (swing) {
        std::array<FootState, 2> landing;
        bool fell = false;
        for (int k = 0; k < 2; ++k) {
          const int f = kPairs[swing->pair][k];
          const Eigen::Vector2d target = swing->targets[k];
          const auto h = hf.height_at(target);
          feet[f] = Eigen::Vector3d(target.x(), target.y(), h.value_or(kSurfaceHeightM - kVoidDepthM));
          landing[k] = FootState{kFeet[f].id, feet[f], true};
          result.footsteps.push_back({tick, landing[k]});
          if (!hf.safe_at(target)) fell = true;
        }
        result.reward_sum += edge_penalty(landing, hf);
        swing.reset();
        if (fell) return finish(Termination::Fall, tick);
        // Shuffling back and forth between stalls is still a stall.
        if (pose.position.x() > best_x + 1e-3) {
          best_x = pose.position.x();
          stall_since = -1;
        }
      }
      if (pose.position.x() >= goal_x) return finish(Termination::Success, tick);

      FootholdEstimate estimate;
      if (planner.perception == Perception::GroundTruth) {
        estimate = estimate_footholds(sample_gt(hf, pose));
      } else if (reconstruct) {
        estimate = estimate_footholds(refine(rough));
      }

      const int pair = next_pair;
      next_pair = 1 - next_pair;
      std::array<Eigen::Vector2d, 2> targets;
      bool stalled = false;
      for (int k = 0; k < 2 && !stalled; ++k) {
        const FootGeometry& g = kFeet[kPairs[pair][k]];
        const Eigen::Vector2d nominal(g.hip_x + 0.75 * planner.nominal_step_m, g.hip_y);
        try {
          targets[k] = pose.position.head<2>() + plan_step(estimate, planner, g.id, nominal);
        } catch (const Error& e) {
          if (e.code() != ErrorCode::NoFoothold) throw;
          stalled = true;
        }
      }
      if (stalled) {
        if (stall_since < 0) stall_since = tick;
        if (tick - stall_since >= kStallLimitTicks) return finish(Termination::Stall, tick);
      } else {
        Eigen::Vector2d centroid = Eigen::Vector2d::Zero();
        for (int f = 0; f < 4; ++f) {
          const bool swinging = f == kPairs[pair][0] || f == kPairs[pair][1];
          const int k = f == kPairs[pair][0] ? 0 : 1;
          centroid += swinging ? targets[k] : Eigen::Vector2d(feet[f].head<2>());
        }
        centroid /= 4.0;
        swing = Swing{pair, targets, tick + kTicksPerStep, pose.position.head<2>(), centroid};
      }
    }

    if (swing) {
      const double phase = double(tick + 1 - (swing->touchdown_tick - kTicksPerStep)) / kTicksPerStep;
      pose.position.head<2>() = swing->base_from + phase * (swing->base_to - swing->base_from);
    }
  }
  return finish(Termination::Timeout, options.max_ticks);
}

EpisodeResult run_episode(const TerrainSpec& spec, const PlannerConfig& planner,
                          const NoiseModel& noise, const OdometryNoise& odo_noise,
                          const EpisodeOptions& options) {
  spec.validate();
  if (spec.length_m + 1e-9 < options.course_m)
    throw Error(ErrorCode::InvalidSpec, "terrain length is shorter than the course");
  TerrainSpec extended = spec;
  extended.length_m = spec.length_m + kCourseExtensionM;
  return simulate_episode(generate(extended), planner, noise, odo_noise, options);
}

TraverseResult scripted_traverse(const HeightField& hf, const NoiseModel& noise,
                                 const OdometryNoise& odo_noise, const TraverseOptions& options,
                                 const FrameCallback& on_frame) {
  sensor_clock(1, options.policy_rate_hz, options.depth_rate_hz);
  if (!(options.speed_mps > 0.0) || !(options.distance_m >= 0.0) || options.frame_window < 1)
    throw Error(ErrorCode::InvalidSpec, "traverse needs positive speed, distance and frame window");
  const std::int64_t every = options.policy_rate_hz / options.depth_rate_hz;
  const double dx = options.speed_mps / options.policy_rate_hz;
  const auto n_ticks = std::int64_t(std::ceil(options.distance_m / dx - 1e-9)) + 1;

  RobotPose pose;
  pose.position = Eigen::Vector3d(options.start_x_m, options.lateral_m, kSurfaceHeightM + kStandingHeightM);
  if (!hf.height_at(pose.position.head<2>()) ||
      !hf.height_at(pose.position.head<2>() + Eigen::Vector2d(options.distance_m, 0.0)))
    throw Error(ErrorCode::OutOfBounds, "traverse leaves the terrain");

  ReconstructorConfig rc;
  rc.camera = options.camera;
  ReconstructorState state = init_state(pose, rc);
  RobotPose prev = pose;
  std::deque<DepthImage> frames;
  TraverseResult result;
  LocalHeightmap rough;

  for (std::int64_t tick = 0; tick < n_ticks; ++tick) {
    pose.position.x() = options.start_x_m + std::min(double(tick) * dx, options.distance_m);
    const bool fresh = tick % every == 0;
    if (fresh) {
      DepthImage img =
          apply_noise(render_depth(hf, pose, options.camera, double(tick) / options.policy_rate_hz), noise);
      if (on_frame) on_frame(tick, img);
      frames.push_back(std::move(img));
      if (int(frames.size()) > options.frame_window) frames.pop_front();
    }
    const OdometryDelta delta = perturb(odometry_between(prev, pose), odo_noise, tick);
    prev = pose;
    const std::vector<DepthImage> window(frames.begin(), frames.end());
    UpdateResult up = update(std::move(state), window, delta, pose);
    state = std::move(up.state);
    rough = std::move(up.rough);
    if (fresh || tick + 1 == n_ticks) {
      const LocalHeightmap refined = refine(rough);
      const LocalHeightmap gt = sample_gt(hf, pose);
      TraverseSample s;
      s.tick = tick;
      s.valid_fraction = refined.valid.cast<double>().mean();
      try {
        s.mae_cm = mae(refined, gt);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::NoValidCells) throw;
        s.mae_cm = std::numeric_limits<double>::quiet_NaN();
      }
      result.trace.push_back(s);
      result.final_refined = refined;
      result.final_gt = gt;
    }
  }
  result.final_state = std::move(state);
  result.final_pose = pose;
  return result;
}

AggregateRow aggregate(TerrainKind kind, double difficulty, Perception perception,
                       const std::vector<EpisodeResult>& results) {
  AggregateRow row{kind, difficulty, perception, int(results.size())};
  if (results.empty()) return row;
  double succ = 0.0, trav = 0.0, mev = 0.0, mae_sum = 0.0;
  int mae_n = 0;
  for (const auto& r : results) {
    succ += r.success ? 1.0 : 0.0;
    trav += r.traversing_rate;
    mev += r.mev;
    if (!r.mae_trace.empty()) {
      double s = 0.0;
      for (double m : r.mae_trace) s += m;
      mae_sum += s / double(r.mae_trace.size());
      ++mae_n;
    }
  }
  const double n = double(results.size());
  row.success_rate = succ / n;
  row.trav_mean = trav / n;
  row.mev = mev / n;
  row.mae_cm = mae_n ? mae_sum / mae_n : std::numeric_limits<double>::quiet_NaN();
  if (results.size() > 1) {
    double ss = 0.0;
    for (const auto& r : results) ss += (r.traversing_rate - row.trav_mean) * (r.traversing_rate - row.trav_mean);
    row.trav_sd = std::sqrt(ss / (n - 1.0));
  }
  return row;
}

std::vector<AggregateRow> evaluate(const std::vector<TerrainSpec>& specs, const PlannerConfig& planner,
                                   int n_seeds, const NoiseModel& noise, const OdometryNoise& odo_noise,
                                   const EpisodeOptions& options,
                                   std::vector<std::vector<EpisodeResult>>* episodes) {
  if (n_seeds < 1) throw Error(ErrorCode::InvalidSpec, "n_seeds must be at least 1");
  std::vector<AggregateRow> rows;
  for (const TerrainSpec& base : specs) {
    std::vector<EpisodeResult> results;
    results.reserve(std::size_t(n_seeds));
    for (int s = 0; s < n_seeds; ++s) {
      TerrainSpec spec = base;
      spec.seed = std::uint64_t(s);
      NoiseModel n = noise;
      n.seed = hash_combine(substream(noise.seed, "noise"), spec.seed);
      OdometryNoise o = odo_noise;
      o.seed = hash_combine(substream(odo_noise.seed, "odometry"), spec.seed);
      PlannerConfig p = planner;
      p.seed = hash_combine(substream(planner.seed, "planner"), spec.seed);
      results.push_back(run_episode(spec, p, n, o, options));
    }
    rows.push_back(aggregate(base.kind, base.difficulty, planner.perception, results));
    if (episodes) episodes->push_back(std::move(results));
  }
  return rows;
}

void write_aggregate_csv(std::ostream& out, const std::vector<AggregateRow>& rows) {
  out << "kind,difficulty,perception,success_rate,trav_mean,trav_sd,mev,mae_cm\n";
  for (const auto& r : rows) {
    out << to_string(r.kind) << ',' << format_double(r.difficulty, 3) << ',' << to_string(r.perception)
        << ',' << format_double(r.success_rate) << ',' << format_double(r.trav_mean) << ','
        << format_double(r.trav_sd) << ',' << format_double(r.mev) << ',' << format_double(r.mae_cm)
        << '\n';
  }
}

std::vector<AggregateRow> read_aggregate_csv(std::istream& in) {
  std::vector<AggregateRow> rows;
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::IoError, "empty aggregate CSV");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() != 8) throw Error(ErrorCode::IoError, "aggregate CSV row needs 8 fields: " + line);
    auto num = [&](const std::string& s) {
      if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
      try {
        return std::stod(s);
      } catch (const std::exception&) {
        throw Error(ErrorCode::IoError, "bad number '" + s + "' in aggregate CSV");
      }
    };
    AggregateRow r;
    try {
      r.kind = parse_terrain_kind(f[0]);
      r.perception = parse_perception(f[2]);
    } catch (const Error& e) {
      throw Error(ErrorCode::IoError, e.what());
    }
    r.difficulty = num(f[1]);
    r.success_rate = num(f[3]);
    r.trav_mean = num(f[4]);
    r.trav_sd = num(f[5]);
    r.mev = num(f[6]);
    r.mae_cm = num(f[7]);
    rows.push_back(r);
  }
  return rows;
}

void write_footstep_csv(std::ostream& out, const FootstepLog& log) {
  out << "tick,foot,x,y,z\n";
  for (const auto& td : log) {
    out << td.tick << ',' << to_string(td.foot.foot) << ',' << format_double(td.foot.position.x()) << ','
        << format_double(td.foot.position.y()) << ',' << format_double(td.foot.position.z()) << '\n';
  }
}

std::vector<std::string> ordering_violations(const std::vector<AggregateRow>& rows) {
  std::map<std::pair<std::string, std::string>, std::map<Perception, double>> cells;
  for (const auto& r : rows)
    cells[{std::string(to_string(r.kind)), format_double(r.difficulty, 3)}][r.perception] = r.success_rate;
  std::vector<std::string> out;
  for (const auto& [key, by] : cells) {
    auto check = [&](Perception hi, Perception lo) {
      const auto a = by.find(hi), b = by.find(lo);
      if (a == by.end() || b == by.end() || a->second >= b->second) return;
      out.push_back(key.first + " @ " + key.second + ": success(" + std::string(to_string(hi)) + ")=" +
                    format_double(a->second, 3) + " < success(" + std::string(to_string(lo)) +
                    ")=" + format_double(b->second, 3));
    };
    check(Perception::GroundTruth, Perception::Reconstructed);
    check(Perception::Reconstructed, Perception::Blind);
    if (by.find(Perception::Reconstructed) == by.end()) check(Perception::GroundTruth, Perception::Blind);
  }
  return out;
}

}  // namespace sparsefoot
