#include "sparsefoot/cli.hpp"

#include "sparsefoot/error.hpp"
#include "sparsefoot/harness.hpp"
#include "sparsefoot/io.hpp"
#include "sparsefoot/rng.hpp"
#include "sparsefoot/schedule.hpp"
#include "sparsefoot/terrain.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <ostream>
#include <sstream>

namespace sparsefoot {

namespace {

namespace fs = std::filesystem;

// Thrown for a failed property gate; carries the report already written.
struct GateFailure {
  std::string message;
};

std::vector<ConfigKey> terrain_keys(std::string_view kind) {
  return {
      {"seed", "0", "global seed; every random stream derives from it"},
      {"kind", std::string(kind), "terrain family"},
      {"difficulty", "1.0", "difficulty in [0, 1]"},
      {"length_m", "6.0", "course length"},
      {"width_m", "4.0", "course width"},
      {"cell_m", "0.05", "heightfield resolution"},
  };
}

std::vector<ConfigKey> sensing_keys() {
  return {
      {"camera_width", "96", "depth image width in pixels"},
      {"camera_height", "64", "depth image height in pixels"},
      {"noise_sigma", "0.0", "depth noise standard deviation (m)"},
      {"dropout", "0.0", "per-pixel dropout probability"},
      {"odo_sigma_m", "0.0", "odometry translation noise per tick (m)"},
      {"odo_yaw_sigma_rad", "0.0", "odometry yaw noise per tick (rad)"},
  };
}

std::vector<ConfigKey> evaluation_keys() {
  auto keys = sensing_keys();
  keys.insert(keys.begin(),
              {
                  {"seed", "0", "global seed; every random stream derives from it"},
                  {"kinds", "stepping_stones,stepping_beams,balance_beams,gaps", "terrain families"},
                  {"difficulties", "0.5,0.75,1.0", "difficulty levels"},
                  {"perceptions", "ground_truth,reconstructed,blind", "perception sources"},
                  {"n_seeds", "10", "episodes per (kind, difficulty, perception)"},
                  {"length_m", "6.0", "course length"},
                  {"width_m", "4.0", "course width"},
                  {"nominal_step_m", "0.20", "walker stride"},
                  {"edge_margin_weight", "2.0", "planner weight on edge clearance (0 ignores edges)"},
                  {"forward_weight", "1.0", "planner weight on forward progress"},
                  {"max_ticks", "3000", "episode time limit in policy ticks"},
                  {"check_ordering", "off", "exit 3 when success(GT) >= success(RC) >= success(Blind) fails"},
              });
  return keys;
}

std::vector<ConfigKey> keys_for(const std::string& command) {
  if (command == "generate") return terrain_keys("stepping_stones");
  if (command == "walk") {
    auto keys = terrain_keys("flat");
    auto more = sensing_keys();
    keys.insert(keys.end(), more.begin(), more.end());
    keys.push_back({"start_x_m", "0.70", "start position along the course"});
    keys.push_back({"lateral_m", "0.0", "lateral offset of the trajectory"});
    keys.push_back({"distance_m", "4.0", "distance walked"});
    keys.push_back({"speed_mps", "0.5", "walking speed"});
    keys.push_back({"dump_depth", "off", "write every depth frame as a 16-bit PGM"});
    return keys;
  }
  if (command == "evaluate") return evaluation_keys();
  if (command == "sweep") {
    auto keys = evaluation_keys();
    keys.push_back({"sweep_key", "edge_margin_weight", "key varied by the sweep"});
    keys.push_back({"sweep_values", "0,2", "values taken by sweep_key"});
    return keys;
  }
  if (command == "report") {
    return {
        {"input", "", "evaluation CSV (default: <out>/evaluation.csv)"},
        {"check_ordering", "off", "exit 3 on a perception ordering violation"},
    };
  }
  if (command == "curriculum") {
    return {
        {"seed", "0", "global seed; every random stream derives from it"},
        {"episodes", "600", "scripted training episodes"},
        {"window", "100", "reward window length"},
        {"promote_every", "50", "episodes between promotion checks"},
        {"promote_threshold", "0.8", "mean traversing rate needed to advance"},
        {"n_levels", "5", "terminal curriculum level"},
        {"base_levels", "1", "levels spent in the base phase"},
        {"learning_rate", "0.004", "skill gained per episode by the scripted learner"},
    };
  }
  throw Error(ErrorCode::ConfigError, "unknown command '" + command + "'");
}

struct Context {
  RunConfig config;
  fs::path out;
  std::ostream& log;
};

// Config values turned into domain structs. InvalidSpec here is a config error.
template <typename F>
auto as_config(F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    if (e.code() == ErrorCode::InvalidSpec) throw Error(ErrorCode::ConfigError, e.what());
    throw;
  }
}

TerrainSpec terrain_from(const RunConfig& c) {
  return as_config([&] {
    TerrainSpec s;
    s.kind = parse_terrain_kind(c.get("kind"));
    s.difficulty = c.get_double("difficulty");
    s.seed = c.get_uint("seed");
    s.length_m = c.get_double("length_m");
    s.width_m = c.get_double("width_m");
    s.cell_m = c.get_double("cell_m");
    s.validate();
    return s;
  });
}

CameraModel camera_from(const RunConfig& c) {
  return as_config([&] {
    CameraModel cam;
    cam.width_px = int(c.get_int("camera_width"));
    cam.height_px = int(c.get_int("camera_height"));
    cam.validate();
    return cam;
  });
}

NoiseModel noise_from(const RunConfig& c) {
  NoiseModel n;
  n.gaussian_sigma_m = c.get_double("noise_sigma");
  n.dropout_prob = c.get_double("dropout");
  n.seed = substream(c.get_uint("seed"), "noise");
  if (!(n.gaussian_sigma_m >= 0.0)) throw Error(ErrorCode::ConfigError, "key 'noise_sigma' must be >= 0");
  if (!(n.dropout_prob >= 0.0 && n.dropout_prob <= 1.0))
    throw Error(ErrorCode::ConfigError, "key 'dropout' must lie in [0, 1]");
  return n;
}

OdometryNoise odometry_from(const RunConfig& c) {
  OdometryNoise o;
  o.translation_sigma_m = c.get_double("odo_sigma_m");
  o.yaw_sigma_rad = c.get_double("odo_yaw_sigma_rad");
  o.seed = substream(c.get_uint("seed"), "odometry");
  if (!(o.translation_sigma_m >= 0.0) || !(o.yaw_sigma_rad >= 0.0))
    throw Error(ErrorCode::ConfigError, "odometry noise keys must be >= 0");
  return o;
}

void write_grid_csv(const fs::path& path, const auto& grid) {
  std::ostringstream ss;
  write_csv_grid(ss, grid);
  write_text_file(path, ss.str());
}

void write_resolved(const Context& ctx) { write_text_file(ctx.out / "config.resolved.txt", ctx.config.resolved_text()); }

int cmd_generate(Context& ctx) {
  const TerrainSpec spec = terrain_from(ctx.config);
  const HeightField hf = generate(spec);
  write_pgm16_affine(ctx.out / "heightfield.pgm", hf.heights);
  write_grid_csv(ctx.out / "heightfield.csv", hf.heights);
  write_pgm_mask(ctx.out / "safety.pgm", hf.safe);
  write_grid_csv(ctx.out / "edge_dist.csv", hf.edge_dist);
  write_resolved(ctx);
  ctx.log << "generated " << to_string(spec.kind) << " " << hf.rows() << "x" << hf.cols()
          << " band sparsity " << format_double(measure_sparsity(hf, hf.structured_band), 4) << "\n";
  return kExitOk;
}

int cmd_walk(Context& ctx) {
  const RunConfig& c = ctx.config;
  TerrainSpec spec = terrain_from(c);
  spec.length_m += kCourseExtensionM;
  TraverseOptions opt;
  opt.camera = camera_from(c);
  opt.start_x_m = c.get_double("start_x_m");
  opt.lateral_m = c.get_double("lateral_m");
  opt.distance_m = c.get_double("distance_m");
  opt.speed_mps = c.get_double("speed_mps");
  if (!(opt.speed_mps > 0.0) || !(opt.distance_m >= 0.0))
    throw Error(ErrorCode::ConfigError, "keys 'speed_mps' and 'distance_m' must be positive");
  const bool dump = c.get_bool("dump_depth");
  const NoiseModel noise = noise_from(c);
  const OdometryNoise odo = odometry_from(c);

  const HeightField hf = generate(spec);
  std::vector<std::pair<std::int64_t, GridXd>> frames;
  FrameCallback keep;
  if (dump) keep = [&](std::int64_t tick, const DepthImage& img) { frames.emplace_back(tick, img.ranges); };
  const TraverseResult r = scripted_traverse(hf, noise, odo, opt, keep);

  std::ostringstream trace;
  trace << "tick,mae_cm,valid_fraction\n";
  for (const auto& s : r.trace)
    trace << s.tick << ',' << format_double(s.mae_cm) << ',' << format_double(s.valid_fraction) << '\n';
  write_text_file(ctx.out / "mae_trace.csv", trace.str());
  write_grid_csv(ctx.out / "recon_heights.csv", r.final_refined.heights);
  write_grid_csv(ctx.out / "recon_valid.csv", r.final_refined.valid);
  write_grid_csv(ctx.out / "gt_heights.csv", r.final_gt.heights);
  write_grid_csv(ctx.out / "gt_valid.csv", r.final_gt.valid);
  std::ostringstream mem, valid, age;
  write_state_snapshot(mem, valid, age, r.final_state);
  write_text_file(ctx.out / "memory_heights.csv", mem.str());
  write_text_file(ctx.out / "memory_valid.csv", valid.str());
  write_text_file(ctx.out / "memory_age.csv", age.str());
  for (const auto& [tick, ranges] : frames) {
    char name[32];
    std::snprintf(name, sizeof name, "depth_%06lld.pgm", static_cast<long long>(tick));
    write_pgm16_quantized(ctx.out / "depth" / name, ranges, 0.001);
  }
  write_resolved(ctx);
  ctx.log << "walk: " << r.trace.size() << " frames, final MAE "
          << format_double(r.trace.empty() ? std::nan("") : r.trace.back().mae_cm, 3) << " cm\n";
  return kExitOk;
}

struct EvalSetup {
  std::vector<TerrainSpec> specs;
  std::vector<Perception> perceptions;
  PlannerConfig planner;
  int n_seeds = 1;
  NoiseModel noise;
  OdometryNoise odo;
  EpisodeOptions options;
};

EvalSetup eval_setup(const RunConfig& c) {
  return as_config([&] {
    EvalSetup s;
    for (const auto& k : c.get_list("kinds")) {
      for (double d : c.get_double_list("difficulties")) {
        TerrainSpec spec;
        spec.kind = parse_terrain_kind(k);
        spec.difficulty = d;
        spec.length_m = c.get_double("length_m");
        spec.width_m = c.get_double("width_m");
        spec.validate();
        s.specs.push_back(spec);
      }
    }
    for (const auto& p : c.get_list("perceptions")) s.perceptions.push_back(parse_perception(p));
    if (s.specs.empty() || s.perceptions.empty())
      throw Error(ErrorCode::ConfigError, "keys 'kinds', 'difficulties' and 'perceptions' must be non-empty");
    s.n_seeds = int(c.get_int("n_seeds"));
    if (s.n_seeds < 1) throw Error(ErrorCode::ConfigError, "key 'n_seeds' must be >= 1");
    s.planner.nominal_step_m = c.get_double("nominal_step_m");
    s.planner.edge_margin_weight = c.get_double("edge_margin_weight");
    s.planner.forward_weight = c.get_double("forward_weight");
    s.planner.seed = c.get_uint("seed");
    s.planner.validate();
    s.noise = noise_from(c);
    s.odo = odometry_from(c);
    s.options.camera = camera_from(c);
    s.options.course_m = std::min(kCourseM, c.get_double("length_m"));
    s.options.max_ticks = int(c.get_int("max_ticks"));
    if (s.options.max_ticks < 1) throw Error(ErrorCode::ConfigError, "key 'max_ticks' must be >= 1");
    return s;
  });
}

std::vector<AggregateRow> run_evaluation(const EvalSetup& s) {
  std::vector<AggregateRow> rows;
  for (const TerrainSpec& spec : s.specs) {
    for (Perception p : s.perceptions) {
      PlannerConfig planner = s.planner;
      planner.perception = p;
      auto r = evaluate({spec}, planner, s.n_seeds, s.noise, s.odo, s.options);
      rows.insert(rows.end(), r.begin(), r.end());
    }
  }
  return rows;
}

std::string summarize(const std::vector<AggregateRow>& rows, const std::vector<std::string>& violations) {
  std::ostringstream ss;
  ss << "kind              difficulty  perception     success  trav_mean  trav_sd    mev      mae_cm\n";
  for (const auto& r : rows) {
    char line[160];
    std::snprintf(line, sizeof line, "%-17s %-11s %-14s %-8s %-10s %-10s %-8s %s\n",
                  std::string(to_string(r.kind)).c_str(), format_double(r.difficulty, 3).c_str(),
                  std::string(to_string(r.perception)).c_str(), format_double(r.success_rate, 3).c_str(),
                  format_double(r.trav_mean, 3).c_str(), format_double(r.trav_sd, 3).c_str(),
                  format_double(r.mev, 3).c_str(), format_double(r.mae_cm, 2).c_str());
    ss << line;
  }
  if (violations.empty()) {
    ss << "\nperception ordering: holds in every cell\n";
  } else {
    ss << "\nperception ordering violations:\n";
    for (const auto& v : violations) ss << "  " << v << '\n';
  }
  return ss.str();
}

int gate(const Context& ctx, const std::vector<std::string>& violations) {
  if (!violations.empty() && ctx.config.get_bool("check_ordering"))
    throw GateFailure{std::to_string(violations.size()) + " perception ordering violation(s)"};
  return kExitOk;
}

int cmd_evaluate(Context& ctx) {
  const EvalSetup setup = eval_setup(ctx.config);
  ctx.config.get_bool("check_ordering");  // fail on a bad value before the long run
  const auto rows = run_evaluation(setup);
  std::ostringstream csv;
  write_aggregate_csv(csv, rows);
  const auto violations = ordering_violations(rows);
  write_text_file(ctx.out / "evaluation.csv", csv.str());
  write_text_file(ctx.out / "summary.txt", summarize(rows, violations));
  write_resolved(ctx);
  ctx.log << "evaluate: " << rows.size() << " rows, " << violations.size() << " ordering violation(s)\n";
  return gate(ctx, violations);
}

int cmd_sweep(Context& ctx) {
  const std::string key = ctx.config.get("sweep_key");
  if (key == "sweep_key" || key == "sweep_values" || key == "check_ordering" || !ctx.config.has_key(key))
    throw Error(ErrorCode::ConfigError, "key 'sweep_key' names no sweepable key: '" + key + "'");
  const auto values = ctx.config.get_list("sweep_values");
  if (values.empty()) throw Error(ErrorCode::ConfigError, "key 'sweep_values' is empty");
  ctx.config.get_bool("check_ordering");

  std::ostringstream csv;
  csv << "sweep_key,sweep_value,";
  bool header = false;
  std::vector<std::string> violations;
  std::ostringstream summary;
  for (const auto& v : values) {
    RunConfig c = ctx.config;
    c.set(key, v);
    const auto rows = run_evaluation(eval_setup(c));
    std::ostringstream part;
    write_aggregate_csv(part, rows);
    std::string text = part.str();
    const auto nl = text.find('\n');
    if (!header) {
      csv << text.substr(0, nl + 1);
      header = true;
    }
    std::istringstream body(text.substr(nl + 1));
    for (std::string line; std::getline(body, line);) csv << key << ',' << v << ',' << line << '\n';
    auto vs = ordering_violations(rows);
    summary << "== " << key << " = " << v << " ==\n" << summarize(rows, vs) << '\n';
    for (auto& s : vs) violations.push_back(key + "=" + v + ": " + s);
  }
  write_text_file(ctx.out / "sweep.csv", csv.str());
  write_text_file(ctx.out / "summary.txt", summary.str());
  write_resolved(ctx);
  ctx.log << "sweep: " << values.size() << " value(s) of " << key << "\n";
  return gate(ctx, violations);
}

int cmd_report(Context& ctx) {
  fs::path input = ctx.config.get("input");
  if (input.empty()) input = ctx.out / "evaluation.csv";
  std::ifstream in(input);
  if (!in) throw Error(ErrorCode::IoError, "cannot read " + input.string());
  ctx.config.get_bool("check_ordering");
  const auto rows = read_aggregate_csv(in);
  const auto violations = ordering_violations(rows);

  // Success and traversing rate per (kind, difficulty), one column per perception.
  std::ostringstream md;
  md << "# Evaluation report\n\n| kind | difficulty | perception | success | traversing | MEV | MAE (cm) |\n"
     << "|---|---|---|---|---|---|---|\n";
  for (const auto& r : rows) {
    md << "| " << to_string(r.kind) << " | " << format_double(r.difficulty, 2) << " | " << to_string(r.perception)
       << " | " << format_double(r.success_rate, 3) << " | " << format_double(r.trav_mean, 3) << " ± "
       << format_double(r.trav_sd, 3) << " | " << format_double(r.mev, 3) << " | "
       << (std::isnan(r.mae_cm) ? std::string("-") : format_double(r.mae_cm, 2)) << " |\n";
  }
  md << "\n## Perception ordering\n\n";
  if (violations.empty()) md << "success(ground_truth) >= success(reconstructed) >= success(blind) in every cell.\n";
  for (const auto& v : violations) md << "- " << v << '\n';
  write_text_file(ctx.out / "report.md", md.str());
  write_resolved(ctx);
  ctx.log << "report: " << rows.size() << " rows\n";
  return gate(ctx, violations);
}

// Scripted learner: its traversing rate rises with practice and falls with
// the curriculum level, with Gaussian spread.
int cmd_curriculum(Context& ctx) {
  const RunConfig& c = ctx.config;
  const std::int64_t episodes = c.get_int("episodes");
  const auto window = c.get_int("window");
  const auto promote_every = c.get_int("promote_every");
  if (episodes < 1 || window < 2 || promote_every < 1)
    throw Error(ErrorCode::ConfigError, "keys 'episodes', 'window' (>= 2) and 'promote_every' must be positive");
  CurriculumStage stage;
  stage.n_levels = int(c.get_int("n_levels"));
  stage.base_levels = int(c.get_int("base_levels"));
  stage.promote_threshold = c.get_double("promote_threshold");
  stage.window = RewardWindow(std::size_t(window));
  if (stage.n_levels < 1 || stage.base_levels < 0 || stage.base_levels > stage.n_levels)
    throw Error(ErrorCode::ConfigError, "keys 'n_levels'/'base_levels' must satisfy 0 <= base <= n, n >= 1");
  const double rate = c.get_double("learning_rate");
  const std::uint64_t seed = c.get_uint("seed");
  Rng learner(substream(seed, "learner"));
  Rng sampler(substream(seed, "scheduler"));

  std::vector<ScheduleTraceRow> rows;
  RewardWindow rewards{std::size_t(window)};
  double skill = 0.0;
  for (std::int64_t e = 0; e < episodes; ++e) {
    ScheduleTraceRow row;
    row.episode = e;
    row.mean = rewards.mean();
    row.std = rewards.sample_std();
    row.cv = rewards.count() >= 2 ? coefficient_of_variation(rewards) : kCvCap;
    row.p_smpl = std::tanh(row.cv);
    row.source = sample_source(row.p_smpl, sampler);
    row.phase = stage.phase;
    row.level = stage.level;
    rows.push_back(row);

    skill += rate;
    const double difficulty = double(stage.level) / stage.n_levels;
    const double trav = std::clamp(0.55 + skill - 0.6 * difficulty + 0.1 * learner.normal(), 0.0, 1.0);
    rewards.push(trav);
    stage.window.push(trav);
    if ((e + 1) % promote_every == 0) {
      const CurriculumStage next = curriculum_step(stage, stage.window.mean());
      if (next.level != stage.level) {
        stage = next;
        stage.window.clear();
      }
    }
  }
  std::ostringstream csv;
  write_schedule_trace(csv, rows);
  write_text_file(ctx.out / "schedule_trace.csv", csv.str());
  write_resolved(ctx);
  ctx.log << "curriculum: " << rows.size() << " episodes, final level " << stage.level << "\n";
  return kExitOk;
}

const std::map<std::string, std::function<int(Context&)>>& commands() {
  static const std::map<std::string, std::function<int(Context&)>> table = {
      {"generate", cmd_generate}, {"walk", cmd_walk},     {"evaluate", cmd_evaluate},
      {"sweep", cmd_sweep},       {"report", cmd_report}, {"curriculum", cmd_curriculum},
  };
  return table;
}

// `--some-key value` pairs; a key followed by another flag (or nothing) is `on`.
std::vector<std::pair<std::string, std::string>> parse_overrides(const std::vector<std::string>& extras) {
  std::vector<std::pair<std::string, std::string>> out;
  for (std::size_t k = 0; k < extras.size(); ++k) {
    const std::string& tok = extras[k];
    if (tok.rfind("--", 0) != 0 || tok.size() < 3)
      throw Error(ErrorCode::ConfigError, "unexpected argument '" + tok + "'");
    std::string key = tok.substr(2), value;
    if (const auto eq = key.find('='); eq != std::string::npos) {
      value = key.substr(eq + 1);
      key.resize(eq);
    } else if (k + 1 < extras.size() && extras[k + 1].rfind("--", 0) != 0) {
      value = extras[++k];
    } else {
      value = "on";
    }
    std::replace(key.begin(), key.end(), '-', '_');
    out.emplace_back(key, value);
  }
  return out;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"sparsefoot: sparse-foothold terrain, perception and evaluation tools", "sparsefoot"};
  app.require_subcommand(1, 1);
  std::string config_path;
  std::string out_dir = "out";
  std::vector<std::pair<std::string, CLI::App*>> subs;
  for (const auto& [name, fn] : commands()) {
    static const std::map<std::string, std::string> about = {
        {"generate", "build one terrain and write its height, safety and edge-distance grids"},
        {"walk", "scripted straight walk with the reconstructor; writes snapshots and the MAE trace"},
        {"evaluate", "run episodes over kinds x difficulties x perceptions; writes the aggregate CSV"},
        {"sweep", "repeat evaluate over the values of one config key"},
        {"report", "render an aggregate CSV as markdown and check perception ordering"},
        {"curriculum", "simulate the adaptive-sampling schedule and curriculum stages"},
    };
    CLI::App* sub = app.add_subcommand(name, about.at(name));
    sub->allow_extras();
    sub->add_option("--config", config_path, "flat key = value config file");
    sub->add_option("--out", out_dir, "output directory");
    std::ostringstream help;
    for (const auto& k : keys_for(name)) help << "  --" << k.name << " (" << k.default_value << "): " << k.help << '\n';
    sub->footer("Keys:\n" + help.str());
    subs.emplace_back(name, sub);
  }

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    std::ostringstream o, eo;
    const int rc = app.exit(e, o, eo);
    out << o.str();
    err << eo.str();
    return rc == 0 ? kExitOk : kExitConfig;
  }

  for (const auto& [name, sub] : subs) {
    if (!sub->parsed()) continue;
    try {
      RunConfig config(keys_for(name));
      if (!config_path.empty()) config.merge_file(config_path);
      for (const auto& [key, value] : parse_overrides(sub->remaining())) config.set(key, value);
      Context ctx{std::move(config), fs::path(out_dir), out};
      return commands().at(name)(ctx);
    } catch (const GateFailure& g) {
      err << "error: " << g.message << '\n';
      return kExitPropertyGate;
    } catch (const Error& e) {
      err << "error: " << e.what() << '\n';
      return e.code() == ErrorCode::ConfigError ? kExitConfig : kExitRuntime;
    } catch (const std::exception& e) {
      err << "error: " << e.what() << '\n';
      return kExitRuntime;
    }
  }
  return kExitConfig;
}

}  // namespace sparsefoot
