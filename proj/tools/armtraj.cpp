// armtraj: trajectory generation, baseline IK, evaluation, ablation, letters.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "armtraj/baseline_ik.hpp"
#include "armtraj/evaluation.hpp"
#include "armtraj/io.hpp"
#include "armtraj/optimizer.hpp"
#include "armtraj/pathgen.hpp"
#include "armtraj/robot_model.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using namespace armtraj;
using ojson = nlohmann::ordered_json;

namespace {

constexpr const char* kVersion = "armtraj 1.0.0";

struct RunConfig {
  std::string model;  // empty: built-in NICO right arm
  std::string poses;
  std::string start = "start";
  std::string end;
  std::string shape = "line";
  std::size_t n = 50;
  double duration_ms = 2000.0;
  LossWeights weights;
  OptimizerConfig opt;
  std::string out = "out";
  std::vector<std::size_t> zero;  // ablate
  std::vector<std::string> runs;  // eval
};

// Thrown with the name of the stage that failed.
struct StageError : std::runtime_error {
  StageError(const std::string& stage, const std::string& what) : std::runtime_error(stage + ": " + what) {}
};

template <typename F>
auto stage(const std::string& name, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(name, e.what());
  }
}

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(csv::parse_num(item, "list"));
  return out;
}

LossWeights parse_weights(const std::string& text) {
  const auto v = parse_list(text);
  if (v.size() != kLossTerms) throw std::invalid_argument("--weights needs exactly 7 values c0,...,c6");
  LossWeights w;
  for (std::size_t k = 0; k < kLossTerms; ++k) w.c[k] = v[k];
  return w;
}

void apply_config_file(RunConfig& rc, const std::string& path) {
  const ojson doc = detail::parse_json(detail::read_text(path), path);
  if (!doc.is_object()) throw std::invalid_argument(path + ": expected a JSON object");
  for (const auto& [key, val] : doc.items()) {
    if (key == "model") rc.model = val.get<std::string>();
    else if (key == "poses") rc.poses = val.get<std::string>();
    else if (key == "start") rc.start = val.get<std::string>();
    else if (key == "end") rc.end = val.get<std::string>();
    else if (key == "shape") rc.shape = val.get<std::string>();
    else if (key == "n") rc.n = val.get<std::size_t>();
    else if (key == "duration_ms") rc.duration_ms = val.get<double>();
    else if (key == "weights") {
      if (!val.is_array() || val.size() != kLossTerms) throw std::invalid_argument(path + ".weights: expected 7 numbers");
      for (std::size_t k = 0; k < kLossTerms; ++k) rc.weights.c[k] = val[k].get<double>();
    } else if (key == "lr") rc.opt.learning_rate = val.get<double>();
    else if (key == "max_iters") rc.opt.max_iterations = val.get<std::size_t>();
    else if (key == "stop_angle_delta") rc.opt.stop_angle_delta = val.get<double>();
    else if (key == "stop_patience") rc.opt.stop_patience = val.get<std::size_t>();
    else if (key == "stop_loss") rc.opt.stop_loss = val.get<double>();
    else if (key == "seed") rc.opt.seed = val.get<std::uint64_t>();
    else if (key == "out") rc.out = val.get<std::string>();
    else throw std::invalid_argument(path + ": unknown key '" + key + "'");
  }
}

struct Inputs {
  KinematicChain chain;
  std::optional<PoseFile> poses;
};

Inputs load_inputs(const RunConfig& rc) {
  KinematicChain chain =
      stage("model", [&] { return rc.model.empty() ? nico_right_arm() : load_model(rc.model); });
  std::optional<PoseFile> pf;
  if (!rc.poses.empty()) {
    pf = stage("poses", [&] { return load_poses(rc.poses, chain); });
    for (const auto& w : pf->warnings) std::cerr << "warning: " << w << '\n';
  }
  return {std::move(chain), std::move(pf)};
}

const Pose& named_pose(const Inputs& in, const std::string& name) {
  return stage("poses", [&]() -> const Pose& {
    if (!in.poses) throw std::invalid_argument("--poses is required to look up pose '" + name + "'");
    return in.poses->get(name);
  });
}

ShapeSpec load_shape_spec(const std::string& spec) {
  return stage("shape", [&]() -> ShapeSpec {
    if (spec == "line") return LineShape{};
    const auto colon = spec.find(':');
    if (colon == std::string::npos) throw std::invalid_argument("--shape must be line, polyline:PATH or spline:PATH");
    const std::string kind = spec.substr(0, colon), path = spec.substr(colon + 1);
    ShapeSpec s = load_shape(path);
    if ((kind == "polyline" && !std::holds_alternative<PolylineShape>(s)) ||
        (kind == "spline" && !std::holds_alternative<SplineShape>(s)) || (kind != "polyline" && kind != "spline")) {
      throw std::invalid_argument("shape file " + path + " does not hold a " + kind);
    }
    return s;
  });
}

ojson pose_json(const Pose& p) {
  ojson a = ojson::array();
  for (double v : p) a.push_back(v);
  return a;
}

ojson manifest(const std::string& command, const std::string& method, const RunConfig& rc, const Inputs& in) {
  ojson m;
  m["tool"] = kVersion;
  m["compiler"] = __VERSION__;
  m["command"] = command;
  m["method"] = method;
  ojson cfg;
  cfg["model"] = rc.model.empty() ? "<builtin nico_right_arm>" : rc.model;
  cfg["poses"] = rc.poses;
  cfg["start"] = rc.start;
  cfg["end"] = rc.end;
  cfg["shape"] = rc.shape;
  cfg["n"] = rc.n;
  cfg["duration_ms"] = rc.duration_ms;
  cfg["weights"] = ojson(std::vector<double>(rc.weights.c.begin(), rc.weights.c.end()));
  cfg["lr"] = rc.opt.learning_rate;
  cfg["max_iters"] = rc.opt.max_iterations;
  cfg["stop_angle_delta"] = rc.opt.stop_angle_delta;
  cfg["stop_patience"] = rc.opt.stop_patience;
  if (rc.opt.stop_loss) cfg["stop_loss"] = *rc.opt.stop_loss;
  cfg["adam"] = {{"beta1", rc.opt.beta1}, {"beta2", rc.opt.beta2}, {"epsilon", rc.opt.epsilon}};
  cfg["seed"] = rc.opt.seed;
  m["config"] = cfg;
  m["model"] = ojson::parse(serialize_model(in.chain));
  if (in.poses) {
    ojson poses;
    for (const std::string& name : {rc.start, rc.end}) {
      if (in.poses->contains(name)) poses[name] = pose_json(in.poses->get(name));
    }
    m["poses"] = poses;
  }
  if (in.poses && in.poses->surface_normal) {
    const Vec3d& nrm = *in.poses->surface_normal;
    m["surface_normal"] = {nrm[0], nrm[1], nrm[2]};
  }
  return m;
}

void write_file(const fs::path& p, const std::string& text) {
  stage("write", [&] {
    csv::write_text(p.string(), text);
    return 0;
  });
}

void write_solution(const fs::path& dir, const TrajectorySolution& sol, const GoalPath& goal, double duration_ms,
                    ojson man) {
  stage("write", [&] {
    fs::create_directories(dir);
    return 0;
  });
  write_file(dir / "trajectory.csv", trajectory_csv(sol.poses, sol.states));
  write_file(dir / "goal.csv", goal_csv(goal));
  write_file(dir / "velocity.csv", velocity_csv(angular_velocities(sol.poses, duration_ms)));
  if (!sol.loss_trace.empty()) write_file(dir / "loss.csv", loss_csv(sol.loss_trace));
  man["result"] = {{"iterations", sol.iterations},
                   {"converged", sol.converged},
                   {"wall_seconds", sol.wall_seconds},
                   {"final_loss", sol.loss_trace.empty() ? 0.0 : sol.loss_trace.back().total}};
  write_file(dir / "manifest.json", man.dump(2) + "\n");
}

void print_summary(const std::string& what, const TrajectorySolution& sol) {
  std::printf("%s: iterations %zu  converged %s  wall %.2f s  loss %.6g\n", what.c_str(), sol.iterations,
              sol.converged ? "yes" : "no", sol.wall_seconds,
              sol.loss_trace.empty() ? 0.0 : sol.loss_trace.back().total);
}

struct Problem {
  Pose start, end;
  ShapeSpec shape;
  GoalPath goal;
};

Problem make_problem(const RunConfig& rc, const Inputs& in) {
  if (rc.end.empty()) throw StageError("config", "--end is required");
  Problem p;
  p.start = named_pose(in, rc.start);
  p.end = named_pose(in, rc.end);
  p.shape = load_shape_spec(rc.shape);
  p.goal = stage("goal", [&] {
    return build_goal_path(p.shape, fk(in.chain, p.start).position, fk(in.chain, p.end).position, rc.n);
  });
  return p;
}

int cmd_generate(const RunConfig& rc) {
  const Inputs in = load_inputs(rc);
  const Problem p = make_problem(rc, in);
  const TrajectorySolution sol = stage("optimize", [&] {
    return generate_trajectory(in.chain, p.start, p.end, p.shape, rc.n, rc.weights, rc.opt);
  });
  write_solution(rc.out, sol, p.goal, rc.duration_ms, manifest("generate", "neural", rc, in));
  print_summary("generate", sol);
  return 0;
}

int cmd_baseline(const RunConfig& rc) {
  const Inputs in = load_inputs(rc);
  const Problem p = make_problem(rc, in);
  BaselineResult res =
      stage("baseline", [&] { return ik_step_chain(in.chain, p.end, p.goal, PathOrder::backward); });
  // Scored with the same loss as the optimizer for a like-for-like report.
  res.solution.loss_trace = {stage("loss", [&] {
    return evaluate_loss(res.solution.poses, res.solution.states, p.goal, p.start, p.end, rc.weights);
  })};
  ojson man = manifest("baseline", "dls", rc, in);
  man["ik_order"] = "backward from end pose";
  write_solution(rc.out, res.solution, p.goal, rc.duration_ms, man);
  std::ostringstream os;
  os << "step,reached,singular,position_error_cm,direction_error,iterations\n";
  for (const auto& r : res.points) {
    os << r.step << ',' << (r.reached ? 1 : 0) << ',' << (r.singular ? 1 : 0) << ',' << csv::num(r.position_error_cm)
       << ',' << csv::num(r.direction_error) << ',' << r.iterations << '\n';
  }
  write_file(fs::path(rc.out) / "ik_points.csv", os.str());
  print_summary("baseline", res.solution);
  return 0;
}

TrajectoryInput load_run(const fs::path& dir) {
  return stage("eval input " + dir.string(), [&] {
    const ojson man = detail::parse_json(detail::read_text((dir / "manifest.json").string()), "manifest.json");
    TrajectoryData d = read_trajectory_csv((dir / "trajectory.csv").string());
    TrajectoryInput t;
    t.id = man["config"].value("end", dir.filename().string());
    if (t.id.empty()) t.id = dir.filename().string();
    t.method = man.value("method", "unknown");
    t.poses = std::move(d.poses);
    t.states = std::move(d.states);
    t.goal = read_goal_csv((dir / "goal.csv").string());
    if (man.contains("surface_normal")) t.surface_normal = detail::vec3(man["surface_normal"], "surface_normal");
    if (man.contains("result")) {
      const auto& r = man["result"];
      t.iterations = r.value("iterations", std::size_t{0});
      t.converged = r.value("converged", false);
      t.wall_seconds = r.value("wall_seconds", 0.0);
      t.final_loss = r.value("final_loss", 0.0);
    }
    return t;
  });
}

int cmd_eval(const RunConfig& rc) {
  if (rc.runs.empty()) throw StageError("config", "eval needs at least one run directory");
  std::vector<TrajectoryInput> inputs;
  for (const auto& r : rc.runs) inputs.push_back(load_run(r));
  std::vector<TrajectoryMetrics> rows;
  for (const auto& t : inputs) rows.push_back(stage("eval " + t.id, [&] { return evaluate_trajectory(t); }));

  stage("write", [&] {
    fs::create_directories(rc.out);
    return 0;
  });
  const fs::path out(rc.out);
  write_file(out / "metrics.csv", metrics_csv(rows));
  write_file(out / "pointing_error.csv", pointing_error_csv(rows));

  std::vector<std::string> methods;
  for (const auto& r : rows) {
    if (std::find(methods.begin(), methods.end(), r.method) == methods.end()) methods.push_back(r.method);
  }
  for (const auto& method : methods) {
    std::vector<TrajectoryMetrics> sub;
    std::vector<std::string> labels;
    std::vector<std::vector<Vec3d>> paths, goals;
    for (std::size_t k = 0; k < rows.size(); ++k) {
      if (rows[k].method != method) continue;
      sub.push_back(rows[k]);
      labels.push_back(rows[k].id);
      paths.push_back(positions_of(inputs[k].states));
      goals.push_back(inputs[k].goal.points);
    }
    std::printf("[%s]\n%s\n", method.c_str(), metrics_table(sub).c_str());
    write_file(out / ("front_view_" + method + ".svg"), front_view_svg("front view (" + method + ")", labels, paths, goals));
    write_file(out / ("pointing_error_" + method + ".svg"), pointing_error_svg("pointing error (" + method + ")", sub));
  }
  return 0;
}

double max_dev_from_interpolation(const std::vector<Pose>& poses) {
  const std::size_t n = poses.size() - 1;
  double worst = 0.0;
  for (std::size_t i = 0; i <= n; ++i) {
    const double f = static_cast<double>(i) / static_cast<double>(n);
    for (std::size_t j = 0; j < poses[i].size(); ++j) {
      const double lin = poses[0][j] + f * (poses[n][j] - poses[0][j]);
      worst = std::max(worst, std::abs(poses[i][j] - lin));
    }
  }
  return worst;
}

int cmd_ablate(const RunConfig& rc) {
  const Inputs in = load_inputs(rc);
  const Problem p = make_problem(rc, in);
  std::vector<std::size_t> zero = rc.zero;
  if (zero.empty()) {
    for (std::size_t k = 0; k < kLossTerms; ++k) zero.push_back(k);
  }
  struct Variant {
    std::string name;
    LossWeights w;
  };
  std::vector<Variant> variants{{"full", rc.weights}};
  for (std::size_t k : zero) {
    if (k >= kLossTerms) throw StageError("config", "loss index " + std::to_string(k) + " out of range 0..6");
    Variant v{"no_c" + std::to_string(k), rc.weights};
    v.w.c[k] = 0.0;
    variants.push_back(v);
  }
  std::ostringstream table;
  table << "variant,iterations,converged,final_loss,distance_mean_mm,pointing_mean_deg,fluency,"
           "max_dev_from_interpolation_deg,flags\n";
  std::printf("%-8s %6s %10s %10s %10s %10s %10s  %s\n", "variant", "iters", "loss", "dist[mm]", "point[deg]", "L6",
              "interp[deg]", "flags");
  double full_l6 = 0.0;
  for (const auto& v : variants) {
    const TrajectorySolution sol = stage("optimize " + v.name, [&] {
      return generate_trajectory(in.chain, p.start, p.end, p.shape, rc.n, v.w, rc.opt);
    });
    write_solution(fs::path(rc.out) / v.name, sol, p.goal, rc.duration_ms, manifest("ablate", v.name, rc, in));
    const auto dist = distance_from_line(positions_of(sol.states), p.goal.points.front(), p.goal.points.back());
    const auto point = pointing_deviation(directions_of(sol.states), p.goal);
    const double l6 = fluency(sol.poses);
    if (v.name == "full") full_l6 = l6;
    const double dev = max_dev_from_interpolation(sol.poses);
    std::string flags;
    if (dev < 0.1) flags += "angle-space-linear ";
    if (v.name != "full" && full_l6 > 0.0 && l6 >= 2.0 * full_l6) flags += "shaky ";
    if (!flags.empty()) flags.pop_back();
    const double loss = sol.loss_trace.empty() ? 0.0 : sol.loss_trace.back().total;
    table << v.name << ',' << sol.iterations << ',' << (sol.converged ? 1 : 0) << ',' << csv::num(loss) << ','
          << csv::num(dist.stats.mean) << ',' << csv::num(point.settled.mean) << ',' << csv::num(l6) << ','
          << csv::num(dev) << ',' << flags << '\n';
    std::printf("%-8s %6zu %10.4g %10.3f %10.2f %10.4g %10.3f  %s\n", v.name.c_str(), sol.iterations, loss,
                dist.stats.mean, point.settled.mean, l6, dev, flags.c_str());
  }
  write_file(fs::path(rc.out) / "ablation.csv", table.str());
  return 0;
}

int cmd_letters(const RunConfig& rc) {
  const Inputs in = load_inputs(rc);
  const Pose& initial = named_pose(in, rc.start);
  const ShapeSpec shape = load_shape_spec(rc.shape);
  const auto* poly = std::get_if<PolylineShape>(&shape);
  if (!poly) throw StageError("shape", "letters needs --shape polyline:PATH");
  const Vec3d anchor = fk(in.chain, initial).position;
  const GoalPath goal = stage("goal", [&] { return goal_points_polyline(*poly, anchor, rc.n); });
  const TrajectorySolution sol = stage("optimize", [&] {
    return generate_trajectory_unanchored(in.chain, initial, goal, rc.weights, rc.opt);
  });
  write_solution(rc.out, sol, goal, rc.duration_ms, manifest("letters", "neural", rc, in));
  double mean = 0.0;
  for (std::size_t i = 0; i < goal.points.size(); ++i) mean += norm(sol.states[i].position - goal.points[i]);
  mean = 10.0 * mean / static_cast<double>(goal.points.size());
  write_file(fs::path(rc.out) / "letter.svg",
             plane_view_svg("traced shape", poly->normal, anchor, positions_of(sol.states), goal.points));
  print_summary("letters", sol);
  std::printf("mean goal-point distance %.4f mm\n", mean);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fluent arm trajectories through differentiable forward kinematics"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  RunConfig rc;
  std::string config_path, weights_text, zero_text;
  std::optional<double> stop_loss;

  auto common = [&](CLI::App* sub, bool needs_end) {
    sub->add_option("--config", config_path, "JSON config; flags override its values");
    sub->add_option("--model", rc.model, "Model file (default: built-in NICO right arm)");
    sub->add_option("--poses", rc.poses, "Pose file");
    sub->add_option("--start", rc.start, "Start pose name")->capture_default_str();
    if (needs_end) sub->add_option("--end", rc.end, "End pose name");
    sub->add_option("--shape", rc.shape, "line | polyline:PATH | spline:PATH")->capture_default_str();
    sub->add_option("--n", rc.n, "Number of segments")->capture_default_str()->check(CLI::PositiveNumber);
    sub->add_option("--duration-ms", rc.duration_ms, "Movement duration")->capture_default_str()->check(CLI::PositiveNumber);
    sub->add_option("--weights", weights_text, "Loss weights c0,...,c6");
    sub->add_option("--lr", rc.opt.learning_rate, "Adam learning rate")->capture_default_str();
    sub->add_option("--max-iters", rc.opt.max_iterations, "Iteration cap")->capture_default_str();
    sub->add_option("--stop-loss", stop_loss, "Stop once the loss falls to this value");
    sub->add_option("--seed", rc.opt.seed, "Seed recorded in the manifest")->capture_default_str();
    sub->add_option("--out", rc.out, "Output directory")->capture_default_str();
  };

  auto* gen = app.add_subcommand("generate", "Generate a trajectory between two recorded poses");
  common(gen, true);
  auto* base = app.add_subcommand("baseline", "Point-by-point damped least-squares IK along the same goal path");
  common(base, true);
  auto* abl = app.add_subcommand("ablate", "Rerun generate with single loss terms zeroed");
  common(abl, true);
  abl->add_option("--zero", zero_text, "Loss indices to zero, e.g. 0,6 (default: all)");
  auto* let = app.add_subcommand("letters", "Trace a polyline in the air without anchored ends");
  common(let, false);
  auto* ev = app.add_subcommand("eval", "Score run directories and write tables and plots");
  ev->add_option("runs", rc.runs, "Run directories written by generate / baseline")->required();
  ev->add_option("--out", rc.out, "Output directory")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    CLI::App* sub = app.get_subcommands().front();
    if (!config_path.empty()) {
      // Reload: file values first, then only the flags given explicitly.
      RunConfig from_file;
      if (sub == let) from_file.opt.max_iterations = 5000;
      stage("config", [&] {
        apply_config_file(from_file, config_path);
        return 0;
      });
      auto given = [&](const char* flag) { return sub->count(flag) > 0; };
      if (given("--model")) from_file.model = rc.model;
      if (given("--poses")) from_file.poses = rc.poses;
      if (given("--start")) from_file.start = rc.start;
      if (sub != let && given("--end")) from_file.end = rc.end;
      if (given("--shape")) from_file.shape = rc.shape;
      if (given("--n")) from_file.n = rc.n;
      if (given("--duration-ms")) from_file.duration_ms = rc.duration_ms;
      if (given("--lr")) from_file.opt.learning_rate = rc.opt.learning_rate;
      if (given("--max-iters")) from_file.opt.max_iterations = rc.opt.max_iterations;
      if (given("--seed")) from_file.opt.seed = rc.opt.seed;
      if (given("--out")) from_file.out = rc.out;
      if (!given("--weights")) weights_text.clear();
      if (given("--stop-loss")) from_file.opt.stop_loss = stop_loss;
      from_file.runs = rc.runs;
      rc = from_file;
    } else {
      if (sub == let && sub->count("--max-iters") == 0) rc.opt.max_iterations = 5000;
      if (stop_loss) rc.opt.stop_loss = stop_loss;
    }
    if (!weights_text.empty()) rc.weights = stage("config", [&] { return parse_weights(weights_text); });
    if (!zero_text.empty()) {
      for (double k : stage("config", [&] { return parse_list(zero_text); })) rc.zero.push_back(static_cast<std::size_t>(k));
    }
    stage("config", [&] {
      rc.opt.validate();
      if (sub == let) rc.weights.validate(true);
      else if (sub != ev) rc.weights.validate();
      return 0;
    });

    if (sub == gen) return cmd_generate(rc);
    if (sub == base) return cmd_baseline(rc);
    if (sub == abl) return cmd_ablate(rc);
    if (sub == let) return cmd_letters(rc);
    return cmd_eval(rc);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
