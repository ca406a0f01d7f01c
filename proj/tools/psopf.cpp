// psopf: power flow, sensitivity ranking, PSO-based OPF and loading sweeps on
// a case file. Every command writes its outputs plus manifest.json to
// --out-dir; `psopf replay manifest.json` re-runs the recorded command.

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "psopf/config.hpp"
#include "psopf/netmodel.hpp"
#include "psopf/opf.hpp"
#include "psopf/powerflow.hpp"
#include "psopf/report.hpp"
#include "psopf/sensitivity.hpp"

namespace fs = std::filesystem;
using namespace psopf;

namespace {

constexpr const char* kVersion = "0.1.0";

struct Options {
  std::string command;
  std::string case_path = PSOPF_DEFAULT_CASE;
  std::string config_path;
  std::string out_dir = "out";
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::optional<double> load_mw;
  int top = 0;
  std::string candidates;
  std::string controls = "full";
  std::string levels;
  bool auto_select = false;
  bool sparsity = false;
};

struct Context {
  Options opt;
  RunConfig cfg;
  Network net;
  std::vector<std::string> outputs;
};

void write_file(Context& ctx, const std::string& name, const std::string& content) {
  const fs::path path = fs::path(ctx.opt.out_dir) / name;
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << content;
  ctx.outputs.push_back(name);
}

void write_json(Context& ctx, const std::string& name, const Json& j) { write_file(ctx, name, j.dump(2) + "\n"); }

std::string timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  return buf;
}

Json options_json(const Options& o) {
  Json j;
  j["case"] = o.case_path;
  j["config"] = o.config_path;
  j["out_dir"] = o.out_dir;
  j["seed"] = o.seed ? Json(*o.seed) : Json(nullptr);
  j["threads"] = o.threads ? Json(*o.threads) : Json(nullptr);
  j["load"] = o.load_mw ? Json(*o.load_mw) : Json(nullptr);
  j["top"] = o.top;
  j["candidates"] = o.candidates;
  j["controls"] = o.controls;
  j["levels"] = o.levels;
  j["auto_select"] = o.auto_select;
  j["sparsity"] = o.sparsity;
  return j;
}

Options options_from_json(const Json& j) {
  Options o;
  o.command = j.at("command").get<std::string>();
  const Json& a = j.at("options");
  o.case_path = a.at("case").get<std::string>();
  o.config_path = a.at("config").get<std::string>();
  o.out_dir = a.at("out_dir").get<std::string>();
  if (!a.at("seed").is_null()) o.seed = a.at("seed").get<std::uint64_t>();
  if (!a.at("threads").is_null()) o.threads = a.at("threads").get<int>();
  if (!a.at("load").is_null()) o.load_mw = a.at("load").get<double>();
  o.top = a.at("top").get<int>();
  o.candidates = a.at("candidates").get<std::string>();
  o.controls = a.at("controls").get<std::string>();
  o.levels = a.at("levels").get<std::string>();
  o.auto_select = a.at("auto_select").get<bool>();
  o.sparsity = a.at("sparsity").get<bool>();
  return o;
}

void write_manifest(Context& ctx, const Json& extra) {
  Json j;
  j["command"] = ctx.opt.command;
  j["case_path"] = ctx.opt.case_path;
  j["config_path"] = ctx.opt.config_path;
  j["seed"] = ctx.cfg.pso.seed;
  j["timestamp"] = timestamp();
  j["tool_version"] = kVersion;
  j["outputs"] = ctx.outputs;
  Options resolved = ctx.opt;
  resolved.seed = ctx.cfg.pso.seed;
  j["options"] = options_json(resolved);
  j["settings"] = config_entries(ctx.cfg);
  if (!extra.is_null()) j["details"] = extra;
  const fs::path path = fs::path(ctx.opt.out_dir) / "manifest.json";
  fs::create_directories(path.parent_path());
  std::ofstream(path, std::ios::binary) << j.dump(2) << "\n";
}

Context prepare(const Options& opt) {
  Context ctx;
  ctx.opt = opt;
  if (!opt.config_path.empty()) ctx.cfg = load_config_file(opt.config_path);
  const auto env = apply_env_overrides(ctx.cfg);
  if (opt.seed) {
    ctx.cfg.pso.seed = *opt.seed;
  } else if (!env.contains("seed") && opt.config_path.empty()) {
    ctx.cfg.pso.seed = std::random_device{}();
  }
  if (opt.threads) {
    ctx.cfg.pso.threads = *opt.threads;
  } else if (!env.contains("threads")) {
    ctx.cfg.pso.threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  }
  ctx.cfg.pso.validate();
  ctx.cfg.penalty.validate();
  ctx.net = load_case_file(opt.case_path);
  if (opt.load_mw) ctx.net = scale_load(ctx.net, *opt.load_mw);
  return ctx;
}

int cmd_powerflow(Context& ctx) {
  try {
    const auto sol = solve_newton_raphson(ctx.net, std::nullopt, ctx.cfg.powerflow);
    const auto rep = check_violations(ctx.net, sol);
    write_json(ctx, "solution.json", solution_json(ctx.net, sol));
    write_json(ctx, "violations.json", violations_json(rep));
    write_file(ctx, "bus_voltages.csv", bus_voltage_csv(ctx.net, sol));
    write_manifest(ctx, Json(nullptr));
    std::cout << "converged in " << sol.iterations << " iterations, max mismatch " << sol.max_mismatch << ", "
              << rep.count() << " violations\n";
    return 0;
  } catch (const PowerFlowError& e) {
    write_json(ctx, "solution.json", Json{{"error", e.what()}, {"last_mismatch", e.last_mismatch()}});
    write_manifest(ctx, Json(nullptr));
    throw;
  }
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

int cmd_sensitivity(Context& ctx) {
  const OperatingPoint op{ctx.net, solve_newton_raphson(ctx.net, std::nullopt, ctx.cfg.powerflow)};
  const auto rep = check_violations(op.network, op.solution);
  const auto s = voltage_sensitivity(op);
  const auto r = current_sensitivity(op);
  const Eigen::MatrixXd per_ctrl = current_per_control(s, r, op.network);
  const auto candidates = ctx.opt.candidates.empty() ? default_candidates(s) : split_list(ctx.opt.candidates);
  auto ranking = rank_controls(s, per_ctrl, rep, op.network, candidates);
  if (ctx.opt.top > 0) {
    const auto top = static_cast<std::size_t>(ctx.opt.top);
    for (auto& q : ranking.per_quantity) {
      if (q.controls.size() > top) q.controls.resize(top);
    }
  }
  write_json(ctx, "sensitivity.json", sensitivity_json(op.network, s, r, per_ctrl, ranking));
  write_json(ctx, "ranking.json", ranking_json(ranking));
  write_json(ctx, "violations.json", violations_json(rep));
  if (ctx.opt.sparsity) {
    write_file(ctx, "sparsity_su.csv", sparsity_csv(s.matrix, label_names(s.row_labels), label_names(s.col_labels)));
  }
  write_manifest(ctx, Json(nullptr));
  std::cout << ranking.per_quantity.size() << " violated quantities ranked\n";
  for (std::size_t k = 0; k < ranking.aggregate.size() && k < 8; ++k) {
    std::cout << "  " << ranking.aggregate[k].control << "  " << ranking.aggregate[k].magnitude << "\n";
  }
  return 0;
}

int cmd_opf(Context& ctx) {
  const auto cs = parse_control_spec(ctx.net, ctx.opt.controls);
  const auto res = solve_opf(ctx.net, cs, ctx.cfg.penalty, ctx.cfg.pso);
  write_json(ctx, "opf_result.json", opf_json(res));
  write_file(ctx, "opf_summary.csv",
             opf_summary_csv({{ctx.net.total_p_demand() * ctx.net.base_mva, res.best_cost, res.iterations,
                               res.violations.count()}}));
  write_file(ctx, "trace.csv", trace_csv(res.trace));
  write_file(ctx, "optimum.case", serialize_case(res.network));
  write_manifest(ctx, Json{{"controls", cs.names(ctx.net)}});
  std::cout << "cost " << format_fixed(res.best_cost, 5) << " $/hr after " << res.iterations << " iterations, "
            << res.violations.count() << " violations\n";
  return res.violations.empty() ? 0 : 3;
}

int cmd_sweep(Context& ctx) {
  std::vector<double> levels;
  for (const auto& item : split_list(ctx.opt.levels)) levels.push_back(std::stod(item));
  if (levels.empty()) throw std::invalid_argument("--levels needs at least one MW value");
  SweepOptions so;
  so.auto_select = ctx.opt.auto_select;
  if (!ctx.opt.auto_select) so.fixed_controls = parse_control_spec(ctx.net, ctx.opt.controls);
  const auto sweep = loading_sweep(ctx.net, levels, so, ctx.cfg.penalty, ctx.cfg.pso);

  bool failed = false;
  Json per_level = Json::array();
  for (const auto& lv : sweep) {
    const std::string dir = "level_" + format_fixed(lv.level_mw, 1);
    if (lv.result) {
      write_json(ctx, dir + "/opf_result.json", opf_json(*lv.result));
      write_file(ctx, dir + "/trace.csv", trace_csv(lv.result->trace));
      write_file(ctx, dir + "/optimum.case", serialize_case(lv.result->network));
    }
    const bool ok = lv.result && lv.error.empty() && lv.result->violations.empty();
    failed = failed || !ok;
    per_level.push_back({{"level_mw", lv.level_mw}, {"controls", lv.control_set.names(ctx.net)}, {"ok", ok}});
  }
  write_file(ctx, "sweep.csv", sweep_csv(ctx.net, sweep));
  write_manifest(ctx, Json{{"levels", per_level}});
  std::cout << sweep_csv(ctx.net, sweep);
  return failed ? 3 : 0;
}

int dispatch(const Options& opt) {
  Context ctx = prepare(opt);
  if (opt.command == "powerflow") return cmd_powerflow(ctx);
  if (opt.command == "sensitivity") return cmd_sensitivity(ctx);
  if (opt.command == "opf") return cmd_opf(ctx);
  if (opt.command == "sweep") return cmd_sweep(ctx);
  throw std::invalid_argument("unknown command " + opt.command);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Particle swarm optimal power flow with sensitivity-based control selection"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  Options opt;
  std::uint64_t seed = 0;
  int threads = 1;
  double load = 0.0;
  std::string manifest_path;
  std::string replay_out;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--case", opt.case_path, "case file")->capture_default_str();
    sub->add_option("--config", opt.config_path, "key = value settings file");
    sub->add_option("--seed", seed, "PSO seed (random and recorded when omitted)");
    sub->add_option("--out-dir", opt.out_dir, "output directory")->capture_default_str();
    sub->add_option("--threads", threads, "parallel objective evaluations (default: all cores)")
        ->check(CLI::PositiveNumber);
    sub->add_option("--load", load, "total real demand in MW")->check(CLI::PositiveNumber);
  };

  auto* pf = app.add_subcommand("powerflow", "solve the power flow and report limit violations");
  add_common(pf);
  auto* sens = app.add_subcommand("sensitivity", "sensitivity matrices and control ranking");
  add_common(sens);
  sens->add_option("--top", opt.top, "truncate each per-quantity list")->check(CLI::NonNegativeNumber);
  sens->add_option("--candidates", opt.candidates, "comma list of controls to rank");
  sens->add_flag("--sparsity", opt.sparsity, "also write the Su sparsity pattern CSV");
  auto* opf = app.add_subcommand("opf", "optimal power flow by particle swarm");
  add_common(opf);
  opf->add_option("--controls", opt.controls, "full | pg | pg+vg | pg+vg:1,2,5 | control list")
      ->capture_default_str();
  auto* sw = app.add_subcommand("sweep", "OPF over several loading levels with warm starts");
  add_common(sw);
  sw->add_option("--levels", opt.levels, "comma list of MW levels")->required();
  sw->add_option("--controls", opt.controls, "control set used at every level")->capture_default_str();
  sw->add_flag("--auto-select", opt.auto_select, "choose controls per level from the sensitivity ranking");
  auto* rp = app.add_subcommand("replay", "re-run the command recorded in a manifest");
  rp->add_option("manifest", manifest_path, "manifest.json")->required();
  rp->add_option("--out-dir", replay_out, "write to this directory instead");

  CLI11_PARSE(app, argc, argv);

  try {
    if (rp->parsed()) {
      std::ifstream in(manifest_path);
      if (!in) throw std::runtime_error("cannot read manifest " + manifest_path);
      Options replayed = options_from_json(Json::parse(in));
      if (!replay_out.empty()) replayed.out_dir = replay_out;
      return dispatch(replayed);
    }
    opt.command = app.get_subcommands().front()->get_name();
    auto* sub = app.get_subcommands().front();
    if (sub->count("--seed")) opt.seed = seed;
    if (sub->count("--threads")) opt.threads = threads;
    if (sub->count("--load")) opt.load_mw = load;
    return dispatch(opt);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
