// Command-line front end. Talks to the engine exclusively through the C API
// in resim.h; configs are JSON files with a handful of flag overrides.
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "resim.h"

namespace {

using nlohmann::json;

struct CommonOpts {
  std::string config_path;
  std::string out;
  std::optional<long long> seed;
  std::optional<int> threads;
};

json load_config(const CommonOpts& opts) {
  json cfg = json::object();
  if (!opts.config_path.empty()) {
    std::ifstream in(opts.config_path);
    if (!in) {
      std::fprintf(stderr, "error: cannot open config %s\n", opts.config_path.c_str());
      std::exit(1);
    }
    try {
      in >> cfg;
    } catch (const json::exception& e) {
      std::fprintf(stderr, "error: malformed config %s: %s\n", opts.config_path.c_str(),
                   e.what());
      std::exit(1);
    }
  }
  if (!opts.out.empty()) cfg["out"] = opts.out;
  if (opts.seed) cfg["seed"] = *opts.seed;
  if (opts.threads) cfg["threads"] = *opts.threads;
  return cfg;
}

int run(resim_status (*fn)(const char*), const json& cfg) {
  resim_status status = fn(cfg.dump().c_str());
  if (status == RESIM_OK) return 0;
  std::fprintf(stderr, "error (%s): %s\n", resim_status_name(status), resim_last_error());
  return status == RESIM_ERR_NUMERICAL ? 2 : 1;
}

void add_common(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("--config", opts.config_path, "JSON config file");
  cmd->add_option("--out", opts.out, "output directory (overrides config)");
  cmd->add_option("--seed", opts.seed, "RNG seed (overrides config)");
  cmd->add_option("--threads", opts.threads, "worker threads, 0 = all cores");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"resim - differentiable real-to-sim reconstruction"};
  app.require_subcommand(1);
  app.set_version_flag("--version", resim_version());

  CommonOpts gen_opts, rec_opts, cal_opts, eval_opts, export_opts, render_opts;

  CLI::App* gen = app.add_subcommand("gen", "generate a synthetic dataset");
  add_common(gen, gen_opts);

  CLI::App* rec = app.add_subcommand("reconstruct", "optimize geometry + appearance");
  add_common(rec, rec_opts);
  std::optional<int> steps;
  std::optional<double> tau;
  bool literal_smask = false;
  rec->add_option("--steps", steps, "optimization steps");
  rec->add_option("--tau", tau, "soft-mask EDT falloff in pixels");
  rec->add_flag("--literal-smask", literal_smask, "use the squared-EDT target form");

  CLI::App* cal = app.add_subcommand("calibrate", "recover joint angles + camera rotations");
  add_common(cal, cal_opts);
  std::optional<int> iterations;
  std::optional<double> sigma;
  cal->add_option("--iterations", iterations, "alternation rounds");
  cal->add_option("--sigma", sigma, "injected joint noise level (for bookkeeping)");

  CLI::App* evalc = app.add_subcommand("eval", "geometry + novel-view metrics");
  add_common(evalc, eval_opts);

  CLI::App* exportc = app.add_subcommand("export", "write mesh.ply + splat.ply from a run");
  add_common(exportc, export_opts);

  CLI::App* renderc = app.add_subcommand("render", "render an asset to PNG");
  add_common(renderc, render_opts);

  CLI11_PARSE(app, argc, argv);

  if (gen->parsed()) return run(resim_cmd_gen, load_config(gen_opts));
  if (rec->parsed()) {
    json cfg = load_config(rec_opts);
    if (steps) cfg["steps"] = *steps;
    if (tau) cfg["smask"]["tau"] = *tau;
    if (literal_smask) cfg["smask"]["mode"] = "literal";
    return run(resim_cmd_reconstruct, cfg);
  }
  if (cal->parsed()) {
    json cfg = load_config(cal_opts);
    if (iterations) cfg["iterations"] = *iterations;
    if (sigma) cfg["sigma"] = *sigma;
    return run(resim_cmd_calibrate, cfg);
  }
  if (evalc->parsed()) return run(resim_cmd_eval, load_config(eval_opts));
  if (exportc->parsed()) return run(resim_cmd_export, load_config(export_opts));
  if (renderc->parsed()) return run(resim_cmd_render, load_config(render_opts));
  return 1;
}
