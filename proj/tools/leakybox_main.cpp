// leakybox command-line runner: evolve | verify | sweep, driven by a
// configuration file. Exit codes: 0 success, 1 configuration error,
// 2 numerical precondition violation, 3 failed verification checks.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "leakybox/runner.hpp"

namespace {

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f)
    throw leakybox::config_error("cannot open config file: " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

int guarded(const std::function<int()>& fn) {
  try {
    return fn();
  } catch (const leakybox::config_error& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"open-system dynamics of interacting bosons in a leaky box"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir = ".";
  int jobs = 1;

  auto* evolve = app.add_subcommand("evolve", "run one evolution, write CSV + JSON summary");
  evolve->add_option("--config", config_path, "configuration file")->required();
  evolve->add_option("--out", out_dir, "output directory");

  auto* verify = app.add_subcommand("verify", "run the named verification checks");
  verify->add_option("--config", config_path, "configuration file")->required();
  verify->add_option("--out", out_dir, "output directory");

  auto* sweep = app.add_subcommand("sweep", "run a parameter grid, write summary CSV");
  sweep->add_option("--config", config_path, "configuration file")->required();
  sweep->add_option("--out", out_dir, "output directory");
  sweep->add_option("--jobs", jobs, "concurrent runs");

  CLI11_PARSE(app, argc, argv);

  return guarded([&]() -> int {
    const leakybox::RunConfig cfg =
        leakybox::parse_run_config(slurp(config_path));
    if (evolve->parsed()) return leakybox::run_evolve(cfg, out_dir);
    if (verify->parsed()) return leakybox::run_verify(cfg, out_dir);
    return leakybox::run_sweep(cfg, out_dir, jobs);
  });
}
