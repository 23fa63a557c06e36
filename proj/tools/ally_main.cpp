// Command-line front end. Talks to the library only through the C API.
#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "ally/ally.h"

namespace {

constexpr int exit_ok = 0;
constexpr int exit_config = 1;
constexpr int exit_runtime = 2;

struct CommonFlags {
  std::string config_path;
  std::vector<std::string> sets;
  std::string seed;
  std::string out;
  std::string strategy;
};

void add_common(CLI::App* cmd, CommonFlags& f, bool with_strategy) {
  cmd->add_option("-c,--config", f.config_path, "key = value config file");
  cmd->add_option("--set", f.sets, "override one setting, key=value (repeatable)");
  cmd->add_option("--seed", f.seed, "seed or comma-separated seeds");
  cmd->add_option("--out", f.out, "output directory");
  if (with_strategy)
    cmd->add_option("--strategy", f.strategy, "strategy or comma-separated strategies");
}

int report(ally_status s, const char* what) {
  std::fprintf(stderr, "%s: %s: %s\n", what, ally_status_string(s), ally_last_error());
  return s == ALLY_ERR_CONFIG ? exit_config : exit_runtime;
}

class Config {
 public:
  ~Config() { ally_config_free(handle_); }
  ally_config* get() const { return handle_; }

  // Config file first, then --set overrides, then the dedicated flags.
  ally_status build(const CommonFlags& f) {
    ally_status s = f.config_path.empty() ? ally_config_new(&handle_)
                                          : ally_config_load(f.config_path.c_str(), &handle_);
    if (s != ALLY_OK) return s;
    for (const auto& kv : f.sets) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) {
        std::fprintf(stderr, "--set expects key=value, got '%s'\n", kv.c_str());
        return ALLY_ERR_CONFIG;
      }
      if ((s = ally_config_set(handle_, kv.substr(0, eq).c_str(), kv.substr(eq + 1).c_str())) != ALLY_OK)
        return s;
    }
    if (!f.seed.empty() && (s = ally_config_set(handle_, "seeds", f.seed.c_str())) != ALLY_OK) return s;
    if (!f.out.empty() && (s = ally_config_set(handle_, "output_dir", f.out.c_str())) != ALLY_OK) return s;
    if (!f.strategy.empty() && (s = ally_config_set(handle_, "strategies", f.strategy.c_str())) != ALLY_OK)
      return s;
    return ally_config_validate(handle_);
  }

 private:
  ally_config* handle_ = nullptr;
};

int cmd_run(const CommonFlags& f) {
  Config cfg;
  if (ally_status s = cfg.build(f)) return report(s, "run");
  ally_result* result = nullptr;
  if (ally_status s = ally_run_experiment(cfg.get(), 1, &result)) return report(s, "run");
  const size_t failed = ally_result_failed_cells(result);
  std::printf("%zu curve points, %zu failed cells, %.1f s\n", ally_result_point_count(result), failed,
              ally_result_wall_seconds(result));
  ally_result_free(result);
  return failed ? exit_runtime : exit_ok;
}

int cmd_verify(std::size_t instances, const std::string& seed, const std::string& out) {
  std::uint64_t s = 0;
  try {
    s = seed.empty() ? 0 : std::stoull(seed);
  } catch (const std::exception&) {
    std::fprintf(stderr, "verify-duality: --seed must be an unsigned integer\n");
    return exit_config;
  }
  char* json = nullptr;
  int passed = 0;
  if (ally_status st = ally_verify_duality(instances, s, &json, &passed)) return report(st, "verify-duality");
  if (out.empty()) {
    std::puts(json);
  } else {
    std::filesystem::create_directories(out);
    std::ofstream(std::filesystem::path(out) / "duality.json") << json << '\n';
  }
  ally_string_free(json);
  std::fprintf(stderr, "duality checks %s\n", passed ? "passed" : "FAILED");
  return passed ? exit_ok : exit_runtime;
}

int cmd_generate(const CommonFlags& f) {
  Config cfg;
  if (ally_status s = cfg.build(f)) return report(s, "generate");
  char* json = nullptr;
  if (ally_status s = ally_generate(cfg.get(), 1, &json)) return report(s, "generate");
  ally_string_free(json);
  return exit_ok;
}

int cmd_sweep_clusters(const CommonFlags& f, const std::vector<std::size_t>& ks) {
  Config cfg;
  if (ally_status s = cfg.build(f)) return report(s, "sweep-clusters");
  ally_result* result = nullptr;
  if (ally_status s = ally_sweep_clusters(cfg.get(), ks.data(), ks.size(), 1, &result))
    return report(s, "sweep-clusters");
  const size_t failed = ally_result_failed_cells(result);
  std::printf("%zu curve points, %zu failed cells\n", ally_result_point_count(result), failed);
  ally_result_free(result);
  return failed ? exit_runtime : exit_ok;
}

int cmd_sweep_redundancy(const CommonFlags& f, std::size_t factor) {
  Config cfg;
  if (ally_status s = cfg.build(f)) return report(s, "sweep-redundancy");
  const std::size_t n_seeds = ally_config_seed_count(cfg.get());
  std::vector<double> orig(n_seeds), cloned(n_seeds);
  std::size_t dups = 0;
  if (ally_status s = ally_sweep_redundancy(cfg.get(), factor, 1, orig.data(), cloned.data(), &dups))
    return report(s, "sweep-redundancy");
  std::printf("seed_index,gap_original,gap_cloned\n");
  for (std::size_t i = 0; i < n_seeds; ++i) std::printf("%zu,%.6f,%.6f\n", i, orig[i], cloned[i]);
  std::printf("duplicates of labeled rows queried by ally on the cloned pool: %zu\n", dups);
  return exit_ok;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Active learning via Lagrangian duality"};
  app.require_subcommand(1);

  CommonFlags run_flags, gen_flags, sc_flags, sr_flags;
  auto* run = app.add_subcommand("run", "run an active learning experiment");
  add_common(run, run_flags, true);

  std::size_t instances = 20;
  std::string verify_seed, verify_out;
  auto* verify = app.add_subcommand("verify-duality", "check duality theory on random convex instances");
  verify->add_option("--instances", instances, "number of random instances")->check(CLI::PositiveNumber);
  verify->add_option("--seed", verify_seed, "seed");
  verify->add_option("--out", verify_out, "directory for duality.json (stdout when omitted)");

  auto* gen = app.add_subcommand("generate", "ascend inputs towards high predicted duals");
  add_common(gen, gen_flags, false);

  std::vector<std::size_t> ks;
  auto* sc = app.add_subcommand("sweep-clusters", "ALLY with several cluster counts");
  add_common(sc, sc_flags, false);
  sc->add_option("--k", ks, "cluster counts (1 and budget are always added)")->delimiter(',');

  std::size_t factor = 10;
  auto* sr = app.add_subcommand("sweep-redundancy", "ALLY vs random on original and cloned pools");
  add_common(sr, sr_flags, false);
  sr->add_option("--factor", factor, "clone factor")->check(CLI::Range(std::size_t{2}, std::size_t{1000}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? exit_ok : exit_config;
  }

  if (*run) return cmd_run(run_flags);
  if (*verify) return cmd_verify(instances, verify_seed, verify_out);
  if (*gen) return cmd_generate(gen_flags);
  if (*sc) return cmd_sweep_clusters(sc_flags, ks);
  if (*sr) return cmd_sweep_redundancy(sr_flags, factor);
  return exit_config;
}
