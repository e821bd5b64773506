#include <cstdio>
#include <cstdlib>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "topo3d/topo3d.h"

namespace {

constexpr int kUsageExit = 2;
// Library failures exit with 10 + status code.
constexpr int kStatusExitBase = 10;

const char* kCommands[] = {"sample", "solve",    "map-process", "build-dataset", "train",
                           "predict", "evaluate", "ablate",      "grid",          "hybrid"};

void usage(std::FILE* to) {
  std::fprintf(to, "usage: topo3d <command> [--config PATH] [--seed N] [--out DIR] [--threads N] ...\n"
                   "commands:");
  for (const char* c : kCommands) std::fprintf(to, " %s", c);
  std::fprintf(to, "\nrun `topo3d <command> --help` for the flags of one command\n");
}

// JSON line on stderr so scripts can parse failures.
int report(int status) {
  std::string msg = topo3d_last_error();
  std::string escaped;
  for (char ch : msg) {
    if (ch == '"' || ch == '\\') escaped += '\\';
    if (ch == '\n') {
      escaped += "\\n";
      continue;
    }
    escaped += ch;
  }
  std::fprintf(stderr, "{\"error\":\"%s\",\"status\":%d,\"message\":\"%s\"}\n",
               topo3d_status_name(status), status, escaped.c_str());
  return kStatusExitBase + status;
}

struct Handles {
  topo3d_config* config = nullptr;
  topo3d_job* job = nullptr;
  ~Handles() {
    topo3d_config_free(config);
    topo3d_job_free(job);
  }
};

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    usage(stderr);
    return kUsageExit;
  }
  const std::string command = argv[1];
  if (command == "-h" || command == "--help") {
    usage(stdout);
    return 0;
  }
  if (command == "--version") {
    std::printf("topo3d %s\n", topo3d_version());
    return 0;
  }
  if (!topo3d_is_command(command.c_str())) {
    std::fprintf(stderr, "topo3d: unknown command '%s'\n", command.c_str());
    usage(stderr);
    return kUsageExit;
  }

  CLI::App app{"topo3d " + command, "topo3d " + command};
  std::string config_path, out_dir, seed, threads, input, model, strategy, tau, gap, m, n,
      channels, threshold;
  bool timing = false;
  app.add_option("--config", config_path, "run configuration (JSON)");
  app.add_option("--seed", seed, "run seed");
  app.add_option("--out", out_dir, "output directory")->required();
  app.add_option("--threads", threads, "worker threads (default: $TOPO_THREADS or 1)");
  app.add_option("--input", input, "problem file, trace or dataset directory");
  app.add_option("--model", model, "network checkpoint");
  app.add_option("--strategy", strategy,
                 "pair sampling strategy; a comma list makes `ablate` compare strategies");
  app.add_option("--tau", tau, "cutoff threshold on the spatial gradient norm");
  app.add_option("--gap", gap, "iterations between the density and gradient snapshots");
  app.add_option("--m", m, "density iteration");
  app.add_option("--n", n, "gradient reference iteration");
  app.add_option("--channels", channels, "input groups, e.g. density,gradient,boundary");
  app.add_option("--threshold", threshold, "solid/void threshold");
  app.add_flag("--timing", timing, "solve: add wall-clock column to compliance.csv");
  try {
    app.parse(argc - 1, argv + 1);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kUsageExit;
  }
  if (threads.empty())
    if (const char* env = std::getenv("TOPO_THREADS")) threads = env;

  Handles h;
  int status = config_path.empty() ? topo3d_config_default(&h.config)
                                   : topo3d_config_load(config_path.c_str(), &h.config);
  if (status != TOPO3D_OK) return report(status);

  const bool compare_strategies = command == "ablate" && strategy.find(',') != std::string::npos;
  const std::pair<const char*, std::string*> overrides[] = {
      {"seed", &seed},   {"threads", &threads},     {"channels", &channels},
      {"tau", &tau},     {"gap", &gap},             {"threshold", &threshold}};
  for (const auto& [key, value] : overrides)
    if (!value->empty() && (status = topo3d_config_set(h.config, key, value->c_str())) != TOPO3D_OK)
      return report(status);
  if (!strategy.empty() && !compare_strategies &&
      (status = topo3d_config_set(h.config, "strategy", strategy.c_str())) != TOPO3D_OK)
    return report(status);

  if ((status = topo3d_job_create(&h.job)) != TOPO3D_OK) return report(status);
  if (m.empty() != n.empty()) {
    std::fprintf(stderr, "topo3d: --m and --n go together\n");
    return kUsageExit;
  }
  const std::pair<const char*, std::string> job_values[] = {
      {"input", input},
      {"model", model},
      {"m", m},
      {"n", n},
      {"strategies", compare_strategies ? strategy : std::string()},
      {"timing", timing ? "1" : ""}};
  for (const auto& [key, value] : job_values)
    if (!value.empty() && (status = topo3d_job_set(h.job, key, value.c_str())) != TOPO3D_OK)
      return report(status);

  status = topo3d_run(h.config, command.c_str(), out_dir.c_str(), h.job);
  if (status != TOPO3D_OK) return report(status);
  return 0;
}
