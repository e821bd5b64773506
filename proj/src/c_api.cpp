#include "topo3d/topo3d.h"

#include <algorithm>
#include <cstring>
#include <new>
#include <sstream>
#include <string>

#include "topo3d/config.hpp"
#include "topo3d/dataset.hpp"
#include "topo3d/error.hpp"
#include "topo3d/eval.hpp"
#include "topo3d/pipeline.hpp"
#include "topo3d/process_map.hpp"
#include "topo3d/sampler.hpp"

struct topo3d_config {
  topo3d::RunConfig value;
};

struct topo3d_job {
  topo3d::CommandInputs value;
};

struct topo3d_trace {
  topo3d::IterationTrace value;
  double r_min_factor = 1.5;
};

namespace {

thread_local std::string last_error;

int set_error(int code, const std::string& message) {
  last_error = message;
  return code;
}

// Runs `body`, converting exceptions to status codes.
template <typename F>
int guarded(F&& body) {
  try {
    last_error.clear();
    body();
    return TOPO3D_OK;
  } catch (const topo3d::Error& e) {
    return set_error(static_cast<int>(e.code()), e.what());
  } catch (const nlohmann::json::exception& e) {
    return set_error(TOPO3D_E_INVALID_CONFIG, e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    return set_error(TOPO3D_E_IO, e.what());
  } catch (const std::bad_alloc&) {
    return set_error(TOPO3D_E_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return set_error(TOPO3D_E_INTERNAL, e.what());
  }
}

template <typename T>
T parse_number(const char* key, const char* text) {
  std::istringstream in(text);
  T v{};
  in >> v;
  if (in.fail() || !in.eof())
    topo3d::fail(topo3d::ErrorCode::invalid_argument,
                 std::string("bad value for ") + key + ": '" + text + "'");
  return v;
}

std::vector<std::string> split_csv(const char* text) {
  std::vector<std::string> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) out.push_back(item);
  return out;
}

}  // namespace

extern "C" {

const char* topo3d_version(void) { return topo3d::kVersion; }

const char* topo3d_last_error(void) { return last_error.c_str(); }

const char* topo3d_status_name(int status) {
  if (status == TOPO3D_E_UNKNOWN_COMMAND) return "unknown_command";
  if (status < 0 || status > TOPO3D_E_INTERNAL) return "unknown";
  return topo3d::error_code_name(static_cast<topo3d::ErrorCode>(status));
}

int topo3d_config_default(topo3d_config** out) {
  if (!out) return set_error(TOPO3D_E_INVALID_ARGUMENT, "null output pointer");
  return guarded([&] { *out = new topo3d_config{}; });
}

int topo3d_config_load(const char* path, topo3d_config** out) {
  if (!path || !out) return set_error(TOPO3D_E_INVALID_ARGUMENT, "null argument");
  return guarded([&] { *out = new topo3d_config{topo3d::load_config(path)}; });
}

int topo3d_config_parse(const char* json_text, topo3d_config** out) {
  if (!json_text || !out) return set_error(TOPO3D_E_INVALID_ARGUMENT, "null argument");
  return guarded([&] {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::parse_error& e) {
      topo3d::fail(topo3d::ErrorCode::invalid_config, e.what());
    }
    *out = new topo3d_config{topo3d::config_from_json(j)};
  });
}

int topo3d_config_set(topo3d_config* config, const char* key, const char* value) {
  if (!config || !key || !value) return set_error(TOPO3D_E_INVALID_ARGUMENT, "null argument");
  return guarded([&] {
    auto c = config->value;
    const std::string k = key;
    if (k == "seed") c.seed = parse_number<std::uint64_t>(key, value);
    else if (k == "threads") c.threads = parse_number<int>(key, value);
    else if (k == "channels") topo3d::set_channel_groups(c, topo3d::parse_channel_groups(value));
    else if (k == "strategy") c.dataset.strategy = value;
    else if (k == "tau") c.eval.tau = parse_number<double>(key, value);
    else if (k == "gap") c.eval.gap = parse_number<std::size_t>(key, value);
    else if (k == "threshold") c.eval.threshold = parse_number<double>(key, value);
    else topo3d::fail(topo3d::ErrorCode::invalid_argument, "unknown config override '" + k + "'");
    topo3d::validate_config(c);
    config->value = std::move(c);
  });
}

int topo3d_config_dump(const topo3d_config* config, char* buf, size_t cap, size_t* needed) {
  if (!config) return set_error(TOPO3D_E_INVALID_ARGUMENT, "null config");
  return guarded([&] {
    const auto text = topo3d::to_json(config->value).dump(2);
    if (needed) *needed = text.size() + 1;
    if (buf && cap > 0) {
      const auto n = std::min(cap - 1, text.size());
      std::memcpy(buf, text.data(), n);
      buf[n] = '\0';
    }
  });
}

void topo3d_config_free(topo3d_config* config) { delete config; }

int topo3d_job_create(topo3d_job** out) {
  if (!out) return set_error(TOPO3D_E_INVALID_ARGUMENT, "null output pointer");
  return guarded([&] { *out = new topo3d_job{}; });
}

int topo3d_job_set(topo3d_job* job, const char* key, const char* value) {
  if (!job || !key || !value) return set_error(TOPO3D_E_INVALID_ARGUMENT, "null argument");
  return guarded([&] {
    auto& j = job->value;
    const std::string k = key;
    if (k == "input") j.input = value;
    else if (k == "model") j.model = value;
    else if (k == "m") j.m = parse_number<std::size_t>(key, value);
    else if (k == "n") j.n = parse_number<std::size_t>(key, value);
    else if (k == "strategies") j.strategies = split_csv(value);
    else if (k == "timing") j.timing = std::strcmp(value, "0") != 0 && std::strcmp(value, "false") != 0;
    else topo3d::fail(topo3d::ErrorCode::invalid_argument, "unknown job key '" + k + "'");
  });
}

void topo3d_job_free(topo3d_job* job) { delete job; }

int topo3d_is_command(const char* command) { return command && topo3d::is_command(command); }

int topo3d_run(const topo3d_config* config, const char* command, const char* out_dir,
               const topo3d_job* job) {
  if (!config || !command || !out_dir) return set_error(TOPO3D_E_INVALID_ARGUMENT, "null argument");
  if (!topo3d::is_command(command))
    return set_error(TOPO3D_E_UNKNOWN_COMMAND, std::string("unknown command '") + command + "'");
  return guarded([&] {
    const topo3d::CommandInputs none;
    const auto& inputs = job ? job->value : none;
    if (inputs.m != 0 && inputs.n >= inputs.m)
      topo3d::fail(topo3d::ErrorCode::invalid_argument, "need n < m");
    topo3d::run_command(command, config->value, out_dir, inputs);
  });
}

int topo3d_solve_sampled(const topo3d_config* config, uint64_t seed, topo3d_trace** out) {
  if (!config || !out) return set_error(TOPO3D_E_INVALID_ARGUMENT, "null argument");
  return guarded([&] {
    const auto& c = config->value;
    const auto p = topo3d::sample_problem(seed, c.domain, c.sampler);
    *out = new topo3d_trace{topo3d::run_simp(p, c.simp), c.simp.r_min_factor};
  });
}

int topo3d_trace_load(const char* dir, topo3d_trace** out) {
  if (!dir || !out) return set_error(TOPO3D_E_INVALID_ARGUMENT, "null argument");
  return guarded([&] { *out = new topo3d_trace{topo3d::load_trace(dir)}; });
}

size_t topo3d_trace_iterations(const topo3d_trace* trace) {
  return trace ? trace->value.final_iteration() : 0;
}

size_t topo3d_trace_voxels(const topo3d_trace* trace) {
  return trace ? trace->value.problem.domain.element_count() : 0;
}

int topo3d_trace_converged(const topo3d_trace* trace) { return trace && trace->value.converged; }

int topo3d_trace_density(const topo3d_trace* trace, size_t t, double* out, size_t len) {
  if (!trace || !out) return set_error(TOPO3D_E_INVALID_ARGUMENT, "null argument");
  return guarded([&] {
    const auto& tr = trace->value;
    topo3d::require(t < tr.entries.size(), "iteration out of range");
    const auto& d = tr.entries[t].density;
    topo3d::require(len == d.size(), "buffer length differs from the voxel count",
                    topo3d::ErrorCode::shape_mismatch);
    std::copy(d.begin(), d.end(), out);
  });
}

int topo3d_trace_compliance(const topo3d_trace* trace, size_t t, double* out) {
  if (!trace || !out) return set_error(TOPO3D_E_INVALID_ARGUMENT, "null argument");
  return guarded([&] {
    topo3d::require(t < trace->value.entries.size(), "iteration out of range");
    *out = trace->value.entries[t].compliance;
  });
}

int topo3d_trace_cutoff(const topo3d_trace* trace, double tau, size_t* iteration, int* reached) {
  if (!trace || !iteration) return set_error(TOPO3D_E_INVALID_ARGUMENT, "null argument");
  return guarded([&] {
    const auto& d = trace->value.problem.domain;
    const topo3d::FilterKernel kernel(d, trace->r_min_factor * d.h);
    const auto c = topo3d::cutoff_iteration(trace->value, kernel, tau);
    *iteration = c.iteration;
    if (reached) *reached = c.reached ? 1 : 0;
  });
}

void topo3d_trace_free(topo3d_trace* trace) { delete trace; }

}  // extern "C"
