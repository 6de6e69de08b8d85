// Copyright (c) 2026 The codemae authors.
// SPDX-License-Identifier: Apache-2.0

#include "codemae/capi.h"

#include <cstdio>
#include <fstream>
#include <string>

#include "core/runners.hpp"

namespace {

thread_local std::string g_last_error;

int kind_code(codemae::numcore::ErrorKind kind) {
  using codemae::numcore::ErrorKind;
  switch (kind) {
    case ErrorKind::usage:
      return CODEMAE_ERR_USAGE;
    case ErrorKind::io:
      return CODEMAE_ERR_IO;
    default:
      return CODEMAE_ERR_NUMERIC;  // shape, numeric, contract
  }
}

template <typename Fn>
int guarded(Fn&& fn) {
  try {
    fn();
    g_last_error.clear();
    return CODEMAE_OK;
  } catch (const codemae::numcore::Error& e) {
    g_last_error = e.what();
    return kind_code(e.kind());
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return CODEMAE_ERR_NUMERIC;
  }
}

std::string str_or_empty(const char* s) { return s ? s : ""; }

}  // namespace

struct codemae_config {
  codemae::config::Config config;
};

extern "C" {

const char* codemae_version(void) { return "0.1.0"; }

const char* codemae_last_error(void) { return g_last_error.c_str(); }

int codemae_config_create(codemae_config** out) {
  if (!out) return CODEMAE_ERR_USAGE;
  return guarded([&] {
    *out = new codemae_config{codemae::config::Config::from_string("")};
  });
}

int codemae_config_load(const char* path, codemae_config** out) {
  if (!out || !path) {
    g_last_error = "config_load: null argument";
    return CODEMAE_ERR_USAGE;
  }
  return guarded([&] {
    *out = new codemae_config{codemae::config::Config::from_file(path)};
  });
}

int codemae_config_set(codemae_config* config, const char* key,
                       const char* value) {
  if (!config || !key || !value) {
    g_last_error = "config_set: null argument";
    return CODEMAE_ERR_USAGE;
  }
  return guarded([&] { config->config.set(key, value); });
}

void codemae_config_free(codemae_config* config) { delete config; }

int codemae_gen_data(const char* out_dir, size_t scenes, size_t size,
                     uint64_t seed, double unpaired_fraction) {
  if (!out_dir) {
    g_last_error = "gen_data: null output directory";
    return CODEMAE_ERR_USAGE;
  }
  return guarded([&] {
    codemae::runners::run_gen_data(out_dir, scenes, size, seed,
                                   unpaired_fraction);
  });
}

int codemae_pretrain(codemae_config* config, const char* out_dir) {
  if (!config || !out_dir) {
    g_last_error = "pretrain: null argument";
    return CODEMAE_ERR_USAGE;
  }
  return guarded(
      [&] { codemae::runners::run_pretrain(config->config, out_dir); });
}

int codemae_diagnose(const char* checkpoint, const char* data_dir,
                     const char* out_dir, const char* which, uint64_t seed,
                     size_t samples) {
  if (!checkpoint || !out_dir || !which) {
    g_last_error = "diagnose: null argument";
    return CODEMAE_ERR_USAGE;
  }
  return guarded([&] {
    codemae::runners::run_diagnose(checkpoint, str_or_empty(data_dir), out_dir,
                                   which, seed, samples);
  });
}

int codemae_probe(const char* checkpoint, const char* data_dir,
                  const char* out_dir, size_t seed_count, uint64_t seed,
                  size_t samples) {
  if (!checkpoint) {
    g_last_error = "probe: null checkpoint";
    return CODEMAE_ERR_USAGE;
  }
  return guarded([&] {
    codemae::runners::run_probe(checkpoint, str_or_empty(data_dir),
                                str_or_empty(out_dir), seed_count, seed,
                                samples);
  });
}

int codemae_gradcheck(const char* component, const char* report_path) {
  std::string comp = component ? component : "all";
  std::vector<codemae::runners::GradCheckRow> rows;
  int rc = guarded([&] { rows = codemae::runners::run_gradcheck(comp); });
  if (rc != CODEMAE_OK) return rc;

  std::string report = "check,max_rel_error,tolerance,status\n";
  bool all_ok = true;
  char buf[160];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%s,%.6g,%.6g,%s\n", r.name.c_str(),
                  r.max_rel_error, r.tolerance, r.ok ? "pass" : "FAIL");
    report += buf;
    all_ok = all_ok && r.ok;
  }
  if (report_path && report_path[0]) {
    std::ofstream f(report_path);
    if (!f) {
      g_last_error = std::string("gradcheck: cannot write ") + report_path;
      return CODEMAE_ERR_IO;
    }
    f << report;
  } else {
    std::fputs(report.c_str(), stdout);
  }
  if (!all_ok) {
    g_last_error = "gradcheck: at least one check exceeded tolerance";
    return CODEMAE_ERR_NUMERIC;
  }
  return CODEMAE_OK;
}

}  // extern "C"
