// Copyright (c) 2026 The codemae authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "core/config.hpp"
#include "core/trainer.hpp"

namespace codemae::runners {

// Worker-count cap from CODEMAE_THREADS (>= 1, defaults to 1).
std::size_t thread_budget();

// Maps the flat config keys onto a TrainConfig; unknown keys are rejected
// when `c.finish()` runs inside.
trainer::TrainConfig train_config_from(config::Config& c);

// Resolved-config snapshot + command line written into the output directory.
void write_run_manifest(const std::string& out_dir, const std::string& command,
                        const std::string& resolved_config);

void run_gen_data(const std::string& out_dir, std::size_t scenes,
                  std::size_t size, std::uint64_t seed,
                  double unpaired_fraction);

trainer::TrainResult run_pretrain(config::Config& c,
                                  const std::string& out_dir);

// which: spectrum | curve | alignment | pca. `data_dir` empty means a
// synthetic evaluation set derived from `seed`.
void run_diagnose(const std::string& checkpoint, const std::string& data_dir,
                  const std::string& out_dir, const std::string& which,
                  std::uint64_t seed, std::size_t samples);

struct ProbeRow {
  std::string modality;  // "optical" | "sar" | per-seed rows plus "mean"
  std::string seed_label;
  double accuracy = 0.0;
};

std::vector<ProbeRow> run_probe(const std::string& checkpoint,
                                const std::string& data_dir,
                                const std::string& out_dir,
                                std::size_t seed_count, std::uint64_t seed,
                                std::size_t samples);

struct GradCheckRow {
  std::string name;
  double max_rel_error = 0.0;
  double tolerance = 0.0;
  bool ok = false;
};

// component: all | losses | layers. Returns per-op rows; overall pass iff
// every row is under tolerance.
std::vector<GradCheckRow> run_gradcheck(const std::string& component);

}  // namespace codemae::runners
