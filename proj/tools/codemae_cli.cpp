// Copyright (c) 2026 The codemae authors.
// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end. Links only the public C API.

#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "codemae/capi.h"

namespace {

int report(int rc) {
  if (rc != CODEMAE_OK)
    std::fprintf(stderr, "error: %s\n", codemae_last_error());
  return rc;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"codemae: joint optical/SAR masked-autoencoder pretraining "
               "and representation diagnostics"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(codemae_version()));

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic dataset");
  std::string gen_out;
  std::size_t scenes = 32, size = 64;
  std::uint64_t gen_seed = 0;
  double unpaired = 0.0;
  gen->add_option("--out", gen_out, "Output directory")->required();
  gen->add_option("--scenes", scenes, "Scene count");
  gen->add_option("--size", size, "Image extent in pixels");
  gen->add_option("--seed", gen_seed, "Master seed");
  gen->add_option("--unpaired-fraction", unpaired,
                  "Fraction of scenes emitted single-modality");

  // pretrain
  auto* pre = app.add_subcommand("pretrain", "Run pretraining");
  std::string pre_config, pre_out;
  std::vector<std::string> overrides;
  pre->add_option("--config", pre_config, "key=value config file");
  pre->add_option("--out", pre_out, "Output directory")->required();
  pre->add_option("--set", overrides, "Override config keys (key=value)");

  // diagnose
  auto* diag = app.add_subcommand("diagnose", "Representation diagnostics");
  std::string d_ckpt, d_data, d_out, d_which = "spectrum";
  std::uint64_t d_seed = 0;
  std::size_t d_samples = 16;
  diag->add_option("--checkpoint", d_ckpt, "Model checkpoint")->required();
  diag->add_option("--data", d_data, "Dataset directory (default: synthetic)");
  diag->add_option("--out", d_out, "Output directory")->required();
  diag->add_option("--which", d_which, "spectrum|curve|alignment|pca");
  diag->add_option("--seed", d_seed, "Evaluation seed");
  diag->add_option("--samples", d_samples, "Paired sample count");

  // probe
  auto* probe = app.add_subcommand("probe", "Linear probing accuracy");
  std::string p_ckpt, p_data, p_out;
  std::size_t p_seeds = 5, p_samples = 64;
  std::uint64_t p_seed = 0;
  probe->add_option("--checkpoint", p_ckpt, "Model checkpoint")->required();
  probe->add_option("--data", p_data, "Dataset directory (default: synthetic)");
  probe->add_option("--out", p_out, "Output directory")->required();
  probe->add_option("--seeds", p_seeds, "Probe seed count");
  probe->add_option("--seed", p_seed, "Evaluation data seed");
  probe->add_option("--samples", p_samples, "Labeled sample count");

  // gradcheck
  auto* gc = app.add_subcommand("gradcheck", "Finite-difference audit");
  std::string g_component = "all", g_report;
  gc->add_option("--component", g_component, "all|losses|layers");
  gc->add_option("--report", g_report, "Report path (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : CODEMAE_ERR_USAGE;
  }

  if (gen->parsed())
    return report(codemae_gen_data(gen_out.c_str(), scenes, size, gen_seed,
                                   unpaired));

  if (pre->parsed()) {
    codemae_config* cfg = nullptr;
    int rc = pre_config.empty() ? codemae_config_create(&cfg)
                                : codemae_config_load(pre_config.c_str(), &cfg);
    if (rc != CODEMAE_OK) return report(rc);
    for (const auto& kv : overrides) {
      auto eq = kv.find('=');
      if (eq == std::string::npos) {
        std::fprintf(stderr, "error: --set expects key=value, got '%s'\n",
                     kv.c_str());
        codemae_config_free(cfg);
        return CODEMAE_ERR_USAGE;
      }
      rc = codemae_config_set(cfg, kv.substr(0, eq).c_str(),
                              kv.substr(eq + 1).c_str());
      if (rc != CODEMAE_OK) {
        codemae_config_free(cfg);
        return report(rc);
      }
    }
    rc = codemae_pretrain(cfg, pre_out.c_str());
    codemae_config_free(cfg);
    return report(rc);
  }

  if (diag->parsed())
    return report(codemae_diagnose(d_ckpt.c_str(), d_data.c_str(),
                                   d_out.c_str(), d_which.c_str(), d_seed,
                                   d_samples));

  if (probe->parsed())
    return report(codemae_probe(p_ckpt.c_str(), p_data.c_str(), p_out.c_str(),
                                p_seeds, p_seed, p_samples));

  if (gc->parsed())
    return report(codemae_gradcheck(g_component.c_str(), g_report.c_str()));

  return CODEMAE_ERR_USAGE;
}
