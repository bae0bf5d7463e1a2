#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "amoe/common.hpp"
#include "amoe/pipeline/config.hpp"
#include "amoe/pipeline/stages.hpp"
#include "amoe/synth.hpp"

using amoe::pipeline::Pipeline;
using amoe::pipeline::RunConfig;

namespace {

struct CliOptions {
  std::string config_file;
  std::vector<std::string> overrides;  // key=value from flags
};

void add_override(CliOptions& opts, const std::string& key, const std::string& value) {
  opts.overrides.push_back(key + "=" + value);
}

RunConfig build_config(const CliOptions& opts) {
  RunConfig cfg;
  if (!opts.config_file.empty()) cfg = amoe::pipeline::load_config_file(opts.config_file);
  for (const auto& kv : opts.overrides) {
    const auto eq = kv.find('=');
    amoe::pipeline::apply_config_entry(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Anatomically-constrained mixture-of-experts experiments on volumetric scans"};
  app.require_subcommand(1);

  CliOptions opts;
  app.add_option("--config", opts.config_file, "flat key = value config file");

  // Global flags shared by every subcommand; each mirrors a config key.
  std::string out, region_mode, seed, jobs;
  bool dump_weights = false;
  app.add_option("--out", out, "run output directory");
  app.add_option("--seed", seed, "master seed");
  app.add_option("--jobs", jobs, "worker threads for independent tasks");
  app.add_option("--region-mode", region_mode, "five_lobes or seven_regions");
  app.add_flag("--dump-weights", dump_weights, "dump per-sample gating weights");

  // Free-form overrides for every other config key.
  std::vector<std::string> sets;
  app.add_option("--set", sets, "override any config key (key=value)")->take_all();

  auto* c_synth = app.add_subcommand("synth", "generate the synthetic cohort");
  auto* c_extract = app.add_subcommand("extract", "radiomics features and pooled descriptors");
  auto* c_experts = app.add_subcommand("train-experts", "train regional experts per fold");
  auto* c_gate = app.add_subcommand("gate", "evaluate all gating strategies");
  auto* c_ensemble = app.add_subcommand("ensemble", "ensemble test evaluation");
  auto* c_stage4 = app.add_subcommand("stage4", "end-to-end MoE training");
  auto* c_eval = app.add_subcommand("evaluate", "merge results and summary statistics");
  auto* c_report = app.add_subcommand("report", "render the results table");
  auto* c_pipeline = app.add_subcommand("pipeline", "run all stages with resume");

  for (auto* sub : {c_synth, c_extract, c_experts, c_gate, c_ensemble, c_stage4, c_eval, c_report,
                    c_pipeline}) {
    sub->fallthrough();
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (!out.empty()) add_override(opts, "out", out);
    if (!seed.empty()) add_override(opts, "seed", seed);
    if (!jobs.empty()) add_override(opts, "jobs", jobs);
    if (!region_mode.empty()) add_override(opts, "region_mode", region_mode);
    if (dump_weights) add_override(opts, "dump_weights", "true");
    for (const auto& kv : sets) {
      if (kv.find('=') == std::string::npos) {
        throw amoe::UsageError("--set expects key=value, got " + kv);
      }
      opts.overrides.push_back(kv);
    }
    RunConfig cfg = build_config(opts);

    if (c_report->parsed()) {
      amoe::pipeline::cmd_report(cfg.out_dir, std::cout);
      return 0;
    }

    Pipeline pipeline(cfg);
    if (c_pipeline->parsed()) {
      pipeline.run();
    } else if (c_synth->parsed()) {
      pipeline.run_stage("synth");
    } else if (c_extract->parsed()) {
      pipeline.run_stage("extract");
    } else if (c_experts->parsed()) {
      pipeline.run_stage("experts");
    } else if (c_gate->parsed()) {
      pipeline.run_stage("gate");
    } else if (c_ensemble->parsed()) {
      pipeline.run_stage("ensemble");
    } else if (c_stage4->parsed()) {
      pipeline.run_stage("stage4");
    } else if (c_eval->parsed()) {
      pipeline.run_stage("evaluate");
    }
    return 0;
  } catch (const amoe::UsageError& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return 1;
  } catch (const amoe::InvariantError& e) {
    std::fprintf(stderr, "invariant violation: %s\n", e.what());
    return 3;
  } catch (const amoe::DataError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
}
