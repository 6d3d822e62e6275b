// respira - respiratory sound classification toolkit
//
// Subcommands: synth, preprocess, train, ablate, evaluate, explain, report.
// Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.
// Errors are emitted as one-line JSON on stderr.
#include <exception>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "respira/core/error.hpp"
#include "respira/core/parallel.hpp"
#include "respira/pipeline/commands.hpp"
#include "respira/pipeline/config.hpp"
#include "respira/pipeline/synth.hpp"

using namespace respira;

namespace {

struct GlobalFlags {
  std::string config_path;
  std::string workdir_override;
  uint64_t seed_override = 0;
  bool seed_set = false;
  bool strict_deterministic = false;
  int threads = 0;
};

pipeline::RunConfig resolve_config(const GlobalFlags& flags) {
  pipeline::RunConfig cfg;
  if (!flags.config_path.empty()) cfg = pipeline::load_run_config(flags.config_path);
  if (!flags.workdir_override.empty()) cfg.workdir = flags.workdir_override;
  if (flags.seed_set) {
    cfg.seed = flags.seed_override;
    cfg.training.seed = flags.seed_override;
  }
  if (cfg.workdir.empty()) throw usage_error("no workdir (set paths.workdir or --workdir)");
  return cfg;
}

void apply_threads(const GlobalFlags& flags) {
  if (flags.strict_deterministic) {
    set_thread_count(1);
    return;
  }
  int n = flags.threads > 0 ? flags.threads
                            : static_cast<int>(std::thread::hardware_concurrency());
  set_thread_count(std::max(1, n));
}

int error_exit(const Error& e) {
  nlohmann::json j = {{"error", {{"kind", e.kind_name()}, {"message", e.what()}}}};
  std::cerr << j.dump() << "\n";
  switch (e.kind()) {
    case Error::Kind::usage: return 1;
    case Error::Kind::data: return 2;
    case Error::Kind::numeric: return 3;
  }
  return 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"respiratory sound classification toolkit"};
  app.require_subcommand(1);

  GlobalFlags flags;
  app.add_option("--config", flags.config_path, "run configuration JSON file");
  app.add_option("--workdir", flags.workdir_override, "working directory (overrides config)");
  auto* seed_opt = app.add_option("--seed", flags.seed_override, "seed (overrides config)");
  app.add_flag("--strict-deterministic", flags.strict_deterministic,
               "single-threaded, byte-reproducible outputs");
  app.add_option("--threads", flags.threads, "worker threads for per-clip stages");

  // synth
  auto* synth = app.add_subcommand("synth", "generate the synthetic five-tone demo corpus");
  std::string synth_dir = "synth_data";
  int clips_per_class = 20;
  uint64_t synth_seed = 1;
  synth->add_option("--out", synth_dir, "output directory");
  synth->add_option("--clips-per-class", clips_per_class, "clips per class");
  synth->add_option("--synth-seed", synth_seed, "generator seed");

  // preprocess
  auto* preprocess = app.add_subcommand("preprocess", "decode, standardize, QC and featurize");
  std::string manifest_override;
  preprocess->add_option("--manifest", manifest_override, "manifest CSV (overrides config)");

  // train / ablate
  auto* train_cmd = app.add_subcommand("train", "train the model per the run configuration");
  int replicates_override = 0;
  train_cmd->add_option("--replicates", replicates_override,
                        "independent training replicates (seeds seed..seed+R-1)");
  app.add_subcommand("ablate", "train the full model and the four reduced variants");

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "compute metrics on a partition");
  std::string eval_partition = "test";
  std::string ckpt_override;
  evaluate->add_option("--partition", eval_partition, "train | val | test");
  evaluate->add_option("--checkpoint", ckpt_override,
                       "checkpoint stem (default workdir/checkpoint/best)");

  // explain
  auto* explain = app.add_subcommand("explain", "attribution maps for chosen clips");
  std::vector<std::string> clip_ids;
  std::vector<std::string> methods = {"grad_cam", "integrated_gradients", "shap"};
  std::string explain_ckpt;
  explain->add_option("--clip", clip_ids, "clip id (repeatable)");
  explain->add_option("--method", methods, "grad_cam | integrated_gradients | shap (repeatable)");
  explain->add_option("--checkpoint", explain_ckpt, "checkpoint stem");
  int global_importance_n = 0;
  explain->add_option("--global-importance", global_importance_n,
                      "rank handcrafted features by mean |phi| over N train samples");

  // report
  app.add_subcommand("report", "assemble report.html from logged JSON");

  CLI11_PARSE(app, argc, argv);
  flags.seed_set = seed_opt->count() > 0;

  try {
    apply_threads(flags);

    if (app.got_subcommand("synth")) {
      auto manifest = pipeline::write_tone_dataset(synth_dir, clips_per_class, synth_seed);
      std::cout << manifest.string() << "\n";
      return 0;
    }

    pipeline::RunConfig cfg = resolve_config(flags);

    if (app.got_subcommand("preprocess")) {
      if (!manifest_override.empty()) cfg.manifest = manifest_override;
      if (cfg.manifest.empty())
        throw usage_error("no manifest (set paths.manifest or --manifest)");
      pipeline::cmd_preprocess(cfg.manifest, cfg.workdir, cfg.qc);
      return 0;
    }
    if (app.got_subcommand("train")) {
      if (replicates_override > 0) cfg.replicates = replicates_override;
      pipeline::cmd_train(cfg);
      return 0;
    }
    if (app.got_subcommand("ablate")) {
      pipeline::cmd_ablate(cfg);
      return 0;
    }
    if (app.got_subcommand("evaluate")) {
      std::filesystem::path stem = ckpt_override.empty()
                                       ? cfg.workdir / "checkpoint" / "best"
                                       : std::filesystem::path(ckpt_override);
      pipeline::cmd_evaluate(cfg.workdir, stem, train::partition_from_name(eval_partition));
      return 0;
    }
    if (app.got_subcommand("explain")) {
      std::filesystem::path stem = explain_ckpt.empty()
                                       ? cfg.workdir / "checkpoint" / "best"
                                       : std::filesystem::path(explain_ckpt);
      if (clip_ids.empty() && global_importance_n == 0)
        throw usage_error("explain needs --clip and/or --global-importance");
      if (!clip_ids.empty()) {
        pipeline::ExplainRequest req;
        req.clip_ids = clip_ids;
        req.methods = std::set<std::string>(methods.begin(), methods.end());
        for (const auto& m : req.methods)
          if (m != "grad_cam" && m != "integrated_gradients" && m != "shap")
            throw usage_error("unknown attribution method: " + m);
        pipeline::cmd_explain(cfg.workdir, stem, req, cfg.xai, cfg.seed);
      }
      if (global_importance_n > 0)
        pipeline::cmd_global_importance(cfg.workdir, stem, global_importance_n, cfg.xai,
                                        cfg.seed);
      return 0;
    }
    if (app.got_subcommand("report")) {
      pipeline::cmd_report(cfg.workdir);
      return 0;
    }
    throw usage_error("no subcommand");
  } catch (const Error& e) {
    return error_exit(e);
  } catch (const std::exception& e) {
    return error_exit(data_error(e.what()));
  }
}
