// rrl: train, evaluate and analyze rhetorical role labeling models.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "rrl/harness.hpp"
#include "rrl/version.hpp"

using namespace rrl;

namespace {

ExperimentConfig load_config(const std::string& path) {
  ExperimentConfig cfg = ExperimentConfig::load(path);
  cfg.validate();
  return cfg;
}

void print_report(const RunReport& report, const LabelScheme& scheme) {
  std::cout << render_report_table(report, scheme);
  std::printf("seed %llu, fingerprint %s\n",
              static_cast<unsigned long long>(report.seed),
              report.config_fingerprint.c_str());
}

int cmd_train(const std::string& config_path, std::vector<std::uint64_t> seeds,
              const std::string& method_override,
              const std::string& protos_file) {
  ExperimentConfig cfg = load_config(config_path);
  if (!method_override.empty()) {
    apply_override(cfg, "method", method_override);
    cfg.validate();
  }
  if (!protos_file.empty()) cfg.pcm_prototypes_file = protos_file;
  if (seeds.empty()) seeds = cfg.seeds;

  if (cfg.split.mode == "kfold") {
    for (std::uint64_t seed : seeds) {
      KFoldOutput out = run_kfold(cfg, seed);
      std::printf("seed %llu: k-fold mean macro-F1 %.4f, weighted-F1 %.4f over %zu folds\n",
                  static_cast<unsigned long long>(seed), out.mean_macro,
                  out.mean_weighted, out.fold_test_reports.size());
    }
    return 0;
  }
  for (std::uint64_t seed : seeds) {
    TrainOutput out = train(cfg, seed);
    std::printf("seed %llu: best epoch %d, dev macro-F1 %.4f, weighted-F1 %.4f\n",
                static_cast<unsigned long long>(seed), out.state.best_epoch,
                out.dev_report.macro_f1, out.dev_report.weighted_f1);
    if (!out.checkpoint_path.empty()) {
      std::printf("  checkpoint: %s\n", out.checkpoint_path.c_str());
    }
  }
  return 0;
}

int cmd_eval(const std::string& ckpt_path, const std::string& corpus_path,
             const std::string& config_path, const std::string& report_out) {
  Checkpoint ckpt = Checkpoint::load(ckpt_path);
  Corpus corpus = load_corpus(corpus_path, ckpt.scheme);
  std::string expect;
  if (!config_path.empty()) expect = load_config(config_path).fingerprint();
  RunReport report = evaluate_checkpoint(ckpt, corpus, expect);
  print_report(report, ckpt.scheme);
  if (!report_out.empty()) {
    std::ofstream out(report_out);
    out << report.to_json_string() << "\n";
    std::printf("report written to %s\n", report_out.c_str());
  }
  return 0;
}

int cmd_sweep(const std::string& config_path, const std::string& axis,
              int jobs) {
  ExperimentConfig cfg = load_config(config_path);
  GridAxes axes;
  if (axis == "lr") {
    std::vector<std::string> values;
    for (double lr : cfg.lr_grid) {
      std::ostringstream ss;
      ss << lr;
      values.push_back(ss.str());
    }
    axes = {{"optimizer.learning_rate", values}};
  } else if (axis == "pbr") {
    std::vector<std::string> qs, lambdas;
    for (int q : cfg.pbr_q_grid) qs.push_back(std::to_string(q));
    for (double l : cfg.lambda_grid) {
      std::ostringstream ss;
      ss << l;
      lambdas.push_back(ss.str());
    }
    axes = {{"pbr.q", qs},
            {"pbr.lambda_prox", lambdas},
            {"pbr.lambda_div", lambdas}};
  } else if (axis == "injection") {
    std::vector<std::string> kinds = injection_kinds();
    axes = {{"pcm.injection", kinds}};
  } else if (axis == "sampling") {
    axes = {{"pcm.sampling", {"full", "random", "supervised"}}};
  } else {
    std::fprintf(stderr, "unknown sweep axis '%s' (lr|pbr|injection|sampling)\n",
                 axis.c_str());
    return 2;
  }

  GridSearchOutput out = grid_search(cfg, axes, jobs);
  std::printf("%-48s  %9s  %9s\n", "overrides", "dev mF1", "dev wF1");
  for (std::size_t i = 0; i < out.rows.size(); ++i) {
    std::string label;
    for (const auto& [k, v] : out.rows[i].overrides) {
      if (!label.empty()) label += " ";
      label += k + "=" + v;
    }
    std::printf("%-48s  %9.4f  %9.4f%s\n", label.c_str(), out.rows[i].dev_macro,
                out.rows[i].dev_weighted, i == out.best_row ? "  <- best" : "");
  }
  return 0;
}

int cmd_protos(const std::string& config_path, const std::string& out_path,
               const std::string& strategy) {
  ExperimentConfig cfg = load_config(config_path);
  if (!strategy.empty()) {
    apply_override(cfg, "pcm.sampling", strategy);
    cfg.validate();
  }
  auto pools = build_prototypes(cfg);
  save_prototype_pools(pools, out_path);
  const auto parent = std::filesystem::path(out_path).parent_path().string();
  if (!parent.empty()) update_manifest(parent);
  std::size_t roles = 0;
  for (const auto& p : pools) roles += p.entries().size();
  std::printf("wrote %zu pool(s), %zu role prototypes to %s\n", pools.size(),
              roles, out_path.c_str());
  return 0;
}

int cmd_export(const std::string& ckpt_path, const std::string& corpus_path,
               const std::string& layer, const std::string& out_path) {
  Checkpoint ckpt = Checkpoint::load(ckpt_path);
  Corpus corpus = load_corpus(corpus_path, ckpt.scheme);
  EmbeddingLayer l;
  if (layer == "pooled") {
    l = EmbeddingLayer::kPooled;
  } else if (layer == "contextualized") {
    l = EmbeddingLayer::kContextualized;
  } else {
    std::fprintf(stderr, "unknown layer '%s' (pooled|contextualized)\n",
                 layer.c_str());
    return 2;
  }
  export_embeddings(ckpt, corpus, l, out_path);
  std::printf("exported %zu sentence embeddings to %s\n",
              corpus.total_sentences(), out_path.c_str());
  return 0;
}

int cmd_report(const std::string& report_file, const std::string& scheme_path,
               const std::string& reports_dir, const std::string& baseline_dir,
               const std::vector<std::uint64_t>& seeds) {
  if (!report_file.empty()) {
    std::ifstream in(report_file);
    if (!in) throw std::runtime_error("cannot open report: " + report_file);
    std::stringstream ss;
    ss << in.rdbuf();
    RunReport report = RunReport::from_json_string(ss.str());
    if (!scheme_path.empty()) {
      print_report(report, LabelScheme::load(scheme_path));
    } else {
      std::printf("macro-F1 %.4f, weighted-F1 %.4f (seed %llu)\n",
                  report.macro_f1, report.weighted_f1,
                  static_cast<unsigned long long>(report.seed));
    }
    return 0;
  }
  if (reports_dir.empty()) {
    std::fprintf(stderr, "report: need --file or --reports\n");
    return 2;
  }
  std::vector<RunReport> reports;
  std::vector<double> macros, weighteds;
  for (std::uint64_t seed : seeds) {
    const std::string path = reports_dir + "/seed-" + std::to_string(seed) + ".json";
    std::ifstream in(path);
    if (!in) throw std::runtime_error("missing report " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    reports.push_back(RunReport::from_json_string(ss.str()));
    macros.push_back(reports.back().macro_f1);
    weighteds.push_back(reports.back().weighted_f1);
  }
  double mean_m = 0.0, mean_w = 0.0;
  for (std::size_t i = 0; i < macros.size(); ++i) {
    mean_m += macros[i];
    mean_w += weighteds[i];
  }
  mean_m /= macros.size();
  mean_w /= weighteds.size();
  double sd = 0.0;
  for (double m : macros) sd += (m - mean_m) * (m - mean_m);
  sd = macros.size() > 1 ? std::sqrt(sd / (macros.size() - 1)) : 0.0;
  std::printf("%zu seeds: macro-F1 %.4f +- %.4f, weighted-F1 %.4f\n",
              macros.size(), mean_m, sd, mean_w);

  if (!baseline_dir.empty()) {
    std::vector<double> base_m, base_w;
    for (std::uint64_t seed : seeds) {
      const std::string path = baseline_dir + "/seed-" + std::to_string(seed) + ".json";
      std::ifstream in(path);
      if (!in) throw std::runtime_error("missing baseline report " + path);
      std::stringstream ss;
      ss << in.rdbuf();
      RunReport r = RunReport::from_json_string(ss.str());
      base_m.push_back(r.macro_f1);
      base_w.push_back(r.weighted_f1);
    }
    auto sig_m = significance_test(macros, base_m);
    auto sig_w = significance_test(weighteds, base_w);
    std::printf("vs baseline: macro p=%.6f%s, weighted p=%.6f%s\n", sig_m.p_value,
                sig_m.significant_at_01   ? " (**)"
                : sig_m.significant_at_05 ? " (*)"
                                          : "",
                sig_w.p_value,
                sig_w.significant_at_01   ? " (**)"
                : sig_w.significant_at_05 ? " (*)"
                                          : "");
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"rrlkit: hierarchical rhetorical role labeling with prototype methods"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  std::string config_path, ckpt_path, corpus_path, out_path, method_override;
  std::string protos_file, layer = "pooled", axis, report_file, scheme_path;
  std::string reports_dir, baseline_dir;
  std::vector<std::uint64_t> seeds;

  auto* train_cmd = app.add_subcommand("train", "Train a model per the config");
  train_cmd->add_option("--config", config_path, "experiment config (json)")
      ->required();
  train_cmd->add_option("--seed", seeds, "override the config seed list");
  train_cmd->add_option("--method", method_override,
                        "override method (baseline|pbr|pcm|pcm_gold)");
  train_cmd->add_option("--protos", protos_file,
                        "use a pre-built prototype file (pcm methods)");

  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on a corpus");
  eval_cmd->add_option("--checkpoint", ckpt_path, "checkpoint file")->required();
  eval_cmd->add_option("--corpus", corpus_path, "corpus file (jsonl)")->required();
  eval_cmd->add_option("--config", config_path,
                       "refuse evaluation unless this config matches");
  eval_cmd->add_option("--out", out_path, "write the run report (json)");

  int jobs = 1;
  auto* sweep_cmd = app.add_subcommand("sweep", "Grid sweep over one axis");
  sweep_cmd->add_option("--config", config_path, "experiment config")->required();
  sweep_cmd->add_option("--axis", axis, "lr | pbr | injection | sampling")
      ->required();
  sweep_cmd->add_option("--jobs", jobs, "parallel training runs (default 1)");

  auto* protos_cmd =
      app.add_subcommand("protos", "Build and save a prototype file");
  protos_cmd->add_option("--config", config_path, "experiment config")->required();
  protos_cmd->add_option("--out", out_path, "output prototype file")->required();
  protos_cmd->add_option("--strategy", method_override,
                         "sampling override (full|random|supervised)");

  auto* export_cmd =
      app.add_subcommand("export", "Export sentence embeddings as csv");
  export_cmd->add_option("--checkpoint", ckpt_path, "checkpoint file")->required();
  export_cmd->add_option("--corpus", corpus_path, "corpus file")->required();
  export_cmd->add_option("--layer", layer, "pooled | contextualized");
  export_cmd->add_option("--out", out_path, "output csv path")->required();

  auto* report_cmd =
      app.add_subcommand("report", "Render or aggregate run reports");
  report_cmd->add_option("--file", report_file, "render one report json");
  report_cmd->add_option("--scheme", scheme_path, "label scheme for the table");
  report_cmd->add_option("--reports", reports_dir, "aggregate seed-*.json here");
  report_cmd->add_option("--baseline", baseline_dir,
                         "baseline reports dir for significance");
  report_cmd->add_option("--seed", seeds, "seeds to aggregate");

  CLI11_PARSE(app, argc, argv);

  try {
    if (train_cmd->parsed()) {
      return cmd_train(config_path, seeds, method_override, protos_file);
    }
    if (eval_cmd->parsed()) {
      return cmd_eval(ckpt_path, corpus_path, config_path, out_path);
    }
    if (sweep_cmd->parsed()) return cmd_sweep(config_path, axis, jobs);
    if (protos_cmd->parsed()) {
      return cmd_protos(config_path, out_path, method_override);
    }
    if (export_cmd->parsed()) {
      return cmd_export(ckpt_path, corpus_path, layer, out_path);
    }
    if (report_cmd->parsed()) {
      return cmd_report(report_file, scheme_path, reports_dir, baseline_dir, seeds);
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
