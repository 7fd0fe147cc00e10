#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "rrl/backbone.hpp"
#include "rrl/corpus.hpp"
#include "rrl/metrics.hpp"
#include "rrl/optim.hpp"
#include "rrl/pbr.hpp"
#include "rrl/pcm.hpp"

namespace rrl {

struct CorpusConfig {
  std::string train_path;
  std::string dev_path;
  std::string test_path;
  std::string file;  // k-fold mode: one file holding every document
  std::string scheme_path;
};

struct SplitConfig {
  std::string mode = "fixed";  // "fixed" | "kfold"
  int k = 5;
  std::uint64_t seed = 13;
};

/// Declarative description of one experiment. Method-specific blocks must be
/// present exactly when their method is selected.
struct ExperimentConfig {
  CorpusConfig corpus;
  SplitConfig split;
  BackboneConfig backbone;
  std::string method = "baseline";  // baseline | pbr | pcm | pcm_gold
  std::optional<PbrConfig> pbr;
  std::optional<PcmConfig> pcm;
  std::string pcm_prototypes_file;  // optional pre-built prototype pools
  OptimizerConfig optimizer;
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
  std::string metric_for_selection = "macro_f1";  // or "weighted_f1"
  // Sweep lattices consumed by the sweep runner.
  std::vector<double> lr_grid = {1e-5, 3e-5, 5e-5, 1e-4, 3e-4};
  std::vector<int> pbr_q_grid = {2, 4, 8, 16, 32, 64};
  std::vector<double> lambda_grid = {0.0, 0.9, 10.0};
  std::string outputs = "runs/default";

  void validate() const;
  /// Hash of the semantic config (everything except `outputs` and the seed
  /// list); stamped into checkpoints and reports.
  std::string fingerprint() const;
  /// Output directory after environment overrides (RRLKIT_OUTPUTS).
  std::string resolved_outputs() const;

  std::string to_json_string() const;
  static ExperimentConfig from_json_string(const std::string& s);
  static ExperimentConfig load(const std::string& path);
  void save(const std::string& path) const;
};

/// Serialized model: backbone + scheme + every trainable parameter, plus the
/// method-specific state needed to reproduce inference.
struct Checkpoint {
  int format_version = 0;
  std::string config_fingerprint;
  BackboneConfig backbone;
  LabelScheme scheme;
  std::string method = "baseline";
  std::optional<PbrConfig> pbr;
  std::optional<PcmConfig> pcm;
  std::vector<PrototypeSet> pcm_pools;
  std::map<std::string, Eigen::MatrixXd> params;

  void save(const std::string& path) const;
  static Checkpoint load(const std::string& path);
};

/// A model plus its method attachments (prototype bank / PCM runtime),
/// ready to run forward passes and compute the training objective.
class ExperimentModel {
 public:
  static ExperimentModel build(const ExperimentConfig& cfg, std::uint64_t seed,
                               const Corpus& train_corpus);
  static ExperimentModel restore(const Checkpoint& ckpt);

  HierarchicalModel::ForwardResult forward(const Document& doc, bool training,
                                           RngStream& dropout_rng) const;
  /// Task loss plus PBR terms when active.
  ad::Var loss(const HierarchicalModel::ForwardResult& fwd,
               const std::vector<int>& gold) const;

  RunReport evaluate(const Corpus& corpus, std::uint64_t seed,
                     const std::string& fingerprint) const;

  Checkpoint to_checkpoint(const std::string& fingerprint) const;

  HierarchicalModel& model() { return *model_; }
  const HierarchicalModel& model() const { return *model_; }
  const std::string& method() const { return method_; }
  PcmRuntime* pcm() { return pcm_.get(); }
  SoftPrototypeBank* bank() { return bank_.get(); }

  void visit_params(const ParamVisitor& fn) const;
  std::vector<ad::Var> ordered_params() const;

 private:
  std::string method_ = "baseline";
  std::optional<PbrConfig> pbr_cfg_;
  std::unique_ptr<HierarchicalModel> model_;
  std::unique_ptr<SoftPrototypeBank> bank_;
  std::unique_ptr<PcmRuntime> pcm_;
};

/// Raised when the training loss stops being finite.
struct TrainingDiverged : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TrainState {
  int epoch = 0;
  int best_epoch = -1;
  double best_dev = 0.0;
  std::vector<double> step_losses;  // one entry per optimizer step
  std::vector<double> epoch_losses;
  std::vector<double> epoch_dev_scores;
  std::vector<double> best_curve;  // running best; non-decreasing
};

struct TrainOutput {
  std::string checkpoint_path;  // empty when artifacts_dir is empty
  Checkpoint best;              // best-epoch model state
  RunReport dev_report;         // report of the best epoch
  TrainState state;
};

/// Core training loop on in-memory corpora. Deterministic for a fixed
/// (config, seed, platform). Writes the best-epoch checkpoint (and its dev
/// report) under artifacts_dir unless it is empty.
TrainOutput train_on(const ExperimentConfig& cfg, std::uint64_t seed,
                     const Corpus& train_corpus, const Corpus& dev_corpus,
                     const std::string& artifacts_dir);

/// Loads the fixed train/dev split from the config and trains.
TrainOutput train(const ExperimentConfig& cfg, std::uint64_t seed);

/// Evaluates a checkpoint on a corpus. Refuses corpora whose scheme differs
/// from the checkpoint's; when `expect_fingerprint` is non-empty it must
/// match the checkpoint's.
RunReport evaluate_checkpoint(const Checkpoint& ckpt, const Corpus& corpus,
                              const std::string& expect_fingerprint = "");

struct MultiSeedOutput {
  std::vector<RunReport> reports;
  double mean_macro = 0.0, std_macro = 0.0;
  double mean_weighted = 0.0, std_weighted = 0.0;
  std::optional<SignificanceResult> significance_macro;
  std::optional<SignificanceResult> significance_weighted;
};

/// Trains every seed in the config and aggregates. When
/// `baseline_reports_dir` is non-empty, per-seed reports saved there are
/// paired by seed for significance testing (missing or mismatched seeds are
/// an error).
MultiSeedOutput run_multi_seed(const ExperimentConfig& cfg,
                               const std::string& baseline_reports_dir = "");

struct KFoldOutput {
  std::vector<RunReport> fold_test_reports;
  double mean_macro = 0.0;
  double mean_weighted = 0.0;
};

/// K-fold mode: trains one model per fold and evaluates each fold's test
/// partition; the aggregate is the mean over folds.
KFoldOutput run_kfold(const ExperimentConfig& cfg, std::uint64_t seed);

struct GridRow {
  std::map<std::string, std::string> overrides;
  double dev_macro = 0.0;
  double dev_weighted = 0.0;
};
struct GridSearchOutput {
  std::vector<GridRow> rows;
  std::size_t best_row = 0;
  ExperimentConfig best_config;
};

/// Exhaustive sweep over the product of the named axes. Axis names use
/// dotted config paths: "optimizer.learning_rate", "pbr.q",
/// "pbr.lambda_prox", "pbr.lambda_div", "pcm.injection", "pcm.sampling".
/// Rows are evaluated with the first configured seed; the best row is chosen
/// by the selection metric. Rows are independent runs with isolated state,
/// so jobs > 1 executes them on a small worker pool; results are identical
/// to the sequential order.
using GridAxes = std::vector<std::pair<std::string, std::vector<std::string>>>;
GridSearchOutput grid_search(const ExperimentConfig& cfg, const GridAxes& axes,
                             int jobs = 1);

/// Applies a single dotted-path override; shared by grid_search and the CLI.
void apply_override(ExperimentConfig& cfg, const std::string& key,
                    const std::string& value);

/// One CSV row per sentence: doc_id, index, gold label, predicted label,
/// embedding components printed at full round-trip precision.
enum class EmbeddingLayer { kPooled, kContextualized };
void export_embeddings(const Checkpoint& ckpt, const Corpus& corpus,
                       EmbeddingLayer layer, const std::string& out_path);

/// Builds prototype pools per the PCM block of the config (standalone, no
/// training) and returns them.
std::vector<PrototypeSet> build_prototypes(const ExperimentConfig& cfg);

/// Rewrites dir/manifest.json with the fingerprint of every artifact in the
/// directory (sorted by name, manifest excluded).
void update_manifest(const std::string& dir);

}  // namespace rrl
