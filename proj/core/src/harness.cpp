#include "rrl/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <nlohmann/json.hpp>

#include "rrl/version.hpp"

namespace rrl {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Independent per-purpose seed streams derived from the run seed.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t tag) {
  std::uint64_t z = seed + tag * 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}
constexpr std::uint64_t kModelTag = 1;
constexpr std::uint64_t kBankTag = 2;
constexpr std::uint64_t kPcmTag = 3;
constexpr std::uint64_t kDropoutTag = 4;
constexpr std::uint64_t kShuffleTag = 5;

void check_device() {
  if (auto dev = env_var("RRLKIT_DEVICE"); dev && *dev != "cpu") {
    throw std::runtime_error("RRLKIT_DEVICE='" + *dev +
                             "' is not supported (cpu only)");
  }
}

void ensure_dir(const std::string& dir) {
  if (!dir.empty()) fs::create_directories(dir);
}

// --- config <-> json ---------------------------------------------------------

json backbone_to_json(const BackboneConfig& b) {
  return json{{"encoder", b.encoder},
              {"fine_tune_encoder", b.fine_tune_encoder},
              {"dropout", b.dropout},
              {"max_seq_len", b.max_seq_len},
              {"word_rnn_dim", b.word_rnn_dim},
              {"sent_rnn_dim", b.sent_rnn_dim},
              {"attn_dim", b.attn_dim},
              {"use_crf", b.use_crf},
              {"rnn_cell", b.rnn_cell}};
}

BackboneConfig backbone_from_json(const json& j) {
  BackboneConfig b;
  b.encoder = j.value("encoder", b.encoder);
  b.fine_tune_encoder = j.value("fine_tune_encoder", b.fine_tune_encoder);
  b.dropout = j.value("dropout", b.dropout);
  b.max_seq_len = j.value("max_seq_len", b.max_seq_len);
  b.word_rnn_dim = j.value("word_rnn_dim", b.word_rnn_dim);
  b.sent_rnn_dim = j.value("sent_rnn_dim", b.sent_rnn_dim);
  b.attn_dim = j.value("attn_dim", b.attn_dim);
  b.use_crf = j.value("use_crf", b.use_crf);
  b.rnn_cell = j.value("rnn_cell", b.rnn_cell);
  return b;
}

json pbr_to_json(const PbrConfig& p) {
  return json{{"q", p.q},
              {"lambda_prox", p.lambda_prox},
              {"lambda_div", p.lambda_div},
              {"distance", p.distance}};
}

PbrConfig pbr_from_json(const json& j) {
  PbrConfig p;
  p.q = j.value("q", p.q);
  p.lambda_prox = j.value("lambda_prox", p.lambda_prox);
  p.lambda_div = j.value("lambda_div", p.lambda_div);
  p.distance = j.value("distance", p.distance);
  return p;
}

json sampling_to_json(const SamplingStrategy& s) {
  return json{{"kind", SamplingStrategy::kind_to_string(s.kind)},
              {"fraction", s.fraction},
              {"cluster_range", {s.cluster_min, s.cluster_max}},
              {"seed", s.seed}};
}

SamplingStrategy sampling_from_json(const json& j) {
  SamplingStrategy s;
  s.kind = SamplingStrategy::kind_from_string(j.value("kind", "full"));
  s.fraction = j.value("fraction", s.fraction);
  if (j.contains("cluster_range")) {
    s.cluster_min = j.at("cluster_range").at(0).get<int>();
    s.cluster_max = j.at("cluster_range").at(1).get<int>();
  }
  s.seed = j.value("seed", s.seed);
  return s;
}

json pcm_to_json(const PcmConfig& p) {
  return json{{"sampling", sampling_to_json(p.sampling)},
              {"sentence_embedder", p.sentence_embedder},
              {"doc_embedder", p.doc_embedder},
              {"injection", p.injection}};
}

PcmConfig pcm_from_json(const json& j) {
  PcmConfig p;
  if (j.contains("sampling")) p.sampling = sampling_from_json(j.at("sampling"));
  p.sentence_embedder = j.value("sentence_embedder", p.sentence_embedder);
  p.doc_embedder = j.value("doc_embedder", p.doc_embedder);
  p.injection = j.value("injection", p.injection);
  return p;
}

json optimizer_to_json(const OptimizerConfig& o) {
  return json{{"name", o.name},
              {"learning_rate", o.learning_rate},
              {"epochs", o.epochs},
              {"grad_clip", o.grad_clip},
              {"beta1", o.beta1},
              {"beta2", o.beta2},
              {"eps", o.eps}};
}

OptimizerConfig optimizer_from_json(const json& j) {
  OptimizerConfig o;
  o.name = j.value("name", o.name);
  o.learning_rate = j.value("learning_rate", o.learning_rate);
  o.epochs = j.value("epochs", o.epochs);
  o.grad_clip = j.value("grad_clip", o.grad_clip);
  o.beta1 = j.value("beta1", o.beta1);
  o.beta2 = j.value("beta2", o.beta2);
  o.eps = j.value("eps", o.eps);
  return o;
}

json config_to_json(const ExperimentConfig& c) {
  json j;
  j["corpus"] = {{"train", c.corpus.train_path},
                 {"dev", c.corpus.dev_path},
                 {"test", c.corpus.test_path},
                 {"file", c.corpus.file},
                 {"scheme", c.corpus.scheme_path}};
  j["split"] = {{"mode", c.split.mode}, {"k", c.split.k}, {"seed", c.split.seed}};
  j["backbone"] = backbone_to_json(c.backbone);
  j["method"] = c.method;
  if (c.pbr) j["pbr"] = pbr_to_json(*c.pbr);
  if (c.pcm) j["pcm"] = pcm_to_json(*c.pcm);
  if (!c.pcm_prototypes_file.empty()) j["pcm_prototypes_file"] = c.pcm_prototypes_file;
  j["optimizer"] = optimizer_to_json(c.optimizer);
  j["seeds"] = c.seeds;
  j["metric_for_selection"] = c.metric_for_selection;
  j["lr_grid"] = c.lr_grid;
  j["pbr_q_grid"] = c.pbr_q_grid;
  j["lambda_grid"] = c.lambda_grid;
  j["outputs"] = c.outputs;
  return j;
}

ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig c;
  if (j.contains("corpus")) {
    const auto& jc = j.at("corpus");
    c.corpus.train_path = jc.value("train", "");
    c.corpus.dev_path = jc.value("dev", "");
    c.corpus.test_path = jc.value("test", "");
    c.corpus.file = jc.value("file", "");
    c.corpus.scheme_path = jc.value("scheme", "");
  }
  if (j.contains("split")) {
    const auto& js = j.at("split");
    c.split.mode = js.value("mode", c.split.mode);
    c.split.k = js.value("k", c.split.k);
    c.split.seed = js.value("seed", c.split.seed);
  }
  if (j.contains("backbone")) c.backbone = backbone_from_json(j.at("backbone"));
  c.method = j.value("method", c.method);
  if (j.contains("pbr")) c.pbr = pbr_from_json(j.at("pbr"));
  if (j.contains("pcm")) c.pcm = pcm_from_json(j.at("pcm"));
  c.pcm_prototypes_file = j.value("pcm_prototypes_file", "");
  if (j.contains("optimizer")) c.optimizer = optimizer_from_json(j.at("optimizer"));
  if (j.contains("seeds")) c.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
  c.metric_for_selection = j.value("metric_for_selection", c.metric_for_selection);
  if (j.contains("lr_grid")) c.lr_grid = j.at("lr_grid").get<std::vector<double>>();
  if (j.contains("pbr_q_grid")) {
    c.pbr_q_grid = j.at("pbr_q_grid").get<std::vector<int>>();
  }
  if (j.contains("lambda_grid")) {
    c.lambda_grid = j.at("lambda_grid").get<std::vector<double>>();
  }
  c.outputs = j.value("outputs", c.outputs);
  return c;
}

double selection_score(const RunReport& r, const std::string& metric) {
  return metric == "weighted_f1" ? r.weighted_f1 : r.macro_f1;
}

}  // namespace

// --- ExperimentConfig ----------------------------------------------------------

void ExperimentConfig::validate() const {
  backbone.validate();
  if (method != "baseline" && method != "pbr" && method != "pcm" &&
      method != "pcm_gold") {
    throw std::invalid_argument("unknown method: '" + method + "'");
  }
  const bool wants_pbr = method == "pbr";
  const bool wants_pcm = method == "pcm" || method == "pcm_gold";
  if (wants_pbr != pbr.has_value()) {
    throw std::invalid_argument(
        "pbr config must be present exactly when method is 'pbr'");
  }
  if (wants_pcm != pcm.has_value()) {
    throw std::invalid_argument(
        "pcm config must be present exactly when method is 'pcm' or 'pcm_gold'");
  }
  if (pbr) pbr->validate();
  if (pcm) pcm->validate();
  if (metric_for_selection != "macro_f1" && metric_for_selection != "weighted_f1") {
    throw std::invalid_argument("metric_for_selection must be macro_f1 or weighted_f1");
  }
  if (split.mode != "fixed" && split.mode != "kfold") {
    throw std::invalid_argument("split.mode must be 'fixed' or 'kfold'");
  }
  if (optimizer.epochs < 1) throw std::invalid_argument("epochs must be >= 1");
  if (optimizer.learning_rate <= 0.0) {
    throw std::invalid_argument("learning rate must be positive");
  }
  if (seeds.empty()) throw std::invalid_argument("at least one seed required");
}

std::string ExperimentConfig::fingerprint() const {
  json j = config_to_json(*this);
  j.erase("outputs");
  j.erase("seeds");
  return fnv1a_hex(j.dump());
}

std::string ExperimentConfig::resolved_outputs() const {
  if (auto o = env_var("RRLKIT_OUTPUTS")) return *o;
  return outputs;
}

std::string ExperimentConfig::to_json_string() const {
  return config_to_json(*this).dump(2);
}

ExperimentConfig ExperimentConfig::from_json_string(const std::string& s) {
  return config_from_json(json::parse(s));
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw std::runtime_error("malformed config " + path + ": " + e.what());
  }
  return config_from_json(j);
}

void ExperimentConfig::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write config file: " + path);
  out << to_json_string() << "\n";
}

// --- Checkpoint ------------------------------------------------------------------

void Checkpoint::save(const std::string& path) const {
  json j;
  j["format"] = "rrlkit-checkpoint";
  j["version"] = kCheckpointFormatVersion;
  j["config_fingerprint"] = config_fingerprint;
  j["backbone"] = backbone_to_json(backbone);
  j["scheme"] = {{"name", scheme.name()},
                 {"level", to_string(scheme.level())},
                 {"labels", scheme.labels()}};
  j["method"] = method;
  if (pbr) j["pbr"] = pbr_to_json(*pbr);
  if (pcm) j["pcm"] = pcm_to_json(*pcm);
  json jparams = json::object();
  for (const auto& [name, mat] : params) {
    std::vector<double> data;
    data.reserve(static_cast<std::size_t>(mat.size()));
    for (Eigen::Index r = 0; r < mat.rows(); ++r) {
      for (Eigen::Index c = 0; c < mat.cols(); ++c) data.push_back(mat(r, c));
    }
    jparams[name] = {{"rows", mat.rows()}, {"cols", mat.cols()}, {"data", data}};
  }
  j["params"] = std::move(jparams);

  ensure_dir(fs::path(path).parent_path().string());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
  out << j.dump() << "\n";

  if (!pcm_pools.empty()) {
    save_prototype_pools(pcm_pools, path + ".protos");
  }
}

Checkpoint Checkpoint::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
  json j;
  in >> j;
  if (j.value("format", "") != "rrlkit-checkpoint") {
    throw std::runtime_error(path + ": not a checkpoint file");
  }
  Checkpoint c;
  c.format_version = j.at("version").get<int>();
  if (c.format_version != kCheckpointFormatVersion) {
    throw std::runtime_error(path + ": unsupported checkpoint version " +
                             std::to_string(c.format_version));
  }
  c.config_fingerprint = j.value("config_fingerprint", "");
  c.backbone = backbone_from_json(j.at("backbone"));
  const auto& js = j.at("scheme");
  c.scheme = LabelScheme(js.at("name").get<std::string>(),
                         scheme_level_from_string(js.at("level")),
                         js.at("labels").get<std::vector<std::string>>());
  c.method = j.value("method", "baseline");
  if (j.contains("pbr")) c.pbr = pbr_from_json(j.at("pbr"));
  if (j.contains("pcm")) c.pcm = pcm_from_json(j.at("pcm"));
  for (const auto& [name, jm] : j.at("params").items()) {
    const Eigen::Index rows = jm.at("rows").get<Eigen::Index>();
    const Eigen::Index cols = jm.at("cols").get<Eigen::Index>();
    auto data = jm.at("data").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(data.size()) != rows * cols) {
      throw std::runtime_error(path + ": parameter '" + name + "' size mismatch");
    }
    Eigen::MatrixXd m(rows, cols);
    std::size_t i = 0;
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (Eigen::Index cc = 0; cc < cols; ++cc) m(r, cc) = data[i++];
    }
    c.params.emplace(name, std::move(m));
  }
  if (fs::exists(path + ".protos")) {
    c.pcm_pools = load_prototype_pools(path + ".protos");
  }
  return c;
}

// --- ExperimentModel ---------------------------------------------------------------

ExperimentModel ExperimentModel::build(const ExperimentConfig& cfg,
                                       std::uint64_t seed,
                                       const Corpus& train_corpus) {
  cfg.validate();
  ExperimentModel em;
  em.method_ = cfg.method;
  em.model_ = std::make_unique<HierarchicalModel>(
      cfg.backbone, train_corpus.scheme(), mix_seed(seed, kModelTag));
  if (cfg.method == "pbr") {
    em.pbr_cfg_ = *cfg.pbr;
    em.bank_ = std::make_unique<SoftPrototypeBank>(
        cfg.pbr->q, cfg.backbone.word_rnn_dim, mix_seed(seed, kBankTag));
  } else if (cfg.method == "pcm" || cfg.method == "pcm_gold") {
    PcmConfig pc = *cfg.pcm;
    pc.gold_oracle = cfg.method == "pcm_gold";
    if (!cfg.pcm_prototypes_file.empty()) {
      em.pcm_ = std::make_unique<PcmRuntime>(
          load_prototype_pools(cfg.pcm_prototypes_file), pc,
          cfg.backbone.word_rnn_dim, mix_seed(seed, kPcmTag));
    } else {
      em.pcm_ = std::make_unique<PcmRuntime>(train_corpus, pc,
                                             cfg.backbone.word_rnn_dim,
                                             mix_seed(seed, kPcmTag));
    }
  }
  return em;
}

ExperimentModel ExperimentModel::restore(const Checkpoint& ckpt) {
  ExperimentModel em;
  em.method_ = ckpt.method;
  em.model_ = std::make_unique<HierarchicalModel>(ckpt.backbone, ckpt.scheme,
                                                  /*seed=*/0);
  if (ckpt.method == "pbr") {
    if (!ckpt.pbr) throw std::runtime_error("checkpoint: missing pbr config");
    em.pbr_cfg_ = *ckpt.pbr;
    em.bank_ = std::make_unique<SoftPrototypeBank>(
        ckpt.pbr->q, ckpt.backbone.word_rnn_dim, /*seed=*/0);
  } else if (ckpt.method == "pcm" || ckpt.method == "pcm_gold") {
    if (!ckpt.pcm) throw std::runtime_error("checkpoint: missing pcm config");
    if (ckpt.pcm_pools.empty()) {
      throw std::runtime_error("checkpoint: missing prototype pools");
    }
    PcmConfig pc = *ckpt.pcm;
    pc.gold_oracle = ckpt.method == "pcm_gold";
    em.pcm_ = std::make_unique<PcmRuntime>(ckpt.pcm_pools, pc,
                                           ckpt.backbone.word_rnn_dim,
                                           /*seed=*/0);
  }

  std::size_t assigned = 0;
  em.visit_params([&](const std::string& name, ad::Var& p) {
    auto it = ckpt.params.find(name);
    if (it == ckpt.params.end()) {
      throw std::runtime_error("checkpoint: missing parameter '" + name + "'");
    }
    if (it->second.rows() != p.rows() || it->second.cols() != p.cols()) {
      throw std::runtime_error("checkpoint: shape mismatch for '" + name + "'");
    }
    p.mutable_value() = it->second;
    ++assigned;
  });
  if (assigned != ckpt.params.size()) {
    throw std::runtime_error("checkpoint: contains parameters unknown to the model");
  }
  return em;
}

HierarchicalModel::ForwardResult ExperimentModel::forward(
    const Document& doc, bool training, RngStream& dropout_rng) const {
  if (pcm_) {
    auto hook = pcm_->hook_for(doc);
    return model_->forward(doc, training, dropout_rng, &hook);
  }
  return model_->forward(doc, training, dropout_rng);
}

ad::Var ExperimentModel::loss(const HierarchicalModel::ForwardResult& fwd,
                              const std::vector<int>& gold) const {
  ad::Var task = model_->task_loss(fwd, gold);
  if (!bank_) return task;
  ad::Var prox = prox_loss(fwd.pooled, *bank_);
  ad::Var div = div_loss(*bank_);
  return pbr_total_loss(task, prox, div, *pbr_cfg_);
}

RunReport ExperimentModel::evaluate(const Corpus& corpus, std::uint64_t seed,
                                    const std::string& fingerprint) const {
  ConfusionTally tally(model_->scheme());
  RngStream rng(0);  // eval applies no dropout; stream is unused
  for (const auto& doc : corpus.documents()) {
    auto fwd = forward(doc, /*training=*/false, rng);
    tally.add_sequence(model_->gold_indices(doc), fwd.predictions);
  }
  return make_run_report(tally, seed, fingerprint);
}

Checkpoint ExperimentModel::to_checkpoint(const std::string& fingerprint) const {
  Checkpoint c;
  c.format_version = kCheckpointFormatVersion;
  c.config_fingerprint = fingerprint;
  c.backbone = model_->config();
  c.scheme = model_->scheme();
  c.method = method_;
  c.pbr = pbr_cfg_;
  if (pcm_) {
    c.pcm = pcm_->config();
    c.pcm_pools = pcm_->pools();
  }
  visit_params([&](const std::string& name, ad::Var& p) {
    c.params.emplace(name, p.value());
  });
  return c;
}

void ExperimentModel::visit_params(const ParamVisitor& fn) const {
  model_->visit_params(fn);
  if (bank_) bank_->visit_params(fn);
  if (pcm_) pcm_->visit_params(fn);
}

std::vector<ad::Var> ExperimentModel::ordered_params() const {
  std::vector<ad::Var> out;
  visit_params([&](const std::string&, ad::Var& p) { out.push_back(p); });
  return out;
}

// --- training loop -------------------------------------------------------------------

TrainOutput train_on(const ExperimentConfig& cfg, std::uint64_t seed,
                     const Corpus& train_corpus, const Corpus& dev_corpus,
                     const std::string& artifacts_dir) {
  cfg.validate();
  check_device();
  if (train_corpus.num_documents() == 0) {
    throw std::invalid_argument("train: empty training corpus");
  }
  if (dev_corpus.num_documents() == 0) {
    throw std::invalid_argument("train: empty dev corpus (model selection needs one)");
  }
  const std::string fp = cfg.fingerprint();

  ExperimentModel em = ExperimentModel::build(cfg, seed, train_corpus);
  Adam adam(em.ordered_params(), cfg.optimizer);
  RngStream dropout_rng(mix_seed(seed, kDropoutTag));
  RngStream shuffle_rng(mix_seed(seed, kShuffleTag));

  TrainOutput out;
  TrainState& st = out.state;
  std::vector<std::size_t> order(train_corpus.num_documents());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int epoch = 1; epoch <= cfg.optimizer.epochs; ++epoch) {
    st.epoch = epoch;
    std::shuffle(order.begin(), order.end(), shuffle_rng.engine());
    double epoch_loss = 0.0;
    for (std::size_t idx : order) {
      const Document& doc = train_corpus.document(idx);
      auto fwd = em.forward(doc, /*training=*/true, dropout_rng);
      ad::Var loss = em.loss(fwd, em.model().gold_indices(doc));
      const double loss_val = ad::scalar(loss);
      if (!std::isfinite(loss_val)) {
        throw TrainingDiverged("training diverged: non-finite loss on doc '" +
                               doc.doc_id + "' at epoch " +
                               std::to_string(epoch) + " (seed " +
                               std::to_string(seed) + ")");
      }
      epoch_loss += loss_val;
      st.step_losses.push_back(loss_val);
      ad::backward(loss);
      adam.step();
    }
    st.epoch_losses.push_back(epoch_loss);

    RunReport dev = em.evaluate(dev_corpus, seed, fp);
    const double score = selection_score(dev, cfg.metric_for_selection);
    st.epoch_dev_scores.push_back(score);
    if (st.best_epoch < 0 || score > st.best_dev) {
      st.best_dev = score;
      st.best_epoch = epoch;
      out.best = em.to_checkpoint(fp);
      out.dev_report = dev;
    }
    st.best_curve.push_back(st.best_dev);
  }

  if (!artifacts_dir.empty()) {
    const std::string ckpt_dir = artifacts_dir + "/checkpoints";
    const std::string report_dir = artifacts_dir + "/reports";
    ensure_dir(ckpt_dir);
    ensure_dir(report_dir);
    out.checkpoint_path = ckpt_dir + "/seed-" + std::to_string(seed) + ".json";
    out.best.save(out.checkpoint_path);
    std::ofstream rep(report_dir + "/seed-" + std::to_string(seed) + ".json");
    rep << out.dev_report.to_json_string() << "\n";
    rep.close();
    update_manifest(ckpt_dir);
    update_manifest(report_dir);
    if (!out.best.pcm_pools.empty()) {
      const std::string proto_dir = artifacts_dir + "/prototypes";
      ensure_dir(proto_dir);
      save_prototype_pools(out.best.pcm_pools,
                           proto_dir + "/seed-" + std::to_string(seed) + ".json");
      update_manifest(proto_dir);
    }
  }
  return out;
}

namespace {

LabelScheme load_scheme_checked(const ExperimentConfig& cfg) {
  if (cfg.corpus.scheme_path.empty()) {
    throw std::invalid_argument("config: corpus.scheme path is required");
  }
  return LabelScheme::load(cfg.corpus.scheme_path);
}

}  // namespace

TrainOutput train(const ExperimentConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  if (cfg.split.mode != "fixed") {
    throw std::invalid_argument(
        "train() requires split.mode=fixed; use run_kfold for k-fold mode");
  }
  const LabelScheme scheme = load_scheme_checked(cfg);
  Corpus trainc = load_corpus(cfg.corpus.train_path, scheme);
  Corpus devc = load_corpus(cfg.corpus.dev_path, scheme);
  return train_on(cfg, seed, trainc, devc, cfg.resolved_outputs());
}

RunReport evaluate_checkpoint(const Checkpoint& ckpt, const Corpus& corpus,
                              const std::string& expect_fingerprint) {
  if (!expect_fingerprint.empty() &&
      expect_fingerprint != ckpt.config_fingerprint) {
    throw std::runtime_error(
        "checkpoint/config mismatch: fingerprint " + ckpt.config_fingerprint +
        " does not match expected " + expect_fingerprint);
  }
  if (corpus.scheme().labels() != ckpt.scheme.labels() ||
      corpus.scheme().level() != ckpt.scheme.level()) {
    throw std::runtime_error(
        "checkpoint/corpus mismatch: label schemes differ");
  }
  ExperimentModel em = ExperimentModel::restore(ckpt);
  return em.evaluate(corpus, /*seed=*/0, ckpt.config_fingerprint);
}

MultiSeedOutput run_multi_seed(const ExperimentConfig& cfg,
                               const std::string& baseline_reports_dir) {
  cfg.validate();
  if (cfg.seeds.size() < 2) {
    throw std::invalid_argument("run_multi_seed: needs at least 2 seeds");
  }
  MultiSeedOutput out;
  for (std::uint64_t seed : cfg.seeds) {
    out.reports.push_back(train(cfg, seed).dev_report);
  }
  // Welford's online moments: exact zero spread for identical runs.
  const auto n = static_cast<double>(out.reports.size());
  double m_m = 0.0, m2_m = 0.0, m_w = 0.0, m2_w = 0.0;
  for (std::size_t i = 0; i < out.reports.size(); ++i) {
    const double k = static_cast<double>(i + 1);
    const double dm = out.reports[i].macro_f1 - m_m;
    m_m += dm / k;
    m2_m += dm * (out.reports[i].macro_f1 - m_m);
    const double dw = out.reports[i].weighted_f1 - m_w;
    m_w += dw / k;
    m2_w += dw * (out.reports[i].weighted_f1 - m_w);
  }
  out.mean_macro = m_m;
  out.mean_weighted = m_w;
  out.std_macro = std::sqrt(m2_m / (n - 1.0));
  out.std_weighted = std::sqrt(m2_w / (n - 1.0));

  if (!baseline_reports_dir.empty()) {
    std::vector<double> ours_m, base_m, ours_w, base_w;
    for (std::size_t i = 0; i < cfg.seeds.size(); ++i) {
      const std::string path = baseline_reports_dir + "/seed-" +
                               std::to_string(cfg.seeds[i]) + ".json";
      std::ifstream in(path);
      if (!in) {
        throw std::runtime_error(
            "baseline run-set missing report for seed " +
            std::to_string(cfg.seeds[i]) + " (" + path + ")");
      }
      std::stringstream ss;
      ss << in.rdbuf();
      RunReport base = RunReport::from_json_string(ss.str());
      if (base.seed != cfg.seeds[i]) {
        throw std::runtime_error("baseline report seed mismatch in " + path);
      }
      ours_m.push_back(out.reports[i].macro_f1);
      ours_w.push_back(out.reports[i].weighted_f1);
      base_m.push_back(base.macro_f1);
      base_w.push_back(base.weighted_f1);
    }
    out.significance_macro = significance_test(ours_m, base_m);
    out.significance_weighted = significance_test(ours_w, base_w);
  }

  // Persist the aggregate next to the per-seed reports.
  const std::string dir = cfg.resolved_outputs();
  if (!dir.empty()) {
    const std::string report_dir = dir + "/reports";
    ensure_dir(report_dir);
    json j;
    j["mean_macro_f1"] = out.mean_macro;
    j["std_macro_f1"] = out.std_macro;
    j["mean_weighted_f1"] = out.mean_weighted;
    j["std_weighted_f1"] = out.std_weighted;
    j["seeds"] = cfg.seeds;
    j["config_fingerprint"] = cfg.fingerprint();
    if (out.significance_macro) {
      j["significance_macro"] = {
          {"t", out.significance_macro->t_statistic},
          {"p", out.significance_macro->p_value},
          {"significant_at_05", out.significance_macro->significant_at_05},
          {"significant_at_01", out.significance_macro->significant_at_01}};
    }
    std::ofstream agg(report_dir + "/aggregate.json");
    agg << j.dump(2) << "\n";
    agg.close();
    update_manifest(report_dir);
  }
  return out;
}

KFoldOutput run_kfold(const ExperimentConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  if (cfg.split.mode != "kfold") {
    throw std::invalid_argument("run_kfold requires split.mode=kfold");
  }
  if (cfg.corpus.file.empty()) {
    throw std::invalid_argument("k-fold mode needs corpus.file");
  }
  const LabelScheme scheme = load_scheme_checked(cfg);
  Corpus all = load_corpus(cfg.corpus.file, scheme);
  auto splits = make_kfold_splits(all, cfg.split.k, cfg.split.seed);

  KFoldOutput out;
  const std::string base_dir = cfg.resolved_outputs();
  for (const auto& split : splits) {
    Corpus trainc = all.subset(split.train);
    Corpus devc = all.subset(split.dev);
    Corpus testc = all.subset(split.test);
    const std::string dir =
        base_dir.empty() ? ""
                         : base_dir + "/fold-" + std::to_string(*split.fold_index);
    TrainOutput t = train_on(cfg, seed, trainc, devc, dir);
    RunReport test_report = evaluate_checkpoint(t.best, testc);
    test_report.seed = seed;
    out.fold_test_reports.push_back(std::move(test_report));
  }
  for (const auto& r : out.fold_test_reports) {
    out.mean_macro += r.macro_f1;
    out.mean_weighted += r.weighted_f1;
  }
  out.mean_macro /= static_cast<double>(out.fold_test_reports.size());
  out.mean_weighted /= static_cast<double>(out.fold_test_reports.size());
  return out;
}

// --- grid search ----------------------------------------------------------------------

void apply_override(ExperimentConfig& cfg, const std::string& key,
                    const std::string& value) {
  if (key == "optimizer.learning_rate") {
    cfg.optimizer.learning_rate = std::stod(value);
  } else if (key == "optimizer.epochs") {
    cfg.optimizer.epochs = std::stoi(value);
  } else if (key == "backbone.dropout") {
    cfg.backbone.dropout = std::stod(value);
  } else if (key == "method") {
    cfg.method = value;
  } else if (key == "pbr.q") {
    if (!cfg.pbr) throw std::invalid_argument("override pbr.q: no pbr config");
    cfg.pbr->q = std::stoi(value);
  } else if (key == "pbr.lambda_prox") {
    if (!cfg.pbr) throw std::invalid_argument("override pbr.lambda_prox: no pbr config");
    cfg.pbr->lambda_prox = std::stod(value);
  } else if (key == "pbr.lambda_div") {
    if (!cfg.pbr) throw std::invalid_argument("override pbr.lambda_div: no pbr config");
    cfg.pbr->lambda_div = std::stod(value);
  } else if (key == "pcm.injection") {
    if (!cfg.pcm) throw std::invalid_argument("override pcm.injection: no pcm config");
    cfg.pcm->injection = value;
  } else if (key == "pcm.sampling") {
    if (!cfg.pcm) throw std::invalid_argument("override pcm.sampling: no pcm config");
    cfg.pcm->sampling.kind = SamplingStrategy::kind_from_string(value);
  } else {
    throw std::invalid_argument("unknown override key: '" + key + "'");
  }
}

GridSearchOutput grid_search(const ExperimentConfig& cfg, const GridAxes& axes,
                             int jobs) {
  cfg.validate();
  if (axes.empty()) throw std::invalid_argument("grid_search: empty lattice");
  for (const auto& [key, values] : axes) {
    if (values.empty()) {
      throw std::invalid_argument("grid_search: axis '" + key + "' has no values");
    }
  }
  const LabelScheme scheme = load_scheme_checked(cfg);
  const Corpus trainc = load_corpus(cfg.corpus.train_path, scheme);
  const Corpus devc = load_corpus(cfg.corpus.dev_path, scheme);

  // Materialize the lattice first (mixed-radix counter over the axes); rows
  // are then independent training runs over shared read-only corpora.
  std::vector<ExperimentConfig> points;
  std::vector<GridRow> rows;
  {
    std::vector<std::size_t> idx(axes.size(), 0);
    bool done = false;
    while (!done) {
      ExperimentConfig point = cfg;
      GridRow row;
      for (std::size_t a = 0; a < axes.size(); ++a) {
        apply_override(point, axes[a].first, axes[a].second[idx[a]]);
        row.overrides[axes[a].first] = axes[a].second[idx[a]];
      }
      points.push_back(std::move(point));
      rows.push_back(std::move(row));
      done = true;
      for (std::size_t a = 0; a < axes.size(); ++a) {
        if (++idx[a] < axes[a].second.size()) {
          done = false;
          break;
        }
        idx[a] = 0;
      }
    }
  }

  const int workers = std::max(
      1, std::min<int>(jobs, static_cast<int>(points.size())));
  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::exception_ptr first_error;
  auto run_rows = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= points.size()) return;
      try {
        TrainOutput t = train_on(points[i], cfg.seeds.front(), trainc, devc, "");
        rows[i].dev_macro = t.dev_report.macro_f1;
        rows[i].dev_weighted = t.dev_report.weighted_f1;
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };
  if (workers == 1) {
    run_rows();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) pool.emplace_back(run_rows);
    for (auto& th : pool) th.join();
  }
  if (first_error) std::rethrow_exception(first_error);

  GridSearchOutput out;
  out.rows = std::move(rows);
  for (std::size_t i = 0; i < out.rows.size(); ++i) {
    const double score = cfg.metric_for_selection == "weighted_f1"
                             ? out.rows[i].dev_weighted
                             : out.rows[i].dev_macro;
    const double best_score = cfg.metric_for_selection == "weighted_f1"
                                  ? out.rows[out.best_row].dev_weighted
                                  : out.rows[out.best_row].dev_macro;
    if (i == 0 || score > best_score) {
      out.best_row = i;
      out.best_config = points[i];
    }
  }

  const std::string dir = cfg.resolved_outputs();
  if (!dir.empty()) {
    const std::string report_dir = dir + "/reports";
    ensure_dir(report_dir);
    json rows = json::array();
    for (const auto& r : out.rows) {
      rows.push_back({{"overrides", r.overrides},
                      {"dev_macro_f1", r.dev_macro},
                      {"dev_weighted_f1", r.dev_weighted}});
    }
    json j;
    j["rows"] = std::move(rows);
    j["best_row"] = out.best_row;
    j["config_fingerprint"] = cfg.fingerprint();
    std::ofstream f(report_dir + "/grid.json");
    f << j.dump(2) << "\n";
    f.close();
    update_manifest(report_dir);
  }
  return out;
}

// --- exports -------------------------------------------------------------------------

void export_embeddings(const Checkpoint& ckpt, const Corpus& corpus,
                       EmbeddingLayer layer, const std::string& out_path) {
  if (corpus.scheme().labels() != ckpt.scheme.labels() ||
      corpus.scheme().level() != ckpt.scheme.level()) {
    throw std::runtime_error("export: checkpoint/corpus scheme mismatch");
  }
  ExperimentModel em = ExperimentModel::restore(ckpt);
  ensure_dir(fs::path(out_path).parent_path().string());
  std::ofstream out(out_path);
  if (!out) throw std::runtime_error("cannot write export file: " + out_path);

  RngStream rng(0);
  const SchemeLevel level = corpus.scheme().level();
  char buf[64];
  out << "doc_id,sentence_index,gold,predicted,embedding\n";
  for (const auto& doc : corpus.documents()) {
    auto fwd = em.forward(doc, /*training=*/false, rng);
    const auto& vecs = layer == EmbeddingLayer::kPooled ? fwd.pooled
                                                        : fwd.contextualized;
    for (std::size_t i = 0; i < doc.sentences.size(); ++i) {
      out << doc.doc_id << ',' << i << ','
          << doc.sentences[i].label_at(level) << ','
          << corpus.scheme().label_at(fwd.predictions[i]);
      const auto& v = vecs[i].value();
      for (Eigen::Index r = 0; r < v.rows(); ++r) {
        std::snprintf(buf, sizeof(buf), "%.17g", v(r, 0));
        out << (r == 0 ? ',' : ';') << buf;
      }
      out << '\n';
    }
  }
  out.close();
  const std::string parent = fs::path(out_path).parent_path().string();
  if (!parent.empty()) update_manifest(parent);
}

std::vector<PrototypeSet> build_prototypes(const ExperimentConfig& cfg) {
  if (!cfg.pcm) {
    throw std::invalid_argument("build_prototypes: config has no pcm block");
  }
  const LabelScheme scheme = load_scheme_checked(cfg);
  const std::string path =
      cfg.corpus.train_path.empty() ? cfg.corpus.file : cfg.corpus.train_path;
  if (path.empty()) {
    throw std::invalid_argument("build_prototypes: no training corpus configured");
  }
  Corpus corpus = load_corpus(path, scheme);
  return build_prototype_pools(corpus, *cfg.pcm);
}

void update_manifest(const std::string& dir) {
  json artifacts = json::array();
  std::vector<std::string> names;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const std::string name = entry.path().filename().string();
    if (name == "manifest.json") continue;
    names.push_back(name);
  }
  std::sort(names.begin(), names.end());
  for (const auto& name : names) {
    std::ifstream in(dir + "/" + name, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    artifacts.push_back({{"file", name}, {"fingerprint", fnv1a_hex(ss.str())}});
  }
  json j;
  j["version"] = kVersion;
  j["artifacts"] = std::move(artifacts);
  std::ofstream out(dir + "/manifest.json");
  out << j.dump(2) << "\n";
}

}  // namespace rrl
