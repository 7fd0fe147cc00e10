#include "rrl/pcm.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "rrl/cluster.hpp"
#include "rrl/pbr.hpp"
#include "rrl/version.hpp"

namespace rrl {

using nlohmann::json;

void SamplingStrategy::validate() const {
  if (kind == Kind::kRandom && (fraction <= 0.0 || fraction > 1.0)) {
    throw std::invalid_argument("random sampling: fraction must be in (0, 1]");
  }
  if (kind == Kind::kSupervised) {
    if (cluster_min < 2) {
      throw std::invalid_argument("supervised sampling: cluster_min must be >= 2");
    }
    if (cluster_max < cluster_min) {
      throw std::invalid_argument("supervised sampling: empty cluster range");
    }
  }
}

SamplingStrategy::Kind SamplingStrategy::kind_from_string(const std::string& s) {
  if (s == "full") return Kind::kFull;
  if (s == "random") return Kind::kRandom;
  if (s == "supervised") return Kind::kSupervised;
  throw std::invalid_argument("unknown sampling strategy: '" + s + "'");
}

std::string SamplingStrategy::kind_to_string(Kind k) {
  switch (k) {
    case Kind::kFull: return "full";
    case Kind::kRandom: return "random";
    case Kind::kSupervised: return "supervised";
  }
  throw std::logic_error("unreachable sampling kind");
}

PrototypeSet::PrototypeSet(
    SchemeLevel level,
    std::vector<std::pair<std::string, Eigen::VectorXd>> entries,
    PrototypeProvenance provenance)
    : level_(level), entries_(std::move(entries)),
      provenance_(std::move(provenance)) {
  for (const auto& [label, vec] : entries_) {
    if (vec.size() == 0 || !vec.allFinite() || vec.norm() <= 0.0) {
      throw std::invalid_argument("prototype for '" + label +
                                  "' is empty, non-finite or zero");
    }
  }
}

const Eigen::VectorXd* PrototypeSet::find(const std::string& role) const {
  for (const auto& [label, vec] : entries_) {
    if (label == role) return &vec;
  }
  return nullptr;
}

int PrototypeSet::dim() const {
  return entries_.empty() ? 0 : static_cast<int>(entries_.front().second.size());
}

SampledPools sample_documents(const Corpus& corpus,
                              const SamplingStrategy& strategy,
                              const DocEmbedder* doc_embedder) {
  strategy.validate();
  const auto& docs = corpus.documents();
  const int m = static_cast<int>(docs.size());
  if (m == 0) throw std::invalid_argument("sample_documents: empty corpus");

  SampledPools out;
  switch (strategy.kind) {
    case SamplingStrategy::Kind::kFull: {
      std::vector<std::string> pool;
      pool.reserve(m);
      for (const auto& d : docs) pool.push_back(d.doc_id);
      out.pools.push_back(std::move(pool));
      return out;
    }
    case SamplingStrategy::Kind::kRandom: {
      const int take = std::max(
          1, static_cast<int>(std::lround(strategy.fraction * m)));
      std::vector<int> order(m);
      for (int i = 0; i < m; ++i) order[i] = i;
      std::mt19937_64 rng(strategy.seed);
      std::shuffle(order.begin(), order.end(), rng);
      order.resize(std::min(take, m));
      std::sort(order.begin(), order.end());  // corpus order within the pool
      std::vector<std::string> pool;
      pool.reserve(order.size());
      for (int i : order) pool.push_back(docs[i].doc_id);
      out.pools.push_back(std::move(pool));
      return out;
    }
    case SamplingStrategy::Kind::kSupervised: {
      if (m < 2) {
        throw std::invalid_argument(
            "supervised sampling requires at least 2 documents");
      }
      if (doc_embedder == nullptr) {
        throw std::invalid_argument(
            "supervised sampling requires a document embedder");
      }
      Eigen::MatrixXd points(m, doc_embedder->dim());
      for (int i = 0; i < m; ++i) {
        points.row(i) = doc_embedder->embed(docs[i]).transpose();
      }
      // Candidate range [2, max(2, min(cluster_max, M-1))]. With exactly two
      // documents the only candidate is k = 2, where the silhouette is
      // undefined; cluster directly and report a zero score.
      const int k_hi = std::max(2, std::min(strategy.cluster_max, m - 1));
      const int k_lo = std::min(strategy.cluster_min, k_hi);
      KMeansResult clustering;
      if (k_hi >= m) {
        clustering = kmeans(points, k_hi, strategy.seed + k_hi);
        out.selected_k = k_hi;
        out.silhouette = 0.0;
      } else {
        BestClustering best =
            select_k_by_silhouette(points, k_lo, k_hi, strategy.seed);
        clustering = std::move(best.result);
        out.selected_k = best.k;
        out.silhouette = best.silhouette;
      }
      out.centroids = clustering.centroids;
      out.pools.assign(out.selected_k, {});
      for (int i = 0; i < m; ++i) {
        out.pools[clustering.assignment[i]].push_back(docs[i].doc_id);
      }
      return out;
    }
  }
  throw std::logic_error("unreachable sampling kind");
}

PrototypeSet extract_prototypes(const std::vector<const Document*>& pool,
                                const LabelScheme& scheme,
                                const SentenceEmbedder& embedder,
                                PrototypeProvenance provenance) {
  if (pool.empty()) throw std::invalid_argument("extract_prototypes: empty pool");
  const SchemeLevel level = scheme.level();
  std::vector<Eigen::VectorXd> sums(scheme.size(),
                                    Eigen::VectorXd::Zero(embedder.dim()));
  std::vector<long> counts(scheme.size(), 0);
  for (const Document* doc : pool) {
    for (const Sentence& s : doc->sentences) {
      const int idx = scheme.index_of(s.label_at(level));
      if (idx < 0) {
        throw std::invalid_argument("extract_prototypes: label outside scheme");
      }
      sums[idx] += embedder.embed(s);
      ++counts[idx];
    }
  }
  std::vector<std::pair<std::string, Eigen::VectorXd>> entries;
  for (std::size_t i = 0; i < scheme.size(); ++i) {
    if (counts[i] > 0) {
      entries.emplace_back(scheme.label_at(i),
                           sums[i] / static_cast<double>(counts[i]));
    }
  }
  if (entries.empty()) {
    throw std::invalid_argument("extract_prototypes: no role has support");
  }
  provenance.embedder_key = embedder.key();
  return PrototypeSet(level, std::move(entries), std::move(provenance));
}

std::pair<std::string, Eigen::VectorXd> assign_prototype(
    const Eigen::VectorXd& sentence_embedding, const PrototypeSet& protos) {
  if (protos.empty()) throw std::invalid_argument("assign_prototype: empty set");
  if (sentence_embedding.norm() <= 1e-12) {
    throw std::invalid_argument("assign_prototype: zero-norm embedding");
  }
  const auto& entries = protos.entries();
  std::size_t best = 0;
  double best_sim = 1.0 - cosine_distance(sentence_embedding, entries[0].second);
  for (std::size_t k = 1; k < entries.size(); ++k) {
    const double sim =
        1.0 - cosine_distance(sentence_embedding, entries[k].second);
    if (sim > best_sim) {  // strict: ties keep the earlier scheme label
      best_sim = sim;
      best = k;
    }
  }
  return entries[best];
}

std::pair<std::string, Eigen::VectorXd> gold_assign(const Sentence& sentence,
                                                    const PrototypeSet& protos) {
  const std::string& gold = sentence.label_at(protos.level());
  const Eigen::VectorXd* p = protos.find(gold);
  if (p == nullptr) {
    throw std::runtime_error("gold_assign: no prototype for gold label '" +
                             gold + "'");
  }
  return {gold, *p};
}

// --- injection modules -------------------------------------------------------

namespace {

Eigen::MatrixXd small_noise(Eigen::Index rows, Eigen::Index cols, RngStream& rng,
                            double stddev = 0.02) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = rng.normal(0.0, stddev);
  }
  return m;
}

void check_dims(const ad::Var& h, const ad::Var& p, int dim, int proto_dim,
                const std::string& kind) {
  if (h.rows() != dim || h.cols() != 1) {
    throw std::invalid_argument(kind + ": sentence vector dim mismatch");
  }
  if (p.rows() != proto_dim || p.cols() != 1) {
    throw std::invalid_argument(kind + ": prototype vector dim mismatch");
  }
}

/// W [h; p] + b, initialized so the h block starts at identity.
class LinearFusion final : public InjectionModule {
 public:
  LinearFusion(int dim, int proto_dim, RngStream& rng)
      : dim_(dim), proto_dim_(proto_dim) {
    Eigen::MatrixXd w(dim, dim + proto_dim);
    w << Eigen::MatrixXd::Identity(dim, dim), small_noise(dim, proto_dim, rng);
    w_ = ad::Var::param(std::move(w));
    b_ = ad::Var::param(Eigen::MatrixXd::Zero(dim, 1));
  }
  const std::string& kind() const override {
    static const std::string k = "linear_fusion";
    return k;
  }
  ad::Var apply(const ad::Var& h, const ad::Var& p) const override {
    check_dims(h, p, dim_, proto_dim_, kind());
    return ad::add(ad::matmul(w_, ad::vcat({h, p})), b_);
  }
  void visit_params(const ParamVisitor& fn) override {
    fn("inject.linear_fusion.w", w_);
    fn("inject.linear_fusion.b", b_);
  }

 private:
  int dim_, proto_dim_;
  ad::Var w_, b_;
};

/// Normalize h to zero mean / unit variance across features, then rescale
/// and shift with prototype-derived gain and bias.
class ConditionalLayerNorm final : public InjectionModule {
 public:
  static constexpr double kEps = 1e-5;

  ConditionalLayerNorm(int dim, int proto_dim, RngStream& rng)
      : dim_(dim), proto_dim_(proto_dim) {
    w_gamma_ = ad::Var::param(small_noise(dim, proto_dim, rng));
    b_gamma_ = ad::Var::param(Eigen::MatrixXd::Ones(dim, 1));
    w_beta_ = ad::Var::param(small_noise(dim, proto_dim, rng));
    b_beta_ = ad::Var::param(Eigen::MatrixXd::Zero(dim, 1));
  }
  const std::string& kind() const override {
    static const std::string k = "cln";
    return k;
  }
  ad::Var apply(const ad::Var& h, const ad::Var& p) const override {
    check_dims(h, p, dim_, proto_dim_, kind());
    ad::Var mu = ad::mean(h);
    ad::Var centered = ad::sub(h, mu);
    ad::Var var = ad::mean(ad::mul(centered, centered));
    ad::Var norm = ad::cdiv(centered, ad::sqrt(ad::add_const(var, kEps)));
    ad::Var gamma = ad::add(ad::matmul(w_gamma_, p), b_gamma_);
    ad::Var beta = ad::add(ad::matmul(w_beta_, p), b_beta_);
    return ad::add(ad::mul(gamma, norm), beta);
  }
  void visit_params(const ParamVisitor& fn) override {
    fn("inject.cln.w_gamma", w_gamma_);
    fn("inject.cln.b_gamma", b_gamma_);
    fn("inject.cln.w_beta", w_beta_);
    fn("inject.cln.b_beta", b_beta_);
  }

 private:
  int dim_, proto_dim_;
  ad::Var w_gamma_, b_gamma_, w_beta_, b_beta_;
};

/// h + g .* (W_p p) with g = sigmoid(W_g [h; p] + b_g): a residual whose
/// per-dimension contribution the gate can close back to the baseline.
class GatedResidual final : public InjectionModule {
 public:
  GatedResidual(int dim, int proto_dim, RngStream& rng)
      : dim_(dim), proto_dim_(proto_dim) {
    w_p_ = ad::Var::param(small_noise(dim, proto_dim, rng));
    w_g_ = ad::Var::param(small_noise(dim, dim + proto_dim, rng));
    b_g_ = ad::Var::param(Eigen::MatrixXd::Zero(dim, 1));
  }
  const std::string& kind() const override {
    static const std::string k = "gated_residual";
    return k;
  }
  ad::Var apply(const ad::Var& h, const ad::Var& p) const override {
    check_dims(h, p, dim_, proto_dim_, kind());
    ad::Var gate = ad::sigmoid(ad::add(ad::matmul(w_g_, ad::vcat({h, p})), b_g_));
    return ad::add(h, ad::mul(gate, ad::matmul(w_p_, p)));
  }
  void visit_params(const ParamVisitor& fn) override {
    fn("inject.gated_residual.w_p", w_p_);
    fn("inject.gated_residual.w_g", w_g_);
    fn("inject.gated_residual.b_g", b_g_);
  }

 private:
  int dim_, proto_dim_;
  ad::Var w_p_, w_g_, b_g_;
};

/// gamma(p) .* h + beta(p), without normalizing h first.
class Film final : public InjectionModule {
 public:
  Film(int dim, int proto_dim, RngStream& rng) : dim_(dim), proto_dim_(proto_dim) {
    w_gamma_ = ad::Var::param(small_noise(dim, proto_dim, rng));
    b_gamma_ = ad::Var::param(Eigen::MatrixXd::Ones(dim, 1));
    w_beta_ = ad::Var::param(small_noise(dim, proto_dim, rng));
    b_beta_ = ad::Var::param(Eigen::MatrixXd::Zero(dim, 1));
  }
  const std::string& kind() const override {
    static const std::string k = "film";
    return k;
  }
  ad::Var apply(const ad::Var& h, const ad::Var& p) const override {
    check_dims(h, p, dim_, proto_dim_, kind());
    ad::Var gamma = ad::add(ad::matmul(w_gamma_, p), b_gamma_);
    ad::Var beta = ad::add(ad::matmul(w_beta_, p), b_beta_);
    return ad::add(ad::mul(gamma, h), beta);
  }
  void visit_params(const ParamVisitor& fn) override {
    fn("inject.film.w_gamma", w_gamma_);
    fn("inject.film.b_gamma", b_gamma_);
    fn("inject.film.w_beta", w_beta_);
    fn("inject.film.b_beta", b_beta_);
  }

 private:
  int dim_, proto_dim_;
  ad::Var w_gamma_, b_gamma_, w_beta_, b_beta_;
};

/// h + W_o (attn * W_v p), the query being W_q h against the single key
/// W_k p. With one key/value the attention weight is exactly 1 (softmax over
/// one logit), so the query/key projections shape nothing here; they are kept
/// for parity with multi-prototype attention.
class CrossAttention final : public InjectionModule {
 public:
  CrossAttention(int dim, int proto_dim, RngStream& rng)
      : dim_(dim), proto_dim_(proto_dim) {
    w_q_ = ad::Var::param(small_noise(dim, dim, rng));
    w_k_ = ad::Var::param(small_noise(dim, proto_dim, rng));
    w_v_ = ad::Var::param(small_noise(dim, proto_dim, rng));
    w_o_ = ad::Var::param(small_noise(dim, dim, rng));
  }
  const std::string& kind() const override {
    static const std::string k = "cross_attention";
    return k;
  }
  ad::Var apply(const ad::Var& h, const ad::Var& p) const override {
    check_dims(h, p, dim_, proto_dim_, kind());
    ad::Var q = ad::matmul(w_q_, h);
    ad::Var key = ad::matmul(w_k_, p);
    ad::Var value = ad::matmul(w_v_, p);
    ad::Var logit =
        ad::scale(ad::dot(q, key), 1.0 / std::sqrt(static_cast<double>(dim_)));
    ad::Var weight = ad::softmax(logit);  // single element -> exactly 1
    ad::Var attended = ad::mul(value, weight);
    return ad::add(h, ad::matmul(w_o_, attended));
  }
  void visit_params(const ParamVisitor& fn) override {
    fn("inject.cross_attention.w_q", w_q_);
    fn("inject.cross_attention.w_k", w_k_);
    fn("inject.cross_attention.w_v", w_v_);
    fn("inject.cross_attention.w_o", w_o_);
  }

 private:
  int dim_, proto_dim_;
  ad::Var w_q_, w_k_, w_v_, w_o_;
};

}  // namespace

const std::vector<std::string>& injection_kinds() {
  static const std::vector<std::string> kinds = {
      "linear_fusion", "cln", "gated_residual", "film", "cross_attention"};
  return kinds;
}

std::unique_ptr<InjectionModule> make_injection_module(const std::string& kind,
                                                       int dim, int proto_dim,
                                                       std::uint64_t seed) {
  if (dim < 1 || proto_dim < 1) {
    throw std::invalid_argument("injection: dims must be >= 1");
  }
  RngStream rng(seed);
  if (kind == "linear_fusion")
    return std::make_unique<LinearFusion>(dim, proto_dim, rng);
  if (kind == "cln")
    return std::make_unique<ConditionalLayerNorm>(dim, proto_dim, rng);
  if (kind == "gated_residual")
    return std::make_unique<GatedResidual>(dim, proto_dim, rng);
  if (kind == "film") return std::make_unique<Film>(dim, proto_dim, rng);
  if (kind == "cross_attention")
    return std::make_unique<CrossAttention>(dim, proto_dim, rng);
  throw std::invalid_argument("unknown injection kind: '" + kind + "'");
}

// --- runtime -----------------------------------------------------------------

std::string PcmConfig::resolved_doc_embedder() const {
  return doc_embedder.empty() ? "mean-sentence:" + sentence_embedder
                              : doc_embedder;
}

void PcmConfig::validate() const {
  sampling.validate();
  const auto& kinds = injection_kinds();
  if (std::find(kinds.begin(), kinds.end(), injection) == kinds.end()) {
    throw std::invalid_argument("unknown injection kind: '" + injection + "'");
  }
}

std::vector<PrototypeSet> build_prototype_pools(const Corpus& corpus,
                                                const PcmConfig& cfg) {
  cfg.validate();
  auto sentence_embedder = make_sentence_embedder(cfg.sentence_embedder);
  std::unique_ptr<DocEmbedder> doc_embedder;
  if (cfg.sampling.kind == SamplingStrategy::Kind::kSupervised) {
    doc_embedder = make_doc_embedder(cfg.resolved_doc_embedder());
  }
  SampledPools sampled =
      sample_documents(corpus, cfg.sampling, doc_embedder.get());

  std::vector<PrototypeSet> pools;
  for (std::size_t c = 0; c < sampled.pools.size(); ++c) {
    std::vector<const Document*> docs;
    docs.reserve(sampled.pools[c].size());
    for (const auto& id : sampled.pools[c]) {
      const Document* d = corpus.find(id);
      if (d == nullptr) throw std::logic_error("sampled unknown doc id");
      docs.push_back(d);
    }
    PrototypeProvenance prov;
    prov.strategy = SamplingStrategy::kind_to_string(cfg.sampling.kind);
    prov.fraction = cfg.sampling.fraction;
    prov.seed = cfg.sampling.seed;
    prov.doc_ids = sampled.pools[c];
    if (sampled.pools.size() > 1) prov.cluster_index = static_cast<int>(c);
    PrototypeSet set = extract_prototypes(docs, corpus.scheme(),
                                          *sentence_embedder, std::move(prov));
    if (sampled.pools.size() > 1) {
      set.centroid = Eigen::VectorXd(sampled.centroids.row(c).transpose());
    }
    pools.push_back(std::move(set));
  }
  return pools;
}

PcmRuntime::PcmRuntime(const Corpus& train_corpus, const PcmConfig& cfg,
                       int backbone_dim, std::uint64_t seed)
    : cfg_(cfg) {
  cfg_.validate();
  sentence_embedder_ = make_sentence_embedder(cfg_.sentence_embedder);
  doc_embedder_ = make_doc_embedder(cfg_.resolved_doc_embedder());
  pools_ = build_prototype_pools(train_corpus, cfg_);
  injection_ = make_injection_module(cfg_.injection, backbone_dim,
                                     sentence_embedder_->dim(), seed);
}

PcmRuntime::PcmRuntime(std::vector<PrototypeSet> pools, const PcmConfig& cfg,
                       int backbone_dim, std::uint64_t seed)
    : cfg_(cfg), pools_(std::move(pools)) {
  cfg_.validate();
  if (pools_.empty()) throw std::invalid_argument("pcm: no prototype pools");
  sentence_embedder_ = make_sentence_embedder(cfg_.sentence_embedder);
  doc_embedder_ = make_doc_embedder(cfg_.resolved_doc_embedder());
  injection_ = make_injection_module(cfg_.injection, backbone_dim,
                                     pools_.front().dim(), seed);
  if (pools_.front().dim() != sentence_embedder_->dim()) {
    throw std::invalid_argument(
        "pcm: prototype dimension does not match the sentence embedder");
  }
}

const PrototypeSet& PcmRuntime::pool_for(const Document& doc) const {
  if (pools_.size() == 1) return pools_.front();
  const Eigen::VectorXd v = doc_embedder_->embed(doc);
  std::size_t best = 0;
  double best_sim = -2.0;
  for (std::size_t c = 0; c < pools_.size(); ++c) {
    if (!pools_[c].centroid) {
      throw std::logic_error("multi-pool prototype set without centroids");
    }
    const double sim = 1.0 - cosine_distance(v, *pools_[c].centroid);
    if (sim > best_sim) {
      best_sim = sim;
      best = c;
    }
  }
  return pools_[best];
}

const std::vector<std::pair<std::string, Eigen::VectorXd>>&
PcmRuntime::assignments(const Document& doc) const {
  auto it = assignment_cache_.find(doc.doc_id);
  if (it != assignment_cache_.end()) return it->second;
  const PrototypeSet& pool = pool_for(doc);
  std::vector<std::pair<std::string, Eigen::VectorXd>> out;
  out.reserve(doc.sentences.size());
  for (const Sentence& s : doc.sentences) {
    if (cfg_.gold_oracle) {
      out.push_back(gold_assign(s, pool));
    } else {
      out.push_back(assign_prototype(sentence_embedder_->embed(s), pool));
    }
  }
  return assignment_cache_.emplace(doc.doc_id, std::move(out)).first->second;
}

HierarchicalModel::SentenceHook PcmRuntime::hook_for(const Document& doc) const {
  const auto& assigned = assignments(doc);
  return [this, &assigned](const Sentence&, std::size_t idx,
                           const ad::Var& v) -> ad::Var {
    const ad::Var proto = ad::Var::constant(assigned.at(idx).second);
    return injection_->apply(v, proto);
  };
}

double PcmRuntime::assignment_accuracy(const Corpus& corpus) const {
  if (corpus.total_sentences() == 0) {
    throw std::invalid_argument("assignment_accuracy: empty corpus");
  }
  const SchemeLevel level = corpus.scheme().level();
  std::size_t hits = 0;
  for (const auto& doc : corpus.documents()) {
    const auto& assigned = assignments(doc);
    for (std::size_t i = 0; i < doc.sentences.size(); ++i) {
      if (assigned[i].first == doc.sentences[i].label_at(level)) ++hits;
    }
  }
  return static_cast<double>(hits) /
         static_cast<double>(corpus.total_sentences());
}

void PcmRuntime::visit_params(const ParamVisitor& fn) {
  injection_->visit_params(fn);
}

// --- prototype file IO ---------------------------------------------------------

void save_prototype_pools(const std::vector<PrototypeSet>& pools,
                          const std::string& path) {
  if (pools.empty()) throw std::invalid_argument("no prototype pools to save");
  json j;
  j["format"] = "rrlkit-prototypes";
  j["version"] = kPrototypeFormatVersion;
  j["level"] = to_string(pools.front().level());
  json jpools = json::array();
  for (const auto& pool : pools) {
    json jp;
    json entries = json::array();
    for (const auto& [label, vec] : pool.entries()) {
      json e;
      e["label"] = label;
      e["vector"] = std::vector<double>(vec.data(), vec.data() + vec.size());
      entries.push_back(std::move(e));
    }
    jp["prototypes"] = std::move(entries);
    const auto& prov = pool.provenance();
    jp["source"] = {{"strategy", prov.strategy},
                    {"fraction", prov.fraction},
                    {"seed", prov.seed},
                    {"embedder", prov.embedder_key},
                    {"documents", prov.doc_ids},
                    {"cluster_index", prov.cluster_index}};
    if (pool.centroid) {
      jp["centroid"] = std::vector<double>(
          pool.centroid->data(), pool.centroid->data() + pool.centroid->size());
    }
    jpools.push_back(std::move(jp));
  }
  j["pools"] = std::move(jpools);
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write prototype file: " + path);
  out << j.dump(2) << "\n";
}

std::vector<PrototypeSet> load_prototype_pools(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open prototype file: " + path);
  json j;
  in >> j;
  if (j.value("format", "") != "rrlkit-prototypes") {
    throw std::runtime_error(path + ": not a prototype file");
  }
  if (j.at("version").get<int>() != kPrototypeFormatVersion) {
    throw std::runtime_error(path + ": unsupported prototype format version");
  }
  const SchemeLevel level = scheme_level_from_string(j.at("level"));
  std::vector<PrototypeSet> pools;
  for (const auto& jp : j.at("pools")) {
    std::vector<std::pair<std::string, Eigen::VectorXd>> entries;
    for (const auto& e : jp.at("prototypes")) {
      auto data = e.at("vector").get<std::vector<double>>();
      entries.emplace_back(
          e.at("label").get<std::string>(),
          Eigen::Map<Eigen::VectorXd>(data.data(),
                                      static_cast<Eigen::Index>(data.size())));
    }
    PrototypeProvenance prov;
    const auto& src = jp.at("source");
    prov.strategy = src.at("strategy").get<std::string>();
    prov.fraction = src.at("fraction").get<double>();
    prov.seed = src.at("seed").get<std::uint64_t>();
    prov.embedder_key = src.at("embedder").get<std::string>();
    prov.doc_ids = src.at("documents").get<std::vector<std::string>>();
    prov.cluster_index = src.at("cluster_index").get<int>();
    PrototypeSet set(level, std::move(entries), std::move(prov));
    if (jp.contains("centroid")) {
      auto c = jp.at("centroid").get<std::vector<double>>();
      set.centroid = Eigen::Map<Eigen::VectorXd>(
          c.data(), static_cast<Eigen::Index>(c.size()));
    }
    pools.push_back(std::move(set));
  }
  return pools;
}

}  // namespace rrl
