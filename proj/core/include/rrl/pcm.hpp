#pragma once

// Prototype-conditioned modulation: per-role prototype vectors are computed
// once from a frozen domain embedder over a sampled document pool, each
// sentence is matched to its nearest prototype by cosine similarity (or to
// its gold role's prototype in oracle mode), and the matched vector is
// injected into the backbone between attention pooling and sentence-level
// contextualization.

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "rrl/autodiff.hpp"
#include "rrl/backbone.hpp"
#include "rrl/corpus.hpp"
#include "rrl/embedders.hpp"

namespace rrl {

struct SamplingStrategy {
  enum class Kind { kFull, kRandom, kSupervised };
  Kind kind = Kind::kFull;
  double fraction = 0.5;   // random only, in (0, 1]
  int cluster_min = 2;     // supervised only
  int cluster_max = 10;
  std::uint64_t seed = 0;

  void validate() const;
  static Kind kind_from_string(const std::string& s);
  static std::string kind_to_string(Kind k);
};

struct PrototypeProvenance {
  std::string strategy;
  double fraction = 1.0;
  std::uint64_t seed = 0;
  std::string embedder_key;
  std::vector<std::string> doc_ids;
  int cluster_index = -1;  // supervised pools only
};

/// Per-role prototype vectors for one document pool, ordered by scheme label
/// order. Roles with no support in the pool are simply absent.
class PrototypeSet {
 public:
  PrototypeSet() = default;
  PrototypeSet(SchemeLevel level,
               std::vector<std::pair<std::string, Eigen::VectorXd>> entries,
               PrototypeProvenance provenance);

  SchemeLevel level() const { return level_; }
  const std::vector<std::pair<std::string, Eigen::VectorXd>>& entries() const {
    return entries_;
  }
  const Eigen::VectorXd* find(const std::string& role) const;
  bool empty() const { return entries_.empty(); }
  int dim() const;

  const PrototypeProvenance& provenance() const { return provenance_; }
  /// Pool centroid in document-embedding space; present for supervised pools.
  std::optional<Eigen::VectorXd> centroid;

 private:
  SchemeLevel level_ = SchemeLevel::kFunction;
  std::vector<std::pair<std::string, Eigen::VectorXd>> entries_;
  PrototypeProvenance provenance_;
};

struct SampledPools {
  std::vector<std::vector<std::string>> pools;  // doc ids, corpus order
  int selected_k = 1;          // supervised: chosen cluster count
  double silhouette = 0.0;     // supervised: score of the chosen k
  Eigen::MatrixXd centroids;   // supervised: k x dim document centroids
};

/// Document sampling. Full and random sampling produce a single pool;
/// supervised sampling clusters document embeddings with k-means, choosing k
/// in [cluster_min, cluster_max] by silhouette score (capped at M-1), and
/// produces one pool per cluster. Deterministic given the strategy seed.
SampledPools sample_documents(const Corpus& corpus,
                              const SamplingStrategy& strategy,
                              const DocEmbedder* doc_embedder);

/// Mean frozen embedding per role over the pool (roles without support are
/// omitted). Throws if no role has support.
PrototypeSet extract_prototypes(const std::vector<const Document*>& pool,
                                const LabelScheme& scheme,
                                const SentenceEmbedder& embedder,
                                PrototypeProvenance provenance = {});

/// Nearest prototype by cosine similarity; ties resolve to the earlier label
/// in scheme order. Throws on zero-norm queries and empty sets.
std::pair<std::string, Eigen::VectorXd> assign_prototype(
    const Eigen::VectorXd& sentence_embedding, const PrototypeSet& protos);

/// Oracle assignment: the gold label's prototype, regardless of similarity.
std::pair<std::string, Eigen::VectorXd> gold_assign(const Sentence& sentence,
                                                    const PrototypeSet& protos);

// --- injection -------------------------------------------------------------

/// A parametric map (h, p) -> h' with output dimension equal to dim(h).
/// Kinds: linear_fusion, cln, gated_residual, film, cross_attention.
class InjectionModule {
 public:
  virtual ~InjectionModule() = default;
  virtual const std::string& kind() const = 0;
  virtual ad::Var apply(const ad::Var& h, const ad::Var& p) const = 0;
  virtual void visit_params(const ParamVisitor& fn) = 0;
};

std::unique_ptr<InjectionModule> make_injection_module(const std::string& kind,
                                                       int dim, int proto_dim,
                                                       std::uint64_t seed);
const std::vector<std::string>& injection_kinds();

// --- runtime glue ------------------------------------------------------------

struct PcmConfig {
  SamplingStrategy sampling;
  std::string sentence_embedder = "random-small:dim=32:seed=7";
  std::string doc_embedder;  // empty -> "mean-sentence:" + sentence_embedder
  std::string injection = "linear_fusion";
  bool gold_oracle = false;

  std::string resolved_doc_embedder() const;
  void validate() const;
};

/// Samples pools per the config and extracts one PrototypeSet per pool
/// (with centroids attached for supervised sampling).
std::vector<PrototypeSet> build_prototype_pools(const Corpus& corpus,
                                                const PcmConfig& cfg);

/// Owns the frozen embedders, the extracted prototype pools and the
/// injection module for one run. Prototypes are extracted once, before any
/// training step, and treated as constants thereafter; only the injection
/// parameters train. Assignment caches are per-document and safe under the
/// single-writer training contract.
class PcmRuntime {
 public:
  PcmRuntime(const Corpus& train_corpus, const PcmConfig& cfg, int backbone_dim,
             std::uint64_t seed);
  /// Builds the runtime around previously extracted pools (e.g. loaded from
  /// a prototype file) instead of re-extracting.
  PcmRuntime(std::vector<PrototypeSet> pools, const PcmConfig& cfg,
             int backbone_dim, std::uint64_t seed);

  const std::vector<PrototypeSet>& pools() const { return pools_; }
  InjectionModule& injection() { return *injection_; }
  const PcmConfig& config() const { return cfg_; }

  /// Pool serving a given document: nearest centroid by cosine for
  /// supervised sampling, the single pool otherwise.
  const PrototypeSet& pool_for(const Document& doc) const;

  /// (role, prototype) per sentence of the document; memoized.
  const std::vector<std::pair<std::string, Eigen::VectorXd>>& assignments(
      const Document& doc) const;

  /// Sentence hook for HierarchicalModel::forward. Prototype vectors enter
  /// the graph as constants; gradients reach only the injection parameters.
  HierarchicalModel::SentenceHook hook_for(const Document& doc) const;

  /// Fraction of sentences whose assigned role equals the gold label.
  double assignment_accuracy(const Corpus& corpus) const;

  void visit_params(const ParamVisitor& fn);

 private:
  PcmConfig cfg_;
  std::vector<PrototypeSet> pools_;
  std::unique_ptr<SentenceEmbedder> sentence_embedder_;
  std::unique_ptr<DocEmbedder> doc_embedder_;
  std::unique_ptr<InjectionModule> injection_;
  mutable std::map<std::string, std::vector<std::pair<std::string, Eigen::VectorXd>>>
      assignment_cache_;
};

/// Versioned prototype file IO. Pools are written in order with entries in
/// scheme label order, so files are byte-stable for identical inputs.
void save_prototype_pools(const std::vector<PrototypeSet>& pools,
                          const std::string& path);
std::vector<PrototypeSet> load_prototype_pools(const std::string& path);

}  // namespace rrl
