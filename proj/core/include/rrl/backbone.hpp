#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "rrl/autodiff.hpp"
#include "rrl/corpus.hpp"
#include "rrl/crf.hpp"
#include "rrl/encoder.hpp"
#include "rrl/util.hpp"

namespace rrl {

using ParamVisitor = std::function<void(const std::string&, ad::Var&)>;

/// Backbone hyperparameters. Defaults follow the reference configuration
/// used throughout: dropout 0.5, 128-token truncation, 768-dim recurrent
/// layers and a 200-dim attention context.
struct BackboneConfig {
  std::string encoder = "random-small:dim=32:seed=7";
  bool fine_tune_encoder = true;
  double dropout = 0.5;
  int max_seq_len = 128;
  int word_rnn_dim = 768;   // bidirectional output size (2 x hidden)
  int sent_rnn_dim = 768;
  int attn_dim = 200;
  bool use_crf = true;
  std::string rnn_cell = "lstm";  // "lstm" or "gru"

  void validate() const;
};

/// Single-direction recurrent cell; step() consumes one input column vector
/// and advances the state in place.
class RnnCell {
 public:
  virtual ~RnnCell() = default;
  virtual int hidden_dim() const = 0;
  virtual int state_count() const = 0;
  virtual ad::Var step(const ad::Var& x, std::vector<ad::Var>& state) const = 0;
  virtual void visit_params(const std::string& prefix, const ParamVisitor& fn) = 0;
};

std::unique_ptr<RnnCell> make_rnn_cell(const std::string& kind, int input_dim,
                                       int hidden_dim, RngStream& rng);

/// Bidirectional recurrence; per-step output is the concatenation of the
/// forward and backward hidden states (output_dim = 2 x hidden).
class BiRnn {
 public:
  BiRnn(const std::string& cell_kind, int input_dim, int output_dim,
        std::string name, RngStream& rng);

  std::vector<ad::Var> apply(const std::vector<ad::Var>& inputs) const;
  int output_dim() const { return output_dim_; }
  void visit_params(const ParamVisitor& fn);

 private:
  int output_dim_;
  std::string name_;
  std::unique_ptr<RnnCell> fwd_;
  std::unique_ptr<RnnCell> bwd_;
};

/// Attention pooling of token states into a single sentence vector:
/// u_t = tanh(W h_t + b), alpha = softmax(u_t . u), v = sum_t alpha_t h_t.
class AttentionPooler {
 public:
  AttentionPooler(int input_dim, int attn_dim, RngStream& rng);

  ad::Var pool(const std::vector<ad::Var>& token_states) const;
  /// The normalized weights alpha (T x 1); exposed for inspection.
  ad::Var attention_weights(const std::vector<ad::Var>& token_states) const;
  void visit_params(const ParamVisitor& fn);

 private:
  ad::Var w_;  // attn_dim x input_dim
  ad::Var b_;  // attn_dim x 1
  ad::Var u_;  // attn_dim x 1
};

/// The full hierarchical labeling model: token encoder -> word-level BiRNN
/// -> attention pooling -> (optional per-sentence hook) -> sentence-level
/// BiRNN -> CRF (or per-sentence softmax when use_crf is off).
class HierarchicalModel {
 public:
  /// Transforms a pooled sentence vector before sentence-level
  /// contextualization; used to condition sentences on external signals.
  using SentenceHook =
      std::function<ad::Var(const Sentence&, std::size_t, const ad::Var&)>;

  struct ForwardResult {
    std::vector<ad::Var> pooled;    // sentence embeddings (post-hook)
    std::vector<ad::Var> contextualized;
    ad::Var emissions;              // m x L
    std::vector<int> predictions;
  };

  HierarchicalModel(const BackboneConfig& cfg, const LabelScheme& scheme,
                    std::uint64_t seed);

  ForwardResult forward(const Document& doc, bool training,
                        RngStream& dropout_rng,
                        const SentenceHook* hook = nullptr) const;

  /// Sequence NLL under the CRF, or summed cross-entropy when use_crf=false.
  ad::Var task_loss(const ForwardResult& fwd, const std::vector<int>& gold) const;

  std::vector<int> gold_indices(const Document& doc) const;

  const BackboneConfig& config() const { return cfg_; }
  const LabelScheme& scheme() const { return scheme_; }
  TokenEncoder& token_encoder() { return *encoder_; }
  const CrfLayer& crf() const { return *crf_; }
  AttentionPooler& pooler() { return *pooler_; }

  void visit_params(const ParamVisitor& fn);

 private:
  ad::Var maybe_dropout(const ad::Var& v, bool training,
                        RngStream& rng) const;

  BackboneConfig cfg_;
  LabelScheme scheme_;
  std::unique_ptr<TokenEncoder> encoder_;
  std::unique_ptr<BiRnn> word_rnn_;
  std::unique_ptr<AttentionPooler> pooler_;
  std::unique_ptr<BiRnn> sent_rnn_;
  std::unique_ptr<CrfLayer> crf_;
};

}  // namespace rrl
