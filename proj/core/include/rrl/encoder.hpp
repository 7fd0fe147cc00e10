#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "rrl/autodiff.hpp"
#include "rrl/util.hpp"

namespace rrl {

/// Lowercases and splits on non-alphanumeric characters. All encoders and
/// embedders in the toolkit share this tokenization.
std::vector<std::string> tokenize(const std::string& text);

/// Contextual token encoder: text -> one state per token, truncated to
/// max_len from the front. Implementations may expose trainable parameters
/// through visit_params (no-op for frozen encoders).
class TokenEncoder {
 public:
  virtual ~TokenEncoder() = default;

  virtual int dim() const = 0;
  virtual const std::string& key() const = 0;

  /// One d x 1 state per kept token. Throws on empty token lists.
  virtual std::vector<ad::Var> encode(const std::vector<std::string>& tokens,
                                      std::size_t max_len) = 0;

  virtual void visit_params(
      const std::function<void(const std::string&, ad::Var&)>& /*fn*/) {}

  std::vector<ad::Var> encode_text(const std::string& text, std::size_t max_len);
};

/// Untrained, seeded hash-bucket embedding table. Token states are rows of a
/// fixed random table, so outputs are deterministic functions of (seed, dim,
/// token). With trainable=true the table becomes a model parameter.
///
/// Key form: "random-small:dim=32:seed=7[:buckets=4096]".
class RandomSmallEncoder : public TokenEncoder {
 public:
  RandomSmallEncoder(int dim, std::uint64_t seed, int buckets, bool trainable,
                     std::string key);

  int dim() const override { return dim_; }
  const std::string& key() const override { return key_; }
  std::vector<ad::Var> encode(const std::vector<std::string>& tokens,
                              std::size_t max_len) override;
  void visit_params(
      const std::function<void(const std::string&, ad::Var&)>& fn) override;

  int bucket_of(const std::string& token) const;
  /// Frozen view of a token's embedding regardless of trainability.
  Eigen::VectorXd frozen_embedding(const std::string& token) const;

 private:
  int dim_;
  int buckets_;
  std::string key_;
  ad::Var table_;        // buckets x dim
  Eigen::MatrixXd init_; // pristine copy for frozen lookups
  bool trainable_;
};

/// Builds a token encoder from its registry key. "random-small" ships with
/// the toolkit; additional encoders (e.g. bindings to pretrained models
/// provided by the runtime environment) can be registered by name.
std::unique_ptr<TokenEncoder> make_token_encoder(const std::string& key,
                                                 bool trainable);

using TokenEncoderFactory = std::function<std::unique_ptr<TokenEncoder>(
    const ComponentKey&, bool trainable)>;
void register_token_encoder(const std::string& name, TokenEncoderFactory factory);

}  // namespace rrl
