#include "rrl/encoder.hpp"

#include <cctype>
#include <cmath>
#include <map>
#include <stdexcept>

namespace rrl {

std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (unsigned char c : text) {
    if (std::isalnum(c)) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

std::vector<ad::Var> TokenEncoder::encode_text(const std::string& text,
                                               std::size_t max_len) {
  return encode(tokenize(text), max_len);
}

RandomSmallEncoder::RandomSmallEncoder(int dim, std::uint64_t seed, int buckets,
                                       bool trainable, std::string key)
    : dim_(dim), buckets_(buckets), key_(std::move(key)), trainable_(trainable) {
  if (dim < 1) throw std::invalid_argument("encoder dim must be >= 1");
  if (buckets < 1) throw std::invalid_argument("encoder buckets must be >= 1");
  RngStream rng(seed);
  Eigen::MatrixXd table(buckets, dim);
  const double s = 1.0 / std::sqrt(static_cast<double>(dim));
  for (int r = 0; r < buckets; ++r) {
    for (int c = 0; c < dim; ++c) table(r, c) = rng.normal(0.0, s);
  }
  init_ = table;
  table_ = trainable ? ad::Var::param(table) : ad::Var::constant(table);
}

int RandomSmallEncoder::bucket_of(const std::string& token) const {
  return static_cast<int>(fnv1a(token) % static_cast<std::uint64_t>(buckets_));
}

Eigen::VectorXd RandomSmallEncoder::frozen_embedding(const std::string& token) const {
  return init_.row(bucket_of(token)).transpose();
}

std::vector<ad::Var> RandomSmallEncoder::encode(
    const std::vector<std::string>& tokens, std::size_t max_len) {
  if (tokens.empty()) throw std::invalid_argument("cannot encode an empty sentence");
  const std::size_t n = std::min(tokens.size(), max_len);
  std::vector<ad::Var> states;
  states.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    states.push_back(ad::lookup_row(table_, bucket_of(tokens[i])));
  }
  return states;
}

void RandomSmallEncoder::visit_params(
    const std::function<void(const std::string&, ad::Var&)>& fn) {
  if (trainable_) fn("token_encoder.table", table_);
}

namespace {

std::map<std::string, TokenEncoderFactory>& encoder_registry() {
  static std::map<std::string, TokenEncoderFactory> reg;
  return reg;
}

}  // namespace

void register_token_encoder(const std::string& name, TokenEncoderFactory factory) {
  encoder_registry()[name] = std::move(factory);
}

std::unique_ptr<TokenEncoder> make_token_encoder(const std::string& key,
                                                 bool trainable) {
  const ComponentKey ck = ComponentKey::parse(key);
  if (ck.name == "random-small") {
    return std::make_unique<RandomSmallEncoder>(
        static_cast<int>(ck.option_long("dim", 32)),
        static_cast<std::uint64_t>(ck.option_long("seed", 0)),
        static_cast<int>(ck.option_long("buckets", 4096)), trainable, key);
  }
  auto it = encoder_registry().find(ck.name);
  if (it == encoder_registry().end()) {
    throw std::invalid_argument(
        "unknown token encoder '" + ck.name +
        "'; available: random-small plus any registered runtime encoders");
  }
  return it->second(ck, trainable);
}

}  // namespace rrl
