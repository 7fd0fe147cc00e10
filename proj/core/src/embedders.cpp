#include "rrl/embedders.hpp"

#include <map>
#include <stdexcept>

#include "rrl/encoder.hpp"

namespace rrl {

namespace {

/// Mean-pooled frozen token embeddings from the same hash-bucket table the
/// random-small token encoder uses.
class RandomSmallSentenceEmbedder final : public SentenceEmbedder {
 public:
  RandomSmallSentenceEmbedder(const ComponentKey& ck, std::string key)
      : key_(std::move(key)),
        enc_(static_cast<int>(ck.option_long("dim", 32)),
             static_cast<std::uint64_t>(ck.option_long("seed", 0)),
             static_cast<int>(ck.option_long("buckets", 4096)),
             /*trainable=*/false, key_) {}

  int dim() const override { return enc_.dim(); }
  const std::string& key() const override { return key_; }

  Eigen::VectorXd embed(const Sentence& sentence) const override {
    const auto tokens = tokenize(sentence.text);
    if (tokens.empty()) {
      throw std::invalid_argument("cannot embed a sentence with no tokens");
    }
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(enc_.dim());
    for (const auto& t : tokens) acc += enc_.frozen_embedding(t);
    return acc / static_cast<double>(tokens.size());
  }

 private:
  std::string key_;
  RandomSmallEncoder enc_;
};

class MeanSentenceDocEmbedder final : public DocEmbedder {
 public:
  MeanSentenceDocEmbedder(std::unique_ptr<SentenceEmbedder> inner, std::string key)
      : key_(std::move(key)), inner_(std::move(inner)) {}

  int dim() const override { return inner_->dim(); }
  const std::string& key() const override { return key_; }

  Eigen::VectorXd embed(const Document& doc) const override {
    if (doc.sentences.empty()) {
      throw std::invalid_argument("cannot embed an empty document");
    }
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(inner_->dim());
    for (const auto& s : doc.sentences) acc += inner_->embed(s);
    return acc / static_cast<double>(doc.sentences.size());
  }

 private:
  std::string key_;
  std::unique_ptr<SentenceEmbedder> inner_;
};

/// Reads a precomputed vector from document metadata ("0.1,−2.0,...").
class MetadataDocEmbedder final : public DocEmbedder {
 public:
  MetadataDocEmbedder(std::string field, int dim, std::string key)
      : key_(std::move(key)), field_(std::move(field)), dim_(dim) {}

  int dim() const override { return dim_; }
  const std::string& key() const override { return key_; }

  Eigen::VectorXd embed(const Document& doc) const override {
    auto it = doc.metadata.find(field_);
    if (it == doc.metadata.end()) {
      throw std::runtime_error("document '" + doc.doc_id +
                               "' has no metadata field '" + field_ + "'");
    }
    const auto parts = split(it->second, ',');
    if (dim_ > 0 && static_cast<int>(parts.size()) != dim_) {
      throw std::runtime_error("document '" + doc.doc_id +
                               "': embedding length mismatch in metadata");
    }
    Eigen::VectorXd v(parts.size());
    for (std::size_t i = 0; i < parts.size(); ++i) v(i) = std::stod(parts[i]);
    return v;
  }

 private:
  std::string key_;
  std::string field_;
  int dim_;
};

std::map<std::string, SentenceEmbedderFactory>& sentence_registry() {
  static std::map<std::string, SentenceEmbedderFactory> reg;
  return reg;
}

std::map<std::string, DocEmbedderFactory>& doc_registry() {
  static std::map<std::string, DocEmbedderFactory> reg;
  return reg;
}

}  // namespace

void register_sentence_embedder(const std::string& name,
                                SentenceEmbedderFactory factory) {
  sentence_registry()[name] = std::move(factory);
}

void register_doc_embedder(const std::string& name, DocEmbedderFactory factory) {
  doc_registry()[name] = std::move(factory);
}

std::unique_ptr<SentenceEmbedder> make_sentence_embedder(const std::string& key) {
  const ComponentKey ck = ComponentKey::parse(key);
  if (ck.name == "random-small") {
    return std::make_unique<RandomSmallSentenceEmbedder>(ck, key);
  }
  auto it = sentence_registry().find(ck.name);
  if (it == sentence_registry().end()) {
    throw std::invalid_argument("unknown sentence embedder '" + ck.name + "'");
  }
  return it->second(ck);
}

std::unique_ptr<DocEmbedder> make_doc_embedder(const std::string& key) {
  const std::string prefix = "mean-sentence:";
  if (key.rfind(prefix, 0) == 0) {
    auto inner = make_sentence_embedder(key.substr(prefix.size()));
    return std::make_unique<MeanSentenceDocEmbedder>(std::move(inner), key);
  }
  const ComponentKey ck = ComponentKey::parse(key);
  if (ck.name == "metadata") {
    return std::make_unique<MetadataDocEmbedder>(
        ck.option_or("field", "embedding"),
        static_cast<int>(ck.option_long("dim", 0)), key);
  }
  auto it = doc_registry().find(ck.name);
  if (it == doc_registry().end()) {
    throw std::invalid_argument("unknown document embedder '" + ck.name + "'");
  }
  return it->second(key);
}

}  // namespace rrl
