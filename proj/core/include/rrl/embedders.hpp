#pragma once

// Frozen embedding providers used for prototype extraction, assignment and
// document sampling. These are deliberately separate from the trainable
// backbone: prototype geometry must stay fixed while the model trains, so
// cosine comparisons remain stable across epochs.

#include <functional>
#include <memory>
#include <string>

#include <Eigen/Core>

#include "rrl/corpus.hpp"
#include "rrl/util.hpp"

namespace rrl {

/// Sentence -> fixed-length vector, constant for the lifetime of the run.
class SentenceEmbedder {
 public:
  virtual ~SentenceEmbedder() = default;
  virtual int dim() const = 0;
  virtual const std::string& key() const = 0;
  virtual Eigen::VectorXd embed(const Sentence& sentence) const = 0;
};

/// Document -> fixed-length vector; drives document clustering.
class DocEmbedder {
 public:
  virtual ~DocEmbedder() = default;
  virtual int dim() const = 0;
  virtual const std::string& key() const = 0;
  virtual Eigen::VectorXd embed(const Document& doc) const = 0;
};

/// Builds a sentence embedder from a registry key.
/// Built in: "random-small:dim=D:seed=S[:buckets=B]" — mean of frozen
/// hash-bucket token embeddings.
std::unique_ptr<SentenceEmbedder> make_sentence_embedder(const std::string& key);

/// Builds a document embedder from a registry key.
/// Built in:
///   "mean-sentence:<sentence embedder key>" — mean over sentence vectors;
///   "metadata:field=F[:dim=D]" — parses a comma-separated float vector
///   from document metadata (for corpora shipped with precomputed
///   document embeddings, e.g. from an external embedding service).
std::unique_ptr<DocEmbedder> make_doc_embedder(const std::string& key);

using SentenceEmbedderFactory =
    std::function<std::unique_ptr<SentenceEmbedder>(const ComponentKey&)>;
using DocEmbedderFactory =
    std::function<std::unique_ptr<DocEmbedder>(const std::string& full_key)>;
void register_sentence_embedder(const std::string& name,
                                SentenceEmbedderFactory factory);
void register_doc_embedder(const std::string& name, DocEmbedderFactory factory);

}  // namespace rrl
