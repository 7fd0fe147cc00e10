#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace rrl {

/// Granularity of a label inventory: coarse discursive categories, the
/// rhetorical function of each sentence, or fully composed step labels.
enum class SchemeLevel { kCategory, kFunction, kStep };

std::string to_string(SchemeLevel level);
SchemeLevel scheme_level_from_string(const std::string& s);

/// An ordered label inventory at one granularity. Label order is part of the
/// scheme identity: it fixes the index <-> label mapping used by models,
/// checkpoints, prototype files, and reports.
class LabelScheme {
 public:
  LabelScheme() = default;
  LabelScheme(std::string name, SchemeLevel level,
              std::vector<std::string> labels);

  const std::string& name() const { return name_; }
  SchemeLevel level() const { return level_; }
  const std::vector<std::string>& labels() const { return labels_; }
  std::size_t size() const { return labels_.size(); }

  int index_of(const std::string& label) const;              // -1 if unknown
  const std::string& label_at(std::size_t index) const;
  bool contains(const std::string& label) const;

  static LabelScheme load(const std::string& path);
  void save(const std::string& path) const;

  bool operator==(const LabelScheme& other) const = default;

 private:
  std::string name_;
  SchemeLevel level_ = SchemeLevel::kFunction;
  std::vector<std::string> labels_;
  std::map<std::string, int> index_;
};

struct Sentence {
  std::string text;
  int token_count = 0;  // informational; recomputed from text when absent
  std::map<SchemeLevel, std::string> labels;

  const std::string& label_at(SchemeLevel level) const;
  bool has_label(SchemeLevel level) const;
};

struct Document {
  std::string doc_id;
  std::vector<Sentence> sentences;
  std::map<std::string, std::string> metadata;  // year, author, theme, ...

  std::size_t size() const { return sentences.size(); }
};

/// An immutable, validated collection of labeled documents sharing one
/// LabelScheme. Total sentence count is cached at construction.
class Corpus {
 public:
  Corpus() = default;
  Corpus(std::vector<Document> documents, LabelScheme scheme);

  const std::vector<Document>& documents() const { return documents_; }
  const LabelScheme& scheme() const { return scheme_; }
  std::size_t num_documents() const { return documents_.size(); }
  std::size_t total_sentences() const { return total_sentences_; }

  const Document& document(std::size_t i) const { return documents_[i]; }
  const Document* find(const std::string& doc_id) const;

  /// New corpus containing only the listed doc_ids, in corpus order.
  Corpus subset(const std::set<std::string>& doc_ids) const;

 private:
  std::vector<Document> documents_;
  LabelScheme scheme_;
  std::map<std::string, std::size_t> position_;  // doc_id -> index
  std::size_t total_sentences_ = 0;
};

/// Document-level split. Partitions are disjoint by construction-time
/// validation; any partition may be empty.
struct SplitSpec {
  std::set<std::string> train;
  std::set<std::string> dev;
  std::set<std::string> test;
  std::optional<int> fold_index;

  void validate(const Corpus& corpus) const;  // disjointness + membership
};

/// Loads a line-delimited corpus (one JSON document object per line) and
/// validates every sentence against `scheme`. Sentences missing a label at
/// the scheme's level, or carrying a label outside the inventory, are load
/// errors reported with their line number. Lines are processed one at a
/// time, so corpora much larger than memory-resident working sets stream
/// through cleanly.
Corpus load_corpus(const std::string& path, const LabelScheme& scheme);
Corpus load_corpus(std::istream& in, const std::string& origin,
                   const LabelScheme& scheme);

/// Canonical serialization; loading then saving a file reproduces it
/// byte-for-byte once it is in canonical form.
void save_corpus(const Corpus& corpus, const std::string& path);
std::string serialize_corpus(const Corpus& corpus);

/// Splits documents into k folds, each serving once as the test partition.
/// The dev partition of fold i is fold (i+1) mod k; the remaining folds
/// train. Deterministic for a given seed. Requires 2 <= k <= #documents
/// (with k == 2 the train partition is empty and only usable for held-out
/// evaluation).
std::vector<SplitSpec> make_kfold_splits(const Corpus& corpus, int k,
                                         std::uint64_t seed);

}  // namespace rrl
