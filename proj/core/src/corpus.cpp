#include "rrl/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "rrl/util.hpp"

namespace rrl {

using nlohmann::json;

std::string to_string(SchemeLevel level) {
  switch (level) {
    case SchemeLevel::kCategory: return "category";
    case SchemeLevel::kFunction: return "function";
    case SchemeLevel::kStep: return "step";
  }
  throw std::logic_error("unreachable scheme level");
}

SchemeLevel scheme_level_from_string(const std::string& s) {
  if (s == "category") return SchemeLevel::kCategory;
  if (s == "function") return SchemeLevel::kFunction;
  if (s == "step") return SchemeLevel::kStep;
  throw std::invalid_argument("unknown scheme level: '" + s + "'");
}

LabelScheme::LabelScheme(std::string name, SchemeLevel level,
                         std::vector<std::string> labels)
    : name_(std::move(name)), level_(level), labels_(std::move(labels)) {
  if (labels_.empty()) throw std::invalid_argument("label scheme has no labels");
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    if (labels_[i].empty()) {
      throw std::invalid_argument("label scheme contains an empty label");
    }
    if (!index_.emplace(labels_[i], static_cast<int>(i)).second) {
      throw std::invalid_argument("duplicate label in scheme: '" + labels_[i] + "'");
    }
  }
}

int LabelScheme::index_of(const std::string& label) const {
  auto it = index_.find(label);
  return it == index_.end() ? -1 : it->second;
}

const std::string& LabelScheme::label_at(std::size_t index) const {
  if (index >= labels_.size()) throw std::out_of_range("label index out of range");
  return labels_[index];
}

bool LabelScheme::contains(const std::string& label) const {
  return index_.count(label) > 0;
}

LabelScheme LabelScheme::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open label scheme file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw std::runtime_error("malformed label scheme file " + path + ": " + e.what());
  }
  return LabelScheme(j.value("name", std::string("scheme")),
                     scheme_level_from_string(j.at("level").get<std::string>()),
                     j.at("labels").get<std::vector<std::string>>());
}

void LabelScheme::save(const std::string& path) const {
  json j;
  j["name"] = name_;
  j["level"] = to_string(level_);
  j["labels"] = labels_;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write label scheme file: " + path);
  out << j.dump(2) << "\n";
}

const std::string& Sentence::label_at(SchemeLevel level) const {
  auto it = labels.find(level);
  if (it == labels.end()) {
    throw std::out_of_range("sentence has no label at level " + to_string(level));
  }
  return it->second;
}

bool Sentence::has_label(SchemeLevel level) const {
  return labels.count(level) > 0;
}

Corpus::Corpus(std::vector<Document> documents, LabelScheme scheme)
    : documents_(std::move(documents)), scheme_(std::move(scheme)) {
  for (std::size_t i = 0; i < documents_.size(); ++i) {
    if (!position_.emplace(documents_[i].doc_id, i).second) {
      throw std::invalid_argument("duplicate doc_id: '" + documents_[i].doc_id +
                                  "'");
    }
    total_sentences_ += documents_[i].sentences.size();
  }
}

const Document* Corpus::find(const std::string& doc_id) const {
  auto it = position_.find(doc_id);
  return it == position_.end() ? nullptr : &documents_[it->second];
}

Corpus Corpus::subset(const std::set<std::string>& doc_ids) const {
  std::vector<Document> docs;
  for (const auto& d : documents_) {
    if (doc_ids.count(d.doc_id)) docs.push_back(d);
  }
  return Corpus(std::move(docs), scheme_);
}

void SplitSpec::validate(const Corpus& corpus) const {
  auto check_member = [&](const std::set<std::string>& part, const char* name) {
    for (const auto& id : part) {
      if (corpus.find(id) == nullptr) {
        throw std::invalid_argument(std::string("split ") + name +
                                    " references unknown doc_id '" + id + "'");
      }
    }
  };
  check_member(train, "train");
  check_member(dev, "dev");
  check_member(test, "test");
  auto overlap = [](const std::set<std::string>& a, const std::set<std::string>& b) {
    return std::any_of(a.begin(), a.end(),
                       [&](const std::string& id) { return b.count(id) > 0; });
  };
  if (overlap(train, dev) || overlap(train, test) || overlap(dev, test)) {
    throw std::invalid_argument("split partitions are not disjoint");
  }
}

namespace {

int count_tokens(const std::string& text) {
  int n = 0;
  bool in_tok = false;
  for (char c : text) {
    const bool ws = (c == ' ' || c == '\t' || c == '\n' || c == '\r');
    if (!ws && !in_tok) ++n;
    in_tok = !ws;
  }
  return n;
}

Sentence parse_sentence(const json& j, const LabelScheme& scheme,
                        const std::string& where) {
  Sentence s;
  s.text = j.at("text").get<std::string>();
  if (j.contains("token_count")) {
    s.token_count = j.at("token_count").get<int>();
  } else {
    s.token_count = count_tokens(s.text);
  }
  if (s.token_count < 1) {
    throw std::runtime_error(where + ": sentence has no tokens");
  }
  if (!j.contains("labels") || !j.at("labels").is_object()) {
    throw std::runtime_error(where + ": sentence has no labels object");
  }
  for (const auto& [k, v] : j.at("labels").items()) {
    s.labels[scheme_level_from_string(k)] = v.get<std::string>();
  }
  if (!s.has_label(scheme.level())) {
    throw std::runtime_error(where + ": sentence missing a '" +
                             to_string(scheme.level()) + "' label");
  }
  const std::string& lbl = s.label_at(scheme.level());
  if (!scheme.contains(lbl)) {
    throw std::runtime_error(where + ": label '" + lbl +
                             "' is not in scheme '" + scheme.name() + "'");
  }
  return s;
}

Document parse_document(const json& j, const LabelScheme& scheme,
                        const std::string& where) {
  Document d;
  d.doc_id = j.at("doc_id").get<std::string>();
  if (j.contains("metadata")) {
    for (const auto& [k, v] : j.at("metadata").items()) {
      d.metadata[k] = v.get<std::string>();
    }
  }
  const auto& sents = j.at("sentences");
  if (!sents.is_array() || sents.empty()) {
    throw std::runtime_error(where + ": document '" + d.doc_id +
                             "' has no sentences");
  }
  int si = 0;
  for (const auto& sj : sents) {
    d.sentences.push_back(
        parse_sentence(sj, scheme, where + ", sentence " + std::to_string(si)));
    ++si;
  }
  return d;
}

}  // namespace

Corpus load_corpus(std::istream& in, const std::string& origin,
                   const LabelScheme& scheme) {
  std::vector<Document> docs;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::string where = origin + ":" + std::to_string(line_no);
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw std::runtime_error(where + ": malformed document record: " + e.what());
    }
    try {
      docs.push_back(parse_document(j, scheme, where));
    } catch (const json::exception& e) {
      throw std::runtime_error(where + ": malformed document record: " + e.what());
    }
  }
  return Corpus(std::move(docs), scheme);
}

Corpus load_corpus(const std::string& path, const LabelScheme& scheme) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open corpus file: " + path);
  return load_corpus(in, path, scheme);
}

namespace {

json document_to_json(const Document& d) {
  json j;
  j["doc_id"] = d.doc_id;
  if (!d.metadata.empty()) {
    json m = json::object();
    for (const auto& [k, v] : d.metadata) m[k] = v;
    j["metadata"] = m;
  }
  json sents = json::array();
  for (const auto& s : d.sentences) {
    json sj;
    sj["text"] = s.text;
    sj["token_count"] = s.token_count;
    json labels = json::object();
    for (const auto& [lvl, lbl] : s.labels) labels[to_string(lvl)] = lbl;
    sj["labels"] = labels;
    sents.push_back(sj);
  }
  j["sentences"] = sents;
  return j;
}

}  // namespace

std::string serialize_corpus(const Corpus& corpus) {
  std::ostringstream out;
  for (const auto& d : corpus.documents()) {
    out << document_to_json(d).dump() << "\n";
  }
  return out.str();
}

void save_corpus(const Corpus& corpus, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write corpus file: " + path);
  out << serialize_corpus(corpus);
}

std::vector<SplitSpec> make_kfold_splits(const Corpus& corpus, int k,
                                         std::uint64_t seed) {
  const int m = static_cast<int>(corpus.num_documents());
  if (k < 2) throw std::invalid_argument("k-fold split requires k >= 2");
  if (k > m) {
    throw std::invalid_argument("k-fold split with k=" + std::to_string(k) +
                                " exceeds document count " + std::to_string(m));
  }
  std::vector<std::string> ids;
  ids.reserve(m);
  for (const auto& d : corpus.documents()) ids.push_back(d.doc_id);
  std::mt19937_64 rng(seed);
  std::shuffle(ids.begin(), ids.end(), rng);

  std::vector<std::set<std::string>> folds(k);
  for (int i = 0; i < m; ++i) folds[i % k].insert(ids[i]);

  std::vector<SplitSpec> splits;
  splits.reserve(k);
  for (int f = 0; f < k; ++f) {
    SplitSpec s;
    s.fold_index = f;
    s.test = folds[f];
    s.dev = folds[(f + 1) % k];
    for (int g = 0; g < k; ++g) {
      if (g == f || g == (f + 1) % k) continue;
      s.train.insert(folds[g].begin(), folds[g].end());
    }
    s.validate(corpus);
    splits.push_back(std::move(s));
  }
  return splits;
}

}  // namespace rrl
