#include "rrl/backbone.hpp"

#include <cmath>
#include <stdexcept>

namespace rrl {

void BackboneConfig::validate() const {
  if (dropout < 0.0 || dropout >= 1.0) {
    throw std::invalid_argument("dropout must be in [0, 1)");
  }
  if (max_seq_len < 1) throw std::invalid_argument("max_seq_len must be >= 1");
  if (word_rnn_dim < 2 || word_rnn_dim % 2 != 0) {
    throw std::invalid_argument("word_rnn_dim must be a positive even number");
  }
  if (sent_rnn_dim < 2 || sent_rnn_dim % 2 != 0) {
    throw std::invalid_argument("sent_rnn_dim must be a positive even number");
  }
  if (attn_dim < 1) throw std::invalid_argument("attn_dim must be >= 1");
  if (rnn_cell != "lstm" && rnn_cell != "gru") {
    throw std::invalid_argument("rnn_cell must be 'lstm' or 'gru'");
  }
}

namespace {

Eigen::MatrixXd glorot(Eigen::Index rows, Eigen::Index cols, RngStream& rng) {
  const double s = std::sqrt(2.0 / static_cast<double>(rows + cols));
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = rng.normal(0.0, s);
  }
  return m;
}

class LstmCell final : public RnnCell {
 public:
  LstmCell(int input_dim, int hidden_dim, RngStream& rng) : hidden_(hidden_dim) {
    w_x_ = ad::Var::param(glorot(4 * hidden_dim, input_dim, rng));
    w_h_ = ad::Var::param(glorot(4 * hidden_dim, hidden_dim, rng));
    Eigen::MatrixXd b = Eigen::MatrixXd::Zero(4 * hidden_dim, 1);
    b.block(hidden_dim, 0, hidden_dim, 1).setConstant(1.0);  // forget-gate bias
    b_ = ad::Var::param(std::move(b));
  }

  int hidden_dim() const override { return hidden_; }
  int state_count() const override { return 2; }  // h, c

  ad::Var step(const ad::Var& x, std::vector<ad::Var>& state) const override {
    const ad::Var& h = state[0];
    const ad::Var& c = state[1];
    ad::Var pre = ad::add(ad::add(ad::matmul(w_x_, x), ad::matmul(w_h_, h)), b_);
    ad::Var i = ad::sigmoid(ad::rows(pre, 0, hidden_));
    ad::Var f = ad::sigmoid(ad::rows(pre, hidden_, hidden_));
    ad::Var g = ad::tanh(ad::rows(pre, 2 * hidden_, hidden_));
    ad::Var o = ad::sigmoid(ad::rows(pre, 3 * hidden_, hidden_));
    ad::Var c_next = ad::add(ad::mul(f, c), ad::mul(i, g));
    ad::Var h_next = ad::mul(o, ad::tanh(c_next));
    state[0] = h_next;
    state[1] = c_next;
    return h_next;
  }

  void visit_params(const std::string& prefix, const ParamVisitor& fn) override {
    fn(prefix + ".w_x", w_x_);
    fn(prefix + ".w_h", w_h_);
    fn(prefix + ".b", b_);
  }

 private:
  int hidden_;
  ad::Var w_x_, w_h_, b_;
};

class GruCell final : public RnnCell {
 public:
  GruCell(int input_dim, int hidden_dim, RngStream& rng) : hidden_(hidden_dim) {
    w_x_ = ad::Var::param(glorot(3 * hidden_dim, input_dim, rng));
    w_h_ = ad::Var::param(glorot(3 * hidden_dim, hidden_dim, rng));
    b_ = ad::Var::param(Eigen::MatrixXd::Zero(3 * hidden_dim, 1));
  }

  int hidden_dim() const override { return hidden_; }
  int state_count() const override { return 1; }

  ad::Var step(const ad::Var& x, std::vector<ad::Var>& state) const override {
    const ad::Var& h = state[0];
    ad::Var px = ad::matmul(w_x_, x);
    ad::Var ph = ad::matmul(w_h_, h);
    ad::Var z = ad::sigmoid(ad::add(ad::add(ad::rows(px, 0, hidden_),
                                            ad::rows(ph, 0, hidden_)),
                                    ad::rows(b_, 0, hidden_)));
    ad::Var r = ad::sigmoid(ad::add(ad::add(ad::rows(px, hidden_, hidden_),
                                            ad::rows(ph, hidden_, hidden_)),
                                    ad::rows(b_, hidden_, hidden_)));
    ad::Var n = ad::tanh(ad::add(
        ad::add(ad::rows(px, 2 * hidden_, hidden_),
                ad::mul(r, ad::rows(ph, 2 * hidden_, hidden_))),
        ad::rows(b_, 2 * hidden_, hidden_)));
    // h' = (1 - z) * n + z * h
    ad::Var h_next =
        ad::add(ad::sub(n, ad::mul(z, n)), ad::mul(z, h));
    state[0] = h_next;
    return h_next;
  }

  void visit_params(const std::string& prefix, const ParamVisitor& fn) override {
    fn(prefix + ".w_x", w_x_);
    fn(prefix + ".w_h", w_h_);
    fn(prefix + ".b", b_);
  }

 private:
  int hidden_;
  ad::Var w_x_, w_h_, b_;
};

std::vector<ad::Var> zero_state(const RnnCell& cell) {
  std::vector<ad::Var> state;
  for (int i = 0; i < cell.state_count(); ++i) {
    state.push_back(
        ad::Var::constant(Eigen::MatrixXd::Zero(cell.hidden_dim(), 1)));
  }
  return state;
}

}  // namespace

std::unique_ptr<RnnCell> make_rnn_cell(const std::string& kind, int input_dim,
                                       int hidden_dim, RngStream& rng) {
  if (kind == "lstm") return std::make_unique<LstmCell>(input_dim, hidden_dim, rng);
  if (kind == "gru") return std::make_unique<GruCell>(input_dim, hidden_dim, rng);
  throw std::invalid_argument("unknown rnn cell kind: '" + kind + "'");
}

BiRnn::BiRnn(const std::string& cell_kind, int input_dim, int output_dim,
             std::string name, RngStream& rng)
    : output_dim_(output_dim), name_(std::move(name)) {
  if (output_dim < 2 || output_dim % 2 != 0) {
    throw std::invalid_argument("BiRnn output_dim must be a positive even number");
  }
  fwd_ = make_rnn_cell(cell_kind, input_dim, output_dim / 2, rng);
  bwd_ = make_rnn_cell(cell_kind, input_dim, output_dim / 2, rng);
}

std::vector<ad::Var> BiRnn::apply(const std::vector<ad::Var>& inputs) const {
  if (inputs.empty()) throw std::invalid_argument("BiRnn: empty input sequence");
  const std::size_t n = inputs.size();
  std::vector<ad::Var> fw(n), bw(n);
  auto state_f = zero_state(*fwd_);
  for (std::size_t t = 0; t < n; ++t) fw[t] = fwd_->step(inputs[t], state_f);
  auto state_b = zero_state(*bwd_);
  for (std::size_t t = n; t-- > 0;) bw[t] = bwd_->step(inputs[t], state_b);
  std::vector<ad::Var> out(n);
  for (std::size_t t = 0; t < n; ++t) out[t] = ad::vcat({fw[t], bw[t]});
  return out;
}

void BiRnn::visit_params(const ParamVisitor& fn) {
  fwd_->visit_params(name_ + ".fw", fn);
  bwd_->visit_params(name_ + ".bw", fn);
}

AttentionPooler::AttentionPooler(int input_dim, int attn_dim, RngStream& rng) {
  w_ = ad::Var::param(glorot(attn_dim, input_dim, rng));
  b_ = ad::Var::param(Eigen::MatrixXd::Zero(attn_dim, 1));
  ad::Mat u(attn_dim, 1);
  for (int i = 0; i < attn_dim; ++i) {
    u(i, 0) = rng.normal(0.0, 1.0 / std::sqrt(static_cast<double>(attn_dim)));
  }
  u_ = ad::Var::param(std::move(u));
}

ad::Var AttentionPooler::attention_weights(
    const std::vector<ad::Var>& token_states) const {
  if (token_states.empty()) {
    throw std::invalid_argument("attention pooling over an empty sequence");
  }
  ad::Var h = ad::hcat(token_states);                       // d x T
  ad::Var u = ad::tanh(ad::add_colwise(ad::matmul(w_, h), b_));  // a x T
  ad::Var scores = ad::transpose(ad::matmul(ad::transpose(u_), u));  // T x 1
  return ad::softmax(scores);
}

ad::Var AttentionPooler::pool(const std::vector<ad::Var>& token_states) const {
  ad::Var alpha = attention_weights(token_states);  // T x 1
  ad::Var h = ad::hcat(token_states);               // d x T
  return ad::matmul(h, alpha);                      // d x 1
}

void AttentionPooler::visit_params(const ParamVisitor& fn) {
  fn("attn.w", w_);
  fn("attn.b", b_);
  fn("attn.u", u_);
}

HierarchicalModel::HierarchicalModel(const BackboneConfig& cfg,
                                     const LabelScheme& scheme,
                                     std::uint64_t seed)
    : cfg_(cfg), scheme_(scheme) {
  cfg_.validate();
  RngStream rng(seed);
  encoder_ = make_token_encoder(cfg_.encoder, cfg_.fine_tune_encoder);
  auto word_rng = rng.fork(1);
  word_rnn_ = std::make_unique<BiRnn>(cfg_.rnn_cell, encoder_->dim(),
                                      cfg_.word_rnn_dim, "word_rnn", word_rng);
  auto attn_rng = rng.fork(2);
  pooler_ = std::make_unique<AttentionPooler>(cfg_.word_rnn_dim, cfg_.attn_dim,
                                              attn_rng);
  auto sent_rng = rng.fork(3);
  sent_rnn_ = std::make_unique<BiRnn>(cfg_.rnn_cell, cfg_.word_rnn_dim,
                                      cfg_.sent_rnn_dim, "sent_rnn", sent_rng);
  crf_ = std::make_unique<CrfLayer>(cfg_.sent_rnn_dim,
                                    static_cast<int>(scheme_.size()),
                                    rng.fork(4).next_u64());
}

ad::Var HierarchicalModel::maybe_dropout(const ad::Var& v, bool training,
                                         RngStream& rng) const {
  if (!training || cfg_.dropout <= 0.0) return v;
  const double keep = 1.0 - cfg_.dropout;
  Eigen::MatrixXd mask(v.rows(), v.cols());
  for (Eigen::Index r = 0; r < v.rows(); ++r) {
    for (Eigen::Index c = 0; c < v.cols(); ++c) {
      mask(r, c) = rng.uniform() < keep ? 1.0 / keep : 0.0;
    }
  }
  return ad::mul(v, ad::Var::constant(std::move(mask)));
}

HierarchicalModel::ForwardResult HierarchicalModel::forward(
    const Document& doc, bool training, RngStream& dropout_rng,
    const SentenceHook* hook) const {
  if (doc.sentences.empty()) {
    throw std::invalid_argument("forward: document '" + doc.doc_id +
                                "' has no sentences");
  }
  ForwardResult out;
  out.pooled.reserve(doc.sentences.size());

  std::vector<ad::Var> sent_inputs;
  sent_inputs.reserve(doc.sentences.size());
  for (std::size_t i = 0; i < doc.sentences.size(); ++i) {
    const Sentence& sent = doc.sentences[i];
    auto tokens = tokenize(sent.text);
    if (tokens.empty()) {
      throw std::invalid_argument("forward: sentence " + std::to_string(i) +
                                  " of '" + doc.doc_id + "' has no tokens");
    }
    auto token_states = encoder_->encode(
        tokens, static_cast<std::size_t>(cfg_.max_seq_len));
    auto word_states = word_rnn_->apply(token_states);
    ad::Var v = pooler_->pool(word_states);
    if (hook != nullptr && *hook) v = (*hook)(sent, i, v);
    out.pooled.push_back(v);
    sent_inputs.push_back(maybe_dropout(v, training, dropout_rng));
  }

  auto ctx = sent_rnn_->apply(sent_inputs);
  out.contextualized.reserve(ctx.size());
  std::vector<ad::Var> emission_inputs;
  emission_inputs.reserve(ctx.size());
  for (auto& c : ctx) {
    out.contextualized.push_back(c);
    emission_inputs.push_back(maybe_dropout(c, training, dropout_rng));
  }
  out.emissions = crf_->emissions(emission_inputs);

  if (cfg_.use_crf) {
    out.predictions = crf_->decode(out.emissions.value());
  } else {
    // Row-wise argmax, lowest index on ties.
    const auto& e = out.emissions.value();
    out.predictions.resize(e.rows());
    for (Eigen::Index t = 0; t < e.rows(); ++t) {
      int best = 0;
      for (Eigen::Index j = 1; j < e.cols(); ++j) {
        if (e(t, j) > e(t, best)) best = static_cast<int>(j);
      }
      out.predictions[t] = best;
    }
  }
  return out;
}

ad::Var HierarchicalModel::task_loss(const ForwardResult& fwd,
                                     const std::vector<int>& gold) const {
  return cfg_.use_crf ? crf_->neg_log_likelihood(fwd.emissions, gold)
                      : crf_->cross_entropy(fwd.emissions, gold);
}

std::vector<int> HierarchicalModel::gold_indices(const Document& doc) const {
  std::vector<int> out;
  out.reserve(doc.sentences.size());
  for (const auto& s : doc.sentences) {
    const int idx = scheme_.index_of(s.label_at(scheme_.level()));
    if (idx < 0) {
      throw std::invalid_argument("document '" + doc.doc_id +
                                  "' carries a label outside the scheme");
    }
    out.push_back(idx);
  }
  return out;
}

void HierarchicalModel::visit_params(const ParamVisitor& fn) {
  encoder_->visit_params(fn);
  word_rnn_->visit_params(fn);
  pooler_->visit_params(fn);
  sent_rnn_->visit_params(fn);
  crf_->visit_params(fn);
}

}  // namespace rrl
