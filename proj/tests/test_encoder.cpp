#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "rrl/backbone.hpp"
#include "rrl/encoder.hpp"
#include "support/gradcheck.hpp"
#include "support/synthetic.hpp"

using namespace rrl;

namespace {

ad::Mat random_mat(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  ad::Mat m(r, c);
  for (Eigen::Index i = 0; i < r; ++i) {
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = dist(rng);
  }
  return m;
}

BackboneConfig tiny_backbone() {
  BackboneConfig cfg;
  cfg.encoder = "random-small:dim=16:seed=3";
  cfg.dropout = 0.0;
  cfg.max_seq_len = 16;
  cfg.word_rnn_dim = 12;
  cfg.sent_rnn_dim = 10;
  cfg.attn_dim = 8;
  return cfg;
}

}  // namespace

TEST_CASE("tokenizer lowercases and strips punctuation") {
  auto toks = tokenize("The Court, in Smith v. Jones (1971), held:");
  CHECK(toks == std::vector<std::string>{"the", "court", "in", "smith", "v",
                                         "jones", "1971", "held"});
  CHECK(tokenize("...").empty());
}

TEST_CASE("random-small encoder is deterministic and truncates") {
  auto enc = make_token_encoder("random-small:dim=8:seed=5", false);
  CHECK(enc->dim() == 8);
  auto a = enc->encode({"alpha", "beta"}, 16);
  auto b = enc->encode({"alpha", "beta"}, 16);
  REQUIRE(a.size() == 2);
  CHECK((a[0].value() - b[0].value()).norm() == 0.0);
  CHECK((a[0].value() - a[1].value()).norm() != 0.0);

  auto enc2 = make_token_encoder("random-small:dim=8:seed=5", false);
  CHECK((enc2->encode({"alpha"}, 16)[0].value() - a[0].value()).norm() == 0.0);

  auto truncated = enc->encode({"a", "b", "c", "d"}, 2);
  CHECK(truncated.size() == 2);  // keeps the head of the sentence

  CHECK_THROWS_AS(enc->encode({}, 4), std::invalid_argument);
  CHECK_THROWS_AS(make_token_encoder("no-such-encoder:dim=4", false),
                  std::invalid_argument);
}

TEST_CASE("attention pooling") {
  RngStream rng(11);
  AttentionPooler pooler(6, 4, rng);
  std::mt19937_64 mrng(23);

  SUBCASE("single token passes through") {
    ad::Var h = ad::Var::constant(random_mat(6, 1, mrng));
    ad::Var v = pooler.pool({h});
    CHECK((v.value() - h.value()).norm() == doctest::Approx(0.0));
    CHECK(ad::scalar(ad::sum(pooler.attention_weights({h}))) ==
          doctest::Approx(1.0));
  }

  SUBCASE("identical tokens pool to themselves") {
    ad::Var h = ad::Var::constant(random_mat(6, 1, mrng));
    ad::Var v = pooler.pool({h, h, h, h});
    CHECK((v.value() - h.value()).norm() == doctest::Approx(0.0).epsilon(1e-12));
  }

  SUBCASE("weights are a distribution") {
    for (int rep = 0; rep < 10; ++rep) {
      std::vector<ad::Var> states;
      for (int t = 0; t < 5; ++t)
        states.push_back(ad::Var::constant(random_mat(6, 1, mrng)));
      ad::Var alpha = pooler.attention_weights(states);
      CHECK(alpha.value().minCoeff() >= 0.0);
      CHECK(alpha.value().sum() == doctest::Approx(1.0).epsilon(1e-6));
    }
  }

  SUBCASE("matches a straight-line reference implementation") {
    // Independent recomputation: u_t = tanh(W h_t + b); a = softmax(u_t . u);
    // v = sum a_t h_t.
    ad::Mat w, b, u;
    pooler.visit_params([&](const std::string& name, ad::Var& p) {
      if (name == "attn.w") w = p.value();
      if (name == "attn.b") b = p.value();
      if (name == "attn.u") u = p.value();
    });
    std::vector<ad::Var> states;
    for (int t = 0; t < 3; ++t)
      states.push_back(ad::Var::constant(random_mat(6, 1, mrng)));

    Eigen::VectorXd scores(3);
    for (int t = 0; t < 3; ++t) {
      Eigen::VectorXd ut = ((w * states[t].value()) + b).array().tanh();
      scores(t) = ut.dot(Eigen::VectorXd(u.col(0)));
    }
    Eigen::VectorXd alpha = (scores.array() - scores.maxCoeff()).exp();
    alpha /= alpha.sum();
    Eigen::VectorXd expected = Eigen::VectorXd::Zero(6);
    for (int t = 0; t < 3; ++t) expected += alpha(t) * states[t].value().col(0);

    ad::Var v = pooler.pool(states);
    CHECK((v.value().col(0) - expected).norm() < 1e-6);
  }

  SUBCASE("gradcheck through parameters and inputs") {
    std::vector<ad::Var> states;
    for (int t = 0; t < 3; ++t)
      states.push_back(ad::Var::param(random_mat(6, 1, mrng)));
    std::vector<ad::Var> params;
    pooler.visit_params([&](const std::string&, ad::Var& p) { params.push_back(p); });
    ad::Var probe = ad::Var::param(random_mat(6, 1, mrng));
    auto f = [&] { return ad::dot(pooler.pool(states), probe); };
    std::vector<ad::Var> all = params;
    all.insert(all.end(), states.begin(), states.end());
    CHECK(rrltest::max_grad_error(f, all) < 1e-4);
  }

  SUBCASE("empty sequence is rejected") {
    CHECK_THROWS_AS(pooler.pool({}), std::invalid_argument);
  }
}

TEST_CASE("BiRnn output shape and gradients") {
  for (const char* cell : {"lstm", "gru"}) {
    CAPTURE(cell);
    RngStream rng(3);
    BiRnn rnn(cell, 5, 8, "rnn", rng);
    std::mt19937_64 mrng(4);
    std::vector<ad::Var> xs;
    for (int t = 0; t < 4; ++t) xs.push_back(ad::Var::param(random_mat(5, 1, mrng)));
    auto ys = rnn.apply(xs);
    REQUIRE(ys.size() == 4);
    for (const auto& y : ys) CHECK(y.rows() == 8);

    ad::Var probe = ad::Var::param(random_mat(8, 1, mrng));
    auto f = [&] {
      auto out = rnn.apply(xs);
      ad::Var acc = ad::dot(out[0], probe);
      for (std::size_t t = 1; t < out.size(); ++t)
        acc = ad::add(acc, ad::dot(out[t], probe));
      return acc;
    };
    std::vector<ad::Var> all = xs;
    rnn.visit_params([&](const std::string&, ad::Var& p) { all.push_back(p); });
    CHECK(rrltest::max_grad_error(f, all) < 1e-4);
  }
}

TEST_CASE("hierarchical forward") {
  rrltest::SynthSpec spec;
  spec.num_docs = 2;
  Corpus corpus = rrltest::make_synthetic_corpus(spec);
  HierarchicalModel model(tiny_backbone(), corpus.scheme(), 99);

  SUBCASE("one prediction per sentence") {
    Document doc = corpus.document(0);
    RngStream rng(1);
    auto fwd = model.forward(doc, false, rng);
    CHECK(fwd.predictions.size() == doc.sentences.size());
    CHECK(fwd.pooled.size() == doc.sentences.size());
    CHECK(fwd.emissions.rows() ==
          static_cast<Eigen::Index>(doc.sentences.size()));
    CHECK(fwd.emissions.cols() == 4);

    Document single;
    single.doc_id = "one";
    single.sentences = {doc.sentences[0]};
    auto fwd1 = model.forward(single, false, rng);
    CHECK(fwd1.predictions.size() == 1);
  }

  SUBCASE("identical inputs give identical outputs without dropout") {
    Document doc = corpus.document(0);
    RngStream r1(1), r2(2);
    auto a = model.forward(doc, false, r1);
    auto b = model.forward(doc, false, r2);
    CHECK((a.emissions.value() - b.emissions.value()).norm() == 0.0);
    CHECK(a.predictions == b.predictions);
  }

  SUBCASE("identity hook changes nothing") {
    Document doc = corpus.document(0);
    RngStream rng(1);
    HierarchicalModel::SentenceHook identity =
        [](const Sentence&, std::size_t, const ad::Var& v) { return v; };
    auto with = model.forward(doc, false, rng, &identity);
    auto without = model.forward(doc, false, rng);
    CHECK((with.emissions.value() - without.emissions.value()).norm() == 0.0);
    CHECK(with.predictions == without.predictions);
  }

  SUBCASE("empty sentences fail loudly") {
    Document doc;
    doc.doc_id = "bad";
    Sentence s;
    s.text = "!!!";  // tokenizes to nothing
    s.labels[SchemeLevel::kFunction] = "role0";
    doc.sentences.push_back(s);
    RngStream rng(1);
    CHECK_THROWS_AS(model.forward(doc, false, rng), std::invalid_argument);
  }

  SUBCASE("empty documents fail loudly") {
    Document doc;
    doc.doc_id = "empty";
    RngStream rng(1);
    CHECK_THROWS_AS(model.forward(doc, false, rng), std::invalid_argument);
  }

  SUBCASE("task loss gradcheck end to end (tiny shapes)") {
    BackboneConfig cfg = tiny_backbone();
    cfg.word_rnn_dim = 6;
    cfg.sent_rnn_dim = 6;
    cfg.attn_dim = 4;
    cfg.encoder = "random-small:dim=6:seed=3:buckets=16";
    HierarchicalModel small(cfg, corpus.scheme(), 1);
    Document doc;
    doc.doc_id = "d";
    for (int i = 0; i < 2; ++i) {
      Sentence s;
      s.text = "cue" + std::to_string(i) + " court";
      s.labels[SchemeLevel::kFunction] = "role" + std::to_string(i);
      doc.sentences.push_back(s);
    }
    RngStream rng(1);
    auto gold = small.gold_indices(doc);
    auto f = [&] {
      auto fwd = small.forward(doc, false, rng);
      return small.task_loss(fwd, gold);
    };
    std::vector<ad::Var> params;
    small.visit_params([&](const std::string&, ad::Var& p) { params.push_back(p); });
    CHECK(rrltest::max_grad_error(f, params, 1e-5) < 1e-4);
  }
}

TEST_CASE("cross-entropy mode decodes by row argmax") {
  rrltest::SynthSpec spec;
  spec.num_docs = 1;
  Corpus corpus = rrltest::make_synthetic_corpus(spec);
  BackboneConfig cfg = tiny_backbone();
  cfg.use_crf = false;
  HierarchicalModel model(cfg, corpus.scheme(), 7);
  RngStream rng(1);
  auto fwd = model.forward(corpus.document(0), false, rng);
  const auto& e = fwd.emissions.value();
  for (Eigen::Index t = 0; t < e.rows(); ++t) {
    Eigen::Index argmax = 0;
    e.row(t).maxCoeff(&argmax);
    CHECK(fwd.predictions[t] == static_cast<int>(argmax));
  }
}

TEST_CASE("backbone config validation") {
  BackboneConfig cfg = tiny_backbone();
  cfg.dropout = 1.0;
  CHECK_THROWS(cfg.validate());
  cfg = tiny_backbone();
  cfg.word_rnn_dim = 7;  // odd: cannot split across directions
  CHECK_THROWS(cfg.validate());
  cfg = tiny_backbone();
  cfg.rnn_cell = "transformer";
  CHECK_THROWS(cfg.validate());
}
