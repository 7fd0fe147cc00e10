// End-to-end smoke tests of the rrl command-line tool. Each case shells out
// to the built binary against fixtures written into a temp directory.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "rrl/harness.hpp"
#include "support/synthetic.hpp"
#include "support/tmpdir.hpp"

using namespace rrl;

namespace {

int run_cli(const std::string& args, const std::string& log_path) {
  const std::string cmd =
      std::string(RRL_CLI_PATH) + " " + args + " >" + log_path + " 2>&1";
  const int rc = std::system(cmd.c_str());
  return WEXITSTATUS(rc);
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct Fixture {
  rrltest::TempDir tmp;
  std::string config_path;

  explicit Fixture(const std::string& method = "baseline") {
    rrltest::SynthSpec spec;
    spec.num_docs = 4;
    Corpus trainc = rrltest::make_synthetic_corpus(spec);
    spec.num_docs = 2;
    spec.seed = 77;
    spec.doc_prefix = "dev";
    Corpus devc = rrltest::make_synthetic_corpus(spec);

    trainc.scheme().save(tmp.file("scheme.json"));
    save_corpus(trainc, tmp.file("train.jsonl"));
    save_corpus(devc, tmp.file("dev.jsonl"));

    ExperimentConfig cfg;
    cfg.corpus.scheme_path = tmp.file("scheme.json");
    cfg.corpus.train_path = tmp.file("train.jsonl");
    cfg.corpus.dev_path = tmp.file("dev.jsonl");
    cfg.corpus.test_path = tmp.file("dev.jsonl");
    cfg.backbone.encoder = "random-small:dim=12:seed=3";
    cfg.backbone.dropout = 0.0;
    cfg.backbone.max_seq_len = 12;
    cfg.backbone.word_rnn_dim = 10;
    cfg.backbone.sent_rnn_dim = 10;
    cfg.backbone.attn_dim = 6;
    cfg.method = method;
    if (method == "pcm" || method == "pcm_gold") {
      cfg.pcm = PcmConfig{};
      cfg.pcm->sentence_embedder = "random-small:dim=12:seed=3";
    }
    if (method == "pbr") {
      cfg.pbr = PbrConfig{};
      cfg.pbr->q = 2;
    }
    cfg.optimizer.epochs = 2;
    cfg.optimizer.learning_rate = 5e-3;
    cfg.seeds = {1};
    cfg.outputs = tmp.file("run");
    config_path = tmp.file("config.json");
    cfg.save(config_path);
  }
};

}  // namespace

TEST_CASE("bad arguments exit nonzero with usage") {
  rrltest::TempDir tmp;
  CHECK(run_cli("", tmp.file("log")) != 0);
  CHECK(run_cli("no-such-command", tmp.file("log")) != 0);
  CHECK(run_cli("train", tmp.file("log")) != 0);  // missing --config
  const std::string log = slurp(tmp.file("log"));
  CHECK(log.find("--config") != std::string::npos);
}

TEST_CASE("train then eval prints a role-wise table") {
  Fixture fx;
  CHECK(run_cli("train --config " + fx.config_path, fx.tmp.file("train.log")) == 0);
  const std::string train_log = slurp(fx.tmp.file("train.log"));
  CHECK(train_log.find("dev macro-F1") != std::string::npos);

  const std::string ckpt = fx.tmp.file("run/checkpoints/seed-1.json");
  REQUIRE(std::filesystem::exists(ckpt));

  CHECK(run_cli("eval --checkpoint " + ckpt + " --corpus " +
                    fx.tmp.file("dev.jsonl") + " --out " +
                    fx.tmp.file("report.json"),
                fx.tmp.file("eval.log")) == 0);
  const std::string eval_log = slurp(fx.tmp.file("eval.log"));
  CHECK(eval_log.find("Macro-F1") != std::string::npos);
  CHECK(eval_log.find("role0") != std::string::npos);
  CHECK(std::filesystem::exists(fx.tmp.file("report.json")));

  SUBCASE("eval refuses a mismatched config") {
    ExperimentConfig other = ExperimentConfig::load(fx.config_path);
    other.optimizer.learning_rate *= 10;
    other.save(fx.tmp.file("other.json"));
    CHECK(run_cli("eval --checkpoint " + ckpt + " --corpus " +
                      fx.tmp.file("dev.jsonl") + " --config " +
                      fx.tmp.file("other.json"),
                  fx.tmp.file("eval2.log")) != 0);
    CHECK(slurp(fx.tmp.file("eval2.log")).find("fingerprint") !=
          std::string::npos);
  }

  SUBCASE("export writes one row per sentence") {
    CHECK(run_cli("export --checkpoint " + ckpt + " --corpus " +
                      fx.tmp.file("dev.jsonl") + " --layer pooled --out " +
                      fx.tmp.file("emb.csv"),
                  fx.tmp.file("export.log")) == 0);
    Corpus dev = load_corpus(fx.tmp.file("dev.jsonl"),
                             LabelScheme::load(fx.tmp.file("scheme.json")));
    std::ifstream in(fx.tmp.file("emb.csv"));
    std::string line;
    long rows = -1;  // discount header
    while (std::getline(in, line)) ++rows;
    CHECK(rows == static_cast<long>(dev.total_sentences()));
  }

  SUBCASE("report renders a saved run report") {
    CHECK(run_cli("report --file " + fx.tmp.file("report.json") + " --scheme " +
                      fx.tmp.file("scheme.json"),
                  fx.tmp.file("report.log")) == 0);
    CHECK(slurp(fx.tmp.file("report.log")).find("Weighted-F1") !=
          std::string::npos);
  }
}

TEST_CASE("protos then train --protos matches end-to-end pcm") {
  Fixture fx("pcm");
  CHECK(run_cli("protos --config " + fx.config_path + " --strategy full --out " +
                    fx.tmp.file("protos.json"),
                fx.tmp.file("protos.log")) == 0);
  REQUIRE(std::filesystem::exists(fx.tmp.file("protos.json")));

  // End-to-end run.
  CHECK(run_cli("train --config " + fx.config_path, fx.tmp.file("a.log")) == 0);
  const std::string direct = slurp(fx.tmp.file("a.log"));

  // Through the prototype file.
  ExperimentConfig cfg = ExperimentConfig::load(fx.config_path);
  cfg.outputs = fx.tmp.file("run2");
  cfg.save(fx.tmp.file("config2.json"));
  CHECK(run_cli("train --config " + fx.tmp.file("config2.json") + " --protos " +
                    fx.tmp.file("protos.json"),
                fx.tmp.file("b.log")) == 0);
  const std::string via_file = slurp(fx.tmp.file("b.log"));

  auto extract_score = [](const std::string& log) {
    const auto pos = log.find("dev macro-F1");
    REQUIRE(pos != std::string::npos);
    return log.substr(pos, 24);
  };
  CHECK(extract_score(direct) == extract_score(via_file));
}

TEST_CASE("sweep over injection kinds emits a comparison table") {
  Fixture fx("pcm");
  // one-epoch sweep to keep five trainings quick
  ExperimentConfig cfg = ExperimentConfig::load(fx.config_path);
  cfg.optimizer.epochs = 1;
  cfg.save(fx.config_path);
  CHECK(run_cli("sweep --config " + fx.config_path + " --axis injection",
                fx.tmp.file("sweep.log")) == 0);
  const std::string log = slurp(fx.tmp.file("sweep.log"));
  for (const char* kind : {"linear_fusion", "cln", "gated_residual", "film",
                           "cross_attention"}) {
    CHECK(log.find(kind) != std::string::npos);
  }
  CHECK(log.find("<- best") != std::string::npos);
  CHECK(std::filesystem::exists(fx.tmp.file("run/reports/grid.json")));
}
