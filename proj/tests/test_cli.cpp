#include "cli.hpp"

#include "sqa/checkpoint.hpp"
#include "sqa/config.hpp"
#include "sqa/evaluation.hpp"

#include <doctest.h>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

namespace fs = std::filesystem;

namespace {

struct Result {
    int code;
    std::string out, err;
};

Result sqa_run(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = sqa::cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

void write(const fs::path& p, const std::string& text) {
    std::ofstream(p, std::ios::binary) << text;
}

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("sqa_test_cli_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

const std::vector<std::string> kTiny = {"--set", "model.dim=8",           "--set", "model.heads=2",
                                        "--set", "model.weight_hidden=8", "--set", "model.score_hidden=8",
                                        "--set", "model.fusion_dim=8",    "--set", "model.attention_hidden=8",
                                        "--set", "model.max_seq_len=64",  "--set", "model.tau=20"};

std::vector<std::string> cat(std::vector<std::string> a, const std::vector<std::string>& b) {
    a.insert(a.end(), b.begin(), b.end());
    return a;
}

/// A small synthetic dataset and a model trained on it for one epoch,
/// shared by the cases below.
struct Trained {
    fs::path dir = scratch("trained");
    std::string config = (dir / "data" / "config.toml").string();
    std::string ckpt = (dir / "ckpt").string();

    Trained() {
        const auto s = sqa_run({"synth", "--out", (dir / "data").string(), "--num-questions", "40", "--num-paragraphs",
                                "500", "--vocab-size", "500"});
        REQUIRE(s.code == 0);
        const auto t = sqa_run(cat({"train", "--config", config, "--out", ckpt, "--epochs", "1", "--threads", "2"}, kTiny));
        REQUIRE_MESSAGE(t.code == 0, t.err);
    }
};

const Trained& trained() {
    static const Trained t;
    return t;
}

}  // namespace

TEST_CASE("help and usage errors") {
    const auto help = sqa_run({"--help"});
    CHECK(help.code == 0);
    for (const char* sub : {"synth", "index", "train", "predict", "evaluate", "weights"})
        CHECK(help.out.find(sub) != std::string::npos);
    CHECK(sqa_run({"train", "--help"}).out.find("--refresh-interval") != std::string::npos);

    CHECK(sqa_run({}).code == 1);
    CHECK(sqa_run({"frobnicate"}).code == 1);
    CHECK(sqa_run({"index"}).code == 1);  // --out is required
    CHECK(sqa_run({"predict", "--checkpoint", "x", "--split", "valid"}).code == 1);
    const auto bad_key = sqa_run({"index", "--out", "/tmp/x", "--set", "model.depth=3"});
    CHECK(bad_key.code == 1);
    CHECK(bad_key.err.find("model.depth") != std::string::npos);
    CHECK(sqa_run({"index", "--out", "/tmp/x", "--set", "model.k"}).code == 1);
    CHECK(sqa_run({"index", "--out", "/tmp/x", "--set", "model.k=ten"}).code == 1);
}

TEST_CASE("config files, overrides and snapshots") {
    std::istringstream in(R"(# comment
[model]
k = 7   # trailing comment
tau = 30
uniform_weights = true
[data]
corpus = "a # b.jsonl"
)");
    sqa::RunConfig cfg = sqa::parse_config(in);
    CHECK(cfg.model.k == 7);
    CHECK(cfg.model.retriever.tau == 30);
    CHECK(cfg.model.uniform_weights);
    CHECK(cfg.corpus == "a # b.jsonl");
    CHECK(cfg.model.k_fusion == 2);  // untouched keys keep their defaults

    sqa::apply_overrides(cfg, {{"model.k", "12"}, {"train.learning_rate", "0.5"}});
    CHECK(cfg.model.k == 12);
    CHECK(cfg.train.learning_rate == 0.5);

    std::istringstream again(cfg.to_toml());
    const sqa::RunConfig round = sqa::parse_config(again);
    CHECK(round.to_toml() == cfg.to_toml());

    std::istringstream unknown("[model]\nwidth = 3\n");
    CHECK_THROWS_AS(sqa::parse_config(unknown), sqa::ConfigError);
    std::istringstream no_section("k = 3\n");
    CHECK_THROWS_AS(sqa::parse_config(no_section), sqa::ConfigError);
}

TEST_CASE("the shipped config carries the selected retrieval settings") {
    const sqa::RunConfig cfg = sqa::load_config(std::string(SQA_SOURCE_DIR) + "/configs/default.toml");
    CHECK(cfg.model.k == 10);
    CHECK(cfg.model.k_fusion == 2);
    CHECK(cfg.model.retriever.tau == 200);
    CHECK(cfg.synth.num_questions >= 1000);
    CHECK(cfg.corpus == "data/synthetic/corpus.jsonl");
}

TEST_CASE("index prints statistics and rebuilds byte for byte") {
    const auto dir = scratch("index");
    write(dir / "corpus.jsonl",
          "{\"id\": \"a\", \"text\": \"cats chase mice\"}\n"
          "{\"id\": \"b\", \"text\": \"dogs chase cats\"}\n"
          "{\"id\": \"c\", \"text\": \"the owl hunts\"}\n");
    const auto corpus = (dir / "corpus.jsonl").string();
    const auto r1 = sqa_run({"index", "--corpus", corpus, "--out", (dir / "one.idx").string()});
    REQUIRE(r1.code == 0);
    CHECK(r1.out.find("N: 3\n") != std::string::npos);
    CHECK(fs::exists(dir / "one.idx.config.toml"));
    REQUIRE(sqa_run({"index", "--corpus", corpus, "--out", (dir / "two.idx").string()}).code == 0);
    CHECK(slurp(dir / "one.idx") == slurp(dir / "two.idx"));

    CHECK(sqa_run({"index", "--corpus", (dir / "missing.jsonl").string(), "--out", (dir / "x.idx").string()}).code == 2);
    CHECK(sqa_run({"index", "--corpus", corpus, "--out", "/proc/no/such/dir/x.idx"}).code == 3);
}

TEST_CASE("train rejects a malformed question file before training") {
    const auto dir = scratch("malformed");
    write(dir / "corpus.jsonl", "{\"id\": \"a\", \"text\": \"cats chase mice\"}\n");
    write(dir / "questions.jsonl",
          "{\"id\": \"q1\", \"scenario\": \"\", \"question\": \"who\", \"options\": [\"cats\", \"dogs\"], \"split\": "
          "\"train\"}\n");
    const auto r = sqa_run({"train", "--corpus", (dir / "corpus.jsonl").string(), "--questions",
                            (dir / "questions.jsonl").string(), "--out", (dir / "out").string()});
    CHECK(r.code == 2);
    CHECK(r.err.find("answer") != std::string::npos);
    CHECK_FALSE(fs::exists(dir / "out"));
}

TEST_CASE("predictions agree with the emitted scores and repeat exactly") {
    const Trained& t = trained();
    CHECK(fs::exists(fs::path(t.ckpt) / "config.toml"));
    CHECK(fs::exists(fs::path(t.ckpt) / "train_log.jsonl"));

    const auto pred = (t.dir / "pred.jsonl").string();
    const auto r = sqa_run({"predict", "--config", t.config, "--checkpoint", t.ckpt, "--split", "dev", "--out", pred,
                            "--threads", "1"});
    REQUIRE(r.code == 0);
    CHECK(fs::exists(pred + ".config.toml"));
    const auto again = sqa_run({"predict", "--config", t.config, "--checkpoint", t.ckpt, "--split", "dev"});
    CHECK(again.out == slurp(pred));

    // Replay the decision rule on the emitted scores, once with the mixture
    // stored in the checkpoint and once with a sparse-only override.
    const auto mx = sqa::load_checkpoint(t.ckpt + "/model.ckpt").metadata.at("mixture");
    const sqa::Mixture stored{mx.at("alpha").get<double>(), mx.at("beta").get<double>(), mx.at("gamma").get<double>()};
    const auto sparse = sqa_run({"predict", "--config", t.config, "--checkpoint", t.ckpt, "--split", "dev", "--set",
                               "predict.alpha=1", "--set", "predict.beta=0", "--set", "predict.gamma=0"});
    REQUIRE(sparse.code == 0);
    std::istringstream lines(slurp(pred)), sparse_only(sparse.out);
    std::string line, other;
    int n = 0;
    while (std::getline(lines, line) && std::getline(sparse_only, other)) {
        const auto j = nlohmann::json::parse(line);
        const auto k = nlohmann::json::parse(other);
        auto row = [](const nlohmann::json& v) {
            const auto x = v.get<std::vector<double>>();
            return sqa::RowVector(Eigen::Map<const sqa::RowVector>(x.data(), static_cast<Eigen::Index>(x.size())));
        };
        const sqa::ScoreTriple s{row(j["s_spa"]), row(j["s_den"]), row(j["s_fus"])};
        CHECK(j["s_spa"] == k["s_spa"]);
        CHECK(sqa::predict(s, stored) == j["predicted"].get<int>());
        CHECK(sqa::predict(s, {1, 0, 0}) == k["predicted"].get<int>());
        CHECK(s.spa.size() == 4);
        ++n;
    }
    CHECK(n == 8);

    const auto qa = sqa_run({"evaluate", "qa", "--config", t.config, "--predictions", pred, "--split", "dev"});
    REQUIRE(qa.code == 0);
    CHECK(qa.out.find("\"n\":8") != std::string::npos);
}

TEST_CASE("single-question predict, trace and run outputs") {
    const Trained& t = trained();
    const auto trace = (t.dir / "trace.jsonl").string();
    const auto run = (t.dir / "run.jsonl").string();
    const auto r = sqa_run({"predict", "--config", t.config, "--checkpoint", t.ckpt, "--question-id", "q0003", "--trace",
                            trace, "--run", run});
    REQUIRE_MESSAGE(r.code == 0, r.err);
    CHECK(nlohmann::json::parse(r.out)["question_id"] == "q0003");
    const auto tr = nlohmann::json::parse(slurp(trace));
    REQUIRE(tr["options"].size() == 4);
    for (const auto& o : tr["options"]) {
        CHECK(o["P_top"].size() == 10);
        CHECK(o["P_fus"].size() == 2);
        double sum = 0;
        for (double w : o["weights"]) sum += w;
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    }
    const auto ret = sqa_run({"evaluate", "retrieval", "--config", t.config, "--run", run});
    REQUIRE(ret.code == 0);
    CHECK(ret.out.find("\"evaluated\":1") != std::string::npos);

    CHECK(sqa_run({"predict", "--config", t.config, "--checkpoint", t.ckpt, "--question-id", "nope"}).code == 2);
    CHECK(sqa_run({"predict", "--config", t.config, "--checkpoint", (t.dir / "none").string()}).code == 2);
}

TEST_CASE("weights inspect emits one row per word and sums to one") {
    const Trained& t = trained();
    const auto r = sqa_run({"weights", "inspect", "--config", t.config, "--checkpoint", t.ckpt, "--question-id", "q0001"});
    REQUIRE(r.code == 0);
    std::istringstream lines(r.out);
    std::string line;
    std::getline(lines, line);
    CHECK(line == "question_id\toption\tword\tweight");
    std::map<int, double> sums;
    std::map<int, int> rows;
    double prev = 2;
    int prev_option = -1;
    while (std::getline(lines, line)) {
        std::istringstream f(line);
        std::string qid, word;
        int option;
        double w;
        f >> qid >> option >> word >> w;
        CHECK(qid == "q0001");
        if (option != prev_option) prev = 2;
        CHECK(w <= prev);  // heaviest first
        prev = w;
        prev_option = option;
        sums[option] += w;
        ++rows[option];
    }
    REQUIRE(sums.size() == 4);
    for (const auto& [o, s] : sums) CHECK(s == doctest::Approx(1.0).epsilon(1e-6));
    for (const auto& [o, n] : rows) CHECK(n > 1);
}

TEST_CASE("a corrupted index is a data error") {
    const Trained& t = trained();
    const auto idx = (t.dir / "corpus.idx").string();
    REQUIRE(sqa_run({"index", "--config", t.config, "--out", idx}).code == 0);
    const auto ok = sqa_run({"predict", "--config", t.config, "--checkpoint", t.ckpt, "--index", idx, "--split", "dev"});
    REQUIRE(ok.code == 0);
    const auto built = sqa_run({"predict", "--config", t.config, "--checkpoint", t.ckpt, "--split", "dev"});
    CHECK(ok.out == built.out);

    std::string bytes = slurp(idx);
    bytes[0] ^= 0x5a;
    write(idx, bytes);
    const auto bad = sqa_run({"predict", "--config", t.config, "--checkpoint", t.ckpt, "--index", idx});
    CHECK(bad.code == 2);
    CHECK(bad.err.find("data error") != std::string::npos);
}
