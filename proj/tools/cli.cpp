#include "cli.hpp"

#include "sqa/checkpoint.hpp"
#include "sqa/config.hpp"
#include "sqa/dataset.hpp"
#include "sqa/evaluation.hpp"
#include "sqa/index.hpp"
#include "sqa/model.hpp"
#include "sqa/synthetic.hpp"
#include "sqa/training.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <optional>
#include <sstream>
#include <thread>

namespace sqa::cli {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace {

constexpr const char* kModelFile = "model.ckpt";
constexpr const char* kVocabFile = "vocab.txt";
constexpr const char* kConfigFile = "config.toml";

struct Common {
    std::string config_path;
    std::vector<std::string> sets;
    std::optional<int> threads;
    std::map<std::string, std::string> flags;  // flag overrides as config keys
};

void add_common(CLI::App* cmd, Common& c) {
    cmd->add_option("--config", c.config_path, "TOML-style config file (flags override it)");
    cmd->add_option("--set", c.sets, "Override a config key: section.key=value (repeatable)");
    cmd->add_option("--threads", c.threads, "Worker threads (default: machine parallelism)")->check(CLI::PositiveNumber);
}

// Binds a flag to a config key; the value lands in c.flags when given.
void add_keyed(CLI::App* cmd, Common& c, const std::string& flag, const std::string& key, const std::string& help) {
    cmd->add_option_function<std::string>(flag, [&c, key](const std::string& v) { c.flags[key] = v; }, help);
}

RunConfig resolve(const Common& c) {
    RunConfig cfg = c.config_path.empty() ? RunConfig{} : load_config(c.config_path);
    for (const auto& s : c.sets) {
        const auto eq = s.find('=');
        if (eq == std::string::npos) throw ConfigError("--set expects section.key=value, got " + s);
        cfg.set(s.substr(0, eq), s.substr(eq + 1));
    }
    apply_overrides(cfg, c.flags);
    cfg.train.threads = c.threads ? *c.threads : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    return cfg;
}

void require_file(const std::string& path, const std::string& what) {
    if (path.empty()) throw ConfigError("missing " + what + " path");
    if (!fs::is_regular_file(path)) throw DataError(what + " not found: " + path);
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw std::runtime_error("cannot create directory " + dir.string() + ": " + ec.message());
}

fs::path snapshot_path(const fs::path& output) {
    return fs::path(output.string() + ".config.toml");
}

// Writes the resolved config next to an output file.
void write_snapshot(const fs::path& output, const RunConfig& cfg) {
    if (!output.empty()) write_text(snapshot_path(output), cfg.to_toml());
}

ordered_json tokenizer_json(const Tokenizer& t) {
    std::vector<std::string> stop(t.stopwords.begin(), t.stopwords.end());
    std::sort(stop.begin(), stop.end());
    return {{"mode", to_string(t.mode)}, {"lowercase", t.lowercase}, {"stopwords", stop}};
}

Tokenizer tokenizer_from_json(const nlohmann::json& j) {
    Tokenizer t;
    try {
        t.mode = parse_tokenizer_mode(j.at("mode").get<std::string>());
        t.lowercase = j.at("lowercase").get<bool>();
        for (const auto& w : j.at("stopwords")) t.stopwords.insert(w.get<std::string>());
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("checkpoint tokenizer: ") + e.what());
    }
    return t;
}

struct Corpus {
    std::vector<Paragraph> paragraphs;
    InvertedIndex index;
};

Corpus load_corpus_and_index(const std::string& corpus_path, const std::string& index_path, const Tokenizer& tokenizer,
                             const Bm25Params& bm25, std::ostream& err) {
    require_file(corpus_path, "corpus");
    Corpus c;
    CorpusLoad load = load_corpus(corpus_path, tokenizer);
    if (load.dropped > 0) err << "warning: dropped " << load.dropped << " empty paragraph(s)\n";
    c.paragraphs = std::move(load.paragraphs);
    if (index_path.empty()) {
        c.index = InvertedIndex::build(c.paragraphs, tokenizer, bm25);
    } else {
        require_file(index_path, "index");
        c.index = InvertedIndex::load(index_path);
    }
    return c;
}

struct LoadedModel {
    Model model;
    Tokenizer tokenizer;
    Bm25Params bm25;
    Mixture mixture;
};

LoadedModel load_model_dir(const std::string& dir) {
    const fs::path root(dir);
    require_file((root / kModelFile).string(), "checkpoint");
    require_file((root / kVocabFile).string(), "vocabulary");
    Checkpoint ck = load_checkpoint((root / kModelFile).string());
    LoadedModel lm{restore_model(ck, Vocabulary::load((root / kVocabFile).string())), {}, {}, {}};
    try {
        const auto& meta = ck.metadata;
        lm.tokenizer = tokenizer_from_json(meta.at("tokenizer"));
        lm.bm25 = {meta.at("bm25").at("k1").get<real>(), meta.at("bm25").at("b").get<real>()};
        const auto& mx = meta.at("mixture");
        lm.mixture = {mx.at("alpha").get<real>(), mx.at("beta").get<real>(), mx.at("gamma").get<real>()};
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("checkpoint metadata: ") + e.what());
    }
    return lm;
}

std::vector<const Question*> filter_questions(const std::vector<Question>& questions, const std::string& split,
                                              const std::string& question_id) {
    std::vector<const Question*> out;
    for (const auto& q : questions) {
        if (!question_id.empty() && q.id != question_id) continue;
        if (question_id.empty() && split != "all" && to_string(q.split) != split) continue;
        out.push_back(&q);
    }
    if (!question_id.empty() && out.empty()) throw DataError("unknown question id " + question_id);
    return out;
}

std::string fixed(real v, int digits = 4) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(digits) << v;
    return os.str();
}

// ---------------------------------------------------------------- synth

int cmd_synth(const Common& c, const std::string& out_dir, std::ostream& out) {
    RunConfig cfg = resolve(c);
    const Tokenizer tokenizer = cfg.make_tokenizer();
    SyntheticDataset ds = generate_synthetic(cfg.synth, tokenizer);
    const fs::path dir(out_dir);
    ensure_dir(dir);
    save_questions((dir / "questions.jsonl").string(), ds.questions);
    save_corpus((dir / "corpus.jsonl").string(), ds.corpus);
    save_qrels((dir / "qrels.jsonl").string(), ds.annotations);
    std::ostringstream signals;
    signals << "question_id\tsignal\n";
    for (const auto& [qid, word] : ds.signal_words) signals << qid << '\t' << word << '\n';
    write_text(dir / "signals.tsv", signals.str());
    cfg.corpus = (dir / "corpus.jsonl").string();
    cfg.questions = (dir / "questions.jsonl").string();
    cfg.qrels = (dir / "qrels.jsonl").string();
    write_text(dir / kConfigFile, cfg.to_toml());
    out << "questions: " << ds.questions.size() << "\nparagraphs: " << ds.corpus.size()
        << "\nflat BM25 top-1 miss rate: " << fixed(ds.bm25_miss_rate)
        << "\nflat BM25 within top " << ds.profile_depth << ": " << fixed(ds.bm25_within_depth) << '\n';
    return kOk;
}

// ---------------------------------------------------------------- index

int cmd_index(const Common& c, const std::string& output, std::ostream& out, std::ostream& err) {
    RunConfig cfg = resolve(c);
    const Tokenizer tokenizer = cfg.make_tokenizer();
    require_file(cfg.corpus, "corpus");
    CorpusLoad load = load_corpus(cfg.corpus, tokenizer);
    if (load.dropped > 0) err << "warning: dropped " << load.dropped << " empty paragraph(s)\n";
    const InvertedIndex index = InvertedIndex::build(load.paragraphs, tokenizer, cfg.bm25);
    if (output.empty()) throw ConfigError("missing --out");
    index.save(output);
    write_snapshot(output, cfg);
    out << "N: " << index.num_docs() << "\navgdl: " << fixed(index.stats().avgdl)
        << "\nvocabulary: " << index.vocabulary_size() << '\n';
    return kOk;
}

// ---------------------------------------------------------------- train

int cmd_train(const Common& c, const std::string& out_dir, const std::string& index_path, std::ostream& out,
              std::ostream& err) {
    RunConfig cfg = resolve(c);
    cfg.model.validate();
    cfg.train.validate();
    const Tokenizer tokenizer = cfg.make_tokenizer();
    require_file(cfg.questions, "questions");
    // Validate the questions before anything expensive.
    const std::vector<Question> questions = load_questions(cfg.questions);
    Corpus corpus = load_corpus_and_index(cfg.corpus, index_path, tokenizer, cfg.bm25, err);
    std::optional<Qrels> qrels;
    if (!cfg.qrels.empty()) {
        require_file(cfg.qrels, "qrels");
        qrels = load_qrels(cfg.qrels, corpus.paragraphs);
    }
    if (out_dir.empty()) throw ConfigError("missing --out");
    const fs::path dir(out_dir);
    ensure_dir(dir);
    write_text(dir / kConfigFile, cfg.to_toml());

    const KnowledgeBase kb(corpus.index, corpus.paragraphs);
    Model model = Model::create(cfg.model, Vocabulary::build(questions, corpus.paragraphs, tokenizer), cfg.train.seed);
    model.vocab.save((dir / kVocabFile).string());

    std::ofstream log_file(dir / "train_log.jsonl", std::ios::binary);
    if (!log_file) throw std::runtime_error("cannot write training log");
    TrainObserver observer;
    observer.on_epoch = [&](const EpochLog& log) {
        log_file << to_jsonl(log) << '\n';
        log_file.flush();
        err << "epoch " << log.epoch << ": train_loss " << fixed(log.train_loss) << ", dev_accuracy "
            << fixed(log.dev_accuracy);
        if (log.dev_map10) err << ", dev MAP@10 " << fixed(*log.dev_map10);
        err << '\n';
    };
    TrainResult result = train(model, questions, tokenizer, kb, cfg.train, qrels ? &*qrels : nullptr, observer);
    if (!result.skipped.empty()) err << "warning: skipped " << result.skipped.size() << " question(s)\n";

    Checkpoint ck = model_checkpoint(model);
    ck.metadata["tokenizer"] = tokenizer_json(tokenizer);
    ck.metadata["bm25"] = {{"k1", cfg.bm25.k1}, {"b", cfg.bm25.b}};
    const Mixture mx = cfg.has_mixture ? cfg.mixture : result.mixture;
    ck.metadata["mixture"] = {{"alpha", mx.alpha}, {"beta", mx.beta}, {"gamma", mx.gamma}};
    ck.metadata["best_epoch"] = result.best_epoch;
    ck.metadata["best_dev_accuracy"] = result.best_dev_accuracy;
    ck.metadata["config"] = cfg.to_toml();
    ck.metadata["optimizer_step"] = result.optimizer.step;
    for (std::size_t s = 0; s < model.params.size(); ++s) {
        const std::string& name = model.params[static_cast<int>(s)].name;
        ck.tensors.push_back({"adam.m/" + name, result.optimizer.first[s]});
        ck.tensors.push_back({"adam.v/" + name, result.optimizer.second[s]});
    }
    save_checkpoint((dir / kModelFile).string(), ck);
    out << "best epoch: " << result.best_epoch << "\ndev accuracy: " << fixed(result.best_dev_accuracy)
        << "\nmixture: alpha " << fixed(mx.alpha, 2) << " beta " << fixed(mx.beta, 2) << " gamma " << fixed(mx.gamma, 2)
        << '\n';
    return kOk;
}

// ---------------------------------------------------------------- predict

struct PredictArgs {
    std::string checkpoint, index, output, trace, run, split = "all", question_id;
};

ordered_json trace_json(const PreparedQuestion& pq, const ForwardResult& r,
                        const InvertedIndex& index) {
    ordered_json q;
    q["question_id"] = pq.question->id;
    q["options"] = ordered_json::array();
    auto ids = [&](const std::vector<DocId>& docs) {
        std::vector<std::string> out;
        for (DocId d : docs) out.push_back(index.paragraph_id(d));
        return out;
    };
    auto vec = [](const Vector& v) { return std::vector<real>(v.data(), v.data() + v.size()); };
    for (std::size_t i = 0; i < r.options.size(); ++i) {
        const OptionTrace& t = r.options[i];
        ordered_json o;
        o["option"] = i;
        o["words"] = pq.options[i].enriched.unique_words;
        o["weights"] = vec(t.weights);
        o["P_top"] = ids(t.top);
        o["z_spa"] = vec(t.sparse_top);
        o["z_den"] = vec(t.dense);
        o["P_fus"] = ids(t.fused);
        o["pool_weights"] = vec(t.pool_weights);
        o["s_spa"] = t.s_spa;
        o["s_den"] = t.s_den;
        o["s_fus"] = t.s_fus;
        q["options"].push_back(std::move(o));
    }
    return q;
}

int cmd_predict(const Common& c, const PredictArgs& a, std::ostream& out, std::ostream& err) {
    RunConfig cfg = resolve(c);
    LoadedModel lm = load_model_dir(a.checkpoint);
    require_file(cfg.questions, "questions");
    const std::vector<Question> questions = load_questions(cfg.questions);
    Corpus corpus = load_corpus_and_index(cfg.corpus, a.index, lm.tokenizer, lm.bm25, err);
    const KnowledgeBase kb(corpus.index, corpus.paragraphs);
    const Mixture mx = cfg.has_mixture ? cfg.mixture : lm.mixture;
    const auto selected = filter_questions(questions, a.split, a.question_id);
    PreparedSet set = prepare_all(selected, lm.tokenizer, lm.model, corpus.index);
    for (const auto& id : set.skipped) err << "warning: skipped question " << id << '\n';

    std::ofstream pred_file;
    std::ostream* pred = &out;
    if (!a.output.empty()) {
        pred_file.open(a.output, std::ios::binary);
        if (!pred_file) throw std::runtime_error("cannot write " + a.output);
        pred = &pred_file;
        write_snapshot(a.output, cfg);
    }
    std::ofstream trace_file, run_file;
    if (!a.trace.empty()) {
        trace_file.open(a.trace, std::ios::binary);
        if (!trace_file) throw std::runtime_error("cannot write " + a.trace);
    }
    if (!a.run.empty()) {
        run_file.open(a.run, std::ios::binary);
        if (!run_file) throw std::runtime_error("cannot write " + a.run);
    }
    // One tape per question, dropped once its lines are written.
    for (std::size_t i = 0; i < set.questions.size(); ++i) {
        Tape tape;
        const ForwardResult r = forward(tape, lm.model, set.questions[i], kb, nullptr, false);
        const ScoreTriple triple{r.s_spa.value().row(0), r.s_den.value().row(0), r.s_fus.value().row(0)};
        auto row = [](const RowVector& v) { return std::vector<real>(v.data(), v.data() + v.size()); };
        ordered_json j;
        j["question_id"] = set.questions[i].question->id;
        j["predicted"] = predict(triple, mx);
        j["s_spa"] = row(triple.spa);
        j["s_den"] = row(triple.den);
        j["s_fus"] = row(triple.fus);
        *pred << j.dump() << '\n';
        if (trace_file.is_open()) trace_file << trace_json(set.questions[i], r, corpus.index).dump() << '\n';
        if (run_file.is_open()) {
            std::vector<std::vector<ScoredParagraph>> lists;
            for (const auto& o : r.options) {
                std::vector<ScoredParagraph> top;
                for (std::size_t l = 0; l < o.top.size(); ++l) top.push_back({o.top[l], o.sparse_top(static_cast<Eigen::Index>(l))});
                lists.push_back(std::move(top));
            }
            const RankedList list = pool_option_lists(set.questions[i].question->id, lists, corpus.index);
            ordered_json rj;
            rj["question_id"] = list.question_id;
            rj["ranked"] = ordered_json::array();
            for (const auto& p : list.ranked) rj["ranked"].push_back({{"paragraph_id", p.paragraph_id}, {"score", p.score}});
            run_file << rj.dump() << '\n';
        }
    }
    if (pred_file.is_open() && !pred_file) throw std::runtime_error("write failed: " + a.output);
    return kOk;
}

// ---------------------------------------------------------------- evaluate

struct EvalArgs {
    std::string predictions, run, baseline, split = "all", output;
    std::size_t k = 10;
};

void emit_json(const ordered_json& j, const std::string& output, std::ostream& out) {
    if (output.empty()) {
        out << j.dump() << '\n';
    } else {
        write_text(output, j.dump(2) + "\n");
    }
}

int cmd_evaluate_qa(const Common& c, const EvalArgs& a, std::ostream& out) {
    RunConfig cfg = resolve(c);
    const Tokenizer tokenizer = cfg.make_tokenizer();
    require_file(cfg.questions, "questions");
    const std::vector<Question> questions = load_questions(cfg.questions);
    const auto selected = filter_questions(questions, a.split, "");

    std::map<std::string, int> predicted;
    if (a.baseline == "ir-solver") {
        require_file(cfg.corpus, "corpus");
        CorpusLoad load = load_corpus(cfg.corpus, tokenizer);
        const InvertedIndex index = InvertedIndex::build(load.paragraphs, tokenizer, cfg.bm25);
        for (const Question* q : selected) predicted[q->id] = baseline_ir_solver(index, *q);
    } else if (a.baseline.empty()) {
        require_file(a.predictions, "predictions");
        std::ifstream in(a.predictions);
        std::string line;
        for (int n = 1; std::getline(in, line); ++n) {
            if (line.empty()) continue;
            try {
                const auto j = nlohmann::json::parse(line);
                predicted[j.at("question_id").get<std::string>()] = j.at("predicted").get<int>();
            } catch (const nlohmann::json::exception& e) {
                throw DataError(a.predictions + ":" + std::to_string(n) + ": " + e.what());
            }
        }
    } else {
        throw ConfigError("evaluate qa supports --baseline ir-solver only");
    }

    std::vector<int> pred, gold;
    std::size_t skipped = 0;
    for (const Question* q : selected) {
        auto it = predicted.find(q->id);
        if (it == predicted.end()) {
            ++skipped;
            continue;
        }
        pred.push_back(it->second);
        gold.push_back(q->answer);
    }
    const real acc = accuracy(pred, gold);
    out << "metric    value\naccuracy  " << fixed(acc) << "\nn         " << gold.size() << "\nskipped   " << skipped
        << '\n';
    ordered_json j;
    j["accuracy"] = acc;
    j["n"] = gold.size();
    j["skipped"] = skipped;
    emit_json(j, a.output, out);
    return kOk;
}

RetrievalRun read_run(const std::string& path) {
    require_file(path, "run");
    std::ifstream in(path);
    RetrievalRun run;
    std::string line;
    for (int n = 1; std::getline(in, line); ++n) {
        if (line.empty()) continue;
        try {
            const auto j = nlohmann::json::parse(line);
            RankedList list{j.at("question_id").get<std::string>(), {}};
            for (const auto& r : j.at("ranked"))
                list.ranked.push_back({r.at("paragraph_id").get<std::string>(), r.at("score").get<real>()});
            run.push_back(std::move(list));
        } catch (const nlohmann::json::exception& e) {
            throw DataError(path + ":" + std::to_string(n) + ": " + e.what());
        }
    }
    return run;
}

int cmd_evaluate_retrieval(const Common& c, const EvalArgs& a, std::ostream& out) {
    RunConfig cfg = resolve(c);
    const Tokenizer tokenizer = cfg.make_tokenizer();
    require_file(cfg.corpus, "corpus");
    require_file(cfg.qrels, "qrels");
    CorpusLoad load = load_corpus(cfg.corpus, tokenizer);
    const Qrels qrels = load_qrels(cfg.qrels, load.paragraphs);

    RetrievalRun run;
    if (a.baseline == "bm25") {
        require_file(cfg.questions, "questions");
        const std::vector<Question> questions = load_questions(cfg.questions);
        const InvertedIndex index = InvertedIndex::build(load.paragraphs, tokenizer, cfg.bm25);
        run = baseline_bm25_run(index, filter_questions(questions, a.split, ""), a.k);
    } else if (a.baseline.empty()) {
        run = read_run(a.run);
    } else {
        throw ConfigError("evaluate retrieval supports --baseline bm25 only");
    }

    const RetrievalMetrics m = retrieval_metrics(run, qrels);
    ordered_json j;
    out << "K    MAP      NDCG     HitRate\n";
    for (int k : {2, 10}) {
        out << std::left << std::setw(5) << k << fixed(m.map.at(k)) << "   " << fixed(m.ndcg.at(k)) << "   "
            << fixed(m.hit_rate.at(k)) << '\n';
        j["MAP@" + std::to_string(k)] = m.map.at(k);
        j["NDCG@" + std::to_string(k)] = m.ndcg.at(k);
        j["HitRate@" + std::to_string(k)] = m.hit_rate.at(k);
    }
    j["evaluated"] = m.evaluated;
    j["without_relevant"] = m.without_relevant;
    out << "evaluated " << m.evaluated << ", without relevant " << m.without_relevant << '\n';
    emit_json(j, a.output, out);
    return kOk;
}

// ---------------------------------------------------------------- weights

int cmd_weights_inspect(const Common& c, const std::string& checkpoint, const std::string& question_id,
                        const std::string& split, const std::string& index_path, std::ostream& out,
                        std::ostream& err) {
    RunConfig cfg = resolve(c);
    LoadedModel lm = load_model_dir(checkpoint);
    require_file(cfg.questions, "questions");
    const std::vector<Question> questions = load_questions(cfg.questions);
    Corpus corpus = load_corpus_and_index(cfg.corpus, index_path, lm.tokenizer, lm.bm25, err);
    const KnowledgeBase kb(corpus.index, corpus.paragraphs);
    const auto selected = filter_questions(questions, split, question_id);
    out << "question_id\toption\tword\tweight\n";
    for (const Question* q : selected) {
        const PreparedQuestion pq = prepare_question(*q, lm.tokenizer, lm.model, corpus.index);
        Tape tape;
        const ForwardResult r = forward(tape, lm.model, pq, kb, nullptr, false);
        for (std::size_t i = 0; i < r.options.size(); ++i) {
            const auto& words = pq.options[i].enriched.unique_words;
            const Vector& w = r.options[i].weights;
            std::vector<int> order(words.size());
            std::iota(order.begin(), order.end(), 0);
            std::stable_sort(order.begin(), order.end(), [&](int x, int y) { return w(x) > w(y); });
            for (int j : order)
                out << q->id << '\t' << i << '\t' << words[static_cast<std::size_t>(j)] << '\t'
                    << std::setprecision(17) << w(j) << '\n';
        }
    }
    return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Scenario-based question answering with a jointly trained sparse retriever and dense reader", "sqa"};
    app.require_subcommand(1);
    Common common;

    std::string out_dir, out_file, index_path;
    auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset");
    add_common(synth, common);
    synth->add_option("--out", out_dir, "Output directory")->required();
    add_keyed(synth, common, "--num-questions", "synth.num_questions", "Number of questions");
    add_keyed(synth, common, "--num-paragraphs", "synth.num_paragraphs", "Corpus size");
    add_keyed(synth, common, "--vocab-size", "synth.vocab_size", "Generated vocabulary size");
    add_keyed(synth, common, "--noise-words", "synth.num_noise_words_per_scenario", "Noise words per scenario");
    add_keyed(synth, common, "--seed", "synth.seed", "Generator seed");

    auto* index = app.add_subcommand("index", "Build and save the inverted index");
    add_common(index, common);
    add_keyed(index, common, "--corpus", "data.corpus", "Corpus JSONL");
    index->add_option("--out", out_file, "Index file")->required();

    auto* trn = app.add_subcommand("train", "Jointly train retriever and reader");
    add_common(trn, common);
    add_keyed(trn, common, "--corpus", "data.corpus", "Corpus JSONL");
    add_keyed(trn, common, "--questions", "data.questions", "Questions JSONL");
    add_keyed(trn, common, "--qrels", "data.qrels", "Relevance annotations (dev MAP@10 in the log only)");
    add_keyed(trn, common, "--seed", "train.seed", "Random seed");
    add_keyed(trn, common, "--epochs", "train.epochs", "Epochs");
    add_keyed(trn, common, "--batch-size", "train.batch_size", "Questions per step");
    add_keyed(trn, common, "--lr", "train.learning_rate", "Peak learning rate");
    add_keyed(trn, common, "--refresh-interval", "train.refresh_interval", "Steps between retrieval refreshes");
    add_keyed(trn, common, "--uniform-weights", "model.uniform_weights", "true: freeze word weights at 1/n");
    trn->add_option("--index", index_path, "Prebuilt index (default: build from the corpus)");
    trn->add_option("--out", out_dir, "Checkpoint directory")->required();

    PredictArgs pa;
    auto* pred = app.add_subcommand("predict", "Score and answer questions");
    add_common(pred, common);
    add_keyed(pred, common, "--corpus", "data.corpus", "Corpus JSONL");
    add_keyed(pred, common, "--questions", "data.questions", "Questions JSONL");
    pred->add_option("--checkpoint", pa.checkpoint, "Checkpoint directory")->required();
    pred->add_option("--index", pa.index, "Prebuilt index");
    pred->add_option("--out", pa.output, "Predictions JSONL (default: stdout)");
    pred->add_option("--trace", pa.trace, "Per-question trace JSONL");
    pred->add_option("--run", pa.run, "Pooled retrieval run JSONL");
    pred->add_option("--split", pa.split, "train, dev, test or all")->check(CLI::IsMember({"train", "dev", "test", "all"}));
    pred->add_option("--question-id", pa.question_id, "Answer a single question");

    EvalArgs ea;
    auto* eval = app.add_subcommand("evaluate", "Score predictions or retrieval runs");
    eval->require_subcommand(1);
    auto* eval_qa = eval->add_subcommand("qa", "QA accuracy");
    add_common(eval_qa, common);
    add_keyed(eval_qa, common, "--questions", "data.questions", "Questions JSONL (gold answers)");
    add_keyed(eval_qa, common, "--corpus", "data.corpus", "Corpus JSONL (baselines)");
    eval_qa->add_option("--predictions", ea.predictions, "Predictions JSONL");
    eval_qa->add_option("--baseline", ea.baseline, "ir-solver")->check(CLI::IsMember({"ir-solver"}));
    eval_qa->add_option("--split", ea.split, "train, dev, test or all")->check(CLI::IsMember({"train", "dev", "test", "all"}));
    eval_qa->add_option("--out", ea.output, "JSON report file (default: stdout)");
    auto* eval_ret = eval->add_subcommand("retrieval", "MAP, NDCG and HitRate at 2 and 10");
    add_common(eval_ret, common);
    add_keyed(eval_ret, common, "--questions", "data.questions", "Questions JSONL (baselines)");
    add_keyed(eval_ret, common, "--corpus", "data.corpus", "Corpus JSONL");
    add_keyed(eval_ret, common, "--qrels", "data.qrels", "Relevance annotations");
    eval_ret->add_option("--run", ea.run, "Retrieval run JSONL");
    eval_ret->add_option("--baseline", ea.baseline, "bm25")->check(CLI::IsMember({"bm25"}));
    eval_ret->add_option("--k", ea.k, "Per-option depth of the baseline run")->check(CLI::PositiveNumber);
    eval_ret->add_option("--split", ea.split, "train, dev, test or all")->check(CLI::IsMember({"train", "dev", "test", "all"}));
    eval_ret->add_option("--out", ea.output, "JSON report file (default: stdout)");

    std::string question_id, checkpoint, inspect_split = "all";
    auto* weights = app.add_subcommand("weights", "Inspect learned word weights");
    weights->require_subcommand(1);
    auto* inspect = weights->add_subcommand("inspect", "TSV of word weights per option, heaviest first");
    add_common(inspect, common);
    add_keyed(inspect, common, "--corpus", "data.corpus", "Corpus JSONL");
    add_keyed(inspect, common, "--questions", "data.questions", "Questions JSONL");
    inspect->add_option("--checkpoint", checkpoint, "Checkpoint directory")->required();
    inspect->add_option("--question-id", question_id, "Question to inspect (default: every question of --split)");
    inspect->add_option("--split", inspect_split, "train, dev, test or all")
        ->check(CLI::IsMember({"train", "dev", "test", "all"}));
    inspect->add_option("--index", index_path, "Prebuilt index");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        return kUsage;
    }

    try {
        if (synth->parsed()) return cmd_synth(common, out_dir, out);
        if (index->parsed()) return cmd_index(common, out_file, out, err);
        if (trn->parsed()) return cmd_train(common, out_dir, index_path, out, err);
        if (pred->parsed()) return cmd_predict(common, pa, out, err);
        if (eval_qa->parsed()) return cmd_evaluate_qa(common, ea, out);
        if (eval_ret->parsed()) return cmd_evaluate_retrieval(common, ea, out);
        if (inspect->parsed()) return cmd_weights_inspect(common, checkpoint, question_id, inspect_split, index_path, out, err);
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const std::invalid_argument& e) {
        err << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const DataError& e) {
        err << "data error: " << e.what() << '\n';
        return kDataError;
    } catch (const FormatError& e) {
        err << "data error: " << e.what() << '\n';
        return kDataError;
    } catch (const std::exception& e) {
        err << "runtime error: " << e.what() << '\n';
        return kRuntimeError;
    }
    err << "error: no command\n";
    return kUsage;
}

}  // namespace sqa::cli
