#include "sqa/training.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <thread>

namespace sqa {

namespace {

// Runs fn(i) for i in [0, n) on up to `threads` workers. Each i writes only
// to its own output slot, so results do not depend on the thread count.
template <typename Fn>
void parallel_for(std::size_t n, int threads, Fn fn) {
    const auto workers = static_cast<std::size_t>(std::max(1, threads));
    if (workers == 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::exception_ptr> errors(n);
    std::vector<std::thread> pool;
    const std::size_t used = std::min(workers, n);
    for (std::size_t t = 0; t < used; ++t)
        pool.emplace_back([&, t] {
            for (std::size_t i = t; i < n; i += used) {
                try {
                    fn(i);
                } catch (...) {
                    errors[i] = std::current_exception();
                }
            }
        });
    for (auto& th : pool) th.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

Var select_loss(const ForwardResult& r, LossPart part) {
    switch (part) {
        case LossPart::Retriever: return r.retriever_loss;
        case LossPart::Reader: return r.reader_loss;
        case LossPart::Joint: break;
    }
    return r.loss;
}

struct StepOutput {
    JointLoss loss;
    Gradients grads;
    Tape::SparseRows embedding_rows;  // token-embedding gradient, by row
    RetrievalCache retrieval;
};

StepOutput question_step(const Model& model, const PreparedQuestion& question, const KnowledgeBase& kb,
                         const RetrievalCache* cache) {
    StepOutput out;
    const int table = model.encoder.token_embedding;
    out.grads = model.params.zero_gradients(table);
    Tape tape;
    ForwardResult r = forward(tape, model, question, kb, cache, true);
    out.loss = {r.loss.scalar(), r.retriever_loss.scalar(), r.reader_loss.scalar()};
    if (!std::isfinite(out.loss.loss))
        throw NumericError("non-finite loss on question \"" + question.question->id + "\"");
    tape.backward(r.loss, out.grads);
    out.embedding_rows = std::move(tape.sparse_rows(table));
    out.retrieval = retrieval_of(r);
    return out;
}

real loss_value(const Model& model, const PreparedQuestion& question, const KnowledgeBase& kb,
                const RetrievalCache& cache, LossPart part) {
    Tape tape;
    return select_loss(forward(tape, model, question, kb, &cache, true), part).scalar();
}

}  // namespace

void HyperParams::validate() const {
    if (epochs < 0) throw std::invalid_argument("epochs must be non-negative");
    if (batch_size < 1) throw std::invalid_argument("batch_size must be at least 1");
    if (!(learning_rate > 0)) throw std::invalid_argument("learning_rate must be positive");
    if (warmup_fraction < 0 || warmup_fraction > 1) throw std::invalid_argument("warmup_fraction must lie in [0, 1]");
    if (!(clip_norm > 0)) throw std::invalid_argument("clip_norm must be positive");
    if (refresh_interval < 1) throw std::invalid_argument("refresh_interval must be at least 1");
    if (threads < 1) throw std::invalid_argument("threads must be at least 1");
}

real scheduled_learning_rate(long step, long total_steps, real base, real warmup_fraction) {
    if (total_steps <= 0) return base;
    const real warmup = warmup_fraction * static_cast<real>(total_steps);
    const real t = static_cast<real>(step) + 1;
    if (t <= warmup) return base * t / warmup;
    const real remaining = static_cast<real>(total_steps) - warmup;
    if (remaining <= 0) return base;
    return base * std::max<real>(0, (static_cast<real>(total_steps) - static_cast<real>(step)) / remaining);
}

Adam::Adam(const ParamStore& params) {
    state_.first = params.zero_gradients();
    state_.second = params.zero_gradients();
}

void Adam::step(ParamStore& params, const Gradients& grads, real learning_rate) {
    ++state_.step;
    const real c1 = 1 - std::pow(kBeta1, static_cast<real>(state_.step));
    const real c2 = 1 - std::pow(kBeta2, static_cast<real>(state_.step));
    for (std::size_t s = 0; s < params.size(); ++s) {
        Matrix& m = state_.first[s];
        Matrix& v = state_.second[s];
        const Matrix& g = grads[s];
        m = kBeta1 * m + (1 - kBeta1) * g;
        v = kBeta2 * v + (1 - kBeta2) * g.cwiseProduct(g);
        params[static_cast<int>(s)].value.array() -=
            learning_rate * (m.array() / c1) / ((v.array() / c2).sqrt() + kEpsilon);
    }
}

real clip_global_norm(Gradients& grads, real max_norm) {
    real sq = 0;
    for (const auto& g : grads) sq += g.squaredNorm();
    const real norm = std::sqrt(sq);
    if (norm > max_norm) {
        const real scale = max_norm / norm;
        for (auto& g : grads) g *= scale;
    }
    return norm;
}

JointLoss joint_loss(const Model& model, const PreparedQuestion& question, const KnowledgeBase& kb, Gradients* grads,
                     const RetrievalCache* cache) {
    Tape tape;
    ForwardResult r = forward(tape, model, question, kb, cache, true);
    if (grads) tape.backward(r.loss, *grads);
    return {r.loss.scalar(), r.retriever_loss.scalar(), r.reader_loss.scalar()};
}

QuestionScores score_question(const Model& model, const PreparedQuestion& question, const KnowledgeBase& kb) {
    Tape tape;
    ForwardResult r = forward(tape, model, question, kb, nullptr, false);
    QuestionScores qs;
    qs.scores = {r.s_spa.value().row(0), r.s_den.value().row(0), r.s_fus.value().row(0)};
    for (const auto& o : r.options) {
        std::vector<ScoredParagraph> top;
        for (std::size_t l = 0; l < o.top.size(); ++l) top.push_back({o.top[l], o.sparse_top(static_cast<Eigen::Index>(l))});
        qs.top.push_back(std::move(top));
    }
    return qs;
}

PreparedSet prepare_all(std::span<const Question* const> questions, const Tokenizer& tokenizer, const Model& model,
                        const InvertedIndex& index) {
    PreparedSet set;
    for (const Question* q : questions) {
        try {
            set.questions.push_back(prepare_question(*q, tokenizer, model, index));
        } catch (const DataError&) {
            set.skipped.push_back(q->id);
        }
    }
    return set;
}

std::vector<QuestionScores> score_all(const Model& model, const std::vector<PreparedQuestion>& questions,
                                      const KnowledgeBase& kb, int threads) {
    std::vector<QuestionScores> out(questions.size());
    parallel_for(questions.size(), threads, [&](std::size_t i) { out[i] = score_question(model, questions[i], kb); });
    return out;
}

std::string to_jsonl(const EpochLog& log) {
    nlohmann::ordered_json j;
    j["epoch"] = log.epoch;
    j["train_loss"] = log.train_loss;
    j["dev_accuracy"] = log.dev_accuracy;
    if (log.dev_map10) j["dev_MAP@10"] = *log.dev_map10;
    j["alpha"] = log.mixture.alpha;
    j["beta"] = log.mixture.beta;
    j["gamma"] = log.mixture.gamma;
    return j.dump();
}

TrainResult train(Model& model, const std::vector<Question>& questions, const Tokenizer& tokenizer,
                  const KnowledgeBase& kb, const HyperParams& hyper, const Qrels* dev_qrels,
                  const TrainObserver& observer) {
    hyper.validate();
    const auto train_split = select_split(questions, Split::Train);
    const auto dev_split = select_split(questions, Split::Dev);
    PreparedSet train_set = prepare_all(train_split, tokenizer, model, kb.index());
    PreparedSet dev_set = prepare_all(dev_split, tokenizer, model, kb.index());
    if (train_set.questions.empty()) throw DataError("no usable training questions");

    TrainResult result;
    result.skipped = train_set.skipped;
    result.skipped.insert(result.skipped.end(), dev_set.skipped.begin(), dev_set.skipped.end());

    const std::size_t n = train_set.questions.size();
    const auto batch = static_cast<std::size_t>(hyper.batch_size);
    const long steps_per_epoch = static_cast<long>((n + batch - 1) / batch);
    const long total_steps = steps_per_epoch * hyper.epochs;

    Adam adam(model.params);
    Rng rng(hyper.seed);
    std::vector<std::optional<RetrievalCache>> caches(n);
    long step = 0;

    auto evaluate_dev = [&](EpochLog& log) {
        if (dev_set.questions.empty()) return;
        const auto scored = score_all(model, dev_set.questions, kb, hyper.threads);
        std::vector<ScoreTriple> triples;
        std::vector<int> gold, predicted;
        for (std::size_t i = 0; i < scored.size(); ++i) {
            triples.push_back(scored[i].scores);
            gold.push_back(dev_set.questions[i].question->answer);
        }
        log.mixture = tune_mixture(triples, gold);
        for (const auto& t : triples) predicted.push_back(predict(t, log.mixture));
        log.dev_accuracy = accuracy(predicted, gold);
        if (dev_qrels) {
            RetrievalRun run;
            for (std::size_t i = 0; i < scored.size(); ++i)
                run.push_back(pool_option_lists(dev_set.questions[i].question->id, scored[i].top, kb.index()));
            log.dev_map10 = retrieval_metrics(run, *dev_qrels, {10}).map.at(10);
        }
    };

    for (int epoch = 1; epoch <= hyper.epochs; ++epoch) {
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), 0);
        std::shuffle(order.begin(), order.end(), rng);
        real epoch_loss = 0;

        for (std::size_t start = 0; start < n; start += batch) {
            if (hyper.refresh_interval > 1 && step % hyper.refresh_interval == 0)
                for (auto& c : caches) c.reset();
            std::vector<std::size_t> members(order.begin() + static_cast<std::ptrdiff_t>(start),
                                             order.begin() + static_cast<std::ptrdiff_t>(std::min(n, start + batch)));
            // Reduction in question-id order keeps the sum independent of
            // both the shuffle and the thread count.
            std::sort(members.begin(), members.end(), [&](std::size_t a, std::size_t b) {
                return train_set.questions[a].question->id < train_set.questions[b].question->id;
            });
            std::vector<StepOutput> outputs(members.size());
            parallel_for(members.size(), hyper.threads, [&](std::size_t j) {
                const std::size_t q = members[j];
                const RetrievalCache* cache = caches[q] ? &*caches[q] : nullptr;
                outputs[j] = question_step(model, train_set.questions[q], kb, cache);
            });

            Gradients total = model.params.zero_gradients();
            for (std::size_t j = 0; j < members.size(); ++j) {
                epoch_loss += outputs[j].loss.loss;
                const auto table = static_cast<std::size_t>(model.encoder.token_embedding);
                for (std::size_t s = 0; s < total.size(); ++s)
                    if (s != table) total[s] += outputs[j].grads[s];
                for (const auto& [row, g] : outputs[j].embedding_rows) total[table].row(row) += g;
                if (hyper.refresh_interval > 1 && !caches[members[j]])
                    caches[members[j]] = std::move(outputs[j].retrieval);
            }
            clip_global_norm(total, hyper.clip_norm);
            adam.step(model.params, total, scheduled_learning_rate(step, total_steps, hyper.learning_rate,
                                                                    hyper.warmup_fraction));
            if (!model.params.all_finite())
                throw NumericError("non-finite parameters after step " + std::to_string(step));
            ++step;
            if (observer.on_step) observer.on_step(step);
        }

        EpochLog log;
        log.epoch = epoch;
        log.train_loss = epoch_loss / static_cast<real>(n);
        evaluate_dev(log);
        result.log.push_back(log);
        if (log.dev_accuracy > result.best_dev_accuracy) {
            result.best_dev_accuracy = log.dev_accuracy;
            result.best_epoch = epoch;
            result.best_params = model.params;
            result.mixture = log.mixture;
        }
        if (observer.on_epoch) observer.on_epoch(log);
    }
    if (hyper.epochs == 0) {
        result.best_params = model.params;
        EpochLog log;
        evaluate_dev(log);
        result.mixture = log.mixture;
        result.best_dev_accuracy = log.dev_accuracy;
    }
    result.optimizer = adam.state();
    model.params = result.best_params;
    return result;
}

namespace {
// Below this norm a tensor's gradient counts as zero: the stencil's rounding
// noise alone reaches ~1e-10 at h = 1e-5.
constexpr real kGradFloor = 1e-8;
}  // namespace

GradCheckReport grad_check(Model& model, const PreparedQuestion& question, const KnowledgeBase& kb, LossPart part,
                           real h) {
    Gradients analytic = model.params.zero_gradients();
    RetrievalCache cache;
    {
        Tape tape;
        ForwardResult r = forward(tape, model, question, kb, nullptr, true);
        cache = retrieval_of(r);
    }
    {
        Tape tape;
        ForwardResult r = forward(tape, model, question, kb, &cache, true);
        tape.backward(select_loss(r, part), analytic);
    }

    GradCheckReport report;
    for (std::size_t s = 0; s < model.params.size(); ++s) {
        Matrix& value = model.params[static_cast<int>(s)].value;
        Matrix numeric(value.rows(), value.cols());
        for (Eigen::Index i = 0; i < value.size(); ++i) {
            real& x = value.data()[i];
            const real orig = x;
            auto at = [&](real offset) {
                x = orig + offset;
                return loss_value(model, question, kb, cache, part);
            };
            const real f2p = at(2 * h), f1p = at(h), f1m = at(-h), f2m = at(-2 * h);
            x = orig;
            numeric.data()[i] = (-f2p + 8 * f1p - 8 * f1m + f2m) / (12 * h);
        }
        const real na = analytic[s].norm(), nn = numeric.norm();
        const real denom = std::max(na, nn);
        const real rel = denom < kGradFloor ? 0 : (analytic[s] - numeric).norm() / denom;
        report.tensors.push_back({model.params[static_cast<int>(s)].name, rel, na, nn});
        if (rel > report.max_relative_error || report.worst.empty()) {
            if (rel >= report.max_relative_error) {
                report.max_relative_error = rel;
                report.worst = model.params[static_cast<int>(s)].name;
            }
        }
    }
    return report;
}

}  // namespace sqa
