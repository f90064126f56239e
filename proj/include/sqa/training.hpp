#pragma once

#include "sqa/evaluation.hpp"
#include "sqa/model.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace sqa {

struct HyperParams {
    int epochs = 6;
    int batch_size = 16;
    real learning_rate = 1e-3;
    real warmup_fraction = 0.1;
    real clip_norm = 1.0;
    int refresh_interval = 1;
    std::uint64_t seed = 13;
    int threads = 1;

    void validate() const;  // throws std::invalid_argument
};

/// Linear warm-up to the base rate over the first `warmup_fraction` of the
/// steps, then linear decay to zero. `step` counts from 0.
real scheduled_learning_rate(long step, long total_steps, real base, real warmup_fraction);

struct AdamState {
    std::vector<Matrix> first, second;
    long step = 0;
};

class Adam {
public:
    static constexpr real kBeta1 = 0.9;
    static constexpr real kBeta2 = 0.999;
    static constexpr real kEpsilon = 1e-8;

    explicit Adam(const ParamStore& params);

    void step(ParamStore& params, const Gradients& grads, real learning_rate);

    AdamState& state() { return state_; }
    const AdamState& state() const { return state_; }

private:
    AdamState state_;
};

/// Scales the gradients down so their global L2 norm is at most max_norm;
/// returns the norm before clipping.
real clip_global_norm(Gradients& grads, real max_norm);

struct JointLoss {
    real loss = 0;
    real retriever = 0;
    real reader = 0;
};

/// Loss of one question; gradients are added into `grads` when given.
JointLoss joint_loss(const Model& model, const PreparedQuestion& question, const KnowledgeBase& kb,
                     Gradients* grads = nullptr, const RetrievalCache* cache = nullptr);

/// Raw option scores of one question and the retrieval trace behind them.
struct QuestionScores {
    ScoreTriple scores;
    std::vector<std::vector<ScoredParagraph>> top;  // P^top with z^spa, per option
};

QuestionScores score_question(const Model& model, const PreparedQuestion& question, const KnowledgeBase& kb);

/// Questions that survived preparation plus the ids of the skipped ones.
struct PreparedSet {
    std::vector<PreparedQuestion> questions;
    std::vector<std::string> skipped;
};

PreparedSet prepare_all(std::span<const Question* const> questions, const Tokenizer& tokenizer, const Model& model,
                        const InvertedIndex& index);

/// Scores every question, `threads` at a time, in input order.
std::vector<QuestionScores> score_all(const Model& model, const std::vector<PreparedQuestion>& questions,
                                      const KnowledgeBase& kb, int threads);

struct EpochLog {
    int epoch = 0;
    real train_loss = 0;
    real dev_accuracy = 0;
    std::optional<real> dev_map10;
    Mixture mixture;
};

std::string to_jsonl(const EpochLog& log);

struct TrainObserver {
    std::function<void(const EpochLog&)> on_epoch;
    /// Called after every optimizer step.
    std::function<void(long step)> on_step;
};

struct TrainResult {
    ParamStore best_params;
    Mixture mixture;
    int best_epoch = 0;
    real best_dev_accuracy = -1;
    std::vector<EpochLog> log;
    std::vector<std::string> skipped;
    AdamState optimizer;
};

/// Joint training on the train split; dev accuracy (with a freshly tuned
/// mixture) after every epoch, keeping the best parameters. Relevance
/// annotations, when given, feed only the dev MAP@10 column of the log.
TrainResult train(Model& model, const std::vector<Question>& questions, const Tokenizer& tokenizer,
                  const KnowledgeBase& kb, const HyperParams& hyper, const Qrels* dev_qrels = nullptr,
                  const TrainObserver& observer = {});

enum class LossPart { Retriever, Reader, Joint };

struct TensorCheck {
    std::string name;
    real relative_error = 0;
    real analytic_norm = 0;
    real numeric_norm = 0;
};

struct GradCheckReport {
    std::vector<TensorCheck> tensors;
    real max_relative_error = 0;
    std::string worst;
};

/// Central finite differences (4-point stencil) against backprop for every
/// parameter tensor, with retrieval pinned to the unperturbed candidates.
/// Relative error per tensor is |ga - gn| / max(|ga|, |gn|), zero when both
/// norms fall below 1e-8 (finite-difference rounding noise).
GradCheckReport grad_check(Model& model, const PreparedQuestion& question, const KnowledgeBase& kb,
                           LossPart part = LossPart::Joint, real step = 1e-5);

}  // namespace sqa
