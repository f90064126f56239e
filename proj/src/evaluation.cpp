#include "sqa/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

namespace sqa {

RowVector softmax(const Eigen::Ref<const RowVector>& scores) {
    if (scores.size() == 0) return RowVector();
    const real m = scores.maxCoeff();
    RowVector e = (scores.array() - m).exp().matrix();
    return e / e.sum();
}

RowVector final_scores(const ScoreTriple& s, const Mixture& mx) {
    if (s.spa.size() != s.den.size() || s.spa.size() != s.fus.size())
        throw std::invalid_argument("score vectors differ in length");
    return mx.alpha * softmax(s.spa) + mx.beta * softmax(s.den) + mx.gamma * softmax(s.fus);
}

int predict(const ScoreTriple& scores, const Mixture& mixture) {
    const RowVector s = final_scores(scores, mixture);
    if (s.size() < 2) throw std::invalid_argument("predict needs at least two options");
    int best = 0;
    for (int i = 1; i < s.size(); ++i)
        if (s(i) > s(best)) best = i;
    return best;
}

real accuracy(std::span<const int> predictions, std::span<const int> gold) {
    if (predictions.size() != gold.size()) throw std::invalid_argument("prediction and gold counts differ");
    if (gold.empty()) return 0;
    std::size_t hits = 0;
    for (std::size_t i = 0; i < gold.size(); ++i) hits += predictions[i] == gold[i];
    return static_cast<real>(hits) / static_cast<real>(gold.size());
}

Mixture tune_mixture(std::span<const ScoreTriple> scores, std::span<const int> gold) {
    if (scores.size() != gold.size()) throw std::invalid_argument("score and gold counts differ");
    struct Normalized {
        RowVector spa, den, fus;
    };
    std::vector<Normalized> norm;
    norm.reserve(scores.size());
    for (const auto& s : scores) norm.push_back({softmax(s.spa), softmax(s.den), softmax(s.fus)});

    constexpr int kSteps = 20;
    Mixture best{0, 0, 0};
    long best_hits = -1;
    // Visiting gamma, then beta, then alpha from high to low and keeping the
    // first maximum realizes the tie preference.
    for (int g = kSteps; g >= 0; --g)
        for (int b = kSteps; b >= 0; --b)
            for (int a = kSteps; a >= 0; --a) {
                const real alpha = a / real(kSteps), beta = b / real(kSteps), gamma = g / real(kSteps);
                long hits = 0;
                for (std::size_t q = 0; q < norm.size(); ++q) {
                    const RowVector s = alpha * norm[q].spa + beta * norm[q].den + gamma * norm[q].fus;
                    int arg = 0;
                    for (int i = 1; i < s.size(); ++i)
                        if (s(i) > s(arg)) arg = i;
                    hits += arg == gold[q];
                }
                if (hits > best_hits) {
                    best_hits = hits;
                    best = {alpha, beta, gamma};
                }
            }
    return best;
}

RankedList pool_option_lists(const std::string& question_id,
                             const std::vector<std::vector<ScoredParagraph>>& per_option, const InvertedIndex& index) {
    std::unordered_map<DocId, real> best;
    for (const auto& list : per_option)
        for (const auto& sp : list) {
            auto [it, inserted] = best.emplace(sp.doc, sp.score);
            if (!inserted) it->second = std::max(it->second, sp.score);
        }
    std::vector<ScoredParagraph> merged;
    merged.reserve(best.size());
    for (const auto& [doc, score] : best) merged.push_back({doc, score});
    std::sort(merged.begin(), merged.end(), ranks_before);
    RankedList out{question_id, {}};
    out.ranked.reserve(merged.size());
    for (const auto& sp : merged) out.ranked.push_back({index.paragraph_id(sp.doc), sp.score});
    return out;
}

real average_precision_at(std::span<const std::string> ranked, const std::set<std::string>& relevant, int k) {
    if (relevant.empty()) return 0;
    real sum = 0;
    int hits = 0;
    const auto depth = std::min<std::size_t>(ranked.size(), static_cast<std::size_t>(std::max(k, 0)));
    for (std::size_t i = 0; i < depth; ++i)
        if (relevant.count(ranked[i])) {
            ++hits;
            sum += static_cast<real>(hits) / static_cast<real>(i + 1);
        }
    return sum / static_cast<real>(relevant.size());
}

real ndcg_at(std::span<const std::string> ranked, const std::set<std::string>& relevant, int k) {
    if (relevant.empty() || k <= 0) return 0;
    real dcg = 0;
    const auto depth = std::min<std::size_t>(ranked.size(), static_cast<std::size_t>(k));
    for (std::size_t i = 0; i < depth; ++i)
        if (relevant.count(ranked[i])) dcg += 1.0 / std::log2(static_cast<real>(i) + 2.0);
    real ideal = 0;
    const auto ideal_hits = std::min<std::size_t>(relevant.size(), static_cast<std::size_t>(k));
    for (std::size_t i = 0; i < ideal_hits; ++i) ideal += 1.0 / std::log2(static_cast<real>(i) + 2.0);
    return dcg / ideal;
}

real hit_at(std::span<const std::string> ranked, const std::set<std::string>& relevant, int k) {
    const auto depth = std::min<std::size_t>(ranked.size(), static_cast<std::size_t>(std::max(k, 0)));
    for (std::size_t i = 0; i < depth; ++i)
        if (relevant.count(ranked[i])) return 1;
    return 0;
}

RetrievalMetrics retrieval_metrics(const RetrievalRun& run, const Qrels& qrels, std::vector<int> cutoffs) {
    RetrievalMetrics m;
    for (int k : cutoffs) m.map[k] = m.ndcg[k] = m.hit_rate[k] = 0;
    for (const auto& list : run) {
        const auto& relevant = qrels.relevant(list.question_id);
        if (relevant.empty()) {
            ++m.without_relevant;
            continue;
        }
        std::vector<std::string> ids;
        ids.reserve(list.ranked.size());
        for (const auto& r : list.ranked) ids.push_back(r.paragraph_id);
        for (int k : cutoffs) {
            m.map[k] += average_precision_at(ids, relevant, k);
            m.ndcg[k] += ndcg_at(ids, relevant, k);
            m.hit_rate[k] += hit_at(ids, relevant, k);
        }
        ++m.evaluated;
    }
    if (m.evaluated > 0)
        for (int k : cutoffs) {
            m.map[k] /= static_cast<real>(m.evaluated);
            m.ndcg[k] /= static_cast<real>(m.evaluated);
            m.hit_rate[k] /= static_cast<real>(m.evaluated);
        }
    return m;
}

std::vector<std::string> option_query_words(const Question& question, int option, const Tokenizer& tokenizer) {
    std::vector<std::string> words;
    std::unordered_set<std::string> seen;
    auto add = [&](const std::string& text) {
        for (auto& t : tokenizer.tokenize(text))
            if (seen.insert(t).second) words.push_back(std::move(t));
    };
    add(question.scenario);
    add(question.question);
    add(question.options.at(static_cast<std::size_t>(option)));
    return words;
}

RetrievalRun baseline_bm25_run(const InvertedIndex& index, std::span<const Question* const> questions, std::size_t k) {
    RetrievalRun run;
    run.reserve(questions.size());
    for (const Question* q : questions) {
        std::vector<std::vector<ScoredParagraph>> lists;
        for (int i = 0; i < q->num_options(); ++i) {
            const auto words = option_query_words(*q, i, index.tokenizer());
            if (words.empty()) {
                lists.emplace_back();
                continue;
            }
            const auto terms = index.lookup(words);
            const Vector w = Vector::Constant(static_cast<Eigen::Index>(terms.size()), 1.0 / static_cast<real>(terms.size()));
            lists.push_back(weighted_topk(index, terms, w, k));
        }
        run.push_back(pool_option_lists(q->id, lists, index));
    }
    return run;
}

int baseline_ir_solver(const InvertedIndex& index, const Question& question) {
    int best = 0;
    real best_score = -1;
    for (int i = 0; i < question.num_options(); ++i) {
        const auto words = option_query_words(question, i, index.tokenizer());
        real score = 0;
        if (!words.empty()) {
            const auto terms = index.lookup(words);
            const auto top = weighted_topk(index, terms, Vector::Ones(static_cast<Eigen::Index>(terms.size())), 1);
            if (!top.empty()) score = top.front().score;
        }
        if (score > best_score) {
            best_score = score;
            best = i;
        }
    }
    return best;
}

}  // namespace sqa
