#pragma once

#include "sqa/dataset.hpp"
#include "sqa/encoder.hpp"
#include "sqa/index.hpp"
#include "sqa/reader.hpp"
#include "sqa/retriever.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace sqa {

struct ModelConfig {
    EncoderConfig encoder;
    RetrieverConfig retriever;
    ReaderConfig reader;
    int k = 10;
    int k_fusion = 2;
    /// Freeze word weights at 1/n (the flat-BM25 ablation).
    bool uniform_weights = false;

    void validate() const;  // throws std::invalid_argument
};

/// Corpus as seen by the model: the index plus the token lists it was built
/// from, aligned by DocId.
class KnowledgeBase {
public:
    KnowledgeBase(const InvertedIndex& index, const std::vector<Paragraph>& paragraphs);

    const InvertedIndex& index() const { return *index_; }
    const Paragraph& paragraph(DocId d) const { return (*paragraphs_)[d]; }

private:
    const InvertedIndex* index_;
    const std::vector<Paragraph>* paragraphs_;
};

struct Model {
    ModelConfig config;
    Vocabulary vocab;
    ParamStore params;
    Encoder encoder;
    WordWeightingNet weighting;
    SpaScoreHead spa_head;
    DenseScoreHead dense_head;
    FusionParams fusion;
    Activations activations;

    /// Fresh parameters drawn from `seed`.
    static Model create(const ModelConfig& config, Vocabulary vocab, std::uint64_t seed);

    /// Candidates kept per option: enough for both P^top and the profile.
    int retrieval_depth() const { return std::max(config.k, config.retriever.tau); }
};

struct PreparedOption {
    OptionText text;
    SequenceLayout layout;
    EnrichedOption enriched;
    std::vector<TermId> terms;  // aligned with enriched.unique_words
};

/// Tokenized, laid-out question, reusable across steps.
struct PreparedQuestion {
    const Question* question = nullptr;
    std::vector<PreparedOption> options;
};

/// Throws DataError when an option is empty after filtering.
PreparedQuestion prepare_question(const Question& question, const Tokenizer& tokenizer, const Model& model,
                                  const InvertedIndex& index);

/// Per-option retrieved doc lists (ranked), as cached between refreshes.
using RetrievalCache = std::vector<std::vector<DocId>>;

struct OptionTrace {
    Vector weights;                // aligned with unique words
    std::vector<DocId> retrieved;  // top retrieval_depth by z^spa
    std::vector<DocId> top;        // P^top
    Vector sparse_top;             // z^spa of P^top
    Vector dense;                  // z^den of P^top
    std::vector<DocId> fused;      // P^fus
    Vector pool_weights;           // over P^fus
    real s_spa = 0, s_den = 0, s_fus = 0;
};

struct ForwardResult {
    Var s_spa, s_den, s_fus;  // 1 x m each
    Var retriever_loss, reader_loss, loss;
    std::vector<OptionTrace> options;
};

/// Full retrieve-and-read pass for one question. With `cache`, the cached
/// candidates replace a fresh retrieval but every score is recomputed from
/// the current parameters. Losses are recorded only when `with_loss`.
ForwardResult forward(Tape& tape, const Model& model, const PreparedQuestion& question, const KnowledgeBase& kb,
                      const RetrievalCache* cache = nullptr, bool with_loss = true);

RetrievalCache retrieval_of(const ForwardResult& result);

}  // namespace sqa
