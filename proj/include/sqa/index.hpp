#pragma once

#include "sqa/common.hpp"
#include "sqa/dataset.hpp"
#include "sqa/text.hpp"

#include <Eigen/SparseCore>

#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace sqa {

inline constexpr TermId kAbsentTerm = std::numeric_limits<TermId>::max();

struct Bm25Params {
    real k1 = 1.2;
    real b = 0.75;
};

struct Posting {
    DocId doc;
    std::uint32_t tf;
    friend bool operator==(const Posting&, const Posting&) = default;
};

struct CorpusStats {
    std::size_t num_docs = 0;
    real avgdl = 0;
    std::vector<std::uint32_t> doc_length;  // by DocId
    std::vector<std::uint32_t> doc_freq;    // by TermId
};

struct ScoredParagraph {
    DocId doc;
    real score;
    friend bool operator==(const ScoredParagraph&, const ScoredParagraph&) = default;
};

/// Descending score, ties by ascending DocId.
inline bool ranks_before(const ScoredParagraph& a, const ScoredParagraph& b) {
    return a.score > b.score || (a.score == b.score && a.doc < b.doc);
}

/// Okapi BM25 with IDF = ln(1 + (N - df + 0.5) / (df + 0.5)).
inline real bm25_idf(std::size_t num_docs, std::size_t df) {
    const real n = static_cast<real>(num_docs);
    const real f = static_cast<real>(df);
    return std::log(1.0 + (n - f + 0.5) / (f + 0.5));
}

inline real bm25_weight(real idf, std::uint32_t tf, std::uint32_t dl, real avgdl, const Bm25Params& p) {
    if (tf == 0) return 0;
    const real f = static_cast<real>(tf);
    const real norm = p.k1 * (1.0 - p.b + p.b * static_cast<real>(dl) / avgdl);
    return idf * f * (p.k1 + 1.0) / (f + norm);
}

/// Paragraphs are numbered by ingest order; DocId order is the tie-break
/// order used everywhere ("paragraph id ascending").
class InvertedIndex {
public:
    InvertedIndex() = default;

    static InvertedIndex build(const std::vector<Paragraph>& corpus, const Tokenizer& tokenizer,
                               Bm25Params params = {});

    const CorpusStats& stats() const { return stats_; }
    const Tokenizer& tokenizer() const { return tokenizer_; }
    const Bm25Params& params() const { return params_; }

    std::size_t num_docs() const { return stats_.num_docs; }
    std::size_t vocabulary_size() const { return terms_.size(); }

    TermId term_id(std::string_view term) const;  // kAbsentTerm when unknown
    const std::string& term(TermId t) const { return terms_[t]; }
    std::span<const Posting> postings(TermId t) const { return postings_[t]; }
    std::uint32_t doc_freq(TermId t) const { return stats_.doc_freq[t]; }
    real idf(TermId t) const { return idf_[t]; }
    /// Largest single-paragraph BM25 value of the term; a MaxScore bound.
    real max_score(TermId t) const { return max_score_[t]; }

    std::optional<DocId> doc_id(std::string_view paragraph_id) const;
    const std::string& paragraph_id(DocId d) const { return paragraph_ids_[d]; }

    std::uint32_t term_frequency(TermId t, DocId d) const;
    real bm25(TermId t, DocId d) const;
    /// Throws std::out_of_range for an unknown paragraph id.
    real bm25_term_score(std::string_view term, std::string_view paragraph_id) const;

    std::vector<TermId> lookup(std::span<const std::string> words) const;

    void save(const std::string& path) const;
    static InvertedIndex load(const std::string& path);

    friend bool operator==(const InvertedIndex& a, const InvertedIndex& b);

private:
    void finalize();

    Tokenizer tokenizer_;
    Bm25Params params_;
    CorpusStats stats_;
    std::vector<std::string> paragraph_ids_;
    std::unordered_map<std::string, DocId> doc_lookup_;
    std::vector<std::string> terms_;
    std::unordered_map<std::string, TermId> term_lookup_;
    std::vector<std::vector<Posting>> postings_;
    std::vector<real> idf_;
    std::vector<real> max_score_;
};

inline constexpr std::uint32_t kIndexFormatVersion = 1;

/// Sorted union of the postings of all known words.
std::vector<DocId> candidate_paragraphs(const InvertedIndex& index, std::span<const std::string> words);

/// Sparse n_words x |P_raw| matrix of per-word BM25 scores.
struct BowMatrix {
    std::vector<std::string> words;
    std::vector<DocId> paragraphs;
    Eigen::SparseMatrix<real> entries;

    int rows() const { return static_cast<int>(entries.rows()); }
    int cols() const { return static_cast<int>(entries.cols()); }
};

BowMatrix build_bow_matrix(const InvertedIndex& index, std::span<const std::string> words,
                           std::span<const DocId> p_raw);

/// Exact weighted BM25 top-k by document-at-a-time traversal with MaxScore
/// pruning. `terms` is aligned with `weights`; kAbsentTerm entries contribute
/// nothing. Weights must be non-negative for pruning to be sound.
std::vector<ScoredParagraph> weighted_topk(const InvertedIndex& index, std::span<const TermId> terms,
                                           const Eigen::Ref<const Vector>& weights, std::size_t k);

/// Same contract over the columns of a BoW matrix.
std::vector<ScoredParagraph> weighted_topk(const BowMatrix& bow, const Eigen::Ref<const Vector>& weights,
                                           std::size_t k);

}  // namespace sqa
