#include "sqa/index.hpp"

#include "binary_io.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <queue>

namespace sqa {

InvertedIndex InvertedIndex::build(const std::vector<Paragraph>& corpus, const Tokenizer& tokenizer,
                                   Bm25Params params) {
    if (corpus.empty()) throw DataError("cannot index an empty corpus");
    InvertedIndex index;
    index.tokenizer_ = tokenizer;
    index.params_ = params;
    index.stats_.num_docs = corpus.size();
    index.stats_.doc_length.reserve(corpus.size());
    index.paragraph_ids_.reserve(corpus.size());

    std::unordered_map<TermId, std::uint32_t> counts;
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        const auto doc = static_cast<DocId>(i);
        const Paragraph& p = corpus[i];
        if (!index.doc_lookup_.emplace(p.id, doc).second) throw DataError("duplicate paragraph id \"" + p.id + "\"");
        index.paragraph_ids_.push_back(p.id);
        counts.clear();
        std::vector<TermId> order;
        for (const auto& tok : p.tokens) {
            auto [it, inserted] = index.term_lookup_.emplace(tok, static_cast<TermId>(index.terms_.size()));
            if (inserted) {
                index.terms_.push_back(tok);
                index.postings_.emplace_back();
            }
            if (counts[it->second]++ == 0) order.push_back(it->second);
        }
        std::sort(order.begin(), order.end());
        for (TermId t : order) index.postings_[t].push_back({doc, counts[t]});
        index.stats_.doc_length.push_back(static_cast<std::uint32_t>(p.tokens.size()));
    }
    index.finalize();
    return index;
}

void InvertedIndex::finalize() {
    std::uint64_t total = 0;
    for (auto dl : stats_.doc_length) total += dl;
    stats_.avgdl = static_cast<real>(total) / static_cast<real>(stats_.num_docs);
    stats_.doc_freq.resize(terms_.size());
    idf_.resize(terms_.size());
    max_score_.resize(terms_.size());
    for (TermId t = 0; t < terms_.size(); ++t) {
        stats_.doc_freq[t] = static_cast<std::uint32_t>(postings_[t].size());
        idf_[t] = bm25_idf(stats_.num_docs, stats_.doc_freq[t]);
        real best = 0;
        for (const auto& p : postings_[t])
            best = std::max(best, bm25_weight(idf_[t], p.tf, stats_.doc_length[p.doc], stats_.avgdl, params_));
        max_score_[t] = best;
    }
}

TermId InvertedIndex::term_id(std::string_view term) const {
    auto it = term_lookup_.find(std::string(term));
    return it == term_lookup_.end() ? kAbsentTerm : it->second;
}

std::optional<DocId> InvertedIndex::doc_id(std::string_view paragraph_id) const {
    auto it = doc_lookup_.find(std::string(paragraph_id));
    if (it == doc_lookup_.end()) return std::nullopt;
    return it->second;
}

std::uint32_t InvertedIndex::term_frequency(TermId t, DocId d) const {
    if (t == kAbsentTerm) return 0;
    const auto& list = postings_[t];
    auto it = std::lower_bound(list.begin(), list.end(), d, [](const Posting& p, DocId x) { return p.doc < x; });
    return (it != list.end() && it->doc == d) ? it->tf : 0;
}

real InvertedIndex::bm25(TermId t, DocId d) const {
    const auto tf = term_frequency(t, d);
    if (tf == 0) return 0;
    return bm25_weight(idf_[t], tf, stats_.doc_length[d], stats_.avgdl, params_);
}

real InvertedIndex::bm25_term_score(std::string_view term, std::string_view paragraph_id) const {
    const auto d = doc_id(paragraph_id);
    if (!d) throw std::out_of_range("unknown paragraph id \"" + std::string(paragraph_id) + "\"");
    return bm25(term_id(term), *d);
}

std::vector<TermId> InvertedIndex::lookup(std::span<const std::string> words) const {
    std::vector<TermId> out;
    out.reserve(words.size());
    for (const auto& w : words) out.push_back(term_id(w));
    return out;
}

bool operator==(const InvertedIndex& a, const InvertedIndex& b) {
    return a.tokenizer_.mode == b.tokenizer_.mode && a.tokenizer_.lowercase == b.tokenizer_.lowercase &&
           a.tokenizer_.stopwords == b.tokenizer_.stopwords && a.params_.k1 == b.params_.k1 &&
           a.params_.b == b.params_.b && a.stats_.num_docs == b.stats_.num_docs &&
           a.stats_.doc_length == b.stats_.doc_length && a.paragraph_ids_ == b.paragraph_ids_ &&
           a.terms_ == b.terms_ && a.postings_ == b.postings_;
}

namespace {
constexpr char kIndexMagic[8] = {'S', 'Q', 'A', 'I', 'D', 'X', '\r', '\n'};
}

void InvertedIndex::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write index file: " + path);
    detail::BinaryWriter w(out);
    w.put_bytes(kIndexMagic, sizeof kIndexMagic);
    w.put<std::uint32_t>(kIndexFormatVersion);
    w.put<std::uint8_t>(tokenizer_.mode == TokenizerMode::Char ? 1 : 0);
    w.put<std::uint8_t>(tokenizer_.lowercase ? 1 : 0);
    std::vector<std::string> stop(tokenizer_.stopwords.begin(), tokenizer_.stopwords.end());
    std::sort(stop.begin(), stop.end());
    w.put<std::uint64_t>(stop.size());
    for (const auto& s : stop) w.put_string(s);
    w.put<double>(params_.k1);
    w.put<double>(params_.b);
    w.put<std::uint64_t>(stats_.num_docs);
    for (std::size_t d = 0; d < stats_.num_docs; ++d) {
        w.put_string(paragraph_ids_[d]);
        w.put<std::uint32_t>(stats_.doc_length[d]);
    }
    w.put<std::uint64_t>(terms_.size());
    for (TermId t = 0; t < terms_.size(); ++t) {
        w.put_string(terms_[t]);
        w.put<std::uint64_t>(postings_[t].size());
        for (const auto& p : postings_[t]) {
            w.put<std::uint32_t>(p.doc);
            w.put<std::uint32_t>(p.tf);
        }
    }
    if (!w.ok()) throw std::runtime_error("failed writing index file: " + path);
}

InvertedIndex InvertedIndex::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read index file: " + path);
    detail::BinaryReader r(in, "index " + path);
    char magic[sizeof kIndexMagic];
    r.get_bytes(magic, sizeof magic);
    if (std::memcmp(magic, kIndexMagic, sizeof magic) != 0) throw FormatError(r.what() + ": bad magic bytes");
    const auto version = r.get<std::uint32_t>();
    if (version != kIndexFormatVersion)
        throw FormatError(r.what() + ": unsupported format version " + std::to_string(version));

    InvertedIndex index;
    const auto mode = r.get<std::uint8_t>();
    if (mode > 1) throw FormatError(r.what() + ": bad tokenizer mode");
    index.tokenizer_.mode = mode == 1 ? TokenizerMode::Char : TokenizerMode::UnicodeWord;
    index.tokenizer_.lowercase = r.get<std::uint8_t>() != 0;
    const auto nstop = r.get_count(1u << 24);
    for (std::uint64_t i = 0; i < nstop; ++i) index.tokenizer_.stopwords.insert(r.get_string());
    index.params_.k1 = r.get<double>();
    index.params_.b = r.get<double>();
    const auto ndocs = r.get_count(1u << 31);
    if (ndocs == 0) throw FormatError(r.what() + ": empty index");
    index.stats_.num_docs = ndocs;
    index.paragraph_ids_.reserve(ndocs);
    index.stats_.doc_length.reserve(ndocs);
    for (std::uint64_t d = 0; d < ndocs; ++d) {
        index.paragraph_ids_.push_back(r.get_string());
        index.stats_.doc_length.push_back(r.get<std::uint32_t>());
        if (!index.doc_lookup_.emplace(index.paragraph_ids_.back(), static_cast<DocId>(d)).second)
            throw FormatError(r.what() + ": duplicate paragraph id");
    }
    const auto nterms = r.get_count(1u << 31);
    index.terms_.reserve(nterms);
    index.postings_.resize(nterms);
    std::vector<std::uint64_t> tf_sum(ndocs, 0);
    for (std::uint64_t t = 0; t < nterms; ++t) {
        index.terms_.push_back(r.get_string());
        index.term_lookup_.emplace(index.terms_.back(), static_cast<TermId>(t));
        const auto np = r.get_count(ndocs);
        auto& list = index.postings_[t];
        list.reserve(np);
        for (std::uint64_t i = 0; i < np; ++i) {
            Posting p{r.get<std::uint32_t>(), r.get<std::uint32_t>()};
            if (p.doc >= ndocs || p.tf == 0 || (!list.empty() && list.back().doc >= p.doc))
                throw FormatError(r.what() + ": corrupt posting list");
            tf_sum[p.doc] += p.tf;
            list.push_back(p);
        }
    }
    for (std::uint64_t d = 0; d < ndocs; ++d)
        if (tf_sum[d] != index.stats_.doc_length[d]) throw FormatError(r.what() + ": document length mismatch");
    index.finalize();
    return index;
}

std::vector<DocId> candidate_paragraphs(const InvertedIndex& index, std::span<const std::string> words) {
    std::vector<DocId> out;
    for (const auto& w : words) {
        const TermId t = index.term_id(w);
        if (t == kAbsentTerm) continue;
        const auto list = index.postings(t);
        std::vector<DocId> merged;
        merged.reserve(out.size() + list.size());
        auto a = out.begin();
        auto b = list.begin();
        while (a != out.end() || b != list.end()) {
            if (b == list.end() || (a != out.end() && *a < b->doc)) {
                merged.push_back(*a++);
            } else if (a == out.end() || b->doc < *a) {
                merged.push_back((b++)->doc);
            } else {
                merged.push_back(*a++);
                ++b;
            }
        }
        out.swap(merged);
    }
    return out;
}

BowMatrix build_bow_matrix(const InvertedIndex& index, std::span<const std::string> words,
                           std::span<const DocId> p_raw) {
    BowMatrix bow;
    bow.words.assign(words.begin(), words.end());
    bow.paragraphs.assign(p_raw.begin(), p_raw.end());
    const auto terms = index.lookup(words);
    std::vector<Eigen::Triplet<real>> triplets;
    for (std::size_t j = 0; j < terms.size(); ++j) {
        if (terms[j] == kAbsentTerm) continue;
        const auto list = index.postings(terms[j]);
        // both lists are sorted by DocId
        std::size_t l = 0;
        auto it = list.begin();
        while (l < p_raw.size() && it != list.end()) {
            if (it->doc < p_raw[l]) {
                ++it;
            } else if (p_raw[l] < it->doc) {
                ++l;
            } else {
                const real s = bm25_weight(index.idf(terms[j]), it->tf, index.stats().doc_length[it->doc],
                                           index.stats().avgdl, index.params());
                if (s > 0) triplets.emplace_back(static_cast<int>(j), static_cast<int>(l), s);
                ++it;
                ++l;
            }
        }
    }
    bow.entries.resize(static_cast<int>(words.size()), static_cast<int>(p_raw.size()));
    bow.entries.setFromTriplets(triplets.begin(), triplets.end());
    bow.entries.makeCompressed();
    return bow;
}

namespace {

// Heap top is the entry ranked last.
struct WorstFirst {
    bool operator()(const ScoredParagraph& a, const ScoredParagraph& b) const { return ranks_before(a, b); }
};

using TopHeap = std::priority_queue<ScoredParagraph, std::vector<ScoredParagraph>, WorstFirst>;

std::vector<ScoredParagraph> drain(TopHeap& heap) {
    std::vector<ScoredParagraph> out;
    out.reserve(heap.size());
    while (!heap.empty()) {
        out.push_back(heap.top());
        heap.pop();
    }
    std::sort(out.begin(), out.end(), ranks_before);
    return out;
}

// Relative slack so rounding in bound sums never prunes a qualifying paragraph.
constexpr real kBoundSlack = 1e-12;

}  // namespace

std::vector<ScoredParagraph> weighted_topk(const InvertedIndex& index, std::span<const TermId> terms,
                                           const Eigen::Ref<const Vector>& weights, std::size_t k) {
    if (k < 1) throw std::invalid_argument("weighted_topk: k must be >= 1");
    if (static_cast<std::size_t>(weights.size()) != terms.size())
        throw std::invalid_argument("weighted_topk: weights and terms differ in length");

    struct Cursor {
        std::size_t query_pos;
        std::span<const Posting> list;
        std::size_t pos = 0;
        real weight;
        real idf;
        real bound;
        DocId doc() const { return pos < list.size() ? list[pos].doc : std::numeric_limits<DocId>::max(); }
        void seek(DocId d) {
            if (doc() >= d) return;
            auto it = std::lower_bound(list.begin() + static_cast<std::ptrdiff_t>(pos), list.end(), d,
                                       [](const Posting& p, DocId x) { return p.doc < x; });
            pos = static_cast<std::size_t>(it - list.begin());
        }
    };

    bool prunable = true;
    std::vector<Cursor> cursors;  // query order
    for (std::size_t j = 0; j < terms.size(); ++j) {
        if (terms[j] == kAbsentTerm) continue;
        const real w = weights[static_cast<Eigen::Index>(j)];
        if (w < 0) prunable = false;
        cursors.push_back({j, index.postings(terms[j]), 0, w, index.idf(terms[j]), w * index.max_score(terms[j])});
    }
    if (cursors.empty()) return {};

    // MaxScore partition: cursors sorted by bound; the first `non_essential`
    // of them cannot lift a paragraph over the threshold on their own.
    std::vector<std::size_t> by_bound(cursors.size());
    for (std::size_t i = 0; i < by_bound.size(); ++i) by_bound[i] = i;
    std::stable_sort(by_bound.begin(), by_bound.end(),
                     [&](std::size_t a, std::size_t b) { return cursors[a].bound < cursors[b].bound; });
    std::vector<real> prefix(by_bound.size() + 1, 0);
    for (std::size_t i = 0; i < by_bound.size(); ++i) prefix[i + 1] = prefix[i] + cursors[by_bound[i]].bound;

    const auto& stats = index.stats();
    const auto& params = index.params();
    TopHeap heap;
    std::size_t non_essential = 0;
    std::vector<real> contribution(cursors.size(), 0);

    auto update_partition = [&] {
        if (!prunable || heap.size() < k) return;
        const real threshold = heap.top().score;
        while (non_essential < by_bound.size() && prefix[non_essential + 1] * (1 + kBoundSlack) < threshold)
            ++non_essential;
    };

    while (true) {
        DocId doc = std::numeric_limits<DocId>::max();
        for (std::size_t i = non_essential; i < by_bound.size(); ++i) doc = std::min(doc, cursors[by_bound[i]].doc());
        if (doc == std::numeric_limits<DocId>::max()) break;

        const std::uint32_t dl = stats.doc_length[doc];
        real essential_sum = 0;
        for (std::size_t i = non_essential; i < by_bound.size(); ++i) {
            Cursor& c = cursors[by_bound[i]];
            real s = 0;
            if (c.doc() == doc) s = c.weight * bm25_weight(c.idf, c.list[c.pos].tf, dl, stats.avgdl, params);
            contribution[by_bound[i]] = s;
            essential_sum += s;
        }
        bool skip = false;
        if (prunable && heap.size() >= k && non_essential > 0) {
            const real bound = (essential_sum + prefix[non_essential]) * (1 + kBoundSlack);
            skip = bound < heap.top().score;
        }
        if (!skip) {
            for (std::size_t i = 0; i < non_essential; ++i) {
                Cursor& c = cursors[by_bound[i]];
                c.seek(doc);
                contribution[by_bound[i]] =
                    c.doc() == doc ? c.weight * bm25_weight(c.idf, c.list[c.pos].tf, dl, stats.avgdl, params) : 0;
            }
            // Sum in query order so the value matches a column dot product bit for bit.
            real score = 0;
            for (std::size_t i = 0; i < cursors.size(); ++i)
                if (contribution[i] != 0) score += contribution[i];
            const ScoredParagraph cand{doc, score};
            if (heap.size() < k) {
                heap.push(cand);
            } else if (ranks_before(cand, heap.top())) {
                heap.pop();
                heap.push(cand);
            }
            update_partition();
        }
        for (std::size_t i = non_essential; i < by_bound.size(); ++i) {
            Cursor& c = cursors[by_bound[i]];
            if (c.doc() == doc) ++c.pos;
        }
    }
    return drain(heap);
}

std::vector<ScoredParagraph> weighted_topk(const BowMatrix& bow, const Eigen::Ref<const Vector>& weights,
                                           std::size_t k) {
    if (k < 1) throw std::invalid_argument("weighted_topk: k must be >= 1");
    if (weights.size() != bow.entries.rows()) throw std::invalid_argument("weighted_topk: dimension mismatch");
    TopHeap heap;
    for (int l = 0; l < bow.entries.outerSize(); ++l) {
        real score = 0;
        for (Eigen::SparseMatrix<real>::InnerIterator it(bow.entries, l); it; ++it) {
            const real s = weights[it.row()] * it.value();
            if (s != 0) score += s;
        }
        const ScoredParagraph cand{bow.paragraphs[static_cast<std::size_t>(l)], score};
        if (heap.size() < k) {
            heap.push(cand);
        } else if (ranks_before(cand, heap.top())) {
            heap.pop();
            heap.push(cand);
        }
    }
    return drain(heap);
}

}  // namespace sqa
