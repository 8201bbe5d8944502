#include "ttqa/context.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>

#include "ttqa/common.hpp"

namespace ttqa {

std::vector<std::string> tokenize(const std::string& s) {
    std::vector<std::string> out;
    std::string current;
    for (unsigned char c : s) {
        if (std::isalnum(c)) {
            current.push_back(static_cast<char>(std::tolower(c)));
        } else if (!current.empty()) {
            out.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) out.push_back(std::move(current));
    return out;
}

void TokenSequence::push(std::string token, SegmentTag tag) {
    tokens.push_back(std::move(token));
    origin.push_back(std::move(tag));
}

std::optional<SpanSource> TokenSequence::provenance(size_t i) const {
    const SegmentTag& tag = origin[i];
    switch (tag.kind) {
        case SegmentTag::Kind::Header:
        case SegmentTag::Kind::Cell:
            return SpanSource::cell(tag.column);
        case SegmentTag::Kind::Passage:
            return SpanSource::passage(tag.passage_id);
        default:
            return std::nullopt;
    }
}

TfIdfScorer::TfIdfScorer(const Corpus& corpus) : n_docs_(corpus.passages().size()) {
    for (const Passage& p : corpus.passages()) {
        std::map<std::string, int> seen;
        for (const std::string& tok : tokenize(p.text)) seen[tok] = 1;
        for (const auto& [term, one] : seen) df_[term] += one;
    }
}

double TfIdfScorer::idf(const std::string& term) const {
    auto it = df_.find(term);
    int df = it == df_.end() ? 0 : it->second;
    return std::log((static_cast<double>(n_docs_) + 1.0) / (df + 1.0)) + 1.0;
}

double TfIdfScorer::score(const Question& q, const Passage& p) const {
    std::map<std::string, int> q_tf;
    for (const std::string& tok : tokenize(q.text)) ++q_tf[tok];
    std::map<std::string, int> p_tf;
    for (const std::string& tok : tokenize(p.text)) ++p_tf[tok];

    double dot = 0.0, q_norm = 0.0, p_norm = 0.0;
    for (const auto& [term, tf] : q_tf) {
        double w = tf * idf(term);
        q_norm += w * w;
        auto it = p_tf.find(term);
        if (it != p_tf.end()) dot += w * it->second * idf(term);
    }
    for (const auto& [term, tf] : p_tf) {
        double w = tf * idf(term);
        p_norm += w * w;
    }
    if (q_norm == 0.0 || p_norm == 0.0) return 0.0;
    return dot / (std::sqrt(q_norm) * std::sqrt(p_norm));
}

namespace {

// Token count of the retrieval input before any passage text. filter_passages
// and linearize_for_retrieval must agree on this.
int fixed_retrieval_cost(const Question& q, const Table& t, int row) {
    int cost = 1;  // [CLS]
    cost += static_cast<int>(tokenize(q.text).size());
    cost += 1;  // [SEP]
    const auto& cells = t.rows[static_cast<size_t>(row)];
    for (size_t c = 0; c < cells.size(); ++c) {
        cost += static_cast<int>(tokenize(t.headers[c]).size());
        cost += 1;  // "is"
        cost += static_cast<int>(tokenize(cells[c].text).size());
        cost += 1;  // [DOT]
    }
    cost += 1;  // [SEP]
    cost += static_cast<int>(tokenize(t.meta).size());
    cost += 1;  // [DOT]
    return cost;
}

}  // namespace

std::vector<std::string> filter_passages(const Question& q, const RetrievalUnit& u,
                                         const Corpus& corpus, const SimilarityScorer* scorer,
                                         const ContextConfig& cfg) {
    if (cfg.budget <= 0) throw DataError("passage filter: budget must be positive");

    std::vector<std::string> ordered = u.linked_passages;
    if (cfg.pf_enabled && scorer != nullptr && ordered.size() > 1) {
        std::vector<std::pair<double, size_t>> keyed;
        keyed.reserve(ordered.size());
        for (size_t i = 0; i < ordered.size(); ++i) {
            keyed.emplace_back(scorer->score(q, corpus.passage(ordered[i])), i);
        }
        // ties keep the original linked order
        std::stable_sort(keyed.begin(), keyed.end(),
                         [](const auto& a, const auto& b) { return a.first > b.first; });
        std::vector<std::string> sorted;
        sorted.reserve(ordered.size());
        for (const auto& [score, i] : keyed) sorted.push_back(ordered[i]);
        ordered = std::move(sorted);
    }

    const Table& t = corpus.table(u.table_id);
    int offset = fixed_retrieval_cost(q, t, u.row_index);
    std::vector<std::string> kept;
    for (const std::string& pid : ordered) {
        if (offset >= cfg.budget) break;  // no room for even one passage token
        kept.push_back(pid);
        offset += static_cast<int>(tokenize(corpus.passage(pid).text).size()) + 1;  // + [DOT]
    }
    return kept;
}

TokenSequence linearize_for_retrieval(const Question& q, const Table& t, int row,
                                      const std::vector<std::string>& filtered,
                                      const Corpus& corpus, int budget) {
    TokenSequence seq;
    SegmentTag sep{SegmentTag::Kind::Separator, -1, {}};

    seq.push(kCls, sep);
    for (auto& tok : tokenize(q.text)) seq.push(std::move(tok), {SegmentTag::Kind::Question, -1, {}});
    seq.push(kSep, sep);
    const auto& cells = t.rows[static_cast<size_t>(row)];
    for (size_t c = 0; c < cells.size(); ++c) {
        int col = static_cast<int>(c);
        for (auto& tok : tokenize(t.headers[c])) {
            seq.push(std::move(tok), {SegmentTag::Kind::Header, col, {}});
        }
        seq.push("is", sep);
        for (auto& tok : tokenize(cells[c].text)) {
            seq.push(std::move(tok), {SegmentTag::Kind::Cell, col, {}});
        }
        seq.push(kDot, sep);
    }
    seq.push(kSep, sep);
    for (auto& tok : tokenize(t.meta)) seq.push(std::move(tok), {SegmentTag::Kind::Meta, -1, {}});
    seq.push(kDot, sep);
    for (const std::string& pid : filtered) {
        for (auto& tok : tokenize(corpus.passage(pid).text)) {
            seq.push(std::move(tok), {SegmentTag::Kind::Passage, -1, pid});
        }
        seq.push(kDot, sep);
    }

    if (budget > 0 && seq.size() > static_cast<size_t>(budget)) {
        seq.tokens.resize(static_cast<size_t>(budget));
        seq.origin.resize(static_cast<size_t>(budget));
    }
    return seq;
}

TokenSequence linearize_for_extraction(const Table& t, int row,
                                       const std::vector<std::string>& filtered,
                                       const Corpus& corpus) {
    TokenSequence seq;
    SegmentTag sep{SegmentTag::Kind::Separator, -1, {}};

    const auto& cells = t.rows[static_cast<size_t>(row)];
    for (size_t c = 0; c < cells.size(); ++c) {
        int col = static_cast<int>(c);
        for (auto& tok : tokenize(t.headers[c])) {
            seq.push(std::move(tok), {SegmentTag::Kind::Header, col, {}});
        }
        seq.push("is", sep);
        for (auto& tok : tokenize(cells[c].text)) {
            seq.push(std::move(tok), {SegmentTag::Kind::Cell, col, {}});
        }
        seq.push(".", sep);
    }
    for (const std::string& pid : filtered) {
        for (auto& tok : tokenize(corpus.passage(pid).text)) {
            seq.push(std::move(tok), {SegmentTag::Kind::Passage, -1, pid});
        }
    }
    return seq;
}

std::optional<std::pair<int, int>> map_span_to_context(const TokenSequence& seq,
                                                       const SpanSource& source, int start,
                                                       int end) {
    // Offsets are relative to the source token stream (cell text or passage
    // text), so header tokens that share a cell's column do not count.
    int within = 0;
    int ctx_start = -1;
    for (size_t i = 0; i < seq.size(); ++i) {
        const SegmentTag& tag = seq.origin[i];
        bool in_source = false;
        if (source.kind == SpanSource::Kind::Cell) {
            in_source = tag.kind == SegmentTag::Kind::Cell && tag.column == source.column;
        } else {
            in_source = tag.kind == SegmentTag::Kind::Passage && tag.passage_id == source.passage_id;
        }
        if (!in_source) continue;
        if (within == start) ctx_start = static_cast<int>(i);
        if (within == end) {
            if (ctx_start < 0) return std::nullopt;
            return std::make_pair(ctx_start, static_cast<int>(i));
        }
        ++within;
    }
    return std::nullopt;
}

}  // namespace ttqa
