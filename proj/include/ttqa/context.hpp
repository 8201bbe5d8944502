#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ttqa/corpus.hpp"

namespace ttqa {

// Sentinel tokens are literal vocabulary entries; reference scorers ignore them.
inline constexpr const char* kCls = "[CLS]";
inline constexpr const char* kSep = "[SEP]";
inline constexpr const char* kDot = "[DOT]";

// Lowercase whitespace-and-punctuation split; punctuation tokens dropped.
std::vector<std::string> tokenize(const std::string& s);

struct SegmentTag {
    enum class Kind { Question, Header, Cell, Meta, Passage, Separator };
    Kind kind = Kind::Separator;
    int column = -1;         // Header / Cell
    std::string passage_id;  // Passage

    bool operator==(const SegmentTag&) const = default;
};

// Provenance of an answer span: a cell (by column) or a passage (by id).
struct SpanSource {
    enum class Kind { Cell, Passage };
    Kind kind = Kind::Cell;
    int column = -1;
    std::string passage_id;

    bool operator==(const SpanSource&) const = default;

    static SpanSource cell(int column) { return {Kind::Cell, column, {}}; }
    static SpanSource passage(std::string id) { return {Kind::Passage, -1, std::move(id)}; }
};

struct TokenSequence {
    std::vector<std::string> tokens;
    std::vector<SegmentTag> origin;  // one tag per token

    size_t size() const { return tokens.size(); }
    void push(std::string token, SegmentTag tag);

    // Answer provenance for token i; nullopt on question/meta/separator tokens.
    std::optional<SpanSource> provenance(size_t i) const;
};

class SimilarityScorer {
   public:
    virtual ~SimilarityScorer() = default;
    virtual double score(const Question& q, const Passage& p) const = 0;
};

// Reference scorer: cosine similarity between question and passage
// tf-idf vectors, document frequencies taken over the passage corpus.
class TfIdfScorer : public SimilarityScorer {
   public:
    explicit TfIdfScorer(const Corpus& corpus);
    double score(const Question& q, const Passage& p) const override;

   private:
    double idf(const std::string& term) const;
    std::map<std::string, int> df_;
    size_t n_docs_ = 0;
};

struct ContextConfig {
    int budget = 512;        // token budget for the retrieval input
    bool pf_enabled = true;  // false: keep linked order (the no-PF control)
};

// Orders the unit's passages by descending score (stable on ties) and keeps the
// prefix that still reaches into the budget after the fixed row linearization
// cost. A passage with no room for even one token is dropped.
std::vector<std::string> filter_passages(const Question& q, const RetrievalUnit& u,
                                         const Corpus& corpus, const SimilarityScorer* scorer,
                                         const ContextConfig& cfg);

// [CLS] q [SEP] (hdr is cell [DOT])* [SEP] meta [DOT] (passage [DOT])*, cut at budget.
TokenSequence linearize_for_retrieval(const Question& q, const Table& t, int row,
                                      const std::vector<std::string>& filtered,
                                      const Corpus& corpus, int budget);

// (hdr is cell .)* followed by the filtered passages. Not truncated.
TokenSequence linearize_for_extraction(const Table& t, int row,
                                       const std::vector<std::string>& filtered,
                                       const Corpus& corpus);

// Maps a span in source coordinates (cell or passage token offsets) into
// context coordinates; nullopt when the source was truncated away.
std::optional<std::pair<int, int>> map_span_to_context(const TokenSequence& seq,
                                                       const SpanSource& source, int start,
                                                       int end);

}  // namespace ttqa
