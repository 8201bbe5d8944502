#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "ttqa/context.hpp"
#include "ttqa/corpus.hpp"

namespace ttqa {

// One occurrence of the gold answer inside a row's cells or linked passages.
// Token offsets are relative to the source's own token stream; end inclusive.
struct SpanRef {
    SpanSource source;
    int start = 0;
    int end = 0;
    std::string surface;
};

// Per (question, table): the positive row set B and per-row span sets.
struct SupervisionBag {
    std::string question_id;
    std::string table_id;
    std::map<int, std::vector<SpanRef>> spans_per_row;  // only rows with matches

    std::set<int> positive_rows() const;
    bool empty() const { return spans_per_row.empty(); }
};

// SQuAD-style: lowercase, strip punctuation, drop articles, collapse whitespace.
std::string normalize_answer(const std::string& s);

// All occurrences of the (normalized) answer in the token stream, left to
// right, non-overlapping. Tokens whose normalization is empty (articles) may
// sit inside a match but cannot begin or end one.
std::vector<std::pair<int, int>> enumerate_spans(const std::vector<std::string>& tokens,
                                                 const std::string& answer);

SupervisionBag find_answer_rows(const Table& t, const Corpus& corpus, const std::string& answer,
                                const std::string& question_id = "");

struct AmbiguityStats {
    std::map<int, int> bag_size_counts;  // |B| -> number of bags
    int total = 0;
    int answerable = 0;       // |B| >= 1
    int multi_span_count = 0; // selected row has more than one span
    double multi_row_fraction() const;
    double multi_span_rate() const;  // over answerable bags
    double percent(int bag_size) const;
};

// selected_rows: question id -> row chosen by the retriever; bags without an
// entry fall back to their lowest positive row.
AmbiguityStats ambiguity_stats(const std::vector<SupervisionBag>& bags,
                               const std::map<std::string, int>& selected_rows = {});

}  // namespace ttqa
