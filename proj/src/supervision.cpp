#include "ttqa/supervision.hpp"

#include <cctype>
#include <sstream>

#include "ttqa/common.hpp"

namespace ttqa {

std::set<int> SupervisionBag::positive_rows() const {
    std::set<int> rows;
    for (const auto& [row, spans] : spans_per_row) {
        if (!spans.empty()) rows.insert(row);
    }
    return rows;
}

std::string normalize_answer(const std::string& s) {
    std::string lowered;
    lowered.reserve(s.size());
    for (unsigned char c : s) {
        if (std::ispunct(c)) continue;
        lowered.push_back(static_cast<char>(std::tolower(c)));
    }
    std::istringstream words(lowered);
    std::string word, out;
    while (words >> word) {
        if (word == "a" || word == "an" || word == "the") continue;
        if (!out.empty()) out.push_back(' ');
        out += word;
    }
    return out;
}

namespace {

// Article tokens vanish under normalization; they may be skipped inside a
// match so "lord of the rings" still matches answer "lord of rings".
bool is_skippable(const std::string& token) { return normalize_answer(token).empty(); }

// Tries to match answer_tokens against tokens starting at position i.
// Returns the inclusive end index, or -1.
int match_at(const std::vector<std::string>& tokens, const std::vector<std::string>& answer_tokens,
             size_t i) {
    size_t pos = i;
    for (size_t a = 0; a < answer_tokens.size(); ++a) {
        if (a > 0) {
            while (pos < tokens.size() && is_skippable(tokens[pos])) ++pos;
        }
        if (pos >= tokens.size() || normalize_answer(tokens[pos]) != answer_tokens[a]) return -1;
        ++pos;
    }
    return static_cast<int>(pos) - 1;
}

}  // namespace

std::vector<std::pair<int, int>> enumerate_spans(const std::vector<std::string>& tokens,
                                                 const std::string& answer) {
    std::vector<std::pair<int, int>> spans;
    std::vector<std::string> answer_tokens = tokenize(normalize_answer(answer));
    if (answer_tokens.empty()) return spans;

    size_t i = 0;
    while (i < tokens.size()) {
        int end = match_at(tokens, answer_tokens, i);
        if (end >= 0) {
            spans.emplace_back(static_cast<int>(i), end);
            i = static_cast<size_t>(end) + 1;  // greedy, non-overlapping
        } else {
            ++i;
        }
    }
    return spans;
}

namespace {

std::string join_tokens(const std::vector<std::string>& tokens, int start, int end) {
    std::string out;
    for (int i = start; i <= end; ++i) {
        if (!out.empty()) out.push_back(' ');
        out += tokens[static_cast<size_t>(i)];
    }
    return out;
}

}  // namespace

SupervisionBag find_answer_rows(const Table& t, const Corpus& corpus, const std::string& answer,
                                const std::string& question_id) {
    if (answer.empty()) throw DataError("find_answer_rows: empty answer");
    SupervisionBag bag;
    bag.question_id = question_id;
    bag.table_id = t.id;

    for (const RetrievalUnit& unit : split_table(t)) {
        std::vector<SpanRef> spans;
        for (size_t c = 0; c < unit.cells.size(); ++c) {
            auto tokens = tokenize(unit.cells[c].text);
            for (auto [start, end] : enumerate_spans(tokens, answer)) {
                spans.push_back({SpanSource::cell(static_cast<int>(c)), start, end,
                                 join_tokens(tokens, start, end)});
            }
        }
        for (const std::string& pid : unit.linked_passages) {
            auto tokens = tokenize(corpus.passage(pid).text);
            for (auto [start, end] : enumerate_spans(tokens, answer)) {
                spans.push_back(
                    {SpanSource::passage(pid), start, end, join_tokens(tokens, start, end)});
            }
        }
        if (!spans.empty()) bag.spans_per_row[unit.row_index] = std::move(spans);
    }
    return bag;
}

double AmbiguityStats::multi_row_fraction() const {
    if (total == 0) return 0.0;
    int multi = 0;
    for (const auto& [size, count] : bag_size_counts) {
        if (size >= 2) multi += count;
    }
    return static_cast<double>(multi) / total;
}

double AmbiguityStats::multi_span_rate() const {
    return answerable == 0 ? 0.0 : static_cast<double>(multi_span_count) / answerable;
}

double AmbiguityStats::percent(int bag_size) const {
    if (total == 0) return 0.0;
    auto it = bag_size_counts.find(bag_size);
    int count = it == bag_size_counts.end() ? 0 : it->second;
    return 100.0 * count / total;
}

AmbiguityStats ambiguity_stats(const std::vector<SupervisionBag>& bags,
                               const std::map<std::string, int>& selected_rows) {
    AmbiguityStats stats;
    stats.total = static_cast<int>(bags.size());
    for (const SupervisionBag& bag : bags) {
        auto rows = bag.positive_rows();
        ++stats.bag_size_counts[static_cast<int>(rows.size())];
        if (rows.empty()) continue;
        ++stats.answerable;
        int selected = *rows.begin();
        auto it = selected_rows.find(bag.question_id);
        if (it != selected_rows.end() && rows.count(it->second)) selected = it->second;
        if (bag.spans_per_row.at(selected).size() > 1) ++stats.multi_span_count;
    }
    return stats;
}

}  // namespace ttqa
