#include "doctest.h"
#include "ttqa/common.hpp"
#include "ttqa/supervision.hpp"

using namespace ttqa;

namespace {

// 2 rows x 2 cols; row 0 links a passage mentioning 2018 twice, row 1's cell
// holds it once; row 1 also links an unrelated passage.
Corpus two_row_corpus() {
    Corpus corpus;
    corpus.add_passage({"P1", "Season", "the 2018 season started after the 2018 draft"});
    corpus.add_passage({"P2", "Other", "nothing relevant here"});
    Table t;
    t.id = "T1";
    t.meta = "seasons";
    t.headers = {"Team", "Year"};
    t.rows = {{Cell{"jets", {"P1"}}, Cell{"2017", {}}},
              {Cell{"giants", {"P2"}}, Cell{"2018", {}}}};
    corpus.add_table(std::move(t));
    return corpus;
}

}  // namespace

TEST_CASE("normalize_answer applies the lowercase/article/punctuation rules") {
    CHECK(normalize_answer("The Eagles!") == "eagles");
    CHECK(normalize_answer("2018") == "2018");
    CHECK(normalize_answer("  Boston   College ") == "boston college");
    CHECK(normalize_answer("An Apple a Day") == "apple day");
    CHECK(normalize_answer("") == "");
    CHECK(normalize_answer("the") == "");
}

TEST_CASE("normalize_answer is idempotent") {
    for (const char* s : {"The Eagles!", "a B c", "U.S. Open", "  x  y  "}) {
        std::string once = normalize_answer(s);
        CHECK(normalize_answer(once) == once);
    }
}

TEST_CASE("enumerate_spans finds repeated tokens") {
    std::vector<std::string> tokens = {"2018", "was", "before", "2018"};
    auto spans = enumerate_spans(tokens, "2018");
    REQUIRE(spans.size() == 2);
    CHECK(spans[0] == std::pair<int, int>{0, 0});
    CHECK(spans[1] == std::pair<int, int>{3, 3});
}

TEST_CASE("enumerate_spans matches multi-token answers") {
    std::vector<std::string> tokens = {"new", "york", "jets"};
    auto spans = enumerate_spans(tokens, "new york");
    REQUIRE(spans.size() == 1);
    CHECK(spans[0] == std::pair<int, int>{0, 1});
}

TEST_CASE("enumerate_spans respects token order") {
    std::vector<std::string> tokens = {"york", "new"};
    CHECK(enumerate_spans(tokens, "new york").empty());
}

TEST_CASE("enumerate_spans skips article tokens inside a match") {
    std::vector<std::string> tokens = {"lord", "of", "the", "rings", "film"};
    auto spans = enumerate_spans(tokens, "Lord of the Rings");
    REQUIRE(spans.size() == 1);
    CHECK(spans[0] == std::pair<int, int>{0, 3});
}

TEST_CASE("enumerate_spans is greedy and non-overlapping") {
    std::vector<std::string> tokens = {"x", "x", "x"};
    auto spans = enumerate_spans(tokens, "x x");
    REQUIRE(spans.size() == 1);
    CHECK(spans[0] == std::pair<int, int>{0, 1});
}

TEST_CASE("find_answer_rows collects spans from cells then passages") {
    Corpus corpus = two_row_corpus();
    SupervisionBag bag = find_answer_rows(corpus.table("T1"), corpus, "2018", "Q1");
    auto rows = bag.positive_rows();
    CHECK(rows == std::set<int>{0, 1});
    CHECK(bag.spans_per_row.at(0).size() == 2);  // twice in P1
    CHECK(bag.spans_per_row.at(1).size() == 1);  // once in the year cell
    CHECK(bag.spans_per_row.at(1)[0].source == SpanSource::cell(1));
    CHECK(bag.spans_per_row.at(0)[0].source == SpanSource::passage("P1"));
}

TEST_CASE("find_answer_rows returns an empty bag when the answer is absent") {
    Corpus corpus = two_row_corpus();
    SupervisionBag bag = find_answer_rows(corpus.table("T1"), corpus, "absent answer");
    CHECK(bag.empty());
    CHECK(bag.positive_rows().empty());
}

TEST_CASE("matching is normalization-invariant") {
    Corpus corpus = two_row_corpus();
    const Table& t = corpus.table("T1");
    for (const char* answer : {"2018", "The Giants!", "giANts"}) {
        SupervisionBag direct = find_answer_rows(t, corpus, answer);
        SupervisionBag via_norm = find_answer_rows(t, corpus, normalize_answer(answer));
        CHECK(direct.positive_rows() == via_norm.positive_rows());
        for (const auto& [row, spans] : direct.spans_per_row) {
            CHECK(spans.size() == via_norm.spans_per_row.at(row).size());
        }
    }
}

TEST_CASE("adding a passage to a row can only grow its span list") {
    Corpus corpus = two_row_corpus();
    SupervisionBag before = find_answer_rows(corpus.table("T1"), corpus, "2018");

    Corpus grown;
    grown.add_passage({"P1", "Season", "the 2018 season started after the 2018 draft"});
    grown.add_passage({"P2", "Other", "nothing relevant here"});
    grown.add_passage({"P4", "More", "another 2018 mention"});
    Table t = corpus.table("T1");
    t.rows[0][1].links.push_back("P4");
    grown.add_table(std::move(t));

    SupervisionBag after = find_answer_rows(grown.table("T1"), grown, "2018");
    for (int row : before.positive_rows()) {
        CHECK(after.positive_rows().count(row) == 1);
        CHECK(after.spans_per_row.at(row).size() >= before.spans_per_row.at(row).size());
    }
}

TEST_CASE("every SpanRef surface normalizes to the normalized answer") {
    Corpus corpus = two_row_corpus();
    for (const char* answer : {"2018", "Giants", "the 2018 season"}) {
        SupervisionBag bag = find_answer_rows(corpus.table("T1"), corpus, answer);
        for (const auto& [row, spans] : bag.spans_per_row) {
            for (const SpanRef& span : spans) {
                CHECK(normalize_answer(span.surface) == normalize_answer(answer));
                CHECK(span.start <= span.end);
            }
        }
    }
}

TEST_CASE("ambiguity_stats counts bag sizes") {
    std::vector<SupervisionBag> bags(3);
    bags[0].question_id = "a";
    bags[0].spans_per_row[0] = {SpanRef{}};
    bags[1].question_id = "b";
    bags[1].spans_per_row[2] = {SpanRef{}};
    bags[2].question_id = "c";
    bags[2].spans_per_row[0] = {SpanRef{}};
    bags[2].spans_per_row[1] = {SpanRef{}};

    AmbiguityStats stats = ambiguity_stats(bags);
    CHECK(stats.total == 3);
    CHECK(stats.percent(1) == doctest::Approx(66.6667).epsilon(0.001));
    CHECK(stats.percent(2) == doctest::Approx(33.3333).epsilon(0.001));
    CHECK(stats.multi_row_fraction() == doctest::Approx(1.0 / 3));
}

TEST_CASE("multi-span rate follows the selected row") {
    std::vector<SupervisionBag> bags(2);
    bags[0].question_id = "a";
    bags[0].spans_per_row[0] = {SpanRef{}, SpanRef{}};  // two spans in row 0
    bags[0].spans_per_row[1] = {SpanRef{}};
    bags[1].question_id = "b";
    bags[1].spans_per_row[0] = {SpanRef{}};

    // default selection: lowest positive row
    CHECK(ambiguity_stats(bags).multi_span_rate() == doctest::Approx(0.5));
    // retriever picked the single-span row instead
    std::map<std::string, int> selected{{"a", 1}};
    CHECK(ambiguity_stats(bags, selected).multi_span_rate() == doctest::Approx(0.0));
}

TEST_CASE("empty bags are excluded from the multi-span denominator") {
    std::vector<SupervisionBag> bags(2);
    bags[0].question_id = "a";
    bags[1].question_id = "b";
    bags[1].spans_per_row[0] = {SpanRef{}, SpanRef{}};
    AmbiguityStats stats = ambiguity_stats(bags);
    CHECK(stats.answerable == 1);
    CHECK(stats.multi_span_rate() == doctest::Approx(1.0));
}
