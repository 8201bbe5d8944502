#include "doctest.h"
#include "ttqa/common.hpp"
#include "ttqa/metrics.hpp"

using namespace ttqa;

TEST_CASE("exact match after normalization") {
    CHECK(exact_match("The Eagles", "eagles") == 1);
    CHECK(exact_match("2017", "2018") == 0);
    CHECK(exact_match("", "x") == 0);
    CHECK(exact_match("", "") == 1);
    CHECK(exact_match("Boston  College!", "boston college") == 1);
}

TEST_CASE("token f1 on hand-computed fixtures") {
    // "the" drops out: pred tokens {2018, season}, gold {2018}
    // precision 1/2, recall 1 -> f1 = 2/3
    CHECK(f1_token("the 2018 season", "2018") == doctest::Approx(0.6667).epsilon(1e-3));
    CHECK(f1_token("identical answer", "identical answer") == doctest::Approx(1.0));
    CHECK(f1_token("alpha beta", "gamma delta") == doctest::Approx(0.0));
    // multiset counts matter: pred {x, x}, gold {x} -> precision 1/2, recall 1
    CHECK(f1_token("x x", "x") == doctest::Approx(2.0 / 3));
    // precision 2/3, recall 2/2 -> 0.8
    CHECK(f1_token("new york city", "new york") == doctest::Approx(0.8));
    // precision 1/3, recall 1/2 -> 0.4
    CHECK(f1_token("e b c", "b d") == doctest::Approx(0.4));
    // "a" is an article: pred {b, c}, gold {b, d} -> 0.5
    CHECK(f1_token("a b c", "b d") == doctest::Approx(0.5));
}

TEST_CASE("f1 empty-string edges") {
    CHECK(f1_token("", "") == doctest::Approx(1.0));
    CHECK(f1_token("", "x") == doctest::Approx(0.0));
    CHECK(f1_token("x", "") == doctest::Approx(0.0));
    // normalization can empty a non-empty string
    CHECK(f1_token("the", "the") == doctest::Approx(1.0));
    CHECK(f1_token("the", "x") == doctest::Approx(0.0));
}

TEST_CASE("exact match implies f1 = 1") {
    const char* pairs[][2] = {{"The Eagles", "eagles"},
                              {"2018", "2018"},
                              {"a  big   Win", "big win"},
                              {"U.S.", "US"}};
    for (const auto& [pred, gold] : pairs) {
        REQUIRE(exact_match(pred, gold) == 1);
        CHECK(f1_token(pred, gold) == doctest::Approx(1.0));
    }
}

TEST_CASE("metrics are symmetric after normalization") {
    const char* pairs[][2] = {{"the 2018 season", "2018"},
                              {"new york city", "new york"},
                              {"alpha", "beta"},
                              {"x y", "y x"}};
    for (const auto& [a, b] : pairs) {
        CHECK(f1_token(a, b) == doctest::Approx(f1_token(b, a)));
        CHECK(exact_match(a, b) == exact_match(b, a));
    }
}

namespace {

Prediction make_pred(const std::string& id, const std::string& answer, SpanSource prov,
                     int row = 0) {
    Prediction p;
    p.question_id = id;
    p.answer = answer;
    p.table_id = "T1";
    p.row = row;
    p.provenance = prov;
    return p;
}

Question make_gold(const std::string& id, const std::string& answer) {
    return Question{id, "?", answer, "T1"};
}

}  // namespace

TEST_CASE("evaluate averages and buckets by predicted provenance") {
    std::vector<Prediction> preds = {
        make_pred("q1", "right", SpanSource::cell(0)),
        make_pred("q2", "wrong", SpanSource::passage("P1")),
    };
    std::vector<Question> gold = {make_gold("q1", "right"), make_gold("q2", "other")};
    EvalReport report = evaluate(preds, gold);
    CHECK(report.total.count == 2);
    CHECK(report.total.em() == doctest::Approx(50.0));
    CHECK(report.table_bucket.count == 1);
    CHECK(report.table_bucket.em() == doctest::Approx(100.0));
    CHECK(report.passage_bucket.count == 1);
    CHECK(report.passage_bucket.em() == doctest::Approx(0.0));
}

TEST_CASE("all-cell predictions leave the passage bucket absent") {
    std::vector<Prediction> preds = {make_pred("q1", "x", SpanSource::cell(0))};
    std::vector<Question> gold = {make_gold("q1", "x")};
    EvalReport report = evaluate(preds, gold);
    CHECK(report.passage_bucket.count == 0);
    std::string table = format_report_table(report);
    CHECK(table.find("Passage") == std::string::npos);
}

TEST_CASE("missing predictions score zero") {
    std::vector<Prediction> preds = {make_pred("q1", "x", SpanSource::cell(0))};
    std::vector<Question> gold = {make_gold("q1", "x"), make_gold("q2", "y")};
    EvalReport report = evaluate(preds, gold);
    CHECK(report.total.count == 2);
    CHECK(report.total.em() == doctest::Approx(50.0));
}

TEST_CASE("duplicate prediction ids are an error") {
    std::vector<Prediction> preds = {make_pred("q1", "x", SpanSource::cell(0)),
                                     make_pred("q1", "y", SpanSource::cell(0))};
    std::vector<Question> gold = {make_gold("q1", "x")};
    CHECK_THROWS_AS(evaluate(preds, gold), DataError);
}

TEST_CASE("prediction for an unknown question is an error") {
    std::vector<Prediction> preds = {make_pred("q9", "x", SpanSource::cell(0))};
    std::vector<Question> gold = {make_gold("q1", "x")};
    CHECK_THROWS_AS(evaluate(preds, gold), DataError);
}

TEST_CASE("bucket means recombine into the total") {
    std::vector<Prediction> preds = {
        make_pred("q1", "right", SpanSource::cell(0)),
        make_pred("q2", "right", SpanSource::cell(0)),
        make_pred("q3", "wrong", SpanSource::passage("P1")),
    };
    std::vector<Question> gold = {make_gold("q1", "right"), make_gold("q2", "right"),
                                  make_gold("q3", "other")};
    EvalReport r = evaluate(preds, gold);
    double recombined = (r.table_bucket.em() * r.table_bucket.count +
                         r.passage_bucket.em() * r.passage_bucket.count) /
                        (r.table_bucket.count + r.passage_bucket.count);
    CHECK(r.total.em() == doctest::Approx(recombined));
}

TEST_CASE("row accuracy uses the supervision bags") {
    std::vector<Prediction> preds = {make_pred("q1", "x", SpanSource::cell(0), 2),
                                     make_pred("q2", "y", SpanSource::cell(0), 0)};
    std::vector<Question> gold = {make_gold("q1", "x"), make_gold("q2", "y")};
    std::vector<SupervisionBag> bags(2);
    bags[0].question_id = "q1";
    bags[0].spans_per_row[2] = {SpanRef{}};
    bags[1].question_id = "q2";
    bags[1].spans_per_row[5] = {SpanRef{}};
    EvalReport report = evaluate(preds, gold, &bags);
    REQUIRE(report.row_accuracy.has_value());
    CHECK(*report.row_accuracy == doctest::Approx(50.0));
}

TEST_CASE("hits@k is computed against gold table ids and is monotone") {
    std::vector<Question> gold = {Question{"q1", "?", "a", "T3"}, Question{"q2", "?", "b", "T1"}};
    std::vector<RetrievalRun> runs = {{"q1", {"T1", "T2", "T3"}}, {"q2", {"T1", "T9"}}};
    EvalReport report = evaluate({}, gold, nullptr, &runs, {1, 2, 3});
    CHECK(report.hits_at[1] == doctest::Approx(50.0));
    CHECK(report.hits_at[2] == doctest::Approx(50.0));
    CHECK(report.hits_at[3] == doctest::Approx(100.0));
    double prev = 0.0;
    for (const auto& [k, v] : report.hits_at) {
        CHECK(v >= prev);
        prev = v;
    }
}

TEST_CASE("questions without gold answers are reported unscored") {
    std::vector<Prediction> preds = {make_pred("q1", "x", SpanSource::cell(0))};
    std::vector<Question> gold = {make_gold("q1", "x"), Question{"q2", "?", std::nullopt, "T1"}};
    EvalReport report = evaluate(preds, gold);
    CHECK(report.total.count == 1);
    CHECK(report.unscored == 1);
}
