#include <cstdio>
#include <fstream>

#include "doctest.h"
#include "ttqa/common.hpp"
#include "ttqa/corpus.hpp"

using namespace ttqa;

namespace {

struct TempFile {
    std::string path;
    explicit TempFile(const std::string& name, const std::string& content)
        : path("/tmp/ttqa_test_" + name) {
        std::ofstream out(path);
        out << content;
    }
    ~TempFile() { std::remove(path.c_str()); }
};

const char* kPassages =
    R"({"id": "P1", "title": "One", "text": "first passage text"}
{"id": "P2", "title": "Two", "text": "second passage text"}
{"id": "P3", "title": "Three", "text": "third passage text"}
)";

const char* kTables =
    R"({"id": "T1", "meta": "a test table", "headers": ["Name", "Year"], "rows": [[{"text": "alpha", "links": ["P1"]}, {"text": "2001", "links": []}], [{"text": "beta", "links": ["P2", "P3"]}, {"text": "2002", "links": ["P2"]}]]}
)";

}  // namespace

TEST_CASE("load_corpus round-trips well-formed input") {
    TempFile tables("tables.jsonl", kTables);
    TempFile passages("passages.jsonl", kPassages);
    Corpus corpus = load_corpus(tables.path, passages.path);
    CHECK(corpus.tables().size() == 1);
    CHECK(corpus.passages().size() == 3);
    const Table& t = corpus.table("T1");
    CHECK(t.headers.size() == 2);
    CHECK(t.rows.size() == 2);
    CHECK(t.rows[1][0].links == std::vector<std::string>{"P2", "P3"});
}

TEST_CASE("missing field names the line") {
    TempFile tables("tables_bad.jsonl",
                    R"({"id": "T1", "meta": "m", "rows": []}
)");
    TempFile passages("passages_ok.jsonl", kPassages);
    CHECK_THROWS_WITH_AS(load_corpus(tables.path, passages.path),
                         doctest::Contains("line 1: missing field headers"), DataError);
}

TEST_CASE("dangling passage link names table and cell") {
    TempFile tables("tables_dangling.jsonl",
                    R"({"id": "T9", "meta": "m", "headers": ["H"], "rows": [[{"text": "x", "links": ["P9"]}]]}
)");
    TempFile passages("passages_short.jsonl", kPassages);
    try {
        load_corpus(tables.path, passages.path);
        FAIL("expected dangling-link error");
    } catch (const DataError& e) {
        std::string msg = e.what();
        CHECK(msg.find("T9") != std::string::npos);
        CHECK(msg.find("(1,1)") != std::string::npos);  // 1-based coordinates
        CHECK(msg.find("P9") != std::string::npos);
    }
}

TEST_CASE("malformed json names the line") {
    TempFile tables("tables_malformed.jsonl", "{not json\n");
    TempFile passages("passages_ok2.jsonl", kPassages);
    CHECK_THROWS_WITH_AS(load_corpus(tables.path, passages.path),
                         doctest::Contains("line 1: malformed record"), DataError);
}

TEST_CASE("ragged row is rejected") {
    Corpus corpus;
    Table t;
    t.id = "T1";
    t.meta = "m";
    t.headers = {"A", "B"};
    t.rows = {{Cell{"x", {}}}};
    CHECK_THROWS_AS(corpus.add_table(std::move(t)), DataError);
}

TEST_CASE("split_table yields one unit per row in order") {
    Table t;
    t.id = "T1";
    t.meta = "m";
    t.headers = {"H"};
    t.rows = {{Cell{"a", {}}}, {Cell{"b", {}}}, {Cell{"c", {}}}};
    auto units = split_table(t);
    REQUIRE(units.size() == 3);
    for (int i = 0; i < 3; ++i) {
        CHECK(units[static_cast<size_t>(i)].row_index == i);
        CHECK(units[static_cast<size_t>(i)].table_id == "T1");
    }
}

TEST_CASE("split_table deduplicates links preserving cell order") {
    Table t;
    t.id = "T1";
    t.meta = "m";
    t.headers = {"A", "B"};
    t.rows = {{Cell{"x", {"P1"}}, Cell{"y", {"P1", "P2"}}}};
    auto units = split_table(t);
    REQUIRE(units.size() == 1);
    CHECK(units[0].linked_passages == std::vector<std::string>{"P1", "P2"});
}

TEST_CASE("row with no links yields empty union") {
    Table t;
    t.id = "T1";
    t.meta = "m";
    t.headers = {"A"};
    t.rows = {{Cell{"x", {}}}};
    CHECK(split_table(t)[0].linked_passages.empty());
}

TEST_CASE("split_table is a partition of the table body") {
    Table t;
    t.id = "T1";
    t.meta = "m";
    t.headers = {"A", "B"};
    t.rows = {{Cell{"a", {}}, Cell{"b", {}}}, {Cell{"c", {}}, Cell{"d", {}}}};
    auto units = split_table(t);
    std::vector<std::vector<Cell>> reassembled;
    for (const auto& u : units) reassembled.push_back(u.cells);
    REQUIRE(reassembled.size() == t.rows.size());
    for (size_t r = 0; r < t.rows.size(); ++r) {
        REQUIRE(reassembled[r].size() == t.rows[r].size());
        for (size_t c = 0; c < t.rows[r].size(); ++c) {
            CHECK(reassembled[r][c].text == t.rows[r][c].text);
        }
    }
}

TEST_CASE("save then load is identity on the data model") {
    TempFile tables("tables_rt.jsonl", kTables);
    TempFile passages("passages_rt.jsonl", kPassages);
    Corpus corpus = load_corpus(tables.path, passages.path);

    save_tables(corpus, "/tmp/ttqa_test_tables_out.jsonl");
    save_passages(corpus, "/tmp/ttqa_test_passages_out.jsonl");
    Corpus reloaded =
        load_corpus("/tmp/ttqa_test_tables_out.jsonl", "/tmp/ttqa_test_passages_out.jsonl");

    REQUIRE(reloaded.tables().size() == corpus.tables().size());
    REQUIRE(reloaded.passages().size() == corpus.passages().size());
    for (size_t i = 0; i < corpus.passages().size(); ++i) {
        CHECK(reloaded.passages()[i].id == corpus.passages()[i].id);
        CHECK(reloaded.passages()[i].title == corpus.passages()[i].title);
        CHECK(reloaded.passages()[i].text == corpus.passages()[i].text);
    }
    const Table& a = corpus.tables()[0];
    const Table& b = reloaded.tables()[0];
    CHECK(a.meta == b.meta);
    CHECK(a.headers == b.headers);
    REQUIRE(a.rows.size() == b.rows.size());
    for (size_t r = 0; r < a.rows.size(); ++r) {
        for (size_t c = 0; c < a.rows[r].size(); ++c) {
            CHECK(a.rows[r][c].text == b.rows[r][c].text);
            CHECK(a.rows[r][c].links == b.rows[r][c].links);
        }
    }
    std::remove("/tmp/ttqa_test_tables_out.jsonl");
    std::remove("/tmp/ttqa_test_passages_out.jsonl");
}

TEST_CASE("questions load with optional fields") {
    TempFile questions("questions.jsonl",
                       R"({"id": "Q1", "text": "who", "answer_text": "alpha", "table_id": "T1"}
{"id": "Q2", "text": "what"}
)");
    auto qs = load_questions(questions.path);
    REQUIRE(qs.size() == 2);
    CHECK(*qs[0].answer_text == "alpha");
    CHECK(*qs[0].table_id == "T1");
    CHECK(!qs[1].answer_text.has_value());
    CHECK(!qs[1].table_id.has_value());
}
