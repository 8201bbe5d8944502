#pragma once

#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace ttqa {

struct Passage {
    std::string id;
    std::string title;
    std::string text;
};

struct Cell {
    std::string text;
    std::vector<std::string> links;  // passage ids
};

struct Table {
    std::string id;
    std::string meta;  // title + caption + other metadata, space-joined
    std::vector<std::string> headers;
    std::vector<std::vector<Cell>> rows;

    size_t columns() const { return headers.size(); }
};

struct Question {
    std::string id;
    std::string text;
    std::optional<std::string> answer_text;
    std::optional<std::string> table_id;
};

// One table row plus its linked passages: the unit the retriever scores.
struct RetrievalUnit {
    std::string table_id;
    int row_index = 0;
    std::vector<Cell> cells;
    std::vector<std::string> linked_passages;  // deduplicated union, cell order preserved
};

class Corpus {
   public:
    void add_passage(Passage p);
    void add_table(Table t);

    const std::vector<Table>& tables() const { return tables_; }
    const std::vector<Passage>& passages() const { return passages_; }

    const Table* find_table(const std::string& id) const;
    const Passage* find_passage(const std::string& id) const;
    const Table& table(const std::string& id) const;      // throws DataError if absent
    const Passage& passage(const std::string& id) const;  // throws DataError if absent

    // Closed-world check: every cell link must resolve. Error messages use
    // 1-based row/column coordinates.
    void validate_links() const;

   private:
    std::vector<Table> tables_;
    std::vector<Passage> passages_;
    std::unordered_map<std::string, size_t> table_by_id_;
    std::unordered_map<std::string, size_t> passage_by_id_;
};

Corpus load_corpus(const std::string& tables_path, const std::string& passages_path);

std::vector<Question> load_questions(const std::string& path);

std::vector<RetrievalUnit> split_table(const Table& t);
RetrievalUnit make_unit(const Table& t, int row);

// JSON Lines writers; output round-trips through the loaders above.
void save_tables(const Corpus& corpus, const std::string& path);
void save_passages(const Corpus& corpus, const std::string& path);
void save_questions(const std::vector<Question>& questions, const std::string& path);

}  // namespace ttqa
