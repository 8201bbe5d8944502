#include "ttqa/corpus.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"
#include "ttqa/common.hpp"

namespace ttqa {

using nlohmann::json;

void Corpus::add_passage(Passage p) {
    if (p.text.empty()) throw DataError("passage " + p.id + ": empty text");
    if (passage_by_id_.count(p.id)) throw DataError("duplicate passage id " + p.id);
    passage_by_id_[p.id] = passages_.size();
    passages_.push_back(std::move(p));
}

void Corpus::add_table(Table t) {
    if (t.headers.empty()) throw DataError("table " + t.id + ": no columns");
    if (t.rows.empty()) throw DataError("table " + t.id + ": no rows");
    for (size_t r = 0; r < t.rows.size(); ++r) {
        if (t.rows[r].size() != t.headers.size()) {
            throw DataError("table " + t.id + ": row " + std::to_string(r + 1) + " has " +
                            std::to_string(t.rows[r].size()) + " cells, expected " +
                            std::to_string(t.headers.size()));
        }
    }
    if (table_by_id_.count(t.id)) throw DataError("duplicate table id " + t.id);
    table_by_id_[t.id] = tables_.size();
    tables_.push_back(std::move(t));
}

const Table* Corpus::find_table(const std::string& id) const {
    auto it = table_by_id_.find(id);
    return it == table_by_id_.end() ? nullptr : &tables_[it->second];
}

const Passage* Corpus::find_passage(const std::string& id) const {
    auto it = passage_by_id_.find(id);
    return it == passage_by_id_.end() ? nullptr : &passages_[it->second];
}

const Table& Corpus::table(const std::string& id) const {
    const Table* t = find_table(id);
    if (!t) throw DataError("unknown table id " + id);
    return *t;
}

const Passage& Corpus::passage(const std::string& id) const {
    const Passage* p = find_passage(id);
    if (!p) throw DataError("unknown passage id " + id);
    return *p;
}

void Corpus::validate_links() const {
    for (const Table& t : tables_) {
        for (size_t r = 0; r < t.rows.size(); ++r) {
            for (size_t c = 0; c < t.rows[r].size(); ++c) {
                for (const std::string& link : t.rows[r][c].links) {
                    if (!find_passage(link)) {
                        throw DataError("table " + t.id + ", cell (" + std::to_string(r + 1) +
                                        "," + std::to_string(c + 1) + "): dangling passage link " +
                                        link);
                    }
                }
            }
        }
    }
}

namespace {

json parse_line(const std::string& line, const std::string& path, size_t lineno) {
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
        throw DataError(path + " line " + std::to_string(lineno) + ": malformed record");
    }
    return j;
}

const json& require_field(const json& j, const char* name, const std::string& path,
                          size_t lineno) {
    auto it = j.find(name);
    if (it == j.end()) {
        throw DataError(path + " line " + std::to_string(lineno) + ": missing field " + name);
    }
    return *it;
}

template <typename Fn>
void for_each_line(const std::string& path, Fn fn) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path);
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        fn(parse_line(line, path, lineno), lineno);
    }
}

Table table_from_json(const json& j, const std::string& path, size_t lineno) {
    Table t;
    t.id = require_field(j, "id", path, lineno).get<std::string>();
    t.meta = require_field(j, "meta", path, lineno).get<std::string>();
    for (const auto& h : require_field(j, "headers", path, lineno)) {
        t.headers.push_back(h.get<std::string>());
    }
    for (const auto& row : require_field(j, "rows", path, lineno)) {
        std::vector<Cell> cells;
        for (const auto& cj : row) {
            Cell cell;
            cell.text = require_field(cj, "text", path, lineno).get<std::string>();
            if (cj.contains("links")) {
                for (const auto& l : cj["links"]) cell.links.push_back(l.get<std::string>());
            }
            cells.push_back(std::move(cell));
        }
        t.rows.push_back(std::move(cells));
    }
    return t;
}

}  // namespace

Corpus load_corpus(const std::string& tables_path, const std::string& passages_path) {
    Corpus corpus;
    for_each_line(passages_path, [&](const json& j, size_t lineno) {
        Passage p;
        p.id = require_field(j, "id", passages_path, lineno).get<std::string>();
        p.title = require_field(j, "title", passages_path, lineno).get<std::string>();
        p.text = require_field(j, "text", passages_path, lineno).get<std::string>();
        corpus.add_passage(std::move(p));
    });
    for_each_line(tables_path, [&](const json& j, size_t lineno) {
        corpus.add_table(table_from_json(j, tables_path, lineno));
    });
    corpus.validate_links();
    return corpus;
}

std::vector<Question> load_questions(const std::string& path) {
    std::vector<Question> out;
    for_each_line(path, [&](const json& j, size_t lineno) {
        Question q;
        q.id = require_field(j, "id", path, lineno).get<std::string>();
        q.text = require_field(j, "text", path, lineno).get<std::string>();
        if (j.contains("answer_text")) q.answer_text = j["answer_text"].get<std::string>();
        if (j.contains("table_id")) q.table_id = j["table_id"].get<std::string>();
        out.push_back(std::move(q));
    });
    return out;
}

RetrievalUnit make_unit(const Table& t, int row) {
    RetrievalUnit u;
    u.table_id = t.id;
    u.row_index = row;
    u.cells = t.rows[static_cast<size_t>(row)];
    for (const Cell& cell : u.cells) {
        for (const std::string& link : cell.links) {
            bool seen = false;
            for (const std::string& existing : u.linked_passages) {
                if (existing == link) {
                    seen = true;
                    break;
                }
            }
            if (!seen) u.linked_passages.push_back(link);
        }
    }
    return u;
}

std::vector<RetrievalUnit> split_table(const Table& t) {
    std::vector<RetrievalUnit> units;
    units.reserve(t.rows.size());
    for (size_t r = 0; r < t.rows.size(); ++r) {
        units.push_back(make_unit(t, static_cast<int>(r)));
    }
    return units;
}

namespace {

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path);
    return out;
}

}  // namespace

void save_tables(const Corpus& corpus, const std::string& path) {
    auto out = open_out(path);
    for (const Table& t : corpus.tables()) {
        json rows = json::array();
        for (const auto& row : t.rows) {
            json cells = json::array();
            for (const Cell& c : row) {
                cells.push_back({{"text", c.text}, {"links", c.links}});
            }
            rows.push_back(std::move(cells));
        }
        json j = {{"id", t.id}, {"meta", t.meta}, {"headers", t.headers}, {"rows", rows}};
        out << j.dump() << "\n";
    }
}

void save_passages(const Corpus& corpus, const std::string& path) {
    auto out = open_out(path);
    for (const Passage& p : corpus.passages()) {
        json j = {{"id", p.id}, {"title", p.title}, {"text", p.text}};
        out << j.dump() << "\n";
    }
}

void save_questions(const std::vector<Question>& questions, const std::string& path) {
    auto out = open_out(path);
    for (const Question& q : questions) {
        json j = {{"id", q.id}, {"text", q.text}};
        if (q.answer_text) j["answer_text"] = *q.answer_text;
        if (q.table_id) j["table_id"] = *q.table_id;
        out << j.dump() << "\n";
    }
}

}  // namespace ttqa
