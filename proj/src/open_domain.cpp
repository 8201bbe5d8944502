#include "ttqa/open_domain.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "json.hpp"
#include "ttqa/common.hpp"
#include "ttqa/context.hpp"

namespace ttqa {

using nlohmann::json;

void Bm25Index::add_document(const std::string& doc_id, const std::vector<std::string>& tokens) {
    if (doc_index_.count(doc_id)) throw DataError("duplicate document id " + doc_id);
    size_t idx = doc_ids_.size();
    doc_index_[doc_id] = idx;
    doc_ids_.push_back(doc_id);
    doc_lengths_.push_back(static_cast<int>(tokens.size()));
    total_length_ += static_cast<long long>(tokens.size());
    for (const std::string& tok : tokens) ++postings_[tok][idx];
}

int Bm25Index::doc_freq(const std::string& term) const {
    auto it = postings_.find(term);
    return it == postings_.end() ? 0 : static_cast<int>(it->second.size());
}

double Bm25Index::avg_doc_length() const {
    return doc_ids_.empty() ? 0.0 : static_cast<double>(total_length_) / doc_ids_.size();
}

double Bm25Index::idf(const std::string& term) const {
    double n = static_cast<double>(doc_ids_.size());
    double df = doc_freq(term);
    return std::log(1.0 + (n - df + 0.5) / (df + 0.5));
}

std::vector<std::pair<std::string, double>> Bm25Index::query(
    const std::vector<std::string>& terms, size_t k, bool pad) const {
    std::map<std::string, int> query_tf;
    for (const std::string& t : terms) ++query_tf[t];

    std::map<size_t, double> scores;
    for (const auto& [term, qtf] : query_tf) {
        auto it = postings_.find(term);
        if (it == postings_.end()) continue;
        double term_idf = idf(term);
        double avg = avg_doc_length();
        for (const auto& [doc, tf] : it->second) {
            double norm = k1_ * (1.0 - b_ + b_ * doc_lengths_[doc] / avg);
            scores[doc] += term_idf * (tf * (k1_ + 1.0)) / (tf + norm);
        }
    }

    std::vector<std::pair<std::string, double>> ranked;
    ranked.reserve(scores.size());
    for (const auto& [doc, score] : scores) ranked.emplace_back(doc_ids_[doc], score);
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });

    if (pad && ranked.size() < k) {
        std::set<std::string> present;
        for (const auto& [id, s] : ranked) present.insert(id);
        std::vector<std::string> rest;
        for (const std::string& id : doc_ids_) {
            if (!present.count(id)) rest.push_back(id);
        }
        std::sort(rest.begin(), rest.end());
        for (const std::string& id : rest) {
            if (ranked.size() >= k) break;
            ranked.emplace_back(id, 0.0);
        }
    }
    if (ranked.size() > k) ranked.resize(k);
    return ranked;
}

double Bm25Index::score(const std::vector<std::string>& terms, const std::string& doc_id) const {
    auto it = doc_index_.find(doc_id);
    if (it == doc_index_.end()) throw DataError("unknown document id " + doc_id);
    size_t doc = it->second;
    std::map<std::string, int> query_tf;
    for (const std::string& t : terms) ++query_tf[t];
    double total = 0.0;
    for (const auto& [term, qtf] : query_tf) {
        auto post = postings_.find(term);
        if (post == postings_.end()) continue;
        auto entry = post->second.find(doc);
        if (entry == post->second.end()) continue;
        double avg = avg_doc_length();
        double norm = k1_ * (1.0 - b_ + b_ * doc_lengths_[doc] / avg);
        total += idf(term) * (entry->second * (k1_ + 1.0)) / (entry->second + norm);
    }
    return total;
}

void Bm25Index::save(const std::string& path, const std::string& format_tag,
                     const std::string& config_hash) const {
    json postings = json::object();
    for (const auto& [term, docs] : postings_) {
        json entries = json::array();
        for (const auto& [doc, tf] : docs) entries.push_back({doc, tf});
        postings[term] = std::move(entries);
    }
    json j = {
        {"format", format_tag},  {"config_hash", config_hash}, {"k1", k1_},
        {"b", b_},               {"doc_ids", doc_ids_},        {"doc_lengths", doc_lengths_},
        {"postings", postings},
    };
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path);
    out << j.dump() << "\n";
}

Bm25Index Bm25Index::load(const std::string& path, const std::string& format_tag) {
    std::ifstream in(path);
    if (!in) throw MissingArtifactError("missing index " + path + "; run index-tables first");
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded() || j.value("format", "") != format_tag) {
        throw DataError("not a " + format_tag + " file: " + path);
    }
    Bm25Index index(j["k1"].get<double>(), j["b"].get<double>());
    index.doc_ids_ = j["doc_ids"].get<std::vector<std::string>>();
    index.doc_lengths_ = j["doc_lengths"].get<std::vector<int>>();
    for (size_t i = 0; i < index.doc_ids_.size(); ++i) {
        index.doc_index_[index.doc_ids_[i]] = i;
        index.total_length_ += index.doc_lengths_[i];
    }
    for (const auto& [term, entries] : j["postings"].items()) {
        for (const auto& e : entries) {
            index.postings_[term][e[0].get<size_t>()] = e[1].get<int>();
        }
    }
    return index;
}

std::vector<std::string> linearize_table(const Table& t) {
    std::vector<std::string> doc;
    for (auto& tok : tokenize(t.meta)) doc.push_back(std::move(tok));
    doc.push_back("[TAB-META]");
    for (const auto& row : t.rows) {
        doc.push_back("[ROW]");
        for (size_t c = 0; c < row.size(); ++c) {
            doc.push_back("[HDR]");
            for (auto& tok : tokenize(t.headers[c])) doc.push_back(std::move(tok));
            doc.push_back("[CEL]");
            for (auto& tok : tokenize(row[c].text)) doc.push_back(std::move(tok));
        }
    }
    return doc;
}

TableIndex build_table_index(const Corpus& corpus, double k1, double b) {
    TableIndex out{Bm25Index(k1, b)};
    for (const Table& t : corpus.tables()) {
        out.index.add_document(t.id, linearize_table(t));
    }
    return out;
}

PassageIndex build_passage_index(const Corpus& corpus, double k1, double b) {
    PassageIndex out{Bm25Index(k1, b)};
    for (const Passage& p : corpus.passages()) {
        std::vector<std::string> doc = tokenize(p.title);
        for (auto& tok : tokenize(p.text)) doc.push_back(std::move(tok));
        out.index.add_document(p.id, doc);
    }
    return out;
}

std::vector<std::pair<std::string, double>> retrieve_tables(const Question& q,
                                                            const TableIndex& index, int k) {
    if (k < 1) throw DataError("retrieve_tables: k must be >= 1");
    return index.index.query(tokenize(q.text), static_cast<size_t>(k), /*pad=*/true);
}

std::vector<std::vector<std::string>> link_row_passages(const Table& t, int row,
                                                        const PassageIndex& index, int n,
                                                        const QueryAugmenter* augmenter) {
    if (n < 1) throw DataError("link_row_passages: n must be >= 1");
    const auto& cells = t.rows[static_cast<size_t>(row)];
    std::vector<std::vector<std::string>> per_cell;
    per_cell.reserve(cells.size());
    for (const Cell& cell : cells) {
        std::vector<std::string> links;
        auto terms = tokenize(cell.text);
        if (!terms.empty()) {
            for (const auto& [pid, score] : index.index.query(terms, static_cast<size_t>(n))) {
                links.push_back(pid);
            }
            if (augmenter) {
                for (const std::string& generated : (*augmenter)(cell.text)) {
                    for (const auto& [pid, score] :
                         index.index.query(tokenize(generated), static_cast<size_t>(n))) {
                        if (std::find(links.begin(), links.end(), pid) == links.end()) {
                            links.push_back(pid);
                        }
                    }
                }
            }
        }
        per_cell.push_back(std::move(links));
    }
    return per_cell;
}

std::string hard_negative_mining(const Question& q, const std::string& gold_table_id,
                                 const TableIndex& index, int pool_size, int top_m,
                                 uint64_t seed) {
    if (pool_size < 1) throw DataError("hard_negative_mining: pool size must be >= 1");
    auto pool = index.index.query(tokenize(q.text), static_cast<size_t>(pool_size));
    std::vector<std::string> survivors;
    for (const auto& [id, score] : pool) {
        if (id != gold_table_id) survivors.push_back(id);
    }
    if (survivors.empty()) throw DataError("no hard negative available");
    if (top_m > 0 && survivors.size() > static_cast<size_t>(top_m)) {
        survivors.resize(static_cast<size_t>(top_m));
    }
    Rng rng(seed);
    return survivors[rng.index(survivors.size())];
}

}  // namespace ttqa
