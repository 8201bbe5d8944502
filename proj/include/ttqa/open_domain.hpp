#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "ttqa/corpus.hpp"

namespace ttqa {

// Inverted index with BM25 scoring (k1/b configurable, Lucene-style
// non-negative idf so adding a query term occurrence never lowers a score).
class Bm25Index {
   public:
    Bm25Index() = default;
    Bm25Index(double k1, double b) : k1_(k1), b_(b) {}

    void add_document(const std::string& doc_id, const std::vector<std::string>& tokens);

    // Top-k documents by score, descending; ties by ascending doc id. With
    // pad = true, zero-score documents fill the tail in id order.
    std::vector<std::pair<std::string, double>> query(const std::vector<std::string>& terms,
                                                      size_t k, bool pad = false) const;

    double score(const std::vector<std::string>& terms, const std::string& doc_id) const;

    size_t doc_count() const { return doc_ids_.size(); }
    int doc_freq(const std::string& term) const;
    double avg_doc_length() const;
    double k1() const { return k1_; }
    double b() const { return b_; }

    void save(const std::string& path, const std::string& format_tag,
              const std::string& config_hash) const;
    static Bm25Index load(const std::string& path, const std::string& format_tag);

   private:
    double idf(const std::string& term) const;
    double score_doc(size_t doc, const std::map<std::string, int>& term_tfs,
                     const std::vector<std::pair<std::string, int>>& query_tfs) const;

    double k1_ = 1.2;
    double b_ = 0.75;
    std::vector<std::string> doc_ids_;
    std::vector<int> doc_lengths_;
    std::map<std::string, size_t> doc_index_;
    // term -> (doc index -> term frequency)
    std::map<std::string, std::map<size_t, int>> postings_;
    long long total_length_ = 0;
};

// Table document: meta, [TAB-META], then per row [ROW] with [HDR] header
// [CEL] cell pairs. Delimiters are atomic tokens.
std::vector<std::string> linearize_table(const Table& t);

struct TableIndex {
    Bm25Index index;
};

struct PassageIndex {
    Bm25Index index;
};

TableIndex build_table_index(const Corpus& corpus, double k1 = 1.2, double b = 0.75);
PassageIndex build_passage_index(const Corpus& corpus, double k1 = 1.2, double b = 0.75);

std::vector<std::pair<std::string, double>> retrieve_tables(const Question& q,
                                                            const TableIndex& index, int k);

// Hook for plugging a query expansion model in front of the linker.
using QueryAugmenter = std::function<std::vector<std::string>(const std::string& cell_text)>;

// Per-cell top-n passages by BM25 over the cell text. Empty cells contribute
// nothing. When an augmenter is given, each generated query retrieves n more.
std::vector<std::vector<std::string>> link_row_passages(const Table& t, int row,
                                                        const PassageIndex& index, int n,
                                                        const QueryAugmenter* augmenter = nullptr);

// Retrieves a pool, drops the gold table, samples uniformly from the top-m
// survivors. Seed-deterministic.
std::string hard_negative_mining(const Question& q, const std::string& gold_table_id,
                                 const TableIndex& index, int pool_size, int top_m,
                                 uint64_t seed);

}  // namespace ttqa
