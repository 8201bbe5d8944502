#include "ttqa/metrics.hpp"

#include <algorithm>
#include <iomanip>
#include <sstream>

#include "ttqa/common.hpp"
#include "ttqa/context.hpp"

namespace ttqa {

int exact_match(const std::string& pred, const std::string& gold) {
    return normalize_answer(pred) == normalize_answer(gold) ? 1 : 0;
}

double f1_token(const std::string& pred, const std::string& gold) {
    auto pred_tokens = tokenize(normalize_answer(pred));
    auto gold_tokens = tokenize(normalize_answer(gold));
    if (pred_tokens.empty() && gold_tokens.empty()) return 1.0;
    if (pred_tokens.empty() || gold_tokens.empty()) return 0.0;

    std::map<std::string, int> gold_counts;
    for (const auto& tok : gold_tokens) ++gold_counts[tok];
    int overlap = 0;
    for (const auto& tok : pred_tokens) {
        auto it = gold_counts.find(tok);
        if (it != gold_counts.end() && it->second > 0) {
            --it->second;
            ++overlap;
        }
    }
    if (overlap == 0) return 0.0;
    double precision = static_cast<double>(overlap) / pred_tokens.size();
    double recall = static_cast<double>(overlap) / gold_tokens.size();
    return 2.0 * precision * recall / (precision + recall);
}

EvalReport evaluate(const std::vector<Prediction>& predictions, const std::vector<Question>& gold,
                    const std::vector<SupervisionBag>* bags,
                    const std::vector<RetrievalRun>* retrieval, const std::vector<int>& hits_ks) {
    std::map<std::string, const Prediction*> by_id;
    for (const Prediction& p : predictions) {
        if (!by_id.emplace(p.question_id, &p).second) {
            throw DataError("duplicate prediction id " + p.question_id);
        }
    }
    std::set<std::string> gold_ids;
    for (const Question& q : gold) gold_ids.insert(q.id);
    for (const Prediction& p : predictions) {
        if (!gold_ids.count(p.question_id)) {
            throw DataError("prediction for unknown question id " + p.question_id);
        }
    }

    EvalReport report;
    for (const Question& q : gold) {
        if (!q.answer_text) {
            ++report.unscored;
            continue;
        }
        auto it = by_id.find(q.id);
        double em = 0.0, f1 = 0.0;
        const Prediction* pred = it == by_id.end() ? nullptr : it->second;
        if (pred) {
            em = exact_match(pred->answer, *q.answer_text);
            f1 = f1_token(pred->answer, *q.answer_text);
        }
        ++report.total.count;
        report.total.em_sum += em;
        report.total.f1_sum += f1;
        if (pred && pred->provenance) {
            BucketScore& bucket = pred->provenance->kind == SpanSource::Kind::Cell
                                      ? report.table_bucket
                                      : report.passage_bucket;
            ++bucket.count;
            bucket.em_sum += em;
            bucket.f1_sum += f1;
        }
    }

    if (bags) {
        std::map<std::string, const SupervisionBag*> bag_by_id;
        for (const SupervisionBag& b : *bags) bag_by_id[b.question_id] = &b;
        int hit = 0, scored = 0;
        for (const Prediction& p : predictions) {
            auto it = bag_by_id.find(p.question_id);
            if (it == bag_by_id.end() || it->second->empty()) continue;
            ++scored;
            if (it->second->positive_rows().count(p.row)) ++hit;
        }
        if (scored > 0) report.row_accuracy = 100.0 * hit / scored;
    }

    if (retrieval) {
        std::map<std::string, const Question*> gold_by_id;
        for (const Question& q : gold) gold_by_id[q.id] = &q;
        int scored = 0;
        std::map<int, int> hits;
        for (const RetrievalRun& run : *retrieval) {
            auto it = gold_by_id.find(run.question_id);
            if (it == gold_by_id.end() || !it->second->table_id) continue;
            ++scored;
            for (int k : hits_ks) {
                size_t depth = std::min(run.table_ids.size(), static_cast<size_t>(k));
                for (size_t i = 0; i < depth; ++i) {
                    if (run.table_ids[i] == *it->second->table_id) {
                        ++hits[k];
                        break;
                    }
                }
            }
        }
        if (scored > 0) {
            for (int k : hits_ks) report.hits_at[k] = 100.0 * hits[k] / scored;
        }
    }
    return report;
}

std::string format_report_table(const EvalReport& report) {
    std::ostringstream out;
    out << std::fixed << std::setprecision(2);
    out << std::setw(10) << "" << std::setw(8) << "EM" << std::setw(8) << "F1" << std::setw(8)
        << "N" << "\n";
    auto row = [&](const char* name, const BucketScore& b) {
        out << std::setw(10) << name << std::setw(8) << b.em() << std::setw(8) << b.f1()
            << std::setw(8) << b.count << "\n";
    };
    if (report.table_bucket.count > 0) row("Table", report.table_bucket);
    if (report.passage_bucket.count > 0) row("Passage", report.passage_bucket);
    row("Total", report.total);
    if (report.row_accuracy) {
        out << "row accuracy: " << *report.row_accuracy << "\n";
    }
    for (const auto& [k, v] : report.hits_at) {
        out << "HITS@" << k << ": " << v << "\n";
    }
    if (report.unscored > 0) {
        out << "unscored (no gold answer): " << report.unscored << "\n";
    }
    return out.str();
}

}  // namespace ttqa
