#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "ttqa/corpus.hpp"
#include "ttqa/supervision.hpp"

namespace ttqa {

int exact_match(const std::string& pred, const std::string& gold);

// Token-multiset F1 after normalization; both empty -> 1, one empty -> 0.
double f1_token(const std::string& pred, const std::string& gold);

struct Prediction {
    std::string question_id;
    std::string answer;
    std::string table_id;
    int row = -1;
    std::optional<SpanSource> provenance;
    double row_score = 0.0;
    double start_score = 0.0;
    double end_score = 0.0;
    double combined_score = 0.0;
};

struct BucketScore {
    int count = 0;
    double em_sum = 0.0;
    double f1_sum = 0.0;
    double em() const { return count == 0 ? 0.0 : 100.0 * em_sum / count; }
    double f1() const { return count == 0 ? 0.0 : 100.0 * f1_sum / count; }
};

struct EvalReport {
    BucketScore total;
    BucketScore table_bucket;    // predicted span came from a cell
    BucketScore passage_bucket;  // predicted span came from a passage
    int unscored = 0;            // gold questions without answer_text
    std::optional<double> row_accuracy;       // set when bags are supplied
    std::map<int, double> hits_at;            // set when a retrieval run is supplied
};

// Ranked table retrieval output for one question, used for HITS@K.
struct RetrievalRun {
    std::string question_id;
    std::vector<std::string> table_ids;  // descending score
};

EvalReport evaluate(const std::vector<Prediction>& predictions,
                    const std::vector<Question>& gold,
                    const std::vector<SupervisionBag>* bags = nullptr,
                    const std::vector<RetrievalRun>* retrieval = nullptr,
                    const std::vector<int>& hits_ks = {1, 5, 10});

std::string format_report_table(const EvalReport& report);

}  // namespace ttqa
