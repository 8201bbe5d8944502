#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "ttqa/corpus.hpp"
#include "ttqa/metrics.hpp"
#include "ttqa/supervision.hpp"

namespace ttqa {

// Flat key-value configuration. Every hyperparameter that shapes results is a
// named key; output_dir and jobs do not enter the semantic hash.
struct PipelineConfig {
    std::string tables;
    std::string passages;
    std::string train_questions;
    std::string dev_questions;
    std::string test_questions;
    std::string output_dir = "out";

    int budget = 512;
    int k_rows = 5;
    int k_spans = 5;
    double grid_step = 0.1;
    int rr_epochs = 5;
    double rr_learning_rate = 0.2;
    std::vector<int> curriculum = {1, 1};  // max |B| admitted per epoch
    int ae_epochs = 5;
    double ae_learning_rate = 0.2;
    int max_answer_len = 30;
    double bm25_k1 = 1.2;
    double bm25_b = 0.75;
    int link_n = 10;
    int retrieve_k = 5;
    uint64_t seed = 13;

    bool mil = true;
    bool rf = true;
    bool mst = true;
    bool rsr = true;
    bool pf = true;
    bool open_domain = false;

    unsigned jobs = 1;
    bool force = false;

    static PipelineConfig from_file(const std::string& path);
    void set(const std::string& key, const std::string& value);
    std::string semantic_hash() const;
};

// artifact paths inside output_dir
std::string artifact_path(const PipelineConfig& cfg, const std::string& name);

extern const std::vector<std::string> kClosedDomainStages;
extern const std::vector<std::string> kOpenDomainStages;

void stage_ingest(const PipelineConfig& cfg);
void stage_index_tables(const PipelineConfig& cfg);
void stage_retrieve(const PipelineConfig& cfg);
void stage_link(const PipelineConfig& cfg);
void stage_supervise(const PipelineConfig& cfg);
void stage_train_rr(const PipelineConfig& cfg);
void stage_train_ae(const PipelineConfig& cfg);
void stage_tune_reranker(const PipelineConfig& cfg);
void stage_predict(const PipelineConfig& cfg);
EvalReport stage_eval(const PipelineConfig& cfg);

// Runs the named stages in order (empty = the default flow for the mode).
// Throws MissingArtifactError when a stage's inputs have not been produced.
void run_pipeline(const PipelineConfig& cfg, std::vector<std::string> stages = {});

struct AblationRow {
    std::set<std::string> toggles;  // subset of {mil, rf, mst, rsr, pf}
    double em = 0.0;
    double f1 = 0.0;
};

struct AblationMatrix {
    std::vector<AblationRow> rows;
    int duplicates_dropped = 0;
};

AblationMatrix ablation_matrix(const PipelineConfig& base,
                               const std::vector<std::set<std::string>>& toggle_sets);

std::string format_ablation_table(const AblationMatrix& matrix);

// persisted bags with the producing config hash
void save_bags(const std::vector<SupervisionBag>& bags, const std::string& path,
               const std::string& config_hash);
std::vector<SupervisionBag> load_bags(const std::string& path);

void save_predictions(const std::vector<Prediction>& predictions, const std::string& path,
                      const std::string& config_hash);
std::vector<Prediction> load_predictions(const std::string& path, std::string* config_hash_out);

void save_corpus_artifact(const Corpus& corpus, const std::string& path,
                          const std::string& config_hash);
Corpus load_corpus_artifact(const std::string& path);

// Fig-3-style ambiguity histogram plus context-length statistics.
struct DatasetStats {
    AmbiguityStats ambiguity;
    double mean_context_tokens = 0.0;
    double over_budget_fraction = 0.0;  // contexts longer than the budget
    int contexts_measured = 0;
};

DatasetStats dataset_stats(const Corpus& corpus, const std::vector<Question>& questions,
                           int budget, const std::string& rr_model_path = "");

std::string format_stats_table(const DatasetStats& stats);
std::string stats_to_json(const DatasetStats& stats);

}  // namespace ttqa
