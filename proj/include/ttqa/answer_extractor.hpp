#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ttqa/context.hpp"
#include "ttqa/corpus.hpp"
#include "ttqa/row_retriever.hpp"
#include "ttqa/supervision.hpp"

namespace ttqa {

struct SpanScorerModel {
    std::map<uint64_t, double> start_weights;
    std::map<uint64_t, double> end_weights;
    double start_bias = 0.0;
    double end_bias = 0.0;

    uint64_t seed = 0;
    int epochs = 0;
    double learning_rate = 0.0;
    bool mst = true;
};

// Per-token features for the linear start/end scorers: question overlap of the
// token and its neighbourhood, segment type, proximity to a cell whose header
// matches the question.
std::vector<FeatureVector> token_features(const TokenSequence& ctx, const Question& q);

struct TokenScores {
    std::vector<double> start;
    std::vector<double> end;
};

TokenScores score_tokens(const TokenSequence& ctx, const Question& q,
                         const SpanScorerModel& model);

struct ScoredSpan {
    int row = -1;
    int start = 0;
    int end = 0;  // inclusive
    std::string surface;
    SpanSource provenance;
    double start_score = 0.0;
    double end_score = 0.0;

    double span_score() const { return start_score + end_score; }
};

// Top-k spans by start+end score over candidates of length <= max_answer_len
// whose tokens all lie in one cell or one passage. Ties break by earlier
// start, then shorter span.
std::vector<ScoredSpan> score_spans(const Question& q, const TokenSequence& ctx,
                                    const SpanScorerModel& model, int k, int max_answer_len = 30);

struct ExtractionInstance {
    std::string question_id;
    std::string question_text;
    std::string table_id;
    int row = -1;
    TokenSequence context;
    std::vector<std::pair<int, int>> gold_spans;  // context coordinates, ordered
};

struct ExtractorTrainConfig {
    int epochs = 5;
    double learning_rate = 0.2;
    uint64_t seed = 13;
    bool mst = true;  // false: first-span control
    int max_answer_len = 30;
};

struct SpanGradient {
    double loss = 0.0;
    std::map<uint64_t, double> grad_start;
    double grad_start_bias = 0.0;
    std::map<uint64_t, double> grad_end;
    double grad_end_bias = 0.0;
};

// Cross-entropy of the start and end distributions against one gold span.
SpanGradient span_loss_and_grad(const SpanScorerModel& model,
                                const std::vector<FeatureVector>& features,
                                std::pair<int, int> gold);

struct MstResult {
    SpanScorerModel model;
    int n_single = 0;
    int n_multi = 0;
    // chosen span per multi-span instance, keyed by instance index
    std::map<size_t, std::pair<int, int>> denoised;
};

// Two-stage denoising: train an initial model on single-span instances, use it
// to pick the best gold span of each multi-span instance, retrain from scratch
// on the combined set. With config.mst == false, the leftmost span is used.
MstResult train_answer_extractor_mst(const std::vector<ExtractionInstance>& instances,
                                     const ExtractorTrainConfig& config);

// argmax of the row retriever score over the bag's rows; ties by lower index.
int select_feedback_row(const SupervisionBag& bag, const RowScorerModel& rr_model,
                        const Question& q, const Table& t, const RetrievalEnv& env);

// Builds extractor training data. With retriever feedback one instance per
// question (the retriever's best bag row); without it, one per bag row.
std::vector<ExtractionInstance> build_extraction_instances(
    const std::vector<Question>& questions, const Corpus& corpus,
    const std::vector<SupervisionBag>& bags, const RowScorerModel* rr_model,
    const RetrievalEnv& env, bool retriever_feedback);

TokenSequence build_extraction_context(const Question& q, const Table& t, int row,
                                       const RetrievalEnv& env);

void save_span_model(const SpanScorerModel& model, const std::string& path,
                     const std::string& config_hash);
SpanScorerModel load_span_model(const std::string& path);

}  // namespace ttqa
