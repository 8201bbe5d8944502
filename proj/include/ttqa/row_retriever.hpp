#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "ttqa/context.hpp"
#include "ttqa/corpus.hpp"
#include "ttqa/supervision.hpp"

namespace ttqa {

// Sparse hashed features; absent keys are zero.
using FeatureVector = std::map<uint64_t, double>;

// Question/row lexical-overlap features over a retrieval input sequence.
// Stands in for a neural [CLS] embedding behind the same contract:
// deterministic in (sequence, question).
FeatureVector featurize(const TokenSequence& x, const Question& q);

struct RowScorerModel {
    std::map<uint64_t, double> weights;
    double bias = 0.0;

    // training metadata
    uint64_t seed = 0;
    int epochs = 0;
    double learning_rate = 0.0;
    std::vector<int> curriculum;
    bool mil = true;

    double raw(const FeatureVector& x) const;
    double probability(const FeatureVector& x) const;  // sigmoid of raw, in (0,1)
};

// min over positive rows of -ln p + sum over negatives of -ln(1-p).
// Probabilities are clamped to [1e-7, 1-1e-7] before the logs.
double mil_loss(const std::map<int, double>& bag_scores, const std::set<int>& positives);

// Same scores treated as independently positive/negative (the no-MIL control).
double naive_loss(const std::map<int, double>& bag_scores, const std::set<int>& positives);

struct RowTrainInstance {
    std::string question_id;
    std::string question_text;
    std::string table_id;
    SupervisionBag bag;
    std::map<int, TokenSequence> linearizations;  // every row of the table
};

struct RowTrainConfig {
    int epochs = 5;
    double learning_rate = 0.2;
    uint64_t seed = 13;
    // max admitted |B| per epoch; epochs past the end admit everything (0 = all).
    std::vector<int> curriculum = {1, 1};
    bool mil = true;
};

struct BagGradient {
    double loss = 0.0;
    std::map<uint64_t, double> grad_weights;
    double grad_bias = 0.0;
};

// Loss and gradient for one (question, table) instance. Under MIL the gradient
// flows through the argmax positive and all negatives; max_bag > 0 drops the
// positive term of larger bags (curriculum). Used by the trainer and by the
// finite-difference tests.
BagGradient bag_loss_and_grad(const RowScorerModel& model,
                              const std::map<int, FeatureVector>& rows,
                              const std::set<int>& positives, bool mil, int max_bag = 0);

RowScorerModel train_row_retriever(const std::vector<RowTrainInstance>& instances,
                                   const RowTrainConfig& config);

struct RetrievalEnv;

// One instance per question with a non-empty bag, linearizing every table row.
std::vector<RowTrainInstance> build_row_instances(const std::vector<Question>& questions,
                                                  const Corpus& corpus,
                                                  const std::vector<SupervisionBag>& bags,
                                                  const RetrievalEnv& env);

struct RetrievalEnv {
    const Corpus* corpus = nullptr;
    const SimilarityScorer* scorer = nullptr;
    ContextConfig ctx;
};

TokenSequence build_retrieval_input(const Question& q, const Table& t, int row,
                                    const RetrievalEnv& env);

double score_row(const Question& q, const Table& t, int row, const RowScorerModel& model,
                 const RetrievalEnv& env);

// Top-k rows by probability, descending; ties by ascending row index.
std::vector<std::pair<int, double>> retrieve_rows(const Question& q, const Table& t,
                                                  const RowScorerModel& model, int k,
                                                  const RetrievalEnv& env);

void save_row_model(const RowScorerModel& model, const std::string& path,
                    const std::string& config_hash);
RowScorerModel load_row_model(const std::string& path);

}  // namespace ttqa
