#pragma once

#include <array>
#include <string>
#include <vector>

#include "ttqa/answer_extractor.hpp"
#include "ttqa/corpus.hpp"
#include "ttqa/row_retriever.hpp"

namespace ttqa {

// Linear combination weights over (row score, span start score, span end
// score). Grid points live on the simplex: non-negative, summing to 1.
struct RerankWeights {
    std::array<double, 3> w = {1.0, 0.0, 0.0};
    int k_rows = 5;
    int k_spans = 5;
};

double combine_score(const std::array<double, 3>& w, double row_score, double start_score,
                     double end_score);

struct RerankCandidate {
    double row_score = 0.0;
    ScoredSpan span;  // carries the row index and start/end scores
};

// All simplex points with the given step, in lexicographic order.
// step 0.1 yields 66 vectors.
std::vector<std::array<double, 3>> simplex_grid(double step = 0.1);

// Top-K rows x top-K' spans for one question, in (row rank, span rank) order.
std::vector<RerankCandidate> collect_candidates(const Question& q, const Table& t,
                                                const RowScorerModel& rr,
                                                const SpanScorerModel& ae, int k_rows,
                                                int k_spans, const RetrievalEnv& env,
                                                int max_answer_len = 30);

// Highest combined score; ties resolved by candidate order.
const RerankCandidate* pick_best(const std::vector<RerankCandidate>& candidates,
                                 const std::array<double, 3>& w);

struct TuneResult {
    RerankWeights weights;
    double dev_em = 0.0;
    double dev_f1 = 0.0;
};

// Grid search over pinned module outputs: per-question candidate sets plus the
// gold answers. EM decides, F1 breaks ties, then the lexicographically
// smallest weight vector.
TuneResult tune_weights_on_candidates(const std::vector<std::vector<RerankCandidate>>& candidates,
                                      const std::vector<std::string>& gold_answers,
                                      const std::vector<std::array<double, 3>>& grid, int k_rows,
                                      int k_spans);

// End-to-end tuning on a development fold (questions must carry gold answers
// and table ids).
TuneResult tune_weights(const std::vector<Question>& dev, const Corpus& corpus,
                        const RowScorerModel& rr, const SpanScorerModel& ae,
                        const std::vector<std::array<double, 3>>& grid, int k_rows, int k_spans,
                        const RetrievalEnv& env, int max_answer_len = 30, unsigned jobs = 1);

// The joint argmax over K x K' candidates with all component scores attached.
ScoredSpan answer_question(const Question& q, const Table& t, const RowScorerModel& rr,
                           const SpanScorerModel& ae, const RerankWeights& weights,
                           const RetrievalEnv& env, int max_answer_len = 30,
                           double* row_score_out = nullptr, double* combined_out = nullptr);

void save_rerank_weights(const RerankWeights& weights, const std::string& path,
                         const std::string& config_hash, double dev_em, double dev_f1);
RerankWeights load_rerank_weights(const std::string& path);

}  // namespace ttqa
