#include "ttqa/reranker.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "json.hpp"
#include "ttqa/common.hpp"
#include "ttqa/metrics.hpp"

namespace ttqa {

using nlohmann::json;

double combine_score(const std::array<double, 3>& w, double row_score, double start_score,
                     double end_score) {
    return w[0] * row_score + w[1] * start_score + w[2] * end_score;
}

std::vector<std::array<double, 3>> simplex_grid(double step) {
    if (step <= 0.0 || step > 1.0) throw DataError("simplex_grid: step must be in (0, 1]");
    int n = static_cast<int>(std::lround(1.0 / step));
    std::vector<std::array<double, 3>> grid;
    for (int i = 0; i <= n; ++i) {
        for (int j = 0; i + j <= n; ++j) {
            int k = n - i - j;
            grid.push_back({static_cast<double>(i) / n, static_cast<double>(j) / n,
                            static_cast<double>(k) / n});
        }
    }
    return grid;
}

std::vector<RerankCandidate> collect_candidates(const Question& q, const Table& t,
                                                const RowScorerModel& rr,
                                                const SpanScorerModel& ae, int k_rows,
                                                int k_spans, const RetrievalEnv& env,
                                                int max_answer_len) {
    if (t.rows.empty()) throw DataError("answer_question: table " + t.id + " has no rows");
    std::vector<RerankCandidate> out;
    for (const auto& [row, row_score] : retrieve_rows(q, t, rr, k_rows, env)) {
        TokenSequence ctx = build_extraction_context(q, t, row, env);
        for (ScoredSpan& span : score_spans(q, ctx, ae, k_spans, max_answer_len)) {
            span.row = row;
            out.push_back({row_score, std::move(span)});
        }
    }
    return out;
}

const RerankCandidate* pick_best(const std::vector<RerankCandidate>& candidates,
                                 const std::array<double, 3>& w) {
    const RerankCandidate* best = nullptr;
    double best_score = -std::numeric_limits<double>::infinity();
    for (const RerankCandidate& c : candidates) {
        double s = combine_score(w, c.row_score, c.span.start_score, c.span.end_score);
        if (!best || s > best_score) {
            best = &c;
            best_score = s;
        }
    }
    return best;
}

TuneResult tune_weights_on_candidates(const std::vector<std::vector<RerankCandidate>>& candidates,
                                      const std::vector<std::string>& gold_answers,
                                      const std::vector<std::array<double, 3>>& grid, int k_rows,
                                      int k_spans) {
    if (candidates.size() != gold_answers.size()) {
        throw DataError("tune_weights: candidates and gold answers differ in length");
    }
    if (candidates.empty()) throw DataError("tune_weights: empty development fold");
    if (grid.empty()) throw DataError("tune_weights: empty grid");

    TuneResult best;
    bool first = true;
    for (const auto& w : grid) {
        double em_sum = 0.0, f1_sum = 0.0;
        for (size_t i = 0; i < candidates.size(); ++i) {
            const RerankCandidate* pick = pick_best(candidates[i], w);
            if (!pick) continue;  // no candidates: scores 0
            em_sum += exact_match(pick->span.surface, gold_answers[i]);
            f1_sum += f1_token(pick->span.surface, gold_answers[i]);
        }
        double em = em_sum / candidates.size();
        double f1 = f1_sum / candidates.size();
        // grid is scanned in lexicographic order, so strict improvement keeps
        // the smallest winning vector
        if (first || em > best.dev_em || (em == best.dev_em && f1 > best.dev_f1)) {
            best.weights.w = w;
            best.dev_em = em;
            best.dev_f1 = f1;
            first = false;
        }
    }
    best.weights.k_rows = k_rows;
    best.weights.k_spans = k_spans;
    return best;
}

TuneResult tune_weights(const std::vector<Question>& dev, const Corpus& corpus,
                        const RowScorerModel& rr, const SpanScorerModel& ae,
                        const std::vector<std::array<double, 3>>& grid, int k_rows, int k_spans,
                        const RetrievalEnv& env, int max_answer_len, unsigned jobs) {
    std::vector<const Question*> usable;
    for (const Question& q : dev) {
        if (q.answer_text && q.table_id) usable.push_back(&q);
    }
    if (usable.empty()) throw DataError("tune_weights: no dev questions with gold answers");

    std::vector<std::vector<RerankCandidate>> candidates(usable.size());
    std::vector<std::string> golds(usable.size());
    parallel_for(usable.size(), jobs, [&](size_t i) {
        const Question& q = *usable[i];
        golds[i] = *q.answer_text;
        candidates[i] = collect_candidates(q, corpus.table(*q.table_id), rr, ae, k_rows, k_spans,
                                           env, max_answer_len);
    });
    return tune_weights_on_candidates(candidates, golds, grid, k_rows, k_spans);
}

ScoredSpan answer_question(const Question& q, const Table& t, const RowScorerModel& rr,
                           const SpanScorerModel& ae, const RerankWeights& weights,
                           const RetrievalEnv& env, int max_answer_len, double* row_score_out,
                           double* combined_out) {
    auto candidates =
        collect_candidates(q, t, rr, ae, weights.k_rows, weights.k_spans, env, max_answer_len);
    const RerankCandidate* best = pick_best(candidates, weights.w);
    if (!best) throw DataError("answer_question: no candidate spans for table " + t.id);
    if (row_score_out) *row_score_out = best->row_score;
    if (combined_out) {
        *combined_out =
            combine_score(weights.w, best->row_score, best->span.start_score, best->span.end_score);
    }
    return best->span;
}

void save_rerank_weights(const RerankWeights& weights, const std::string& path,
                         const std::string& config_hash, double dev_em, double dev_f1) {
    json j = {
        {"format", "ttqa.rerank_weights.v1"},
        {"config_hash", config_hash},
        {"w", weights.w},
        {"k_rows", weights.k_rows},
        {"k_spans", weights.k_spans},
        {"dev_em", dev_em},
        {"dev_f1", dev_f1},
    };
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path);
    out << j.dump(2) << "\n";
}

RerankWeights load_rerank_weights(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw MissingArtifactError("missing reranker weights " + path + "; run tune-reranker first");
    }
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded() || j.value("format", "") != "ttqa.rerank_weights.v1") {
        throw DataError("not a reranker weights file: " + path);
    }
    RerankWeights weights;
    auto w = j["w"].get<std::vector<double>>();
    if (w.size() != 3) throw DataError("reranker weights must have 3 components");
    std::copy(w.begin(), w.end(), weights.w.begin());
    weights.k_rows = j["k_rows"].get<int>();
    weights.k_spans = j["k_spans"].get<int>();
    return weights;
}

}  // namespace ttqa
