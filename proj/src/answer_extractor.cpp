#include "ttqa/answer_extractor.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "json.hpp"
#include "ttqa/common.hpp"

namespace ttqa {

using nlohmann::json;

namespace {

uint64_t feature_id(const std::string& name) { return fnv1a64(name); }

const char* segment_name(SegmentTag::Kind kind) {
    switch (kind) {
        case SegmentTag::Kind::Question: return "seg_q";
        case SegmentTag::Kind::Header: return "seg_hdr";
        case SegmentTag::Kind::Cell: return "seg_cell";
        case SegmentTag::Kind::Meta: return "seg_meta";
        case SegmentTag::Kind::Passage: return "seg_psg";
        case SegmentTag::Kind::Separator: return "seg_sep";
    }
    return "seg_sep";
}

constexpr int kWindow = 4;

bool candidate_token(const SegmentTag& tag) {
    return tag.kind == SegmentTag::Kind::Cell || tag.kind == SegmentTag::Kind::Passage;
}

}  // namespace

std::vector<FeatureVector> token_features(const TokenSequence& ctx, const Question& q) {
    std::set<std::string> q_types;
    for (const auto& tok : tokenize(q.text)) q_types.insert(tok);

    size_t n = ctx.size();
    std::vector<char> in_q(n, 0);
    for (size_t i = 0; i < n; ++i) in_q[i] = q_types.count(ctx.tokens[i]) ? 1 : 0;

    // positions of cell tokens in columns whose header shares a question token
    std::vector<int> matching_cell_positions;
    std::set<int> matching_columns;
    for (size_t i = 0; i < n; ++i) {
        if (ctx.origin[i].kind == SegmentTag::Kind::Header && in_q[i]) {
            matching_columns.insert(ctx.origin[i].column);
        }
    }
    for (size_t i = 0; i < n; ++i) {
        if (ctx.origin[i].kind == SegmentTag::Kind::Cell &&
            matching_columns.count(ctx.origin[i].column)) {
            matching_cell_positions.push_back(static_cast<int>(i));
        }
    }

    std::vector<FeatureVector> out(n);
    for (size_t i = 0; i < n; ++i) {
        FeatureVector& f = out[i];
        if (in_q[i]) f[feature_id("in_q")] = 1.0;
        if (i > 0 && in_q[i - 1]) f[feature_id("prev_q")] = 1.0;
        if (i + 1 < n && in_q[i + 1]) f[feature_id("next_q")] = 1.0;

        int window_hits = 0;
        for (int j = static_cast<int>(i) - kWindow; j <= static_cast<int>(i) + kWindow; ++j) {
            if (j < 0 || j >= static_cast<int>(n) || j == static_cast<int>(i)) continue;
            window_hits += in_q[static_cast<size_t>(j)];
        }
        if (window_hits > 0) {
            f[feature_id("win")] = static_cast<double>(window_hits) / (2 * kWindow);
        }
        f[feature_id(segment_name(ctx.origin[i].kind))] = 1.0;

        if (!matching_cell_positions.empty()) {
            int best = std::numeric_limits<int>::max();
            for (int pos : matching_cell_positions) {
                best = std::min(best, std::abs(pos - static_cast<int>(i)));
            }
            f[feature_id("hdr_prox")] = 1.0 / (1.0 + best);
        }
    }
    return out;
}

namespace {

double dot(const std::map<uint64_t, double>& weights, const FeatureVector& x, double bias) {
    double z = bias;
    for (const auto& [id, value] : x) {
        auto it = weights.find(id);
        if (it != weights.end()) z += it->second * value;
    }
    return z;
}

}  // namespace

TokenScores score_tokens(const TokenSequence& ctx, const Question& q,
                         const SpanScorerModel& model) {
    auto features = token_features(ctx, q);
    TokenScores scores;
    scores.start.reserve(features.size());
    scores.end.reserve(features.size());
    for (const FeatureVector& f : features) {
        scores.start.push_back(dot(model.start_weights, f, model.start_bias));
        scores.end.push_back(dot(model.end_weights, f, model.end_bias));
    }
    return scores;
}

std::vector<ScoredSpan> score_spans(const Question& q, const TokenSequence& ctx,
                                    const SpanScorerModel& model, int k, int max_answer_len) {
    if (k < 1) throw DataError("score_spans: k must be >= 1");
    if (ctx.size() == 0) throw DataError("score_spans: empty context");
    TokenScores scores = score_tokens(ctx, q, model);

    struct Candidate {
        int start, end;
        double score;
    };
    std::vector<Candidate> candidates;
    size_t n = ctx.size();
    for (size_t i = 0; i < n; ++i) {
        if (!candidate_token(ctx.origin[i])) continue;
        for (size_t j = i; j < n && j < i + static_cast<size_t>(max_answer_len); ++j) {
            // the whole span must stay inside one cell or one passage
            if (!candidate_token(ctx.origin[j]) || !(ctx.origin[j] == ctx.origin[i])) break;
            candidates.push_back({static_cast<int>(i), static_cast<int>(j),
                                  scores.start[i] + scores.end[j]});
        }
    }

    std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
        if (a.score != b.score) return a.score > b.score;
        if (a.start != b.start) return a.start < b.start;
        return a.end < b.end;
    });
    if (candidates.size() > static_cast<size_t>(k)) candidates.resize(static_cast<size_t>(k));

    std::vector<ScoredSpan> out;
    out.reserve(candidates.size());
    for (const Candidate& c : candidates) {
        ScoredSpan span;
        span.start = c.start;
        span.end = c.end;
        for (int i = c.start; i <= c.end; ++i) {
            if (!span.surface.empty()) span.surface.push_back(' ');
            span.surface += ctx.tokens[static_cast<size_t>(i)];
        }
        span.provenance = *ctx.provenance(static_cast<size_t>(c.start));
        span.start_score = scores.start[static_cast<size_t>(c.start)];
        span.end_score = scores.end[static_cast<size_t>(c.end)];
        out.push_back(std::move(span));
    }
    return out;
}

namespace {

void softmax_grad(const std::vector<double>& scores, int gold,
                  const std::vector<FeatureVector>& features,
                  std::map<uint64_t, double>& grad_weights, double& grad_bias, double& loss) {
    double max_score = *std::max_element(scores.begin(), scores.end());
    double z = 0.0;
    for (double s : scores) z += std::exp(s - max_score);
    double log_z = std::log(z) + max_score;
    loss += log_z - scores[static_cast<size_t>(gold)];

    for (size_t i = 0; i < scores.size(); ++i) {
        double p = std::exp(scores[i] - log_z);
        double coef = p - (static_cast<int>(i) == gold ? 1.0 : 0.0);
        for (const auto& [id, value] : features[i]) grad_weights[id] += coef * value;
        grad_bias += coef;
    }
}

}  // namespace

SpanGradient span_loss_and_grad(const SpanScorerModel& model,
                                const std::vector<FeatureVector>& features,
                                std::pair<int, int> gold) {
    SpanGradient g;
    std::vector<double> start_scores, end_scores;
    start_scores.reserve(features.size());
    end_scores.reserve(features.size());
    for (const FeatureVector& f : features) {
        start_scores.push_back(dot(model.start_weights, f, model.start_bias));
        end_scores.push_back(dot(model.end_weights, f, model.end_bias));
    }
    softmax_grad(start_scores, gold.first, features, g.grad_start, g.grad_start_bias, g.loss);
    softmax_grad(end_scores, gold.second, features, g.grad_end, g.grad_end_bias, g.loss);
    return g;
}

namespace {

struct PreparedExtraction {
    std::vector<FeatureVector> features;
    std::pair<int, int> gold;
};

SpanScorerModel train_on(const std::vector<PreparedExtraction>& data,
                         const ExtractorTrainConfig& config) {
    SpanScorerModel model;
    model.seed = config.seed;
    model.epochs = config.epochs;
    model.learning_rate = config.learning_rate;
    model.mst = config.mst;

    Rng rng(config.seed);
    std::vector<size_t> order(data.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        rng.shuffle(order);
        for (size_t idx : order) {
            const PreparedExtraction& inst = data[idx];
            SpanGradient g = span_loss_and_grad(model, inst.features, inst.gold);
            for (const auto& [id, dv] : g.grad_start) {
                model.start_weights[id] -= config.learning_rate * dv;
            }
            for (const auto& [id, dv] : g.grad_end) {
                model.end_weights[id] -= config.learning_rate * dv;
            }
            model.start_bias -= config.learning_rate * g.grad_start_bias;
            model.end_bias -= config.learning_rate * g.grad_end_bias;
        }
    }
    return model;
}

}  // namespace

MstResult train_answer_extractor_mst(const std::vector<ExtractionInstance>& instances,
                                     const ExtractorTrainConfig& config) {
    if (instances.empty()) throw DataError("train_answer_extractor: no instances");

    std::vector<std::vector<FeatureVector>> features(instances.size());
    for (size_t i = 0; i < instances.size(); ++i) {
        const ExtractionInstance& inst = instances[i];
        if (inst.gold_spans.empty()) {
            throw DataError("extraction instance without gold spans: " + inst.question_id);
        }
        Question q{inst.question_id, inst.question_text, std::nullopt, std::nullopt};
        features[i] = token_features(inst.context, q);
    }

    MstResult result;
    std::vector<size_t> single, multi;
    for (size_t i = 0; i < instances.size(); ++i) {
        (instances[i].gold_spans.size() == 1 ? single : multi).push_back(i);
    }
    result.n_single = static_cast<int>(single.size());
    result.n_multi = static_cast<int>(multi.size());

    // final label per instance; single-span instances pass through unchanged
    std::vector<std::pair<int, int>> label(instances.size());
    for (size_t i : single) label[i] = instances[i].gold_spans.front();

    if (!config.mst) {
        for (size_t i : multi) {
            label[i] = instances[i].gold_spans.front();  // leftmost span control
            result.denoised[i] = label[i];
        }
    } else {
        if (single.empty()) {
            throw DataError("no single-span instances for initial model");
        }
        std::vector<PreparedExtraction> easy;
        easy.reserve(single.size());
        for (size_t i : single) easy.push_back({features[i], label[i]});
        SpanScorerModel initial = train_on(easy, config);

        for (size_t i : multi) {
            const ExtractionInstance& inst = instances[i];
            Question q{inst.question_id, inst.question_text, std::nullopt, std::nullopt};
            TokenScores scores = score_tokens(inst.context, q, initial);
            std::pair<int, int> best = inst.gold_spans.front();
            double best_score = -std::numeric_limits<double>::infinity();
            for (const auto& span : inst.gold_spans) {
                double s = scores.start[static_cast<size_t>(span.first)] +
                           scores.end[static_cast<size_t>(span.second)];
                if (s > best_score) {
                    best_score = s;
                    best = span;
                }
            }
            label[i] = best;
            result.denoised[i] = best;
        }
    }

    std::vector<PreparedExtraction> all;
    all.reserve(instances.size());
    for (size_t i = 0; i < instances.size(); ++i) all.push_back({features[i], label[i]});
    result.model = train_on(all, config);
    return result;
}

int select_feedback_row(const SupervisionBag& bag, const RowScorerModel& rr_model,
                        const Question& q, const Table& t, const RetrievalEnv& env) {
    auto rows = bag.positive_rows();
    if (rows.empty()) throw DataError("select_feedback_row: empty bag");
    int best = -1;
    double best_score = -std::numeric_limits<double>::infinity();
    for (int r : rows) {
        double s = score_row(q, t, r, rr_model, env);
        if (s > best_score) {
            best_score = s;
            best = r;
        }
    }
    return best;
}

TokenSequence build_extraction_context(const Question& q, const Table& t, int row,
                                       const RetrievalEnv& env) {
    RetrievalUnit unit = make_unit(t, row);
    auto filtered = filter_passages(q, unit, *env.corpus, env.scorer, env.ctx);
    return linearize_for_extraction(t, row, filtered, *env.corpus);
}

std::vector<ExtractionInstance> build_extraction_instances(
    const std::vector<Question>& questions, const Corpus& corpus,
    const std::vector<SupervisionBag>& bags, const RowScorerModel* rr_model,
    const RetrievalEnv& env, bool retriever_feedback) {
    std::map<std::string, const SupervisionBag*> bag_by_id;
    for (const SupervisionBag& b : bags) bag_by_id[b.question_id] = &b;

    std::vector<ExtractionInstance> out;
    for (const Question& q : questions) {
        auto it = bag_by_id.find(q.id);
        if (it == bag_by_id.end() || it->second->empty() || !q.table_id) continue;
        const SupervisionBag& bag = *it->second;
        const Table& t = corpus.table(*q.table_id);

        std::vector<int> rows;
        if (retriever_feedback) {
            if (!rr_model) throw DataError("retriever feedback requires a trained row retriever");
            rows.push_back(select_feedback_row(bag, *rr_model, q, t, env));
        } else {
            for (int r : bag.positive_rows()) rows.push_back(r);
        }

        for (int row : rows) {
            ExtractionInstance inst;
            inst.question_id = q.id;
            inst.question_text = q.text;
            inst.table_id = t.id;
            inst.row = row;
            inst.context = build_extraction_context(q, t, row, env);
            for (const SpanRef& span : bag.spans_per_row.at(row)) {
                auto mapped = map_span_to_context(inst.context, span.source, span.start, span.end);
                if (mapped) inst.gold_spans.push_back(*mapped);
            }
            std::sort(inst.gold_spans.begin(), inst.gold_spans.end());
            if (!inst.gold_spans.empty()) out.push_back(std::move(inst));
        }
    }
    return out;
}

namespace {

json weights_to_json(const std::map<uint64_t, double>& weights) {
    json out = json::object();
    for (const auto& [id, w] : weights) out[std::to_string(id)] = w;
    return out;
}

std::map<uint64_t, double> weights_from_json(const json& j) {
    std::map<uint64_t, double> out;
    for (const auto& [key, value] : j.items()) out[std::stoull(key)] = value.get<double>();
    return out;
}

}  // namespace

void save_span_model(const SpanScorerModel& model, const std::string& path,
                     const std::string& config_hash) {
    json j = {
        {"format", "ttqa.span_scorer.v1"},
        {"config_hash", config_hash},
        {"start_bias", model.start_bias},
        {"end_bias", model.end_bias},
        {"start_weights", weights_to_json(model.start_weights)},
        {"end_weights", weights_to_json(model.end_weights)},
        {"meta",
         {{"seed", model.seed},
          {"epochs", model.epochs},
          {"learning_rate", model.learning_rate},
          {"mst", model.mst}}},
    };
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path);
    out << j.dump(2) << "\n";
}

SpanScorerModel load_span_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw MissingArtifactError("missing span model " + path + "; run train-ae first");
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded() || j.value("format", "") != "ttqa.span_scorer.v1") {
        throw DataError("not a span scorer checkpoint: " + path);
    }
    SpanScorerModel model;
    model.start_bias = j["start_bias"].get<double>();
    model.end_bias = j["end_bias"].get<double>();
    model.start_weights = weights_from_json(j["start_weights"]);
    model.end_weights = weights_from_json(j["end_weights"]);
    const json& meta = j["meta"];
    model.seed = meta["seed"].get<uint64_t>();
    model.epochs = meta["epochs"].get<int>();
    model.learning_rate = meta["learning_rate"].get<double>();
    model.mst = meta["mst"].get<bool>();
    return model;
}

}  // namespace ttqa
