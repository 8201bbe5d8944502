#include "ttqa/row_retriever.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "json.hpp"
#include "ttqa/common.hpp"

namespace ttqa {

using nlohmann::json;

namespace {

constexpr double kProbFloor = 1e-7;

double clamp_prob(double p) { return std::clamp(p, kProbFloor, 1.0 - kProbFloor); }

uint64_t feature_id(const std::string& name) { return fnv1a64(name); }

bool is_context_kind(SegmentTag::Kind k) {
    return k == SegmentTag::Kind::Header || k == SegmentTag::Kind::Cell ||
           k == SegmentTag::Kind::Meta || k == SegmentTag::Kind::Passage;
}

}  // namespace

FeatureVector featurize(const TokenSequence& x, const Question& q) {
    std::vector<std::string> q_tokens = tokenize(q.text);
    std::set<std::string> q_types(q_tokens.begin(), q_tokens.end());

    FeatureVector f;
    if (q_types.empty()) return f;

    std::set<std::string> covered;
    std::map<SegmentTag::Kind, std::set<std::string>> per_segment;
    double header_matches = 0.0;

    for (size_t i = 0; i < x.size(); ++i) {
        SegmentTag::Kind kind = x.origin[i].kind;
        if (!is_context_kind(kind)) continue;
        const std::string& tok = x.tokens[i];
        if (q_types.count(tok)) {
            f[feature_id("u:" + tok)] += 1.0;
            covered.insert(tok);
            per_segment[kind].insert(tok);
        }
    }
    // question bigrams occurring in the context, segment breaks excluded
    std::set<std::string> q_bigrams;
    for (size_t i = 0; i + 1 < q_tokens.size(); ++i) {
        q_bigrams.insert(q_tokens[i] + " " + q_tokens[i + 1]);
    }
    for (size_t i = 0; i + 1 < x.size(); ++i) {
        if (!is_context_kind(x.origin[i].kind) || !(x.origin[i] == x.origin[i + 1])) continue;
        std::string bigram = x.tokens[i] + " " + x.tokens[i + 1];
        if (q_bigrams.count(bigram)) f[feature_id("b:" + bigram)] += 1.0;
    }
    for (const std::string& tok : q_tokens) {
        if (per_segment[SegmentTag::Kind::Header].count(tok)) header_matches += 1.0;
    }

    auto segment_overlap = [&](SegmentTag::Kind kind, const char* name) {
        double n = static_cast<double>(per_segment[kind].size());
        if (n > 0.0) f[feature_id(name)] = n;
    };
    segment_overlap(SegmentTag::Kind::Header, "ov_hdr");
    segment_overlap(SegmentTag::Kind::Cell, "ov_cell");
    segment_overlap(SegmentTag::Kind::Meta, "ov_meta");
    segment_overlap(SegmentTag::Kind::Passage, "ov_psg");
    if (header_matches > 0.0) f[feature_id("hdr_match")] = header_matches;
    if (!covered.empty()) {
        f[feature_id("coverage")] = static_cast<double>(covered.size()) / q_types.size();
    }
    return f;
}

double RowScorerModel::raw(const FeatureVector& x) const {
    double z = bias;
    for (const auto& [id, value] : x) {
        auto it = weights.find(id);
        if (it != weights.end()) z += it->second * value;
    }
    return z;
}

double RowScorerModel::probability(const FeatureVector& x) const {
    return clamp_prob(1.0 / (1.0 + std::exp(-raw(x))));
}

double mil_loss(const std::map<int, double>& bag_scores, const std::set<int>& positives) {
    if (positives.empty()) throw DataError("mil_loss: empty positive bag");
    double best_positive = std::numeric_limits<double>::infinity();
    double negatives = 0.0;
    for (const auto& [row, p] : bag_scores) {
        double clamped = clamp_prob(p);
        if (positives.count(row)) {
            best_positive = std::min(best_positive, -std::log(clamped));
        } else {
            negatives += -std::log(1.0 - clamped);
        }
    }
    if (std::isinf(best_positive)) throw DataError("mil_loss: positive rows missing from scores");
    return best_positive + negatives;
}

double naive_loss(const std::map<int, double>& bag_scores, const std::set<int>& positives) {
    if (positives.empty()) throw DataError("naive_loss: empty positive bag");
    double loss = 0.0;
    for (const auto& [row, p] : bag_scores) {
        double clamped = clamp_prob(p);
        loss += positives.count(row) ? -std::log(clamped) : -std::log(1.0 - clamped);
    }
    return loss;
}

BagGradient bag_loss_and_grad(const RowScorerModel& model,
                              const std::map<int, FeatureVector>& rows,
                              const std::set<int>& positives, bool mil, int max_bag) {
    BagGradient out;
    std::map<int, double> probs;
    for (const auto& [row, features] : rows) probs[row] = model.probability(features);

    bool admit_positives = !(mil && max_bag > 0 && static_cast<int>(positives.size()) > max_bag);

    // the positive rows contributing gradient: argmax under MIL, all otherwise
    std::set<int> active_positives;
    if (admit_positives) {
        if (mil) {
            int best = -1;
            double best_p = -1.0;
            for (int r : positives) {
                double p = probs.at(r);
                if (p > best_p) {
                    best_p = p;
                    best = r;
                }
            }
            active_positives.insert(best);
        } else {
            active_positives = positives;
        }
    }

    auto add_grad = [&](const FeatureVector& x, double coef) {
        for (const auto& [id, value] : x) out.grad_weights[id] += coef * value;
        out.grad_bias += coef;
    };

    for (const auto& [row, features] : rows) {
        double p = probs.at(row);
        if (positives.count(row)) {
            if (active_positives.count(row)) {
                out.loss += -std::log(p);
                add_grad(features, p - 1.0);
            }
        } else {
            out.loss += -std::log(1.0 - p);
            add_grad(features, p);
        }
    }
    return out;
}

RowScorerModel train_row_retriever(const std::vector<RowTrainInstance>& instances,
                                   const RowTrainConfig& config) {
    if (instances.empty()) throw DataError("train_row_retriever: no training instances");

    struct Prepared {
        std::map<int, FeatureVector> rows;
        std::set<int> positives;
    };
    std::vector<Prepared> prepared;
    std::vector<const RowTrainInstance*> kept;
    for (const RowTrainInstance& inst : instances) {
        if (inst.bag.empty()) continue;  // unanswerable, filtered out
        Prepared p;
        p.positives = inst.bag.positive_rows();
        Question q{inst.question_id, inst.question_text, std::nullopt, std::nullopt};
        for (const auto& [row, seq] : inst.linearizations) {
            p.rows[row] = featurize(seq, q);
        }
        prepared.push_back(std::move(p));
        kept.push_back(&inst);
    }
    if (prepared.empty()) throw DataError("train_row_retriever: all bags empty");

    RowScorerModel model;
    model.seed = config.seed;
    model.epochs = config.epochs;
    model.learning_rate = config.learning_rate;
    model.curriculum = config.curriculum;
    model.mil = config.mil;

    Rng rng(config.seed);
    std::vector<size_t> order(prepared.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        int max_bag = 0;
        if (config.mil && epoch < static_cast<int>(config.curriculum.size())) {
            max_bag = config.curriculum[static_cast<size_t>(epoch)];
        }
        rng.shuffle(order);
        for (size_t idx : order) {
            const Prepared& inst = prepared[idx];
            BagGradient g = bag_loss_and_grad(model, inst.rows, inst.positives, config.mil, max_bag);
            for (const auto& [id, dv] : g.grad_weights) {
                model.weights[id] -= config.learning_rate * dv;
            }
            model.bias -= config.learning_rate * g.grad_bias;
        }
    }
    return model;
}

std::vector<RowTrainInstance> build_row_instances(const std::vector<Question>& questions,
                                                  const Corpus& corpus,
                                                  const std::vector<SupervisionBag>& bags,
                                                  const RetrievalEnv& env) {
    std::map<std::string, const SupervisionBag*> bag_by_id;
    for (const auto& b : bags) bag_by_id[b.question_id] = &b;

    std::vector<RowTrainInstance> instances;
    for (const Question& q : questions) {
        auto it = bag_by_id.find(q.id);
        if (it == bag_by_id.end() || it->second->empty() || !q.table_id) continue;
        const Table& t = corpus.table(*q.table_id);
        RowTrainInstance inst;
        inst.question_id = q.id;
        inst.question_text = q.text;
        inst.table_id = t.id;
        inst.bag = *it->second;
        for (size_t r = 0; r < t.rows.size(); ++r) {
            inst.linearizations[static_cast<int>(r)] =
                build_retrieval_input(q, t, static_cast<int>(r), env);
        }
        instances.push_back(std::move(inst));
    }
    return instances;
}

TokenSequence build_retrieval_input(const Question& q, const Table& t, int row,
                                    const RetrievalEnv& env) {
    RetrievalUnit unit = make_unit(t, row);
    auto filtered = filter_passages(q, unit, *env.corpus, env.scorer, env.ctx);
    return linearize_for_retrieval(q, t, row, filtered, *env.corpus, env.ctx.budget);
}

double score_row(const Question& q, const Table& t, int row, const RowScorerModel& model,
                 const RetrievalEnv& env) {
    return model.probability(featurize(build_retrieval_input(q, t, row, env), q));
}

std::vector<std::pair<int, double>> retrieve_rows(const Question& q, const Table& t,
                                                  const RowScorerModel& model, int k,
                                                  const RetrievalEnv& env) {
    if (k < 1) throw DataError("retrieve_rows: k must be >= 1");
    std::vector<std::pair<int, double>> scored;
    scored.reserve(t.rows.size());
    for (size_t r = 0; r < t.rows.size(); ++r) {
        int row = static_cast<int>(r);
        scored.emplace_back(row, score_row(q, t, row, model, env));
    }
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    if (scored.size() > static_cast<size_t>(k)) scored.resize(static_cast<size_t>(k));
    return scored;
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

void save_row_model(const RowScorerModel& model, const std::string& path,
                    const std::string& config_hash) {
    json j = {
        {"format", "ttqa.row_scorer.v1"},
        {"config_hash", config_hash},
        {"bias", model.bias},
        {"weights", weights_to_json(model.weights)},
        {"meta",
         {{"seed", model.seed},
          {"epochs", model.epochs},
          {"learning_rate", model.learning_rate},
          {"curriculum", model.curriculum},
          {"mil", model.mil}}},
    };
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path);
    out << j.dump(2) << "\n";
}

RowScorerModel load_row_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw MissingArtifactError("missing row model " + path + "; run train-rr first");
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded() || j.value("format", "") != "ttqa.row_scorer.v1") {
        throw DataError("not a row scorer checkpoint: " + path);
    }
    RowScorerModel model;
    model.bias = j["bias"].get<double>();
    model.weights = weights_from_json(j["weights"]);
    const json& meta = j["meta"];
    model.seed = meta["seed"].get<uint64_t>();
    model.epochs = meta["epochs"].get<int>();
    model.learning_rate = meta["learning_rate"].get<double>();
    model.curriculum = meta["curriculum"].get<std::vector<int>>();
    model.mil = meta["mil"].get<bool>();
    return model;
}

}  // namespace ttqa
