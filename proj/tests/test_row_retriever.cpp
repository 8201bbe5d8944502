#include <cmath>

#include "doctest.h"
#include "ttqa/common.hpp"
#include "ttqa/row_retriever.hpp"
#include "ttqa/synth.hpp"

using namespace ttqa;

namespace {

uint64_t fid(const char* name) { return fnv1a64(name); }

TokenSequence simple_sequence(const std::string& question, const std::string& cell_text) {
    Corpus corpus;
    Table t;
    t.id = "T1";
    t.meta = "";
    t.headers = {"H"};
    t.rows = {{Cell{cell_text, {}}}};
    corpus.add_table(std::move(t));
    Question q{"q", question, std::nullopt, std::nullopt};
    return linearize_for_retrieval(q, corpus.table("T1"), 0, {}, corpus, 512);
}

// independent brute force used by the oracle checks
double mil_brute_force(const std::map<int, double>& scores, const std::set<int>& positives) {
    auto clamp = [](double p) { return std::min(std::max(p, 1e-7), 1.0 - 1e-7); };
    double best = std::numeric_limits<double>::infinity();
    double neg = 0.0;
    for (const auto& [row, p] : scores) {
        if (positives.count(row)) {
            best = std::min(best, -std::log(clamp(p)));
        } else {
            neg += -std::log(1.0 - clamp(p));
        }
    }
    return best + neg;
}

}  // namespace

TEST_CASE("featurize: zero overlap gives no features") {
    TokenSequence seq = simple_sequence("totally different words", "some cell");
    Question q{"q", "totally different words", std::nullopt, std::nullopt};
    CHECK(featurize(seq, q).empty());
}

TEST_CASE("featurize: identical question and cell reach full coverage") {
    TokenSequence seq = simple_sequence("boston college", "boston college");
    Question q{"q", "boston college", std::nullopt, std::nullopt};
    FeatureVector f = featurize(seq, q);
    CHECK(f.at(fid("coverage")) == doctest::Approx(1.0));
    CHECK(f.at(fid("ov_cell")) == doctest::Approx(2.0));
    CHECK(f.count(fid("u:boston")) == 1);
    CHECK(f.count(fid("b:boston college")) == 1);
}

TEST_CASE("featurize is deterministic") {
    TokenSequence seq = simple_sequence("alpha beta gamma", "beta gamma");
    Question q{"q", "alpha beta gamma", std::nullopt, std::nullopt};
    FeatureVector a = featurize(seq, q);
    FeatureVector b = featurize(seq, q);
    CHECK(a == b);
    CHECK(!a.empty());
}

TEST_CASE("mil_loss matches the worked example") {
    std::map<int, double> scores{{1, 0.9}, {2, 0.6}, {3, 0.2}};
    std::set<int> positives{1, 2};
    // -ln 0.9 + -ln 0.8
    CHECK(mil_loss(scores, positives) == doctest::Approx(0.3285).epsilon(1e-3));
}

TEST_CASE("mil_loss on a lone positive is plain cross-entropy") {
    std::map<int, double> scores{{0, 0.5}};
    CHECK(mil_loss(scores, {0}) == doctest::Approx(std::log(2.0)));
}

TEST_CASE("mil_loss vanishes for a perfect model") {
    std::map<int, double> scores{{0, 1.0 - 1e-9}, {1, 1e-9}, {2, 1e-9}};
    CHECK(mil_loss(scores, {0}) < 1e-5);
}

TEST_CASE("mil_loss rejects an empty bag") {
    std::map<int, double> scores{{0, 0.5}};
    CHECK_THROWS_WITH_AS(mil_loss(scores, {}), doctest::Contains("empty positive bag"), DataError);
}

TEST_CASE("mil_loss is bounded by the naive loss") {
    Rng rng(42);
    for (int trial = 0; trial < 100; ++trial) {
        std::map<int, double> scores;
        std::set<int> positives;
        int n = 2 + static_cast<int>(rng.index(6));
        for (int i = 0; i < n; ++i) {
            scores[i] = 0.05 + 0.9 * rng.real();
            if (rng.bernoulli(0.4)) positives.insert(i);
        }
        if (positives.empty()) positives.insert(0);
        CHECK(mil_loss(scores, positives) <= naive_loss(scores, positives) + 1e-12);
    }
}

TEST_CASE("mil_loss ignores row labels within the bag and the negatives") {
    std::map<int, double> a{{0, 0.7}, {1, 0.3}, {2, 0.1}, {3, 0.8}};
    std::map<int, double> b{{0, 0.3}, {1, 0.7}, {2, 0.8}, {3, 0.1}};  // swapped partners
    CHECK(mil_loss(a, {0, 1}) == doctest::Approx(mil_loss(b, {0, 1})));
}

TEST_CASE("mil_loss agrees with brute force on random bags") {
    Rng rng(7);
    for (int trial = 0; trial < 200; ++trial) {
        std::map<int, double> scores;
        std::set<int> positives;
        int n = 1 + static_cast<int>(rng.index(8));
        for (int i = 0; i < n; ++i) {
            scores[i] = rng.real();
            if (rng.bernoulli(0.5)) positives.insert(i);
        }
        if (positives.empty()) positives.insert(static_cast<int>(rng.index(n)));
        CHECK(mil_loss(scores, positives) ==
              doctest::Approx(mil_brute_force(scores, positives)).epsilon(1e-9));
    }
}

TEST_CASE("analytic gradient matches central finite differences") {
    Rng rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        // a small random instance over 4 features
        std::vector<uint64_t> ids = {fid("f0"), fid("f1"), fid("f2"), fid("f3")};
        RowScorerModel model;
        for (uint64_t id : ids) model.weights[id] = rng.real() - 0.5;
        model.bias = rng.real() - 0.5;

        std::map<int, FeatureVector> rows;
        std::set<int> positives;
        int n = 2 + static_cast<int>(rng.index(3));
        for (int r = 0; r < n; ++r) {
            FeatureVector f;
            for (uint64_t id : ids) {
                if (rng.bernoulli(0.7)) f[id] = rng.real() * 2.0;
            }
            rows[r] = f;
            if (rng.bernoulli(0.5)) positives.insert(r);
        }
        if (positives.empty()) positives.insert(0);

        bool mil = trial % 2 == 0;
        BagGradient g = bag_loss_and_grad(model, rows, positives, mil);

        auto loss_at = [&](const RowScorerModel& m) {
            std::map<int, double> scores;
            for (const auto& [r, f] : rows) scores[r] = m.probability(f);
            return mil ? mil_loss(scores, positives) : naive_loss(scores, positives);
        };

        const double eps = 1e-6;
        for (uint64_t id : ids) {
            RowScorerModel up = model, down = model;
            up.weights[id] += eps;
            down.weights[id] -= eps;
            double numeric = (loss_at(up) - loss_at(down)) / (2 * eps);
            double analytic = g.grad_weights.count(id) ? g.grad_weights.at(id) : 0.0;
            double scale = std::max({1.0, std::abs(numeric), std::abs(analytic)});
            CHECK(std::abs(numeric - analytic) / scale < 1e-4);
        }
        RowScorerModel up = model, down = model;
        up.bias += eps;
        down.bias -= eps;
        double numeric = (loss_at(up) - loss_at(down)) / (2 * eps);
        double scale = std::max({1.0, std::abs(numeric), std::abs(g.grad_bias)});
        CHECK(std::abs(numeric - g.grad_bias) / scale < 1e-4);
    }
}

TEST_CASE("retrieve_rows clips, sorts and breaks ties by row index") {
    SynthConfig synth;
    synth.n_tables = 1;
    synth.rows_per_table = 3;
    SynthData data = generate(synth);
    const Table& t = data.corpus.tables()[0];
    TfIdfScorer scorer(data.corpus);
    RetrievalEnv env{&data.corpus, &scorer, {512, true}};
    Question q{"q", "anything", std::nullopt, std::nullopt};

    RowScorerModel empty_model;  // all rows tie at 0.5
    auto top = retrieve_rows(q, t, empty_model, 5, env);
    REQUIRE(top.size() == 3);  // K clipped to the row count
    CHECK(top[0].first == 0);
    CHECK(top[1].first == 1);
    CHECK(top[2].first == 2);

    auto top1 = retrieve_rows(q, t, empty_model, 1, env);
    REQUIRE(top1.size() == 1);
    CHECK(top1[0].first == 0);

    // stable across calls
    CHECK(retrieve_rows(q, t, empty_model, 3, env) == retrieve_rows(q, t, empty_model, 3, env));
}

TEST_CASE("training a separable single-bag dataset pushes the positive above 0.5") {
    Corpus corpus;
    Table t;
    t.id = "T1";
    t.meta = "";
    t.headers = {"H"};
    t.rows = {{Cell{"boston college", {}}}};
    corpus.add_table(std::move(t));
    Question q{"Q1", "boston college", "boston college", "T1"};

    SupervisionBag bag = find_answer_rows(corpus.table("T1"), corpus, "boston college", "Q1");
    REQUIRE(!bag.empty());
    TfIdfScorer scorer(corpus);
    RetrievalEnv env{&corpus, &scorer, {512, true}};
    auto instances = build_row_instances({q}, corpus, {bag}, env);
    REQUIRE(instances.size() == 1);

    RowTrainConfig cfg;
    cfg.epochs = 5;
    RowScorerModel model = train_row_retriever(instances, cfg);
    CHECK(score_row(q, corpus.table("T1"), 0, model, env) > 0.5);
}

TEST_CASE("empty and all-empty bags are rejected") {
    CHECK_THROWS_AS(train_row_retriever({}, RowTrainConfig{}), DataError);
    RowTrainInstance inst;
    inst.question_id = "q";
    CHECK_THROWS_WITH_AS(train_row_retriever({inst}, RowTrainConfig{}),
                         doctest::Contains("all bags empty"), DataError);
}

TEST_CASE("model checkpoints round-trip") {
    RowScorerModel model;
    model.weights[fid("a")] = 0.25;
    model.weights[fid("b")] = -1.5;
    model.bias = 0.125;
    model.seed = 99;
    model.epochs = 3;
    model.learning_rate = 0.05;
    model.curriculum = {1, 2};
    model.mil = false;
    save_row_model(model, "/tmp/ttqa_rr_model.json", "deadbeef");
    RowScorerModel loaded = load_row_model("/tmp/ttqa_rr_model.json");
    CHECK(loaded.weights == model.weights);
    CHECK(loaded.bias == model.bias);
    CHECK(loaded.seed == model.seed);
    CHECK(loaded.curriculum == model.curriculum);
    CHECK(loaded.mil == model.mil);
    std::remove("/tmp/ttqa_rr_model.json");
}

namespace {

double heldout_top1(const SynthData& data, const RowScorerModel& model,
                    const RetrievalEnv& env) {
    int hits = 0, total = 0;
    for (const Question& q : data.test) {
        const Table& t = data.corpus.table(*q.table_id);
        auto top = retrieve_rows(q, t, model, 1, env);
        const GoldEvidence& ev = data.evidence_for(q.id);
        ++total;
        if (!top.empty() && top[0].first == ev.row) ++hits;
    }
    return total == 0 ? 0.0 : static_cast<double>(hits) / total;
}

}  // namespace

TEST_CASE("multi-instance training beats the all-positive control on decoy corpora") {
    SynthConfig synth;
    synth.seed = 21;
    synth.n_tables = 80;
    synth.p_multirow = 0.4;
    SynthData data = generate(synth);

    std::vector<SupervisionBag> bags;
    for (const Question& q : data.train) {
        bags.push_back(find_answer_rows(data.corpus.table(*q.table_id), data.corpus,
                                        *q.answer_text, q.id));
    }
    TfIdfScorer scorer(data.corpus);
    RetrievalEnv env{&data.corpus, &scorer, {512, true}};
    auto instances = build_row_instances(data.train, data.corpus, bags, env);

    RowTrainConfig mil_cfg;
    RowTrainConfig naive_cfg;
    naive_cfg.mil = false;
    double mil_acc = heldout_top1(data, train_row_retriever(instances, mil_cfg), env);
    double naive_acc = heldout_top1(data, train_row_retriever(instances, naive_cfg), env);

    CHECK(mil_acc >= 0.9);
    CHECK(mil_acc >= naive_acc);
}
