#include "ttqa/pipeline.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "json.hpp"
#include "ttqa/answer_extractor.hpp"
#include "ttqa/common.hpp"
#include "ttqa/context.hpp"
#include "ttqa/open_domain.hpp"
#include "ttqa/reranker.hpp"
#include "ttqa/row_retriever.hpp"

namespace ttqa {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

bool parse_bool(const std::string& v) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw UsageError("not a boolean: " + v);
}

std::vector<int> parse_int_list(const std::string& v) {
    std::vector<int> out;
    std::istringstream in(v);
    std::string item;
    while (std::getline(in, item, ',')) {
        if (!item.empty()) out.push_back(std::stoi(item));
    }
    return out;
}

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

}  // namespace

PipelineConfig PipelineConfig::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open config file " + path);
    PipelineConfig cfg;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string stripped = trim(line);
        if (stripped.empty() || stripped[0] == '#') continue;
        size_t eq = stripped.find('=');
        if (eq == std::string::npos) {
            throw UsageError(path + " line " + std::to_string(lineno) + ": expected key = value");
        }
        cfg.set(trim(stripped.substr(0, eq)), trim(stripped.substr(eq + 1)));
    }
    return cfg;
}

void PipelineConfig::set(const std::string& key, const std::string& value) {
    if (key == "tables") tables = value;
    else if (key == "passages") passages = value;
    else if (key == "train_questions") train_questions = value;
    else if (key == "dev_questions") dev_questions = value;
    else if (key == "test_questions") test_questions = value;
    else if (key == "output_dir") output_dir = value;
    else if (key == "budget") budget = std::stoi(value);
    else if (key == "k_rows") k_rows = std::stoi(value);
    else if (key == "k_spans") k_spans = std::stoi(value);
    else if (key == "grid_step") grid_step = std::stod(value);
    else if (key == "rr_epochs") rr_epochs = std::stoi(value);
    else if (key == "rr_learning_rate") rr_learning_rate = std::stod(value);
    else if (key == "curriculum") curriculum = parse_int_list(value);
    else if (key == "ae_epochs") ae_epochs = std::stoi(value);
    else if (key == "ae_learning_rate") ae_learning_rate = std::stod(value);
    else if (key == "max_answer_len") max_answer_len = std::stoi(value);
    else if (key == "bm25_k1") bm25_k1 = std::stod(value);
    else if (key == "bm25_b") bm25_b = std::stod(value);
    else if (key == "link_n") link_n = std::stoi(value);
    else if (key == "retrieve_k") retrieve_k = std::stoi(value);
    else if (key == "seed") seed = std::stoull(value);
    else if (key == "mil") mil = parse_bool(value);
    else if (key == "rf") rf = parse_bool(value);
    else if (key == "mst") mst = parse_bool(value);
    else if (key == "rsr") rsr = parse_bool(value);
    else if (key == "pf") pf = parse_bool(value);
    else if (key == "open_domain") open_domain = parse_bool(value);
    else if (key == "jobs") jobs = static_cast<unsigned>(std::stoul(value));
    else if (key == "force") force = parse_bool(value);
    else throw UsageError("unknown config key: " + key);
}

std::string PipelineConfig::semantic_hash() const {
    std::ostringstream out;
    out << "ae_epochs=" << ae_epochs << "\n"
        << "ae_learning_rate=" << ae_learning_rate << "\n"
        << "bm25_b=" << bm25_b << "\n"
        << "bm25_k1=" << bm25_k1 << "\n"
        << "budget=" << budget << "\n"
        << "curriculum=";
    for (size_t i = 0; i < curriculum.size(); ++i) out << (i ? "," : "") << curriculum[i];
    out << "\n"
        << "dev_questions=" << dev_questions << "\n"
        << "grid_step=" << grid_step << "\n"
        << "k_rows=" << k_rows << "\n"
        << "k_spans=" << k_spans << "\n"
        << "link_n=" << link_n << "\n"
        << "max_answer_len=" << max_answer_len << "\n"
        << "mil=" << mil << "\n"
        << "mst=" << mst << "\n"
        << "open_domain=" << open_domain << "\n"
        << "passages=" << passages << "\n"
        << "pf=" << pf << "\n"
        << "retrieve_k=" << retrieve_k << "\n"
        << "rf=" << rf << "\n"
        << "rr_epochs=" << rr_epochs << "\n"
        << "rr_learning_rate=" << rr_learning_rate << "\n"
        << "rsr=" << rsr << "\n"
        << "seed=" << seed << "\n"
        << "tables=" << tables << "\n"
        << "test_questions=" << test_questions << "\n"
        << "train_questions=" << train_questions << "\n";
    return to_hex(fnv1a64(out.str()));
}

std::string artifact_path(const PipelineConfig& cfg, const std::string& name) {
    return (fs::path(cfg.output_dir) / name).string();
}

const std::vector<std::string> kClosedDomainStages = {
    "ingest", "supervise", "train-rr", "train-ae", "tune-reranker", "predict", "eval"};
const std::vector<std::string> kOpenDomainStages = {
    "ingest",   "index-tables", "retrieve",      "link",    "supervise",
    "train-rr", "train-ae",     "tune-reranker", "predict", "eval"};

namespace {

void ensure_output_dir(const PipelineConfig& cfg) { fs::create_directories(cfg.output_dir); }

std::string require_artifact(const PipelineConfig& cfg, const std::string& name,
                             const std::string& producing_stage) {
    std::string path = artifact_path(cfg, name);
    if (!fs::exists(path)) {
        throw MissingArtifactError("missing artifact " + path + "; run " + producing_stage +
                                   " first");
    }
    return path;
}

Corpus effective_corpus(const PipelineConfig& cfg) {
    if (cfg.open_domain) {
        return load_corpus_artifact(require_artifact(cfg, "corpus_linked.json", "link"));
    }
    return load_corpus_artifact(require_artifact(cfg, "corpus.json", "ingest"));
}

std::vector<Question> effective_questions(const PipelineConfig& cfg, const std::string& split) {
    if (cfg.open_domain) {
        return load_questions(
            require_artifact(cfg, "questions_" + split + "_resolved.jsonl", "retrieve"));
    }
    if (split == "train") return load_questions(cfg.train_questions);
    if (split == "dev") return load_questions(cfg.dev_questions);
    return load_questions(cfg.test_questions);
}

std::string input_questions_path(const PipelineConfig& cfg, const std::string& split) {
    if (split == "train") return cfg.train_questions;
    if (split == "dev") return cfg.dev_questions;
    return cfg.test_questions;
}

const std::vector<std::string> kSplits = {"train", "dev", "test"};

}  // namespace

void save_corpus_artifact(const Corpus& corpus, const std::string& path,
                          const std::string& config_hash) {
    json tables = json::array();
    for (const Table& t : corpus.tables()) {
        json rows = json::array();
        for (const auto& row : t.rows) {
            json cells = json::array();
            for (const Cell& c : row) cells.push_back({{"text", c.text}, {"links", c.links}});
            rows.push_back(std::move(cells));
        }
        tables.push_back({{"id", t.id}, {"meta", t.meta}, {"headers", t.headers}, {"rows", rows}});
    }
    json passages = json::array();
    for (const Passage& p : corpus.passages()) {
        passages.push_back({{"id", p.id}, {"title", p.title}, {"text", p.text}});
    }
    json j = {{"format", "ttqa.corpus.v1"},
              {"config_hash", config_hash},
              {"tables", tables},
              {"passages", passages}};
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path);
    out << j.dump() << "\n";
}

Corpus load_corpus_artifact(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw MissingArtifactError("missing artifact " + path + "; run ingest first");
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded() || j.value("format", "") != "ttqa.corpus.v1") {
        throw DataError("not a corpus artifact: " + path);
    }
    Corpus corpus;
    for (const auto& pj : j["passages"]) {
        corpus.add_passage({pj.at("id").get<std::string>(), pj.at("title").get<std::string>(),
                            pj.at("text").get<std::string>()});
    }
    for (const auto& tj : j["tables"]) {
        Table t;
        t.id = tj.at("id").get<std::string>();
        t.meta = tj.at("meta").get<std::string>();
        t.headers = tj.at("headers").get<std::vector<std::string>>();
        for (const auto& row : tj.at("rows")) {
            std::vector<Cell> cells;
            for (const auto& cj : row) {
                cells.push_back({cj.at("text").get<std::string>(),
                                 cj.at("links").get<std::vector<std::string>>()});
            }
            t.rows.push_back(std::move(cells));
        }
        corpus.add_table(std::move(t));
    }
    corpus.validate_links();
    return corpus;
}

namespace {

json source_to_json(const SpanSource& s) {
    if (s.kind == SpanSource::Kind::Cell) return {{"kind", "cell"}, {"column", s.column}};
    return {{"kind", "passage"}, {"id", s.passage_id}};
}

SpanSource source_from_json(const json& j) {
    if (j.at("kind") == "cell") return SpanSource::cell(j.at("column").get<int>());
    return SpanSource::passage(j.at("id").get<std::string>());
}

}  // namespace

void save_bags(const std::vector<SupervisionBag>& bags, const std::string& path,
               const std::string& config_hash) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path);
    out << json{{"format", "ttqa.bags.v1"}, {"config_hash", config_hash}}.dump() << "\n";
    for (const SupervisionBag& bag : bags) {
        json rows = json::object();
        for (const auto& [row, spans] : bag.spans_per_row) {
            json span_list = json::array();
            for (const SpanRef& s : spans) {
                span_list.push_back({{"source", source_to_json(s.source)},
                                     {"start", s.start},
                                     {"end", s.end},
                                     {"surface", s.surface}});
            }
            rows[std::to_string(row)] = std::move(span_list);
        }
        out << json{{"question_id", bag.question_id}, {"table_id", bag.table_id}, {"rows", rows}}
                   .dump()
            << "\n";
    }
}

std::vector<SupervisionBag> load_bags(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw MissingArtifactError("missing artifact " + path + "; run supervise first");
    std::vector<SupervisionBag> bags;
    std::string line;
    bool header = true;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded()) throw DataError("malformed bags file " + path);
        if (header) {
            if (j.value("format", "") != "ttqa.bags.v1") {
                throw DataError("not a bags artifact: " + path);
            }
            header = false;
            continue;
        }
        SupervisionBag bag;
        bag.question_id = j.at("question_id").get<std::string>();
        bag.table_id = j.at("table_id").get<std::string>();
        for (const auto& [row_key, span_list] : j.at("rows").items()) {
            std::vector<SpanRef> spans;
            for (const auto& sj : span_list) {
                spans.push_back({source_from_json(sj.at("source")), sj.at("start").get<int>(),
                                 sj.at("end").get<int>(), sj.at("surface").get<std::string>()});
            }
            bag.spans_per_row[std::stoi(row_key)] = std::move(spans);
        }
        bags.push_back(std::move(bag));
    }
    return bags;
}

void save_predictions(const std::vector<Prediction>& predictions, const std::string& path,
                      const std::string& config_hash) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path);
    out << json{{"format", "ttqa.predictions.v1"}, {"config_hash", config_hash}}.dump() << "\n";
    for (const Prediction& p : predictions) {
        json j = {{"id", p.question_id},
                  {"answer", p.answer},
                  {"table_id", p.table_id},
                  {"row", p.row},
                  {"scores",
                   {{"row", p.row_score},
                    {"start", p.start_score},
                    {"end", p.end_score},
                    {"combined", p.combined_score}}}};
        if (p.provenance) j["provenance"] = source_to_json(*p.provenance);
        out << j.dump() << "\n";
    }
}

std::vector<Prediction> load_predictions(const std::string& path, std::string* config_hash_out) {
    std::ifstream in(path);
    if (!in) throw MissingArtifactError("missing artifact " + path + "; run predict first");
    std::vector<Prediction> out;
    std::string line;
    bool header = true;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded()) throw DataError("malformed predictions file " + path);
        if (header) {
            if (j.value("format", "") != "ttqa.predictions.v1") {
                throw DataError("not a predictions artifact: " + path);
            }
            if (config_hash_out) *config_hash_out = j.value("config_hash", "");
            header = false;
            continue;
        }
        Prediction p;
        p.question_id = j.at("id").get<std::string>();
        p.answer = j.at("answer").get<std::string>();
        p.table_id = j.at("table_id").get<std::string>();
        p.row = j.at("row").get<int>();
        if (j.contains("provenance")) p.provenance = source_from_json(j["provenance"]);
        const json& scores = j.at("scores");
        p.row_score = scores.at("row").get<double>();
        p.start_score = scores.at("start").get<double>();
        p.end_score = scores.at("end").get<double>();
        p.combined_score = scores.at("combined").get<double>();
        out.push_back(std::move(p));
    }
    return out;
}

void stage_ingest(const PipelineConfig& cfg) {
    ensure_output_dir(cfg);
    Corpus corpus = load_corpus(cfg.tables, cfg.passages);
    save_corpus_artifact(corpus, artifact_path(cfg, "corpus.json"), cfg.semantic_hash());
}

void stage_index_tables(const PipelineConfig& cfg) {
    ensure_output_dir(cfg);
    Corpus corpus = load_corpus_artifact(require_artifact(cfg, "corpus.json", "ingest"));
    TableIndex index = build_table_index(corpus, cfg.bm25_k1, cfg.bm25_b);
    index.index.save(artifact_path(cfg, "table_index.json"), "ttqa.table_index.v1",
                     cfg.semantic_hash());
}

void stage_retrieve(const PipelineConfig& cfg) {
    ensure_output_dir(cfg);
    TableIndex index{Bm25Index::load(require_artifact(cfg, "table_index.json", "index-tables"),
                                     "ttqa.table_index.v1")};
    for (const std::string& split : kSplits) {
        std::vector<Question> questions = load_questions(input_questions_path(cfg, split));
        std::ofstream runs(artifact_path(cfg, "retrieval_" + split + ".jsonl"));
        if (!runs) throw DataError("cannot write retrieval run");
        std::vector<Question> resolved;
        for (Question q : questions) {
            auto ranked = retrieve_tables(q, index, cfg.retrieve_k);
            json tables = json::array();
            for (const auto& [id, score] : ranked) tables.push_back({id, score});
            runs << json{{"question_id", q.id}, {"tables", tables}}.dump() << "\n";
            // training keeps gold tables where present; dev/test answer over
            // what the retriever found
            bool keep_gold = split == "train" && q.table_id.has_value();
            if (!keep_gold && !ranked.empty()) q.table_id = ranked.front().first;
            resolved.push_back(std::move(q));
        }
        save_questions(resolved, artifact_path(cfg, "questions_" + split + "_resolved.jsonl"));
    }
}

void stage_link(const PipelineConfig& cfg) {
    ensure_output_dir(cfg);
    Corpus corpus = load_corpus_artifact(require_artifact(cfg, "corpus.json", "ingest"));
    PassageIndex index = build_passage_index(corpus, cfg.bm25_k1, cfg.bm25_b);

    Corpus linked;
    for (const Passage& p : corpus.passages()) linked.add_passage(p);
    std::vector<Table> tables = corpus.tables();
    parallel_for(tables.size(), cfg.jobs, [&](size_t i) {
        Table& t = tables[i];
        for (size_t r = 0; r < t.rows.size(); ++r) {
            auto per_cell = link_row_passages(t, static_cast<int>(r), index, cfg.link_n);
            for (size_t c = 0; c < t.rows[r].size(); ++c) {
                t.rows[r][c].links = per_cell[c];
            }
        }
    });
    for (Table& t : tables) linked.add_table(std::move(t));
    save_corpus_artifact(linked, artifact_path(cfg, "corpus_linked.json"), cfg.semantic_hash());
}

namespace {

std::vector<SupervisionBag> build_bags(const Corpus& corpus,
                                       const std::vector<Question>& questions) {
    std::vector<SupervisionBag> bags;
    for (const Question& q : questions) {
        if (!q.answer_text || !q.table_id) continue;
        const Table* t = corpus.find_table(*q.table_id);
        if (!t) continue;
        bags.push_back(find_answer_rows(*t, corpus, *q.answer_text, q.id));
    }
    return bags;
}

}  // namespace

void stage_supervise(const PipelineConfig& cfg) {
    ensure_output_dir(cfg);
    Corpus corpus = effective_corpus(cfg);
    for (const std::string& split : {"train", "test"}) {
        auto questions = effective_questions(cfg, split);
        save_bags(build_bags(corpus, questions), artifact_path(cfg, "bags_" + split + ".jsonl"),
                  cfg.semantic_hash());
    }
}

namespace {

RetrievalEnv make_env(const PipelineConfig& cfg, const Corpus& corpus,
                      const SimilarityScorer* scorer) {
    RetrievalEnv env;
    env.corpus = &corpus;
    env.scorer = scorer;
    env.ctx.budget = cfg.budget;
    env.ctx.pf_enabled = cfg.pf;
    return env;
}

}  // namespace

void stage_train_rr(const PipelineConfig& cfg) {
    ensure_output_dir(cfg);
    Corpus corpus = effective_corpus(cfg);
    auto questions = effective_questions(cfg, "train");
    auto bags = load_bags(require_artifact(cfg, "bags_train.jsonl", "supervise"));

    TfIdfScorer scorer(corpus);
    RetrievalEnv env = make_env(cfg, corpus, &scorer);
    auto instances = build_row_instances(questions, corpus, bags, env);

    RowTrainConfig train_cfg;
    train_cfg.epochs = cfg.rr_epochs;
    train_cfg.learning_rate = cfg.rr_learning_rate;
    train_cfg.seed = cfg.seed;
    train_cfg.curriculum = cfg.curriculum;
    train_cfg.mil = cfg.mil;
    RowScorerModel model = train_row_retriever(instances, train_cfg);
    save_row_model(model, artifact_path(cfg, "rr_model.json"), cfg.semantic_hash());
}

void stage_train_ae(const PipelineConfig& cfg) {
    ensure_output_dir(cfg);
    Corpus corpus = effective_corpus(cfg);
    auto questions = effective_questions(cfg, "train");
    auto bags = load_bags(require_artifact(cfg, "bags_train.jsonl", "supervise"));

    TfIdfScorer scorer(corpus);
    RetrievalEnv env = make_env(cfg, corpus, &scorer);

    RowScorerModel rr_model;
    const RowScorerModel* rr = nullptr;
    if (cfg.rf) {
        rr_model = load_row_model(require_artifact(cfg, "rr_model.json", "train-rr"));
        rr = &rr_model;
    }
    auto instances = build_extraction_instances(questions, corpus, bags, rr, env, cfg.rf);

    ExtractorTrainConfig train_cfg;
    train_cfg.epochs = cfg.ae_epochs;
    train_cfg.learning_rate = cfg.ae_learning_rate;
    train_cfg.seed = cfg.seed;
    train_cfg.mst = cfg.mst;
    train_cfg.max_answer_len = cfg.max_answer_len;
    MstResult result = train_answer_extractor_mst(instances, train_cfg);
    save_span_model(result.model, artifact_path(cfg, "ae_model.json"), cfg.semantic_hash());
}

void stage_tune_reranker(const PipelineConfig& cfg) {
    ensure_output_dir(cfg);
    if (!cfg.rsr) {
        // the control case: a single candidate, reranking is a no-op
        RerankWeights weights;
        weights.w = {1.0, 0.0, 0.0};
        weights.k_rows = 1;
        weights.k_spans = 1;
        save_rerank_weights(weights, artifact_path(cfg, "rerank_weights.json"),
                            cfg.semantic_hash(), 0.0, 0.0);
        return;
    }
    Corpus corpus = effective_corpus(cfg);
    auto dev = effective_questions(cfg, "dev");
    RowScorerModel rr = load_row_model(require_artifact(cfg, "rr_model.json", "train-rr"));
    SpanScorerModel ae = load_span_model(require_artifact(cfg, "ae_model.json", "train-ae"));
    TfIdfScorer scorer(corpus);
    RetrievalEnv env = make_env(cfg, corpus, &scorer);
    TuneResult result = tune_weights(dev, corpus, rr, ae, simplex_grid(cfg.grid_step), cfg.k_rows,
                                     cfg.k_spans, env, cfg.max_answer_len, cfg.jobs);
    save_rerank_weights(result.weights, artifact_path(cfg, "rerank_weights.json"),
                        cfg.semantic_hash(), result.dev_em, result.dev_f1);
}

void stage_predict(const PipelineConfig& cfg) {
    ensure_output_dir(cfg);
    Corpus corpus = effective_corpus(cfg);
    auto questions = effective_questions(cfg, "test");
    RowScorerModel rr = load_row_model(require_artifact(cfg, "rr_model.json", "train-rr"));
    SpanScorerModel ae = load_span_model(require_artifact(cfg, "ae_model.json", "train-ae"));
    RerankWeights weights =
        load_rerank_weights(require_artifact(cfg, "rerank_weights.json", "tune-reranker"));
    TfIdfScorer scorer(corpus);
    RetrievalEnv env = make_env(cfg, corpus, &scorer);

    std::vector<std::optional<Prediction>> slots(questions.size());
    parallel_for(questions.size(), cfg.jobs, [&](size_t i) {
        const Question& q = questions[i];
        if (!q.table_id || !corpus.find_table(*q.table_id)) return;
        const Table& t = corpus.table(*q.table_id);
        double row_score = 0.0, combined = 0.0;
        ScoredSpan span = answer_question(q, t, rr, ae, weights, env, cfg.max_answer_len,
                                          &row_score, &combined);
        Prediction p;
        p.question_id = q.id;
        p.answer = span.surface;
        p.table_id = t.id;
        p.row = span.row;
        p.provenance = span.provenance;
        p.row_score = row_score;
        p.start_score = span.start_score;
        p.end_score = span.end_score;
        p.combined_score = combined;
        slots[i] = std::move(p);
    });
    std::vector<Prediction> predictions;
    for (auto& slot : slots) {
        if (slot) predictions.push_back(std::move(*slot));
    }
    save_predictions(predictions, artifact_path(cfg, "predictions.jsonl"), cfg.semantic_hash());
}

EvalReport stage_eval(const PipelineConfig& cfg) {
    ensure_output_dir(cfg);
    std::string hash;
    auto predictions =
        load_predictions(require_artifact(cfg, "predictions.jsonl", "predict"), &hash);
    if (hash != cfg.semantic_hash() && !cfg.force) {
        throw DataError("predictions were produced under config hash " + hash +
                        ", current is " + cfg.semantic_hash() + "; rerun predict or pass force");
    }
    auto gold = effective_questions(cfg, "test");

    std::vector<SupervisionBag> bags;
    const std::vector<SupervisionBag>* bags_ptr = nullptr;
    std::string bags_path = artifact_path(cfg, "bags_test.jsonl");
    if (fs::exists(bags_path)) {
        bags = load_bags(bags_path);
        bags_ptr = &bags;
    }

    std::vector<RetrievalRun> runs;
    const std::vector<RetrievalRun>* runs_ptr = nullptr;
    std::string runs_path = artifact_path(cfg, "retrieval_test.jsonl");
    if (fs::exists(runs_path)) {
        std::ifstream in(runs_path);
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            json j = json::parse(line);
            RetrievalRun run;
            run.question_id = j.at("question_id").get<std::string>();
            for (const auto& entry : j.at("tables")) {
                run.table_ids.push_back(entry[0].get<std::string>());
            }
            runs.push_back(std::move(run));
        }
        runs_ptr = &runs;
    }

    EvalReport report = evaluate(predictions, gold, bags_ptr, runs_ptr);

    json j = {{"format", "ttqa.report.v1"},
              {"config_hash", cfg.semantic_hash()},
              {"n", report.total.count},
              {"em", report.total.em()},
              {"f1", report.total.f1()},
              {"unscored", report.unscored},
              {"buckets", json::object()}};
    if (report.table_bucket.count > 0) {
        j["buckets"]["table"] = {{"n", report.table_bucket.count},
                                 {"em", report.table_bucket.em()},
                                 {"f1", report.table_bucket.f1()}};
    }
    if (report.passage_bucket.count > 0) {
        j["buckets"]["passage"] = {{"n", report.passage_bucket.count},
                                   {"em", report.passage_bucket.em()},
                                   {"f1", report.passage_bucket.f1()}};
    }
    if (report.row_accuracy) j["row_accuracy"] = *report.row_accuracy;
    if (!report.hits_at.empty()) {
        json hits = json::object();
        for (const auto& [k, v] : report.hits_at) hits[std::to_string(k)] = v;
        j["hits_at"] = hits;
    }
    std::ofstream out(artifact_path(cfg, "report.json"));
    if (!out) throw DataError("cannot write report");
    out << j.dump(2) << "\n";
    return report;
}

void run_pipeline(const PipelineConfig& cfg, std::vector<std::string> stages) {
    if (stages.empty()) {
        stages = cfg.open_domain ? kOpenDomainStages : kClosedDomainStages;
    }
    for (const std::string& stage : stages) {
        if (stage == "ingest") stage_ingest(cfg);
        else if (stage == "index-tables") stage_index_tables(cfg);
        else if (stage == "retrieve") stage_retrieve(cfg);
        else if (stage == "link") stage_link(cfg);
        else if (stage == "supervise") stage_supervise(cfg);
        else if (stage == "train-rr") stage_train_rr(cfg);
        else if (stage == "train-ae") stage_train_ae(cfg);
        else if (stage == "tune-reranker") stage_tune_reranker(cfg);
        else if (stage == "predict") stage_predict(cfg);
        else if (stage == "eval") std::cout << format_report_table(stage_eval(cfg));
        else throw UsageError("unknown stage: " + stage);
    }
}

AblationMatrix ablation_matrix(const PipelineConfig& base,
                               const std::vector<std::set<std::string>>& toggle_sets) {
    static const std::set<std::string> known = {"mil", "rf", "mst", "rsr", "pf"};
    AblationMatrix matrix;
    std::vector<std::set<std::string>> unique;
    for (const auto& toggles : toggle_sets) {
        for (const auto& t : toggles) {
            if (!known.count(t)) throw UsageError("unknown ablation toggle: " + t);
        }
        if (std::find(unique.begin(), unique.end(), toggles) != unique.end()) {
            ++matrix.duplicates_dropped;
            continue;
        }
        unique.push_back(toggles);
    }
    if (matrix.duplicates_dropped > 0) {
        std::cerr << "warning: dropped " << matrix.duplicates_dropped
                  << " duplicate toggle set(s)\n";
    }

    for (const auto& toggles : unique) {
        PipelineConfig cfg = base;
        cfg.mil = toggles.count("mil") > 0;
        cfg.rf = toggles.count("rf") > 0;
        cfg.mst = toggles.count("mst") > 0;
        cfg.rsr = toggles.count("rsr") > 0;
        cfg.pf = toggles.count("pf") > 0;
        std::string label = toggles.empty() ? "none" : "";
        for (const auto& t : toggles) label += (label.empty() ? "" : "-") + t;
        cfg.output_dir = (fs::path(base.output_dir) / ("ablate_" + label)).string();
        run_pipeline(cfg);
        EvalReport report = stage_eval(cfg);
        matrix.rows.push_back({toggles, report.total.em(), report.total.f1()});
    }
    return matrix;
}

std::string format_ablation_table(const AblationMatrix& matrix) {
    std::ostringstream out;
    out << std::fixed << std::setprecision(2);
    out << std::setw(5) << "MIL" << std::setw(5) << "RF" << std::setw(5) << "MST" << std::setw(5)
        << "RSR" << std::setw(5) << "PF" << std::setw(9) << "EM" << std::setw(9) << "F1" << "\n";
    for (const AblationRow& row : matrix.rows) {
        auto mark = [&](const char* name) { return row.toggles.count(name) ? "x" : ""; };
        out << std::setw(5) << mark("mil") << std::setw(5) << mark("rf") << std::setw(5)
            << mark("mst") << std::setw(5) << mark("rsr") << std::setw(5) << mark("pf")
            << std::setw(9) << row.em << std::setw(9) << row.f1 << "\n";
    }
    return out.str();
}

DatasetStats dataset_stats(const Corpus& corpus, const std::vector<Question>& questions,
                           int budget, const std::string& rr_model_path) {
    DatasetStats stats;
    std::vector<SupervisionBag> bags;
    std::map<std::string, int> selected;

    RowScorerModel rr;
    bool have_rr = false;
    if (!rr_model_path.empty()) {
        rr = load_row_model(rr_model_path);
        have_rr = true;
    }
    TfIdfScorer scorer(corpus);
    RetrievalEnv env;
    env.corpus = &corpus;
    env.scorer = &scorer;
    env.ctx.budget = budget;

    long long token_sum = 0;
    int over = 0;
    for (const Question& q : questions) {
        if (!q.table_id) continue;
        const Table* t = corpus.find_table(*q.table_id);
        if (!t) continue;

        int context_row = 0;
        if (q.answer_text) {
            SupervisionBag bag = find_answer_rows(*t, corpus, *q.answer_text, q.id);
            if (!bag.empty()) {
                auto rows = bag.positive_rows();
                context_row = *rows.begin();
                if (have_rr) {
                    int best = select_feedback_row(bag, rr, q, *t, env);
                    selected[q.id] = best;
                    context_row = best;
                }
            }
            bags.push_back(std::move(bag));
        }

        // context size measured over all linked passages, untruncated
        RetrievalUnit unit = make_unit(*t, context_row);
        TokenSequence ctx = linearize_for_extraction(*t, context_row, unit.linked_passages, corpus);
        token_sum += static_cast<long long>(ctx.size());
        if (static_cast<int>(ctx.size()) > budget) ++over;
        ++stats.contexts_measured;
    }

    stats.ambiguity = ambiguity_stats(bags, selected);
    if (stats.contexts_measured > 0) {
        stats.mean_context_tokens = static_cast<double>(token_sum) / stats.contexts_measured;
        stats.over_budget_fraction = static_cast<double>(over) / stats.contexts_measured;
    }
    return stats;
}

std::string format_stats_table(const DatasetStats& stats) {
    std::ostringstream out;
    out << std::fixed << std::setprecision(1);
    out << std::setw(10) << "|B|" << std::setw(10) << "count" << std::setw(10) << "percent"
        << "\n";
    for (const auto& [size, count] : stats.ambiguity.bag_size_counts) {
        out << std::setw(10) << size << std::setw(10) << count << std::setw(10)
            << stats.ambiguity.percent(size) << "\n";
    }
    out << "questions: " << stats.ambiguity.total << "\n";
    out << "multi-row fraction: " << 100.0 * stats.ambiguity.multi_row_fraction() << "%\n";
    out << "multi-span rate: " << 100.0 * stats.ambiguity.multi_span_rate() << "%\n";
    out << "mean context tokens: " << stats.mean_context_tokens << "\n";
    out << "contexts over budget: " << 100.0 * stats.over_budget_fraction << "%\n";
    return out.str();
}

std::string stats_to_json(const DatasetStats& stats) {
    json histogram = json::object();
    json percents = json::object();
    for (const auto& [size, count] : stats.ambiguity.bag_size_counts) {
        histogram[std::to_string(size)] = count;
        percents[std::to_string(size)] = stats.ambiguity.percent(size);
    }
    json j = {{"histogram", histogram},
              {"percent", percents},
              {"questions", stats.ambiguity.total},
              {"answerable", stats.ambiguity.answerable},
              {"multi_row_fraction", stats.ambiguity.multi_row_fraction()},
              {"multi_span_rate", stats.ambiguity.multi_span_rate()},
              {"mean_context_tokens", stats.mean_context_tokens},
              {"over_budget_fraction", stats.over_budget_fraction},
              {"contexts_measured", stats.contexts_measured}};
    return j.dump(2);
}

}  // namespace ttqa
