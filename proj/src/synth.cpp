#include "ttqa/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "ttqa/common.hpp"
#include "ttqa/context.hpp"

namespace ttqa {

using nlohmann::json;

namespace {

std::string word(int i) {
    std::ostringstream out;
    out << "w" << i;
    return out.str();
}

std::string join(const std::vector<std::string>& tokens) {
    std::string out;
    for (const auto& t : tokens) {
        if (!out.empty()) out.push_back(' ');
        out += t;
    }
    return out;
}

struct Pools {
    std::vector<std::string> headers;
    std::vector<std::string> tags;
    std::vector<std::string> context;
    std::vector<std::string> answers;
    std::vector<std::string> filler;
};

Pools make_pools(int vocab_size) {
    if (vocab_size < 60) throw DataError("synth: vocab_size must be at least 60");
    Pools pools;
    int i = 0;
    for (; i < 8; ++i) pools.headers.push_back(word(i));
    for (; i < 16; ++i) pools.tags.push_back(word(i));
    int n_context = 16 + (vocab_size - 16) * 2 / 5;
    for (; i < n_context; ++i) pools.context.push_back(word(i));
    int n_answers = n_context + (vocab_size - 16) / 4;
    for (; i < n_answers; ++i) pools.answers.push_back(word(i));
    for (; i < vocab_size; ++i) pools.filler.push_back(word(i));
    return pools;
}

std::vector<std::string> sample_distinct(Rng& rng, const std::vector<std::string>& pool, int n) {
    std::vector<std::string> out;
    while (static_cast<int>(out.size()) < n) {
        const std::string& tok = rng.pick(pool);
        if (std::find(out.begin(), out.end(), tok) == out.end()) out.push_back(tok);
    }
    return out;
}

std::vector<std::string> sample_filler(Rng& rng, const Pools& pools, int n) {
    std::vector<std::string> out;
    out.reserve(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) out.push_back(rng.pick(pools.filler));
    return out;
}

}  // namespace

std::vector<Question> SynthData::all_questions() const {
    std::vector<Question> out = train;
    out.insert(out.end(), dev.begin(), dev.end());
    out.insert(out.end(), test.begin(), test.end());
    return out;
}

const GoldEvidence& SynthData::evidence_for(const std::string& question_id) const {
    for (const GoldEvidence& e : evidence) {
        if (e.question_id == question_id) return e;
    }
    throw DataError("no gold evidence for question " + question_id);
}

SynthData generate(const SynthConfig& config) {
    if (config.n_tables < 1 || config.rows_per_table < 2 || config.columns < 2) {
        throw DataError("synth: need at least 1 table, 2 rows, 2 columns");
    }
    Rng rng(config.seed);
    Pools pools = make_pools(config.vocab_size);

    SynthData data;
    std::vector<Question> questions;

    for (int ti = 0; ti < config.n_tables; ++ti) {
        std::ostringstream tid;
        tid << "T" << ti;
        Table t;
        t.id = tid.str();
        t.meta = join(sample_filler(rng, pools, 3));
        t.headers = sample_distinct(rng, pools.headers, config.columns);

        // row skeleton: filler cells, one filler passage per row
        std::vector<std::vector<std::string>> passage_tokens(
            static_cast<size_t>(config.rows_per_table));
        for (int r = 0; r < config.rows_per_table; ++r) {
            std::vector<Cell> cells;
            for (int c = 0; c < config.columns; ++c) {
                cells.push_back({join(sample_filler(rng, pools, c == 0 ? 2 : 1)), {}});
            }
            passage_tokens[static_cast<size_t>(r)] =
                sample_filler(rng, pools, 8 + static_cast<int>(rng.index(8)));
            t.rows.push_back(std::move(cells));
        }

        // the question this table answers
        int gold_row = static_cast<int>(rng.index(static_cast<size_t>(config.rows_per_table)));
        std::vector<std::string> ctx = sample_distinct(rng, pools.context, 4);
        bool cell_answer = rng.bernoulli(config.p_cell_answer);
        int answer_len = config.two_token_answers && rng.bernoulli(0.5) ? 2 : 1;
        std::vector<std::string> answer_tokens = sample_distinct(rng, pools.answers, answer_len);
        std::string answer = join(answer_tokens);

        std::string extra_term;  // a tag, or the answer column's header
        int answer_column = config.columns - 1;
        if (cell_answer) {
            extra_term = t.headers[static_cast<size_t>(answer_column)];
        } else {
            extra_term = rng.pick(pools.tags);
        }
        std::ostringstream qid;
        qid << "Q" << ti;
        Question q;
        q.id = qid.str();
        q.text = join(ctx) + " " + extra_term;
        q.answer_text = answer;
        q.table_id = t.id;

        // gold passage: context tokens around the answer (or around nothing
        // for cell answers), padded with filler
        GoldEvidence ev;
        ev.question_id = q.id;
        ev.table_id = t.id;
        ev.row = gold_row;
        ev.answer = answer;

        std::vector<std::string>& gold_psg = passage_tokens[static_cast<size_t>(gold_row)];
        gold_psg = sample_filler(rng, pools, 2);
        bool decoy_span = !cell_answer && rng.bernoulli(config.p_multispan);
        if (decoy_span) {
            gold_psg.push_back(answer_tokens[0]);
            if (answer_len == 2) gold_psg.push_back(answer_tokens[1]);
            auto pad = sample_filler(rng, pools, 3);
            gold_psg.insert(gold_psg.end(), pad.begin(), pad.end());
        }
        gold_psg.push_back(ctx[0]);
        gold_psg.push_back(ctx[1]);
        if (!cell_answer) {
            ev.start = static_cast<int>(gold_psg.size());
            for (const auto& tok : answer_tokens) gold_psg.push_back(tok);
            ev.end = static_cast<int>(gold_psg.size()) - 1;
        }
        gold_psg.push_back(ctx[2]);
        gold_psg.push_back(ctx[3]);
        auto tail = sample_filler(rng, pools, 2);
        gold_psg.insert(gold_psg.end(), tail.begin(), tail.end());

        if (cell_answer) {
            t.rows[static_cast<size_t>(gold_row)][static_cast<size_t>(answer_column)].text = answer;
            ev.source = SpanSource::cell(answer_column);
            ev.start = 0;
            ev.end = answer_len - 1;
        }

        // decoy rows carry the answer string without the question context
        if (rng.bernoulli(config.p_multirow)) {
            int n_decoys = 1 + (rng.bernoulli(0.5) ? 1 : 0);
            std::vector<int> candidates;
            for (int r = 0; r < config.rows_per_table; ++r) {
                if (r != gold_row) candidates.push_back(r);
            }
            rng.shuffle(candidates);
            for (int d = 0; d < n_decoys && d < static_cast<int>(candidates.size()); ++d) {
                int row = candidates[static_cast<size_t>(d)];
                if (cell_answer) {
                    t.rows[static_cast<size_t>(row)][static_cast<size_t>(answer_column)].text =
                        answer;
                } else {
                    // a heavy footprint of the question's type term, the way
                    // answer-type words repeat across spurious rows
                    t.rows[static_cast<size_t>(row)][1].text =
                        extra_term + " " + extra_term + " " + extra_term + " " + answer;
                    auto& psg = passage_tokens[static_cast<size_t>(row)];
                    for (int rep = 0; rep < 5; ++rep) psg.push_back(extra_term);
                }
                int leak = static_cast<int>(std::lround(config.decoy_similarity * 4));
                auto& decoy_psg = passage_tokens[static_cast<size_t>(row)];
                for (int l = 0; l < leak; ++l) decoy_psg.push_back(ctx[static_cast<size_t>(l)]);
            }
        }

        // attach passages; the gold row optionally gets filler passages that
        // crowd the budget
        for (int r = 0; r < config.rows_per_table; ++r) {
            std::ostringstream pid;
            pid << t.id << "_R" << r;
            Passage p;
            p.id = pid.str();
            p.title = join(sample_filler(rng, pools, 2));
            p.text = join(passage_tokens[static_cast<size_t>(r)]);
            data.corpus.add_passage(std::move(p));

            std::vector<std::string> links;
            if (r == gold_row && config.filler_passages > 0) {
                std::vector<std::string> filler_ids;
                for (int fjob = 0; fjob < config.filler_passages; ++fjob) {
                    std::ostringstream fid;
                    fid << t.id << "_R" << r << "_F" << fjob;
                    Passage filler;
                    filler.id = fid.str();
                    filler.title = join(sample_filler(rng, pools, 2));
                    filler.text = join(sample_filler(rng, pools, config.filler_passage_len));
                    data.corpus.add_passage(std::move(filler));
                    filler_ids.push_back(fid.str());
                }
                if (config.gold_passage_last) {
                    links = filler_ids;
                    links.push_back(pid.str());
                } else {
                    links.push_back(pid.str());
                    links.insert(links.end(), filler_ids.begin(), filler_ids.end());
                }
            } else {
                links.push_back(pid.str());
            }
            t.rows[static_cast<size_t>(r)][0].links = links;
        }
        if (!cell_answer) ev.source = SpanSource::passage(t.id + "_R" + std::to_string(gold_row));

        data.corpus.add_table(std::move(t));
        data.evidence.push_back(std::move(ev));
        questions.push_back(std::move(q));
    }

    size_t n = questions.size();
    size_t n_train = static_cast<size_t>(std::lround(config.train_fraction * n));
    size_t n_dev = static_cast<size_t>(std::lround(config.dev_fraction * n));
    n_train = std::min(n_train, n);
    n_dev = std::min(n_dev, n - n_train);
    for (size_t i = 0; i < n; ++i) {
        if (i < n_train) {
            data.train.push_back(questions[i]);
        } else if (i < n_train + n_dev) {
            data.dev.push_back(questions[i]);
        } else {
            data.test.push_back(questions[i]);
        }
    }
    return data;
}

namespace {

json source_to_json(const SpanSource& s) {
    if (s.kind == SpanSource::Kind::Cell) {
        return {{"kind", "cell"}, {"column", s.column}};
    }
    return {{"kind", "passage"}, {"id", s.passage_id}};
}

SpanSource source_from_json(const json& j) {
    if (j.at("kind") == "cell") return SpanSource::cell(j.at("column").get<int>());
    return SpanSource::passage(j.at("id").get<std::string>());
}

}  // namespace

void save_gold_evidence(const std::vector<GoldEvidence>& evidence, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path);
    for (const GoldEvidence& e : evidence) {
        json j = {{"question_id", e.question_id}, {"table_id", e.table_id}, {"row", e.row},
                  {"source", source_to_json(e.source)}, {"start", e.start}, {"end", e.end},
                  {"answer", e.answer}};
        out << j.dump() << "\n";
    }
}

std::vector<GoldEvidence> load_gold_evidence(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path);
    std::vector<GoldEvidence> out;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded()) {
            throw DataError(path + " line " + std::to_string(lineno) + ": malformed record");
        }
        GoldEvidence e;
        e.question_id = j.at("question_id").get<std::string>();
        e.table_id = j.at("table_id").get<std::string>();
        e.row = j.at("row").get<int>();
        e.source = source_from_json(j.at("source"));
        e.start = j.at("start").get<int>();
        e.end = j.at("end").get<int>();
        e.answer = j.at("answer").get<std::string>();
        out.push_back(std::move(e));
    }
    return out;
}

void save_synth(const SynthData& data, const std::string& dir) {
    save_tables(data.corpus, dir + "/tables.jsonl");
    save_passages(data.corpus, dir + "/passages.jsonl");
    save_questions(data.train, dir + "/questions_train.jsonl");
    save_questions(data.dev, dir + "/questions_dev.jsonl");
    save_questions(data.test, dir + "/questions_test.jsonl");
    save_gold_evidence(data.evidence, dir + "/gold.jsonl");
}

OracleReport oracle_evaluate(const std::vector<Prediction>& predictions,
                             const std::vector<GoldEvidence>& evidence,
                             const std::vector<ExtractionInstance>* mst_instances,
                             const std::map<size_t, std::pair<int, int>>* denoised) {
    std::map<std::string, const GoldEvidence*> by_id;
    for (const GoldEvidence& e : evidence) by_id[e.question_id] = &e;

    OracleReport report;
    int scored = 0, row_hits = 0;
    double em_sum = 0.0;
    for (const Prediction& p : predictions) {
        auto it = by_id.find(p.question_id);
        if (it == by_id.end()) continue;
        ++scored;
        if (p.row == it->second->row && p.table_id == it->second->table_id) ++row_hits;
        em_sum += exact_match(p.answer, it->second->answer);
    }
    if (scored > 0) {
        report.row_accuracy = static_cast<double>(row_hits) / scored;
        report.em = em_sum / scored;
    }

    if (mst_instances && denoised) {
        int checked = 0, correct = 0;
        for (const auto& [idx, span] : *denoised) {
            const ExtractionInstance& inst = (*mst_instances)[idx];
            auto it = by_id.find(inst.question_id);
            if (it == by_id.end()) continue;
            const GoldEvidence& e = *it->second;
            if (inst.table_id != e.table_id || inst.row != e.row) continue;
            auto truth = map_span_to_context(inst.context, e.source, e.start, e.end);
            if (!truth) continue;
            ++checked;
            if (*truth == span) ++correct;
        }
        if (checked > 0) report.denoise_accuracy = static_cast<double>(correct) / checked;
    }
    return report;
}

}  // namespace ttqa
