#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ttqa/common.hpp"
#include "ttqa/open_domain.hpp"
#include "ttqa/pipeline.hpp"
#include "ttqa/synth.hpp"

namespace {

struct CommonOpts {
    std::string config_path;
    std::vector<std::string> overrides;
    std::string output_dir;
    unsigned jobs = 0;
    bool force = false;
};

void add_common(CLI::App* cmd, CommonOpts& opts, bool config_required = true) {
    auto* c = cmd->add_option("--config", opts.config_path, "pipeline config file");
    if (config_required) c->required();
    cmd->add_option("--set", opts.overrides, "override a config key, e.g. --set budget=256");
    cmd->add_option("--out", opts.output_dir, "override output_dir");
    cmd->add_option("--jobs", opts.jobs, "worker cap for within-stage parallelism");
    cmd->add_flag("--force", opts.force, "ignore config hash mismatches");
}

ttqa::PipelineConfig build_config(const CommonOpts& opts) {
    ttqa::PipelineConfig cfg = opts.config_path.empty()
                                   ? ttqa::PipelineConfig{}
                                   : ttqa::PipelineConfig::from_file(opts.config_path);
    for (const std::string& pair : opts.overrides) {
        size_t eq = pair.find('=');
        if (eq == std::string::npos) throw ttqa::UsageError("--set expects key=value: " + pair);
        cfg.set(pair.substr(0, eq), pair.substr(eq + 1));
    }
    if (!opts.output_dir.empty()) cfg.output_dir = opts.output_dir;
    if (opts.jobs > 0) cfg.jobs = opts.jobs;
    if (opts.force) cfg.force = true;
    return cfg;
}

std::set<std::string> parse_toggles(const std::string& spec) {
    if (spec == "none" || spec.empty()) return {};
    if (spec == "all") return {"mil", "rf", "mst", "rsr", "pf"};
    std::set<std::string> out;
    std::istringstream in(spec);
    std::string item;
    while (std::getline(in, item, ',')) {
        if (!item.empty()) out.insert(item);
    }
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"table+text question answering pipeline"};
    app.require_subcommand(1);

    CommonOpts stage_opts;
    std::vector<std::string> stage_names = {"ingest",    "index-tables", "retrieve",
                                            "link",      "supervise",    "train-rr",
                                            "train-ae",  "tune-reranker", "predict", "eval"};
    for (const std::string& name : stage_names) {
        auto* cmd = app.add_subcommand(name, "run the " + name + " stage");
        add_common(cmd, stage_opts);
        cmd->callback([name, &stage_opts] {
            ttqa::run_pipeline(build_config(stage_opts), {name});
        });
    }

    {
        auto* cmd = app.add_subcommand("run", "run the full pipeline");
        static std::string stages_csv;
        cmd->add_option("--stages", stages_csv, "comma-separated stage list (default: full flow)");
        add_common(cmd, stage_opts);
        cmd->callback([&stage_opts] {
            std::vector<std::string> stages;
            std::istringstream in(stages_csv);
            std::string item;
            while (std::getline(in, item, ',')) {
                if (!item.empty()) stages.push_back(item);
            }
            ttqa::run_pipeline(build_config(stage_opts), stages);
        });
    }

    {
        auto* cmd = app.add_subcommand("stats", "ambiguity histogram and context statistics");
        static std::string split = "train";
        static std::string rr_model;
        static std::string json_out;
        cmd->add_option("--split", split, "train|dev|test (default train)");
        cmd->add_option("--rr-model", rr_model, "row model for retriever-selected rows");
        cmd->add_option("--json-out", json_out, "also write the JSON report here");
        add_common(cmd, stage_opts);
        cmd->callback([&stage_opts] {
            ttqa::PipelineConfig cfg = build_config(stage_opts);
            ttqa::Corpus corpus = ttqa::load_corpus(cfg.tables, cfg.passages);
            std::string questions_path = split == "dev"   ? cfg.dev_questions
                                         : split == "test" ? cfg.test_questions
                                                           : cfg.train_questions;
            auto questions = ttqa::load_questions(questions_path);
            ttqa::DatasetStats stats =
                ttqa::dataset_stats(corpus, questions, cfg.budget, rr_model);
            std::string json_text = ttqa::stats_to_json(stats);
            std::cout << json_text << "\n" << ttqa::format_stats_table(stats);
            if (!json_out.empty()) {
                std::ofstream out(json_out);
                if (!out) throw ttqa::DataError("cannot write " + json_out);
                out << json_text << "\n";
            }
        });
    }

    {
        auto* cmd = app.add_subcommand("synth", "generate a planted-ground-truth corpus");
        static std::string out_dir;
        static ttqa::SynthConfig synth;
        cmd->add_option("--out", out_dir, "output directory")->required();
        cmd->add_option("--seed", synth.seed);
        cmd->add_option("--tables", synth.n_tables);
        cmd->add_option("--rows", synth.rows_per_table);
        cmd->add_option("--cols", synth.columns);
        cmd->add_option("--vocab", synth.vocab_size);
        cmd->add_option("--p-multirow", synth.p_multirow);
        cmd->add_option("--p-multispan", synth.p_multispan);
        cmd->add_option("--decoy-similarity", synth.decoy_similarity);
        cmd->add_option("--p-cell-answer", synth.p_cell_answer);
        cmd->add_option("--filler-passages", synth.filler_passages);
        cmd->add_option("--filler-passage-len", synth.filler_passage_len);
        cmd->add_flag("--gold-last", synth.gold_passage_last,
                      "link the gold passage after the fillers");
        cmd->add_flag("--two-token-answers", synth.two_token_answers);
        cmd->add_option("--train-frac", synth.train_fraction);
        cmd->add_option("--dev-frac", synth.dev_fraction);
        cmd->callback([] {
            std::filesystem::create_directories(out_dir);
            ttqa::save_synth(ttqa::generate(synth), out_dir);
            std::cout << "wrote corpus to " << out_dir << "\n";
        });
    }

    {
        auto* cmd = app.add_subcommand("ablate", "run the pipeline under toggle combinations");
        static std::vector<std::string> toggle_specs;
        static std::string json_out;
        cmd->add_option("--toggles", toggle_specs,
                        "toggle set, e.g. --toggles none --toggles mil,rf --toggles all")
            ->required();
        cmd->add_option("--json-out", json_out, "write the matrix as JSON here");
        add_common(cmd, stage_opts);
        cmd->callback([&stage_opts] {
            ttqa::PipelineConfig cfg = build_config(stage_opts);
            std::vector<std::set<std::string>> sets;
            for (const std::string& spec : toggle_specs) sets.push_back(parse_toggles(spec));
            ttqa::AblationMatrix matrix = ttqa::ablation_matrix(cfg, sets);
            std::cout << ttqa::format_ablation_table(matrix);
            if (!json_out.empty()) {
                std::ostringstream rows;
                rows << "[";
                for (size_t i = 0; i < matrix.rows.size(); ++i) {
                    const auto& row = matrix.rows[i];
                    rows << (i ? "," : "") << "{\"toggles\":[";
                    size_t j = 0;
                    for (const auto& t : row.toggles) rows << (j++ ? "," : "") << "\"" << t << "\"";
                    rows << "],\"em\":" << row.em << ",\"f1\":" << row.f1 << "}";
                }
                rows << "]";
                std::ofstream out(json_out);
                if (!out) throw ttqa::DataError("cannot write " + json_out);
                out << rows.str() << "\n";
            }
        });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    } catch (const ttqa::UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    } catch (const ttqa::MissingArtifactError& e) {
        std::cerr << "missing artifact: " << e.what() << "\n";
        return 3;
    } catch (const ttqa::DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
