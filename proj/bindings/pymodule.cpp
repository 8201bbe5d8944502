#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "ttqa/common.hpp"
#include "ttqa/context.hpp"
#include "ttqa/corpus.hpp"
#include "ttqa/metrics.hpp"
#include "ttqa/open_domain.hpp"
#include "ttqa/pipeline.hpp"
#include "ttqa/reranker.hpp"
#include "ttqa/row_retriever.hpp"
#include "ttqa/supervision.hpp"
#include "ttqa/synth.hpp"

namespace py = pybind11;

namespace {

ttqa::PipelineConfig config_from(const std::string& path,
                                 const std::map<std::string, std::string>& overrides) {
    ttqa::PipelineConfig cfg = path.empty() ? ttqa::PipelineConfig{}
                                            : ttqa::PipelineConfig::from_file(path);
    for (const auto& [key, value] : overrides) cfg.set(key, value);
    return cfg;
}

}  // namespace

PYBIND11_MODULE(_ttqa, m) {
    m.doc() = "table+text question answering core";

    py::register_exception<ttqa::UsageError>(m, "UsageError");
    py::register_exception<ttqa::DataError>(m, "DataError");
    py::register_exception<ttqa::MissingArtifactError>(m, "MissingArtifactError");

    m.def("normalize_answer", &ttqa::normalize_answer, py::arg("text"));
    m.def("tokenize", &ttqa::tokenize, py::arg("text"));
    m.def("exact_match", &ttqa::exact_match, py::arg("pred"), py::arg("gold"));
    m.def("f1_token", &ttqa::f1_token, py::arg("pred"), py::arg("gold"));
    m.def("enumerate_spans", &ttqa::enumerate_spans, py::arg("tokens"), py::arg("answer"));
    m.def("mil_loss",
          [](const std::map<int, double>& scores, const std::vector<int>& positives) {
              return ttqa::mil_loss(scores, std::set<int>(positives.begin(), positives.end()));
          },
          py::arg("bag_scores"), py::arg("positive_rows"));
    m.def("simplex_grid", &ttqa::simplex_grid, py::arg("step") = 0.1);

    py::class_<ttqa::Corpus>(m, "Corpus")
        .def_property_readonly("n_tables",
                               [](const ttqa::Corpus& c) { return c.tables().size(); })
        .def_property_readonly("n_passages",
                               [](const ttqa::Corpus& c) { return c.passages().size(); })
        .def("table_ids", [](const ttqa::Corpus& c) {
            std::vector<std::string> ids;
            for (const auto& t : c.tables()) ids.push_back(t.id);
            return ids;
        });

    m.def("load_corpus", &ttqa::load_corpus, py::arg("tables_path"), py::arg("passages_path"));

    m.def("find_answer_rows",
          [](const ttqa::Corpus& corpus, const std::string& table_id, const std::string& answer) {
              auto bag = ttqa::find_answer_rows(corpus.table(table_id), corpus, answer);
              std::map<int, int> out;
              for (const auto& [row, spans] : bag.spans_per_row) {
                  out[row] = static_cast<int>(spans.size());
              }
              return out;
          },
          py::arg("corpus"), py::arg("table_id"), py::arg("answer"),
          "rows containing the answer, mapped to their span counts");

    py::class_<ttqa::TableIndex>(m, "TableIndex")
        .def("retrieve",
             [](const ttqa::TableIndex& index, const std::string& question, int k) {
                 ttqa::Question q{"q", question, std::nullopt, std::nullopt};
                 return ttqa::retrieve_tables(q, index, k);
             },
             py::arg("question"), py::arg("k") = 5);

    m.def("build_table_index", &ttqa::build_table_index, py::arg("corpus"),
          py::arg("k1") = 1.2, py::arg("b") = 0.75);

    m.def("generate_synth",
          [](const std::string& out_dir, uint64_t seed, int tables, int rows, double p_multirow,
             double p_multispan, double p_cell_answer) {
              ttqa::SynthConfig cfg;
              cfg.seed = seed;
              cfg.n_tables = tables;
              cfg.rows_per_table = rows;
              cfg.p_multirow = p_multirow;
              cfg.p_multispan = p_multispan;
              cfg.p_cell_answer = p_cell_answer;
              ttqa::save_synth(ttqa::generate(cfg), out_dir);
          },
          py::arg("out_dir"), py::arg("seed") = 7, py::arg("tables") = 60, py::arg("rows") = 8,
          py::arg("p_multirow") = 0.0, py::arg("p_multispan") = 0.0,
          py::arg("p_cell_answer") = 0.0);

    m.def("run_pipeline",
          [](const std::string& config_path, const std::map<std::string, std::string>& overrides,
             const std::vector<std::string>& stages) {
              ttqa::run_pipeline(config_from(config_path, overrides), stages);
          },
          py::arg("config_path"), py::arg("overrides") = std::map<std::string, std::string>{},
          py::arg("stages") = std::vector<std::string>{});

    m.def("evaluate_files",
          [](const std::string& predictions_path, const std::string& questions_path) {
              std::string hash;
              auto predictions = ttqa::load_predictions(predictions_path, &hash);
              auto gold = ttqa::load_questions(questions_path);
              auto report = ttqa::evaluate(predictions, gold);
              std::map<std::string, double> out;
              out["em"] = report.total.em();
              out["f1"] = report.total.f1();
              out["n"] = report.total.count;
              return out;
          },
          py::arg("predictions_path"), py::arg("questions_path"));
}
