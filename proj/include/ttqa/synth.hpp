#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ttqa/answer_extractor.hpp"
#include "ttqa/corpus.hpp"
#include "ttqa/metrics.hpp"

namespace ttqa {

// Knobs for the planted-ground-truth corpus. Same seed, same bytes.
struct SynthConfig {
    uint64_t seed = 7;
    int n_tables = 60;
    int rows_per_table = 8;
    int columns = 3;
    int vocab_size = 300;

    // probability the answer string is planted in extra decoy rows
    double p_multirow = 0.0;
    // probability of extra answer occurrences inside the gold row's passage,
    // always placed before the context-supported occurrence
    double p_multispan = 0.0;
    // 0 = decoy contexts share nothing with the question, 1 = everything
    double decoy_similarity = 0.0;
    // fraction of questions answered from a table cell instead of a passage
    double p_cell_answer = 0.0;
    // extra unrelated passages linked to the gold row, for budget stress
    int filler_passages = 0;
    int filler_passage_len = 40;
    bool gold_passage_last = false;  // link the gold passage after the fillers
    bool two_token_answers = false;  // half the answers become two tokens

    double train_fraction = 0.7;
    double dev_fraction = 0.15;
};

// The planted truth for one question: the evidence row and the exact span the
// question was built around.
struct GoldEvidence {
    std::string question_id;
    std::string table_id;
    int row = -1;
    SpanSource source;
    int start = 0;
    int end = 0;
    std::string answer;
};

struct SynthData {
    Corpus corpus;
    std::vector<Question> train;
    std::vector<Question> dev;
    std::vector<Question> test;
    std::vector<GoldEvidence> evidence;

    std::vector<Question> all_questions() const;
    const GoldEvidence& evidence_for(const std::string& question_id) const;
};

SynthData generate(const SynthConfig& config);

// Writes tables/passages/questions_{train,dev,test}/gold JSON Lines files.
void save_synth(const SynthData& data, const std::string& dir);

std::vector<GoldEvidence> load_gold_evidence(const std::string& path);
void save_gold_evidence(const std::vector<GoldEvidence>& evidence, const std::string& path);

struct OracleReport {
    double row_accuracy = 0.0;
    double em = 0.0;
    // fraction of denoised multi-span instances whose chosen span is the truth;
    // negative when no denoising information was supplied
    double denoise_accuracy = -1.0;
};

OracleReport oracle_evaluate(const std::vector<Prediction>& predictions,
                             const std::vector<GoldEvidence>& evidence,
                             const std::vector<ExtractionInstance>* mst_instances = nullptr,
                             const std::map<size_t, std::pair<int, int>>* denoised = nullptr);

}  // namespace ttqa
