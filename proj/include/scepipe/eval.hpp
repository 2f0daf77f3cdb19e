#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "scepipe/telemetry.hpp"

namespace scepipe {

/// Lowercase, split on runs of non-alphanumeric characters, drop empties.
std::vector<std::string> tokenize(const std::string& text);

/// Longest common subsequence length over token sequences.
std::size_t lcsLength(std::span<const std::string> a, std::span<const std::string> b);

/// ROUGE-L F1: P = LCS/|cand|, R = LCS/|ref|, F1 = 2PR/(P+R); 0 when either
/// side tokenizes empty or P+R is 0.
double rougeLF1(const std::string& candidate, const std::string& reference);

/// Lowercase, strip punctuation, collapse whitespace, drop leading articles
/// (a/an/the). No numeral unification: "3" and "three" stay distinct.
std::string normalizeAnswer(const std::string& text);

/// Case-insensitive keyword scan; near-collision variants take priority over
/// the bare "collision" substring, which they contain.
SceClass parseScePrediction(const std::string& text);

struct PredictionRecord {
    std::string example_id;
    std::string task; // caption | open_qa | closed_qa | sce_cls
    std::string source;
    std::string prediction_text;
    std::string reference_text;
    std::optional<SceClass> sce_label;
};

/// Exact-match rate after normalizeAnswer on both sides.
/// Throws Errc::EmptyInput.
double closedQaAccuracy(std::span<const PredictionRecord> rows);

/// 3-class + binary-collapse classification metrics. Unknown predictions are
/// always wrong in 3-class and count as negative in the binary collapse
/// ({near-collision, collision} -> positive, normal -> negative).
struct ClassificationReport {
    std::size_t n = 0;
    double accuracy3 = 0.0;
    std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
    double precision_pos = 0.0; // 0 with warning when TP+FP == 0
    double recall_pos = 0.0;
    double accuracy2 = 0.0;
    bool zero_division_warning = false;
};

ClassificationReport classificationReport(std::span<const SceClass> predictions,
                                          std::span<const SceClass> labels);

/// One metric row per scope ("overall" or a source name).
struct EvalCell {
    std::size_t n_rouge = 0;
    double rouge_l_f1 = 0.0;
    std::optional<double> bertscore; // merged from an external file only
    std::size_t n_bertscore = 0;
    std::size_t n_closed = 0;
    double closed_qa_accuracy = 0.0;
    ClassificationReport sce;
};

struct EvalReport {
    EvalCell overall;
    std::map<std::string, EvalCell> per_source;
    std::size_t n_rows = 0;
};

/// Scores all rows: ROUGE-L over caption + open_qa, normalized accuracy over
/// closed_qa, classification metrics over sce_cls (predictions parsed from
/// free text). external_scores, when present, merges a per-example BERTScore
/// column. Throws Errc::EmptyInput on an empty row set.
EvalReport evaluateRows(std::span<const PredictionRecord> rows,
                        const std::map<std::string, double>* external_scores = nullptr);

std::string renderEvalReportText(const EvalReport& report);
std::vector<Record> evalReportRecords(const EvalReport& report);

} // namespace scepipe
