#include "scepipe/eval.hpp"

#include "scepipe/error.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <sstream>

namespace scepipe {

namespace {

bool isAlnumAscii(unsigned char c) { return std::isalnum(c) != 0; }

std::string lowerAscii(const std::string& text) {
    std::string out = text;
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

} // namespace

std::vector<std::string> tokenize(const std::string& text) {
    std::vector<std::string> tokens;
    std::string current;
    for (unsigned char c : text) {
        if (isAlnumAscii(c)) {
            current += static_cast<char>(std::tolower(c));
        } else if (!current.empty()) {
            tokens.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) tokens.push_back(std::move(current));
    return tokens;
}

std::size_t lcsLength(std::span<const std::string> a, std::span<const std::string> b) {
    if (a.empty() || b.empty()) return 0;
    // Rolling single-row DP; O(|a|*|b|) time, O(|b|) space.
    std::vector<std::size_t> row(b.size() + 1, 0);
    for (std::size_t i = 1; i <= a.size(); ++i) {
        std::size_t diagonal = 0; // row[j-1] from the previous iteration
        for (std::size_t j = 1; j <= b.size(); ++j) {
            std::size_t above = row[j];
            row[j] = (a[i - 1] == b[j - 1]) ? diagonal + 1 : std::max(row[j], row[j - 1]);
            diagonal = above;
        }
    }
    return row[b.size()];
}

double rougeLF1(const std::string& candidate, const std::string& reference) {
    const std::vector<std::string> cand = tokenize(candidate);
    const std::vector<std::string> ref = tokenize(reference);
    if (cand.empty() || ref.empty()) return 0.0;
    const double lcs = static_cast<double>(lcsLength(cand, ref));
    const double precision = lcs / static_cast<double>(cand.size());
    const double recall = lcs / static_cast<double>(ref.size());
    if (precision + recall == 0.0) return 0.0;
    return 2.0 * precision * recall / (precision + recall);
}

std::string normalizeAnswer(const std::string& text) {
    std::vector<std::string> tokens = tokenize(text);
    std::size_t start = 0;
    while (start < tokens.size() &&
           (tokens[start] == "a" || tokens[start] == "an" || tokens[start] == "the"))
        ++start;
    std::string out;
    for (std::size_t i = start; i < tokens.size(); ++i) {
        if (!out.empty()) out += ' ';
        out += tokens[i];
    }
    return out;
}

SceClass parseScePrediction(const std::string& text) {
    const std::string lower = lowerAscii(text);
    auto contains = [&lower](const char* needle) {
        return lower.find(needle) != std::string::npos;
    };
    // "near-collision" contains "collision": the near checks must run first.
    if (contains("near-collision") || contains("near collision") || contains("near miss"))
        return SceClass::NearCollision;
    if (contains("collision") || contains("crash") || contains("impact"))
        return SceClass::Collision;
    if (contains("normal") || contains("no event")) return SceClass::Normal;
    return SceClass::Unknown;
}

double closedQaAccuracy(std::span<const PredictionRecord> rows) {
    if (rows.empty()) throw Error(Errc::EmptyInput, "no closed QA rows");
    std::size_t correct = 0;
    for (const PredictionRecord& row : rows)
        if (normalizeAnswer(row.prediction_text) == normalizeAnswer(row.reference_text)) ++correct;
    return static_cast<double>(correct) / static_cast<double>(rows.size());
}

ClassificationReport classificationReport(std::span<const SceClass> predictions,
                                          std::span<const SceClass> labels) {
    if (predictions.size() != labels.size())
        throw Error(Errc::LengthMismatch, std::to_string(predictions.size()) +
                                              " predictions vs " + std::to_string(labels.size()) +
                                              " labels");
    if (predictions.empty()) throw Error(Errc::EmptyInput, "no classification rows");

    ClassificationReport report;
    report.n = predictions.size();
    std::size_t correct3 = 0;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        const SceClass pred = predictions[i];
        const SceClass label = labels[i];
        if (pred == label && pred != SceClass::Unknown) ++correct3;
        const bool label_pos = label == SceClass::NearCollision || label == SceClass::Collision;
        const bool pred_pos = pred == SceClass::NearCollision || pred == SceClass::Collision;
        if (pred_pos && label_pos) ++report.tp;
        else if (pred_pos && !label_pos) ++report.fp;
        else if (!pred_pos && label_pos) ++report.fn;
        else ++report.tn;
    }
    report.accuracy3 = static_cast<double>(correct3) / static_cast<double>(report.n);
    if (report.tp + report.fp == 0) {
        report.precision_pos = 0.0;
        report.zero_division_warning = true;
    } else {
        report.precision_pos =
            static_cast<double>(report.tp) / static_cast<double>(report.tp + report.fp);
    }
    report.recall_pos = (report.tp + report.fn == 0)
                            ? 0.0
                            : static_cast<double>(report.tp) /
                                  static_cast<double>(report.tp + report.fn);
    if (report.tp + report.fn == 0) report.zero_division_warning = true;
    report.accuracy2 =
        static_cast<double>(report.tp + report.tn) / static_cast<double>(report.n);
    return report;
}

namespace {

struct CellAccumulator {
    double rouge_sum = 0.0;
    std::size_t n_rouge = 0;
    double bert_sum = 0.0;
    std::size_t n_bert = 0;
    std::size_t closed_correct = 0;
    std::size_t n_closed = 0;
    std::vector<SceClass> sce_preds;
    std::vector<SceClass> sce_labels;

    void add(const PredictionRecord& row, const std::map<std::string, double>* external_scores) {
        if (row.task == "caption" || row.task == "open_qa") {
            rouge_sum += rougeLF1(row.prediction_text, row.reference_text);
            ++n_rouge;
            if (external_scores) {
                auto it = external_scores->find(row.example_id);
                if (it != external_scores->end()) {
                    bert_sum += it->second;
                    ++n_bert;
                }
            }
        } else if (row.task == "closed_qa") {
            if (normalizeAnswer(row.prediction_text) == normalizeAnswer(row.reference_text))
                ++closed_correct;
            ++n_closed;
        } else if (row.task == "sce_cls") {
            if (!row.sce_label)
                throw Error(Errc::MalformedRecord,
                            row.example_id + ": sce_cls row without sce_label");
            sce_preds.push_back(parseScePrediction(row.prediction_text));
            sce_labels.push_back(*row.sce_label);
        } else {
            throw Error(Errc::MalformedRecord, row.example_id + ": unknown task \"" + row.task +
                                                   "\"");
        }
    }

    EvalCell finish() const {
        EvalCell cell;
        cell.n_rouge = n_rouge;
        cell.rouge_l_f1 = n_rouge ? rouge_sum / static_cast<double>(n_rouge) : 0.0;
        if (n_bert) {
            cell.bertscore = bert_sum / static_cast<double>(n_bert);
            cell.n_bertscore = n_bert;
        }
        cell.n_closed = n_closed;
        cell.closed_qa_accuracy =
            n_closed ? static_cast<double>(closed_correct) / static_cast<double>(n_closed) : 0.0;
        if (!sce_preds.empty()) cell.sce = classificationReport(sce_preds, sce_labels);
        return cell;
    }
};

std::string formatRate(double value) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4f", value);
    return buf;
}

} // namespace

EvalReport evaluateRows(std::span<const PredictionRecord> rows,
                        const std::map<std::string, double>* external_scores) {
    if (rows.empty()) throw Error(Errc::EmptyInput, "no prediction rows");
    CellAccumulator overall;
    std::map<std::string, CellAccumulator> by_source;
    for (const PredictionRecord& row : rows) {
        overall.add(row, external_scores);
        by_source[row.source].add(row, external_scores);
    }
    EvalReport report;
    report.n_rows = rows.size();
    report.overall = overall.finish();
    for (const auto& [source, acc] : by_source) report.per_source[source] = acc.finish();
    return report;
}

namespace {

void renderCell(std::ostream& out, const std::string& scope, const EvalCell& cell) {
    out << scope << ":\n";
    out << "  rouge_l_f1          " << formatRate(cell.rouge_l_f1) << "  (n=" << cell.n_rouge
        << ")\n";
    out << "  bertscore           "
        << (cell.bertscore ? formatRate(*cell.bertscore) : std::string("-"))
        << "  (n=" << cell.n_bertscore << ")\n";
    out << "  closed_qa_accuracy  " << formatRate(cell.closed_qa_accuracy)
        << "  (n=" << cell.n_closed << ")\n";
    out << "  sce3_accuracy       " << formatRate(cell.sce.accuracy3) << "  (n=" << cell.sce.n
        << ")\n";
    out << "  sce2_precision_pos  " << formatRate(cell.sce.precision_pos)
        << (cell.sce.zero_division_warning ? "  [zero-division]" : "") << "\n";
    out << "  sce2_recall_pos     " << formatRate(cell.sce.recall_pos) << "\n";
    out << "  sce2_accuracy       " << formatRate(cell.sce.accuracy2) << "\n";
    out << "  sce2_confusion      tp=" << cell.sce.tp << " fp=" << cell.sce.fp
        << " tn=" << cell.sce.tn << " fn=" << cell.sce.fn << "\n";
}

void cellRecords(std::vector<Record>& out, const std::string& scope, const EvalCell& cell) {
    auto push = [&out, &scope](const char* metric, double value, std::size_t n) {
        Record record;
        record.set("scope", scope);
        record.set("metric", metric);
        record.set("value", value);
        record.set("n", static_cast<std::int64_t>(n));
        out.push_back(std::move(record));
    };
    push("rouge_l_f1", cell.rouge_l_f1, cell.n_rouge);
    if (cell.bertscore) push("bertscore", *cell.bertscore, cell.n_bertscore);
    push("closed_qa_accuracy", cell.closed_qa_accuracy, cell.n_closed);
    push("sce3_accuracy", cell.sce.accuracy3, cell.sce.n);
    push("sce2_precision_pos", cell.sce.precision_pos, cell.sce.n);
    push("sce2_recall_pos", cell.sce.recall_pos, cell.sce.n);
    push("sce2_accuracy", cell.sce.accuracy2, cell.sce.n);
    push("sce2_tp", static_cast<double>(cell.sce.tp), cell.sce.n);
    push("sce2_fp", static_cast<double>(cell.sce.fp), cell.sce.n);
    push("sce2_tn", static_cast<double>(cell.sce.tn), cell.sce.n);
    push("sce2_fn", static_cast<double>(cell.sce.fn), cell.sce.n);
}

} // namespace

std::string renderEvalReportText(const EvalReport& report) {
    std::ostringstream out;
    out << "evaluation report (" << report.n_rows << " rows)\n";
    renderCell(out, "overall", report.overall);
    for (const auto& [source, cell] : report.per_source) renderCell(out, "source " + source, cell);
    return out.str();
}

std::vector<Record> evalReportRecords(const EvalReport& report) {
    std::vector<Record> records;
    cellRecords(records, "overall", report.overall);
    for (const auto& [source, cell] : report.per_source) cellRecords(records, source, cell);
    return records;
}

} // namespace scepipe
