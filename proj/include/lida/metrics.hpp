#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lida/retrieval.hpp"

namespace lida {

struct QueryOutcome {
    RankedResult ranking;  // full ranking for mAP
    std::string true_label;
    std::string predicted_label;  // empty means ranking.top_label()
};

// Percentage of queries whose predicted (default: rank-1) label is correct.
double rank1(std::span<const QueryOutcome> outcomes);

// Mean over relevant ranks r of precision@r, relevance = label match.
// nullopt when the ranking holds no relevant entry.
std::optional<double> average_precision(const RankedResult& ranking, const std::string& true_label);

struct MapResult {
    double percent = 0.0;
    std::size_t evaluated = 0;
    std::size_t excluded = 0;  // queries with no relevant exemplar
};

MapResult mean_average_precision(std::span<const QueryOutcome> outcomes);

// Percentage of positions where verdicts[i] == truths[i].
double detection_accuracy(const std::vector<bool>& verdicts, const std::vector<bool>& truths);

struct LabelScores {
    std::string label;
    std::size_t queries = 0;
    double rank1 = 0.0;
    std::optional<double> map;  // unset when no query of this label has a relevant exemplar
};

struct EvalReport {
    std::vector<LabelScores> per_label;  // sorted by label
    double avg_rank1 = 0.0;  // unweighted mean over labels
    double avg_map = 0.0;    // over labels with a defined mAP
    std::optional<double> detection_accuracy;
    std::size_t query_count = 0;
    std::size_t map_excluded = 0;

    std::string to_table() const;  // aligned plain text
    std::string to_tsv() const;    // tab-separated, one row per label plus "Avg"
};

EvalReport build_report(std::span<const QueryOutcome> outcomes,
                        std::optional<double> detection_accuracy = std::nullopt);

}  // namespace lida
