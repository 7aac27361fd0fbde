#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lida/encoder.hpp"
#include "lida/metrics.hpp"
#include "lida/registry.hpp"

namespace lida {

// Encodes every fingerprint; output order matches input order for any thread count.
std::vector<FeatureVector> encode_all(const Encoder& encoder, std::span<const FingerprintImage> fps,
                                      int threads = 0);

struct EvalOptions {
    std::size_t vote_k = 0;  // 0 = rank-1 label, otherwise majority over the top vote_k
    bool two_stage = false;  // detection first, then attribution among generators
    double threshold = 0.85;
    std::optional<RealPrototype> prototype;  // required for two_stage / detection accuracy
};

struct Evaluation {
    std::vector<QueryOutcome> outcomes;
    EvalReport report;
};

// Full rankings for every query feature plus the aggregated report. When a
// prototype is given, detection accuracy uses truth = (label == "real").
Evaluation evaluate(std::span<const FeatureVector> queries, std::span<const std::string> true_labels,
                    const Registry& registry, const EvalOptions& options);

struct ThresholdCalibration {
    double threshold = 0.0;
    double accuracy = 0.0;  // percent on the calibration data
};

// Threshold maximizing accuracy of (sim >= t) == is_real over the given
// similarities; candidates are midpoints between consecutive distinct values.
// Ties go to the smallest threshold.
ThresholdCalibration calibrate_threshold(std::span<const double> similarities, const std::vector<bool>& is_real);

}  // namespace lida
