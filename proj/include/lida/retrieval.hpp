#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "lida/encoder.hpp"
#include "lida/image.hpp"
#include "lida/losses.hpp"
#include "lida/registry.hpp"

namespace lida {

struct RankedEntry {
    std::uint64_t id = 0;
    std::string label;
    double similarity = 0.0;

    bool operator==(const RankedEntry&) const = default;
};

// Similarities non-increasing; equal similarities ordered by ascending id.
struct RankedResult {
    std::string query_id;
    std::vector<RankedEntry> entries;

    const std::string& top_label() const;  // throws PreconditionViolation when empty
};

struct DetectionVerdict {
    bool is_real = false;
    double similarity_to_prototype = 0.0;
    double threshold = 0.0;
};

inline constexpr double kDefaultDetectionThreshold = 0.85;

using RecordFilter = std::function<bool(const ExemplarRecord&)>;

// Exact top-k of the registry by cosine similarity to `query` (normalized
// here). k larger than the candidate count returns the full ranking.
RankedResult rank_by_feature(const FeatureVector& query, const Registry& registry, std::size_t k,
                             const RecordFilter& filter = {});

struct AttributeOptions {
    std::size_t k = 1;
    // When set, the query is partitioned into patches of this side and the
    // patch best matching the registry is encoded instead of the center crop.
    std::optional<int> best_patch_side;
};

RankedResult attribute(const FingerprintImage& query, const Registry& registry, const Encoder& encoder,
                       const AttributeOptions& options);

RankedResult attribute(const FingerprintImage& query, const Registry& registry, const Encoder& encoder,
                       std::size_t k);

// Most frequent label among the entries; ties go to the label whose best
// entry ranks highest.
std::string majority_label(const RankedResult& result);

// is_real = cos(feature, prototype) >= threshold.
DetectionVerdict detect_feature(const FeatureVector& feature, const RealPrototype& prototype,
                                double threshold = kDefaultDetectionThreshold);

// Throws NotPretrained when prototype is empty.
DetectionVerdict detect(const FingerprintImage& query, const std::optional<RealPrototype>& prototype,
                        const Encoder& encoder, double threshold = kDefaultDetectionThreshold);

struct TwoStageResult {
    std::string label;  // kRealLabel when stage one accepts the query as real
    DetectionVerdict verdict;
    std::optional<RankedResult> ranking;  // set only when stage two ran
};

// Detection first; fakes are then ranked against non-real exemplars only.
TwoStageResult two_stage_attribute_feature(const FeatureVector& feature, const Registry& registry,
                                           const std::optional<RealPrototype>& prototype,
                                           double threshold, std::size_t k);

TwoStageResult two_stage_attribute(const FingerprintImage& query, const Registry& registry,
                                   const std::optional<RealPrototype>& prototype,
                                   const Encoder& encoder, double threshold, std::size_t k);

}  // namespace lida
