#include "lida/retrieval.hpp"

#include <algorithm>
#include <map>

#include "lida/error.hpp"
#include "lida/fingerprint.hpp"

namespace lida {

const std::string& RankedResult::top_label() const {
    if (entries.empty()) throw PreconditionViolation("empty ranking has no top label");
    return entries.front().label;
}

RankedResult rank_by_feature(const FeatureVector& query, const Registry& registry, std::size_t k,
                             const RecordFilter& filter) {
    if (k == 0) throw InvalidArgument("k must be >= 1");
    if (registry.empty()) throw PreconditionViolation("cannot attribute against an empty registry");
    if (query.size() != static_cast<std::size_t>(registry.feature_dim())) {
        throw IncompatibleEncoder("query feature dimension does not match registry");
    }
    const FeatureVector q = normalize(query);
    RankedResult result;
    result.entries.reserve(registry.size());
    for (const auto& rec : registry.records()) {
        if (filter && !filter(rec)) continue;
        double dot = 0.0;
        for (std::size_t d = 0; d < q.size(); ++d) dot += q.values[d] * rec.feature.values[d];
        result.entries.push_back({rec.id, rec.label, std::clamp(dot, -1.0, 1.0)});
    }
    const auto better = [](const RankedEntry& a, const RankedEntry& b) {
        if (a.similarity != b.similarity) return a.similarity > b.similarity;
        return a.id < b.id;
    };
    const std::size_t keep = std::min(k, result.entries.size());
    std::partial_sort(result.entries.begin(), result.entries.begin() + static_cast<std::ptrdiff_t>(keep),
                      result.entries.end(), better);
    result.entries.resize(keep);
    return result;
}

RankedResult attribute(const FingerprintImage& query, const Registry& registry, const Encoder& encoder,
                       const AttributeOptions& options) {
    if (registry.empty()) throw PreconditionViolation("cannot attribute against an empty registry");
    if (!options.best_patch_side) {
        return rank_by_feature(encoder.encode(query), registry, options.k);
    }
    const auto patches = partition(query, *options.best_patch_side);
    std::vector<FeatureVector> db;
    db.reserve(registry.size());
    for (const auto& rec : registry.records()) db.push_back(rec.feature);
    const Patch& best = select_best_patch(patches, db, encoder);
    return rank_by_feature(encoder.encode(best.data), registry, options.k);
}

RankedResult attribute(const FingerprintImage& query, const Registry& registry, const Encoder& encoder,
                       std::size_t k) {
    return attribute(query, registry, encoder, AttributeOptions{k, std::nullopt});
}

std::string majority_label(const RankedResult& result) {
    if (result.entries.empty()) throw PreconditionViolation("empty ranking has no label");
    std::map<std::string, std::pair<int, std::size_t>> votes;  // label -> (count, first rank)
    for (std::size_t i = 0; i < result.entries.size(); ++i) {
        auto [it, inserted] = votes.try_emplace(result.entries[i].label, 0, i);
        ++it->second.first;
    }
    const auto best = std::max_element(votes.begin(), votes.end(), [](const auto& a, const auto& b) {
        if (a.second.first != b.second.first) return a.second.first < b.second.first;
        return a.second.second > b.second.second;
    });
    return best->first;
}

DetectionVerdict detect_feature(const FeatureVector& feature, const RealPrototype& prototype,
                                double threshold) {
    const double s = cosine_similarity(feature, prototype.p);
    return {s >= threshold, s, threshold};
}

DetectionVerdict detect(const FingerprintImage& query, const std::optional<RealPrototype>& prototype,
                        const Encoder& encoder, double threshold) {
    if (!prototype) throw NotPretrained("no real prototype available; run pretraining first");
    return detect_feature(encoder.encode(query), *prototype, threshold);
}

TwoStageResult two_stage_attribute_feature(const FeatureVector& feature, const Registry& registry,
                                           const std::optional<RealPrototype>& prototype,
                                           double threshold, std::size_t k) {
    if (!prototype) throw NotPretrained("no real prototype available; run pretraining first");
    TwoStageResult out;
    out.verdict = detect_feature(feature, *prototype, threshold);
    if (out.verdict.is_real) {
        out.label = kRealLabel;
        return out;
    }
    const auto is_fake = [](const ExemplarRecord& r) { return r.label != kRealLabel; };
    if (std::none_of(registry.records().begin(), registry.records().end(), is_fake)) {
        throw PreconditionViolation("registry has no generator exemplars");
    }
    out.ranking = rank_by_feature(feature, registry, k, is_fake);
    out.label = out.ranking->top_label();
    return out;
}

TwoStageResult two_stage_attribute(const FingerprintImage& query, const Registry& registry,
                                   const std::optional<RealPrototype>& prototype,
                                   const Encoder& encoder, double threshold, std::size_t k) {
    if (!prototype) throw NotPretrained("no real prototype available; run pretraining first");
    return two_stage_attribute_feature(encoder.encode(query), registry, prototype, threshold, k);
}

}  // namespace lida
