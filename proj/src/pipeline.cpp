#include "lida/pipeline.hpp"

#include <algorithm>
#include <limits>

#include "lida/error.hpp"
#include "lida/parallel.hpp"

namespace lida {

std::vector<FeatureVector> encode_all(const Encoder& encoder, std::span<const FingerprintImage> fps, int threads) {
    std::vector<FeatureVector> out(fps.size());
    parallel_for(fps.size(), threads, [&](std::size_t i) { out[i] = encoder.encode(fps[i]); });
    return out;
}

Evaluation evaluate(std::span<const FeatureVector> queries, std::span<const std::string> true_labels,
                    const Registry& registry, const EvalOptions& options) {
    if (queries.size() != true_labels.size()) throw InvalidArgument("evaluate: queries/labels length mismatch");
    if (options.two_stage && !options.prototype) throw NotPretrained("two-stage evaluation needs a prototype");
    Evaluation ev;
    std::vector<bool> verdicts, truths;
    for (std::size_t i = 0; i < queries.size(); ++i) {
        QueryOutcome q;
        q.true_label = true_labels[i];
        q.ranking = rank_by_feature(queries[i], registry, registry.size());
        q.ranking.query_id = std::to_string(i);
        if (options.vote_k > 0) {
            RankedResult top = q.ranking;
            top.entries.resize(std::min(options.vote_k, top.entries.size()));
            q.predicted_label = majority_label(top);
        }
        if (options.prototype) {
            const auto v = detect_feature(queries[i], *options.prototype, options.threshold);
            verdicts.push_back(v.is_real);
            truths.push_back(q.true_label == kRealLabel);
            if (options.two_stage) {
                q.predicted_label = two_stage_attribute_feature(queries[i], registry, options.prototype,
                                                                options.threshold, 1)
                                        .label;
            }
        }
        ev.outcomes.push_back(std::move(q));
    }
    std::optional<double> det;
    if (options.prototype) {
        det = detection_accuracy(verdicts, truths);
    }
    ev.report = build_report(ev.outcomes, det);
    return ev;
}

ThresholdCalibration calibrate_threshold(std::span<const double> similarities, const std::vector<bool>& is_real) {
    if (similarities.size() != is_real.size()) throw InvalidArgument("calibrate_threshold: length mismatch");
    if (similarities.empty()) throw PreconditionViolation("calibrate_threshold: no samples");
    std::vector<double> sorted(similarities.begin(), similarities.end());
    std::sort(sorted.begin(), sorted.end());
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
    std::vector<double> candidates{sorted.front() - 1e-9};
    for (std::size_t i = 1; i < sorted.size(); ++i) candidates.push_back(0.5 * (sorted[i - 1] + sorted[i]));
    candidates.push_back(sorted.back() + 1e-9);

    ThresholdCalibration best{candidates.front(), -1.0};
    for (double t : candidates) {
        std::size_t hits = 0;
        for (std::size_t i = 0; i < similarities.size(); ++i) hits += (similarities[i] >= t) == is_real[i] ? 1 : 0;
        const double acc = 100.0 * static_cast<double>(hits) / static_cast<double>(similarities.size());
        if (acc > best.accuracy) best = {t, acc};
    }
    return best;
}

}  // namespace lida
