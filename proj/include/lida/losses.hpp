#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lida/encoder.hpp"

namespace lida {

// Scalar loss plus one gradient row per batch element.
struct LossResult {
    double value = 0.0;
    std::vector<std::vector<double>> grads;
};

struct ClassCenters {
    double alpha = 0.5;
    std::map<std::string, FeatureVector> centers;

    const FeatureVector& at(const std::string& label) const;  // throws UnknownLabel
    bool contains(const std::string& label) const { return centers.count(label) != 0; }

    bool operator==(const ClassCenters&) const = default;
};

struct RealPrototype {
    FeatureVector p;
    std::uint64_t sample_count = 0;

    // Mean of the normalized features, renormalized.
    static RealPrototype from_features(std::span<const FeatureVector> features);

    bool operator==(const RealPrototype&) const = default;
};

struct LossWeights {
    double lambda = 0.9;
    double tau = 0.1;

    void validate() const;
};

inline constexpr double kSigmoidClamp = 1e-12;

// Cross-entropy summed over the batch: -sum_b log softmax(logits_b)[label_b].
// Gradients are w.r.t. the logits.
LossResult pretext_loss(std::span<const std::vector<double>> logits, std::span<const int> labels);

// Center loss sum_i ||x_i - c_{y_i}||^2 with gradient 2 (x_i - c_{y_i}).
// Centers are read-only here.
LossResult center_loss(std::span<const FeatureVector> features, std::span<const std::string> labels,
                       const ClassCenters& centers);

// One mini-batch center step:
// c_j <- c_j - alpha * sum_{y_i=j}(c_j - x_i) / (1 + #{y_i=j}).
// Labels without a center are ignored; centers without samples are unchanged.
ClassCenters update_centers(const ClassCenters& centers, std::span<const FeatureVector> features,
                            std::span<const std::string> labels);

struct DetectionLossResult {
    double value = 0.0;
    std::vector<std::vector<double>> real_grads;
    std::vector<std::vector<double>> fake_grads;
};

// Real-prototype contrastive loss on raw (unnormalized) features:
//   -mean_r log sigma(cos(x_r, p)/tau) - mean_f log(1 - sigma(cos(x_f, p)/tau)),
// sigma clamped to [kSigmoidClamp, 1 - kSigmoidClamp]. Gradients flow through
// the cosine, including the normalization of x.
DetectionLossResult detection_loss(std::span<const FeatureVector> real,
                                   std::span<const FeatureVector> fake,
                                   const RealPrototype& prototype, double tau);

struct AdaptationSample {
    FeatureVector feature;
    std::optional<std::string> label;  // attribution class, if it takes part in the center loss
    bool is_real = false;
};

struct AdaptationLossResult {
    double value = 0.0;
    double attribution = 0.0;  // center loss
    double detection = 0.0;    // contrastive loss
    std::vector<std::vector<double>> grads;  // per sample, dL/dfeature
};

// L = L_center + lambda * L_detection. With lambda == 0 the detection term is
// skipped entirely, so a batch need not contain both real and fake samples.
AdaptationLossResult adaptation_loss(std::span<const AdaptationSample> batch,
                                     const ClassCenters& centers, const RealPrototype& prototype,
                                     const LossWeights& weights);

// Binary cross-entropy with logits, summed over the batch; used by the
// cross-entropy ablation variants. target 1 = real.
LossResult binary_cross_entropy(std::span<const double> logits, std::span<const int> targets);

}  // namespace lida
