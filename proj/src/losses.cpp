#include "lida/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "lida/error.hpp"

namespace lida {

const FeatureVector& ClassCenters::at(const std::string& label) const {
    const auto it = centers.find(label);
    if (it == centers.end()) {
        throw UnknownLabel("no center for label '" + label + "'");
    }
    return it->second;
}

RealPrototype RealPrototype::from_features(std::span<const FeatureVector> features) {
    if (features.empty()) {
        throw InvalidArgument("real prototype needs at least one feature");
    }
    FeatureVector mean{std::vector<double>(features.front().size(), 0.0)};
    for (const auto& f : features) {
        if (f.size() != mean.size()) throw InvalidArgument("feature dimension mismatch");
        const FeatureVector u = normalize(f);
        for (std::size_t i = 0; i < mean.size(); ++i) mean.values[i] += u.values[i];
    }
    for (double& v : mean.values) v /= static_cast<double>(features.size());
    return {normalize(mean), features.size()};
}

void LossWeights::validate() const {
    if (!(tau > 0.0)) throw InvalidArgument("temperature tau must be positive");
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw InvalidArgument("lambda must be in [0,1]");
}

LossResult pretext_loss(std::span<const std::vector<double>> logits, std::span<const int> labels) {
    if (logits.size() != labels.size()) {
        throw InvalidArgument("pretext_loss: logits/labels length mismatch");
    }
    LossResult r;
    r.grads.reserve(logits.size());
    for (std::size_t b = 0; b < logits.size(); ++b) {
        const auto& z = logits[b];
        const int y = labels[b];
        if (y < 0 || static_cast<std::size_t>(y) >= z.size()) {
            throw InvalidArgument("pretext_loss: label " + std::to_string(y) + " out of range");
        }
        const double zmax = *std::max_element(z.begin(), z.end());
        double denom = 0.0;
        for (double v : z) denom += std::exp(v - zmax);
        const double log_denom = std::log(denom);
        r.value += -(z[y] - zmax - log_denom);
        std::vector<double> g(z.size());
        for (std::size_t c = 0; c < z.size(); ++c) {
            g[c] = std::exp(z[c] - zmax - log_denom) - (static_cast<int>(c) == y ? 1.0 : 0.0);
        }
        r.grads.push_back(std::move(g));
    }
    return r;
}

LossResult center_loss(std::span<const FeatureVector> features, std::span<const std::string> labels,
                       const ClassCenters& centers) {
    if (features.size() != labels.size()) {
        throw InvalidArgument("center_loss: features/labels length mismatch");
    }
    LossResult r;
    r.grads.reserve(features.size());
    for (std::size_t i = 0; i < features.size(); ++i) {
        const auto& c = centers.at(labels[i]);
        const auto& x = features[i];
        if (c.size() != x.size()) throw InvalidArgument("center_loss: dimension mismatch");
        std::vector<double> g(x.size());
        for (std::size_t d = 0; d < x.size(); ++d) {
            const double diff = x.values[d] - c.values[d];
            r.value += diff * diff;
            g[d] = 2.0 * diff;
        }
        r.grads.push_back(std::move(g));
    }
    return r;
}

ClassCenters update_centers(const ClassCenters& centers, std::span<const FeatureVector> features,
                            std::span<const std::string> labels) {
    if (features.size() != labels.size()) {
        throw InvalidArgument("update_centers: features/labels length mismatch");
    }
    ClassCenters next = centers;
    for (auto& [label, center] : next.centers) {
        const FeatureVector& old = centers.centers.at(label);
        std::vector<double> num(old.size(), 0.0);
        int count = 0;
        for (std::size_t i = 0; i < features.size(); ++i) {
            if (labels[i] != label) continue;
            ++count;
            for (std::size_t d = 0; d < num.size(); ++d) num[d] += old.values[d] - features[i].values[d];
        }
        if (count == 0) continue;
        const double step = centers.alpha / (1.0 + count);
        for (std::size_t d = 0; d < num.size(); ++d) center.values[d] = old.values[d] - step * num[d];
    }
    return next;
}

namespace {

double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

struct CosineWithGrad {
    double value;
    std::vector<double> grad;  // d cos / d x
};

// cos(x, p) for unit p, and its gradient (p - cos * x_hat) / |x|.
CosineWithGrad cosine_to_unit(const FeatureVector& x, const FeatureVector& p) {
    const double n = x.norm();
    if (!(n > 0.0) || !std::isfinite(n)) {
        throw DegenerateFeature("detection_loss: zero or non-finite feature");
    }
    double dot = 0.0;
    for (std::size_t d = 0; d < x.size(); ++d) dot += x.values[d] * p.values[d];
    const double s = dot / n;
    std::vector<double> g(x.size());
    for (std::size_t d = 0; d < x.size(); ++d) g[d] = (p.values[d] - s * x.values[d] / n) / n;
    return {s, std::move(g)};
}

}  // namespace

DetectionLossResult detection_loss(std::span<const FeatureVector> real,
                                   std::span<const FeatureVector> fake,
                                   const RealPrototype& prototype, double tau) {
    if (real.empty() || fake.empty()) {
        throw InvalidArgument("detection_loss needs at least one real and one fake feature");
    }
    if (!(tau > 0.0)) throw InvalidArgument("detection_loss: tau must be positive");
    const FeatureVector p = normalize(prototype.p);
    constexpr double lo = kSigmoidClamp, hi = 1.0 - kSigmoidClamp;

    DetectionLossResult r;
    const double wr = 1.0 / static_cast<double>(real.size());
    for (const auto& x : real) {
        if (x.size() != p.size()) throw InvalidArgument("detection_loss: dimension mismatch");
        auto cs = cosine_to_unit(x, p);
        const double sg = sigmoid(cs.value / tau);
        const double clamped = std::clamp(sg, lo, hi);
        r.value += -wr * std::log(clamped);
        // d/dz[-log sigma(z)] = -(1 - sigma); zero where the clamp is active.
        const double dz = (sg > lo && sg < hi) ? -wr * (1.0 - sg) : 0.0;
        for (double& g : cs.grad) g *= dz / tau;
        r.real_grads.push_back(std::move(cs.grad));
    }
    const double wf = 1.0 / static_cast<double>(fake.size());
    for (const auto& x : fake) {
        if (x.size() != p.size()) throw InvalidArgument("detection_loss: dimension mismatch");
        auto cs = cosine_to_unit(x, p);
        const double sg = sigmoid(cs.value / tau);
        const double clamped = std::clamp(sg, lo, hi);
        r.value += -wf * std::log(1.0 - clamped);
        const double dz = (sg > lo && sg < hi) ? wf * sg : 0.0;
        for (double& g : cs.grad) g *= dz / tau;
        r.fake_grads.push_back(std::move(cs.grad));
    }
    return r;
}

AdaptationLossResult adaptation_loss(std::span<const AdaptationSample> batch,
                                     const ClassCenters& centers, const RealPrototype& prototype,
                                     const LossWeights& weights) {
    weights.validate();
    AdaptationLossResult r;
    r.grads.assign(batch.size(), {});
    for (std::size_t i = 0; i < batch.size(); ++i) {
        r.grads[i].assign(batch[i].feature.size(), 0.0);
    }

    std::vector<FeatureVector> attr_feats;
    std::vector<std::string> attr_labels;
    std::vector<std::size_t> attr_index;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        if (!batch[i].label) continue;
        attr_feats.push_back(batch[i].feature);
        attr_labels.push_back(*batch[i].label);
        attr_index.push_back(i);
    }
    const LossResult la = center_loss(attr_feats, attr_labels, centers);
    r.attribution = la.value;
    for (std::size_t k = 0; k < attr_index.size(); ++k) {
        auto& g = r.grads[attr_index[k]];
        for (std::size_t d = 0; d < g.size(); ++d) g[d] += la.grads[k][d];
    }

    if (weights.lambda != 0.0) {
        std::vector<FeatureVector> real, fake;
        std::vector<std::size_t> real_index, fake_index;
        for (std::size_t i = 0; i < batch.size(); ++i) {
            if (batch[i].is_real) {
                real.push_back(batch[i].feature);
                real_index.push_back(i);
            } else {
                fake.push_back(batch[i].feature);
                fake_index.push_back(i);
            }
        }
        const DetectionLossResult ld = detection_loss(real, fake, prototype, weights.tau);
        r.detection = ld.value;
        for (std::size_t k = 0; k < real_index.size(); ++k) {
            auto& g = r.grads[real_index[k]];
            for (std::size_t d = 0; d < g.size(); ++d) g[d] += weights.lambda * ld.real_grads[k][d];
        }
        for (std::size_t k = 0; k < fake_index.size(); ++k) {
            auto& g = r.grads[fake_index[k]];
            for (std::size_t d = 0; d < g.size(); ++d) g[d] += weights.lambda * ld.fake_grads[k][d];
        }
    }
    r.value = r.attribution + weights.lambda * r.detection;
    return r;
}

LossResult binary_cross_entropy(std::span<const double> logits, std::span<const int> targets) {
    if (logits.size() != targets.size()) {
        throw InvalidArgument("binary_cross_entropy: length mismatch");
    }
    LossResult r;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        const double z = logits[i];
        const int t = targets[i];
        if (t != 0 && t != 1) throw InvalidArgument("binary_cross_entropy: target must be 0 or 1");
        // log(1 + e^{-|z|}) + max(z, 0) - t z
        r.value += std::log1p(std::exp(-std::abs(z))) + std::max(z, 0.0) - t * z;
        r.grads.push_back({sigmoid(z) - t});
    }
    return r;
}

}  // namespace lida
