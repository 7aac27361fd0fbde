#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "lida/encoder.hpp"
#include "lida/image.hpp"
#include "lida/losses.hpp"
#include "lida/registry.hpp"

namespace lida {

// Which objectives drive adaptation. Standard = center loss + prototype
// contrastive loss; the CE variants swap one or both for cross-entropy heads.
enum class LossVariant { Standard, CeAttribution, CeDetection, CeBoth };

LossVariant parse_loss_variant(const std::string& name);  // "standard", "ce-attribution", ...
std::string to_string(LossVariant v);

struct TrainConfig {
    int batch_size = 32;
    double learning_rate = 1e-4;
    int epochs = 100;
    LossWeights weights{0.9, 0.1};
    double alpha = 0.5;  // center update rate
    std::uint64_t seed = 0;
    LossVariant variant = LossVariant::Standard;
    int threads = 0;  // 0 = all cores; results do not depend on it

    void validate() const;
};

struct EpochLog {
    int epoch = 0;
    double main_loss = 0.0;       // pretext loss, or attribution loss when adapting
    double detection_loss = 0.0;  // zero during pretraining
    double total_loss = 0.0;
    double center_drift = 0.0;    // sum of center displacement norms this epoch
    double accuracy = 0.0;        // pretext accuracy (%) during pretraining
    double seconds = 0.0;         // wall time, excluded from comparisons

    bool same_values(const EpochLog& o) const {
        return epoch == o.epoch && main_loss == o.main_loss && detection_loss == o.detection_loss &&
               total_loss == o.total_loss && center_drift == o.center_drift && accuracy == o.accuracy;
    }
};

struct TrainLog {
    std::vector<EpochLog> epochs;

    // Equal ignoring wall time.
    bool same_values(const TrainLog& o) const;
    std::string to_tsv() const;
};

struct PretrainResult {
    Encoder encoder;
    RealPrototype prototype;
    TrainLog log;
    double final_accuracy = 0.0;  // pretext accuracy (%) of the returned encoder
};

// SGD on the summed pretext cross-entropy over real fingerprints labelled by
// content class; then the prototype is the renormalized mean feature of the
// corpus under the final encoder. Throws NumericalFailure on a non-finite loss.
PretrainResult pretrain(const Encoder& initial, std::span<const FingerprintImage> corpus,
                        std::span<const int> classes, const TrainConfig& config);

struct AdaptResult {
    Encoder encoder;
    ClassCenters centers;
    Registry registry;  // input registry with features re-encoded by `encoder`
    TrainLog log;
};

// Few-shot adaptation. exemplars[i] is the fingerprint behind
// registry.records()[i]. Exemplars labelled kRealLabel count as real samples;
// every other exemplar is fake and `reals` must hold exactly as many
// fingerprints. Centers start at each label's mean feature and move only via
// update_centers after every batch.
AdaptResult adapt(const Encoder& pretrained, const Registry& registry,
                  std::span<const FingerprintImage> exemplars, std::span<const FingerprintImage> reals,
                  const RealPrototype& prototype, const TrainConfig& config);

// Separable Gaussian blur with radius ceil(3 sigma) and reflect padding,
// rounded back to 8 bits. sigma == 0 returns the input unchanged.
RgbImage degrade(const RgbImage& img, double sigma);

// Normalized 1-D Gaussian weights for offsets -radius..radius.
std::vector<double> gaussian_kernel(double sigma);

}  // namespace lida
