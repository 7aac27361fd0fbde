#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "lida/image.hpp"

namespace lida {

struct ConvSpec {
    int out_channels = 0;
    int kernel = 3;  // odd, "same" zero padding of kernel/2
    int stride = 1;

    bool operator==(const ConvSpec&) const = default;
};

// Conv stack -> ReLU after every conv -> global average pool -> linear
// projection to the feature -> linear pretext head.
struct EncoderConfig {
    int input_side = 32;
    std::vector<ConvSpec> layers{{8, 3, 1}, {16, 3, 1}, {32, 3, 1}};
    int feature_dim = 64;
    int num_pretext_classes = 3;
    std::uint64_t seed = 0;

    // The lower half of the stack (rounded up) must keep stride 1 so early
    // feature maps stay at full resolution.
    int lower_layer_count() const noexcept { return (static_cast<int>(layers.size()) + 1) / 2; }

    void validate() const;  // throws ConfigError

    bool operator==(const EncoderConfig&) const = default;
};

inline constexpr int kInputChannels = 3;

// Flat parameter (or gradient) storage, one tensor per entry in declaration
// order: for each conv layer {weight[out][in][k][k], bias[out]}, then
// {projection[feature_dim][last_channels], projection_bias}, then
// {head[classes][feature_dim], head_bias}.
struct EncoderParams {
    std::vector<std::vector<double>> tensors;

    static EncoderParams zeros(const EncoderConfig& config);

    std::size_t size() const noexcept;  // total scalar count
    bool all_finite() const noexcept;

    // this += scale * other
    void add_scaled(const EncoderParams& other, double scale);
    void scale(double factor);
    void set_zero();

    bool operator==(const EncoderParams&) const = default;
};

using EncoderGradients = EncoderParams;

struct FeatureVector {
    std::vector<double> values;

    std::size_t size() const noexcept { return values.size(); }
    double norm() const noexcept;

    bool operator==(const FeatureVector&) const = default;
};

// Unit-norm copy. Throws DegenerateFeature for a zero or non-finite vector.
FeatureVector normalize(const FeatureVector& v);

// Cosine of the angle between a and b, clamped to [-1, 1].
double cosine_similarity(const FeatureVector& a, const FeatureVector& b);

// Planar activation map [channels][height][width].
struct Activation {
    int channels = 0;
    int height = 0;
    int width = 0;
    std::vector<double> data;

    double& at(int c, int y, int x) noexcept {
        return data[(static_cast<std::size_t>(c) * height + y) * width + x];
    }
    double at(int c, int y, int x) const noexcept {
        return data[(static_cast<std::size_t>(c) * height + y) * width + x];
    }
    const double* ptr(int c, int y, int x) const noexcept {
        return &data[(static_cast<std::size_t>(c) * height + y) * width + x];
    }
};

// Fingerprint -> {0,1} planar tensor.
Activation to_input(const FingerprintImage& fp);

// Everything backward() needs from a forward pass.
struct ForwardTrace {
    std::vector<Activation> inputs;       // input of each conv layer
    std::vector<Activation> pre_relu;     // conv output before ReLU
    std::vector<double> pooled;           // global average of last activation
    FeatureVector feature;                // pre-normalization feature
    std::vector<double> logits;           // pretext head output
};

class Encoder {
public:
    // Initialize parameters from config.seed: conv weights He-uniform
    // U(-sqrt(6/fan_in), sqrt(6/fan_in)), linear weights U(-1/sqrt(fan_in),
    // 1/sqrt(fan_in)), all biases zero.
    explicit Encoder(EncoderConfig config);
    Encoder(EncoderConfig config, EncoderParams params);

    const EncoderConfig& config() const noexcept { return config_; }
    const EncoderParams& params() const noexcept { return params_; }
    EncoderParams& params() noexcept { return params_; }

    // Fingerprints larger than input_side are center-cropped; smaller ones are
    // rejected with InvalidArgument.
    ForwardTrace forward(const FingerprintImage& fp) const;
    ForwardTrace forward(Activation input) const;

    FeatureVector encode(const FingerprintImage& fp) const { return forward(fp).feature; }

    // Exact gradients of a scalar loss given dL/dfeature and dL/dlogits
    // (either span may be empty, meaning zero).
    EncoderGradients backward(const ForwardTrace& trace, std::span<const double> dfeature,
                              std::span<const double> dlogits) const;

private:
    EncoderConfig config_;
    EncoderParams params_;
};

// Parameter shapes in declaration order, as {tensor name, element count}.
std::vector<std::pair<std::string, std::size_t>> parameter_layout(const EncoderConfig& config);

}  // namespace lida
