#include "lida/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "lida/error.hpp"
#include "lida/rng.hpp"

namespace lida {

void EncoderConfig::validate() const {
    if (input_side <= 0) {
        throw ConfigError("input_side must be positive");
    }
    if (layers.empty()) {
        throw ConfigError("encoder needs at least one conv layer");
    }
    if (feature_dim < 2) {
        throw ConfigError("feature_dim must be >= 2");
    }
    if (num_pretext_classes < 1) {
        throw ConfigError("num_pretext_classes must be >= 1");
    }
    int side = input_side;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const auto& l = layers[i];
        if (l.out_channels <= 0) {
            throw ConfigError("layer " + std::to_string(i) + ": out_channels must be positive");
        }
        if (l.kernel <= 0 || l.kernel % 2 == 0) {
            throw ConfigError("layer " + std::to_string(i) + ": kernel must be odd and positive");
        }
        if (l.stride <= 0) {
            throw ConfigError("layer " + std::to_string(i) + ": stride must be positive");
        }
        if (static_cast<int>(i) < lower_layer_count() && l.stride != 1) {
            throw ConfigError("layer " + std::to_string(i) +
                              ": lower layers must not downsample (stride 1)");
        }
        side = (side - 1) / l.stride + 1;
    }
}

std::vector<std::pair<std::string, std::size_t>> parameter_layout(const EncoderConfig& config) {
    config.validate();
    std::vector<std::pair<std::string, std::size_t>> layout;
    int in = kInputChannels;
    for (std::size_t i = 0; i < config.layers.size(); ++i) {
        const auto& l = config.layers[i];
        const std::string tag = "conv" + std::to_string(i);
        layout.emplace_back(tag + ".weight",
                            static_cast<std::size_t>(l.out_channels) * in * l.kernel * l.kernel);
        layout.emplace_back(tag + ".bias", static_cast<std::size_t>(l.out_channels));
        in = l.out_channels;
    }
    const auto fd = static_cast<std::size_t>(config.feature_dim);
    layout.emplace_back("projection.weight", fd * in);
    layout.emplace_back("projection.bias", fd);
    layout.emplace_back("head.weight", static_cast<std::size_t>(config.num_pretext_classes) * fd);
    layout.emplace_back("head.bias", static_cast<std::size_t>(config.num_pretext_classes));
    return layout;
}

EncoderParams EncoderParams::zeros(const EncoderConfig& config) {
    EncoderParams p;
    for (const auto& [name, n] : parameter_layout(config)) {
        p.tensors.emplace_back(n, 0.0);
    }
    return p;
}

std::size_t EncoderParams::size() const noexcept {
    std::size_t n = 0;
    for (const auto& t : tensors) n += t.size();
    return n;
}

bool EncoderParams::all_finite() const noexcept {
    for (const auto& t : tensors) {
        for (double v : t) {
            if (!std::isfinite(v)) return false;
        }
    }
    return true;
}

void EncoderParams::add_scaled(const EncoderParams& other, double scale) {
    if (other.tensors.size() != tensors.size()) {
        throw InvalidArgument("parameter sets have different layouts");
    }
    for (std::size_t t = 0; t < tensors.size(); ++t) {
        auto& dst = tensors[t];
        const auto& src = other.tensors[t];
        if (dst.size() != src.size()) {
            throw InvalidArgument("parameter tensor size mismatch");
        }
        for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += scale * src[i];
    }
}

void EncoderParams::scale(double factor) {
    for (auto& t : tensors) {
        for (double& v : t) v *= factor;
    }
}

void EncoderParams::set_zero() {
    for (auto& t : tensors) std::fill(t.begin(), t.end(), 0.0);
}

double FeatureVector::norm() const noexcept {
    double s = 0.0;
    for (double v : values) s += v * v;
    return std::sqrt(s);
}

FeatureVector normalize(const FeatureVector& v) {
    const double n = v.norm();
    if (!(n > 0.0) || !std::isfinite(n)) {
        throw DegenerateFeature("cannot normalize a zero or non-finite feature vector");
    }
    FeatureVector out = v;
    for (double& x : out.values) x /= n;
    return out;
}

double cosine_similarity(const FeatureVector& a, const FeatureVector& b) {
    if (a.size() != b.size()) {
        throw InvalidArgument("cosine_similarity: dimension mismatch");
    }
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a.values[i] * b.values[i];
        na += a.values[i] * a.values[i];
        nb += b.values[i] * b.values[i];
    }
    if (!(na > 0.0) || !(nb > 0.0)) {
        throw DegenerateFeature("cosine_similarity of a zero vector");
    }
    return std::clamp(dot / std::sqrt(na * nb), -1.0, 1.0);
}

Activation to_input(const FingerprintImage& fp) {
    Activation a{kInputChannels, fp.height(), fp.width(), {}};
    a.data.resize(static_cast<std::size_t>(kInputChannels) * fp.height() * fp.width());
    const auto& src = fp.data();
    for (std::size_t i = 0; i < src.size(); ++i) a.data[i] = src[i] != 0 ? 1.0 : 0.0;
    return a;
}

namespace {

// Copy of `a` surrounded by `pad` zeros on each side.
Activation zero_pad(const Activation& a, int pad) {
    if (pad == 0) return a;
    Activation p{a.channels, a.height + 2 * pad, a.width + 2 * pad, {}};
    p.data.assign(static_cast<std::size_t>(p.channels) * p.height * p.width, 0.0);
    for (int c = 0; c < a.channels; ++c) {
        for (int y = 0; y < a.height; ++y) {
            std::copy_n(&a.data[(static_cast<std::size_t>(c) * a.height + y) * a.width], a.width,
                        &p.at(c, y + pad, pad));
        }
    }
    return p;
}

int conv_out_side(int side, int stride) { return (side - 1) / stride + 1; }

// out[o] = bias[o] + sum_i W[o][i] * in[i], same padding.
Activation conv_forward(const Activation& in, const ConvSpec& spec, const std::vector<double>& w,
                        const std::vector<double>& b) {
    const int k = spec.kernel, s = spec.stride, pad = k / 2;
    const Activation padded = zero_pad(in, pad);
    Activation out{spec.out_channels, conv_out_side(in.height, s), conv_out_side(in.width, s), {}};
    out.data.resize(static_cast<std::size_t>(out.channels) * out.height * out.width);
    for (int o = 0; o < out.channels; ++o) {
        double* plane = &out.at(o, 0, 0);
        std::fill_n(plane, static_cast<std::size_t>(out.height) * out.width, b[o]);
        for (int i = 0; i < in.channels; ++i) {
            for (int ky = 0; ky < k; ++ky) {
                for (int kx = 0; kx < k; ++kx) {
                    const double wv = w[((static_cast<std::size_t>(o) * in.channels + i) * k + ky) * k + kx];
                    for (int y = 0; y < out.height; ++y) {
                        double* dst = plane + static_cast<std::size_t>(y) * out.width;
                        const double* src = padded.ptr(i, y * s + ky, kx);
                        if (s == 1) {
                            for (int x = 0; x < out.width; ++x) dst[x] += wv * src[x];
                        } else {
                            for (int x = 0; x < out.width; ++x) dst[x] += wv * src[x * s];
                        }
                    }
                }
            }
        }
    }
    return out;
}

// Accumulates weight/bias gradients and returns dL/d(input) when requested.
void conv_backward(const Activation& in, const ConvSpec& spec, const std::vector<double>& w,
                   const Activation& dout, std::vector<double>& dw, std::vector<double>& db,
                   Activation* din) {
    const int k = spec.kernel, s = spec.stride, pad = k / 2;
    const Activation padded = zero_pad(in, pad);
    Activation dpadded;
    if (din != nullptr) {
        dpadded = Activation{in.channels, padded.height, padded.width, {}};
        dpadded.data.assign(padded.data.size(), 0.0);
    }
    for (int o = 0; o < dout.channels; ++o) {
        const double* g = dout.ptr(o, 0, 0);
        const std::size_t plane = static_cast<std::size_t>(dout.height) * dout.width;
        db[o] += std::accumulate(g, g + plane, 0.0);
        for (int i = 0; i < in.channels; ++i) {
            for (int ky = 0; ky < k; ++ky) {
                for (int kx = 0; kx < k; ++kx) {
                    const std::size_t widx = ((static_cast<std::size_t>(o) * in.channels + i) * k + ky) * k + kx;
                    const double wv = w[widx];
                    double acc = 0.0;
                    for (int y = 0; y < dout.height; ++y) {
                        const double* gr = g + static_cast<std::size_t>(y) * dout.width;
                        const double* src = padded.ptr(i, y * s + ky, kx);
                        double* dsrc = din != nullptr ? &dpadded.at(i, y * s + ky, kx) : nullptr;
                        if (s == 1) {
                            for (int x = 0; x < dout.width; ++x) acc += gr[x] * src[x];
                            if (dsrc != nullptr) {
                                for (int x = 0; x < dout.width; ++x) dsrc[x] += wv * gr[x];
                            }
                        } else {
                            for (int x = 0; x < dout.width; ++x) acc += gr[x] * src[x * s];
                            if (dsrc != nullptr) {
                                for (int x = 0; x < dout.width; ++x) dsrc[x * s] += wv * gr[x];
                            }
                        }
                    }
                    dw[widx] += acc;
                }
            }
        }
    }
    if (din != nullptr) {
        *din = Activation{in.channels, in.height, in.width, {}};
        din->data.resize(in.data.size());
        for (int c = 0; c < in.channels; ++c) {
            for (int y = 0; y < in.height; ++y) {
                std::copy_n(&dpadded.at(c, y + pad, pad), in.width, &din->at(c, y, 0));
            }
        }
    }
}

}  // namespace

Encoder::Encoder(EncoderConfig config) : config_(std::move(config)) {
    params_ = EncoderParams::zeros(config_);
    Rng rng(config_.seed);
    int in = kInputChannels;
    std::size_t t = 0;
    for (const auto& l : config_.layers) {
        const double fan_in = static_cast<double>(in) * l.kernel * l.kernel;
        const double bound = std::sqrt(6.0 / fan_in);
        for (double& v : params_.tensors[t]) v = rng.uniform(-bound, bound);
        t += 2;
        in = l.out_channels;
    }
    const double proj_bound = 1.0 / std::sqrt(static_cast<double>(in));
    for (double& v : params_.tensors[t]) v = rng.uniform(-proj_bound, proj_bound);
    t += 2;
    const double head_bound = 1.0 / std::sqrt(static_cast<double>(config_.feature_dim));
    for (double& v : params_.tensors[t]) v = rng.uniform(-head_bound, head_bound);
}

Encoder::Encoder(EncoderConfig config, EncoderParams params)
    : config_(std::move(config)), params_(std::move(params)) {
    const auto layout = parameter_layout(config_);
    if (params_.tensors.size() != layout.size()) {
        throw ConfigError("parameter tensor count does not match config");
    }
    for (std::size_t t = 0; t < layout.size(); ++t) {
        if (params_.tensors[t].size() != layout[t].second) {
            throw ConfigError("tensor " + layout[t].first + " has wrong size");
        }
    }
}

ForwardTrace Encoder::forward(const FingerprintImage& fp) const {
    const int side = config_.input_side;
    if (fp.width() < side || fp.height() < side) {
        throw InvalidArgument("fingerprint " + std::to_string(fp.width()) + "x" +
                              std::to_string(fp.height()) + " smaller than encoder input side " +
                              std::to_string(side));
    }
    if (fp.width() == side && fp.height() == side) return forward(to_input(fp));
    return forward(to_input(fp.center_crop(side)));
}

ForwardTrace Encoder::forward(Activation input) const {
    if (input.channels != kInputChannels || input.height != config_.input_side ||
        input.width != config_.input_side) {
        throw InvalidArgument("encoder input must be 3x" + std::to_string(config_.input_side) + "x" +
                              std::to_string(config_.input_side));
    }
    ForwardTrace tr;
    Activation act = std::move(input);
    for (std::size_t l = 0; l < config_.layers.size(); ++l) {
        Activation pre = conv_forward(act, config_.layers[l], params_.tensors[2 * l], params_.tensors[2 * l + 1]);
        tr.inputs.push_back(std::move(act));
        act = pre;
        for (double& v : act.data) v = std::max(v, 0.0);
        tr.pre_relu.push_back(std::move(pre));
    }

    const std::size_t plane = static_cast<std::size_t>(act.height) * act.width;
    tr.pooled.resize(act.channels);
    for (int c = 0; c < act.channels; ++c) {
        const double* p = act.ptr(c, 0, 0);
        tr.pooled[c] = std::accumulate(p, p + plane, 0.0) / static_cast<double>(plane);
    }

    const std::size_t np = config_.layers.size() * 2;
    const auto& pw = params_.tensors[np];
    const auto& pb = params_.tensors[np + 1];
    const int fd = config_.feature_dim;
    const int last = act.channels;
    tr.feature.values.resize(fd);
    for (int f = 0; f < fd; ++f) {
        double s = pb[f];
        for (int c = 0; c < last; ++c) s += pw[static_cast<std::size_t>(f) * last + c] * tr.pooled[c];
        tr.feature.values[f] = s;
    }

    const auto& hw = params_.tensors[np + 2];
    const auto& hb = params_.tensors[np + 3];
    tr.logits.resize(config_.num_pretext_classes);
    for (int k = 0; k < config_.num_pretext_classes; ++k) {
        double s = hb[k];
        for (int f = 0; f < fd; ++f) s += hw[static_cast<std::size_t>(k) * fd + f] * tr.feature.values[f];
        tr.logits[k] = s;
    }
    return tr;
}

EncoderGradients Encoder::backward(const ForwardTrace& trace, std::span<const double> dfeature,
                                   std::span<const double> dlogits) const {
    const int fd = config_.feature_dim;
    const int classes = config_.num_pretext_classes;
    if (!dfeature.empty() && dfeature.size() != static_cast<std::size_t>(fd)) {
        throw InvalidArgument("dfeature has wrong length");
    }
    if (!dlogits.empty() && dlogits.size() != static_cast<std::size_t>(classes)) {
        throw InvalidArgument("dlogits has wrong length");
    }
    if (trace.inputs.size() != config_.layers.size()) {
        throw InvalidArgument("trace does not come from this encoder");
    }

    EncoderGradients g = EncoderParams::zeros(config_);
    const std::size_t np = config_.layers.size() * 2;

    std::vector<double> dfeat(fd, 0.0);
    if (!dfeature.empty()) std::copy(dfeature.begin(), dfeature.end(), dfeat.begin());
    if (!dlogits.empty()) {
        const auto& hw = params_.tensors[np + 2];
        auto& ghw = g.tensors[np + 2];
        auto& ghb = g.tensors[np + 3];
        for (int k = 0; k < classes; ++k) {
            const double d = dlogits[k];
            ghb[k] += d;
            for (int f = 0; f < fd; ++f) {
                ghw[static_cast<std::size_t>(k) * fd + f] += d * trace.feature.values[f];
                dfeat[f] += d * hw[static_cast<std::size_t>(k) * fd + f];
            }
        }
    }

    const int last = static_cast<int>(trace.pooled.size());
    const auto& pw = params_.tensors[np];
    auto& gpw = g.tensors[np];
    auto& gpb = g.tensors[np + 1];
    std::vector<double> dpooled(last, 0.0);
    for (int f = 0; f < fd; ++f) {
        const double d = dfeat[f];
        gpb[f] += d;
        for (int c = 0; c < last; ++c) {
            gpw[static_cast<std::size_t>(f) * last + c] += d * trace.pooled[c];
            dpooled[c] += d * pw[static_cast<std::size_t>(f) * last + c];
        }
    }

    const Activation& top = trace.pre_relu.back();
    Activation dact{top.channels, top.height, top.width, {}};
    dact.data.resize(top.data.size());
    const std::size_t plane = static_cast<std::size_t>(top.height) * top.width;
    for (int c = 0; c < top.channels; ++c) {
        std::fill_n(&dact.at(c, 0, 0), plane, dpooled[c] / static_cast<double>(plane));
    }

    for (std::size_t l = config_.layers.size(); l-- > 0;) {
        const Activation& pre = trace.pre_relu[l];
        for (std::size_t i = 0; i < dact.data.size(); ++i) {
            if (!(pre.data[i] > 0.0)) dact.data[i] = 0.0;
        }
        Activation din;
        conv_backward(trace.inputs[l], config_.layers[l], params_.tensors[2 * l], dact,
                      g.tensors[2 * l], g.tensors[2 * l + 1], l > 0 ? &din : nullptr);
        dact = std::move(din);
    }
    return g;
}

}  // namespace lida
