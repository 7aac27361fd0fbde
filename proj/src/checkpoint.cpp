#include "lida/checkpoint.hpp"

#include <cmath>
#include <string_view>

#include "binary_io.hpp"
#include "lida/error.hpp"

namespace lida {

namespace {

constexpr std::string_view magic{kCheckpointMagic, sizeof(kCheckpointMagic) - 1};
constexpr std::uint32_t kMaxLayers = 1024;

}  // namespace

std::string serialize_checkpoint(const Checkpoint& ckpt) {
    const auto& cfg = ckpt.encoder.config();
    detail::ByteWriter w;
    w.bytes(magic);
    w.u8(kCheckpointVersion);
    w.u32(static_cast<std::uint32_t>(cfg.input_side));
    w.u32(static_cast<std::uint32_t>(cfg.layers.size()));
    for (const auto& l : cfg.layers) {
        w.u32(static_cast<std::uint32_t>(l.out_channels));
        w.u32(static_cast<std::uint32_t>(l.kernel));
        w.u32(static_cast<std::uint32_t>(l.stride));
    }
    w.u32(static_cast<std::uint32_t>(cfg.feature_dim));
    w.u32(static_cast<std::uint32_t>(cfg.num_pretext_classes));
    w.u64(cfg.seed);
    for (const auto& t : ckpt.encoder.params().tensors) {
        for (double v : t) w.f64(v);
    }

    const auto dim = static_cast<std::size_t>(cfg.feature_dim);
    w.u8(ckpt.prototype ? 1 : 0);
    if (ckpt.prototype) {
        if (ckpt.prototype->p.size() != dim) throw InvalidArgument("prototype dimension mismatch");
        for (double v : ckpt.prototype->p.values) w.f64(v);
        w.u64(ckpt.prototype->sample_count);
    }
    const std::size_t n_centers = ckpt.centers ? ckpt.centers->centers.size() : 0;
    w.u32(static_cast<std::uint32_t>(n_centers));
    if (n_centers > 0) {
        w.f64(ckpt.centers->alpha);
        for (const auto& [label, c] : ckpt.centers->centers) {
            if (c.size() != dim) throw InvalidArgument("center dimension mismatch");
            w.str(label);
            for (double v : c.values) w.f64(v);
        }
    }
    return w.buffer();
}

Checkpoint deserialize_checkpoint(std::string_view bytes) {
    detail::ByteReader r(bytes, "encoder checkpoint");
    if (bytes.size() < magic.size() || bytes.substr(0, magic.size()) != magic) {
        throw CorruptFile(Corruption::BadMagic, "encoder checkpoint: bad magic");
    }
    r.bytes(magic.size());
    const auto version = r.u8();
    if (version != kCheckpointVersion) {
        throw CorruptFile(Corruption::BadVersion,
                          "encoder checkpoint: unsupported version " + std::to_string(version));
    }
    EncoderConfig cfg;
    cfg.input_side = static_cast<int>(r.u32());
    const auto n_layers = r.u32();
    if (n_layers > kMaxLayers) {
        throw CorruptFile(Corruption::Malformed, "encoder checkpoint: implausible layer count");
    }
    cfg.layers.clear();
    for (std::uint32_t i = 0; i < n_layers; ++i) {
        ConvSpec l;
        l.out_channels = static_cast<int>(r.u32());
        l.kernel = static_cast<int>(r.u32());
        l.stride = static_cast<int>(r.u32());
        cfg.layers.push_back(l);
    }
    cfg.feature_dim = static_cast<int>(r.u32());
    cfg.num_pretext_classes = static_cast<int>(r.u32());
    cfg.seed = r.u64();
    try {
        cfg.validate();
    } catch (const ConfigError& e) {
        throw CorruptFile(Corruption::Malformed, std::string("encoder checkpoint: ") + e.what());
    }

    EncoderParams params;
    for (const auto& [name, n] : parameter_layout(cfg)) {
        if (r.remaining() / 8 < n) {
            throw CorruptFile(Corruption::Truncated, "encoder checkpoint: tensor " + name + " truncated");
        }
        std::vector<double> t(n);
        for (double& v : t) v = r.f64();
        params.tensors.push_back(std::move(t));
    }
    if (!params.all_finite()) {
        throw CorruptFile(Corruption::Malformed, "encoder checkpoint: non-finite parameter");
    }

    const auto dim = static_cast<std::size_t>(cfg.feature_dim);
    std::optional<RealPrototype> prototype;
    const auto has_proto = r.u8();
    if (has_proto > 1) throw CorruptFile(Corruption::Malformed, "encoder checkpoint: bad prototype flag");
    if (has_proto == 1) {
        RealPrototype p;
        p.p.values.resize(dim);
        for (double& v : p.p.values) v = r.f64();
        p.sample_count = r.u64();
        prototype = std::move(p);
    }
    std::optional<ClassCenters> centers;
    const auto n_centers = r.u32();
    if (n_centers > 0) {
        ClassCenters cc;
        cc.alpha = r.f64();
        for (std::uint32_t i = 0; i < n_centers; ++i) {
            std::string label = r.str();
            FeatureVector c{std::vector<double>(dim)};
            for (double& v : c.values) v = r.f64();
            cc.centers.emplace(std::move(label), std::move(c));
        }
        centers = std::move(cc);
    }
    r.expect_end();
    return {Encoder(std::move(cfg), std::move(params)), std::move(prototype), std::move(centers)};
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
    detail::write_file_atomic(path, serialize_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    return deserialize_checkpoint(detail::read_file(path));
}

}  // namespace lida
