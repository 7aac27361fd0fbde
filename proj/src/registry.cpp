#include "lida/registry.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "binary_io.hpp"
#include "lida/error.hpp"
#include "lida/fingerprint.hpp"

namespace lida {

namespace {

constexpr std::string_view magic{kRegistryMagic, sizeof(kRegistryMagic) - 1};
constexpr double kUnitTolerance = 1e-6;

}  // namespace

void Registry::set_prototype(RealPrototype p) {
    if (feature_dim_ == 0) feature_dim_ = static_cast<int>(p.p.size());
    if (p.p.size() != static_cast<std::size_t>(feature_dim_)) {
        throw IncompatibleEncoder("prototype dimension " + std::to_string(p.p.size()) +
                                  " does not match registry dimension " + std::to_string(feature_dim_));
    }
    prototype_ = std::move(p);
}

std::vector<std::string> Registry::labels() const {
    std::set<std::string> s;
    for (const auto& r : records_) s.insert(r.label);
    return {s.begin(), s.end()};
}

const ExemplarRecord& Registry::add(std::string label, const FeatureVector& feature,
                                    std::string source_path, std::int64_t added_at) {
    if (label.empty()) throw InvalidArgument("exemplar label must not be empty");
    if (feature_dim_ == 0) feature_dim_ = static_cast<int>(feature.size());
    if (feature.size() != static_cast<std::size_t>(feature_dim_)) {
        throw IncompatibleEncoder("feature dimension " + std::to_string(feature.size()) +
                                  " does not match registry dimension " + std::to_string(feature_dim_));
    }
    records_.push_back({next_id_++, std::move(label), normalize(feature), std::move(source_path), added_at});
    return records_.back();
}

void Registry::replace_features(std::span<const FeatureVector> features) {
    if (features.size() != records_.size()) {
        throw InvalidArgument("replace_features: expected one feature per record");
    }
    std::vector<FeatureVector> normalized;
    normalized.reserve(features.size());
    for (const auto& f : features) {
        if (f.size() != static_cast<std::size_t>(feature_dim_)) {
            throw IncompatibleEncoder("replacement feature has wrong dimension");
        }
        normalized.push_back(normalize(f));
    }
    for (std::size_t i = 0; i < records_.size(); ++i) records_[i].feature = std::move(normalized[i]);
}

std::size_t register_images(Registry& registry, const std::string& label,
                            std::span<const RgbImage> images, const Encoder& encoder,
                            std::span<const std::string> source_paths, std::int64_t added_at) {
    if (!source_paths.empty() && source_paths.size() != images.size()) {
        throw InvalidArgument("register: source_paths must match images");
    }
    if (registry.feature_dim() != 0 && registry.feature_dim() != encoder.config().feature_dim) {
        throw IncompatibleEncoder("encoder feature_dim " + std::to_string(encoder.config().feature_dim) +
                                  " does not match registry " + std::to_string(registry.feature_dim()));
    }
    // Encode everything before touching the registry so a failure adds nothing.
    std::vector<FeatureVector> feats;
    feats.reserve(images.size());
    for (const auto& img : images) feats.push_back(normalize(encoder.encode(extract_fingerprint(img))));
    for (std::size_t i = 0; i < images.size(); ++i) {
        registry.add(label, feats[i], source_paths.empty() ? std::string{} : source_paths[i], added_at);
    }
    return images.size();
}

std::string serialize_registry(const Registry& registry) {
    detail::ByteWriter w;
    w.bytes(magic);
    w.u8(kRegistryVersion);
    w.u32(static_cast<std::uint32_t>(registry.feature_dim()));
    w.u64(registry.records().size());
    for (const auto& rec : registry.records()) {
        w.u64(rec.id);
        w.str(rec.label);
        w.str(rec.source_path);
        w.i64(rec.added_at);
        for (double v : rec.feature.values) w.f64(v);
    }
    const auto& proto = registry.prototype();
    w.u8(proto ? 1 : 0);
    if (proto) {
        for (double v : proto->p.values) w.f64(v);
        w.u64(proto->sample_count);
    }
    return w.buffer();
}

Registry deserialize_registry(std::string_view bytes) {
    if (bytes.size() < magic.size() || bytes.substr(0, magic.size()) != magic) {
        throw CorruptFile(Corruption::BadMagic, "registry: bad magic");
    }
    detail::ByteReader r(bytes, "registry");
    r.bytes(magic.size());
    const auto version = r.u8();
    if (version != kRegistryVersion) {
        throw CorruptFile(Corruption::BadVersion, "registry: unsupported version " + std::to_string(version));
    }
    Registry reg(static_cast<int>(r.u32()));
    const auto dim = static_cast<std::size_t>(reg.feature_dim_);
    const std::uint64_t count = r.u64();
    // Each record needs at least 28 bytes of framing plus the feature.
    if (count > r.remaining() / (28 + 8 * dim)) {
        throw CorruptFile(Corruption::Truncated, "registry: record count exceeds file size");
    }
    std::set<std::uint64_t> ids;
    for (std::uint64_t i = 0; i < count; ++i) {
        ExemplarRecord rec;
        rec.id = r.u64();
        rec.label = r.str();
        rec.source_path = r.str();
        rec.added_at = r.i64();
        rec.feature.values.resize(dim);
        for (double& v : rec.feature.values) v = r.f64();
        if (rec.label.empty()) throw CorruptFile(Corruption::Malformed, "registry: empty label");
        if (!ids.insert(rec.id).second) throw CorruptFile(Corruption::Malformed, "registry: duplicate id");
        if (!(std::abs(rec.feature.norm() - 1.0) <= kUnitTolerance)) {
            throw CorruptFile(Corruption::Malformed, "registry: stored feature is not unit norm");
        }
        reg.next_id_ = std::max(reg.next_id_, rec.id + 1);
        reg.records_.push_back(std::move(rec));
    }
    const auto has_proto = r.u8();
    if (has_proto > 1) throw CorruptFile(Corruption::Malformed, "registry: bad prototype flag");
    if (has_proto == 1) {
        RealPrototype p;
        p.p.values.resize(dim);
        for (double& v : p.p.values) v = r.f64();
        p.sample_count = r.u64();
        reg.prototype_ = std::move(p);
    }
    r.expect_end();
    return reg;
}

void save_registry(const Registry& registry, const std::filesystem::path& path) {
    detail::write_file_atomic(path, serialize_registry(registry));
}

Registry load_registry(const std::filesystem::path& path) {
    return deserialize_registry(detail::read_file(path));
}

}  // namespace lida
