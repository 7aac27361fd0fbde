#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lida/encoder.hpp"
#include "lida/image.hpp"
#include "lida/losses.hpp"

namespace lida {

// Reserved label for registered real exemplars.
inline constexpr char kRealLabel[] = "real";

struct ExemplarRecord {
    std::uint64_t id = 0;
    std::string label;
    FeatureVector feature;  // unit norm
    std::string source_path;
    std::int64_t added_at = 0;  // unix seconds

    bool operator==(const ExemplarRecord&) const = default;
};

// The registered exemplar database. Exemplars are stored as normalized
// features; source paths are kept so adaptation can re-encode them.
class Registry {
public:
    Registry() = default;
    explicit Registry(int feature_dim) : feature_dim_(feature_dim) {}

    int feature_dim() const noexcept { return feature_dim_; }
    const std::vector<ExemplarRecord>& records() const noexcept { return records_; }
    std::size_t size() const noexcept { return records_.size(); }
    bool empty() const noexcept { return records_.empty(); }

    const std::optional<RealPrototype>& prototype() const noexcept { return prototype_; }
    void set_prototype(RealPrototype p);

    // Sorted distinct labels.
    std::vector<std::string> labels() const;

    // Appends a record with the next id; the feature is normalized here.
    // Throws IncompatibleEncoder when the dimension differs from the header.
    const ExemplarRecord& add(std::string label, const FeatureVector& feature,
                              std::string source_path, std::int64_t added_at);

    // Replaces every stored feature, in record order (after adaptation).
    void replace_features(std::span<const FeatureVector> features);

    bool operator==(const Registry&) const = default;

private:
    int feature_dim_ = 0;  // 0 until the first record or explicit construction
    std::uint64_t next_id_ = 1;
    std::vector<ExemplarRecord> records_;
    std::optional<RealPrototype> prototype_;

    friend Registry deserialize_registry(std::string_view bytes);
};

// Fingerprints, encodes and stores each image under `label`. source_paths may
// be empty or must match images in length. Returns the number added.
std::size_t register_images(Registry& registry, const std::string& label,
                            std::span<const RgbImage> images, const Encoder& encoder,
                            std::span<const std::string> source_paths = {},
                            std::int64_t added_at = 0);

// Registry file:
//   "LIDAREG" | version u8 | feature_dim u32 | record_count u64
//   | (id u64, label str, source_path str, added_at i64, f64 x dim) x count
//   | has_prototype u8 [f64 x dim, sample_count u64]
inline constexpr char kRegistryMagic[] = "LIDAREG";
inline constexpr std::uint8_t kRegistryVersion = 1;

std::string serialize_registry(const Registry& registry);
Registry deserialize_registry(std::string_view bytes);

void save_registry(const Registry& registry, const std::filesystem::path& path);
Registry load_registry(const std::filesystem::path& path);

}  // namespace lida
