#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "lida/encoder.hpp"
#include "lida/losses.hpp"

namespace lida {

// Encoder checkpoint file:
//   "LIDAENC" | version u8 | config block | f64 tensors (declaration order)
//   | has_prototype u8 [prototype f64 x dim, sample_count u64]
//   | center_count u32 [alpha f64, (label str, f64 x dim) x count]
// All integers and floats little-endian; strings are u32 length + bytes.
struct Checkpoint {
    Encoder encoder;
    std::optional<RealPrototype> prototype;
    std::optional<ClassCenters> centers;
};

inline constexpr char kCheckpointMagic[] = "LIDAENC";
inline constexpr std::uint8_t kCheckpointVersion = 1;

std::string serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint deserialize_checkpoint(std::string_view bytes);

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace lida
