#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "lida/image.hpp"

namespace lida {

// Low-bit signature of one channel. A pixel is a site when
// (row + phase_row) % period_row < width_row and
// (col + phase_col) % period_col < width_col.
// Its low three bits are zero with probability p_zero_site on sites and
// p_zero_elsewhere off them; otherwise they are uniform over 1..7.
struct ChannelSignature {
    int period_row = 1;
    int period_col = 1;
    int phase_row = 0;
    int phase_col = 0;
    int width_row = 1;
    int width_col = 1;
    double p_zero_site = 0.9;
    double p_zero_elsewhere = 0.02;

    bool operator==(const ChannelSignature&) const = default;
};

struct GeneratorSpec {
    std::string name;
    std::array<ChannelSignature, 3> signature;
    std::uint64_t seed = 0;

    void validate() const;  // throws ConfigError

    bool operator==(const GeneratorSpec&) const = default;
};

struct SynthConfig {
    int image_side = 128;
    int content_classes = 3;

    void validate() const;
};

// Four families with pairwise coprime periods along each axis: square
// blocks, horizontal bands, vertical bands, and a fine 2x2 lattice.
std::vector<GeneratorSpec> default_generator_specs();

// Class-dependent posterized texture (stripes, rings or checker blocks) in
// bits 3..7, uniformly random bits 0..2.
RgbImage synth_real(int class_id, std::uint64_t seed, const SynthConfig& config = {});

// Same content as synth_real(class_id, seed); low bits drawn from the spec.
RgbImage synth_fake(const GeneratorSpec& spec, int class_id, std::uint64_t seed,
                    const SynthConfig& config = {});

struct SynthSample {
    RgbImage image;
    std::string label;  // generator name or "real"
    int content_class = 0;
    std::uint64_t seed = 0;
};

struct SynthPlan {
    SynthConfig config;
    std::vector<GeneratorSpec> generators = default_generator_specs();
    int real_per_class = 0;
    int fake_per_class = 0;  // per generator and class
    std::uint64_t seed = 0;
};

// Reals first (class-major), then each generator in order (class-major).
// Sample seeds are derived from plan.seed and the sample's position.
std::vector<SynthSample> generate(const SynthPlan& plan);

// JSON plan file: {"image_side", "content_classes", "real_per_class",
// "fake_per_class", "seed", "generators": [{"name", "seed", "signature":
// [{"period_row", "period_col", "phase_row", "phase_col", "width_row",
// "width_col", "p_zero_site", "p_zero_elsewhere"} x 1 or 3]}]}. Missing fields take their defaults; a missing
// "generators" array means default_generator_specs().
SynthPlan load_synth_plan(const std::filesystem::path& path);
std::string synth_plan_to_json(const SynthPlan& plan);

}  // namespace lida
