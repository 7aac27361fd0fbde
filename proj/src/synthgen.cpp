#include "lida/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <json.hpp>

#include "binary_io.hpp"
#include "lida/error.hpp"
#include "lida/rng.hpp"

namespace lida {

namespace {

constexpr std::uint64_t kContentTag = 0xC0;
constexpr std::uint64_t kRealBitsTag = 0x5EA1;
constexpr std::uint64_t kFakeBitsTag = 0xFA4E;
constexpr std::uint8_t kHighMask = 0xF8;

// Bits 3..7 of the class texture, interleaved RGB. The texture is posterized
// to a few flat levels so most pixels sit inside wide constant regions.
std::vector<std::uint8_t> content_high_bits(int class_id, std::uint64_t seed, const SynthConfig& cfg) {
    cfg.validate();
    if (class_id < 0 || class_id >= cfg.content_classes) {
        throw InvalidArgument("content class " + std::to_string(class_id) + " out of range [0," +
                              std::to_string(cfg.content_classes) + ")");
    }
    Rng rng(mix_seed(seed, kContentTag + static_cast<std::uint64_t>(class_id)));
    const int side = cfg.image_side;
    const int kind = class_id % 3;
    const double scale = 1.0 + 0.5 * (class_id / 3);
    std::array<double, 3> base{}, amp{};
    for (int c = 0; c < 3; ++c) {
        base[c] = rng.uniform(70.0, 180.0);
        amp[c] = rng.uniform(25.0, 60.0) * (rng.bernoulli(0.5) ? 1.0 : -1.0);
    }
    const double period = rng.uniform(32.0, 64.0) * scale;
    const double angle = rng.uniform(0.0, std::numbers::pi);
    const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double cy = rng.uniform(0.0, side), cx = rng.uniform(0.0, side);
    const int block = 16 + static_cast<int>(rng.below(17));
    const double two_pi = 2.0 * std::numbers::pi;
    constexpr int levels = 4;

    std::vector<std::uint8_t> px(static_cast<std::size_t>(side) * side * 3);
    for (int i = 0; i < side; ++i) {
        for (int j = 0; j < side; ++j) {
            double s = 0.0;
            switch (kind) {
                case 0:  // oriented stripes
                    s = std::sin(two_pi * (i * std::cos(angle) + j * std::sin(angle)) / period + phase);
                    break;
                case 1:  // rings
                    s = std::sin(two_pi * std::hypot(i - cy, j - cx) / period + phase);
                    break;
                default:  // checker blocks over a slow ramp
                    s = 0.6 * (((i / block) + (j / block)) % 2 == 0 ? 1.0 : -1.0) +
                        0.4 * std::sin(two_pi * (i + j) / (4.0 * period) + phase);
                    break;
            }
            const int level = std::min(levels - 1, static_cast<int>((s + 1.0) * 0.5 * levels));
            const double q = 2.0 * level / (levels - 1) - 1.0;
            for (int c = 0; c < 3; ++c) {
                const double v = std::clamp(base[c] + amp[c] * q, 0.0, 255.0);
                px[(static_cast<std::size_t>(i) * side + j) * 3 + c] =
                    static_cast<std::uint8_t>(static_cast<int>(std::lround(v)) & kHighMask);
            }
        }
    }
    return px;
}

std::uint8_t nonzero_low(Rng& rng) { return static_cast<std::uint8_t>(1 + rng.below(7)); }

}  // namespace

void GeneratorSpec::validate() const {
    if (name.empty()) throw ConfigError("generator name must not be empty");
    for (const auto& s : signature) {
        if (s.period_row < 1 || s.period_col < 1) throw ConfigError(name + ": periods must be >= 1");
        if (s.phase_row < 0 || s.phase_col < 0) throw ConfigError(name + ": phases must be >= 0");
        if (s.width_row < 1 || s.width_row > s.period_row || s.width_col < 1 || s.width_col > s.period_col) {
            throw ConfigError(name + ": widths must be in [1, period]");
        }
        const auto in_unit = [](double p) { return p >= 0.0 && p <= 1.0; };
        if (!in_unit(s.p_zero_site) || !in_unit(s.p_zero_elsewhere)) {
            throw ConfigError(name + ": probabilities must be in [0,1]");
        }
    }
}

void SynthConfig::validate() const {
    if (image_side < kMinImageSide) {
        throw ConfigError("image_side must be >= " + std::to_string(kMinImageSide));
    }
    if (content_classes < 1) throw ConfigError("content_classes must be >= 1");
}

std::vector<GeneratorSpec> default_generator_specs() {
    const auto same = [](ChannelSignature s) { return std::array<ChannelSignature, 3>{s, s, s}; };
    // {period_row, period_col, phase_row, phase_col, width_row, width_col, p_site, p_elsewhere}
    std::vector<GeneratorSpec> specs;
    specs.push_back({"blocks15", same({15, 15, 0, 0, 8, 8, 0.97, 0.02}), 101});
    specs.push_back({"rows16",
                     {ChannelSignature{16, 1, 0, 0, 8, 1, 0.97, 0.02}, ChannelSignature{16, 1, 4, 0, 8, 1, 0.97, 0.02},
                      ChannelSignature{16, 1, 8, 0, 8, 1, 0.97, 0.02}},
                     202});
    specs.push_back({"cols17", same({1, 17, 0, 3, 1, 8, 0.97, 0.02}), 303});
    specs.push_back({"lattice5",
                     {ChannelSignature{5, 5, 0, 0, 2, 2, 0.97, 0.02}, ChannelSignature{5, 5, 1, 1, 2, 2, 0.97, 0.02},
                      ChannelSignature{5, 5, 2, 2, 2, 2, 0.97, 0.02}},
                     404});
    return specs;
}

RgbImage synth_real(int class_id, std::uint64_t seed, const SynthConfig& config) {
    auto px = content_high_bits(class_id, seed, config);
    Rng bits(mix_seed(seed, kRealBitsTag));
    for (auto& v : px) v = static_cast<std::uint8_t>(v | bits.below(8));
    return RgbImage(config.image_side, config.image_side, std::move(px));
}

RgbImage synth_fake(const GeneratorSpec& spec, int class_id, std::uint64_t seed, const SynthConfig& config) {
    spec.validate();
    auto px = content_high_bits(class_id, seed, config);
    Rng bits(mix_seed(seed ^ spec.seed, kFakeBitsTag));
    const int side = config.image_side;
    for (int i = 0; i < side; ++i) {
        for (int j = 0; j < side; ++j) {
            for (int c = 0; c < 3; ++c) {
                const auto& s = spec.signature[c];
                const bool site = (i + s.phase_row) % s.period_row < s.width_row &&
                                  (j + s.phase_col) % s.period_col < s.width_col;
                const bool zero = bits.bernoulli(site ? s.p_zero_site : s.p_zero_elsewhere);
                auto& v = px[(static_cast<std::size_t>(i) * side + j) * 3 + c];
                v = static_cast<std::uint8_t>(v | (zero ? 0 : nonzero_low(bits)));
            }
        }
    }
    return RgbImage(side, side, std::move(px));
}

std::vector<SynthSample> generate(const SynthPlan& plan) {
    plan.config.validate();
    if (plan.real_per_class < 0 || plan.fake_per_class < 0) {
        throw ConfigError("per-class counts must be non-negative");
    }
    std::vector<SynthSample> out;
    std::uint64_t index = 0;
    for (int cls = 0; cls < plan.config.content_classes; ++cls) {
        for (int n = 0; n < plan.real_per_class; ++n) {
            const std::uint64_t s = mix_seed(plan.seed, index++);
            out.push_back({synth_real(cls, s, plan.config), "real", cls, s});
        }
    }
    for (const auto& g : plan.generators) {
        for (int cls = 0; cls < plan.config.content_classes; ++cls) {
            for (int n = 0; n < plan.fake_per_class; ++n) {
                const std::uint64_t s = mix_seed(plan.seed, index++);
                out.push_back({synth_fake(g, cls, s, plan.config), g.name, cls, s});
            }
        }
    }
    return out;
}

SynthPlan load_synth_plan(const std::filesystem::path& path) {
    using nlohmann::json;
    json j;
    try {
        j = json::parse(detail::read_file(path));
    } catch (const json::exception& e) {
        throw ConfigError("synth plan '" + path.string() + "': " + e.what());
    }
    SynthPlan plan;
    try {
        plan.config.image_side = j.value("image_side", plan.config.image_side);
        plan.config.content_classes = j.value("content_classes", plan.config.content_classes);
        plan.real_per_class = j.value("real_per_class", plan.real_per_class);
        plan.fake_per_class = j.value("fake_per_class", plan.fake_per_class);
        plan.seed = j.value("seed", plan.seed);
        if (j.contains("generators")) {
            plan.generators.clear();
            for (const auto& g : j.at("generators")) {
                GeneratorSpec spec;
                spec.name = g.at("name").get<std::string>();
                spec.seed = g.value("seed", std::uint64_t{0});
                const auto& sig = g.at("signature");
                if (!sig.is_array() || (sig.size() != 1 && sig.size() != 3)) {
                    throw ConfigError(spec.name + ": signature must list 1 or 3 channels");
                }
                for (int c = 0; c < 3; ++c) {
                    const auto& cj = sig.at(sig.size() == 1 ? 0 : c);
                    ChannelSignature cs;
                    cs.period_row = cj.value("period_row", cs.period_row);
                    cs.period_col = cj.value("period_col", cs.period_col);
                    cs.phase_row = cj.value("phase_row", cs.phase_row);
                    cs.phase_col = cj.value("phase_col", cs.phase_col);
                    cs.width_row = cj.value("width_row", cs.width_row);
                    cs.width_col = cj.value("width_col", cs.width_col);
                    cs.p_zero_site = cj.value("p_zero_site", cs.p_zero_site);
                    cs.p_zero_elsewhere = cj.value("p_zero_elsewhere", cs.p_zero_elsewhere);
                    spec.signature[c] = cs;
                }
                spec.validate();
                plan.generators.push_back(std::move(spec));
            }
        }
    } catch (const json::exception& e) {
        throw ConfigError("synth plan '" + path.string() + "': " + e.what());
    }
    plan.config.validate();
    return plan;
}

std::string synth_plan_to_json(const SynthPlan& plan) {
    using nlohmann::json;
    json j;
    j["image_side"] = plan.config.image_side;
    j["content_classes"] = plan.config.content_classes;
    j["real_per_class"] = plan.real_per_class;
    j["fake_per_class"] = plan.fake_per_class;
    j["seed"] = plan.seed;
    j["generators"] = json::array();
    for (const auto& g : plan.generators) {
        json sig = json::array();
        for (const auto& s : g.signature) {
            sig.push_back({{"period_row", s.period_row},
                           {"period_col", s.period_col},
                           {"phase_row", s.phase_row},
                           {"phase_col", s.phase_col},
                           {"width_row", s.width_row},
                           {"width_col", s.width_col},
                           {"p_zero_site", s.p_zero_site},
                           {"p_zero_elsewhere", s.p_zero_elsewhere}});
        }
        j["generators"].push_back({{"name", g.name}, {"seed", g.seed}, {"signature", sig}});
    }
    return j.dump(2) + "\n";
}

}  // namespace lida
