#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "lida/checkpoint.hpp"
#include "lida/encoder.hpp"
#include "lida/error.hpp"
#include "lida/fingerprint.hpp"
#include "lida/image_io.hpp"
#include "lida/metrics.hpp"
#include "lida/pipeline.hpp"
#include "lida/registry.hpp"
#include "lida/retrieval.hpp"
#include "lida/synthgen.hpp"
#include "lida/training.hpp"

namespace py = pybind11;
using namespace lida;

namespace {

using U8Array = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;

// Images cross the boundary as (height, width, 3) uint8 arrays.
RgbImage to_image(const U8Array& a) {
    if (a.ndim() != 3 || a.shape(2) != 3) throw InvalidArgument("expected an array of shape (height, width, 3)");
    const auto h = static_cast<int>(a.shape(0)), w = static_cast<int>(a.shape(1));
    return RgbImage(w, h, std::vector<std::uint8_t>(a.data(), a.data() + a.size()));
}

U8Array from_image(const RgbImage& img) {
    U8Array out({img.height(), img.width(), 3});
    std::copy(img.data().begin(), img.data().end(), out.mutable_data());
    return out;
}

U8Array from_fingerprint(const FingerprintImage& fp) {
    U8Array out({fp.height(), fp.width(), 3});
    auto* p = out.mutable_data();
    for (int i = 0; i < fp.height(); ++i)
        for (int j = 0; j < fp.width(); ++j)
            for (int c = 0; c < 3; ++c) *p++ = fp.at(i, j, static_cast<Channel>(c));
    return out;
}

FingerprintImage to_fingerprint(const U8Array& a) {
    if (a.ndim() != 3 || a.shape(2) != 3) throw InvalidArgument("expected an array of shape (height, width, 3)");
    FingerprintImage fp(static_cast<int>(a.shape(1)), static_cast<int>(a.shape(0)));
    const auto* p = a.data();
    for (int i = 0; i < fp.height(); ++i)
        for (int j = 0; j < fp.width(); ++j)
            for (int c = 0; c < 3; ++c) {
                const auto v = *p++;
                if (v != 0 && v != 255) throw InvalidArgument("fingerprint samples must be 0 or 255");
                fp.at(i, j, static_cast<Channel>(c)) = v;
            }
    return fp;
}

std::vector<FingerprintImage> to_fingerprints(const std::vector<U8Array>& arrays) {
    std::vector<FingerprintImage> out;
    out.reserve(arrays.size());
    for (const auto& a : arrays) out.push_back(to_fingerprint(a));
    return out;
}

FeatureVector to_feature(const std::vector<double>& v) { return FeatureVector{v}; }

py::list ranking_to_list(const RankedResult& r) {
    py::list out;
    for (const auto& e : r.entries) out.append(py::make_tuple(e.id, e.label, e.similarity));
    return out;
}

TrainConfig train_config(double lr, int epochs, int batch_size, std::uint64_t seed, const std::string& variant,
                         double lambda, double tau, double alpha, int threads) {
    TrainConfig tc;
    tc.learning_rate = lr;
    tc.epochs = epochs;
    tc.batch_size = batch_size;
    tc.seed = seed;
    tc.variant = parse_loss_variant(variant);
    tc.weights = LossWeights{lambda, tau};
    tc.alpha = alpha;
    tc.threads = threads;
    return tc;
}

}  // namespace

PYBIND11_MODULE(_lida, m) {
    m.doc() = "Low-bit-plane fingerprint attribution of generated images";

    auto base = py::register_exception<Error>(m, "LidaError", PyExc_RuntimeError);
    py::register_exception<InvalidArgument>(m, "InvalidArgument", base.ptr());
    py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
    py::register_exception<CorruptFile>(m, "CorruptFile", base.ptr());
    py::register_exception<IoError>(m, "IoError", base.ptr());
    py::register_exception<NotPretrained>(m, "NotPretrained", base.ptr());
    py::register_exception<NumericalFailure>(m, "NumericalFailure", base.ptr());
    py::register_exception<DegenerateFeature>(m, "DegenerateFeature", base.ptr());

    m.attr("REAL_LABEL") = kRealLabel;
    m.attr("DEFAULT_THRESHOLD") = kDefaultDetectionThreshold;

    m.def("fingerprint", [](const U8Array& img) { return from_fingerprint(extract_fingerprint(to_image(img))); },
          py::arg("image"), "255 where the three low bits of a sample are not all zero, else 0.");
    m.def("read_image", [](const std::filesystem::path& p) { return from_image(read_image(p)); }, py::arg("path"));
    m.def("write_image", [](const U8Array& img, const std::filesystem::path& p) { write_image(to_image(img), p); },
          py::arg("image"), py::arg("path"));
    m.def("degrade", [](const U8Array& img, double sigma) { return from_image(degrade(to_image(img), sigma)); },
          py::arg("image"), py::arg("sigma"));
    m.def("cosine_similarity", [](const std::vector<double>& a, const std::vector<double>& b) {
        return cosine_similarity(to_feature(a), to_feature(b));
    });

    m.def(
        "synthesize",
        [](int real_per_class, int fake_per_class, std::uint64_t seed, int image_side) {
            SynthPlan plan;
            plan.real_per_class = real_per_class;
            plan.fake_per_class = fake_per_class;
            plan.seed = seed;
            plan.config.image_side = image_side;
            py::list out;
            for (const auto& s : generate(plan)) out.append(py::make_tuple(from_image(s.image), s.label, s.content_class));
            return out;
        },
        py::arg("real_per_class") = 10, py::arg("fake_per_class") = 5, py::arg("seed") = 0, py::arg("image_side") = 128,
        "List of (image, label, content_class) from the default generator families.");
    m.def("generator_names", [] {
        std::vector<std::string> names;
        for (const auto& g : default_generator_specs()) names.push_back(g.name);
        return names;
    });

    py::class_<Encoder>(m, "Encoder")
        .def(py::init([](std::uint64_t seed, int input_side, int feature_dim, int num_pretext_classes) {
                 EncoderConfig cfg;
                 cfg.seed = seed;
                 cfg.input_side = input_side;
                 cfg.feature_dim = feature_dim;
                 cfg.num_pretext_classes = num_pretext_classes;
                 cfg.validate();
                 return Encoder(cfg);
             }),
             py::arg("seed") = 0, py::arg("input_side") = 32, py::arg("feature_dim") = 64,
             py::arg("num_pretext_classes") = 3)
        .def_property_readonly("input_side", [](const Encoder& e) { return e.config().input_side; })
        .def_property_readonly("feature_dim", [](const Encoder& e) { return e.config().feature_dim; })
        .def_property_readonly("parameter_count", [](const Encoder& e) { return e.params().size(); })
        .def("encode", [](const Encoder& e, const U8Array& fp) { return e.encode(to_fingerprint(fp)).values; },
             py::arg("fingerprint"))
        .def("encode_all",
             [](const Encoder& e, const std::vector<U8Array>& fps, int threads) {
                 std::vector<std::vector<double>> out;
                 for (auto& f : encode_all(e, to_fingerprints(fps), threads)) out.push_back(std::move(f.values));
                 return out;
             },
             py::arg("fingerprints"), py::arg("threads") = 0);

    py::class_<Checkpoint>(m, "Checkpoint")
        .def(py::init([](const Encoder& e, std::optional<std::vector<double>> prototype, std::uint64_t count) {
                 Checkpoint c{e, std::nullopt, std::nullopt};
                 if (prototype) c.prototype = RealPrototype{normalize(to_feature(*prototype)), count};
                 return c;
             }),
             py::arg("encoder"), py::arg("prototype") = py::none(), py::arg("sample_count") = 0)
        .def_readwrite("encoder", &Checkpoint::encoder)
        .def_property_readonly("prototype",
                               [](const Checkpoint& c) -> std::optional<std::vector<double>> {
                                   if (!c.prototype) return std::nullopt;
                                   return c.prototype->p.values;
                               })
        .def("save", [](const Checkpoint& c, const std::filesystem::path& p) { save_checkpoint(c, p); })
        .def_static("load", &load_checkpoint, py::arg("path"));

    py::class_<Registry>(m, "Registry")
        .def(py::init<int>(), py::arg("feature_dim") = 64)
        .def("__len__", &Registry::size)
        .def_property_readonly("feature_dim", &Registry::feature_dim)
        .def("labels", &Registry::labels)
        .def(
            "add",
            [](Registry& r, const std::string& label, const std::vector<double>& feature, const std::string& source,
               std::int64_t added_at) { return r.add(label, to_feature(feature), source, added_at).id; },
            py::arg("label"), py::arg("feature"), py::arg("source_path") = "", py::arg("added_at") = 0)
        .def("records",
             [](const Registry& r) {
                 py::list out;
                 for (const auto& rec : r.records())
                     out.append(py::dict(py::arg("id") = rec.id, py::arg("label") = rec.label,
                                         py::arg("feature") = rec.feature.values,
                                         py::arg("source_path") = rec.source_path, py::arg("added_at") = rec.added_at));
                 return out;
             })
        .def_property(
            "prototype",
            [](const Registry& r) -> std::optional<std::vector<double>> {
                if (!r.prototype()) return std::nullopt;
                return r.prototype()->p.values;
            },
            [](Registry& r, const std::vector<double>& p) { r.set_prototype(RealPrototype{normalize(to_feature(p)), 1}); })
        .def("save", [](const Registry& r, const std::filesystem::path& p) { save_registry(r, p); })
        .def_static("load", &load_registry, py::arg("path"));

    m.def(
        "attribute",
        [](const U8Array& fp, const Registry& reg, const Encoder& enc, std::size_t k) {
            return ranking_to_list(attribute(to_fingerprint(fp), reg, enc, k));
        },
        py::arg("fingerprint"), py::arg("registry"), py::arg("encoder"), py::arg("k") = 1,
        "Top-k (id, label, similarity), similarity descending, ties by ascending id.");
    m.def(
        "detect",
        [](const U8Array& fp, const std::vector<double>& prototype, const Encoder& enc, double threshold) {
            const auto v = detect(to_fingerprint(fp), RealPrototype{normalize(to_feature(prototype)), 1}, enc, threshold);
            return py::make_tuple(v.is_real, v.similarity_to_prototype);
        },
        py::arg("fingerprint"), py::arg("prototype"), py::arg("encoder"), py::arg("threshold") = kDefaultDetectionThreshold,
        "(is_real, similarity to the real prototype).");

    m.def(
        "pretrain",
        [](const Encoder& initial, const std::vector<U8Array>& corpus, const std::vector<int>& classes, double lr,
           int epochs, int batch_size, std::uint64_t seed, int threads) {
            const auto fps = to_fingerprints(corpus);
            const auto tc = train_config(lr, epochs, batch_size, seed, "standard", 0.9, 0.1, 0.5, threads);
            py::gil_scoped_release release;
            auto r = pretrain(initial, fps, classes, tc);
            py::gil_scoped_acquire acquire;
            return py::make_tuple(Checkpoint{r.encoder, r.prototype, std::nullopt}, r.final_accuracy);
        },
        py::arg("encoder"), py::arg("fingerprints"), py::arg("classes"), py::arg("lr") = 1e-4, py::arg("epochs") = 100,
        py::arg("batch_size") = 32, py::arg("seed") = 0, py::arg("threads") = 0,
        "Returns (checkpoint with prototype, pretext accuracy percent).");
    m.def(
        "adapt",
        [](const Checkpoint& ckpt, const Registry& reg, const std::vector<U8Array>& exemplars,
           const std::vector<U8Array>& reals, double lr, int epochs, int batch_size, std::uint64_t seed,
           const std::string& variant, double lambda, double tau, double alpha, int threads) {
            if (!ckpt.prototype) throw NotPretrained("checkpoint has no real prototype");
            const auto ex = to_fingerprints(exemplars);
            const auto re = to_fingerprints(reals);
            const auto tc = train_config(lr, epochs, batch_size, seed, variant, lambda, tau, alpha, threads);
            py::gil_scoped_release release;
            auto r = adapt(ckpt.encoder, reg, ex, re, *ckpt.prototype, tc);
            py::gil_scoped_acquire acquire;
            return py::make_tuple(Checkpoint{r.encoder, ckpt.prototype, r.centers}, r.registry);
        },
        py::arg("checkpoint"), py::arg("registry"), py::arg("exemplars"), py::arg("reals"), py::arg("lr") = 1e-4,
        py::arg("epochs") = 100, py::arg("batch_size") = 32, py::arg("seed") = 0, py::arg("variant") = "standard",
        py::arg("lambda_") = 0.9, py::arg("tau") = 0.1, py::arg("alpha") = 0.5, py::arg("threads") = 0,
        "Returns (adapted checkpoint, registry re-encoded with the adapted encoder).");

    m.def(
        "evaluate",
        [](const Encoder& enc, const Registry& reg, const std::vector<U8Array>& queries,
           const std::vector<std::string>& labels) {
            const auto feats = encode_all(enc, to_fingerprints(queries));
            const auto rep = evaluate(feats, labels, reg, EvalOptions{}).report;
            py::dict per_label;
            for (const auto& s : rep.per_label)
                per_label[py::str(s.label)] = py::dict(py::arg("queries") = s.queries, py::arg("rank1") = s.rank1,
                                                       py::arg("map") = s.map);
            return py::dict(py::arg("rank1") = rep.avg_rank1, py::arg("map") = rep.avg_map,
                            py::arg("queries") = rep.query_count, py::arg("per_label") = per_label);
        },
        py::arg("encoder"), py::arg("registry"), py::arg("fingerprints"), py::arg("labels"));
}
