#include "cli.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "lida/checkpoint.hpp"
#include "lida/error.hpp"
#include "lida/fingerprint.hpp"
#include "lida/image_io.hpp"
#include "lida/pipeline.hpp"
#include "lida/registry.hpp"
#include "lida/retrieval.hpp"
#include "lida/rng.hpp"
#include "lida/synthgen.hpp"
#include "lida/training.hpp"

namespace fs = std::filesystem;

namespace lida::cli {

namespace {

struct ManifestRow {
    fs::path path;  // resolved against the manifest directory
    std::string label;
    int content_class = 0;
};

std::vector<ManifestRow> read_manifest(const fs::path& file) {
    std::ifstream in(file);
    if (!in) throw IoError("cannot open manifest '" + file.string() + "'");
    std::vector<ManifestRow> rows;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (lineno == 1 && line.rfind("path,", 0) == 0) continue;  // header
        std::vector<std::string> cols;
        std::stringstream ss(line);
        for (std::string c; std::getline(ss, c, ',');) cols.push_back(c);
        if (cols.size() != 3) {
            throw ConfigError(file.string() + ":" + std::to_string(lineno) + ": expected path,label,class");
        }
        ManifestRow row;
        row.path = fs::path(cols[0]).is_absolute() ? fs::path(cols[0]) : file.parent_path() / cols[0];
        row.label = cols[1];
        try {
            std::size_t used = 0;
            row.content_class = std::stoi(cols[2], &used);
            if (used != cols[2].size()) throw std::invalid_argument("trailing");
        } catch (const std::exception&) {
            throw ConfigError(file.string() + ":" + std::to_string(lineno) + ": bad class '" + cols[2] + "'");
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

FingerprintImage load_fingerprint(const fs::path& p) { return extract_fingerprint(read_image(p)); }

std::int64_t timestamp_now() {
    if (const char* s = std::getenv("SOURCE_DATE_EPOCH"); s != nullptr && *s != '\0') {
        try {
            return std::stoll(s);
        } catch (const std::exception&) {
            throw ConfigError("SOURCE_DATE_EPOCH is not an integer");
        }
    }
    return std::chrono::duration_cast<std::chrono::seconds>(std::chrono::system_clock::now().time_since_epoch())
        .count();
}

std::string db_path(const std::string& flag) {
    if (!flag.empty()) return flag;
    if (const char* env = std::getenv(kDbEnv); env != nullptr && *env != '\0') return env;
    throw ConfigError(std::string("no registry given: pass --db or set ") + kDbEnv);
}

void write_text(const fs::path& p, const std::string& text) {
    std::ofstream f(p, std::ios::binary);
    if (!f) throw IoError("cannot write '" + p.string() + "'");
    f << text;
    if (!f) throw IoError("write failed for '" + p.string() + "'");
}

std::string fixed6(double v) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(6) << v;
    return os.str();
}

struct TrainFlags {
    int epochs = 100;
    double lr = 1e-4;
    int batch = 32;
    std::uint64_t seed = 0;
    std::string log;

    void add(CLI::App* app) {
        app->add_option("--epochs", epochs, "Training epochs")->capture_default_str()->check(CLI::NonNegativeNumber);
        app->add_option("--lr", lr, "SGD learning rate")->capture_default_str()->check(CLI::PositiveNumber);
        app->add_option("--batch-size", batch, "Mini-batch size")->capture_default_str()->check(CLI::PositiveNumber);
        app->add_option("--seed", seed, "Seed for initialization and shuffling")->capture_default_str();
        app->add_option("--log", log, "Write the per-epoch log as TSV");
    }

    TrainConfig config(int threads) const {
        TrainConfig c;
        c.epochs = epochs;
        c.learning_rate = lr;
        c.batch_size = batch;
        c.seed = seed;
        c.threads = threads;
        return c;
    }
};

// Reals for adaptation: `count` distinct corpus entries drawn with the run seed.
std::vector<FingerprintImage> sample_reals(const std::vector<ManifestRow>& corpus, std::size_t count,
                                           std::uint64_t seed) {
    std::vector<const ManifestRow*> reals;
    for (const auto& r : corpus) {
        if (r.label == kRealLabel) reals.push_back(&r);
    }
    if (reals.size() < count) {
        throw InvalidArgument("corpus has " + std::to_string(reals.size()) + " real images, adaptation needs " +
                              std::to_string(count));
    }
    Rng rng(mix_seed(seed, 0xADA7));
    for (std::size_t i = reals.size(); i > 1; --i) {
        std::swap(reals[i - 1], reals[rng.below(i)]);
    }
    std::vector<FingerprintImage> out;
    for (std::size_t i = 0; i < count; ++i) out.push_back(load_fingerprint(reals[i]->path));
    return out;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Low-bit fingerprint attribution of AI-generated images", args.empty() ? "lida" : args[0]};
    app.require_subcommand(1);
    int threads = 0;
    app.add_option("--threads", threads, "Worker threads (0 = all cores); results do not depend on it")
        ->capture_default_str()
        ->check(CLI::NonNegativeNumber);

    std::function<void()> action;

    // fingerprint
    auto* fp_cmd = app.add_subcommand("fingerprint", "Write the low-bit fingerprint of an image");
    std::string fp_in, fp_out;
    fp_cmd->add_option("image", fp_in, "Input image (.png, .ppm, .pgm)")->required()->check(CLI::ExistingFile);
    fp_cmd->add_option("--out", fp_out, "Output fingerprint (.png or .ppm)")->required();
    fp_cmd->callback([&] {
        action = [&] {
            const auto fp = load_fingerprint(fp_in);
            write_fingerprint(fp, fp_out);
            std::size_t set = 0;
            for (auto v : fp.data()) set += v != 0;
            out << fp_out << "\t" << fp.width() << "x" << fp.height() << "\tnonzero=" << fixed6(static_cast<double>(set) / fp.data().size())
                << "\n";
        };
    });

    // synth
    auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic real/fake corpus");
    std::string synth_out, synth_spec;
    std::optional<int> synth_real, synth_fake;
    std::optional<std::uint64_t> synth_seed;
    synth_cmd->add_option("--out", synth_out, "Output directory (images plus manifest.csv)")->required();
    synth_cmd->add_option("--spec", synth_spec, "JSON generation plan")->check(CLI::ExistingFile);
    synth_cmd->add_option("--real-per-class", synth_real, "Override real images per content class");
    synth_cmd->add_option("--fake-per-class", synth_fake, "Override fake images per generator and class");
    synth_cmd->add_option("--seed", synth_seed, "Override the plan seed");
    synth_cmd->callback([&] {
        action = [&] {
            SynthPlan plan;
            plan.real_per_class = 10;
            plan.fake_per_class = 5;
            if (!synth_spec.empty()) plan = load_synth_plan(synth_spec);
            if (synth_real) plan.real_per_class = *synth_real;
            if (synth_fake) plan.fake_per_class = *synth_fake;
            if (synth_seed) plan.seed = *synth_seed;
            const auto samples = generate(plan);
            const fs::path dir(synth_out);
            std::error_code ec;
            fs::create_directories(dir, ec);
            if (ec) throw IoError("cannot create '" + dir.string() + "': " + ec.message());
            std::ostringstream manifest;
            manifest << "path,label,class\n";
            std::map<std::string, int> counter;
            for (const auto& s : samples) {
                if (s.label.find_first_of(",/\\") != std::string::npos) {
                    throw ConfigError("generator name '" + s.label + "' is not usable as a path");
                }
                fs::create_directories(dir / s.label, ec);
                if (ec) throw IoError("cannot create '" + (dir / s.label).string() + "': " + ec.message());
                std::ostringstream name;
                name << s.label << "_c" << s.content_class << "_" << std::setw(5) << std::setfill('0')
                     << counter[s.label]++ << ".png";
                const fs::path rel = fs::path(s.label) / name.str();
                write_image(s.image, dir / rel);
                manifest << rel.generic_string() << "," << s.label << "," << s.content_class << "\n";
            }
            write_text(dir / "manifest.csv", manifest.str());
            out << samples.size() << " images written to " << dir.string() << "\n";
        };
    });

    // pretrain
    auto* pre_cmd = app.add_subcommand("pretrain", "Pretrain the encoder on the real images of a corpus");
    std::string pre_corpus, pre_out;
    TrainFlags pre_flags;
    pre_cmd->add_option("--corpus", pre_corpus, "Corpus manifest (path,label,class)")->required()->check(CLI::ExistingFile);
    pre_cmd->add_option("--out", pre_out, "Output encoder checkpoint")->required();
    pre_flags.add(pre_cmd);
    pre_cmd->callback([&] {
        action = [&] {
            const auto rows = read_manifest(pre_corpus);
            std::vector<FingerprintImage> fps;
            std::vector<int> classes;
            for (const auto& r : rows) {
                if (r.label != kRealLabel) continue;
                fps.push_back(load_fingerprint(r.path));
                classes.push_back(r.content_class);
            }
            if (fps.empty()) throw InvalidArgument("corpus has no real images");
            EncoderConfig ec;
            ec.num_pretext_classes = *std::max_element(classes.begin(), classes.end()) + 1;
            ec.seed = pre_flags.seed;
            const auto cfg = pre_flags.config(threads);
            err << "pretraining on " << fps.size() << " real images, " << cfg.epochs << " epochs\n";
            auto res = pretrain(Encoder(ec), fps, classes, cfg);
            save_checkpoint({res.encoder, res.prototype, std::nullopt}, pre_out);
            if (!pre_flags.log.empty()) write_text(pre_flags.log, res.log.to_tsv());
            out << "pretext_accuracy\t" << fixed6(res.final_accuracy) << "\n";
        };
    });

    // register
    auto* reg_cmd = app.add_subcommand("register", "Add labelled exemplars to a registry");
    std::string reg_db, reg_enc, reg_label;
    std::vector<std::string> reg_images;
    reg_cmd->add_option("--db", reg_db, std::string("Registry file (default $") + kDbEnv + ")");
    reg_cmd->add_option("--encoder", reg_enc, "Encoder checkpoint")->required()->check(CLI::ExistingFile);
    reg_cmd->add_option("--label", reg_label, "Generator label, or 'real'")->required();
    reg_cmd->add_option("images", reg_images, "Exemplar images")->required()->check(CLI::ExistingFile);
    reg_cmd->callback([&] {
        action = [&] {
            if (reg_label.empty()) throw ConfigError("--label must not be empty");
            const auto db = db_path(reg_db);
            const auto ckpt = load_checkpoint(reg_enc);
            Registry registry = fs::exists(db) ? load_registry(db) : Registry(ckpt.encoder.config().feature_dim);
            if (registry.feature_dim() != ckpt.encoder.config().feature_dim) {
                throw IncompatibleEncoder("registry holds " + std::to_string(registry.feature_dim()) +
                                          "-d features, encoder produces " +
                                          std::to_string(ckpt.encoder.config().feature_dim));
            }
            if (!registry.prototype() && ckpt.prototype) registry.set_prototype(*ckpt.prototype);
            std::vector<RgbImage> images;
            std::vector<std::string> sources;
            for (const auto& p : reg_images) {
                images.push_back(read_image(p));
                sources.push_back(fs::absolute(p).lexically_normal().string());
            }
            const auto n = register_images(registry, reg_label, images, ckpt.encoder, sources, timestamp_now());
            save_registry(registry, db);
            out << "registered\t" << reg_label << "\t" << n << "\ttotal\t" << registry.size() << "\n";
        };
    });

    // adapt
    auto* ad_cmd = app.add_subcommand("adapt", "Few-shot adaptation on the registered exemplars");
    std::string ad_db, ad_db_out, ad_enc, ad_corpus, ad_out, ad_variant = "standard";
    double ad_lambda = 0.9, ad_tau = 0.1, ad_alpha = 0.5;
    TrainFlags ad_flags;
    ad_cmd->add_option("--db", ad_db, std::string("Registry file (default $") + kDbEnv + ")");
    ad_cmd->add_option("--db-out", ad_db_out, "Where to write the re-encoded registry (default: --db)");
    ad_cmd->add_option("--encoder", ad_enc, "Pretrained encoder checkpoint")->required()->check(CLI::ExistingFile);
    ad_cmd->add_option("--corpus", ad_corpus, "Corpus manifest supplying the real images")->required()->check(CLI::ExistingFile);
    ad_cmd->add_option("--out", ad_out, "Output encoder checkpoint")->required();
    ad_cmd->add_option("--lambda", ad_lambda, "Detection loss weight")->capture_default_str();
    ad_cmd->add_option("--tau", ad_tau, "Detection temperature")->capture_default_str();
    ad_cmd->add_option("--alpha", ad_alpha, "Center update rate")->capture_default_str();
    ad_cmd->add_option("--variant", ad_variant, "Loss variant")
        ->capture_default_str()
        ->check(CLI::IsMember({"standard", "ce-attribution", "ce-detection", "ce-both"}));
    ad_flags.add(ad_cmd);
    ad_cmd->callback([&] {
        action = [&] {
            const auto db = db_path(ad_db);
            auto cfg = ad_flags.config(threads);
            cfg.weights = {ad_lambda, ad_tau};
            cfg.alpha = ad_alpha;
            cfg.variant = parse_loss_variant(ad_variant);
            cfg.validate();
            const auto ckpt = load_checkpoint(ad_enc);
            if (!ckpt.prototype) throw NotPretrained("encoder checkpoint has no real prototype; run pretrain first");
            const auto registry = load_registry(db);
            std::vector<FingerprintImage> exemplars;
            std::size_t fakes = 0;
            for (const auto& r : registry.records()) {
                if (r.source_path.empty()) {
                    throw InvalidArgument("record " + std::to_string(r.id) + " has no source path to re-encode");
                }
                exemplars.push_back(load_fingerprint(r.source_path));
                if (r.label != kRealLabel) ++fakes;
            }
            const auto reals = sample_reals(read_manifest(ad_corpus), fakes, cfg.seed);
            err << "adapting on " << exemplars.size() << " exemplars and " << reals.size() << " reals, "
                << cfg.epochs << " epochs\n";
            auto res = adapt(ckpt.encoder, registry, exemplars, reals, *ckpt.prototype, cfg);
            save_checkpoint({res.encoder, ckpt.prototype, res.centers}, ad_out);
            save_registry(res.registry, ad_db_out.empty() ? db : ad_db_out);
            if (!ad_flags.log.empty()) write_text(ad_flags.log, res.log.to_tsv());
            if (!res.log.epochs.empty()) {
                const auto& last = res.log.epochs.back();
                out << "final_loss\t" << fixed6(last.total_loss) << "\tattribution\t" << fixed6(last.main_loss)
                    << "\tdetection\t" << fixed6(last.detection_loss) << "\n";
            }
        };
    });

    // query
    auto* q_cmd = app.add_subcommand("query", "Rank registered exemplars for each query image");
    std::string q_db, q_enc;
    std::size_t q_k = 5, q_vote = 0;
    std::optional<int> q_patch;
    bool q_two_stage = false;
    double q_threshold = kDefaultDetectionThreshold;
    std::vector<std::string> q_images;
    q_cmd->add_option("--db", q_db, std::string("Registry file (default $") + kDbEnv + ")");
    q_cmd->add_option("--encoder", q_enc, "Encoder checkpoint")->required()->check(CLI::ExistingFile);
    q_cmd->add_option("-k", q_k, "Number of results")->capture_default_str()->check(CLI::PositiveNumber);
    q_cmd->add_option("--vote", q_vote, "Also print the majority label of the top N");
    q_cmd->add_option("--patch-side", q_patch, "Encode the best-matching patch of this side")->check(CLI::Range(1, 1 << 16));
    q_cmd->add_flag("--two-stage", q_two_stage, "Detect first, then attribute fakes among generators");
    q_cmd->add_option("--threshold", q_threshold, "Detection threshold for --two-stage")->capture_default_str();
    q_cmd->add_option("images", q_images, "Query images")->required()->check(CLI::ExistingFile);
    q_cmd->callback([&] {
        action = [&] {
            const auto ckpt = load_checkpoint(q_enc);
            const auto registry = load_registry(db_path(q_db));
            const auto proto = registry.prototype() ? registry.prototype() : ckpt.prototype;
            const std::size_t k = std::max(q_k, q_vote);
            for (const auto& img : q_images) {
                const auto fp = load_fingerprint(img);
                std::optional<RankedResult> ranking;
                if (q_two_stage) {
                    const auto ts = two_stage_attribute(fp, registry, proto, ckpt.encoder, q_threshold, k);
                    out << img << "\tdetect\t" << (ts.verdict.is_real ? "real" : "fake") << "\t"
                        << fixed6(ts.verdict.similarity_to_prototype) << "\n";
                    ranking = ts.ranking;
                } else {
                    ranking = attribute(fp, registry, ckpt.encoder, AttributeOptions{k, q_patch});
                }
                if (!ranking) continue;
                for (std::size_t i = 0; i < ranking->entries.size() && i < q_k; ++i) {
                    const auto& e = ranking->entries[i];
                    out << img << "\t" << (i + 1) << "\t" << e.label << "\t" << e.id << "\t" << fixed6(e.similarity)
                        << "\n";
                }
                if (q_vote > 0 && !ranking->entries.empty()) {
                    RankedResult top = *ranking;
                    if (top.entries.size() > q_vote) top.entries.resize(q_vote);
                    out << img << "\tvote\t" << majority_label(top) << "\n";
                }
            }
        };
    });

    // detect
    auto* d_cmd = app.add_subcommand("detect", "Real-vs-fake verdict by similarity to the real prototype");
    std::string d_enc, d_db;
    double d_threshold = kDefaultDetectionThreshold;
    std::vector<std::string> d_images;
    d_cmd->add_option("--encoder", d_enc, "Encoder checkpoint")->required()->check(CLI::ExistingFile);
    d_cmd->add_option("--db", d_db, "Registry whose prototype to use when the checkpoint has none");
    d_cmd->add_option("--threshold", d_threshold, "Similarity at or above which an image is real")->capture_default_str();
    d_cmd->add_option("images", d_images, "Images to classify")->required()->check(CLI::ExistingFile);
    d_cmd->callback([&] {
        action = [&] {
            const auto ckpt = load_checkpoint(d_enc);
            auto proto = ckpt.prototype;
            if (!proto && !d_db.empty()) proto = load_registry(d_db).prototype();
            for (const auto& img : d_images) {
                const auto v = detect(load_fingerprint(img), proto, ckpt.encoder, d_threshold);
                out << img << "\t" << (v.is_real ? "real" : "fake") << "\t" << fixed6(v.similarity_to_prototype)
                    << "\t" << fixed6(v.threshold) << "\n";
            }
        };
    });

    // eval
    auto* ev_cmd = app.add_subcommand("eval", "Rank-1 / mAP report over a labelled query manifest");
    std::string ev_db, ev_enc, ev_queries, ev_format = "table";
    std::size_t ev_vote = 0;
    bool ev_two_stage = false;
    double ev_threshold = kDefaultDetectionThreshold, ev_blur = 0.0;
    ev_cmd->add_option("--db", ev_db, std::string("Registry file (default $") + kDbEnv + ")");
    ev_cmd->add_option("--encoder", ev_enc, "Encoder checkpoint")->required()->check(CLI::ExistingFile);
    ev_cmd->add_option("--queries", ev_queries, "Query manifest (path,label,class)")->required()->check(CLI::ExistingFile);
    ev_cmd->add_option("--vote-k", ev_vote, "Predict by majority over the top N instead of rank 1");
    ev_cmd->add_flag("--two-stage", ev_two_stage, "Detect first, then attribute fakes among generators");
    ev_cmd->add_option("--threshold", ev_threshold, "Detection threshold")->capture_default_str();
    ev_cmd->add_option("--blur", ev_blur, "Gaussian blur sigma applied to queries")->capture_default_str()->check(CLI::NonNegativeNumber);
    ev_cmd->add_option("--format", ev_format, "Report format")->capture_default_str()->check(CLI::IsMember({"table", "tsv"}));
    ev_cmd->callback([&] {
        action = [&] {
            const auto ckpt = load_checkpoint(ev_enc);
            const auto registry = load_registry(db_path(ev_db));
            const auto rows = read_manifest(ev_queries);
            std::vector<FingerprintImage> fps;
            std::vector<std::string> labels;
            bool any_real = false;
            for (const auto& r : rows) {
                fps.push_back(extract_fingerprint(degrade(read_image(r.path), ev_blur)));
                labels.push_back(r.label);
                any_real = any_real || r.label == kRealLabel;
            }
            const auto feats = encode_all(ckpt.encoder, fps, threads);
            EvalOptions opts;
            opts.vote_k = ev_vote;
            opts.two_stage = ev_two_stage;
            opts.threshold = ev_threshold;
            if (ev_two_stage || any_real) {
                opts.prototype = registry.prototype() ? registry.prototype() : ckpt.prototype;
                if (ev_two_stage && !opts.prototype) throw NotPretrained("no real prototype for --two-stage");
            }
            const auto ev = evaluate(feats, labels, registry, opts);
            out << (ev_format == "tsv" ? ev.report.to_tsv() : ev.report.to_table());
        };
    });

    // degrade
    auto* dg_cmd = app.add_subcommand("degrade", "Gaussian-blur an image");
    std::string dg_in, dg_out;
    double dg_sigma = 0.0;
    dg_cmd->add_option("image", dg_in, "Input image")->required()->check(CLI::ExistingFile);
    dg_cmd->add_option("--sigma", dg_sigma, "Blur sigma (0 = copy)")->required()->check(CLI::NonNegativeNumber);
    dg_cmd->add_option("--out", dg_out, "Output image (.png or .ppm)")->required();
    dg_cmd->callback([&] {
        action = [&] {
            write_image(degrade(read_image(dg_in), dg_sigma), dg_out);
            out << dg_out << "\n";
        };
    });

    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    if (argv.empty()) argv.push_back("lida");
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kUsage;
    }

    try {
        if (action) action();
        return kOk;
    } catch (const CorruptFile& e) {
        err << "error: corrupt file: " << e.what() << "\n";
        return kCorrupt;
    } catch (const IoError& e) {
        err << "error: " << e.what() << "\n";
        return kIo;
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const NumericalFailure& e) {
        err << "error: numerical failure: " << e.what() << "\n";
        return kNumerical;
    } catch (const DegenerateFeature& e) {
        err << "error: degenerate feature: " << e.what() << "\n";
        return kNumerical;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return kFailure;
    } catch (const fs::filesystem_error& e) {
        err << "error: " << e.what() << "\n";
        return kIo;
    }
}

int run(int argc, char** argv) {
    std::vector<std::string> args(argv, argv + argc);
    return run(args, std::cout, std::cerr);
}

}  // namespace lida::cli
