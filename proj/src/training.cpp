#include "lida/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>

#include "lida/error.hpp"
#include "lida/parallel.hpp"
#include "lida/rng.hpp"

namespace lida {

LossVariant parse_loss_variant(const std::string& name) {
    if (name == "standard") return LossVariant::Standard;
    if (name == "ce-attribution") return LossVariant::CeAttribution;
    if (name == "ce-detection") return LossVariant::CeDetection;
    if (name == "ce-both") return LossVariant::CeBoth;
    throw InvalidArgument("unknown loss variant '" + name +
                          "' (expected standard, ce-attribution, ce-detection or ce-both)");
}

std::string to_string(LossVariant v) {
    switch (v) {
        case LossVariant::Standard: return "standard";
        case LossVariant::CeAttribution: return "ce-attribution";
        case LossVariant::CeDetection: return "ce-detection";
        case LossVariant::CeBoth: return "ce-both";
    }
    return "unknown";
}

void TrainConfig::validate() const {
    if (batch_size < 1) throw InvalidArgument("batch_size must be >= 1");
    if (!(learning_rate > 0.0)) throw InvalidArgument("learning_rate must be positive");
    if (epochs < 0) throw InvalidArgument("epochs must be >= 0");
    if (!(alpha > 0.0 && alpha <= 1.0)) throw InvalidArgument("alpha must be in (0,1]");
    weights.validate();
}

bool TrainLog::same_values(const TrainLog& o) const {
    if (epochs.size() != o.epochs.size()) return false;
    for (std::size_t i = 0; i < epochs.size(); ++i) {
        if (!epochs[i].same_values(o.epochs[i])) return false;
    }
    return true;
}

std::string TrainLog::to_tsv() const {
    std::ostringstream os;
    os.precision(17);
    os << "epoch\tmain_loss\tdetection_loss\ttotal_loss\tcenter_drift\taccuracy\tseconds\n";
    for (const auto& e : epochs) {
        os << e.epoch << '\t' << e.main_loss << '\t' << e.detection_loss << '\t' << e.total_loss << '\t'
           << e.center_drift << '\t' << e.accuracy << '\t' << e.seconds << '\n';
    }
    return os.str();
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::vector<std::size_t> shuffled(std::size_t n, Rng& rng) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    for (std::size_t i = n; i > 1; --i) std::swap(idx[i - 1], idx[rng.below(i)]);
    return idx;
}

void check_finite(double v, const std::string& what) {
    if (!std::isfinite(v)) throw NumericalFailure(what + " became non-finite");
}

int argmax(const std::vector<double>& v) {
    return static_cast<int>(std::max_element(v.begin(), v.end()) - v.begin());
}

// Dense layer used only by the cross-entropy ablation heads.
struct LinearHead {
    int in = 0;
    int out = 0;
    std::vector<double> w;  // [out][in]
    std::vector<double> b;

    LinearHead(int in_dim, int out_dim, Rng& rng) : in(in_dim), out(out_dim), w(in_dim * out_dim), b(out_dim, 0.0) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(in_dim));
        for (double& v : w) v = rng.uniform(-bound, bound);
    }

    std::vector<double> forward(const std::vector<double>& x) const {
        std::vector<double> y(b);
        for (int o = 0; o < out; ++o) {
            for (int i = 0; i < in; ++i) y[o] += w[static_cast<std::size_t>(o) * in + i] * x[i];
        }
        return y;
    }

    // Accumulates into dw/db, adds dL/dx into dx.
    void backward(const std::vector<double>& x, const std::vector<double>& dy, std::vector<double>& dw,
                  std::vector<double>& db, std::vector<double>& dx) const {
        for (int o = 0; o < out; ++o) {
            db[o] += dy[o];
            for (int i = 0; i < in; ++i) {
                dw[static_cast<std::size_t>(o) * in + i] += dy[o] * x[i];
                dx[i] += dy[o] * w[static_cast<std::size_t>(o) * in + i];
            }
        }
    }
};

// Per-sample encoder gradients summed in index order.
EncoderGradients sum_gradients(std::vector<EncoderGradients>& per_sample, const EncoderConfig& cfg) {
    EncoderGradients total = EncoderParams::zeros(cfg);
    for (const auto& g : per_sample) total.add_scaled(g, 1.0);
    return total;
}

}  // namespace

PretrainResult pretrain(const Encoder& initial, std::span<const FingerprintImage> corpus,
                        std::span<const int> classes, const TrainConfig& config) {
    config.validate();
    if (corpus.size() != classes.size()) throw InvalidArgument("pretrain: corpus/classes length mismatch");
    const int n_classes = initial.config().num_pretext_classes;
    std::set<int> distinct;
    for (int c : classes) {
        if (c < 0 || c >= n_classes) {
            throw InvalidArgument("pretrain: class " + std::to_string(c) + " outside encoder's " +
                                  std::to_string(n_classes) + " pretext classes");
        }
        distinct.insert(c);
    }
    if (distinct.size() < 2) throw InvalidArgument("pretrain: corpus needs at least 2 classes");

    Encoder enc = initial;
    TrainLog log;
    const std::size_t n = corpus.size();
    const auto bs = static_cast<std::size_t>(config.batch_size);

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        const auto t0 = Clock::now();
        Rng rng(mix_seed(config.seed, static_cast<std::uint64_t>(epoch)));
        const auto order = shuffled(n, rng);
        EpochLog el;
        el.epoch = epoch + 1;
        std::size_t correct = 0;
        for (std::size_t start = 0; start < n; start += bs) {
            const std::size_t m = std::min(bs, n - start);
            std::vector<ForwardTrace> traces(m);
            parallel_for(m, config.threads, [&](std::size_t i) { traces[i] = enc.forward(corpus[order[start + i]]); });
            std::vector<std::vector<double>> logits(m);
            std::vector<int> labels(m);
            for (std::size_t i = 0; i < m; ++i) {
                logits[i] = traces[i].logits;
                labels[i] = classes[order[start + i]];
                correct += argmax(logits[i]) == labels[i] ? 1 : 0;
            }
            const LossResult loss = pretext_loss(logits, labels);
            check_finite(loss.value, "pretext loss");
            el.main_loss += loss.value;
            std::vector<EncoderGradients> grads(m);
            parallel_for(m, config.threads, [&](std::size_t i) { grads[i] = enc.backward(traces[i], {}, loss.grads[i]); });
            enc.params().add_scaled(sum_gradients(grads, enc.config()), -config.learning_rate);
            if (!enc.params().all_finite()) throw NumericalFailure("encoder parameters became non-finite");
        }
        el.total_loss = el.main_loss;
        el.accuracy = 100.0 * static_cast<double>(correct) / static_cast<double>(n);
        el.seconds = seconds_since(t0);
        log.epochs.push_back(el);
    }

    std::vector<ForwardTrace> final(n);
    parallel_for(n, config.threads, [&](std::size_t i) { final[i] = enc.forward(corpus[i]); });
    std::vector<FeatureVector> feats;
    feats.reserve(n);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < n; ++i) {
        correct += argmax(final[i].logits) == classes[i] ? 1 : 0;
        feats.push_back(std::move(final[i].feature));
    }
    RealPrototype proto = RealPrototype::from_features(feats);
    const double acc = 100.0 * static_cast<double>(correct) / static_cast<double>(n);
    return {std::move(enc), std::move(proto), std::move(log), acc};
}

AdaptResult adapt(const Encoder& pretrained, const Registry& registry,
                  std::span<const FingerprintImage> exemplars, std::span<const FingerprintImage> reals,
                  const RealPrototype& prototype, const TrainConfig& config) {
    config.validate();
    if (registry.empty()) throw PreconditionViolation("adapt: registry is empty");
    if (exemplars.size() != registry.size()) {
        throw InvalidArgument("adapt: need one exemplar fingerprint per registry record");
    }
    if (registry.feature_dim() != pretrained.config().feature_dim) {
        throw IncompatibleEncoder("adapt: encoder feature_dim does not match registry");
    }
    const bool ce_attr = config.variant == LossVariant::CeAttribution || config.variant == LossVariant::CeBoth;
    const bool ce_det = config.variant == LossVariant::CeDetection || config.variant == LossVariant::CeBoth;
    const double lambda = config.weights.lambda;

    // Samples: registry exemplars first (record order), then the extra reals.
    struct Sample {
        const FingerprintImage* fp;
        std::optional<std::string> label;
        bool is_real;
    };
    std::vector<Sample> samples;
    std::size_t n_fake = 0;
    for (std::size_t i = 0; i < registry.size(); ++i) {
        const auto& label = registry.records()[i].label;
        const bool real = label == kRealLabel;
        n_fake += real ? 0 : 1;
        samples.push_back({&exemplars[i], label, real});
    }
    if (reals.size() != n_fake) {
        throw InvalidArgument("adapt: expected " + std::to_string(n_fake) +
                              " real fingerprints to balance the fake exemplars, got " +
                              std::to_string(reals.size()));
    }
    for (const auto& r : reals) samples.push_back({&r, std::nullopt, true});

    const std::vector<std::string> labels = registry.labels();
    std::map<std::string, int> label_index;
    for (std::size_t i = 0; i < labels.size(); ++i) label_index[labels[i]] = static_cast<int>(i);

    Encoder enc = pretrained;
    const int fd = enc.config().feature_dim;

    // Centers start at the mean pretrained feature of each label.
    ClassCenters centers;
    centers.alpha = config.alpha;
    {
        std::vector<FeatureVector> feats(registry.size());
        parallel_for(registry.size(), config.threads, [&](std::size_t i) { feats[i] = enc.encode(exemplars[i]); });
        std::map<std::string, std::pair<std::vector<double>, int>> sums;
        for (std::size_t i = 0; i < registry.size(); ++i) {
            auto& [sum, count] = sums[registry.records()[i].label];
            sum.resize(static_cast<std::size_t>(fd), 0.0);
            for (int d = 0; d < fd; ++d) sum[d] += feats[i].values[d];
            ++count;
        }
        for (auto& [label, sc] : sums) {
            for (double& v : sc.first) v /= sc.second;
            centers.centers[label] = FeatureVector{sc.first};
        }
    }

    Rng head_rng(mix_seed(config.seed, 0xCEAD));
    std::optional<LinearHead> attr_head, det_head;
    if (ce_attr) attr_head.emplace(fd, static_cast<int>(labels.size()), head_rng);
    if (ce_det) det_head.emplace(fd, 1, head_rng);

    std::vector<std::size_t> fake_idx, real_idx;
    for (std::size_t i = 0; i < samples.size(); ++i) (samples[i].is_real ? real_idx : fake_idx).push_back(i);
    const std::size_t total = samples.size();
    std::size_t n_batches = (total + config.batch_size - 1) / config.batch_size;
    if (lambda != 0.0) n_batches = std::min({n_batches, fake_idx.size(), real_idx.size()});
    n_batches = std::max<std::size_t>(n_batches, 1);

    TrainLog log;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        const auto t0 = Clock::now();
        Rng rng(mix_seed(config.seed, static_cast<std::uint64_t>(epoch)));
        const auto fake_order = shuffled(fake_idx.size(), rng);
        const auto real_order = shuffled(real_idx.size(), rng);
        EpochLog el;
        el.epoch = epoch + 1;

        for (std::size_t b = 0; b < n_batches; ++b) {
            // Stratified batch: the b-th slice of shuffled fakes and of shuffled reals.
            std::vector<std::size_t> batch;
            for (std::size_t k = fake_idx.size() * b / n_batches; k < fake_idx.size() * (b + 1) / n_batches; ++k) {
                batch.push_back(fake_idx[fake_order[k]]);
            }
            for (std::size_t k = real_idx.size() * b / n_batches; k < real_idx.size() * (b + 1) / n_batches; ++k) {
                batch.push_back(real_idx[real_order[k]]);
            }
            const std::size_t m = batch.size();
            if (m == 0) continue;

            std::vector<ForwardTrace> traces(m);
            parallel_for(m, config.threads, [&](std::size_t i) { traces[i] = enc.forward(*samples[batch[i]].fp); });

            std::vector<std::vector<double>> dfeat(m, std::vector<double>(static_cast<std::size_t>(fd), 0.0));
            double main_loss = 0.0, det_loss = 0.0;

            std::vector<AdaptationSample> batch_samples;
            for (std::size_t i = 0; i < m; ++i) {
                const auto& s = samples[batch[i]];
                batch_samples.push_back({traces[i].feature, s.label, s.is_real});
            }

            if (!ce_attr && !ce_det) {
                const auto loss = adaptation_loss(batch_samples, centers, prototype, config.weights);
                main_loss = loss.attribution;
                det_loss = loss.detection;
                dfeat = loss.grads;
            } else {
                // Attribution term.
                std::vector<double> attr_dw, attr_db;
                if (ce_attr) {
                    attr_dw.assign(attr_head->w.size(), 0.0);
                    attr_db.assign(attr_head->b.size(), 0.0);
                    std::vector<std::vector<double>> logits;
                    std::vector<int> ys;
                    std::vector<std::size_t> who;
                    for (std::size_t i = 0; i < m; ++i) {
                        if (!batch_samples[i].label) continue;
                        logits.push_back(attr_head->forward(batch_samples[i].feature.values));
                        ys.push_back(label_index.at(*batch_samples[i].label));
                        who.push_back(i);
                    }
                    const auto ce = pretext_loss(logits, ys);
                    main_loss = ce.value;
                    for (std::size_t k = 0; k < who.size(); ++k) {
                        attr_head->backward(batch_samples[who[k]].feature.values, ce.grads[k], attr_dw, attr_db,
                                            dfeat[who[k]]);
                    }
                } else {
                    std::vector<FeatureVector> f;
                    std::vector<std::string> y;
                    std::vector<std::size_t> who;
                    for (std::size_t i = 0; i < m; ++i) {
                        if (!batch_samples[i].label) continue;
                        f.push_back(batch_samples[i].feature);
                        y.push_back(*batch_samples[i].label);
                        who.push_back(i);
                    }
                    const auto la = center_loss(f, y, centers);
                    main_loss = la.value;
                    for (std::size_t k = 0; k < who.size(); ++k) {
                        for (int d = 0; d < fd; ++d) dfeat[who[k]][d] += la.grads[k][d];
                    }
                }

                // Detection term, weighted by lambda.
                std::vector<double> det_dw, det_db;
                if (lambda != 0.0) {
                    if (ce_det) {
                        det_dw.assign(det_head->w.size(), 0.0);
                        det_db.assign(det_head->b.size(), 0.0);
                        std::vector<double> z(m);
                        std::vector<int> t(m);
                        for (std::size_t i = 0; i < m; ++i) {
                            z[i] = det_head->forward(batch_samples[i].feature.values)[0];
                            t[i] = batch_samples[i].is_real ? 1 : 0;
                        }
                        const auto bce = binary_cross_entropy(z, t);
                        det_loss = bce.value;
                        for (std::size_t i = 0; i < m; ++i) {
                            std::vector<double> dy{lambda * bce.grads[i][0]};
                            det_head->backward(batch_samples[i].feature.values, dy, det_dw, det_db, dfeat[i]);
                        }
                    } else {
                        std::vector<FeatureVector> rf, ff;
                        std::vector<std::size_t> ri, fi;
                        for (std::size_t i = 0; i < m; ++i) {
                            (batch_samples[i].is_real ? rf : ff).push_back(batch_samples[i].feature);
                            (batch_samples[i].is_real ? ri : fi).push_back(i);
                        }
                        const auto ld = detection_loss(rf, ff, prototype, config.weights.tau);
                        det_loss = ld.value;
                        for (std::size_t k = 0; k < ri.size(); ++k) {
                            for (int d = 0; d < fd; ++d) dfeat[ri[k]][d] += lambda * ld.real_grads[k][d];
                        }
                        for (std::size_t k = 0; k < fi.size(); ++k) {
                            for (int d = 0; d < fd; ++d) dfeat[fi[k]][d] += lambda * ld.fake_grads[k][d];
                        }
                    }
                }

                if (ce_attr) {
                    for (std::size_t i = 0; i < attr_dw.size(); ++i) attr_head->w[i] -= config.learning_rate * attr_dw[i];
                    for (std::size_t i = 0; i < attr_db.size(); ++i) attr_head->b[i] -= config.learning_rate * attr_db[i];
                }
                if (ce_det && lambda != 0.0) {
                    for (std::size_t i = 0; i < det_dw.size(); ++i) det_head->w[i] -= config.learning_rate * det_dw[i];
                    for (std::size_t i = 0; i < det_db.size(); ++i) det_head->b[i] -= config.learning_rate * det_db[i];
                }
            }

            const double batch_loss = main_loss + lambda * det_loss;
            check_finite(batch_loss, "adaptation loss");
            el.main_loss += main_loss;
            el.detection_loss += det_loss;
            el.total_loss += batch_loss;

            std::vector<EncoderGradients> grads(m);
            parallel_for(m, config.threads, [&](std::size_t i) { grads[i] = enc.backward(traces[i], dfeat[i], {}); });
            enc.params().add_scaled(sum_gradients(grads, enc.config()), -config.learning_rate);
            if (!enc.params().all_finite()) throw NumericalFailure("encoder parameters became non-finite");

            // Centers follow the batch features (computed before this step's update).
            std::vector<FeatureVector> cf;
            std::vector<std::string> cl;
            for (const auto& s : batch_samples) {
                if (!s.label) continue;
                cf.push_back(s.feature);
                cl.push_back(*s.label);
            }
            ClassCenters next = update_centers(centers, cf, cl);
            for (const auto& [label, c] : next.centers) {
                const auto& old = centers.centers.at(label);
                double d2 = 0.0;
                for (int d = 0; d < fd; ++d) d2 += (c.values[d] - old.values[d]) * (c.values[d] - old.values[d]);
                el.center_drift += std::sqrt(d2);
            }
            centers = std::move(next);
        }
        el.seconds = seconds_since(t0);
        log.epochs.push_back(el);
    }

    Registry out = registry;
    std::vector<FeatureVector> feats(registry.size());
    parallel_for(registry.size(), config.threads, [&](std::size_t i) { feats[i] = enc.encode(exemplars[i]); });
    out.replace_features(feats);
    return {std::move(enc), std::move(centers), std::move(out), std::move(log)};
}

std::vector<double> gaussian_kernel(double sigma) {
    if (!(sigma > 0.0) || !std::isfinite(sigma)) throw InvalidArgument("gaussian_kernel: sigma must be positive");
    const int radius = static_cast<int>(std::ceil(3.0 * sigma));
    std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
    double sum = 0.0;
    for (int d = -radius; d <= radius; ++d) {
        const double w = std::exp(-static_cast<double>(d) * d / (2.0 * sigma * sigma));
        k[static_cast<std::size_t>(d + radius)] = w;
        sum += w;
    }
    for (double& w : k) w /= sum;
    return k;
}

namespace {

// Reflect about the edge samples without repeating them (d c b | a b c d | c b a).
int reflect(int i, int n) {
    if (n == 1) return 0;
    const int period = 2 * (n - 1);
    i %= period;
    if (i < 0) i += period;
    return i < n ? i : period - i;
}

}  // namespace

RgbImage degrade(const RgbImage& img, double sigma) {
    if (sigma < 0.0 || !std::isfinite(sigma)) throw InvalidArgument("blur sigma must be >= 0");
    if (sigma == 0.0) return img;
    const auto k = gaussian_kernel(sigma);
    const int radius = static_cast<int>(k.size() / 2);
    const int w = img.width(), h = img.height();

    std::vector<double> horiz(static_cast<std::size_t>(w) * h * 3);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            for (int c = 0; c < 3; ++c) {
                double s = 0.0;
                for (int d = -radius; d <= radius; ++d) {
                    s += k[static_cast<std::size_t>(d + radius)] * img.at(y, reflect(x + d, w), static_cast<Channel>(c));
                }
                horiz[(static_cast<std::size_t>(y) * w + x) * 3 + c] = s;
            }
        }
    }
    RgbImage out(w, h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            for (int c = 0; c < 3; ++c) {
                double s = 0.0;
                for (int d = -radius; d <= radius; ++d) {
                    s += k[static_cast<std::size_t>(d + radius)] *
                         horiz[(static_cast<std::size_t>(reflect(y + d, h)) * w + x) * 3 + c];
                }
                out.at(y, x, static_cast<Channel>(c)) = static_cast<std::uint8_t>(std::clamp(std::lround(s), 0L, 255L));
            }
        }
    }
    return out;
}

}  // namespace lida
