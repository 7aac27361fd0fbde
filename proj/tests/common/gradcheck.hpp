#pragma once

// Analytic-vs-central-difference checks. Each returns the max relative error
// of one random instance drawn from `seed`.

#include <string>
#include <vector>

#include "lida/encoder.hpp"
#include "lida/losses.hpp"
#include "lida/rng.hpp"
#include "oracles.hpp"

namespace gradcheck {

inline constexpr double kStep = 1e-5;

// Relative errors use max(|a|, |n|, 1e-6 * max(1, |g|_inf)) as denominator.
inline double compare(const std::vector<double>& analytic, const std::vector<double>& numeric) {
    double inf = 1.0;
    for (double v : analytic) inf = std::max(inf, std::abs(v));
    return oracle::max_rel_error(analytic, numeric, 1e-6 * inf);
}

inline std::vector<lida::FeatureVector> unflatten(const std::vector<double>& x, int dim) {
    std::vector<lida::FeatureVector> out(x.size() / dim);
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i].values.assign(x.begin() + static_cast<long>(i * dim), x.begin() + static_cast<long>((i + 1) * dim));
    }
    return out;
}

inline std::vector<double> flatten(const std::vector<std::vector<double>>& rows) {
    std::vector<double> out;
    for (const auto& r : rows) out.insert(out.end(), r.begin(), r.end());
    return out;
}

inline double pretext(std::uint64_t seed) {
    lida::Rng rng(seed);
    const int B = 4, C = 3;
    std::vector<double> x(B * C);
    for (double& v : x) v = rng.uniform(-3.0, 3.0);
    std::vector<int> labels(B);
    for (int& l : labels) l = static_cast<int>(rng.below(C));
    const auto eval = [&](const std::vector<double>& z) {
        std::vector<std::vector<double>> logits(B);
        for (int b = 0; b < B; ++b) logits[b].assign(z.begin() + b * C, z.begin() + (b + 1) * C);
        return lida::pretext_loss(logits, labels);
    };
    return compare(flatten(eval(x).grads), oracle::numeric_gradient([&](const auto& z) { return eval(z).value; }, x, kStep));
}

inline lida::ClassCenters random_centers(lida::Rng& rng, int dim) {
    lida::ClassCenters c;
    c.centers["a"] = oracle::random_feature(rng, dim);
    c.centers["b"] = oracle::random_feature(rng, dim);
    return c;
}

inline double center(std::uint64_t seed) {
    lida::Rng rng(seed);
    const int B = 5, D = 4;
    std::vector<double> x(B * D);
    for (double& v : x) v = rng.uniform(-1.0, 1.0);
    std::vector<std::string> labels(B);
    for (auto& l : labels) l = rng.bernoulli(0.5) ? "a" : "b";
    const auto centers = random_centers(rng, D);
    const auto eval = [&](const std::vector<double>& z) { return lida::center_loss(unflatten(z, D), labels, centers); };
    return compare(flatten(eval(x).grads), oracle::numeric_gradient([&](const auto& z) { return eval(z).value; }, x, kStep));
}

inline lida::RealPrototype random_prototype(lida::Rng& rng, int dim) {
    return lida::RealPrototype{lida::normalize(oracle::random_feature(rng, dim)), 1};
}

inline double detection(std::uint64_t seed) {
    lida::Rng rng(seed);
    const int R = 3, F = 3, D = 4;
    std::vector<double> x((R + F) * D);
    for (double& v : x) v = rng.uniform(-1.0, 1.0);
    const auto proto = random_prototype(rng, D);
    const double tau = 0.1;
    const auto eval = [&](const std::vector<double>& z) {
        const auto all = unflatten(z, D);
        std::vector<lida::FeatureVector> real(all.begin(), all.begin() + R), fake(all.begin() + R, all.end());
        return lida::detection_loss(real, fake, proto, tau);
    };
    const auto res = eval(x);
    auto analytic = flatten(res.real_grads);
    const auto fg = flatten(res.fake_grads);
    analytic.insert(analytic.end(), fg.begin(), fg.end());
    return compare(analytic, oracle::numeric_gradient([&](const auto& z) { return eval(z).value; }, x, kStep));
}

inline double adaptation(std::uint64_t seed) {
    lida::Rng rng(seed);
    const int B = 6, D = 4;
    std::vector<double> x(B * D);
    for (double& v : x) v = rng.uniform(-1.0, 1.0);
    const auto centers = random_centers(rng, D);
    const auto proto = random_prototype(rng, D);
    const lida::LossWeights weights{0.9, 0.1};
    // two reals, four labelled fakes
    const auto eval = [&](const std::vector<double>& z) {
        const auto f = unflatten(z, D);
        std::vector<lida::AdaptationSample> batch;
        for (int i = 0; i < B; ++i) {
            lida::AdaptationSample s;
            s.feature = f[i];
            s.is_real = i < 2;
            if (!s.is_real) s.label = (i % 2 == 0) ? "a" : "b";
            batch.push_back(std::move(s));
        }
        return lida::adaptation_loss(batch, centers, proto, weights);
    };
    return compare(flatten(eval(x).grads), oracle::numeric_gradient([&](const auto& z) { return eval(z).value; }, x, kStep));
}

inline lida::EncoderConfig small_config(std::uint64_t seed) {
    lida::EncoderConfig cfg;
    cfg.input_side = 6;
    cfg.layers = {{2, 3, 1}, {3, 3, 1}, {3, 3, 2}};
    cfg.feature_dim = 4;
    cfg.num_pretext_classes = 3;
    cfg.seed = seed;
    return cfg;
}

// Scalar probe L = <a, feature> + <b, logits> over every parameter. Biases
// are randomized so no ReLU sits exactly on its kink.
inline double encoder(std::uint64_t seed) {
    lida::Rng rng(seed);
    const auto cfg = small_config(seed);
    lida::Encoder enc(cfg);
    for (auto& t : enc.params().tensors)
        for (double& v : t) v += rng.uniform(-0.1, 0.1);
    const auto input = oracle::random_binary_input(rng, cfg.input_side);
    std::vector<double> a(cfg.feature_dim), b(cfg.num_pretext_classes);
    for (double& v : a) v = rng.uniform(-1.0, 1.0);
    for (double& v : b) v = rng.uniform(-1.0, 1.0);

    const auto probe = [&](const lida::Encoder& e) {
        const auto tr = e.forward(input);
        double s = 0.0;
        for (int i = 0; i < cfg.feature_dim; ++i) s += a[i] * tr.feature.values[i];
        for (int i = 0; i < cfg.num_pretext_classes; ++i) s += b[i] * tr.logits[i];
        return s;
    };
    const auto grads = enc.backward(enc.forward(input), a, b);
    std::vector<double> analytic, numeric;
    for (std::size_t t = 0; t < enc.params().tensors.size(); ++t) {
        for (std::size_t i = 0; i < enc.params().tensors[t].size(); ++i) {
            lida::Encoder e = enc;
            const double keep = e.params().tensors[t][i];
            e.params().tensors[t][i] = keep + kStep;
            const double fp = probe(e);
            e.params().tensors[t][i] = keep - kStep;
            const double fm = probe(e);
            numeric.push_back((fp - fm) / (2.0 * kStep));
            analytic.push_back(grads.tensors[t][i]);
        }
    }
    return compare(analytic, numeric);
}

}  // namespace gradcheck
