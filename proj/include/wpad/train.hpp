#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

#include "wpad/data.hpp"
#include "wpad/errors.hpp"
#include "wpad/model.hpp"
#include "wpad/nn.hpp"
#include "wpad/random.hpp"
#include "wpad/wavelet.hpp"

namespace wpad {

struct TrainConfig {
    std::size_t epochs = 40;
    std::size_t batch_size = 8;
    double learning_rate = 0.002;
    double momentum = 0.9;
    double weight_decay = 1e-4;
    std::uint64_t seed = 1;
    FeatureMode feature_mode = FeatureMode::StackedSubbands;
    std::string wavelet_filter = "haar";
    std::size_t eval_every = 1;
    // Split fractions travel with the config so evaluation reproduces the
    // exact split used in training.
    double train_frac = 0.7;
    double val_frac = 0.15;
};

struct EpochRecord {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double train_accuracy = 0.0;
    double val_accuracy = 0.0;
    double wall_time_s = 0.0;
};

struct TrainLog {
    std::vector<EpochRecord> records;

    void write_csv(std::ostream& out) const {
        out << "epoch,train_loss,train_acc,val_acc,wall_time_s\n";
        char buf[160];
        for (const auto& r : records) {
            std::snprintf(buf, sizeof(buf), "%zu,%.10g,%.10g,%.10g,%.3f\n", r.epoch,
                          r.train_loss, r.train_accuracy, r.val_accuracy, r.wall_time_s);
            out << buf;
        }
    }
};

template <typename T>
struct TrainResult {
    Model<T> model;  // best-validation-accuracy snapshot
    TrainLog log;
    double best_val_accuracy = 0.0;
};

template <typename T>
struct Prediction {
    Tensor<T> probabilities;  // N x K, rows sum to 1
    std::vector<int> classes;  // argmax, ties to the lower index
};

namespace detail {

template <typename T>
Tensor<T> stack_features(const std::vector<Tensor<T>>& feats,
                         const std::vector<std::size_t>& indices) {
    const auto& fs = feats[indices[0]].shape();
    Tensor<T> batch({indices.size(), fs[0], fs[1], fs[2]});
    const std::size_t per = fs[0] * fs[1] * fs[2];
    for (std::size_t i = 0; i < indices.size(); ++i) {
        auto src = feats[indices[i]].data();
        for (std::size_t j = 0; j < per; ++j) batch.data()[i * per + j] = src[j];
    }
    return batch;
}

template <typename T>
std::vector<int> argmax_rows(const Tensor<T>& t) {
    std::vector<int> out(t.dim(0));
    for (std::size_t i = 0; i < t.dim(0); ++i) {
        std::size_t best = 0;
        for (std::size_t j = 1; j < t.dim(1); ++j) {
            if (t(i, j) > t(i, best)) best = j;  // strict: ties keep the lower index
        }
        out[i] = static_cast<int>(best);
    }
    return out;
}

}  // namespace detail

template <typename T>
Prediction<T> predict(Model<T>& m, const Tensor<T>& x) {
    ForwardTrace<T> trace;
    Tensor<T> logits = forward_trace(m, x, /*training=*/false, trace);
    Prediction<T> p;
    p.probabilities = softmax(logits);
    p.classes = detail::argmax_rows(p.probabilities);
    return p;
}

// Extracts feature tensors for every sample up front.
template <typename T>
std::vector<Tensor<T>> extract_all_features(const Dataset<T>& data, const TrainConfig& cfg) {
    const FilterPair& filt = FilterPair::by_name(cfg.wavelet_filter);
    std::vector<Tensor<T>> feats;
    feats.reserve(data.samples.size());
    for (const auto& s : data.samples) {
        feats.push_back(extract_features(s.image, filt, cfg.feature_mode));
    }
    return feats;
}

// Mini-batch SGD with momentum: v <- mu*v + (grad + wd*w); w <- w - lr*v.
// Deterministic for a given seed (fixed shuffle order, single-threaded
// reductions). Returns the snapshot with the best validation accuracy.
// Aborts with NumericError naming the batch if the loss turns NaN.
template <typename T>
TrainResult<T> train(Model<T> model, const Dataset<T>& data, const TrainConfig& cfg,
                     std::ostream* progress = nullptr) {
    if (cfg.batch_size < 2) throw ConfigError("train: batch_size must be >= 2 (batch norm)");
    if (cfg.learning_rate < 0 || cfg.momentum < 0 || cfg.weight_decay < 0) {
        throw ConfigError("train: learning_rate, momentum and weight_decay must be >= 0");
    }
    if (cfg.epochs < 1 || cfg.eval_every < 1) {
        throw ConfigError("train: epochs and eval_every must be >= 1");
    }
    if (data.splits.train.empty()) throw Error("train: empty train split");
    if (data.splits.val.empty()) throw Error("train: empty validation split");

    const std::vector<Tensor<T>> feats = extract_all_features(data, cfg);
    {
        const auto& fs = feats[0].shape();
        const auto& is = model.config.input_shape;
        if (fs[0] != is[0] || fs[1] != is[1] || fs[2] != is[2]) {
            throw ConfigError("train: feature shape " + shape_str(fs) +
                              " does not match model input (" + std::to_string(is[0]) + "," +
                              std::to_string(is[1]) + "," + std::to_string(is[2]) + ")");
        }
    }

    // One momentum buffer per trainable tensor, in for_each_trainable order.
    std::vector<Tensor<T>*> params;
    for_each_trainable(model, [&](std::size_t, const char*, Tensor<T>& t) {
        params.push_back(&t);
    });
    std::vector<Tensor<T>> velocity;
    velocity.reserve(params.size());
    for (auto* p : params) velocity.emplace_back(p->shape());

    const T lr = static_cast<T>(cfg.learning_rate);
    const T mu = static_cast<T>(cfg.momentum);
    const T wd = static_cast<T>(cfg.weight_decay);

    auto eval_accuracy = [&](const std::vector<std::size_t>& split) {
        std::size_t correct = 0;
        const std::size_t chunk = 32;
        for (std::size_t at = 0; at < split.size(); at += chunk) {
            std::vector<std::size_t> idx(split.begin() + at,
                                         split.begin() + std::min(at + chunk, split.size()));
            Tensor<T> batch = detail::stack_features(feats, idx);
            Prediction<T> pred = predict(model, batch);
            for (std::size_t i = 0; i < idx.size(); ++i) {
                if (pred.classes[i] == data.samples[idx[i]].label) ++correct;
            }
        }
        return static_cast<double>(correct) / static_cast<double>(split.size());
    };

    Rng rng(cfg.seed);
    TrainResult<T> result;
    result.best_val_accuracy = -1.0;
    const auto t0 = std::chrono::steady_clock::now();

    std::vector<std::size_t> order = data.splits.train;
    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        rng.shuffle(order);

        double loss_sum = 0.0;
        std::size_t seen = 0, correct = 0, batch_index = 0;
        std::size_t at = 0;
        while (at < order.size()) {
            std::size_t take = std::min(cfg.batch_size, order.size() - at);
            // A trailing singleton would break batch norm: fold it into the
            // previous batch instead.
            if (order.size() - at - take == 1) ++take;
            std::vector<std::size_t> idx(order.begin() + at, order.begin() + at + take);
            at += take;
            if (idx.size() < 2) {
                throw Error("train: train split too small for batch norm (need >= 2 samples)");
            }

            Tensor<T> batch = detail::stack_features(feats, idx);
            std::vector<int> labels(idx.size());
            for (std::size_t i = 0; i < idx.size(); ++i) labels[i] = data.samples[idx[i]].label;

            ForwardTrace<T> trace;
            Tensor<T> logits = forward_trace(model, batch, /*training=*/true, trace);
            auto [loss, grad_logits] = softmax_ce<T>(logits, labels);
            if (std::isnan(static_cast<double>(loss))) {
                throw NumericError("train: NaN loss at epoch " + std::to_string(epoch) +
                                   ", batch " + std::to_string(batch_index));
            }

            ModelGrads<T> grads;
            backward(model, trace, grad_logits, grads);

            std::size_t slot = 0;
            for_each_trainable(model, [&](std::size_t li, const char* name, Tensor<T>& w) {
                const Tensor<T>& g = std::string_view(name) == "weight" ||
                                             std::string_view(name) == "gamma"
                                         ? grads[li].weight
                                         : grads[li].bias;
                auto wd_ = w.data();
                auto gd = g.data();
                auto vd = velocity[slot].data();
                for (std::size_t i = 0; i < wd_.size(); ++i) {
                    vd[i] = mu * vd[i] + (gd[i] + wd * wd_[i]);
                    wd_[i] -= lr * vd[i];
                }
                ++slot;
            });

            const std::vector<int> pred = detail::argmax_rows(logits);
            for (std::size_t i = 0; i < labels.size(); ++i) {
                if (pred[i] == labels[i]) ++correct;
            }
            loss_sum += static_cast<double>(loss) * static_cast<double>(idx.size());
            seen += idx.size();
            ++batch_index;
        }

        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = loss_sum / static_cast<double>(seen);
        rec.train_accuracy = static_cast<double>(correct) / static_cast<double>(seen);
        if (epoch % cfg.eval_every == 0 || epoch == cfg.epochs) {
            rec.val_accuracy = eval_accuracy(data.splits.val);
            if (rec.val_accuracy > result.best_val_accuracy) {
                result.best_val_accuracy = rec.val_accuracy;
                result.model = model;
            }
        } else {
            rec.val_accuracy = result.log.records.empty()
                                   ? 0.0
                                   : result.log.records.back().val_accuracy;
        }
        rec.wall_time_s =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        result.log.records.push_back(rec);
        if (progress) {
            char buf[160];
            std::snprintf(buf, sizeof(buf),
                          "epoch %zu  loss %.4f  train_acc %.3f  val_acc %.3f\n", epoch,
                          rec.train_loss, rec.train_accuracy, rec.val_accuracy);
            (*progress) << buf << std::flush;
        }
    }
    return result;
}

}  // namespace wpad
