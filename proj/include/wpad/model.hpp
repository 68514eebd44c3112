#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "wpad/errors.hpp"
#include "wpad/nn.hpp"
#include "wpad/random.hpp"
#include "wpad/tensor.hpp"

namespace wpad {

enum class SkipMode { SingleLayer, DoubleLayer };

// Declarative architecture description. The defaults build the 32-conv /
// 2-maxpool / 1-FC network: one stem conv, five residual blocks of six conv
// layers each, and one 1x1 projection conv at the single channel-doubling
// stage, which sits right after the first maxpool.
struct ModelConfig {
    std::array<std::size_t, 3> input_shape{4, 32, 32};  // C,H,W
    std::size_t num_classes = 2;
    std::vector<std::size_t> block_convs{6, 6, 6, 6, 6};
    std::vector<std::size_t> channels{16, 16, 32, 32, 32};
    SkipMode skip_mode = SkipMode::SingleLayer;
    bool stem = true;
    std::vector<std::size_t> maxpool_after{2, 4};  // 1-based block indices
    bool paper_default = true;  // enforce the 32/2/1 layer arithmetic at build
};

// Residual connection: the input of layers[from] is added to the output of
// layers[to] (before the unit's final ReLU). When the source and destination
// shapes differ, `projection` points at a 1x1 conv in the layer list that is
// applied on the skip path only.
struct SkipEdge {
    std::size_t from = 0;
    std::size_t to = 0;
    std::optional<std::size_t> projection;
};

template <typename T>
struct Model {
    ModelConfig config;
    std::vector<LayerParams<T>> layers;  // execution order; projection convs are
                                         // stored inline but run on skip paths
    std::vector<SkipEdge> skip_edges;

    bool is_projection(std::size_t idx) const {
        for (const auto& e : skip_edges) {
            if (e.projection && *e.projection == idx) return true;
        }
        return false;
    }
};

struct LayerCounts {
    std::size_t convs = 0, pools = 0, fcs = 0;
};

template <typename T>
LayerCounts count_layers(const Model<T>& m) {
    LayerCounts c;
    for (const auto& l : m.layers) {
        if (l.kind == LayerKind::Conv2d) ++c.convs;
        if (l.kind == LayerKind::MaxPool2d) ++c.pools;
        if (l.kind == LayerKind::FullyConnected) ++c.fcs;
    }
    return c;
}

namespace detail {

inline void validate_config(const ModelConfig& cfg) {
    if (cfg.block_convs.empty() || cfg.block_convs.size() != cfg.channels.size()) {
        throw ConfigError("model config: block_convs and channels must be non-empty lists of "
                          "equal length");
    }
    if (cfg.paper_default && cfg.block_convs.size() != 5) {
        throw ConfigError("model config: the paper-default architecture has 5 building blocks");
    }
    for (std::size_t b : cfg.block_convs) {
        if (b == 0) throw ConfigError("model config: block_convs entries must be positive");
    }
    for (std::size_t c : cfg.channels) {
        if (c == 0) throw ConfigError("model config: channels entries must be positive");
    }
    if (cfg.num_classes < 2) throw ConfigError("model config: num_classes must be >= 2");
    if (cfg.maxpool_after.size() != 2 || cfg.maxpool_after[0] == cfg.maxpool_after[1]) {
        throw ConfigError("model config: maxpool_after must name exactly 2 distinct blocks");
    }
    for (std::size_t b : cfg.maxpool_after) {
        if (b < 1 || b > cfg.block_convs.size()) {
            throw ConfigError("model config: maxpool_after index " + std::to_string(b) +
                              " outside 1.." + std::to_string(cfg.block_convs.size()));
        }
    }
}

template <typename T>
void he_init(Tensor<T>& w, std::size_t fan_in, Rng& rng) {
    const double std = std::sqrt(2.0 / static_cast<double>(fan_in));
    for (auto& v : w.data()) v = static_cast<T>(rng.normal() * std);
}

// Channel-duplicating 1x1 projection: output channel o copies input channel
// o mod Cin. Non-negativity-preserving, so projected skips are exactly
// reproducible at initialization just like identity skips.
template <typename T>
void duplication_init(Tensor<T>& w) {
    const std::size_t cout = w.dim(0), cin = w.dim(1);
    for (std::size_t o = 0; o < cout; ++o) {
        for (std::size_t i = 0; i < cin; ++i) {
            w(o, i, 0, 0) = (i == o % cin) ? T(1) : T(0);
        }
    }
}

}  // namespace detail

// Builds and initializes the network. Deterministic for a given seed: conv
// and FC weights are He-normal, batch-norm gammas are 1 except the last BN
// of every residual branch, which starts at 0 so each unit is the identity
// (or its projection) at initialization.
template <typename T>
Model<T> build(const ModelConfig& cfg, std::uint64_t seed) {
    detail::validate_config(cfg);
    Rng rng(seed);

    Model<T> m;
    m.config = cfg;

    std::size_t cur_c = cfg.input_shape[0];
    std::size_t cur_h = cfg.input_shape[1];
    std::size_t cur_w = cfg.input_shape[2];

    auto add_conv = [&](std::size_t cin, std::size_t cout, int k, int pad) {
        auto p = LayerParams<T>::conv2d(cin, cout, k, 1, pad);
        detail::he_init(p.weight, cin * k * k, rng);
        m.layers.push_back(std::move(p));
        return m.layers.size() - 1;
    };
    auto add_bn = [&](std::size_t c, bool zero_gamma) {
        auto p = LayerParams<T>::batchnorm(c);
        if (zero_gamma) {
            for (auto& g : p.weight.data()) g = T(0);
        }
        m.layers.push_back(std::move(p));
        return m.layers.size() - 1;
    };

    if (cfg.stem) {
        add_conv(cur_c, cfg.channels[0], 3, 1);
        add_bn(cfg.channels[0], false);
        m.layers.push_back(LayerParams<T>::relu());
        cur_c = cfg.channels[0];
    }

    for (std::size_t b = 0; b < cfg.block_convs.size(); ++b) {
        const std::size_t out_c = cfg.channels[b];
        std::size_t remaining = cfg.block_convs[b];
        while (remaining > 0) {
            const std::size_t unit_convs =
                (cfg.skip_mode == SkipMode::DoubleLayer && remaining >= 2) ? 2 : 1;
            remaining -= unit_convs;

            SkipEdge edge;
            if (cur_c != out_c) {
                auto proj = LayerParams<T>::conv2d(cur_c, out_c, 1, 1, 0);
                detail::duplication_init(proj.weight);
                m.layers.push_back(std::move(proj));
                edge.projection = m.layers.size() - 1;
            }

            if (unit_convs == 1) {
                edge.from = add_conv(cur_c, out_c, 3, 1);
                edge.to = add_bn(out_c, true);
            } else {
                edge.from = add_conv(cur_c, out_c, 3, 1);
                add_bn(out_c, false);
                m.layers.push_back(LayerParams<T>::relu());
                add_conv(out_c, out_c, 3, 1);
                edge.to = add_bn(out_c, true);
            }
            m.skip_edges.push_back(edge);
            m.layers.push_back(LayerParams<T>::relu());
            cur_c = out_c;
        }

        for (std::size_t pool_block : cfg.maxpool_after) {
            if (pool_block == b + 1) {
                if (cur_h < 2 || cur_w < 2 || cur_h % 2 != 0 || cur_w % 2 != 0) {
                    throw ConfigError("model config: spatial dims " + std::to_string(cur_h) +
                                      "x" + std::to_string(cur_w) +
                                      " not divisible by the maxpool after block " +
                                      std::to_string(b + 1));
                }
                m.layers.push_back(LayerParams<T>::maxpool(2, 2));
                cur_h /= 2;
                cur_w /= 2;
            }
        }
    }

    auto fc = LayerParams<T>::fully_connected(cur_c * cur_h * cur_w, cfg.num_classes);
    detail::he_init(fc.weight, cur_c * cur_h * cur_w, rng);
    m.layers.push_back(std::move(fc));

    if (cfg.paper_default) {
        const LayerCounts counts = count_layers(m);
        if (counts.convs != 32 || counts.pools != 2 || counts.fcs != 1) {
            throw ConfigError("model config claims paper-default but builds " +
                              std::to_string(counts.convs) + " convs, " +
                              std::to_string(counts.pools) + " pools, " +
                              std::to_string(counts.fcs) + " FC layers (expected 32/2/1)");
        }
    }
    return m;
}

// Activations recorded during a forward pass, enough to run backward.
// inputs[i] is the tensor fed to layers[i]; projection layers are not on the
// main path, their input is inputs[edge.from] of their edge.
template <typename T>
struct ForwardTrace {
    std::vector<Tensor<T>> inputs;
    Shape pre_fc_shape;  // rank-4 shape flattened away before the FC layer
    Tensor<T> logits;
};

template <typename T>
using ModelGrads = std::vector<LayerGrads<T>>;

template <typename T>
Tensor<T> forward_trace(Model<T>& m, const Tensor<T>& x, bool training, ForwardTrace<T>& trace,
                        bool update_running = true) {
    if (x.rank() != 4 || x.dim(1) != m.config.input_shape[0] ||
        x.dim(2) != m.config.input_shape[1] || x.dim(3) != m.config.input_shape[2]) {
        throw ShapeError("model forward: input " + shape_str(x.shape()) +
                         " does not match configured input shape");
    }
    trace.inputs.assign(m.layers.size(), Tensor<T>());
    trace.pre_fc_shape.clear();

    Tensor<T> cur = x;
    for (std::size_t i = 0; i < m.layers.size(); ++i) {
        if (m.is_projection(i)) continue;
        auto& layer = m.layers[i];
        if (layer.kind == LayerKind::FullyConnected && cur.rank() == 4) {
            trace.pre_fc_shape = cur.shape();
            cur = cur.reshaped({cur.dim(0), cur.dim(1) * cur.dim(2) * cur.dim(3)});
        }
        trace.inputs[i] = cur;

        Tensor<T> out;
        switch (layer.kind) {
            case LayerKind::Conv2d: out = conv2d_forward(cur, layer); break;
            case LayerKind::BatchNorm:
                out = batchnorm_forward(cur, layer, training, update_running);
                break;
            case LayerKind::ReLU: out = relu_forward(cur); break;
            case LayerKind::MaxPool2d: out = maxpool2d_forward(cur, layer); break;
            case LayerKind::FullyConnected: out = fc_forward(cur, layer); break;
            case LayerKind::SoftmaxCE:
                throw Error("model forward: SoftmaxCE is a loss, not a sequence layer");
        }

        // Residual additions land on the output of edge.to.
        for (const auto& e : m.skip_edges) {
            if (e.to != i) continue;
            const Tensor<T>& src = trace.inputs[e.from];
            if (e.projection) {
                Tensor<T> proj = conv2d_forward(src, m.layers[*e.projection]);
                if (proj.shape() != out.shape()) {
                    throw Error("model forward: projected skip shape " + shape_str(proj.shape()) +
                                " does not match branch output " + shape_str(out.shape()));
                }
                add_inplace(out, proj);
            } else {
                if (src.shape() != out.shape()) {
                    throw Error("model forward: skip shape " + shape_str(src.shape()) +
                                " does not match branch output " + shape_str(out.shape()) +
                                " (builder invariant violated)");
                }
                add_inplace(out, src);
            }
        }
        cur = std::move(out);
    }
    trace.logits = cur;
    return cur;
}

// Plain forward; keeps an internal trace because skip sources must outlive
// the layers they bypass.
template <typename T>
Tensor<T> forward(Model<T>& m, const Tensor<T>& x, bool training) {
    ForwardTrace<T> trace;
    return forward_trace(m, x, training, trace);
}

// Backpropagates grad_logits through the trace; returns the gradient with
// respect to the model input. grads is indexed like m.layers (projection
// layers receive their gradients through their skip edge).
template <typename T>
Tensor<T> backward(const Model<T>& m, const ForwardTrace<T>& trace, const Tensor<T>& grad_logits,
                   ModelGrads<T>& grads) {
    grads.assign(m.layers.size(), LayerGrads<T>{});
    std::vector<Tensor<T>> pending(m.layers.size());

    Tensor<T> g = grad_logits;
    for (std::size_t ii = m.layers.size(); ii-- > 0;) {
        if (m.is_projection(ii)) continue;
        const auto& layer = m.layers[ii];
        const Tensor<T>& x = trace.inputs[ii];

        // g currently holds the gradient of the (post-addition) output of
        // layer ii; route the skip contributions before entering the layer.
        for (const auto& e : m.skip_edges) {
            if (e.to != ii) continue;
            if (e.projection) {
                auto [gx, pgrads] =
                    conv2d_backward(trace.inputs[e.from], m.layers[*e.projection], g);
                grads[*e.projection] = std::move(pgrads);
                if (pending[e.from].empty()) {
                    pending[e.from] = std::move(gx);
                } else {
                    add_inplace(pending[e.from], gx);
                }
            } else {
                if (pending[e.from].empty()) {
                    pending[e.from] = g;
                } else {
                    add_inplace(pending[e.from], g);
                }
            }
        }

        switch (layer.kind) {
            case LayerKind::Conv2d: {
                auto [gx, lg] = conv2d_backward(x, layer, g);
                grads[ii] = std::move(lg);
                g = std::move(gx);
                break;
            }
            case LayerKind::BatchNorm: {
                auto [gx, lg] = batchnorm_backward(x, layer, g);
                grads[ii] = std::move(lg);
                g = std::move(gx);
                break;
            }
            case LayerKind::ReLU: g = relu_backward(x, g); break;
            case LayerKind::MaxPool2d: g = maxpool2d_backward(x, layer, g); break;
            case LayerKind::FullyConnected: {
                auto [gx, lg] = fc_backward(x, layer, g);
                grads[ii] = std::move(lg);
                g = std::move(gx);
                if (!trace.pre_fc_shape.empty()) g = g.reshaped(trace.pre_fc_shape);
                break;
            }
            case LayerKind::SoftmaxCE: throw Error("model backward: unexpected SoftmaxCE layer");
        }

        if (!pending[ii].empty()) add_inplace(g, pending[ii]);
    }
    return g;
}

// Applies fn(layer_index, tensor_name, tensor) to every trainable tensor.
template <typename T, typename Fn>
void for_each_trainable(Model<T>& m, Fn&& fn) {
    for (std::size_t i = 0; i < m.layers.size(); ++i) {
        auto& l = m.layers[i];
        switch (l.kind) {
            case LayerKind::Conv2d:
            case LayerKind::FullyConnected:
                fn(i, "weight", l.weight);
                fn(i, "bias", l.bias);
                break;
            case LayerKind::BatchNorm:
                fn(i, "gamma", l.weight);
                fn(i, "beta", l.bias);
                break;
            default: break;
        }
    }
}

// Applies fn to every state tensor, including batch-norm running statistics.
// The visit order defines the canonical checkpoint tensor order.
template <typename T, typename Fn>
void for_each_state(Model<T>& m, Fn&& fn) {
    for (std::size_t i = 0; i < m.layers.size(); ++i) {
        auto& l = m.layers[i];
        switch (l.kind) {
            case LayerKind::Conv2d:
            case LayerKind::FullyConnected:
                fn(i, "weight", l.weight);
                fn(i, "bias", l.bias);
                break;
            case LayerKind::BatchNorm:
                fn(i, "gamma", l.weight);
                fn(i, "beta", l.bias);
                fn(i, "running_mean", l.running_mean);
                fn(i, "running_var", l.running_var);
                break;
            default: break;
        }
    }
}

inline SkipMode skip_mode_from_string(std::string_view s) {
    if (s == "single") return SkipMode::SingleLayer;
    if (s == "double") return SkipMode::DoubleLayer;
    throw ConfigError("unknown skip_mode '" + std::string(s) + "' (expected single or double)");
}

inline std::string to_string(SkipMode m) {
    return m == SkipMode::SingleLayer ? "single" : "double";
}

}  // namespace wpad
