#pragma once

#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "wpad/config.hpp"
#include "wpad/errors.hpp"
#include "wpad/model.hpp"
#include "wpad/tensor.hpp"
#include "wpad/train.hpp"

namespace wpad {

// On-disk model snapshot. Format: the ASCII magic line "WPAD1", a text
// header of key=value lines plus one "tensor <name> <dims...>" descriptor
// per tensor, a "data" terminator line, then the raw tensor payloads as
// little-endian 8-byte reals in descriptor order. Values are stored as
// doubles regardless of the training precision, so round trips are
// bit-exact.
struct Checkpoint {
    ModelConfig model_config;
    TrainConfig train_config;
    double best_val_accuracy = 0.0;
    std::vector<std::pair<std::string, Tensor<double>>> tensors;
};

inline constexpr const char* kCheckpointMagic = "WPAD1";
inline constexpr std::uint64_t kCheckpointVersion = 1;

template <typename T>
Checkpoint make_checkpoint(Model<T>& model, const TrainConfig& train_cfg,
                           double best_val_accuracy) {
    Checkpoint ck;
    ck.model_config = model.config;
    ck.train_config = train_cfg;
    ck.best_val_accuracy = best_val_accuracy;
    for_each_state(model, [&](std::size_t i, const char* name, Tensor<T>& t) {
        ck.tensors.emplace_back("layer" + std::to_string(i) + "." + name,
                                t.template astype<double>());
    });
    return ck;
}

inline void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write checkpoint " + path.string());

    out << kCheckpointMagic << "\n";
    out << "version = " << kCheckpointVersion << "\n";
    write_model_config(out, ck.model_config);
    write_train_config(out, ck.train_config);
    out << "best_val_accuracy = " << detail::fmt_double(ck.best_val_accuracy) << "\n";
    for (const auto& [name, t] : ck.tensors) {
        out << "tensor " << name;
        for (std::size_t d : t.shape()) out << " " << d;
        out << "\n";
    }
    out << "data\n";
    for (const auto& [name, t] : ck.tensors) {
        out.write(reinterpret_cast<const char*>(t.raw()),
                  static_cast<std::streamsize>(t.size() * sizeof(double)));
    }
    if (!out) throw DataError("failed writing checkpoint " + path.string());
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint " + path.string());

    std::string line;
    if (!std::getline(in, line) || line != kCheckpointMagic) {
        throw DataError(path.string() + ": bad checkpoint magic");
    }

    std::ostringstream header;
    std::vector<std::pair<std::string, Shape>> descriptors;
    bool saw_data = false;
    while (std::getline(in, line)) {
        if (line == "data") {
            saw_data = true;
            break;
        }
        if (line.rfind("tensor ", 0) == 0) {
            std::istringstream ls(line.substr(7));
            std::string name;
            ls >> name;
            Shape shape;
            std::size_t d = 0;
            while (ls >> d) shape.push_back(d);
            if (name.empty() || shape.empty() || shape.size() > 4) {
                throw DataError(path.string() + ": malformed tensor descriptor: " + line);
            }
            descriptors.emplace_back(name, shape);
        } else {
            header << line << "\n";
        }
    }
    if (!saw_data) throw DataError(path.string() + ": missing data section");

    Checkpoint ck;
    {
        std::istringstream hs(header.str());
        KvReader kv = KvReader::parse(hs);
        const std::uint64_t version = kv.get_u64("version", 0);
        if (version != kCheckpointVersion) {
            throw DataError(path.string() + ": unsupported checkpoint version " +
                            std::to_string(version));
        }
        ck.model_config = read_model_config(kv);
        ck.train_config = read_train_config(kv);
        ck.best_val_accuracy = kv.get_double("best_val_accuracy", 0.0);
        kv.finish();
    }

    for (const auto& [name, shape] : descriptors) {
        std::size_t n = 1;
        for (std::size_t d : shape) n *= d;
        std::vector<double> values(n);
        in.read(reinterpret_cast<char*>(values.data()),
                static_cast<std::streamsize>(n * sizeof(double)));
        if (static_cast<std::size_t>(in.gcount()) != n * sizeof(double)) {
            throw DataError(path.string() + ": truncated payload at tensor " + name);
        }
        ck.tensors.emplace_back(name, Tensor<double>::from_values(shape, std::move(values)));
    }
    char extra;
    if (in.read(&extra, 1)) {
        throw DataError(path.string() + ": trailing bytes after declared tensors");
    }
    return ck;
}

// Rebuilds a model of precision T from a checkpoint. The architecture is
// reconstructed from the stored config and every parameter (including batch
// norm running statistics) is overwritten from the payload.
template <typename T>
Model<T> model_from_checkpoint(const Checkpoint& ck) {
    Model<T> model = build<T>(ck.model_config, /*seed=*/0);

    std::size_t visited = 0;
    std::size_t cursor = 0;
    for_each_state(model, [&](std::size_t i, const char* name, Tensor<T>& t) {
        const std::string key = "layer" + std::to_string(i) + "." + name;
        if (cursor >= ck.tensors.size() || ck.tensors[cursor].first != key) {
            throw DataError("checkpoint does not provide tensor '" + key +
                            "' in canonical order");
        }
        const Tensor<double>& src = ck.tensors[cursor].second;
        if (src.shape() != t.shape()) {
            throw DataError("checkpoint tensor '" + key + "' has shape " +
                            shape_str(src.shape()) + ", model expects " + shape_str(t.shape()));
        }
        t = src.astype<T>();
        ++cursor;
        ++visited;
    });
    if (cursor != ck.tensors.size()) {
        throw DataError("checkpoint holds " + std::to_string(ck.tensors.size()) +
                        " tensors, model consumes " + std::to_string(visited));
    }
    return model;
}

}  // namespace wpad
