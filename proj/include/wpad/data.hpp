#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "wpad/errors.hpp"
#include "wpad/pgm.hpp"
#include "wpad/random.hpp"
#include "wpad/tensor.hpp"

namespace wpad {

template <typename T>
struct Sample {
    Tensor<T> image;  // rank-2 grayscale in [0,1]
    int label = 0;
    std::string source_path;
};

struct Splits {
    std::vector<std::size_t> train, val, test;
};

template <typename T>
struct Dataset {
    std::vector<Sample<T>> samples;
    std::vector<std::string> class_names;
    Splits splits;
    std::size_t skipped_files = 0;
};

struct LoadOptions {
    std::size_t resize_h = 64;
    std::size_t resize_w = 64;
    bool grayscale = true;  // PGM input is already grayscale; kept for the contract
    double train_frac = 0.7;
    double val_frac = 0.15;
};

// Bilinear resize with endpoint-aligned sampling, so constant images stay
// constant and linear ramps keep their endpoints.
template <typename T>
Tensor<T> resize_bilinear(const Tensor<T>& img, std::size_t out_h, std::size_t out_w) {
    if (img.rank() != 2) {
        throw ShapeError("resize_bilinear: expected rank-2 image, got " + shape_str(img.shape()));
    }
    if (out_h == 0 || out_w == 0) throw ShapeError("resize_bilinear: zero output size");
    const std::size_t in_h = img.dim(0), in_w = img.dim(1);
    if (in_h == out_h && in_w == out_w) return img;

    Tensor<T> out({out_h, out_w});
    const double sy = out_h > 1 ? static_cast<double>(in_h - 1) / (out_h - 1) : 0.0;
    const double sx = out_w > 1 ? static_cast<double>(in_w - 1) / (out_w - 1) : 0.0;
    for (std::size_t r = 0; r < out_h; ++r) {
        const double fy = r * sy;
        const std::size_t y0 = static_cast<std::size_t>(fy);
        const std::size_t y1 = std::min(y0 + 1, in_h - 1);
        const double wy = fy - y0;
        for (std::size_t c = 0; c < out_w; ++c) {
            const double fx = c * sx;
            const std::size_t x0 = static_cast<std::size_t>(fx);
            const std::size_t x1 = std::min(x0 + 1, in_w - 1);
            const double wx = fx - x0;
            const double v = (1 - wy) * ((1 - wx) * img(y0, x0) + wx * img(y0, x1)) +
                             wy * ((1 - wx) * img(y1, x0) + wx * img(y1, x1));
            out(r, c) = static_cast<T>(v);
        }
    }
    return out;
}

namespace detail {

// Stratified positional split: within each class, the first train_frac of
// the samples go to train, the next val_frac to val, the rest to test.
// Deterministic with no RNG involved.
template <typename T>
void assign_splits(Dataset<T>& ds, double train_frac, double val_frac) {
    if (train_frac < 0 || val_frac < 0 || train_frac + val_frac > 1.0) {
        throw ConfigError("split fractions must be non-negative and sum to <= 1");
    }
    std::vector<std::vector<std::size_t>> by_class(ds.class_names.size());
    for (std::size_t i = 0; i < ds.samples.size(); ++i) {
        by_class[static_cast<std::size_t>(ds.samples[i].label)].push_back(i);
    }
    for (const auto& idx : by_class) {
        const std::size_t n = idx.size();
        const std::size_t n_train = static_cast<std::size_t>(n * train_frac);
        const std::size_t n_val = static_cast<std::size_t>(n * val_frac);
        for (std::size_t i = 0; i < n; ++i) {
            if (i < n_train) {
                ds.splits.train.push_back(idx[i]);
            } else if (i < n_train + n_val) {
                ds.splits.val.push_back(idx[i]);
            } else {
                ds.splits.test.push_back(idx[i]);
            }
        }
    }
}

}  // namespace detail

// Loads a class-per-directory dataset of binary PGM images. For the binary
// task the {real, fake} directories map to labels {0, 1} (attack = positive
// = 1); any other directory layout is ordered alphabetically. Within a
// class, files are visited in sorted-path order, so the resulting dataset is
// identical across runs and platforms. Unreadable files are skipped with a
// warning and counted in skipped_files.
template <typename T>
Dataset<T> load_dataset(const std::filesystem::path& root, const LoadOptions& opt = {}) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(root)) {
        throw DataError("dataset root " + root.string() + " is not a directory");
    }

    std::vector<std::string> classes;
    for (const auto& entry : fs::directory_iterator(root)) {
        if (entry.is_directory()) classes.push_back(entry.path().filename().string());
    }
    std::sort(classes.begin(), classes.end());
    if (classes.size() == 2 && classes[0] == "fake" && classes[1] == "real") {
        classes = {"real", "fake"};
    }
    if (classes.empty()) throw DataError("dataset root " + root.string() + " has no class dirs");

    Dataset<T> ds;
    ds.class_names = classes;
    for (std::size_t label = 0; label < classes.size(); ++label) {
        std::vector<fs::path> files;
        for (const auto& entry : fs::directory_iterator(root / classes[label])) {
            if (entry.is_regular_file()) files.push_back(entry.path());
        }
        std::sort(files.begin(), files.end());
        std::size_t loaded = 0;
        for (const auto& f : files) {
            try {
                const PgmImage img = read_pgm(f);
                Sample<T> s;
                s.image = resize_bilinear(pgm_to_tensor<T>(img), opt.resize_h, opt.resize_w);
                s.label = static_cast<int>(label);
                s.source_path = f.string();
                ds.samples.push_back(std::move(s));
                ++loaded;
            } catch (const DataError& e) {
                std::cerr << "warning: skipping " << f.string() << ": " << e.what() << "\n";
                ++ds.skipped_files;
            }
        }
        if (loaded == 0) {
            throw DataError("class '" + classes[label] + "' has no readable images");
        }
    }
    detail::assign_splits(ds, opt.train_frac, opt.val_frac);
    return ds;
}

// Deterministic synthetic real/fake generator for desk-scale runs. "Real"
// images are sums of three random Gaussian blobs plus mild noise; "fake"
// images get the same blobs overlaid with a high-frequency checker and line
// grid, emulating print/moire artifacts. The overlay concentrates energy in
// the detail subbands, which is what the wavelet front end is meant to find.
template <typename T>
Dataset<T> synth_dataset(std::size_t n_per_class, std::size_t h, std::size_t w,
                         std::uint64_t seed, double train_frac = 0.7, double val_frac = 0.15) {
    if (n_per_class < 1) throw ConfigError("synth_dataset: n_per_class must be >= 1");
    if (h < 16 || w < 16 || h % 4 != 0 || w % 4 != 0) {
        throw ConfigError("synth_dataset: size must be >= 16 and divisible by 4, got " +
                          std::to_string(h) + "x" + std::to_string(w));
    }

    Rng rng(seed);
    Dataset<T> ds;
    ds.class_names = {"real", "fake"};

    auto make_image = [&](bool fake) {
        struct Blob {
            double ch, cw, sigma, amp;
        };
        Blob blobs[3];
        for (auto& b : blobs) {
            b.ch = rng.uniform(0.15 * h, 0.85 * h);
            b.cw = rng.uniform(0.15 * w, 0.85 * w);
            b.sigma = rng.uniform(0.08, 0.20) * static_cast<double>(std::min(h, w));
            b.amp = rng.uniform(0.12, 0.26);
        }
        const double grid_amp = fake ? rng.uniform(0.10, 0.18) : 0.0;

        Tensor<T> img({h, w});
        for (std::size_t r = 0; r < h; ++r) {
            for (std::size_t c = 0; c < w; ++c) {
                double v = 0.1;
                for (const auto& b : blobs) {
                    const double dr = r - b.ch, dc = c - b.cw;
                    v += b.amp * std::exp(-(dr * dr + dc * dc) / (2.0 * b.sigma * b.sigma));
                }
                v += rng.uniform(-0.02, 0.02);
                if (fake) {
                    v += 0.5 * grid_amp * (((r + c) % 2 == 0) ? 1.0 : -1.0);  // checker
                    if (r % 4 == 0 || c % 4 == 0) v += 0.5 * grid_amp;        // line grid
                }
                img(r, c) = static_cast<T>(std::clamp(v, 0.0, 1.0));
            }
        }
        return img;
    };

    for (std::size_t i = 0; i < n_per_class; ++i) {
        ds.samples.push_back({make_image(false), 0, ""});
    }
    for (std::size_t i = 0; i < n_per_class; ++i) {
        ds.samples.push_back({make_image(true), 1, ""});
    }
    detail::assign_splits(ds, train_frac, val_frac);
    return ds;
}

// Writes a dataset to the class-per-directory PGM layout load_dataset reads.
template <typename T>
void write_dataset(const Dataset<T>& ds, const std::filesystem::path& root) {
    namespace fs = std::filesystem;
    std::vector<std::size_t> counters(ds.class_names.size(), 0);
    for (const auto& name : ds.class_names) fs::create_directories(root / name);
    for (const auto& s : ds.samples) {
        const std::string& cls = ds.class_names[static_cast<std::size_t>(s.label)];
        char name[32];
        std::snprintf(name, sizeof(name), "%s_%04zu.pgm", cls.c_str(),
                      counters[static_cast<std::size_t>(s.label)]++);
        write_pgm(root / cls / name, s.image);
    }
}

}  // namespace wpad
