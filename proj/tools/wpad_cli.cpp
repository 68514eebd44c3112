// Command-line front end: dwt, synth, train, eval, info, compare.
// Exit codes: 0 success, 1 usage/config error, 2 data error, 3 numeric abort.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "wpad/wpad.hpp"

namespace fs = std::filesystem;
using namespace wpad;

namespace {

struct SizeArg {
    std::size_t h = 64, w = 64;
};

SizeArg parse_size(const std::string& s) {
    const std::size_t x = s.find('x');
    if (x == std::string::npos) throw ConfigError("size must be HxW, e.g. 64x64, got '" + s + "'");
    try {
        SizeArg out;
        out.h = std::stoul(s.substr(0, x));
        out.w = std::stoul(s.substr(x + 1));
        return out;
    } catch (const std::exception&) {
        throw ConfigError("size must be HxW, e.g. 64x64, got '" + s + "'");
    }
}

struct FileConfig {
    TrainConfig train;
    ModelConfig model;  // input_shape filled in later from the data
    SizeArg image_size;
    std::string precision = "double";
};

FileConfig read_file_config(const std::string& path) {
    FileConfig fc;
    if (path.empty()) return fc;
    std::ifstream in(path);
    if (!in) throw DataError("cannot open config file " + path);
    KvReader kv = KvReader::parse(in);
    fc.train = read_train_config(kv);
    fc.model = read_model_config(kv);
    fc.image_size = parse_size(kv.get_string("image_size", "64x64"));
    fc.precision = kv.get_string("precision", "double");
    if (fc.precision != "double" && fc.precision != "float") {
        throw ConfigError("precision must be double or float, got '" + fc.precision + "'");
    }
    kv.finish();
    return fc;
}

template <typename T>
std::array<std::size_t, 3> feature_shape(const Dataset<T>& ds, const TrainConfig& cfg) {
    const Tensor<T> f =
        extract_features(ds.samples.at(0).image, FilterPair::by_name(cfg.wavelet_filter),
                         cfg.feature_mode);
    return {f.dim(0), f.dim(1), f.dim(2)};
}

int cmd_dwt(const std::string& image_path, const std::string& filter_name,
            const std::string& out_dir) {
    const FilterPair& filt = FilterPair::by_name(filter_name);
    const Tensor<double> img = pgm_to_tensor<double>(read_pgm(image_path));
    const Subbands<double> sb = dwt2d(img, filt);

    fs::create_directories(out_dir);
    double max_abs = 0.0;
    for (const Tensor<double>* band : {&sb.ll, &sb.lh, &sb.hl, &sb.hh}) {
        for (double v : band->data()) max_abs = std::max(max_abs, std::abs(v));
    }
    const double scale = max_abs > 0.0 ? 1.0 / max_abs : 0.0;
    const char* names[4] = {"ll", "lh", "hl", "hh"};
    const Tensor<double>* bands[4] = {&sb.ll, &sb.lh, &sb.hl, &sb.hh};
    for (int i = 0; i < 4; ++i) {
        Tensor<double> vis(bands[i]->shape());
        for (std::size_t j = 0; j < vis.size(); ++j) {
            vis.data()[j] = std::abs(bands[i]->data()[j]) * scale;
        }
        write_pgm(fs::path(out_dir) / (std::string(names[i]) + ".pgm"), vis);
    }
    std::ofstream hdr(fs::path(out_dir) / "header.txt");
    hdr << "filter " << filt.name << "\n";
    hdr << "source_shape " << sb.source_h << " " << sb.source_w << "\n";
    hdr << "scale " << detail::fmt_double(max_abs) << "\n";
    std::cout << "wrote ll/lh/hl/hh.pgm and header.txt to " << out_dir << "\n";
    return 0;
}

int cmd_synth(std::size_t n, const std::string& size, std::uint64_t seed,
              const std::string& out_dir) {
    const SizeArg sz = parse_size(size);
    const Dataset<double> ds = synth_dataset<double>(n, sz.h, sz.w, seed);
    write_dataset(ds, out_dir);
    std::cout << "wrote " << ds.samples.size() << " images (" << n << " per class) to "
              << out_dir << "\n";
    return 0;
}

template <typename T>
int run_train(const std::string& data_dir, FileConfig fc, const std::string& out_ckpt,
              std::string log_path) {
    LoadOptions opt;
    opt.resize_h = fc.image_size.h;
    opt.resize_w = fc.image_size.w;
    opt.train_frac = fc.train.train_frac;
    opt.val_frac = fc.train.val_frac;
    Dataset<T> ds = load_dataset<T>(data_dir, opt);

    fc.model.input_shape = feature_shape(ds, fc.train);
    fc.model.num_classes = ds.class_names.size();
    Model<T> model = build<T>(fc.model, fc.train.seed);

    TrainResult<T> res = train(std::move(model), ds, fc.train, &std::cout);

    Checkpoint ck = make_checkpoint(res.model, fc.train, res.best_val_accuracy);
    save_checkpoint(out_ckpt, ck);
    if (log_path.empty()) log_path = out_ckpt + ".csv";
    std::ofstream log(log_path);
    res.log.write_csv(log);
    std::cout << "best_val_accuracy " << res.best_val_accuracy << "\n";
    std::cout << "saved checkpoint to " << out_ckpt << ", log to " << log_path << "\n";
    return 0;
}

// Derives the image size the checkpointed model was trained on.
SizeArg image_size_for(const Checkpoint& ck) {
    SizeArg sz;
    const auto& is = ck.model_config.input_shape;
    if (ck.train_config.feature_mode == FeatureMode::Raw) {
        sz.h = is[1];
        sz.w = is[2];
    } else {
        sz.h = 2 * is[1];
        sz.w = 2 * is[2];
    }
    return sz;
}

int cmd_eval(const std::string& ckpt_path, const std::string& data_dir,
             const std::string& out_dir, const std::string& split_name) {
    const Checkpoint ck = load_checkpoint(ckpt_path);
    Model<double> model = model_from_checkpoint<double>(ck);

    const SizeArg sz = image_size_for(ck);
    LoadOptions opt;
    opt.resize_h = sz.h;
    opt.resize_w = sz.w;
    opt.train_frac = ck.train_config.train_frac;
    opt.val_frac = ck.train_config.val_frac;
    Dataset<double> ds = load_dataset<double>(data_dir, opt);
    if (ds.class_names.size() != 2) {
        throw DataError("eval expects a binary real/fake dataset, found " +
                        std::to_string(ds.class_names.size()) + " classes");
    }

    const std::vector<std::size_t>* split = &ds.splits.test;
    if (split_name == "train") split = &ds.splits.train;
    else if (split_name == "val") split = &ds.splits.val;
    else if (split_name != "test") throw ConfigError("--split must be train, val or test");
    if (split->empty()) throw DataError("requested split '" + split_name + "' is empty");

    const std::vector<Tensor<double>> feats = extract_all_features(ds, ck.train_config);
    std::vector<ScoredSample> scored;
    std::vector<std::vector<double>> score_matrix;
    std::vector<int> truth;
    const std::size_t chunk = 32;
    for (std::size_t at = 0; at < split->size(); at += chunk) {
        std::vector<std::size_t> idx(split->begin() + at,
                                     split->begin() + std::min(at + chunk, split->size()));
        Tensor<double> batch = detail::stack_features(feats, idx);
        Prediction<double> pred = predict(model, batch);
        for (std::size_t i = 0; i < idx.size(); ++i) {
            const int label = ds.samples[idx[i]].label;
            scored.push_back({pred.probabilities(i, 1), label});
            score_matrix.push_back({pred.probabilities(i, 0), pred.probabilities(i, 1)});
            truth.push_back(label);
        }
    }

    EvalReport rep = evaluate(scored);
    rep.cmc = cmc(score_matrix, truth);

    fs::create_directories(out_dir);
    {
        std::ofstream roc(fs::path(out_dir) / "roc.csv");
        roc << "fpr,tpr\n";
        for (const auto& p : rep.roc) {
            roc << detail::fmt_double(p.fpr) << "," << detail::fmt_double(p.tpr) << "\n";
        }
    }
    {
        std::ofstream cmcf(fs::path(out_dir) / "cmc.csv");
        cmcf << "rank,rate\n";
        for (const auto& p : rep.cmc) {
            cmcf << p.rank << "," << detail::fmt_double(p.rate) << "\n";
        }
    }
    {
        std::ofstream sum(fs::path(out_dir) / "summary.csv");
        sum << "accuracy,auc,error_rate\n";
        sum << detail::fmt_double(rep.accuracy) << ","
            << (rep.auc ? detail::fmt_double(*rep.auc) : "nan") << ","
            << detail::fmt_double(rep.error_rate) << "\n";
    }
    std::printf("split=%s accuracy=%.4f auc=%s error_rate=%.4f\n", split_name.c_str(),
                rep.accuracy, rep.auc ? std::to_string(*rep.auc).c_str() : "nan",
                rep.error_rate);
    return 0;
}

int cmd_info(const std::string& ckpt_path) {
    const Checkpoint ck = load_checkpoint(ckpt_path);
    Model<double> model = model_from_checkpoint<double>(ck);
    const LayerCounts c = count_layers(model);
    std::printf("convs=%zu pools=%zu fcs=%zu\n", c.convs, c.pools, c.fcs);
    std::printf("input_shape=%zu,%zu,%zu num_classes=%zu\n", ck.model_config.input_shape[0],
                ck.model_config.input_shape[1], ck.model_config.input_shape[2],
                ck.model_config.num_classes);
    std::printf("feature_mode=%s wavelet_filter=%s best_val_accuracy=%.4f\n",
                to_string(ck.train_config.feature_mode).c_str(),
                ck.train_config.wavelet_filter.c_str(), ck.best_val_accuracy);
    return 0;
}

// Table-1-shaped protocol: the same architecture trained with and without
// the wavelet front end, reporting test accuracy and wall time per variant.
template <typename T>
int run_compare(const std::string& data_dir, const FileConfig& fc, const std::string& out_csv) {
    LoadOptions opt;
    opt.resize_h = fc.image_size.h;
    opt.resize_w = fc.image_size.w;
    opt.train_frac = fc.train.train_frac;
    opt.val_frac = fc.train.val_frac;
    const Dataset<T> ds = load_dataset<T>(data_dir, opt);

    struct Row {
        std::string variant;
        double test_acc;
        double wall_s;
    };
    std::vector<Row> rows;

    auto run_variant = [&](const std::string& name, FeatureMode mode) {
        TrainConfig tcfg = fc.train;
        tcfg.feature_mode = mode;
        ModelConfig mcfg = fc.model;
        mcfg.input_shape = feature_shape(ds, tcfg);
        mcfg.num_classes = ds.class_names.size();
        Model<T> model = build<T>(mcfg, tcfg.seed);

        const auto t0 = std::chrono::steady_clock::now();
        TrainResult<T> res = train(std::move(model), ds, tcfg);
        const double wall =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

        const std::vector<Tensor<T>> feats = extract_all_features(ds, tcfg);
        std::size_t correct = 0;
        const std::size_t chunk = 32;
        const auto& split = ds.splits.test;
        for (std::size_t at = 0; at < split.size(); at += chunk) {
            std::vector<std::size_t> idx(split.begin() + at,
                                         split.begin() + std::min(at + chunk, split.size()));
            Tensor<T> batch = detail::stack_features(feats, idx);
            Prediction<T> pred = predict(res.model, batch);
            for (std::size_t i = 0; i < idx.size(); ++i) {
                if (pred.classes[i] == ds.samples[idx[i]].label) ++correct;
            }
        }
        rows.push_back({name, static_cast<double>(correct) / split.size(), wall});
    };

    run_variant("dwt_" + to_string(fc.train.feature_mode), fc.train.feature_mode);
    run_variant("raw", FeatureMode::Raw);

    std::ofstream out(out_csv);
    out << "variant,test_accuracy,wall_time_s\n";
    for (const auto& r : rows) {
        out << r.variant << "," << detail::fmt_double(r.test_acc) << ","
            << detail::fmt_double(r.wall_s) << "\n";
        std::printf("%-14s test_accuracy=%.4f wall_time_s=%.1f\n", r.variant.c_str(), r.test_acc,
                    r.wall_s);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"wavelet + residual network presentation attack detection"};
    app.require_subcommand(1);

    auto* dwt = app.add_subcommand("dwt", "decompose a PGM image into level-1 subbands");
    std::string dwt_image, dwt_filter = "haar", dwt_out;
    dwt->add_option("image", dwt_image, "input PGM image")->required();
    dwt->add_option("--filter", dwt_filter, "wavelet filter (haar, bior2.2)");
    dwt->add_option("--out", dwt_out, "output directory")->required();

    auto* synth = app.add_subcommand("synth", "generate a synthetic real/fake dataset");
    std::size_t synth_n = 32;
    std::string synth_size = "64x64", synth_out;
    std::uint64_t synth_seed = 7;
    synth->add_option("--n", synth_n, "images per class");
    synth->add_option("--size", synth_size, "image size HxW");
    synth->add_option("--seed", synth_seed, "generator seed");
    synth->add_option("--out", synth_out, "output directory")->required();

    auto* tr = app.add_subcommand("train", "train a model on a class-per-directory dataset");
    std::string tr_data, tr_config, tr_out, tr_log;
    tr->add_option("--data", tr_data, "dataset root")->required();
    tr->add_option("--config", tr_config, "key = value config file");
    tr->add_option("--out", tr_out, "output checkpoint path")->required();
    tr->add_option("--log", tr_log, "training log CSV (default: <out>.csv)");

    auto* ev = app.add_subcommand("eval", "evaluate a checkpoint on a dataset");
    std::string ev_ckpt, ev_data, ev_out, ev_split = "test";
    ev->add_option("--ckpt", ev_ckpt, "checkpoint path")->required();
    ev->add_option("--data", ev_data, "dataset root")->required();
    ev->add_option("--out", ev_out, "output directory")->required();
    ev->add_option("--split", ev_split, "split to evaluate: train, val or test");

    auto* info = app.add_subcommand("info", "print layer counts of a checkpoint");
    std::string info_ckpt;
    info->add_option("--ckpt", info_ckpt, "checkpoint path")->required();

    auto* cmp = app.add_subcommand("compare", "train wavelet and raw variants, report table");
    std::string cmp_data, cmp_config, cmp_out;
    cmp->add_option("--data", cmp_data, "dataset root")->required();
    cmp->add_option("--config", cmp_config, "key = value config file");
    cmp->add_option("--out", cmp_out, "output CSV path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (*dwt) return cmd_dwt(dwt_image, dwt_filter, dwt_out);
        if (*synth) return cmd_synth(synth_n, synth_size, synth_seed, synth_out);
        if (*tr) {
            const FileConfig fc = read_file_config(tr_config);
            return fc.precision == "float" ? run_train<float>(tr_data, fc, tr_out, tr_log)
                                           : run_train<double>(tr_data, fc, tr_out, tr_log);
        }
        if (*ev) return cmd_eval(ev_ckpt, ev_data, ev_out, ev_split);
        if (*info) return cmd_info(info_ckpt);
        if (*cmp) {
            const FileConfig fc = read_file_config(cmp_config);
            return fc.precision == "float" ? run_compare<float>(cmp_data, fc, cmp_out)
                                           : run_compare<double>(cmp_data, fc, cmp_out);
        }
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const DataError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const NumericError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
