#include <atcn/analyzer.hpp>
#include <atcn/data_io.hpp>
#include <atcn/training.hpp>

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

using namespace atcn;
using nlohmann::json;

namespace {

struct Options {
    std::string preset;
    std::string config_path;
    bool gtcn = false;
    long len = 0;
    std::string json_out;

    std::string mnist_dir;
    std::string csv_path;
    long synthetic = 0;
    long subset = 0;
    long in_len = 21;
    long out_len = 104;
    long stride = 1;

    long epochs = -1;
    long batch = -1;
    double lr = -1.0;
    std::uint64_t seed = 1;
    std::string out_path;
    std::string metrics_path;
    std::string checkpoint;
    bool use_test_split = false;

    std::string knob;
    std::string values;
    std::vector<std::string> sets;
};

json parse_override_value(const std::string& raw) {
    try {
        return json::parse(raw);
    } catch (const json::exception&) {
        return json(raw);  // bare strings pass through unquoted
    }
}

// Dotted overrides: model.<field>=<json> and train.<field>=<json>, applied
// last so they win over individual flags.
void apply_overrides(const std::vector<std::string>& sets, json& model_cfg, json& train_cfg) {
    for (const std::string& kv : sets) {
        std::size_t eq = kv.find('=');
        if (eq == std::string::npos)
            throw ConfigError("override '" + kv + "' is not key=value");
        std::string key = kv.substr(0, eq);
        json value = parse_override_value(kv.substr(eq + 1));
        if (key.rfind("model.", 0) == 0) {
            if (model_cfg.is_null()) throw ConfigError("no model config to override");
            model_cfg[key.substr(6)] = value;
        } else if (key.rfind("train.", 0) == 0) {
            train_cfg[key.substr(6)] = value;
        } else {
            throw ConfigError("override key '" + key + "' must start with model. or train.");
        }
    }
}

json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path);
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw DataError(path + ": " + e.what());
    }
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("cannot write " + path);
    out << text;
    if (!out) throw DataError("short write to " + path);
}

// Resolves the model source (preset, config file, or checkpoint) to a config
// JSON; training commands rebuild from it after overrides.
json resolve_model_json(const Options& o) {
    if (!o.preset.empty() && !o.config_path.empty())
        throw ConfigError("give either --preset or --config, not both");
    if (!o.preset.empty()) {
        if (o.gtcn) throw ConfigError("presets are ATCN models; --gtcn needs --config");
        return to_json(preset(o.preset));
    }
    if (!o.config_path.empty()) return read_json_file(o.config_path);
    throw ConfigError("need --preset or --config");
}

Model model_from_json(const json& j, bool gtcn, std::uint64_t seed) {
    if (gtcn) return build_gtcn(gtcn_config_from_json(j), seed);
    return build_atcn(model_config_from_json(j), seed);
}

json resolve_train_json(const Options& o) {
    TrainConfig base = !o.preset.empty() ? preset_recipe(o.preset) : TrainConfig{};
    json j = to_json(base);
    if (o.epochs >= 0) j["epochs"] = o.epochs;
    if (o.batch >= 0) j["batch_size"] = o.batch;
    if (o.lr >= 0) j["base_lr"] = o.lr;
    j["seed"] = o.seed;
    return j;
}

std::string mnist_path(const std::string& dir, const char* name) {
    return dir + (dir.empty() || dir.back() == '/' ? "" : "/") + name;
}

Dataset mnist_dataset(const Options& o, bool test_split) {
    std::string dir = o.mnist_dir;
    if (dir.empty()) {
        const char* env = std::getenv("ATCN_MNIST_DIR");
        dir = env ? env : "data/mnist";
    }
    MnistSet set = test_split
                       ? load_mnist_idx(mnist_path(dir, "t10k-images-idx3-ubyte"),
                                        mnist_path(dir, "t10k-labels-idx1-ubyte"))
                       : load_mnist_idx(mnist_path(dir, "train-images-idx3-ubyte"),
                                        mnist_path(dir, "train-labels-idx1-ubyte"));
    Dataset d = make_classification_set(std::move(set.images), std::move(set.labels));
    if (o.subset > 0 && o.subset < d.size()) {
        std::vector<long> idx(std::size_t(o.subset));
        for (long i = 0; i < o.subset; ++i) idx[std::size_t(i)] = i;
        d = detail::gather(d, idx, 0, o.subset);
    }
    return d;
}

// CSV and synthetic sources share the regression pipeline: normalize each
// series to [-1, 1], then cut stride-1 windows.
struct RegressionData {
    Dataset all;
    MinMax norm;  // norm of the last series, for denormalizing predictions
};

Dataset merge_window_sets(const std::vector<SeriesWindowSet>& sets) {
    long total = 0;
    for (const SeriesWindowSet& s : sets) total += s.count();
    if (total == 0) throw DataError("no windows produced");
    Tensor3 inputs(total, 1, sets[0].inputs.t);
    Tensor3 targets(total, sets[0].targets.c, 1);
    long at = 0;
    for (const SeriesWindowSet& s : sets) {
        std::copy(s.inputs.data.begin(), s.inputs.data.end(),
                  inputs.data.begin() + at * inputs.c * inputs.t);
        std::copy(s.targets.data.begin(), s.targets.data.end(),
                  targets.data.begin() + at * targets.c * targets.t);
        at += s.count();
    }
    return make_regression_set(std::move(inputs), std::move(targets));
}

RegressionData regression_dataset(const Options& o) {
    std::vector<std::vector<double>> series_list;
    if (!o.csv_path.empty()) {
        series_list.push_back(load_series_csv(o.csv_path));
    } else {
        Prng rng(o.seed);
        series_list = gen_synthetic_degradation(rng, o.synthetic, 400);
    }
    std::vector<SeriesWindowSet> sets;
    MinMax last;
    for (const auto& s : series_list) {
        auto [norm, mm] = normalize_minmax(s);
        sets.push_back(window_series(norm, o.in_len, o.out_len, o.stride, mm));
        last = mm;
    }
    return {merge_window_sets(sets), last};
}

struct LoadedData {
    Dataset data;
    LossKind task;
    MinMax norm;
};

LoadedData load_data(const Options& o, bool test_split) {
    int sources = int(!o.mnist_dir.empty() || (o.csv_path.empty() && o.synthetic == 0)) +
                  int(!o.csv_path.empty()) + int(o.synthetic > 0);
    if (sources > 1)
        throw ConfigError("give one data source: --mnist-dir, --csv, or --synthetic");
    if (!o.csv_path.empty() || o.synthetic > 0) {
        RegressionData r = regression_dataset(o);
        return {std::move(r.all), LossKind::Mse, r.norm};
    }
    return {mnist_dataset(o, test_split), LossKind::CrossEntropy, MinMax{}};
}

void print_resolved(const json& model_cfg, const json* train_cfg) {
    std::printf("resolved model config: %s\n", model_cfg.dump().c_str());
    if (train_cfg) std::printf("resolved train config: %s\n", train_cfg->dump().c_str());
}

void print_metrics(const Metrics& m, LossKind task) {
    if (task == LossKind::CrossEntropy) {
        std::printf("accuracy %.6f\n", m.accuracy);
        std::printf("macro_f1 %.6f\n", m.macro_f1);
        for (std::size_t k = 0; k < m.f1.size(); ++k)
            std::printf("f1[%zu] %.6f\n", k, m.f1[k]);
    } else {
        std::printf("mse %.8g\n", m.mse);
        std::printf("log10_mse %.6f\n", m.log10_mse);
    }
    std::printf("samples %ld\n", m.count);
}

int cmd_analyze(const Options& o) {
    if (o.len < 1) throw ConfigError("--len must be >= 1");
    json mj = resolve_model_json(o);
    json tj;
    apply_overrides(o.sets, mj, tj);
    if (!tj.empty()) throw ConfigError("analyze takes only model.* overrides");
    Model m = model_from_json(mj, o.gtcn, 1);
    print_resolved(mj, nullptr);
    CostReport rep = analyze(m, o.len);
    std::fputs(text_report(rep).c_str(), stdout);
    if (!o.json_out.empty()) write_text_file(o.json_out, json_report(rep).dump(2) + "\n");
    return 0;
}

int cmd_build(const Options& o) {
    json mj = resolve_model_json(o);
    json tj;
    apply_overrides(o.sets, mj, tj);
    Model m = model_from_json(mj, o.gtcn, o.seed);
    print_resolved(mj, nullptr);
    std::printf("parameters %ld\n", m.param_count());
    if (!o.out_path.empty()) {
        save_checkpoint(m, o.out_path);
        std::printf("checkpoint %s\n", o.out_path.c_str());
    }
    return 0;
}

int cmd_train(const Options& o) {
    json mj = resolve_model_json(o);
    json tj = resolve_train_json(o);
    apply_overrides(o.sets, mj, tj);
    TrainConfig cfg = train_config_from_json(tj);

    LoadedData ld = load_data(o, false);
    cfg.loss = ld.task;  // classification data trains CE, windowed series MSE
    auto [train_set, val_set] = split_validation(ld.data, cfg.val_fraction);
    if (val_set.size() == 0) throw ConfigError("val_fraction leaves no validation data");

    Model m = model_from_json(mj, o.gtcn, cfg.seed);
    print_resolved(mj, &tj);
    std::printf("train %ld samples, val %ld samples\n", train_set.size(), val_set.size());

    FitResult res = fit(m, train_set, val_set, cfg, [&](const EpochRecord& r) {
        std::printf("epoch %ld train_loss %.6f val_loss %.6f lr %.3g\n", r.epoch, r.train_loss,
                    r.val_loss, r.lr);
        std::fflush(stdout);
    });
    if (res.diverged) {
        std::fprintf(stderr, "training diverged; restored last finite state\n");
        throw NumericError("training diverged");
    }
    std::printf("best epoch %ld val_loss %.6f\n", res.best_epoch, res.best_val_loss);
    print_metrics(res.final_val, cfg.loss);

    std::string ck = o.out_path.empty() ? "model.atcn" : o.out_path;
    save_checkpoint(m, ck);
    std::printf("checkpoint %s\n", ck.c_str());
    std::string mcsv = o.metrics_path.empty() ? "metrics.csv" : o.metrics_path;
    write_text_file(mcsv, metrics_csv(res, cfg.loss));
    std::printf("metrics %s\n", mcsv.c_str());
    return 0;
}

int cmd_eval(const Options& o) {
    if (o.checkpoint.empty()) throw ConfigError("eval needs --checkpoint");
    Model m = load_checkpoint(o.checkpoint);
    LoadedData ld = load_data(o, o.use_test_split);
    Metrics met = evaluate(m, ld.data, ld.task);
    print_metrics(met, ld.task);
    if (!o.json_out.empty()) {
        json j{{"count", met.count}};
        if (ld.task == LossKind::CrossEntropy) {
            j["accuracy"] = met.accuracy;
            j["macro_f1"] = met.macro_f1;
            j["f1"] = met.f1;
        } else {
            j["mse"] = met.mse;
            j["log10_mse"] = met.log10_mse;
        }
        write_text_file(o.json_out, j.dump(2) + "\n");
    }
    return 0;
}

int cmd_predict(const Options& o) {
    if (o.checkpoint.empty()) throw ConfigError("predict needs --checkpoint");
    Model m = load_checkpoint(o.checkpoint);
    LoadedData ld = load_data(o, o.use_test_split);
    std::string out;
    char buf[64];
    long chunk = 128;
    std::vector<long> idx(std::size_t(ld.data.size()));
    for (long i = 0; i < ld.data.size(); ++i) idx[std::size_t(i)] = i;
    for (long at = 0; at < ld.data.size(); at += chunk) {
        long end = std::min(at + chunk, ld.data.size());
        Dataset part = detail::gather(ld.data, idx, at, end);
        Tensor3 pred = m.forward(part.inputs, Mode::Eval, nullptr);
        for (long i = 0; i < pred.n; ++i) {
            if (ld.task == LossKind::CrossEntropy) {
                long best = 0;
                for (long k = 1; k < pred.c; ++k)
                    if (pred.at(i, k, 0) > pred.at(i, best, 0)) best = k;
                out += std::to_string(best);
            } else {
                for (long k = 0; k < pred.c; ++k) {
                    double v = denormalize(double(pred.at(i, k, 0)), ld.norm);
                    std::snprintf(buf, sizeof buf, k ? ",%.9g" : "%.9g", v);
                    out += buf;
                }
            }
            out += "\n";
        }
    }
    if (o.out_path.empty()) {
        std::fputs(out.c_str(), stdout);
    } else {
        write_text_file(o.out_path, out);
        std::printf("predictions %s\n", o.out_path.c_str());
    }
    return 0;
}

int cmd_sweep(const Options& o) {
    if (o.knob.empty() || o.values.empty()) throw ConfigError("sweep needs --knob and --values");
    json mj = resolve_model_json(o);
    if (o.gtcn) throw ConfigError("sweep supports ATCN configs only");
    json tj = resolve_train_json(o);
    apply_overrides(o.sets, mj, tj);
    ModelConfig base = model_config_from_json(mj);
    TrainConfig cfg = train_config_from_json(tj);

    std::vector<std::string> values;
    std::size_t from = 0;
    while (from <= o.values.size()) {
        std::size_t comma = o.values.find(',', from);
        if (comma == std::string::npos) comma = o.values.size();
        if (comma > from) values.push_back(o.values.substr(from, comma - from));
        from = comma + 1;
    }

    LoadedData ld = load_data(o, false);
    cfg.loss = ld.task;
    auto [train_set, val_set] = split_validation(ld.data, cfg.val_fraction);
    if (val_set.size() == 0) throw ConfigError("val_fraction leaves no validation data");
    print_resolved(mj, &tj);

    std::vector<SweepCurve> curves = sweep(o.knob, values, base, train_set, val_set, cfg);
    std::string csv = sweep_csv(curves);
    if (o.out_path.empty()) {
        std::fputs(csv.c_str(), stdout);
    } else {
        write_text_file(o.out_path, csv);
        std::printf("sweep %s\n", o.out_path.c_str());
    }
    return 0;
}

int cmd_presets(const Options& o) {
    json all = json::array();
    for (const char* name : {"mnist", "ecg", "mosfet"}) {
        json entry;
        entry["name"] = name;
        entry["model"] = to_json(preset(name));
        entry["train"] = to_json(preset_recipe(name));
        all.push_back(entry);
    }
    if (!o.json_out.empty()) {
        write_text_file(o.json_out, all.dump(2) + "\n");
        return 0;
    }
    std::fputs(all.dump(2).c_str(), stdout);
    std::fputs("\n", stdout);
    return 0;
}

void add_model_flags(CLI::App* cmd, Options& o) {
    cmd->add_option("--preset", o.preset, "built-in preset (mnist, ecg, mosfet)");
    cmd->add_option("--config", o.config_path, "model config JSON file");
    cmd->add_flag("--gtcn", o.gtcn, "config file describes a generic TCN");
    cmd->add_option("--set", o.sets, "override, e.g. model.dropout_rate=0.3 or train.base_lr=0.01");
}

void add_data_flags(CLI::App* cmd, Options& o) {
    cmd->add_option("--mnist-dir", o.mnist_dir, "directory with the four IDX files");
    cmd->add_option("--csv", o.csv_path, "time,value series CSV");
    cmd->add_option("--synthetic", o.synthetic, "generate N synthetic degradation devices");
    cmd->add_option("--subset", o.subset, "use only the first N samples");
    cmd->add_option("--in-len", o.in_len, "window input length");
    cmd->add_option("--out-len", o.out_len, "window target length");
    cmd->add_option("--stride", o.stride, "window stride");
    cmd->add_option("--seed", o.seed, "rng seed");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"ATCN toolkit: build, analyze, train, and run 1-D sequence models"};
    app.require_subcommand(1);
    Options o;

    CLI::App* analyze_cmd = app.add_subcommand("analyze", "per-layer cost and receptive field");
    add_model_flags(analyze_cmd, o);
    analyze_cmd->add_option("--len", o.len, "input sequence length")->required();
    analyze_cmd->add_option("--json", o.json_out, "also write the report as JSON");

    CLI::App* build_cmd = app.add_subcommand("build", "validate a config; optionally save an initialized checkpoint");
    add_model_flags(build_cmd, o);
    build_cmd->add_option("--seed", o.seed, "rng seed");
    build_cmd->add_option("--out", o.out_path, "checkpoint path");

    CLI::App* train_cmd = app.add_subcommand("train", "fit a model and save the best checkpoint");
    add_model_flags(train_cmd, o);
    add_data_flags(train_cmd, o);
    train_cmd->add_option("--epochs", o.epochs, "epoch count");
    train_cmd->add_option("--batch", o.batch, "batch size");
    train_cmd->add_option("--lr", o.lr, "base learning rate");
    train_cmd->add_option("--out", o.out_path, "checkpoint path (default model.atcn)");
    train_cmd->add_option("--metrics", o.metrics_path, "metrics CSV path (default metrics.csv)");

    CLI::App* eval_cmd = app.add_subcommand("eval", "metrics for a checkpoint on a dataset");
    eval_cmd->add_option("--checkpoint", o.checkpoint, "checkpoint path")->required();
    add_data_flags(eval_cmd, o);
    eval_cmd->add_flag("--test", o.use_test_split, "use the t10k files (MNIST)");
    eval_cmd->add_option("--json", o.json_out, "also write metrics as JSON");

    CLI::App* predict_cmd = app.add_subcommand("predict", "raw predictions for a checkpoint");
    predict_cmd->add_option("--checkpoint", o.checkpoint, "checkpoint path")->required();
    add_data_flags(predict_cmd, o);
    predict_cmd->add_flag("--test", o.use_test_split, "use the t10k files (MNIST)");
    predict_cmd->add_option("--out", o.out_path, "predictions CSV path (default stdout)");

    CLI::App* sweep_cmd = app.add_subcommand("sweep", "train one model per knob value");
    add_model_flags(sweep_cmd, o);
    add_data_flags(sweep_cmd, o);
    sweep_cmd->add_option("--knob", o.knob, "activation or group")->required();
    sweep_cmd->add_option("--values", o.values, "comma-separated values")->required();
    sweep_cmd->add_option("--epochs", o.epochs, "epoch count");
    sweep_cmd->add_option("--batch", o.batch, "batch size");
    sweep_cmd->add_option("--lr", o.lr, "base learning rate");
    sweep_cmd->add_option("--out", o.out_path, "sweep CSV path (default stdout)");

    CLI::App* presets_cmd = app.add_subcommand("presets", "print the built-in presets");
    presets_cmd->add_option("--json", o.json_out, "write presets to a JSON file");

    try {
        app.parse(argc, argv);
        if (*analyze_cmd) return cmd_analyze(o);
        if (*build_cmd) return cmd_build(o);
        if (*train_cmd) return cmd_train(o);
        if (*eval_cmd) return cmd_eval(o);
        if (*predict_cmd) return cmd_predict(o);
        if (*sweep_cmd) return cmd_sweep(o);
        if (*presets_cmd) return cmd_presets(o);
        return 1;
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    } catch (const DataError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const NumericError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
