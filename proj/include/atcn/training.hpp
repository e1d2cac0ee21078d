#pragma once

#include <atcn/builder.hpp>

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <limits>
#include <string>
#include <vector>

namespace atcn {

enum class SchedulerKind { None, Plateau, Step };
enum class LossKind { CrossEntropy, Mse };

inline const char* scheduler_name(SchedulerKind k) {
    switch (k) {
        case SchedulerKind::None: return "none";
        case SchedulerKind::Plateau: return "plateau";
        case SchedulerKind::Step: return "step";
    }
    return "?";
}

inline const char* loss_name(LossKind k) {
    return k == LossKind::CrossEntropy ? "cross_entropy" : "mse";
}

struct TrainConfig {
    long epochs = 50;
    long batch_size = 64;
    double base_lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    SchedulerKind scheduler = SchedulerKind::Plateau;
    long patience = 5;   // plateau
    long period = 70;    // step
    double gamma = 0.5;
    LossKind loss = LossKind::CrossEntropy;
    std::uint64_t seed = 1;
    double val_fraction = 0.1;      // split rule when the caller has no val set
    double clip_norm = 0.0;         // 0 disables gradient clipping
    double augment_polarity = 0.0;  // per-sample sign-flip probability
};

inline void check_train_config(const TrainConfig& c) {
    if (c.epochs < 1) throw ConfigError("epochs must be >= 1");
    if (c.batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (c.base_lr < 0) throw ConfigError("base_lr must be >= 0");
    if (c.gamma <= 0 || c.gamma > 1) throw ConfigError("gamma must be in (0, 1]");
    if (c.patience < 1) throw ConfigError("patience must be >= 1");
    if (c.period < 1) throw ConfigError("period must be >= 1");
    if (c.val_fraction < 0 || c.val_fraction >= 1)
        throw ConfigError("val_fraction must be in [0, 1)");
    if (c.clip_norm < 0) throw ConfigError("clip_norm must be >= 0");
    if (c.augment_polarity < 0 || c.augment_polarity > 1)
        throw ConfigError("augment_polarity must be in [0, 1]");
}

// Labeled batch container: classification uses labels, regression targets.
struct Dataset {
    Tensor3 inputs{1, 1, 0};
    std::vector<long> labels;
    Tensor3 targets{1, 1, 0};

    long size() const { return inputs.t == 0 ? 0 : inputs.n; }
};

inline Dataset make_classification_set(Tensor3 inputs, std::vector<long> labels) {
    if (inputs.n != long(labels.size()))
        throw ShapeError("dataset: " + std::to_string(inputs.n) + " inputs vs " +
                         std::to_string(labels.size()) + " labels");
    Dataset d;
    d.inputs = std::move(inputs);
    d.labels = std::move(labels);
    return d;
}

inline Dataset make_regression_set(Tensor3 inputs, Tensor3 targets) {
    if (inputs.n != targets.n)
        throw ShapeError("dataset: " + std::to_string(inputs.n) + " inputs vs " +
                         std::to_string(targets.n) + " targets");
    Dataset d;
    d.inputs = std::move(inputs);
    d.targets = std::move(targets);
    return d;
}

struct Metrics {
    double accuracy = 0.0;
    std::vector<double> f1;
    double macro_f1 = 0.0;
    double mse = 0.0;
    double log10_mse = 0.0;
    long count = 0;
};

struct LossResult {
    double value = 0.0;
    Tensor3 grad{1, 1, 0};
};

// Mean negative log-likelihood over log-softmax of the raw head outputs,
// gradient (softmax - onehot)/n. Predictions arrive as (n, classes, 1).
inline LossResult cross_entropy(const Tensor3& pred, const std::vector<long>& labels) {
    if (pred.t != 1) throw ShapeError("cross_entropy: predictions must have t = 1");
    if (pred.n != long(labels.size()))
        throw ShapeError("cross_entropy: " + std::to_string(pred.n) + " rows vs " +
                         std::to_string(labels.size()) + " labels");
    LossResult res;
    res.grad = tensor_new(pred.n, pred.c, 1);
    double total = 0;
    for (long i = 0; i < pred.n; ++i) {
        long y = labels[std::size_t(i)];
        if (y < 0 || y >= pred.c)
            throw RangeError("cross_entropy: label " + std::to_string(y) +
                             " outside [0, " + std::to_string(pred.c) + ")");
        double mx = -std::numeric_limits<double>::infinity();
        for (long k = 0; k < pred.c; ++k) mx = std::max(mx, double(pred.at(i, k, 0)));
        double lse = 0;
        for (long k = 0; k < pred.c; ++k) lse += std::exp(double(pred.at(i, k, 0)) - mx);
        lse = mx + std::log(lse);
        total += lse - double(pred.at(i, y, 0));
        for (long k = 0; k < pred.c; ++k) {
            double p = std::exp(double(pred.at(i, k, 0)) - lse);
            res.grad.at(i, k, 0) = float((p - (k == y ? 1.0 : 0.0)) / double(pred.n));
        }
    }
    res.value = total / double(pred.n);
    return res;
}

// Mean over every element of the squared difference, gradient 2*diff/numel.
inline LossResult mse(const Tensor3& pred, const Tensor3& target) {
    if (!pred.same_shape(target))
        throw ShapeError("mse: prediction " + pred.shape_str() + " vs target " +
                         target.shape_str());
    LossResult res;
    res.grad = tensor_new(pred.n, pred.c, pred.t);
    double total = 0;
    double numel = double(pred.data.size());
    for (std::size_t i = 0; i < pred.data.size(); ++i) {
        double diff = double(pred.data[i]) - double(target.data[i]);
        total += diff * diff;
        res.grad.data[i] = float(2.0 * diff / numel);
    }
    res.value = total / numel;
    return res;
}

inline LossResult loss(const Tensor3& pred, const Dataset& batch, LossKind kind) {
    return kind == LossKind::CrossEntropy ? cross_entropy(pred, batch.labels)
                                          : mse(pred, batch.targets);
}

// Adam with bias correction. Gradients are validated before use: a non-finite
// gradient aborts with the offending parameter named.
template <typename T>
struct AdamStateT {
    std::vector<std::vector<T>> m, v;
    long t = 0;

    void init(const std::vector<Param<T>*>& params) {
        m.clear();
        v.clear();
        for (const Param<T>* p : params) {
            m.emplace_back(p->v.size(), T(0));
            v.emplace_back(p->v.size(), T(0));
        }
        t = 0;
    }
};

using AdamState = AdamStateT<float>;

template <typename T>
void adam_step(std::vector<Param<T>*>& params, AdamStateT<T>& st, const TrainConfig& cfg,
               double lr) {
    if (st.m.size() != params.size()) throw StateError("adam: state/param count mismatch");
    ++st.t;
    double b1t = 1.0 - std::pow(cfg.beta1, double(st.t));
    double b2t = 1.0 - std::pow(cfg.beta2, double(st.t));
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        Param<T>& p = *params[pi];
        auto& m = st.m[pi];
        auto& v = st.v[pi];
        for (std::size_t i = 0; i < p.v.size(); ++i) {
            double g = double(p.g[i]);
            if (!std::isfinite(g))
                throw NumericError("non-finite gradient in " + p.name + "[" +
                                   std::to_string(i) + "]");
            double mi = cfg.beta1 * double(m[i]) + (1.0 - cfg.beta1) * g;
            double vi = cfg.beta2 * double(v[i]) + (1.0 - cfg.beta2) * g * g;
            m[i] = T(mi);
            v[i] = T(vi);
            double mhat = mi / b1t;
            double vhat = vi / b2t;
            p.v[i] = T(double(p.v[i]) - lr * mhat / (std::sqrt(vhat) + cfg.adam_eps));
        }
    }
}

struct SchedulerState {
    double lr = 0.0;
    double best = std::numeric_limits<double>::infinity();
    long stale = 0;
};

// Plateau halts the decay counter on any strict improvement; the step rule is
// stateless in the epoch number (1-indexed), lr = base * gamma^floor(e/period).
inline double scheduler_step(SchedulerState& st, const TrainConfig& cfg, long epoch,
                             double val_loss) {
    switch (cfg.scheduler) {
        case SchedulerKind::None:
            break;
        case SchedulerKind::Plateau:
            if (!std::isfinite(val_loss))
                throw NumericError("plateau scheduler saw a non-finite validation loss");
            if (val_loss < st.best) {
                st.best = val_loss;
                st.stale = 0;
            } else if (++st.stale == cfg.patience) {
                st.lr *= cfg.gamma;
                st.stale = 0;
            }
            break;
        case SchedulerKind::Step:
            st.lr = cfg.base_lr * std::pow(cfg.gamma, double(epoch / cfg.period));
            break;
    }
    return st.lr;
}

struct EpochRecord {
    long epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
    double lr = 0.0;
    double val_accuracy = 0.0;
    double val_macro_f1 = 0.0;
    double val_log10_mse = 0.0;
};

struct FitResult {
    std::vector<EpochRecord> history;
    double best_val_loss = std::numeric_limits<double>::infinity();
    long best_epoch = 0;
    bool diverged = false;
    Metrics final_val;
};

namespace detail {

inline std::vector<std::vector<float>> state_snapshot(Model& m) {
    std::vector<std::vector<float>> out;
    for (const StateRec<float>& rec : m.state()) out.push_back(*rec.data);
    return out;
}

inline void state_restore(Model& m, const std::vector<std::vector<float>>& snap) {
    std::vector<StateRec<float>> st = m.state();
    if (st.size() != snap.size()) throw StateError("snapshot/state record count mismatch");
    for (std::size_t i = 0; i < st.size(); ++i) {
        if (st[i].data->size() != snap[i].size())
            throw StateError("snapshot size mismatch at " + st[i].name);
        *st[i].data = snap[i];
    }
}

inline Dataset gather(const Dataset& d, const std::vector<long>& idx, long begin, long end) {
    long b = end - begin;
    Dataset out;
    out.inputs = Tensor3(b, d.inputs.c, d.inputs.t);
    bool classify = !d.labels.empty();
    if (classify)
        out.labels.resize(std::size_t(b));
    else
        out.targets = Tensor3(b, d.targets.c, d.targets.t);
    for (long i = 0; i < b; ++i) {
        long src = idx[std::size_t(begin + i)];
        std::copy(d.inputs.data.begin() + src * d.inputs.c * d.inputs.t,
                  d.inputs.data.begin() + (src + 1) * d.inputs.c * d.inputs.t,
                  out.inputs.data.begin() + i * d.inputs.c * d.inputs.t);
        if (classify) {
            out.labels[std::size_t(i)] = d.labels[std::size_t(src)];
        } else {
            std::copy(d.targets.data.begin() + src * d.targets.c * d.targets.t,
                      d.targets.data.begin() + (src + 1) * d.targets.c * d.targets.t,
                      out.targets.data.begin() + i * d.targets.c * d.targets.t);
        }
    }
    return out;
}

inline Metrics classification_metrics(const std::vector<long>& pred,
                                      const std::vector<long>& truth, long classes) {
    Metrics m;
    m.count = long(truth.size());
    std::vector<long> tp(std::size_t(classes), 0), fp(std::size_t(classes), 0),
        fn(std::size_t(classes), 0);
    long hits = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        if (pred[i] == truth[i]) {
            ++hits;
            ++tp[std::size_t(pred[i])];
        } else {
            ++fp[std::size_t(pred[i])];
            ++fn[std::size_t(truth[i])];
        }
    }
    m.accuracy = double(hits) / double(truth.size());
    m.f1.resize(std::size_t(classes), 0.0);
    double sum = 0;
    for (long k = 0; k < classes; ++k) {
        double denom = double(2 * tp[std::size_t(k)] + fp[std::size_t(k)] + fn[std::size_t(k)]);
        m.f1[std::size_t(k)] = denom > 0 ? 2.0 * double(tp[std::size_t(k)]) / denom : 0.0;
        sum += m.f1[std::size_t(k)];
    }
    m.macro_f1 = sum / double(classes);
    return m;
}

// Shared by fit's per-epoch validation and the public evaluate: one eval-mode
// sweep produces both the loss and the task metrics.
inline std::pair<double, Metrics> eval_pass(Model& model, const Dataset& data, LossKind task,
                                            long chunk = 128) {
    if (data.size() == 0) throw DataError("evaluate: empty dataset");
    double total_loss = 0;
    std::vector<long> pred_labels, true_labels;
    double sq_sum = 0;
    long sq_count = 0;
    std::vector<long> idx(std::size_t(data.size()));
    for (long i = 0; i < data.size(); ++i) idx[std::size_t(i)] = i;
    for (long at = 0; at < data.size(); at += chunk) {
        long end = std::min(at + chunk, data.size());
        Dataset part = gather(data, idx, at, end);
        Tensor3 out = model.forward(part.inputs, Mode::Eval, nullptr);
        LossResult lr = loss(out, part, task);
        total_loss += lr.value * double(end - at);
        if (task == LossKind::CrossEntropy) {
            for (long i = 0; i < out.n; ++i) {
                long best = 0;
                for (long k = 1; k < out.c; ++k)
                    if (out.at(i, k, 0) > out.at(i, best, 0)) best = k;
                pred_labels.push_back(best);
                true_labels.push_back(part.labels[std::size_t(i)]);
            }
        } else {
            for (std::size_t i = 0; i < out.data.size(); ++i) {
                double diff = double(out.data[i]) - double(part.targets.data[i]);
                sq_sum += diff * diff;
            }
            sq_count += long(out.data.size());
        }
    }
    Metrics m;
    if (task == LossKind::CrossEntropy) {
        m = classification_metrics(pred_labels, true_labels,
                                   model.head ? model.head->out() : 1);
    } else {
        m.mse = sq_sum / double(sq_count);
        m.log10_mse = m.mse > 0 ? std::log10(m.mse) : -300.0;
        m.count = data.size();
    }
    m.count = data.size();
    return {total_loss / double(data.size()), m};
}

}  // namespace detail

inline Metrics evaluate(Model& model, const Dataset& data, LossKind task) {
    return detail::eval_pass(model, data, task).second;
}

// Splits off the last fraction of a dataset as validation (order preserved).
inline std::pair<Dataset, Dataset> split_validation(const Dataset& d, double fraction) {
    if (fraction < 0 || fraction >= 1) throw RangeError("validation fraction must be in [0, 1)");
    long n_val = long(std::floor(double(d.size()) * fraction));
    long n_train = d.size() - n_val;
    if (n_train < 1) throw DataError("validation split leaves no training data");
    std::vector<long> idx(std::size_t(d.size()));
    for (long i = 0; i < d.size(); ++i) idx[std::size_t(i)] = i;
    Dataset train = detail::gather(d, idx, 0, n_train);
    Dataset val = n_val > 0 ? detail::gather(d, idx, n_train, d.size()) : Dataset{};
    return {std::move(train), std::move(val)};
}

// Epoch loop: seeded shuffle, optional polarity flips, train-mode batches,
// Adam, scheduler on validation loss, best-validation snapshot returned in
// the model. A non-finite loss aborts with the last finished epoch restored.
inline FitResult fit(Model& model, const Dataset& train, const Dataset& val,
                     const TrainConfig& cfg,
                     const std::function<void(const EpochRecord&)>& on_epoch = {}) {
    check_train_config(cfg);
    if (train.size() < 1) throw DataError("fit: empty training set");
    if (val.size() < 1) throw DataError("fit: empty validation set");

    Prng rng(cfg.seed);
    std::vector<Param<float>*> params = model.params();
    AdamState adam;
    adam.init(params);
    SchedulerState sched;
    sched.lr = cfg.base_lr;

    FitResult res;
    std::vector<std::vector<float>> best_snap = detail::state_snapshot(model);
    std::vector<std::vector<float>> good_snap = best_snap;

    std::vector<long> order(std::size_t(train.size()));
    for (long i = 0; i < train.size(); ++i) order[std::size_t(i)] = i;

    double lr_now = cfg.base_lr;
    double prev_val = std::numeric_limits<double>::infinity();
    for (long epoch = 1; epoch <= cfg.epochs; ++epoch) {
        // The scheduler fixes each epoch's rate before it runs, from the
        // previous epoch's validation loss; epoch 1 always uses base_lr.
        if (epoch > 1) lr_now = scheduler_step(sched, cfg, epoch, prev_val);
        for (long i = train.size() - 1; i > 0; --i)
            std::swap(order[std::size_t(i)], order[std::size_t(rng.next_index(i + 1))]);

        double train_loss = 0;
        for (long at = 0; at < train.size(); at += cfg.batch_size) {
            long end = std::min(at + cfg.batch_size, train.size());
            Dataset batch = detail::gather(train, order, at, end);
            if (cfg.augment_polarity > 0) {
                for (long i = 0; i < batch.inputs.n; ++i)
                    if (rng.next_double() < cfg.augment_polarity)
                        for (long c = 0; c < batch.inputs.c; ++c) {
                            float* row = batch.inputs.row(i, c);
                            for (long t = 0; t < batch.inputs.t; ++t) row[t] = -row[t];
                        }
            }
            Tensor3 out = model.forward(batch.inputs, Mode::Train, &rng);
            LossResult l = loss(out, batch, cfg.loss);
            train_loss += l.value * double(end - at);
            if (!std::isfinite(l.value)) break;
            model.zero_grads();
            model.backward(l.grad);
            if (cfg.clip_norm > 0) {
                double sq = 0;
                for (Param<float>* p : params)
                    for (float g : p->g) sq += double(g) * double(g);
                double norm = std::sqrt(sq);
                if (norm > cfg.clip_norm) {
                    float scale = float(cfg.clip_norm / norm);
                    for (Param<float>* p : params)
                        for (float& g : p->g) g *= scale;
                }
            }
            adam_step(params, adam, cfg, lr_now);
        }
        train_loss /= double(train.size());

        double val_loss = std::numeric_limits<double>::quiet_NaN();
        Metrics vm;
        if (std::isfinite(train_loss)) {
            auto [vl, metrics] = detail::eval_pass(model, val, cfg.loss);
            val_loss = vl;
            vm = metrics;
        }
        if (!std::isfinite(train_loss) || !std::isfinite(val_loss)) {
            detail::state_restore(model, good_snap);
            res.diverged = true;
            break;
        }

        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = train_loss;
        rec.val_loss = val_loss;
        rec.lr = lr_now;
        rec.val_accuracy = vm.accuracy;
        rec.val_macro_f1 = vm.macro_f1;
        rec.val_log10_mse = vm.log10_mse;
        res.history.push_back(rec);
        if (on_epoch) on_epoch(rec);

        if (val_loss < res.best_val_loss) {
            res.best_val_loss = val_loss;
            res.best_epoch = epoch;
            best_snap = detail::state_snapshot(model);
        }
        good_snap = detail::state_snapshot(model);
        prev_val = val_loss;
    }

    detail::state_restore(model, best_snap);
    res.final_val = evaluate(model, val, cfg.loss);
    return res;
}

// History as CSV; classification carries accuracy and macro-F1 columns,
// regression log10(mse). Values print with %.17g so reruns diff exactly.
inline std::string metrics_csv(const FitResult& res, LossKind task) {
    std::string out = task == LossKind::CrossEntropy
                          ? "epoch,train_loss,val_loss,lr,val_accuracy,val_macro_f1\n"
                          : "epoch,train_loss,val_loss,lr,val_log10_mse\n";
    char buf[256];
    for (const EpochRecord& r : res.history) {
        if (task == LossKind::CrossEntropy)
            std::snprintf(buf, sizeof buf, "%ld,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.epoch,
                          r.train_loss, r.val_loss, r.lr, r.val_accuracy, r.val_macro_f1);
        else
            std::snprintf(buf, sizeof buf, "%ld,%.17g,%.17g,%.17g,%.17g\n", r.epoch,
                          r.train_loss, r.val_loss, r.lr, r.val_log10_mse);
        out += buf;
    }
    return out;
}

struct SweepCurve {
    std::string value;
    std::vector<double> val_loss;
};

// Trains one model per knob value under identical seeds and data. Knobs:
// activation (names) and group (STCB group size applied across the chain).
inline std::vector<SweepCurve> sweep(const std::string& knob,
                                     const std::vector<std::string>& values,
                                     const ModelConfig& base, const Dataset& train,
                                     const Dataset& val, const TrainConfig& cfg) {
    if (values.empty()) throw ConfigError("sweep needs at least one value");
    std::vector<SweepCurve> curves;
    for (const std::string& value : values) {
        ModelConfig mc = base;
        if (knob == "activation") {
            mc.activation = parse_activation(value);
        } else if (knob == "group") {
            long g = 0;
            try {
                g = std::stol(value);
            } catch (const std::exception&) {
                throw ConfigError("group value '" + value + "' is not an integer");
            }
            mc.group_half = false;
            mc.group_values.assign(std::size_t(mc.depth()), g);
        } else {
            throw ConfigError("unknown sweep knob '" + knob + "' (activation, group)");
        }
        Model m = build_atcn(mc, cfg.seed);
        FitResult fr = fit(m, train, val, cfg);
        SweepCurve curve;
        curve.value = value;
        for (const EpochRecord& r : fr.history) curve.val_loss.push_back(r.val_loss);
        curves.push_back(std::move(curve));
    }
    return curves;
}

inline std::string sweep_csv(const std::vector<SweepCurve>& curves) {
    std::string out = "epoch";
    std::size_t rows = 0;
    for (const SweepCurve& c : curves) {
        out += "," + c.value;
        rows = std::max(rows, c.val_loss.size());
    }
    out += "\n";
    char buf[64];
    for (std::size_t e = 0; e < rows; ++e) {
        out += std::to_string(e + 1);
        for (const SweepCurve& c : curves) {
            if (e < c.val_loss.size()) {
                std::snprintf(buf, sizeof buf, ",%.17g", c.val_loss[e]);
                out += buf;
            } else {
                out += ",";
            }
        }
        out += "\n";
    }
    return out;
}

// Published training recipes. Epoch counts for ecg and mosfet are config
// defaults sized to the decay periods, not published numbers.
inline TrainConfig preset_recipe(const std::string& name) {
    TrainConfig c;
    if (name == "mnist") {
        c.epochs = 50;
        c.batch_size = 64;
        c.base_lr = 1e-3;
        c.scheduler = SchedulerKind::Plateau;
        c.patience = 5;
        c.gamma = 0.5;
        c.loss = LossKind::CrossEntropy;
    } else if (name == "ecg") {
        c.epochs = 140;
        c.batch_size = 16;
        c.base_lr = 1e-3;
        c.scheduler = SchedulerKind::Step;
        c.period = 70;
        c.gamma = 0.5;
        c.loss = LossKind::CrossEntropy;
        c.augment_polarity = 0.5;
        c.val_fraction = 0.3;
    } else if (name == "mosfet") {
        c.epochs = 250;
        c.batch_size = 16;
        c.base_lr = 1e-2;
        c.scheduler = SchedulerKind::Plateau;
        c.patience = 200;
        c.gamma = 0.9;
        c.loss = LossKind::Mse;
    } else {
        throw ConfigError("unknown recipe '" + name + "' (mnist, ecg, mosfet)");
    }
    return c;
}

inline nlohmann::json to_json(const TrainConfig& c) {
    return nlohmann::json{{"epochs", c.epochs},
                          {"batch_size", c.batch_size},
                          {"base_lr", c.base_lr},
                          {"beta1", c.beta1},
                          {"beta2", c.beta2},
                          {"adam_eps", c.adam_eps},
                          {"scheduler", scheduler_name(c.scheduler)},
                          {"patience", c.patience},
                          {"period", c.period},
                          {"gamma", c.gamma},
                          {"loss", loss_name(c.loss)},
                          {"seed", c.seed},
                          {"val_fraction", c.val_fraction},
                          {"clip_norm", c.clip_norm},
                          {"augment_polarity", c.augment_polarity}};
}

inline TrainConfig train_config_from_json(const nlohmann::json& j) {
    static const std::vector<std::string> known = {
        "epochs",  "batch_size", "base_lr", "beta1",        "beta2",
        "adam_eps", "scheduler",  "patience", "period",      "gamma",
        "loss",    "seed",       "val_fraction", "clip_norm", "augment_polarity"};
    if (!j.is_object()) throw ConfigError("train config must be a JSON object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const auto& k : known) ok = ok || (it.key() == k);
        if (!ok) throw ConfigError("unknown train config field '" + it.key() + "'");
    }
    TrainConfig c;
    try {
        if (j.contains("epochs")) j.at("epochs").get_to(c.epochs);
        if (j.contains("batch_size")) j.at("batch_size").get_to(c.batch_size);
        if (j.contains("base_lr")) j.at("base_lr").get_to(c.base_lr);
        if (j.contains("beta1")) j.at("beta1").get_to(c.beta1);
        if (j.contains("beta2")) j.at("beta2").get_to(c.beta2);
        if (j.contains("adam_eps")) j.at("adam_eps").get_to(c.adam_eps);
        if (j.contains("scheduler")) {
            std::string s = j["scheduler"];
            if (s == "none")
                c.scheduler = SchedulerKind::None;
            else if (s == "plateau")
                c.scheduler = SchedulerKind::Plateau;
            else if (s == "step")
                c.scheduler = SchedulerKind::Step;
            else
                throw ConfigError("scheduler must be none, plateau, or step");
        }
        if (j.contains("patience")) j.at("patience").get_to(c.patience);
        if (j.contains("period")) j.at("period").get_to(c.period);
        if (j.contains("gamma")) j.at("gamma").get_to(c.gamma);
        if (j.contains("loss")) {
            std::string s = j["loss"];
            if (s == "cross_entropy")
                c.loss = LossKind::CrossEntropy;
            else if (s == "mse")
                c.loss = LossKind::Mse;
            else
                throw ConfigError("loss must be cross_entropy or mse");
        }
        if (j.contains("seed")) j.at("seed").get_to(c.seed);
        if (j.contains("val_fraction")) j.at("val_fraction").get_to(c.val_fraction);
        if (j.contains("clip_norm")) j.at("clip_norm").get_to(c.clip_norm);
        if (j.contains("augment_polarity")) j.at("augment_polarity").get_to(c.augment_polarity);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("bad train config: ") + e.what());
    }
    check_train_config(c);
    return c;
}

}  // namespace atcn
