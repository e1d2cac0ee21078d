#pragma once

#include <atcn/builder.hpp>

#include <json.hpp>

#include <cstdint>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

namespace atcn {

// Counted: conv/linear multiplies (c_out*(c_in/g)*k*t_out per conv stage, with the
// stage's actual output length; expansion pointwise stages therefore run at padded
// length), batchnorm at 2 ops/element (eval-mode normalize + affine), activations at
// 1 op/element, max-pool at 1 op per element read, adaptive avg-pool at 1 op/element.
// Not counted: dropout, residual adds, padding, bias adds.
inline const char* mac_convention() {
    return "multiply-accumulates: conv c_out*(c_in/g)*k*t_out per stage at actual "
           "stage length, linear in*out, batchnorm 2/elem, activation 1/elem, "
           "max-pool 1/elem-read, avg-pool 1/elem; dropout, residual adds, padding "
           "and bias adds are free. Double the total if an op means multiply+add.";
}

struct CostRow {
    std::string name;
    std::string kind;
    long k = 0;
    long d = 0;
    long c_in = 0;
    long c_out = 0;
    long t_in = 0;
    long t_out = 0;
    long rf_contribution = 0;
    long params = 0;
    std::int64_t macs = 0;
};

struct CostReport {
    std::vector<CostRow> rows;
    long total_params = 0;
    std::int64_t total_macs = 0;
    long receptive_field = 0;
    long effective_receptive_field = 0;
    long input_length = 0;
};

inline long receptive_field(const std::vector<long>& kernels,
                            const std::vector<long>& dilations) {
    if (kernels.size() != dilations.size())
        throw ConfigError("receptive_field: kernel/dilation count mismatch");
    long rf = 1;
    for (std::size_t i = 0; i < kernels.size(); ++i)
        rf += (kernels[i] - 1) * dilations[i];
    return rf;
}

inline long receptive_field(const ModelConfig& c) {
    return receptive_field(c.kernels, c.dilations);
}

// Both convs of a level see the same dilation, so each level contributes twice.
inline long receptive_field(const GtcnConfig& c) {
    long rf = 1;
    for (long l = 0; l < c.levels; ++l)
        rf += 2 * (c.kernel - 1) * (1L << l);
    return rf;
}

// Pooling stretches how far back later kernels reach in input coordinates: a tap
// spacing of d after j pooling stages covers d * prod(1/r_j) original steps.
inline long effective_receptive_field(const ModelConfig& c) {
    double rf = 1.0;
    double scale = 1.0;
    for (std::size_t i = 0; i < c.kernels.size(); ++i) {
        rf += static_cast<double>((c.kernels[i] - 1) * c.dilations[i]) * scale;
        scale /= c.ratios[i];
    }
    return static_cast<long>(rf + 0.5);
}

namespace detail {

inline std::int64_t i64(long a) { return static_cast<std::int64_t>(a); }

// Per-sample cost of one block at input length t, mirroring the runtime stage
// lengths exactly: pad happens first, the mid conv consumes the padding, pooling
// (k=2, s=2) follows when r < 1.
inline CostRow block_cost(const BlockSpec& s, const std::string& name, long t) {
    CostRow row;
    row.name = name;
    row.kind = block_kind_name(s.kind);
    row.k = s.k;
    row.d = s.d;
    row.c_in = s.c_in;
    row.c_out = s.c_out;
    row.t_in = t;
    row.rf_contribution = (s.k - 1) * s.d;

    const long pad = (s.k - 1) * s.d;
    const long tp = t + pad;
    const long ce = s.expanded();
    std::int64_t conv = 0, bn = 0, act = 0, pool = 0;
    long params = 0;

    switch (s.kind) {
    case BlockKind::RCB:
        conv = i64(s.c_out) * s.c_in * s.k * t;
        bn = 2 * i64(s.c_out) * t;
        act = i64(s.c_out) * t;
        params = s.c_out * s.c_in * s.k + 2 * s.c_out;
        break;
    case BlockKind::LCB:
        conv = i64(ce) * s.c_in * tp + i64(ce) * s.k * t + i64(s.c_out) * ce * t;
        bn = 2 * (i64(ce) * tp + i64(ce) * t + i64(s.c_out) * t);
        act = i64(ce) * tp + i64(ce) * t + i64(s.c_out) * t;
        params = ce * s.c_in + ce * s.k + s.c_out * ce + 2 * (2 * ce + s.c_out);
        break;
    case BlockKind::STCB:
        conv = i64(ce) * s.c_in * tp + i64(ce) * (ce / s.group) * s.k * t +
               i64(s.c_out) * ce * t;
        bn = 2 * (i64(ce) * tp + i64(ce) * t + i64(s.c_out) * t);
        act = i64(ce) * tp + i64(ce) * t + i64(s.c_out) * t;
        params = ce * s.c_in + ce * (ce / s.group) * s.k + s.c_out * ce +
                 2 * (2 * ce + s.c_out);
        break;
    case BlockKind::GTCNLayer:
        row.rf_contribution = 2 * (s.k - 1) * s.d;
        conv = i64(s.c_out) * s.c_in * s.k * t + i64(s.c_out) * s.c_out * s.k * t;
        act = 2 * i64(s.c_out) * t;
        params = s.c_out * s.c_in * s.k + s.c_out + s.c_out * s.c_out * s.k + s.c_out;
        if (s.c_in != s.c_out) {
            conv += i64(s.c_out) * s.c_in * t;
            params += s.c_out * s.c_in + s.c_out;
        }
        break;
    }

    long t_out = t;
    if ((s.kind == BlockKind::RCB || s.kind == BlockKind::STCB) && s.r < 1.0) {
        t_out = (t - 2) / 2 + 1;
        pool = 2 * i64(s.c_out) * t_out;
    }
    row.t_out = t_out;
    row.macs = conv + bn + act + pool;
    row.params = params;
    return row;
}

inline CostRow head_cost(long c_in, long out, long t) {
    CostRow row;
    row.name = "head";
    row.kind = "head";
    row.c_in = c_in;
    row.c_out = out;
    row.t_in = t;
    row.t_out = 1;
    row.params = c_in * out + out;
    row.macs = i64(c_in) * t + i64(c_in) * out;
    return row;
}

}  // namespace detail

template <typename T>
CostReport analyze(const ModelT<T>& model, long input_length) {
    if (input_length < 1) throw RangeError("analyze: input_length must be >= 1");
    CostReport rep;
    rep.input_length = input_length;
    long t = input_length;
    const std::string stem = model.is_gtcn ? "layer" : "block";
    for (std::size_t i = 0; i < model.blocks.size(); ++i) {
        std::string name = stem + std::to_string(i + 1);
        rep.rows.push_back(detail::block_cost(model.blocks[i]->spec(), name, t));
        t = rep.rows.back().t_out;
    }
    rep.rows.push_back(detail::head_cost(model.head->in(), model.head->out(), t));
    for (const auto& r : rep.rows) {
        rep.total_params += r.params;
        rep.total_macs += r.macs;
    }
    if (model.is_gtcn) {
        rep.receptive_field = receptive_field(model.gtcn);
        rep.effective_receptive_field = rep.receptive_field;
    } else {
        rep.receptive_field = receptive_field(model.config);
        rep.effective_receptive_field = effective_receptive_field(model.config);
    }
    return rep;
}

template <typename T>
long count_params(ModelT<T>& model) {
    long n = 0;
    for (const Param<T>* p : model.params()) n += static_cast<long>(p->v.size());
    return n;
}

template <typename T>
std::int64_t count_macs(const ModelT<T>& model, long input_length) {
    return analyze(model, input_length).total_macs;
}

inline std::string format_count(std::int64_t v) {
    std::ostringstream os;
    if (v >= 1000000000) {
        os << std::fixed << std::setprecision(2)
           << static_cast<double>(v) / 1e9 << "G";
    } else if (v >= 1000000) {
        os << std::fixed << std::setprecision(2)
           << static_cast<double>(v) / 1e6 << "M";
    } else if (v >= 1000) {
        os << std::fixed << std::setprecision(2)
           << static_cast<double>(v) / 1e3 << "K";
    } else {
        os << v;
    }
    return os.str();
}

inline std::string text_report(const CostReport& rep) {
    std::ostringstream os;
    os << std::left << std::setw(9) << "layer" << std::setw(6) << "kind"
       << std::right << std::setw(4) << "k" << std::setw(4) << "d" << std::setw(6)
       << "c_in" << std::setw(7) << "c_out" << std::setw(8) << "t_in"
       << std::setw(8) << "t_out" << std::setw(5) << "rf" << std::setw(10)
       << "params" << std::setw(16) << "macs" << "\n";
    os << std::string(83, '-') << "\n";
    for (const auto& r : rep.rows) {
        os << std::left << std::setw(9) << r.name << std::setw(6) << r.kind
           << std::right << std::setw(4) << (r.k ? std::to_string(r.k) : "-")
           << std::setw(4) << (r.d ? std::to_string(r.d) : "-") << std::setw(6)
           << r.c_in << std::setw(7) << r.c_out << std::setw(8) << r.t_in
           << std::setw(8) << r.t_out << std::setw(5) << r.rf_contribution
           << std::setw(10) << r.params << std::setw(16) << r.macs << "\n";
    }
    os << std::string(83, '-') << "\n";
    os << "input length " << rep.input_length << ", receptive field "
       << rep.receptive_field << " (effective " << rep.effective_receptive_field
       << " with pooling)\n";
    os << "total params " << rep.total_params << " ("
       << format_count(rep.total_params) << "), total macs " << rep.total_macs
       << " (" << format_count(rep.total_macs) << ")\n";
    os << "convention: " << mac_convention() << "\n";
    return os.str();
}

inline nlohmann::json json_report(const CostReport& rep) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& r : rep.rows) {
        rows.push_back({{"name", r.name},
                        {"kind", r.kind},
                        {"kernel", r.k},
                        {"dilation", r.d},
                        {"c_in", r.c_in},
                        {"c_out", r.c_out},
                        {"t_in", r.t_in},
                        {"t_out", r.t_out},
                        {"rf_contribution", r.rf_contribution},
                        {"params", r.params},
                        {"macs", r.macs}});
    }
    return nlohmann::json{
        {"input_length", rep.input_length},
        {"receptive_field", rep.receptive_field},
        {"effective_receptive_field", rep.effective_receptive_field},
        {"total_params", rep.total_params},
        {"total_macs", rep.total_macs},
        {"total_macs_if_op_means_mult_plus_add", 2 * rep.total_macs},
        {"convention", mac_convention()},
        {"rows", rows}};
}

}  // namespace atcn
