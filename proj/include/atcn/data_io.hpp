#pragma once

#include <atcn/builder.hpp>

#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

namespace atcn {

struct MnistSet {
    Tensor3 images;  // (count, 1, rows*cols), pixels scaled to [0, 1]
    std::vector<long> labels;
};

struct MinMax {
    double lo = 0.0;
    double hi = 1.0;
};

struct SeriesWindowSet {
    Tensor3 inputs{1, 1, 0};   // (count, 1, in_len)
    Tensor3 targets{1, 1, 0};  // (count, out_len, 1)
    MinMax norm;               // units of the source series, for denormalizing

    long count() const { return inputs.t == 0 ? 0 : inputs.n; }
};

namespace detail {

inline std::vector<unsigned char> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path);
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                     std::istreambuf_iterator<char>());
    return bytes;
}

inline std::uint32_t read_u32be(const std::vector<unsigned char>& b, std::size_t at) {
    return (std::uint32_t(b[at]) << 24) | (std::uint32_t(b[at + 1]) << 16) |
           (std::uint32_t(b[at + 2]) << 8) | std::uint32_t(b[at + 3]);
}

}  // namespace detail

// IDX pair loader. Big-endian magics 2051 (images) and 2049 (labels), exact
// byte counts enforced, pixels scaled by 1/255, images flattened row-major.
inline MnistSet load_mnist_idx(const std::string& images_path, const std::string& labels_path) {
    std::vector<unsigned char> img = detail::read_file(images_path);
    if (img.size() < 16) throw DataError(images_path + ": truncated IDX header");
    std::uint32_t magic = detail::read_u32be(img, 0);
    if (magic != 2051)
        throw DataError(images_path + ": bad magic " + std::to_string(magic) +
                        " (want 2051 for images)");
    long count = long(detail::read_u32be(img, 4));
    long rows = long(detail::read_u32be(img, 8));
    long cols = long(detail::read_u32be(img, 12));
    if (count < 1 || rows < 1 || cols < 1)
        throw DataError(images_path + ": bad IDX dimensions");
    std::size_t want = 16 + std::size_t(count) * rows * cols;
    if (img.size() != want)
        throw DataError(images_path + ": expected " + std::to_string(want) + " bytes, got " +
                        std::to_string(img.size()));

    std::vector<unsigned char> lab = detail::read_file(labels_path);
    if (lab.size() < 8) throw DataError(labels_path + ": truncated IDX header");
    std::uint32_t lmagic = detail::read_u32be(lab, 0);
    if (lmagic != 2049)
        throw DataError(labels_path + ": bad magic " + std::to_string(lmagic) +
                        " (want 2049 for labels)");
    long lcount = long(detail::read_u32be(lab, 4));
    if (lcount != count)
        throw DataError("count mismatch: " + std::to_string(count) + " images vs " +
                        std::to_string(lcount) + " labels");
    if (lab.size() != 8 + std::size_t(lcount))
        throw DataError(labels_path + ": expected " + std::to_string(8 + lcount) +
                        " bytes, got " + std::to_string(lab.size()));

    MnistSet set;
    set.images = Tensor3(count, 1, rows * cols);
    set.labels.resize(std::size_t(count));
    for (long i = 0; i < count; ++i) {
        const unsigned char* px = img.data() + 16 + std::size_t(i) * rows * cols;
        float* row = set.images.row(i, 0);
        for (long p = 0; p < rows * cols; ++p) row[p] = float(px[p]) / 255.0f;
        set.labels[std::size_t(i)] = long(lab[8 + std::size_t(i)]);
    }
    return set;
}

// Two-column CSV: required header row, then "time,value" rows; returns the
// value column. Decimal points, UTF-8, no quoting.
inline std::vector<double> load_series_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw DataError(path + ": empty file (header required)");
    std::vector<double> values;
    long lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::size_t comma = line.find(',');
        if (comma == std::string::npos)
            throw DataError(path + ":" + std::to_string(lineno) + ": expected time,value");
        try {
            std::size_t used = 0;
            std::string field = line.substr(comma + 1);
            double v = std::stod(field, &used);
            while (used < field.size() &&
                   (field[used] == ' ' || field[used] == '\r' || field[used] == '\t'))
                ++used;
            if (used != field.size())
                throw DataError(path + ":" + std::to_string(lineno) + ": trailing junk in value");
            std::stod(line.substr(0, comma));  // time column must parse too
            values.push_back(v);
        } catch (const DataError&) {
            throw;
        } catch (const std::exception&) {
            throw DataError(path + ":" + std::to_string(lineno) + ": cannot parse number");
        }
    }
    if (values.empty()) throw DataError(path + ": no data rows");
    return values;
}

// Affine map sending min to -1 and max to +1.
inline std::pair<std::vector<double>, MinMax> normalize_minmax(const std::vector<double>& series) {
    if (series.empty()) throw DataError("normalize: empty series");
    MinMax mm{series[0], series[0]};
    for (double v : series) {
        mm.lo = std::min(mm.lo, v);
        mm.hi = std::max(mm.hi, v);
    }
    if (!(mm.hi > mm.lo)) throw DataError("normalize: series range is degenerate");
    std::vector<double> out(series.size());
    double scale = 2.0 / (mm.hi - mm.lo);
    for (std::size_t i = 0; i < series.size(); ++i) out[i] = (series[i] - mm.lo) * scale - 1.0;
    return {std::move(out), mm};
}

inline double denormalize(double v, MinMax mm) {
    return (v + 1.0) * 0.5 * (mm.hi - mm.lo) + mm.lo;
}

inline std::vector<double> denormalize(const std::vector<double>& v, MinMax mm) {
    std::vector<double> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = denormalize(v[i], mm);
    return out;
}

// Sliding windows at offsets 0, stride, 2*stride, ...; each window pairs
// in_len inputs with the next out_len values.
inline SeriesWindowSet window_series(const std::vector<double>& series, long in_len, long out_len,
                                     long stride, MinMax norm = MinMax{-1.0, 1.0}) {
    if (in_len < 1 || out_len < 1) throw RangeError("window lengths must be >= 1");
    if (stride < 1) throw RangeError("stride must be >= 1");
    long len = long(series.size());
    long span = in_len + out_len;
    if (len < span)
        throw DataError("series length " + std::to_string(len) + " shorter than window span " +
                        std::to_string(span));
    long count = (len - span) / stride + 1;
    SeriesWindowSet set;
    set.inputs = Tensor3(count, 1, in_len);
    set.targets = Tensor3(count, out_len, 1);
    set.norm = norm;
    for (long w = 0; w < count; ++w) {
        long o = w * stride;
        for (long i = 0; i < in_len; ++i)
            set.inputs.at(w, 0, i) = float(series[std::size_t(o + i)]);
        for (long i = 0; i < out_len; ++i)
            set.targets.at(w, i, 0) = float(series[std::size_t(o + in_len + i)]);
    }
    return set;
}

// Each item is negated in full with probability prob.
inline Tensor3 augment_polarity(Tensor3 batch, Prng& rng, double prob) {
    if (prob < 0 || prob > 1) throw RangeError("polarity probability must be in [0, 1]");
    for (long i = 0; i < batch.n; ++i)
        if (rng.next_double() < prob)
            for (long c = 0; c < batch.c; ++c) {
                float* row = batch.row(i, c);
                for (long t = 0; t < batch.t; ++t) row[t] = -row[t];
            }
    return batch;
}

// Drift trajectories a*(e^{bt} - 1) + gaussian noise, one per device, with
// per-device a in [0.5, 2], b in [0.004, 0.012], and noise sigma set to
// [0.002, 0.005] of the final amplitude. noise_override >= 0 fixes the sigma
// fraction for every device (0 disables noise).
inline std::vector<std::vector<double>> gen_synthetic_degradation(Prng& rng, long devices,
                                                                  long length,
                                                                  double noise_override = -1.0) {
    if (devices < 2) throw RangeError("need at least 2 devices for a train/test split");
    if (length < 2) throw RangeError("series length must be >= 2");
    std::vector<std::vector<double>> out;
    out.reserve(std::size_t(devices));
    for (long dev = 0; dev < devices; ++dev) {
        double a = rng.uniform(0.5, 2.0);
        double b = rng.uniform(0.004, 0.012);
        double s = noise_override >= 0 ? noise_override : rng.uniform(0.002, 0.005);
        double sigma = s * a * std::expm1(b * double(length - 1));
        std::vector<double> series(std::size_t(length), 0.0);
        for (long t = 0; t < length; ++t)
            series[std::size_t(t)] = a * std::expm1(b * double(t)) + sigma * rng.gaussian();
        out.push_back(std::move(series));
    }
    return out;
}

namespace detail {

inline void put_u32le(std::string& out, std::uint32_t v) {
    out.push_back(char(v & 0xff));
    out.push_back(char((v >> 8) & 0xff));
    out.push_back(char((v >> 16) & 0xff));
    out.push_back(char((v >> 24) & 0xff));
}

inline void put_u16le(std::string& out, std::uint16_t v) {
    out.push_back(char(v & 0xff));
    out.push_back(char((v >> 8) & 0xff));
}

struct ByteReader {
    const unsigned char* p;
    std::size_t size;
    std::size_t at = 0;
    std::string where;

    void need(std::size_t n) {
        if (at + n > size) throw DataError(where + ": truncated checkpoint");
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = std::uint32_t(p[at]) | (std::uint32_t(p[at + 1]) << 8) |
                          (std::uint32_t(p[at + 2]) << 16) | (std::uint32_t(p[at + 3]) << 24);
        at += 4;
        return v;
    }
    std::uint16_t u16() {
        need(2);
        std::uint16_t v = std::uint16_t(p[at] | (p[at + 1] << 8));
        at += 2;
        return v;
    }
    std::uint8_t u8() {
        need(1);
        return p[at++];
    }
    std::string str(std::size_t n) {
        need(n);
        std::string s(reinterpret_cast<const char*>(p + at), n);
        at += n;
        return s;
    }
};

}  // namespace detail

constexpr std::uint32_t kCheckpointVersion = 1;

// Binary layout: "ATCN", u32 version, u32 JSON length, JSON header (config
// and seed), then one record per state entry: u16 name length + name,
// u8 rank, u32 per dim, raw little-endian f32 values. Running stats ride
// along with the parameters, so eval-mode forwards survive the round trip.
inline void save_checkpoint(Model& model, const std::string& path) {
    nlohmann::json header;
    header["format"] = "atcn-checkpoint";
    header["seed"] = model.seed;
    if (model.is_gtcn)
        header["gtcn_config"] = to_json(model.gtcn);
    else
        header["config"] = to_json(model.config);
    std::string json = header.dump();

    std::string out = "ATCN";
    detail::put_u32le(out, kCheckpointVersion);
    detail::put_u32le(out, std::uint32_t(json.size()));
    out += json;
    for (const StateRec<float>& rec : model.state()) {
        if (rec.name.size() > 0xffff) throw StateError("state name too long: " + rec.name);
        detail::put_u16le(out, std::uint16_t(rec.name.size()));
        out += rec.name;
        out.push_back(char(rec.dims.size()));
        long numel = 1;
        for (long d : rec.dims) {
            detail::put_u32le(out, std::uint32_t(d));
            numel *= d;
        }
        if (numel != long(rec.data->size()))
            throw StateError("state dims disagree with storage at " + rec.name);
        std::size_t base = out.size();
        out.resize(base + rec.data->size() * sizeof(float));
        std::memcpy(out.data() + base, rec.data->data(), rec.data->size() * sizeof(float));
    }

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw DataError("cannot write " + path);
    f.write(out.data(), long(out.size()));
    if (!f) throw DataError("short write to " + path);
}

inline Model load_checkpoint(const std::string& path) {
    std::vector<unsigned char> bytes = detail::read_file(path);
    detail::ByteReader r{bytes.data(), bytes.size(), 0, path};
    if (r.str(4) != "ATCN") throw DataError(path + ": not a checkpoint (bad magic)");
    std::uint32_t version = r.u32();
    if (version != kCheckpointVersion)
        throw DataError(path + ": unsupported checkpoint version " + std::to_string(version));
    std::uint32_t jlen = r.u32();
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(r.str(jlen));
    } catch (const nlohmann::json::exception& e) {
        throw DataError(path + ": bad checkpoint header: " + e.what());
    }
    if (!header.is_object() || header.value("format", "") != "atcn-checkpoint")
        throw DataError(path + ": bad checkpoint header format");

    std::uint64_t seed = header.value("seed", std::uint64_t(0));
    Model model;
    try {
        if (header.contains("config"))
            model = build_atcn(model_config_from_json(header["config"]), seed);
        else if (header.contains("gtcn_config"))
            model = build_gtcn(gtcn_config_from_json(header["gtcn_config"]), seed);
        else
            throw DataError(path + ": checkpoint header has no model config");
    } catch (const ConfigError& e) {
        throw DataError(path + ": checkpoint config rejected: " + e.what());
    }

    for (const StateRec<float>& rec : model.state()) {
        std::string name = r.str(r.u16());
        if (name != rec.name)
            throw DataError(path + ": state record '" + name + "' where '" + rec.name +
                            "' was expected");
        std::uint8_t rank = r.u8();
        if (rank != rec.dims.size())
            throw DataError(path + ": rank mismatch at " + rec.name);
        long numel = 1;
        for (std::uint8_t i = 0; i < rank; ++i) {
            long d = long(r.u32());
            if (d != rec.dims[i]) throw DataError(path + ": shape mismatch at " + rec.name);
            numel *= d;
        }
        r.need(std::size_t(numel) * sizeof(float));
        std::memcpy(rec.data->data(), r.p + r.at, std::size_t(numel) * sizeof(float));
        r.at += std::size_t(numel) * sizeof(float);
    }
    if (r.at != r.size) throw DataError(path + ": trailing bytes after last state record");
    return model;
}

}  // namespace atcn
