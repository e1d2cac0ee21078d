#pragma once

#include <atcn/nn_ops.hpp>

#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace atcn {

enum class BlockKind { RCB, LCB, STCB, GTCNLayer };

inline const char* block_kind_name(BlockKind k) {
    switch (k) {
        case BlockKind::RCB: return "RCB";
        case BlockKind::LCB: return "LCB";
        case BlockKind::STCB: return "STCB";
        case BlockKind::GTCNLayer: return "GTCN";
    }
    return "?";
}

struct BlockSpec {
    BlockKind kind = BlockKind::RCB;
    long k = 1;
    long d = 1;
    long c_in = 1;
    long c_out = 1;
    double r = 1.0;  // 1 keeps length, 1/2 max-pools
    long group = 1;  // STCB mid-conv groups
    long alpha = 1;  // LCB/STCB expansion factor
    ActivationKind activation = ActivationKind::Swish;
    double dropout_rate = 0.0;
    PadMode pad_mode = PadMode::Symmetric;

    long expanded() const { return alpha * c_in; }
};

inline void check_block_spec(const BlockSpec& s) {
    if (s.k < 1 || s.d < 1 || s.c_in < 1 || s.c_out < 1)
        throw ConfigError("block dims must be >= 1");
    if (s.r != 1.0 && s.r != 0.5) throw ConfigError("block ratio must be 1 or 1/2");
    if (s.alpha < 1) throw ConfigError("expansion factor must be >= 1");
    if (s.kind == BlockKind::STCB && s.expanded() % s.group != 0)
        throw ConfigError("STCB expanded channels " + std::to_string(s.expanded()) +
                          " not divisible by group " + std::to_string(s.group));
}

// Named view of one state tensor (trainable parameter or running statistic)
// for optimizers and checkpointing. Traversal order is the format contract.
template <typename T>
struct StateRec {
    std::string name;
    std::vector<long> dims;
    std::vector<T>* data;
};

template <typename T>
struct BlockBase {
    virtual ~BlockBase() = default;
    virtual Tensor3T<T> forward(const Tensor3T<T>& x, Mode mode, Prng* rng) = 0;
    virtual Tensor3T<T> backward(const Tensor3T<T>& gy) = 0;
    virtual void collect_params(std::vector<Param<T>*>& out) = 0;
    virtual void collect_state(std::vector<StateRec<T>>& out) = 0;
    virtual const BlockSpec& spec() const = 0;
    virtual long t_out(long t_in) const = 0;
    // Worst distance of cached pre-activations to a kink; the gradient
    // checker redraws cases that land too close.
    virtual double kink_margin() const = 0;
};

namespace detail {

template <typename T>
inline void push_param_state(std::vector<StateRec<T>>& out, Param<T>& p) {
    out.push_back({p.name, p.dims, &p.v});
}

template <typename T>
inline void push_bn_state(std::vector<StateRec<T>>& out, BatchNorm1d<T>& bn) {
    push_param_state(out, bn.gamma);
    push_param_state(out, bn.beta);
    out.push_back({bn.name() + ".running_mean", {bn.channels()}, &bn.running_mean});
    out.push_back({bn.name() + ".running_var", {bn.channels()}, &bn.running_var});
}

}  // namespace detail

// Regular convolution block: pad -> conv(d) -> BN -> act -> dropout, with a
// k=2/s=2 max-pool appended when r = 1/2.
template <typename T>
class RcbBlock : public BlockBase<T> {
public:
    RcbBlock(const std::string& name, BlockSpec spec)
        : spec_(spec), pad_(make_pad(spec)),
          conv_(name + ".conv", spec.c_in, spec.c_out, spec.k, spec.d, 1, false),
          bn_(name + ".bn", spec.c_out), act_(spec.activation), drop_(spec.dropout_rate) {
        check_block_spec(spec_);
        if (spec_.kind != BlockKind::RCB) throw ConfigError("RcbBlock needs an RCB spec");
        if (spec_.r < 1.0) pool_.emplace(2, 2);
    }

    Tensor3T<T> forward(const Tensor3T<T>& x, Mode mode, Prng* rng) override {
        Tensor3T<T> h = pad_.forward(x);
        h = conv_.forward(h);
        h = bn_.forward(h, mode);
        h = act_.forward(h);
        h = drop_.forward(h, mode, rng);
        if (pool_) h = pool_->forward(h);
        return h;
    }

    Tensor3T<T> backward(const Tensor3T<T>& gy) override {
        Tensor3T<T> g = gy;
        if (pool_) g = pool_->backward(g);
        g = drop_.backward(g);
        g = act_.backward(g);
        g = bn_.backward(g);
        g = conv_.backward(g);
        return pad_.backward(g);
    }

    void collect_params(std::vector<Param<T>*>& out) override {
        out.push_back(&conv_.w);
        out.push_back(&bn_.gamma);
        out.push_back(&bn_.beta);
    }

    void collect_state(std::vector<StateRec<T>>& out) override {
        detail::push_param_state(out, conv_.w);
        detail::push_bn_state(out, bn_);
    }

    const BlockSpec& spec() const override { return spec_; }

    long t_out(long t_in) const override { return pool_ ? (t_in - 2) / 2 + 1 : t_in; }

    double kink_margin() const override {
        double m = act_.kink_margin();
        if (pool_) m = std::min(m, pool_->kink_margin());
        return m;
    }

private:
    static Pad1d<T> make_pad(const BlockSpec& s) {
        auto [l, r] = same_pad_split(s.k, s.d, s.pad_mode);
        return Pad1d<T>(l, r);
    }

    BlockSpec spec_;
    Pad1d<T> pad_;
    Conv1d<T> conv_;
    BatchNorm1d<T> bn_;
    Activation<T> act_;
    Dropout<T> drop_;
    std::optional<MaxPool1d<T>> pool_;
};

// Linear (depthwise-separable) block: pad -> pointwise expansion -> BN -> act
// -> depthwise conv(d) -> BN -> act -> pointwise projection -> BN -> act ->
// dropout, plus the identity skip exactly when c_in == c_out.
template <typename T>
class LcbBlock : public BlockBase<T> {
public:
    LcbBlock(const std::string& name, BlockSpec spec)
        : spec_(spec), pad_(make_pad(spec)),
          pw1_(name + ".expand", spec.c_in, spec.expanded(), 1, 1, 1, false),
          bn1_(name + ".bn1", spec.expanded()), act1_(spec.activation),
          dw_(name + ".dw", spec.expanded(), spec.expanded(), spec.k, spec.d, spec.expanded(),
              false),
          bn2_(name + ".bn2", spec.expanded()), act2_(spec.activation),
          pw2_(name + ".project", spec.expanded(), spec.c_out, 1, 1, 1, false),
          bn3_(name + ".bn3", spec.c_out), act3_(spec.activation), drop_(spec.dropout_rate),
          residual_(spec.c_in == spec.c_out) {
        check_block_spec(spec_);
        if (spec_.kind != BlockKind::LCB) throw ConfigError("LcbBlock needs an LCB spec");
        if (spec_.r != 1.0) throw ConfigError("LCB keeps sequence length (r must be 1)");
    }

    Tensor3T<T> forward(const Tensor3T<T>& x, Mode mode, Prng* rng) override {
        Tensor3T<T> h = pad_.forward(x);
        h = pw1_.forward(h);
        h = bn1_.forward(h, mode);
        h = act1_.forward(h);
        h = dw_.forward(h);
        h = bn2_.forward(h, mode);
        h = act2_.forward(h);
        h = pw2_.forward(h);
        h = bn3_.forward(h, mode);
        h = act3_.forward(h);
        h = drop_.forward(h, mode, rng);
        if (residual_) h = elementwise(h, x, Elementwise::Add);
        return h;
    }

    Tensor3T<T> backward(const Tensor3T<T>& gy) override {
        Tensor3T<T> g = drop_.backward(gy);
        g = act3_.backward(g);
        g = bn3_.backward(g);
        g = pw2_.backward(g);
        g = act2_.backward(g);
        g = bn2_.backward(g);
        g = dw_.backward(g);
        g = act1_.backward(g);
        g = bn1_.backward(g);
        g = pw1_.backward(g);
        g = pad_.backward(g);
        if (residual_) g = elementwise(g, gy, Elementwise::Add);
        return g;
    }

    void collect_params(std::vector<Param<T>*>& out) override {
        out.push_back(&pw1_.w);
        out.push_back(&bn1_.gamma);
        out.push_back(&bn1_.beta);
        out.push_back(&dw_.w);
        out.push_back(&bn2_.gamma);
        out.push_back(&bn2_.beta);
        out.push_back(&pw2_.w);
        out.push_back(&bn3_.gamma);
        out.push_back(&bn3_.beta);
    }

    void collect_state(std::vector<StateRec<T>>& out) override {
        detail::push_param_state(out, pw1_.w);
        detail::push_bn_state(out, bn1_);
        detail::push_param_state(out, dw_.w);
        detail::push_bn_state(out, bn2_);
        detail::push_param_state(out, pw2_.w);
        detail::push_bn_state(out, bn3_);
    }

    const BlockSpec& spec() const override { return spec_; }

    long t_out(long t_in) const override { return t_in; }

    double kink_margin() const override {
        return std::min({act1_.kink_margin(), act2_.kink_margin(), act3_.kink_margin()});
    }

    Conv1d<T>& depthwise_stage() { return dw_; }

private:
    static Pad1d<T> make_pad(const BlockSpec& s) {
        auto [l, r] = same_pad_split(s.k, s.d, s.pad_mode);
        return Pad1d<T>(l, r);
    }

    BlockSpec spec_;
    Pad1d<T> pad_;
    Conv1d<T> pw1_;
    BatchNorm1d<T> bn1_;
    Activation<T> act1_;
    Conv1d<T> dw_;
    BatchNorm1d<T> bn2_;
    Activation<T> act2_;
    Conv1d<T> pw2_;
    BatchNorm1d<T> bn3_;
    Activation<T> act3_;
    Dropout<T> drop_;
    bool residual_;
};

// Spectral-temporal block: like LCB but the middle stage is a group
// convolution, never residual, and r = 1/2 appends a max-pool.
template <typename T>
class StcbBlock : public BlockBase<T> {
public:
    StcbBlock(const std::string& name, BlockSpec spec)
        : spec_(spec), pad_(make_pad(spec)),
          pw1_(name + ".expand", spec.c_in, spec.expanded(), 1, 1, 1, false),
          bn1_(name + ".bn1", spec.expanded()), act1_(spec.activation),
          gconv_(name + ".gconv", spec.expanded(), spec.expanded(), spec.k, spec.d, spec.group,
                 false),
          bn2_(name + ".bn2", spec.expanded()), act2_(spec.activation),
          pw2_(name + ".project", spec.expanded(), spec.c_out, 1, 1, 1, false),
          bn3_(name + ".bn3", spec.c_out), act3_(spec.activation), drop_(spec.dropout_rate) {
        check_block_spec(spec_);
        if (spec_.kind != BlockKind::STCB) throw ConfigError("StcbBlock needs an STCB spec");
        if (spec_.r < 1.0) pool_.emplace(2, 2);
    }

    Tensor3T<T> forward(const Tensor3T<T>& x, Mode mode, Prng* rng) override {
        Tensor3T<T> h = pad_.forward(x);
        h = pw1_.forward(h);
        h = bn1_.forward(h, mode);
        h = act1_.forward(h);
        h = gconv_.forward(h);
        h = bn2_.forward(h, mode);
        h = act2_.forward(h);
        h = pw2_.forward(h);
        h = bn3_.forward(h, mode);
        h = act3_.forward(h);
        h = drop_.forward(h, mode, rng);
        if (pool_) h = pool_->forward(h);
        return h;
    }

    Tensor3T<T> backward(const Tensor3T<T>& gy) override {
        Tensor3T<T> g = gy;
        if (pool_) g = pool_->backward(g);
        g = drop_.backward(g);
        g = act3_.backward(g);
        g = bn3_.backward(g);
        g = pw2_.backward(g);
        g = act2_.backward(g);
        g = bn2_.backward(g);
        g = gconv_.backward(g);
        g = act1_.backward(g);
        g = bn1_.backward(g);
        g = pw1_.backward(g);
        return pad_.backward(g);
    }

    void collect_params(std::vector<Param<T>*>& out) override {
        out.push_back(&pw1_.w);
        out.push_back(&bn1_.gamma);
        out.push_back(&bn1_.beta);
        out.push_back(&gconv_.w);
        out.push_back(&bn2_.gamma);
        out.push_back(&bn2_.beta);
        out.push_back(&pw2_.w);
        out.push_back(&bn3_.gamma);
        out.push_back(&bn3_.beta);
    }

    void collect_state(std::vector<StateRec<T>>& out) override {
        detail::push_param_state(out, pw1_.w);
        detail::push_bn_state(out, bn1_);
        detail::push_param_state(out, gconv_.w);
        detail::push_bn_state(out, bn2_);
        detail::push_param_state(out, pw2_.w);
        detail::push_bn_state(out, bn3_);
    }

    const BlockSpec& spec() const override { return spec_; }

    long t_out(long t_in) const override { return pool_ ? (t_in - 2) / 2 + 1 : t_in; }

    double kink_margin() const override {
        double m = std::min({act1_.kink_margin(), act2_.kink_margin(), act3_.kink_margin()});
        if (pool_) m = std::min(m, pool_->kink_margin());
        return m;
    }

    Conv1d<T>& group_stage() { return gconv_; }

private:
    static Pad1d<T> make_pad(const BlockSpec& s) {
        auto [l, r] = same_pad_split(s.k, s.d, s.pad_mode);
        return Pad1d<T>(l, r);
    }

    BlockSpec spec_;
    Pad1d<T> pad_;
    Conv1d<T> pw1_;
    BatchNorm1d<T> bn1_;
    Activation<T> act1_;
    Conv1d<T> gconv_;
    BatchNorm1d<T> bn2_;
    Activation<T> act2_;
    Conv1d<T> pw2_;
    BatchNorm1d<T> bn3_;
    Activation<T> act3_;
    Dropout<T> drop_;
    std::optional<MaxPool1d<T>> pool_;
};

// Generic-TCN residual layer: two same-length dilated convolutions (with
// bias, no batch norm) each followed by the activation, a dropout, and a
// residual add whose skip goes through a pointwise conv when channel counts
// differ. Nothing follows the add.
template <typename T>
class GtcnLayer : public BlockBase<T> {
public:
    GtcnLayer(const std::string& name, BlockSpec spec)
        : spec_(spec), pad1_(make_pad(spec)), pad2_(make_pad(spec)),
          conv1_(name + ".conv1", spec.c_in, spec.c_out, spec.k, spec.d, 1, true),
          act1_(spec.activation),
          conv2_(name + ".conv2", spec.c_out, spec.c_out, spec.k, spec.d, 1, true),
          act2_(spec.activation), drop_(spec.dropout_rate) {
        check_block_spec(spec_);
        if (spec_.kind != BlockKind::GTCNLayer) throw ConfigError("GtcnLayer needs a GTCN spec");
        if (spec_.r != 1.0) throw ConfigError("GTCN layers keep sequence length");
        if (spec_.c_in != spec_.c_out)
            skip_.emplace(name + ".skip", spec.c_in, spec.c_out, 1, 1, 1, true);
    }

    Tensor3T<T> forward(const Tensor3T<T>& x, Mode mode, Prng* rng) override {
        Tensor3T<T> h = pad1_.forward(x);
        h = conv1_.forward(h);
        h = act1_.forward(h);
        h = pad2_.forward(h);
        h = conv2_.forward(h);
        h = act2_.forward(h);
        h = drop_.forward(h, mode, rng);
        Tensor3T<T> s = skip_ ? skip_->forward(x) : x;
        return elementwise(h, s, Elementwise::Add);
    }

    Tensor3T<T> backward(const Tensor3T<T>& gy) override {
        Tensor3T<T> g = drop_.backward(gy);
        g = act2_.backward(g);
        g = conv2_.backward(g);
        g = pad2_.backward(g);
        g = act1_.backward(g);
        g = conv1_.backward(g);
        g = pad1_.backward(g);
        Tensor3T<T> gs = skip_ ? skip_->backward(gy) : gy;
        return elementwise(g, gs, Elementwise::Add);
    }

    void collect_params(std::vector<Param<T>*>& out) override {
        out.push_back(&conv1_.w);
        out.push_back(&conv1_.b);
        out.push_back(&conv2_.w);
        out.push_back(&conv2_.b);
        if (skip_) {
            out.push_back(&skip_->w);
            out.push_back(&skip_->b);
        }
    }

    void collect_state(std::vector<StateRec<T>>& out) override {
        detail::push_param_state(out, conv1_.w);
        detail::push_param_state(out, conv1_.b);
        detail::push_param_state(out, conv2_.w);
        detail::push_param_state(out, conv2_.b);
        if (skip_) {
            detail::push_param_state(out, skip_->w);
            detail::push_param_state(out, skip_->b);
        }
    }

    const BlockSpec& spec() const override { return spec_; }

    long t_out(long t_in) const override { return t_in; }

    double kink_margin() const override {
        return std::min(act1_.kink_margin(), act2_.kink_margin());
    }

private:
    static Pad1d<T> make_pad(const BlockSpec& s) {
        auto [l, r] = same_pad_split(s.k, s.d, s.pad_mode);
        return Pad1d<T>(l, r);
    }

    BlockSpec spec_;
    Pad1d<T> pad1_, pad2_;
    Conv1d<T> conv1_;
    Activation<T> act1_;
    Conv1d<T> conv2_;
    Activation<T> act2_;
    Dropout<T> drop_;
    std::optional<Conv1d<T>> skip_;
};

// Output head: adaptive average pool to t=1, flatten, linear map (with bias).
template <typename T>
class Head {
public:
    Head(const std::string& name, long c_in, long out)
        : c_in_(c_in), linear_(name + ".linear", c_in, out) {}

    Tensor3T<T> forward(const Tensor3T<T>& x) {
        if (x.c != c_in_)
            throw ShapeError("head: expected " + std::to_string(c_in_) + " channels, got " +
                             std::to_string(x.c));
        return linear_.forward(pool_.forward(x));
    }

    Tensor3T<T> backward(const Tensor3T<T>& gy) { return pool_.backward(linear_.backward(gy)); }

    void collect_params(std::vector<Param<T>*>& out) {
        out.push_back(&linear_.w);
        out.push_back(&linear_.b);
    }

    void collect_state(std::vector<StateRec<T>>& out) {
        detail::push_param_state(out, linear_.w);
        detail::push_param_state(out, linear_.b);
    }

    long in() const { return c_in_; }
    long out() const { return linear_.out(); }

private:
    long c_in_;
    AdaptiveAvgPool1d<T> pool_;
    Linear<T> linear_;
};

template <typename T>
std::unique_ptr<BlockBase<T>> make_block(const std::string& name, const BlockSpec& spec) {
    switch (spec.kind) {
        case BlockKind::RCB: return std::make_unique<RcbBlock<T>>(name, spec);
        case BlockKind::LCB: return std::make_unique<LcbBlock<T>>(name, spec);
        case BlockKind::STCB: return std::make_unique<StcbBlock<T>>(name, spec);
        case BlockKind::GTCNLayer: return std::make_unique<GtcnLayer<T>>(name, spec);
    }
    throw ConfigError("unknown block kind");
}

}  // namespace atcn
