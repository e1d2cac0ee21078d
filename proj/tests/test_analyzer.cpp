#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <atcn/analyzer.hpp>

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

using namespace atcn;

namespace {

// Published cost targets the presets are calibrated against, with their
// acceptance bands (params 10% for mnist, 15% elsewhere; ops 15% everywhere).
struct Target {
    const char* name;
    long input_length;
    double params;
    double macs;
    double param_band;
};

const Target kTargets[] = {
    {"mnist", 784, 8470.0, 3.98e6, 0.10},
    {"ecg", 18000, 1.80e6, 14.70e9, 0.15},
    {"mosfet", 21, 7670.0, 103.5e3, 0.15},
};

std::int64_t measured_macs(Model& m, long t_in) {
    Prng rng(99);
    Tensor3 x = rand_uniform(rng, 1, m.is_gtcn ? m.gtcn.input_channels : m.config.input_channels,
                             t_in, -1.0f, 1.0f);
    MacCounter counter;
    {
        MacScope scope(counter);
        m.forward(x, Mode::Eval, nullptr);
    }
    return counter.total();
}

}  // namespace

TEST_CASE("receptive field follows kernel and dilation columns") {
    CHECK(receptive_field({25}, {1}) == 25);
    CHECK(receptive_field({3, 3}, {1, 2}) == 7);
    CHECK(receptive_field(preset("mnist")) == 169);
    CHECK(receptive_field(preset("mosfet")) == 35);
    CHECK(receptive_field(preset("ecg")) == 598);
    CHECK_THROWS_AS(receptive_field({3, 3}, {1}), ConfigError);
}

TEST_CASE("gtcn receptive field counts both convolutions per level") {
    GtcnConfig g;
    g.kernel = 2;
    g.levels = 1;
    CHECK(receptive_field(g) == 3);
    g.levels = 3;
    CHECK(receptive_field(g) == 15);
    g.levels = 4;
    g.kernel = 3;
    CHECK(receptive_field(g) == 61);
}

TEST_CASE("pooling widens the effective receptive field") {
    CHECK(effective_receptive_field(preset("mnist")) == 289);
    CHECK(effective_receptive_field(preset("ecg")) == 2292);
    // No pooling anywhere, so effective equals nominal.
    CHECK(effective_receptive_field(preset("mosfet")) == 35);
}

TEST_CASE("tiny model report matches the hand-computed ledger") {
    ModelConfig c;
    c.channels = {2, 3};
    c.kernels = {3, 3};
    c.dilations = {1, 2};
    c.ratios = {1, 0.5};
    c.output_size = 2;
    c.alpha = 2;
    Model m = build_atcn(c, 1);
    CostReport rep = analyze(m, 10);

    REQUIRE(rep.rows.size() == 3);
    const CostRow& b1 = rep.rows[0];
    CHECK(b1.name == "block1");
    CHECK(b1.kind == "RCB");
    CHECK(b1.t_in == 10);
    CHECK(b1.t_out == 10);
    CHECK(b1.rf_contribution == 2);
    CHECK(b1.params == 10);   // 2*1*3 weights + gamma/beta
    CHECK(b1.macs == 120);    // conv 60 + bn 40 + act 20

    const CostRow& b2 = rep.rows[1];
    CHECK(b2.kind == "STCB");
    CHECK(b2.t_out == 5);
    CHECK(b2.rf_contribution == 4);
    CHECK(b2.params == 66);   // pw 8 + group 24 + pw 12 + three bn pairs 22
    CHECK(b2.macs == 880);    // conv 472 + bn 252 + act 126 + pool 30

    const CostRow& h = rep.rows[2];
    CHECK(h.kind == "head");
    CHECK(h.t_in == 5);
    CHECK(h.params == 8);
    CHECK(h.macs == 21);      // avg 15 + linear 6

    CHECK(rep.total_params == 84);
    CHECK(rep.total_macs == 1021);
    CHECK(rep.receptive_field == 7);
    CHECK(rep.effective_receptive_field == 7);
    CHECK(rep.total_params == count_params(m));
    CHECK(rep.total_params == m.param_count());

    // The instrumented kernels agree multiply for multiply, and scale with batch.
    CHECK(measured_macs(m, 10) == rep.total_macs);
    Prng rng(5);
    Tensor3 x3 = rand_uniform(rng, 3, 1, 10, -1.0f, 1.0f);
    MacCounter counter;
    {
        MacScope scope(counter);
        m.forward(x3, Mode::Eval, nullptr);
    }
    CHECK(counter.total() == 3 * rep.total_macs);
}

TEST_CASE("preset cost tables") {
    Model mnist = build_atcn(preset("mnist"), 1);
    CostReport r = analyze(mnist, 784);
    CHECK(r.total_params == 8306);
    CHECK(r.total_macs == 3888384);
    CHECK(count_params(mnist) == 8306);
    CHECK(r.rows.size() == 8);
    CHECK(r.rows[3].t_out == 392);
    CHECK(r.rows[5].t_out == 196);
    CHECK(r.rows[7].t_in == 196);

    Model ecg = build_atcn(preset("ecg"), 1);
    CostReport e = analyze(ecg, 18000);
    CHECK(e.total_params == 1782211);
    CHECK(e.total_macs == 14514688832LL);
    CHECK(count_params(ecg) == 1782211);
    CHECK(e.rows[0].t_out == 9000);
    CHECK(e.rows[5].t_out == 4500);
    CHECK(e.rows[10].t_out == 2250);

    Model mosfet = build_atcn(preset("mosfet"), 1);
    CostReport f = analyze(mosfet, 21);
    CHECK(f.total_params == 7264);
    CHECK(f.total_macs == 100480);
    CHECK(count_params(mosfet) == 7264);
}

TEST_CASE("closed-form costs equal instrumented kernels on every preset") {
    Model mnist = build_atcn(preset("mnist"), 2);
    CHECK(measured_macs(mnist, 784) == analyze(mnist, 784).total_macs);

    Model mosfet = build_atcn(preset("mosfet"), 2);
    CHECK(measured_macs(mosfet, 21) == analyze(mosfet, 21).total_macs);

    // Full-length ecg is closed-form only; a short window exercises the same
    // stage formulas through all thirteen blocks.
    Model ecg = build_atcn(preset("ecg"), 2);
    CHECK(measured_macs(ecg, 72) == analyze(ecg, 72).total_macs);

    GtcnConfig g;
    g.levels = 3;
    g.hidden = 6;
    g.kernel = 2;
    g.output_size = 4;
    Model gt = build_gtcn(g, 2);
    CHECK(measured_macs(gt, 50) == analyze(gt, 50).total_macs);
}

TEST_CASE("gtcn rows report both convolutions and the pointwise skip") {
    GtcnConfig g;
    g.levels = 2;
    g.hidden = 5;
    g.kernel = 3;
    g.output_size = 2;
    Model m = build_gtcn(g, 7);
    CostReport rep = analyze(m, 20);
    REQUIRE(rep.rows.size() == 3);
    CHECK(rep.rows[0].kind == "GTCN");
    CHECK(rep.rows[0].name == "layer1");
    CHECK(rep.rows[0].rf_contribution == 4);   // two k=3 convs at d=1
    CHECK(rep.rows[1].rf_contribution == 8);
    // layer1: conv 5*1*3*20 + 5*5*3*20 + skip 5*1*20, act 2*5*20.
    CHECK(rep.rows[0].macs == 300 + 1500 + 100 + 200);
    CHECK(rep.rows[0].params == 15 + 5 + 75 + 5 + 5 + 5);
    // layer2 has matching channels, so no skip parameters.
    CHECK(rep.rows[1].params == 75 + 5 + 75 + 5);
    CHECK(rep.receptive_field == 13);
    CHECK(rep.effective_receptive_field == 13);
    CHECK(rep.total_params == count_params(m));
}

TEST_CASE("alpha calibration pass lands on the recorded expansion factors") {
    // Score each candidate by its worst band-normalized error against the
    // published params (10% band) and ops (15% band); the preset must hold the
    // arg-min and sit inside both bands.
    for (const Target& tgt : kTargets) {
        ModelConfig base = preset(tgt.name);
        long best_alpha = 0;
        double best_score = 1e30;
        for (long alpha : {1L, 2L, 4L, 6L}) {
            ModelConfig c = base;
            c.alpha = alpha;
            Model m = build_atcn(c, 1);
            CostReport r = analyze(m, tgt.input_length);
            double dp = std::abs(double(r.total_params) - tgt.params) / tgt.params;
            double dm = std::abs(double(r.total_macs) - tgt.macs) / tgt.macs;
            double score = std::max(dp / tgt.param_band, dm / 0.15);
            if (score < best_score) {
                best_score = score;
                best_alpha = alpha;
            }
        }
        CHECK(best_alpha == base.alpha);
        CHECK(best_score <= 1.0);
    }
}

TEST_CASE("preset costs sit inside the reproduction bands") {
    for (const Target& tgt : kTargets) {
        Model m = build_atcn(preset(tgt.name), 1);
        CostReport r = analyze(m, tgt.input_length);
        double dp = std::abs(double(r.total_params) - tgt.params) / tgt.params;
        double dm = std::abs(double(r.total_macs) - tgt.macs) / tgt.macs;
        INFO(tgt.name << " params off by " << dp << ", macs off by " << dm);
        CHECK(dp <= tgt.param_band);
        CHECK(dm <= 0.15);
    }
}

TEST_CASE("count helpers and formatting") {
    Model m = build_atcn(preset("mosfet"), 3);
    CHECK(count_macs(m, 21) == 100480);
    CHECK_THROWS_AS(analyze(m, 0), RangeError);

    CHECK(format_count(21) == "21");
    CHECK(format_count(8306) == "8.31K");
    CHECK(format_count(100480) == "100.48K");
    CHECK(format_count(3888384) == "3.89M");
    CHECK(format_count(14514688832LL) == "14.51G");
}

TEST_CASE("reports carry the counting convention and both op readings") {
    Model m = build_atcn(preset("mosfet"), 3);
    CostReport rep = analyze(m, 21);

    std::string text = text_report(rep);
    CHECK(text.find("block1") != std::string::npos);
    CHECK(text.find("head") != std::string::npos);
    CHECK(text.find("convention:") != std::string::npos);
    CHECK(text.find("receptive field 35") != std::string::npos);
    CHECK(text.find("total params 7264") != std::string::npos);

    nlohmann::json j = json_report(rep);
    CHECK(j["total_params"] == 7264);
    CHECK(j["total_macs"] == 100480);
    CHECK(j["total_macs_if_op_means_mult_plus_add"] == 200960);
    CHECK(j["receptive_field"] == 35);
    CHECK(j["rows"].size() == 5);
    CHECK(j["rows"][0]["kind"] == "RCB");
    CHECK(j["convention"].is_string());
}
