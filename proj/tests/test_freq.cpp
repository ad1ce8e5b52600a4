#include <doctest.h>

#include <cmath>

#include "breathnet/errors.hpp"
#include "breathnet/events.hpp"
#include "breathnet/freq.hpp"
#include "breathnet/rng.hpp"
#include "oracles.hpp"

using namespace breathnet;

namespace {

// Kernel taps as the library's trainable op builds them, read back by
// convolving shifted unit impulses.
std::vector<double> extract_kernel(double f_low, double band, int taps, double sr) {
    std::vector<double> probe(static_cast<std::size_t>(2 * taps), 0.0);
    std::vector<double> kernel(static_cast<std::size_t>(taps));
    for (int i = 0; i < taps; ++i) {
        std::fill(probe.begin(), probe.end(), 0.0);
        probe[static_cast<std::size_t>(i)] = 1.0;
        Tape tt;
        Var m = tt.sinc_conv(probe, tt.constant(Tensor::row({f_low})), tt.constant(Tensor::row({band})),
                             SincConvSpec{taps, 1, sr});
        kernel[static_cast<std::size_t>(i)] = tt.val(m).at(0, 0);
    }
    return kernel;
}

std::vector<double> tone(double freq, int n, double sr) {
    std::vector<double> x(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) x[static_cast<std::size_t>(i)] = std::sin(2.0 * 3.14159265358979323846 * freq * i / sr);
    return x;
}

}  // namespace

TEST_CASE("pre_emphasis") {
    Waveform w;
    w.samples = {1.0, 2.0, 3.0};
    SUBCASE("c = 0 is the identity") {
        CHECK(pre_emphasis(w, 0.0).samples == w.samples);
    }
    SUBCASE("constant signal differences to zero") {
        Waveform ones;
        ones.samples = {1.0, 1.0, 1.0, 1.0};
        const Waveform out = pre_emphasis(ones, 1.0);
        CHECK(out.samples[0] == 1.0);
        for (std::size_t i = 1; i < out.samples.size(); ++i) CHECK(out.samples[i] == 0.0);
    }
    SUBCASE("direct recurrence") {
        const Waveform out = pre_emphasis(w, 0.97);
        CHECK(out.samples[0] == doctest::Approx(1.0));
        CHECK(out.samples[1] == doctest::Approx(1.03));
        CHECK(out.samples[2] == doctest::Approx(1.06));
    }
    SUBCASE("coefficient outside [0,1] rejected") {
        CHECK_THROWS_AS(pre_emphasis(w, 1.5), config_error);
    }
}

TEST_CASE("sinc filterbank frequency response (DFT oracle)") {
    const double sr = 16000.0;
    SUBCASE("passband beats stopband by at least 20 dB") {
        const auto kernel = extract_kernel(1000.0, 1000.0, 129, sr);  // band [1000, 2000]
        const double pass = oracle::dft_magnitude(kernel, 1500.0, sr);
        const double stop = oracle::dft_magnitude(kernel, 4000.0, sr);
        CHECK(20.0 * std::log10(pass / stop) >= 20.0);
    }
    SUBCASE("signal-level tone separation >= 10x RMS") {
        Tape t;
        Var fl = t.constant(Tensor::row({1000.0}));
        Var bw = t.constant(Tensor::row({1000.0}));
        const SincConvSpec spec{129, 1, sr};
        const Tensor in_band = t.val(t.sinc_conv(tone(1500.0, 2000, sr), fl, bw, spec));
        const Tensor out_band = t.val(t.sinc_conv(tone(4000.0, 2000, sr), fl, bw, spec));
        CHECK(oracle::rms(in_band.data()) / oracle::rms(out_band.data()) >= 10.0);
    }
    SUBCASE("(0, Nyquist) filter passes the signal through") {
        Rng rng(8);
        std::vector<double> x(600);
        for (double& v : x) v = rng.uniform(-0.5, 0.5);
        Tape t;
        const Tensor y = t.val(t.sinc_conv(x, t.constant(Tensor::row({0.0})), t.constant(Tensor::row({sr / 2.0})),
                                           SincConvSpec{65, 1, sr}));
        // output t' aligns with input t'+32 (kernel center); correlate
        double num = 0.0, da = 0.0, db = 0.0;
        for (int i = 0; i < y.cols(); ++i) {
            const double a = y.at(0, i), b = x[static_cast<std::size_t>(i + 32)];
            num += a * b;
            da += a * a;
            db += b * b;
        }
        CHECK(num / std::sqrt(da * db) > 0.99);
    }
}

TEST_CASE("cutoff ordering holds after simulated optimizer steps") {
    Tensor f_low, band;
    init_sinc_cutoffs_mel(f_low, band, 8, 16000.0);
    for (int i = 0; i < 8; ++i) {
        CHECK(f_low.at(0, i) >= 0.0);
        CHECK(band.at(0, i) > 0.0);
        CHECK(f_low.at(0, i) + band.at(0, i) <= 8000.0 + 1e-9);
    }
    Rng rng(51);
    long clamps_before = EventLog::instance().count("sinc_cutoff_clamp");
    for (int step = 0; step < 200; ++step) {
        for (int i = 0; i < 8; ++i) {
            f_low.at(0, i) += rng.uniform(-300.0, 300.0);
            band.at(0, i) += rng.uniform(-300.0, 300.0);
        }
        project_sinc_cutoffs(f_low, band, 16000.0);
        for (int i = 0; i < 8; ++i) {
            CHECK(f_low.at(0, i) >= 0.0);
            CHECK(f_low.at(0, i) < f_low.at(0, i) + band.at(0, i));
            CHECK(f_low.at(0, i) + band.at(0, i) <= 8000.0 + 1e-9);
        }
    }
    CHECK(EventLog::instance().count("sinc_cutoff_clamp") >= clamps_before);
}

TEST_CASE("dfim_pool_project") {
    SUBCASE("monotone rows pool to their last element") {
        Tape t;
        Tensor map(2, 8);
        for (int c = 0; c < 8; ++c) {
            map.at(0, c) = c;
            map.at(1, c) = 2 * c;
        }
        const Tensor pooled = t.val(t.adaptive_maxpool_cols(t.constant(map), 4));
        CHECK(pooled.at(0, 3) == 7.0);
        CHECK(pooled.at(1, 0) == 2.0);  // last element of bin {0,1}
    }
    SUBCASE("too-short filter map is a data error") {
        Tape t;
        FreqConfig cfg;
        cfg.filters = 2;
        cfg.out_steps = 32;
        cfg.dim = 3;
        BatchNormState st(2);
        FreqVars vars;
        vars.bn_gamma = t.constant(Tensor::full(1, 2, 1.0));
        vars.bn_beta = t.constant(Tensor(1, 2));
        vars.proj_w = t.constant(Tensor(2, 3));
        vars.proj_b = t.constant(Tensor(1, 3));
        CHECK_THROWS_AS(dfim_pool_project(t, t.constant(Tensor(2, 16)), cfg, vars, st, true), data_error);
    }
    SUBCASE("full branch shape contract: 32 x D") {
        Rng rng(5);
        Waveform w;
        w.samples.resize(64600);
        for (double& s : w.samples) s = rng.uniform(-0.5, 0.5);
        Tape t;
        FreqConfig cfg;  // desk defaults: F=16, K=65, stride 160, D=64
        Tensor f_low, band;
        init_sinc_cutoffs_mel(f_low, band, cfg.filters, cfg.sample_rate);
        BatchNormState st(cfg.filters);
        FreqVars vars;
        vars.f_low_hz = t.constant(f_low);
        vars.band_hz = t.constant(band);
        vars.bn_gamma = t.constant(Tensor::full(1, cfg.filters, 1.0));
        vars.bn_beta = t.constant(Tensor(1, cfg.filters));
        Tensor pw(cfg.filters, cfg.dim);
        for (std::int64_t i = 0; i < pw.size(); ++i) pw[i] = rng.uniform(-0.2, 0.2);
        vars.proj_w = t.constant(pw);
        vars.proj_b = t.constant(Tensor(1, cfg.dim));
        Var out = freq_branch(t, w, cfg, vars, st, true);
        CHECK(t.val(out).rows() == 32);
        CHECK(t.val(out).cols() == 64);
        CHECK(t.val(out).all_finite());
    }
}
