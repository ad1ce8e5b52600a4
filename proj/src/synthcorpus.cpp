#include "breathnet/synthcorpus.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "breathnet/errors.hpp"
#include "breathnet/rng.hpp"

namespace breathnet {

namespace {

constexpr int kSampleRate = 16000;
constexpr double kPi = 3.14159265358979323846;
constexpr int kCombLag = 20;  // 800 Hz comb ripple period

struct Segment {
    double start_s;
    double end_s;
};

struct UtterancePlan {
    std::vector<Segment> phrases;
    std::vector<Segment> pauses;
    BreathIntervals breaths;
};

UtterancePlan plan_utterance(Rng& rng, double duration_s, bool with_breaths) {
    if (duration_s < 1.0) throw config_error("utterance duration must be >= 1 s");
    // Segment lengths shrink proportionally for clips shorter than the 4 s
    // nominal duration.
    const double unit = std::clamp(duration_s / 4.0, 0.3, 1.0);
    const double tail = duration_s - 0.03;

    UtterancePlan plan;
    const int phrase_target = rng.uniform_int(2, 4);
    const int breath_target = rng.uniform_int(1, 3);
    double t = rng.uniform(0.05, 0.12);
    for (int i = 0; i < phrase_target; ++i) {
        double d = rng.uniform(0.55, 0.95) * unit;
        if (t + d > tail) d = tail - t;
        if (d < 0.2 * unit) break;
        plan.phrases.push_back({t, t + d});
        t += d;
        if (i + 1 < phrase_target) {
            const double q = rng.uniform(0.42, 0.7) * unit;
            if (t + q > tail) break;
            plan.pauses.push_back({t, t + q});
            t += q;
        }
    }
    if (plan.phrases.empty()) throw numeric_error("utterance plan produced no phrases");

    if (with_breaths && !plan.pauses.empty()) {
        std::vector<int> order(plan.pauses.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
        for (std::size_t i = order.size(); i > 1; --i) {
            std::swap(order[i - 1], order[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(i) - 1))]);
        }
        const int breaths = std::min<int>(breath_target, static_cast<int>(plan.pauses.size()));
        for (int k = 0; k < breaths; ++k) {
            const Segment& p = plan.pauses[static_cast<std::size_t>(order[static_cast<std::size_t>(k)])];
            const double cap = (p.end_s - p.start_s) - 0.04;
            if (cap < 0.05) continue;
            const double len = std::min(rng.uniform(0.15, 0.40), cap);
            const double slack = cap - len;
            const double start = p.start_s + 0.02 + rng.uniform(0.0, 1.0) * slack;
            plan.breaths.push_back({start, start + len});
        }
        plan.breaths = normalize_intervals(std::move(plan.breaths));
    }
    return plan;
}

void render_phrase(std::vector<double>& out, const Segment& seg, Rng& rng) {
    const int a = static_cast<int>(std::lround(seg.start_s * kSampleRate));
    const int b = std::min<int>(static_cast<int>(std::lround(seg.end_s * kSampleRate)), static_cast<int>(out.size()));
    const int n = b - a;
    if (n <= 0) return;

    const double f0 = rng.uniform(100.0, 250.0);
    const double formants[3] = {rng.uniform(400.0, 800.0), rng.uniform(1000.0, 1800.0), rng.uniform(2200.0, 3000.0)};
    const double fbw[3] = {140.0, 220.0, 300.0};
    const double vib_rate = rng.uniform(4.0, 7.0);
    const double vib_phase = rng.uniform(0.0, 2.0 * kPi);
    const double target_peak = rng.uniform(0.22, 0.38);

    const int harmonics = std::min(70, static_cast<int>(7200.0 / f0));
    std::vector<double> amp(static_cast<std::size_t>(harmonics));
    double amp_sum = 0.0;
    for (int k = 1; k <= harmonics; ++k) {
        const double f = k * f0;
        double g = 0.03 + 0.3 / k;  // gentle source tilt, energy kept out to ~7 kHz
        for (int j = 0; j < 3; ++j) {
            const double d = (f - formants[j]) / fbw[j];
            g += std::exp(-d * d);
        }
        amp[static_cast<std::size_t>(k - 1)] = g;
        amp_sum += g;
    }
    const double norm = target_peak / amp_sum;

    const double ramp = std::min(0.05, n / (4.0 * kSampleRate));
    std::vector<double> phase(static_cast<std::size_t>(harmonics), 0.0);
    for (int i = 0; i < n; ++i) {
        const double ts = static_cast<double>(i) / kSampleRate;
        const double vibrato = 1.0 + 0.015 * std::sin(2.0 * kPi * vib_rate * ts + vib_phase);
        double s = 0.0;
        for (int k = 1; k <= harmonics; ++k) {
            double& ph = phase[static_cast<std::size_t>(k - 1)];
            ph += 2.0 * kPi * k * f0 * vibrato / kSampleRate;
            s += amp[static_cast<std::size_t>(k - 1)] * std::sin(ph);
        }
        double env = 1.0;
        const double edge = std::min(ts, (n - 1 - i) / static_cast<double>(kSampleRate));
        if (edge < ramp) env = 0.5 - 0.5 * std::cos(kPi * edge / ramp);
        out[static_cast<std::size_t>(a + i)] += norm * env * s;
    }
}

void render_breath(std::vector<double>& out, const BreathInterval& iv, Rng& rng) {
    const int a = static_cast<int>(std::lround(iv.start_s * kSampleRate));
    const int b = std::min<int>(static_cast<int>(std::lround(iv.end_s * kSampleRate)), static_cast<int>(out.size()));
    const int n = b - a;
    if (n <= 0) return;
    std::vector<double> noise(static_cast<std::size_t>(n));
    for (double& v : noise) v = rng.normal();
    noise = fir_apply_same(noise, fir_bandpass(500.0, 2000.0, 129, kSampleRate));
    double peak = 1e-12;
    for (double v : noise) peak = std::max(peak, std::abs(v));
    const double target = rng.uniform(0.28, 0.42) / peak;
    for (int i = 0; i < n; ++i) {
        const double env = 0.5 - 0.5 * std::cos(2.0 * kPi * i / std::max(1, n - 1));  // raised cosine
        out[static_cast<std::size_t>(a + i)] += target * env * noise[static_cast<std::size_t>(i)];
    }
}

Waveform render_utterance(std::uint64_t seed, double duration_s, bool with_breaths, BreathIntervals* intervals_out) {
    Rng rng(seed);
    UtterancePlan plan = plan_utterance(rng, duration_s, with_breaths);
    Waveform w;
    w.sample_rate = kSampleRate;
    w.samples.assign(static_cast<std::size_t>(std::lround(duration_s * kSampleRate)), 0.0);
    for (const Segment& p : plan.phrases) render_phrase(w.samples, p, rng);
    for (const BreathInterval& b : plan.breaths) render_breath(w.samples, b, rng);
    for (double& s : w.samples) s = std::clamp(s, -1.0, 1.0);
    if (intervals_out) *intervals_out = plan.breaths;
    return w;
}

void peak_limit(std::vector<double>& samples, double ceiling) {
    double peak = 0.0;
    for (double s : samples) peak = std::max(peak, std::abs(s));
    if (peak > ceiling) {
        const double k = ceiling / peak;
        for (double& s : samples) s *= k;
    }
}

}  // namespace

SpoofStyle parse_spoof_style(const std::string& s) {
    if (s == "no_breath") return SpoofStyle::no_breath;
    if (s == "comb_artifact") return SpoofStyle::comb_artifact;
    if (s == "lowpass") return SpoofStyle::lowpass;
    if (s == "breath_removed") return SpoofStyle::breath_removed;
    throw data_error("unknown spoof style '" + s + "'");
}

std::string spoof_style_name(SpoofStyle s) {
    switch (s) {
        case SpoofStyle::no_breath: return "no_breath";
        case SpoofStyle::comb_artifact: return "comb_artifact";
        case SpoofStyle::lowpass: return "lowpass";
        case SpoofStyle::breath_removed: return "breath_removed";
    }
    return "?";
}

std::pair<Waveform, BreathIntervals> gen_bonafide(std::uint64_t seed, double duration_s) {
    BreathIntervals iv;
    Waveform w = render_utterance(seed, duration_s, true, &iv);
    return {std::move(w), std::move(iv)};
}

Waveform gen_spoof(std::uint64_t seed, double duration_s, SpoofStyle style, BreathIntervals* intervals_out) {
    if (intervals_out) intervals_out->clear();
    switch (style) {
        case SpoofStyle::no_breath:
            return render_utterance(seed, duration_s, false, nullptr);
        case SpoofStyle::comb_artifact: {
            Waveform w = render_utterance(seed, duration_s, true, intervals_out);
            std::vector<double> y = w.samples;
            for (std::size_t n = kCombLag; n < y.size(); ++n) y[n] = w.samples[n] + 0.5 * w.samples[n - kCombLag];
            peak_limit(y, 0.95);
            w.samples = std::move(y);
            return w;
        }
        case SpoofStyle::lowpass: {
            Waveform w = render_utterance(seed, duration_s, true, intervals_out);
            w.samples = fir_apply_same(w.samples, fir_bandpass(0.0, 4000.0, 129, kSampleRate));
            peak_limit(w.samples, 0.95);
            return w;
        }
        case SpoofStyle::breath_removed: {
            BreathIntervals iv;
            Waveform w = render_utterance(seed, duration_s, true, &iv);
            const double ramp = 0.01;
            for (const BreathInterval& b : iv) {
                const int a = static_cast<int>(std::lround(b.start_s * kSampleRate));
                const int e = std::min<int>(static_cast<int>(std::lround(b.end_s * kSampleRate)), static_cast<int>(w.samples.size()));
                for (int i = a; i < e; ++i) {
                    const double ts = static_cast<double>(i - a) / kSampleRate;
                    const double te = static_cast<double>(e - 1 - i) / kSampleRate;
                    const double edge = std::min(ts, te);
                    // shaped silence: full suppression with short cosine edges
                    const double keep = edge < ramp ? 0.5 + 0.5 * std::cos(kPi * edge / ramp) : 0.0;
                    w.samples[static_cast<std::size_t>(i)] *= keep;
                }
            }
            return w;
        }
    }
    throw data_error("unknown spoof style");
}

// ---------------------------------------------------------------------------
// RawBoost-style augmentation
// ---------------------------------------------------------------------------

RawboostMode parse_rawboost_mode(const std::string& s) {
    if (s == "none") return RawboostMode::none;
    if (s == "convolutive") return RawboostMode::convolutive;
    if (s == "impulsive") return RawboostMode::impulsive;
    if (s == "stationary") return RawboostMode::stationary;
    if (s == "series") return RawboostMode::series;
    throw config_error("unknown rawboost mode '" + s + "'");
}

std::string rawboost_mode_name(RawboostMode m) {
    switch (m) {
        case RawboostMode::none: return "none";
        case RawboostMode::convolutive: return "convolutive";
        case RawboostMode::impulsive: return "impulsive";
        case RawboostMode::stationary: return "stationary";
        case RawboostMode::series: return "series";
    }
    return "?";
}

Waveform rawboost_convolutive(const Waveform& w, const std::vector<double>& taps) {
    validate_waveform(w, "rawboost_convolutive");
    if (taps.empty()) throw config_error("rawboost_convolutive: empty kernel");
    double energy = 0.0;
    for (double t : taps) energy += t * t;
    if (energy <= 0.0) throw config_error("rawboost_convolutive: zero-energy kernel");
    const double k = 1.0 / std::sqrt(energy);
    Waveform out;
    out.sample_rate = w.sample_rate;
    out.samples.assign(w.samples.size(), 0.0);
    for (std::size_t i = 0; i < w.samples.size(); ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < taps.size() && j <= i; ++j) acc += taps[j] * w.samples[i - j];
        out.samples[i] = std::clamp(acc * k, -1.0, 1.0);
    }
    return out;
}

Waveform rawboost_impulsive(const Waveform& w, std::uint64_t seed) {
    validate_waveform(w, "rawboost_impulsive");
    Rng rng(seed);
    Waveform out = w;
    const int n = static_cast<int>(w.samples.size());
    const int spikes = rng.uniform_int(5, 20);
    const int half_win = w.sample_rate / 80;  // 12.5 ms context
    for (int k = 0; k < spikes; ++k) {
        const int pos = rng.uniform_int(0, n - 1);
        double local = 0.0;
        int count = 0;
        for (int i = std::max(0, pos - half_win); i < std::min(n, pos + half_win); ++i) {
            local += w.samples[static_cast<std::size_t>(i)] * w.samples[static_cast<std::size_t>(i)];
            ++count;
        }
        local = std::sqrt(local / std::max(1, count));
        const double sign = w.samples[static_cast<std::size_t>(pos)] >= 0.0 ? 1.0 : -1.0;
        out.samples[static_cast<std::size_t>(pos)] =
            std::clamp(out.samples[static_cast<std::size_t>(pos)] + sign * rng.uniform(0.5, 2.0) * local, -1.0, 1.0);
    }
    return out;
}

Waveform rawboost_stationary(const Waveform& w, double snr_db, std::uint64_t seed) {
    validate_waveform(w, "rawboost_stationary");
    Rng rng(seed);
    const std::size_t n = w.samples.size();
    std::vector<double> noise(n);
    double noise_pow = 0.0, sig_pow = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        noise[i] = rng.normal();
        noise_pow += noise[i] * noise[i];
        sig_pow += w.samples[i] * w.samples[i];
    }
    if (sig_pow <= 0.0) return w;  // silence stays silence
    const double k = std::sqrt(sig_pow / (noise_pow * std::pow(10.0, snr_db / 10.0)));
    Waveform out = w;
    for (std::size_t i = 0; i < n; ++i) out.samples[i] = std::clamp(out.samples[i] + k * noise[i], -1.0, 1.0);
    return out;
}

Waveform rawboost_lite(const Waveform& w, RawboostMode mode, std::uint64_t seed) {
    switch (mode) {
        case RawboostMode::none:
            return w;
        case RawboostMode::convolutive: {
            Rng rng(derive_seed(seed, 11));
            const int taps = rng.uniform_int(5, 15);
            std::vector<double> h(static_cast<std::size_t>(taps));
            h[0] = 1.0;
            for (int i = 1; i < taps; ++i) h[static_cast<std::size_t>(i)] = rng.uniform(-1.0, 1.0) * std::exp(-i / 4.0);
            return rawboost_convolutive(w, h);
        }
        case RawboostMode::impulsive:
            return rawboost_impulsive(w, derive_seed(seed, 12));
        case RawboostMode::stationary: {
            Rng rng(derive_seed(seed, 13));
            const double snr = rng.uniform(10.0, 40.0);
            return rawboost_stationary(w, snr, derive_seed(seed, 14));
        }
        case RawboostMode::series: {
            Waveform a = rawboost_lite(w, RawboostMode::convolutive, seed);
            Waveform b = rawboost_lite(a, RawboostMode::impulsive, seed);
            return rawboost_lite(b, RawboostMode::stationary, seed);
        }
    }
    throw config_error("unknown rawboost mode");
}

// ---------------------------------------------------------------------------
// Corpus driver
// ---------------------------------------------------------------------------

namespace {

std::vector<SpoofStyle> style_sequence(const std::array<double, 4>& mix, int count) {
    double total = 0.0;
    for (double m : mix) {
        if (m < 0.0) throw config_error("style mix entries must be nonnegative");
        total += m;
    }
    if (total <= 0.0) throw config_error("style mix must have positive total");
    // Largest-remainder apportionment, then round-robin interleave.
    std::array<int, 4> quota{};
    int assigned = 0;
    std::array<double, 4> frac{};
    for (int s = 0; s < 4; ++s) {
        const double exact = mix[static_cast<std::size_t>(s)] / total * count;
        quota[static_cast<std::size_t>(s)] = static_cast<int>(std::floor(exact));
        frac[static_cast<std::size_t>(s)] = exact - std::floor(exact);
        assigned += quota[static_cast<std::size_t>(s)];
    }
    while (assigned < count) {
        int best = 0;
        for (int s = 1; s < 4; ++s) {
            if (frac[static_cast<std::size_t>(s)] > frac[static_cast<std::size_t>(best)]) best = s;
        }
        quota[static_cast<std::size_t>(best)]++;
        frac[static_cast<std::size_t>(best)] = -1.0;
        ++assigned;
    }
    std::vector<SpoofStyle> seq;
    seq.reserve(static_cast<std::size_t>(count));
    std::array<int, 4> used{};
    while (static_cast<int>(seq.size()) < count) {
        for (int s = 0; s < 4; ++s) {
            if (used[static_cast<std::size_t>(s)] < quota[static_cast<std::size_t>(s)]) {
                seq.push_back(static_cast<SpoofStyle>(s));
                used[static_cast<std::size_t>(s)]++;
                if (static_cast<int>(seq.size()) == count) break;
            }
        }
    }
    return seq;
}

void generate_split(const CorpusSpec& spec, const std::string& out_dir, const std::string& split, int n_bona, int n_spoof,
                    std::uint64_t& cursor) {
    namespace fs = std::filesystem;
    std::vector<ManifestEntry> entries;
    std::vector<std::pair<std::string, BreathIntervals>> annotations;
    char idbuf[64];

    for (int i = 0; i < n_bona; ++i) {
        std::snprintf(idbuf, sizeof(idbuf), "%s_bona_%05d", split.c_str(), i);
        auto [wave, iv] = gen_bonafide(derive_seed(spec.master_seed, cursor++), spec.duration_s);
        ManifestEntry e;
        e.utt_id = idbuf;
        e.relpath = "wav/" + e.utt_id + ".wav";
        e.is_bonafide = true;
        e.style = "bonafide";
        e.interval_spec = format_intervals(iv);
        write_wav((fs::path(out_dir) / e.relpath).string(), wave);
        annotations.emplace_back(e.utt_id, iv);
        entries.push_back(std::move(e));
    }

    const std::vector<SpoofStyle> styles = style_sequence(spec.style_mix, n_spoof);
    for (int i = 0; i < n_spoof; ++i) {
        std::snprintf(idbuf, sizeof(idbuf), "%s_spoof_%05d", split.c_str(), i);
        BreathIntervals iv;
        const Waveform wave = gen_spoof(derive_seed(spec.master_seed, cursor++), spec.duration_s, styles[static_cast<std::size_t>(i)], &iv);
        ManifestEntry e;
        e.utt_id = idbuf;
        e.relpath = "wav/" + e.utt_id + ".wav";
        e.is_bonafide = false;
        e.style = spoof_style_name(styles[static_cast<std::size_t>(i)]);
        e.interval_spec = format_intervals(iv);
        write_wav((fs::path(out_dir) / e.relpath).string(), wave);
        annotations.emplace_back(e.utt_id, iv);
        entries.push_back(std::move(e));
    }

    write_manifest((fs::path(out_dir) / (split + ".tsv")).string(), entries);
    write_annotation_file((fs::path(out_dir) / (split + "_breath.tsv")).string(), annotations);
}

}  // namespace

void generate_corpus(const CorpusSpec& spec, const std::string& out_dir) {
    namespace fs = std::filesystem;
    if (spec.train_bonafide < 0 || spec.train_spoof < 0 || spec.eval_bonafide < 0 || spec.eval_spoof < 0) {
        throw config_error("corpus counts must be nonnegative");
    }
    fs::create_directories(fs::path(out_dir) / "wav");
    std::uint64_t cursor = 0;
    generate_split(spec, out_dir, "train", spec.train_bonafide, spec.train_spoof, cursor);
    generate_split(spec, out_dir, "eval", spec.eval_bonafide, spec.eval_spoof, cursor);
}

std::vector<ManifestEntry> read_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw data_error("cannot open manifest: " + path);
    std::vector<ManifestEntry> out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::size_t pos = 0;
        while (true) {
            const std::size_t tab = line.find('\t', pos);
            fields.push_back(line.substr(pos, tab == std::string::npos ? std::string::npos : tab - pos));
            if (tab == std::string::npos) break;
            pos = tab + 1;
        }
        if (fields.size() != 5) {
            throw data_error(path + ":" + std::to_string(lineno) + ": expected 5 tab-separated fields, got " + std::to_string(fields.size()));
        }
        ManifestEntry e;
        e.utt_id = fields[0];
        e.relpath = fields[1];
        if (fields[2] == "bonafide") {
            e.is_bonafide = true;
        } else if (fields[2] == "spoof") {
            e.is_bonafide = false;
        } else {
            throw data_error(path + ":" + std::to_string(lineno) + ": unknown label '" + fields[2] + "'");
        }
        e.style = fields[3];
        e.interval_spec = fields[4];
        out.push_back(std::move(e));
    }
    return out;
}

void write_manifest(const std::string& path, const std::vector<ManifestEntry>& entries) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw data_error("cannot write manifest: " + path);
    for (const ManifestEntry& e : entries) {
        out << e.utt_id << '\t' << e.relpath << '\t' << (e.is_bonafide ? "bonafide" : "spoof") << '\t' << e.style << '\t'
            << (e.interval_spec.empty() ? "-" : e.interval_spec) << '\n';
    }
}

std::string path_dirname(const std::string& path) {
    const std::size_t slash = path.find_last_of('/');
    return slash == std::string::npos ? std::string() : path.substr(0, slash);
}

}  // namespace breathnet
