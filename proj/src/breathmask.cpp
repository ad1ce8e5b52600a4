#include "breathnet/breathmask.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "breathnet/errors.hpp"
#include "breathnet/events.hpp"

namespace breathnet {

MaskMode parse_mask_mode(const std::string& s) {
    if (s == "normal") return MaskMode::normal;
    if (s == "zeros") return MaskMode::zeros;
    if (s == "ones") return MaskMode::ones;
    throw config_error("unknown mask mode '" + s + "' (expected normal|zeros|ones)");
}

std::string mask_mode_name(MaskMode m) {
    switch (m) {
        case MaskMode::normal: return "normal";
        case MaskMode::zeros: return "zeros";
        case MaskMode::ones: return "ones";
    }
    return "?";
}

int temporal_frame_count(int samples, int window, int hop) {
    if (samples < window) throw data_error("waveform shorter than one analysis window (" + std::to_string(samples) + " < " + std::to_string(window) + " samples)");
    return (samples - window) / hop + 1;
}

Waveform normalize_duration(const Waveform& w, int target_samples) {
    validate_waveform(w, "normalize_duration");
    if (target_samples < 1) throw config_error("normalize_duration: target_samples must be >= 1");
    Waveform out;
    out.sample_rate = w.sample_rate;
    out.samples.resize(static_cast<std::size_t>(target_samples));
    const std::size_t n = w.samples.size();
    for (int i = 0; i < target_samples; ++i) {
        out.samples[static_cast<std::size_t>(i)] = w.samples[static_cast<std::size_t>(i) % n];
    }
    return out;
}

BreathIntervals normalize_intervals(BreathIntervals iv) {
    for (const BreathInterval& b : iv) {
        if (!(b.start_s >= 0.0) || !(b.end_s > b.start_s)) {
            throw data_error("invalid breath interval [" + std::to_string(b.start_s) + "," + std::to_string(b.end_s) + ")");
        }
    }
    std::sort(iv.begin(), iv.end(), [](const BreathInterval& a, const BreathInterval& b) { return a.start_s < b.start_s; });
    BreathIntervals merged;
    for (const BreathInterval& b : iv) {
        if (!merged.empty() && b.start_s <= merged.back().end_s) {
            merged.back().end_s = std::max(merged.back().end_s, b.end_s);
        } else {
            merged.push_back(b);
        }
    }
    return merged;
}

BreathMask intervals_to_mask(const BreathIntervals& iv, int frames, double frame_duration) {
    if (frames < 1) throw config_error("intervals_to_mask: frame count must be >= 1");
    if (!(frame_duration > 0.0)) throw config_error("intervals_to_mask: frame duration must be positive");
    const BreathIntervals merged = normalize_intervals(iv);
    BreathMask mask;
    mask.frame_duration = frame_duration;
    mask.bits.assign(static_cast<std::size_t>(frames), 0);
    for (int t = 0; t < frames; ++t) {
        const double lo = t * frame_duration;
        const double hi = lo + frame_duration;
        double covered = 0.0;
        for (const BreathInterval& b : merged) {
            if (b.end_s <= lo) continue;
            if (b.start_s >= hi) break;
            covered += std::min(hi, b.end_s) - std::max(lo, b.start_s);
        }
        if (covered >= 0.5 * frame_duration) mask.bits[static_cast<std::size_t>(t)] = 1;
    }
    return mask;
}

BreathMask override_mask(const BreathMask& m, MaskMode mode) {
    BreathMask out = m;
    if (mode == MaskMode::zeros) std::fill(out.bits.begin(), out.bits.end(), 0);
    if (mode == MaskMode::ones) std::fill(out.bits.begin(), out.bits.end(), 1);
    return out;
}

// ---------------------------------------------------------------------------
// Heuristic detector
// ---------------------------------------------------------------------------

namespace {

// Peak of the normalized cross-correlation between the frame and its
// lagged copy over pitch-plausible lags. Normalizing by both segments'
// energies keeps fading tones (phrase edges) reading as harmonic.
double frame_harmonicity(const double* x, int n) {
    double best = 0.0;
    const int lag_lo = 40, lag_hi = std::min(200, n - 1);
    for (int lag = lag_lo; lag <= lag_hi; ++lag) {
        double r = 0.0, head = 0.0, tail = 0.0;
        for (int i = 0; i + lag < n; ++i) {
            r += x[i] * x[i + lag];
            head += x[i] * x[i];
            tail += x[i + lag] * x[i + lag];
        }
        const double den = std::sqrt(head * tail);
        if (den > 0.0) best = std::max(best, r / den);
    }
    return best;
}

double percentile(std::vector<double> v, double pct) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const double idx = pct / 100.0 * (static_cast<double>(v.size()) - 1.0);
    const std::size_t lo = static_cast<std::size_t>(std::floor(idx));
    const std::size_t hi = static_cast<std::size_t>(std::ceil(idx));
    const double w = idx - static_cast<double>(lo);
    return v[lo] * (1.0 - w) + v[hi] * w;
}

}  // namespace

BreathIntervals heuristic_breath_detect(const Waveform& w, const BreathDetectConfig& cfg) {
    validate_waveform(w, "heuristic_breath_detect");
    const int n = static_cast<int>(w.samples.size());
    if (n < cfg.frame) return {};

    const std::vector<double> banded = fir_apply_same(w.samples, fir_bandpass(cfg.band_low_hz, cfg.band_high_hz, 129, w.sample_rate));

    const int frames = (n - cfg.frame) / cfg.hop + 1;
    std::vector<double> band_power(static_cast<std::size_t>(frames));
    std::vector<double> harm(static_cast<std::size_t>(frames));
    for (int t = 0; t < frames; ++t) {
        const int base = t * cfg.hop;
        double p = 0.0;
        for (int i = 0; i < cfg.frame; ++i) {
            const double s = banded[static_cast<std::size_t>(base + i)];
            p += s * s;
        }
        band_power[static_cast<std::size_t>(t)] = p / cfg.frame;
        harm[static_cast<std::size_t>(t)] = frame_harmonicity(w.samples.data() + base, cfg.frame);
    }

    // Threshold over the non-harmonic population (silence + breath); voiced
    // frames would otherwise dominate the percentile.
    std::vector<double> eligible;
    for (int t = 0; t < frames; ++t) {
        if (harm[static_cast<std::size_t>(t)] < cfg.harmonicity_max) eligible.push_back(band_power[static_cast<std::size_t>(t)]);
    }
    if (eligible.empty()) return {};
    const double thresh = std::max(percentile(eligible, cfg.energy_percentile), cfg.abs_energy_floor);

    std::vector<char> hit(static_cast<std::size_t>(frames), 0);
    for (int t = 0; t < frames; ++t) {
        hit[static_cast<std::size_t>(t)] = band_power[static_cast<std::size_t>(t)] > thresh && harm[static_cast<std::size_t>(t)] < cfg.harmonicity_max;
    }

    const double dt = static_cast<double>(cfg.hop) / w.sample_rate;
    const double frame_s = static_cast<double>(cfg.frame) / w.sample_rate;
    BreathIntervals raw;
    int t = 0;
    while (t < frames) {
        if (!hit[static_cast<std::size_t>(t)]) {
            ++t;
            continue;
        }
        int t1 = t;
        while (t1 + 1 < frames && hit[static_cast<std::size_t>(t1 + 1)]) ++t1;
        raw.push_back({t * dt, t1 * dt + frame_s});
        t = t1 + 1;
    }

    // Merge detections separated by less than merge_gap_s.
    BreathIntervals merged;
    for (const BreathInterval& b : raw) {
        if (!merged.empty() && b.start_s - merged.back().end_s < cfg.merge_gap_s) {
            merged.back().end_s = std::max(merged.back().end_s, b.end_s);
        } else {
            merged.push_back(b);
        }
    }
    return merged;
}

// ---------------------------------------------------------------------------
// Annotation text format
// ---------------------------------------------------------------------------

std::string format_intervals(const BreathIntervals& iv) {
    if (iv.empty()) return "-";
    std::ostringstream os;
    for (std::size_t i = 0; i < iv.size(); ++i) {
        if (i) os << ",";
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%.4f:%.4f", iv[i].start_s, iv[i].end_s);
        os << buf;
    }
    return os.str();
}

BreathIntervals parse_intervals(const std::string& field) {
    log_event("annotation_parse");
    if (field == "-" || field.empty()) return {};
    BreathIntervals out;
    std::size_t pos = 0;
    while (pos <= field.size()) {
        std::size_t comma = field.find(',', pos);
        if (comma == std::string::npos) comma = field.size();
        const std::string pair = field.substr(pos, comma - pos);
        const std::size_t colon = pair.find(':');
        if (colon == std::string::npos) throw data_error("malformed breath interval '" + pair + "'");
        try {
            BreathInterval b;
            b.start_s = std::stod(pair.substr(0, colon));
            b.end_s = std::stod(pair.substr(colon + 1));
            out.push_back(b);
        } catch (const std::exception&) {
            throw data_error("malformed breath interval '" + pair + "'");
        }
        pos = comma + 1;
        if (comma == field.size()) break;
    }
    return normalize_intervals(std::move(out));
}

std::map<std::string, BreathIntervals> read_annotation_file(const std::string& path) {
    log_event("annotation_file_read");
    std::ifstream in(path);
    if (!in) throw data_error("cannot open breath annotation file: " + path);
    std::map<std::string, BreathIntervals> out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const std::size_t tab = line.find('\t');
        if (tab == std::string::npos) {
            throw data_error(path + ":" + std::to_string(lineno) + ": expected <utt_id>\\t<intervals>");
        }
        const std::string id = line.substr(0, tab);
        try {
            out[id] = parse_intervals(line.substr(tab + 1));
        } catch (const data_error& e) {
            throw data_error(path + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

void write_annotation_file(const std::string& path, const std::vector<std::pair<std::string, BreathIntervals>>& rows) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw data_error("cannot write breath annotation file: " + path);
    for (const auto& [id, iv] : rows) {
        out << id << '\t' << format_intervals(iv) << '\n';
    }
}

}  // namespace breathnet
