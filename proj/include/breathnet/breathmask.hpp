#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "breathnet/audio.hpp"

namespace breathnet {

struct BreathInterval {
    double start_s = 0.0;
    double end_s = 0.0;
};

using BreathIntervals = std::vector<BreathInterval>;

struct BreathMask {
    std::vector<std::uint8_t> bits;  // each 0 or 1
    double frame_duration = 0.02;
};

enum class MaskMode { normal, zeros, ones };

MaskMode parse_mask_mode(const std::string& s);
std::string mask_mode_name(MaskMode m);

// Frame count of the temporal front-end for a waveform of `samples` length
// (window 400, hop 320 at 16 kHz; 64600 samples -> 201 frames).
int temporal_frame_count(int samples, int window = 400, int hop = 320);

// Crop to `target_samples`, or repeat the content cyclically when shorter.
Waveform normalize_duration(const Waveform& w, int target_samples);

// Sorts, validates (start < end), and merges overlapping/touching intervals.
BreathIntervals normalize_intervals(BreathIntervals iv);

// Bit t is set iff the intervals cover at least 50% of frame window
// [t*dt, (t+1)*dt).
BreathMask intervals_to_mask(const BreathIntervals& iv, int frames, double frame_duration);

BreathMask override_mask(const BreathMask& m, MaskMode mode);

struct BreathDetectConfig {
    int frame = 400;               // 25 ms at 16 kHz
    int hop = 160;                 // 10 ms
    double band_low_hz = 500.0;
    double band_high_hz = 2000.0;
    double energy_percentile = 90.0;  // over non-harmonic frames
    double harmonicity_max = 0.5;     // autocorrelation peak gate
    double merge_gap_s = 0.05;
    double abs_energy_floor = 1e-4;   // mean-power floor per frame
};

// Band-limited energy above threshold with low harmonicity marks a breath
// frame; adjacent detections closer than merge_gap_s are merged. Intended
// for the synthetic corpus, not a general-purpose detector.
BreathIntervals heuristic_breath_detect(const Waveform& w, const BreathDetectConfig& cfg = {});

// --- annotation text format ---
// One utterance per line: "<utt_id>\t<start:end[,start:end...]>" with "-"
// for an empty list. Parsing is routed through these functions so tests can
// assert (via the event log) that inference never touches annotations under
// the zeros/ones mask overrides.
std::string format_intervals(const BreathIntervals& iv);
BreathIntervals parse_intervals(const std::string& field);
std::map<std::string, BreathIntervals> read_annotation_file(const std::string& path);
void write_annotation_file(const std::string& path, const std::vector<std::pair<std::string, BreathIntervals>>& rows);

}  // namespace breathnet
