#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "breathnet/audio.hpp"
#include "breathnet/breathmask.hpp"

namespace breathnet {

enum class SpoofStyle { no_breath, comb_artifact, lowpass, breath_removed };

SpoofStyle parse_spoof_style(const std::string& s);
std::string spoof_style_name(SpoofStyle s);

// Bona fide utterance: voiced harmonic phrases separated by pauses, with
// 1–3 band-limited breath bursts planted in the pauses. Returns the exact
// planted intervals. Fully deterministic in the seed.
std::pair<Waveform, BreathIntervals> gen_bonafide(std::uint64_t seed, double duration_s);

// Spoof utterance in one of four artifact styles. For styles that keep the
// source breaths (comb_artifact, lowpass) the planted intervals are written
// to *intervals_out when given; the other styles yield none.
Waveform gen_spoof(std::uint64_t seed, double duration_s, SpoofStyle style, BreathIntervals* intervals_out = nullptr);

enum class RawboostMode { none, convolutive, impulsive, stationary, series };

RawboostMode parse_rawboost_mode(const std::string& s);
std::string rawboost_mode_name(RawboostMode m);

// Simplified RawBoost-style augmentation; output re-clamped to [-1, 1].
Waveform rawboost_lite(const Waveform& w, RawboostMode mode, std::uint64_t seed);

// Granular pieces (used by rawboost_lite; exposed for direct testing).
Waveform rawboost_convolutive(const Waveform& w, const std::vector<double>& taps);
Waveform rawboost_impulsive(const Waveform& w, std::uint64_t seed);
Waveform rawboost_stationary(const Waveform& w, double snr_db, std::uint64_t seed);

struct CorpusSpec {
    int train_bonafide = 500;
    int train_spoof = 1500;
    int eval_bonafide = 150;
    int eval_spoof = 350;
    double duration_s = 4.0375;  // 64600 samples at 16 kHz
    std::array<double, 4> style_mix = {0.25, 0.25, 0.25, 0.25};  // no_breath, comb, lowpass, breath_removed
    std::uint64_t master_seed = 1;
};

struct ManifestEntry {
    std::string utt_id;
    std::string relpath;  // relative to the manifest's directory
    bool is_bonafide = false;
    std::string style;         // "bonafide" or a spoof style name
    std::string interval_spec;  // raw annotation field; parse via parse_intervals
};

// Writes wav/ plus train.tsv / eval.tsv manifests and the matching
// *_breath.tsv annotation files. Regeneration from the same spec is
// byte-identical.
void generate_corpus(const CorpusSpec& spec, const std::string& out_dir);

std::vector<ManifestEntry> read_manifest(const std::string& path);
void write_manifest(const std::string& path, const std::vector<ManifestEntry>& entries);

// Directory part of a path ("" when the path has no separator).
std::string path_dirname(const std::string& path);

}  // namespace breathnet
