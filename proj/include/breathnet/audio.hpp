#pragma once

#include <string>
#include <vector>

namespace breathnet {

struct Waveform {
    std::vector<double> samples;  // in [-1, 1]
    int sample_rate = 16000;
};

// Throws data_error on empty or non-finite input.
void validate_waveform(const Waveform& w, const std::string& context);

// 16-bit mono PCM only.
Waveform read_wav(const std::string& path);
void write_wav(const std::string& path, const Waveform& w);

// Hamming-windowed sinc band-pass taps (odd length). f_low = 0 gives a
// low-pass, f_high = Nyquist an all-pass-like impulse.
std::vector<double> fir_bandpass(double f_low_hz, double f_high_hz, int taps, double sample_rate);

// Zero-padded convolution returning a signal of the input's length,
// aligned to the kernel center.
std::vector<double> fir_apply_same(const std::vector<double>& x, const std::vector<double>& taps);

}  // namespace breathnet
