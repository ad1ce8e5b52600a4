#include "breathnet/audio.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "breathnet/errors.hpp"

namespace breathnet {

namespace {

constexpr double kPi = 3.14159265358979323846;

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_u16(std::string& out, std::uint16_t v) {
    out.push_back(static_cast<char>(v & 0xFF));
    out.push_back(static_cast<char>((v >> 8) & 0xFF));
}

std::uint32_t get_u32(const char* p) {
    return static_cast<std::uint8_t>(p[0]) | (static_cast<std::uint32_t>(static_cast<std::uint8_t>(p[1])) << 8) |
           (static_cast<std::uint32_t>(static_cast<std::uint8_t>(p[2])) << 16) |
           (static_cast<std::uint32_t>(static_cast<std::uint8_t>(p[3])) << 24);
}

std::uint16_t get_u16(const char* p) {
    return static_cast<std::uint16_t>(static_cast<std::uint8_t>(p[0]) | (static_cast<std::uint16_t>(static_cast<std::uint8_t>(p[1])) << 8));
}

}  // namespace

void validate_waveform(const Waveform& w, const std::string& context) {
    if (w.samples.empty()) throw data_error(context + ": empty waveform");
    for (double s : w.samples) {
        if (!std::isfinite(s)) throw data_error(context + ": non-finite sample");
    }
}

Waveform read_wav(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw data_error("cannot open wav file: " + path);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (bytes.size() < 44 || bytes.compare(0, 4, "RIFF") != 0 || bytes.compare(8, 4, "WAVE") != 0) {
        throw data_error("not a RIFF/WAVE file: " + path);
    }
    Waveform w;
    bool got_fmt = false, got_data = false;
    std::size_t pos = 12;
    while (pos + 8 <= bytes.size()) {
        const std::string id = bytes.substr(pos, 4);
        const std::uint32_t len = get_u32(bytes.data() + pos + 4);
        pos += 8;
        if (pos + len > bytes.size()) throw data_error("truncated wav chunk in " + path);
        if (id == "fmt ") {
            if (len < 16) throw data_error("short fmt chunk in " + path);
            const std::uint16_t format = get_u16(bytes.data() + pos);
            const std::uint16_t channels = get_u16(bytes.data() + pos + 2);
            const std::uint32_t rate = get_u32(bytes.data() + pos + 4);
            const std::uint16_t bits = get_u16(bytes.data() + pos + 14);
            if (format != 1 || channels != 1 || bits != 16) {
                throw data_error("unsupported wav format (need 16-bit mono PCM): " + path);
            }
            w.sample_rate = static_cast<int>(rate);
            got_fmt = true;
        } else if (id == "data") {
            const std::size_t n = len / 2;
            w.samples.resize(n);
            for (std::size_t i = 0; i < n; ++i) {
                std::int16_t s;
                std::memcpy(&s, bytes.data() + pos + 2 * i, 2);
                w.samples[i] = static_cast<double>(s) / 32767.0;
            }
            got_data = true;
        }
        pos += len + (len & 1);
    }
    if (!got_fmt || !got_data) throw data_error("missing fmt/data chunk in " + path);
    validate_waveform(w, path);
    return w;
}

void write_wav(const std::string& path, const Waveform& w) {
    validate_waveform(w, path);
    const std::uint32_t n = static_cast<std::uint32_t>(w.samples.size());
    const std::uint32_t data_len = n * 2;
    std::string out;
    out.reserve(44 + data_len);
    out += "RIFF";
    put_u32(out, 36 + data_len);
    out += "WAVEfmt ";
    put_u32(out, 16);
    put_u16(out, 1);  // PCM
    put_u16(out, 1);  // mono
    put_u32(out, static_cast<std::uint32_t>(w.sample_rate));
    put_u32(out, static_cast<std::uint32_t>(w.sample_rate) * 2);
    put_u16(out, 2);
    put_u16(out, 16);
    out += "data";
    put_u32(out, data_len);
    for (std::uint32_t i = 0; i < n; ++i) {
        double v = w.samples[i];
        if (v > 1.0) v = 1.0;
        if (v < -1.0) v = -1.0;
        const std::int16_t s = static_cast<std::int16_t>(std::lrint(v * 32767.0));
        out.push_back(static_cast<char>(s & 0xFF));
        out.push_back(static_cast<char>((s >> 8) & 0xFF));
    }
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw data_error("cannot write wav file: " + path);
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw data_error("short write to wav file: " + path);
}

std::vector<double> fir_bandpass(double f_low_hz, double f_high_hz, int taps, double sample_rate) {
    if (taps < 3 || taps % 2 == 0) throw config_error("fir_bandpass: taps must be odd and >= 3");
    if (f_low_hz < 0.0 || f_high_hz <= f_low_hz || f_high_hz > sample_rate / 2.0) {
        throw config_error("fir_bandpass: need 0 <= f_low < f_high <= Nyquist");
    }
    const int M = (taps - 1) / 2;
    const double nf1 = f_low_hz / sample_rate;
    const double nf2 = f_high_hz / sample_rate;
    std::vector<double> h(static_cast<std::size_t>(taps));
    for (int i = 0; i < taps; ++i) {
        const int n = i - M;
        double v;
        if (n == 0) {
            v = 2.0 * (nf2 - nf1);
        } else {
            v = (std::sin(2.0 * kPi * nf2 * n) - std::sin(2.0 * kPi * nf1 * n)) / (kPi * n);
        }
        const double win = 0.54 - 0.46 * std::cos(2.0 * kPi * i / (taps - 1));
        h[static_cast<std::size_t>(i)] = v * win;
    }
    return h;
}

std::vector<double> fir_apply_same(const std::vector<double>& x, const std::vector<double>& taps) {
    const int n = static_cast<int>(x.size());
    const int k = static_cast<int>(taps.size());
    const int M = (k - 1) / 2;
    std::vector<double> y(static_cast<std::size_t>(n), 0.0);
    for (int i = 0; i < n; ++i) {
        double acc = 0.0;
        for (int j = 0; j < k; ++j) {
            const int src = i + j - M;
            if (src >= 0 && src < n) acc += taps[static_cast<std::size_t>(j)] * x[static_cast<std::size_t>(src)];
        }
        y[static_cast<std::size_t>(i)] = acc;
    }
    return y;
}

}  // namespace breathnet
