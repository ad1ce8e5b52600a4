#include "breathnet/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "breathnet/errors.hpp"

namespace breathnet {

namespace {

constexpr char kMagic[8] = {'B', 'N', 'C', 'K', '0', '0', '0', '1'};

void put_i64(std::ostream& out, std::int64_t v) { out.write(reinterpret_cast<const char*>(&v), 8); }
void put_f64(std::ostream& out, double v) { out.write(reinterpret_cast<const char*>(&v), 8); }

std::int64_t get_i64(std::istream& in) {
    std::int64_t v = 0;
    in.read(reinterpret_cast<char*>(&v), 8);
    return v;
}

double get_f64(std::istream& in) {
    double v = 0;
    in.read(reinterpret_cast<char*>(&v), 8);
    return v;
}

void put_tensor(std::ostream& out, const Tensor& t) {
    put_i64(out, t.rank());
    for (int d : t.shape()) put_i64(out, d);
    out.write(reinterpret_cast<const char*>(t.data().data()), static_cast<std::streamsize>(t.size() * 8));
}

Tensor get_tensor(std::istream& in) {
    const std::int64_t rank = get_i64(in);
    if (rank < 1 || rank > 4) throw data_error("checkpoint: bad tensor rank");
    std::vector<int> shape(static_cast<std::size_t>(rank));
    for (int& d : shape) d = static_cast<int>(get_i64(in));
    Tensor t(shape);
    in.read(reinterpret_cast<char*>(t.data().data()), static_cast<std::streamsize>(t.size() * 8));
    return t;
}

void put_string(std::ostream& out, const std::string& s) {
    put_i64(out, static_cast<std::int64_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::istream& in) {
    const std::int64_t n = get_i64(in);
    if (n < 0 || n > 4096) throw data_error("checkpoint: bad string length");
    std::string s(static_cast<std::size_t>(n), '\0');
    in.read(s.data(), n);
    return s;
}

void put_config(std::ostream& out, const ModelConfig& c) {
    put_i64(out, c.encoder_layers);
    put_i64(out, c.dim);
    put_i64(out, c.window);
    put_i64(out, c.hop);
    put_i64(out, c.encoder_taps);
    put_i64(out, c.film_hidden);
    put_i64(out, c.sinc_filters);
    put_i64(out, c.sinc_kernel);
    put_i64(out, c.sinc_stride);
    put_i64(out, c.freq_steps);
    put_i64(out, c.heads);
    put_i64(out, c.lstm_hidden1);
    put_i64(out, c.lstm_hidden2);
    put_i64(out, c.target_samples);
    put_f64(out, c.sample_rate);
    put_f64(out, c.pre_emphasis);
    put_i64(out, c.film_enabled ? 1 : 0);
    put_i64(out, c.freq_enabled ? 1 : 0);
}

ModelConfig get_config(std::istream& in) {
    ModelConfig c;
    c.encoder_layers = static_cast<int>(get_i64(in));
    c.dim = static_cast<int>(get_i64(in));
    c.window = static_cast<int>(get_i64(in));
    c.hop = static_cast<int>(get_i64(in));
    c.encoder_taps = static_cast<int>(get_i64(in));
    c.film_hidden = static_cast<int>(get_i64(in));
    c.sinc_filters = static_cast<int>(get_i64(in));
    c.sinc_kernel = static_cast<int>(get_i64(in));
    c.sinc_stride = static_cast<int>(get_i64(in));
    c.freq_steps = static_cast<int>(get_i64(in));
    c.heads = static_cast<int>(get_i64(in));
    c.lstm_hidden1 = static_cast<int>(get_i64(in));
    c.lstm_hidden2 = static_cast<int>(get_i64(in));
    c.target_samples = static_cast<int>(get_i64(in));
    c.sample_rate = get_f64(in);
    c.pre_emphasis = get_f64(in);
    c.film_enabled = get_i64(in) != 0;
    c.freq_enabled = get_i64(in) != 0;
    return c;
}

}  // namespace

Checkpoint snapshot_model(const Model& model, int epoch, const std::vector<double>& loss_history) {
    Checkpoint ck;
    ck.cfg = model.cfg;
    model.for_each_param([&](const std::string& name, const Tensor& t, bool) { ck.params.emplace_back(name, t); });
    ck.bn_mean = model.bn.running_mean;
    ck.bn_var = model.bn.running_var;
    ck.bn_momentum = model.bn.momentum;
    ck.bn_eps = model.bn.eps;
    ck.center = model.center.initialized ? model.center.c : Tensor(1, model.cfg.dim);
    ck.center_initialized = model.center.initialized;
    ck.center_momentum = model.center.momentum;
    ck.epoch = epoch;
    ck.loss_history = loss_history;
    return ck;
}

void restore_model(Model& model, const Checkpoint& ck) {
    if (!(model.cfg == ck.cfg)) throw config_error("checkpoint was written for a different model configuration");
    std::size_t i = 0;
    model.for_each_param([&](const std::string& name, Tensor& t, bool) {
        if (i >= ck.params.size()) throw config_error("checkpoint has too few tensors");
        const auto& [saved_name, saved] = ck.params[i];
        if (saved_name != name || !saved.same_shape(t)) {
            throw config_error("checkpoint tensor '" + saved_name + "' does not match model parameter '" + name + "'");
        }
        t = saved;
        ++i;
    });
    if (i != ck.params.size()) throw config_error("checkpoint has extra tensors");
    model.bn.running_mean = ck.bn_mean;
    model.bn.running_var = ck.bn_var;
    model.bn.momentum = ck.bn_momentum;
    model.bn.eps = ck.bn_eps;
    model.center.c = ck.center;
    model.center.initialized = ck.center_initialized;
    model.center.momentum = ck.center_momentum;
}

void save_checkpoint(const std::string& path, const Checkpoint& ck) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw data_error("cannot write checkpoint: " + path);
    out.write(kMagic, 8);
    put_config(out, ck.cfg);
    put_i64(out, ck.epoch);
    put_i64(out, static_cast<std::int64_t>(ck.loss_history.size()));
    for (double v : ck.loss_history) put_f64(out, v);
    put_tensor(out, ck.bn_mean);
    put_tensor(out, ck.bn_var);
    put_f64(out, ck.bn_momentum);
    put_f64(out, ck.bn_eps);
    put_i64(out, ck.center_initialized ? 1 : 0);
    put_f64(out, ck.center_momentum);
    put_tensor(out, ck.center);
    put_i64(out, static_cast<std::int64_t>(ck.params.size()));
    for (const auto& [name, t] : ck.params) {
        put_string(out, name);
        put_tensor(out, t);
    }
    if (!out) throw data_error("short write to checkpoint: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw data_error("cannot open checkpoint: " + path);
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, kMagic, 8) != 0) throw data_error("not a checkpoint file: " + path);
    Checkpoint ck;
    ck.cfg = get_config(in);
    ck.epoch = static_cast<int>(get_i64(in));
    const std::int64_t hist = get_i64(in);
    if (hist < 0 || hist > 1000000) throw data_error("checkpoint: bad history length");
    ck.loss_history.resize(static_cast<std::size_t>(hist));
    for (double& v : ck.loss_history) v = get_f64(in);
    ck.bn_mean = get_tensor(in);
    ck.bn_var = get_tensor(in);
    ck.bn_momentum = get_f64(in);
    ck.bn_eps = get_f64(in);
    ck.center_initialized = get_i64(in) != 0;
    ck.center_momentum = get_f64(in);
    ck.center = get_tensor(in);
    const std::int64_t count = get_i64(in);
    if (count < 0 || count > 100000) throw data_error("checkpoint: bad tensor count");
    for (std::int64_t i = 0; i < count; ++i) {
        const std::string name = get_string(in);
        ck.params.emplace_back(name, get_tensor(in));
    }
    if (!in) throw data_error("truncated checkpoint: " + path);
    return ck;
}

Checkpoint average_checkpoints(const std::vector<Checkpoint>& cks) {
    if (cks.empty()) throw data_error("average_checkpoints: empty list");
    Checkpoint avg = cks[0];
    const double n = static_cast<double>(cks.size());
    for (std::size_t k = 1; k < cks.size(); ++k) {
        const Checkpoint& ck = cks[k];
        if (!(ck.cfg == avg.cfg)) throw data_error("average_checkpoints: model configurations differ");
        if (ck.params.size() != avg.params.size()) throw data_error("average_checkpoints: parameter counts differ");
        for (std::size_t i = 0; i < avg.params.size(); ++i) {
            auto& [name, acc] = avg.params[i];
            const auto& [other_name, t] = ck.params[i];
            if (name != other_name || !acc.same_shape(t)) {
                throw data_error("average_checkpoints: tensor '" + name + "' does not match '" + other_name + "'");
            }
            for (std::int64_t j = 0; j < acc.size(); ++j) acc[j] += t[j];
        }
        for (std::int64_t j = 0; j < avg.bn_mean.size(); ++j) avg.bn_mean[j] += ck.bn_mean[j];
        for (std::int64_t j = 0; j < avg.bn_var.size(); ++j) avg.bn_var[j] += ck.bn_var[j];
        for (std::int64_t j = 0; j < avg.center.size(); ++j) avg.center[j] += ck.center[j];
        avg.center_initialized = avg.center_initialized || ck.center_initialized;
        avg.epoch = std::max(avg.epoch, ck.epoch);
        if (ck.epoch >= avg.epoch) avg.loss_history = ck.loss_history;
    }
    for (auto& [name, t] : avg.params) {
        for (std::int64_t j = 0; j < t.size(); ++j) t[j] /= n;
    }
    for (std::int64_t j = 0; j < avg.bn_mean.size(); ++j) avg.bn_mean[j] /= n;
    for (std::int64_t j = 0; j < avg.bn_var.size(); ++j) avg.bn_var[j] /= n;
    for (std::int64_t j = 0; j < avg.center.size(); ++j) avg.center[j] /= n;
    return avg;
}

}  // namespace breathnet
