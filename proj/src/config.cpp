#include "breathnet/config.hpp"

#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

#include "breathnet/errors.hpp"

namespace breathnet {

namespace {

struct FieldBinding {
    std::string name;
    std::string type;
    std::string description;
    std::function<std::string(const RunConfig&)> get;
    std::function<void(RunConfig&, const std::string&)> set;
};

int parse_int(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        const long x = std::stol(v, &used);
        if (used != v.size()) throw std::invalid_argument("junk");
        return static_cast<int>(x);
    } catch (const std::exception&) {
        throw config_error("config key '" + key + "': expected integer, got '" + v + "'");
    }
}

double parse_real(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        const double x = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument("junk");
        return x;
    } catch (const std::exception&) {
        throw config_error("config key '" + key + "': expected number, got '" + v + "'");
    }
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw config_error("config key '" + key + "': expected boolean, got '" + v + "'");
}

std::string fmt_real(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%g", v);
    return buf;
}

#define BIND_INT(field, desc) \
    {#field, "int", desc, [](const RunConfig& c) { return std::to_string(c.field); }, \
     [](RunConfig& c, const std::string& v) { c.field = parse_int(#field, v); }}
#define BIND_REAL(field, desc) \
    {#field, "real", desc, [](const RunConfig& c) { return fmt_real(c.field); }, \
     [](RunConfig& c, const std::string& v) { c.field = parse_real(#field, v); }}
#define BIND_BOOL(field, desc) \
    {#field, "bool", desc, [](const RunConfig& c) { return c.field ? "true" : "false"; }, \
     [](RunConfig& c, const std::string& v) { c.field = parse_bool(#field, v); }}
#define BIND_STR(field, desc) \
    {#field, "string", desc, [](const RunConfig& c) { return c.field; }, \
     [](RunConfig& c, const std::string& v) { c.field = v; }}

const std::vector<FieldBinding>& bindings() {
    static const std::vector<FieldBinding> table = {
        BIND_INT(encoder_layers, "layered encoder depth L"),
        BIND_INT(model_dim, "shared feature width D"),
        BIND_INT(film_hidden, "breath gating MLP hidden width"),
        BIND_INT(sinc_filters, "number of sinc band-pass filters F"),
        BIND_INT(sinc_kernel, "sinc kernel taps (odd)"),
        BIND_INT(sinc_stride, "sinc convolution stride in samples"),
        BIND_INT(heads, "cross-attention head count"),
        BIND_INT(lstm_hidden1, "first BiLSTM hidden size"),
        BIND_INT(lstm_hidden2, "second BiLSTM hidden size"),
        BIND_INT(target_samples, "normalized utterance length in samples"),
        BIND_REAL(sample_rate, "audio sample rate in Hz"),
        BIND_REAL(pre_emphasis, "pre-emphasis coefficient"),
        BIND_REAL(lambda, "feature-loss weight in the total objective"),
        BIND_REAL(alpha, "center-loss weight"),
        BIND_REAL(beta, "contrast-loss weight"),
        BIND_REAL(tau, "contrastive temperature"),
        BIND_REAL(delta, "bona fide augmentation noise scale"),
        BIND_INT(aug_count, "augmented bona fide features per batch"),
        BIND_REAL(class_weight_bonafide, "cross-entropy weight, bona fide class"),
        BIND_REAL(class_weight_spoof, "cross-entropy weight, spoof class"),
        BIND_REAL(center_momentum, "bona fide center momentum mu"),
        BIND_REAL(learning_rate, "base Adam learning rate"),
        BIND_REAL(encoder_learning_rate, "reduced learning rate for encoder parameters"),
        BIND_REAL(weight_decay, "decoupled weight decay"),
        BIND_REAL(adam_beta1, "Adam first-moment decay"),
        BIND_REAL(adam_beta2, "Adam second-moment decay"),
        BIND_REAL(adam_eps, "Adam epsilon"),
        BIND_INT(batch_size, "utterances per optimization step"),
        BIND_INT(max_epochs, "maximum training epochs"),
        BIND_INT(patience, "early stop after this many non-improving epochs"),
        {"seed", "int", "master random seed", [](const RunConfig& c) { return std::to_string(c.seed); },
         [](RunConfig& c, const std::string& v) { c.seed = static_cast<std::uint64_t>(std::stoull(v)); }},
        BIND_INT(checkpoint_average, "checkpoints averaged into the final model"),
        BIND_STR(mask_mode, "breath mask at inference: normal|zeros|ones"),
        BIND_STR(mask_source, "breath mask source: annotations|heuristic"),
        BIND_STR(rawboost, "training augmentation: none|convolutive|impulsive|stationary|series"),
        BIND_BOOL(film_enabled, "enable breath-gated modulation"),
        BIND_BOOL(freq_enabled, "enable the frequency branch and fusion"),
        BIND_BOOL(use_pscl, "include the positive-only contrastive term"),
        BIND_BOOL(use_center, "include the center-loss term"),
        BIND_BOOL(use_contrast, "include the contrast-loss term"),
        BIND_STR(train_manifest, "training manifest path"),
        BIND_STR(eval_manifest, "evaluation manifest path"),
        BIND_STR(breath_annotations, "optional breath annotation file (default: manifest column)"),
        BIND_STR(out_dir, "output directory for checkpoints, scores, reports"),
    };
    return table;
}

#undef BIND_INT
#undef BIND_REAL
#undef BIND_BOOL
#undef BIND_STR

}  // namespace

std::vector<ConfigKey> config_schema() {
    const RunConfig defaults;
    std::vector<ConfigKey> out;
    for (const FieldBinding& b : bindings()) {
        out.push_back({b.name, b.type, b.get(defaults), b.description});
    }
    return out;
}

void apply_config_kv(RunConfig& cfg, const std::string& key, const std::string& value) {
    for (const FieldBinding& b : bindings()) {
        if (b.name == key) {
            b.set(cfg, value);
            return;
        }
    }
    throw config_error("unknown config key '" + key + "'");
}

RunConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw config_error("cannot open config file: " + path);
    RunConfig cfg;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        const auto strip = [](std::string s) {
            const std::size_t a = s.find_first_not_of(" \t\r");
            if (a == std::string::npos) return std::string();
            const std::size_t b = s.find_last_not_of(" \t\r");
            return s.substr(a, b - a + 1);
        };
        line = strip(line);
        if (line.empty()) continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) {
            throw config_error(path + ":" + std::to_string(lineno) + ": expected 'key = value'");
        }
        try {
            apply_config_kv(cfg, strip(line.substr(0, eq)), strip(line.substr(eq + 1)));
        } catch (const config_error& e) {
            throw config_error(path + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return cfg;
}

void validate_config(const RunConfig& cfg) {
    if (cfg.learning_rate <= 0.0 || cfg.encoder_learning_rate <= 0.0) throw config_error("learning rates must be positive");
    if (cfg.patience < 1) throw config_error("patience must be >= 1");
    if (cfg.batch_size < 1) throw config_error("batch_size must be >= 1");
    if (cfg.max_epochs < 0) throw config_error("max_epochs must be >= 0");
    if (cfg.tau <= 0.0) throw config_error("tau must be positive");
    if (cfg.lambda < 0.0 || cfg.alpha < 0.0 || cfg.beta < 0.0) throw config_error("loss weights must be nonnegative");
    if (cfg.delta < 0.0) throw config_error("delta must be >= 0");
    if (cfg.aug_count < 0) throw config_error("aug_count must be >= 0");
    if (cfg.center_momentum < 0.0 || cfg.center_momentum > 1.0) throw config_error("center_momentum must lie in [0,1]");
    if (cfg.checkpoint_average < 1) throw config_error("checkpoint_average must be >= 1");
    if (cfg.sinc_kernel < 3 || cfg.sinc_kernel % 2 == 0) throw config_error("sinc_kernel must be odd and >= 3");
    parse_mask_mode(cfg.mask_mode);
    parse_rawboost_mode(cfg.rawboost);
    if (cfg.mask_source != "annotations" && cfg.mask_source != "heuristic") {
        throw config_error("mask_source must be 'annotations' or 'heuristic'");
    }
}

ModelConfig model_config(const RunConfig& cfg) {
    ModelConfig m;
    m.encoder_layers = cfg.encoder_layers;
    m.dim = cfg.model_dim;
    m.film_hidden = cfg.film_hidden;
    m.sinc_filters = cfg.sinc_filters;
    m.sinc_kernel = cfg.sinc_kernel;
    m.sinc_stride = cfg.sinc_stride;
    m.heads = cfg.heads;
    m.lstm_hidden1 = cfg.lstm_hidden1;
    m.lstm_hidden2 = cfg.lstm_hidden2;
    m.target_samples = cfg.target_samples;
    m.sample_rate = cfg.sample_rate;
    m.pre_emphasis = cfg.pre_emphasis;
    m.film_enabled = cfg.film_enabled;
    m.freq_enabled = cfg.freq_enabled;
    return m;
}

std::string render_config(const RunConfig& cfg) {
    std::ostringstream os;
    for (const FieldBinding& b : bindings()) {
        os << "# " << b.description << " (" << b.type << ")\n";
        os << b.name << " = " << b.get(cfg) << "\n";
    }
    return os.str();
}

}  // namespace breathnet
