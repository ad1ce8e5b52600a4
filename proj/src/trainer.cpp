#include "breathnet/trainer.hpp"

#include "breathnet/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "breathnet/errors.hpp"
#include "breathnet/events.hpp"
#include "breathnet/rng.hpp"

namespace breathnet {

namespace fs = std::filesystem;

namespace {

// ---------------------------------------------------------------------------
// Data access
// ---------------------------------------------------------------------------

struct DataSource {
    std::string manifest_dir;
    std::vector<ManifestEntry> entries;
    bool have_annotation_file = false;
    std::map<std::string, BreathIntervals> annotation_map;

    static DataSource open(const std::string& manifest_path, const std::string& annotation_path, bool need_annotations) {
        DataSource ds;
        ds.entries = read_manifest(manifest_path);
        if (ds.entries.empty()) throw data_error("manifest is empty: " + manifest_path);
        ds.manifest_dir = path_dirname(manifest_path);
        if (need_annotations && !annotation_path.empty()) {
            ds.annotation_map = read_annotation_file(annotation_path);
            ds.have_annotation_file = true;
        }
        return ds;
    }

    std::string wav_path(std::size_t i) const {
        const std::string& rel = entries[i].relpath;
        if (!rel.empty() && rel[0] == '/') return rel;
        return manifest_dir.empty() ? rel : manifest_dir + "/" + rel;
    }

    BreathIntervals intervals(std::size_t i) const {
        const ManifestEntry& e = entries[i];
        if (have_annotation_file) {
            auto it = annotation_map.find(e.utt_id);
            if (it == annotation_map.end()) throw data_error("no breath annotation for utterance '" + e.utt_id + "'");
            return it->second;
        }
        return parse_intervals(e.interval_spec);
    }
};

BreathMask make_mask(const DataSource& ds, std::size_t i, const Waveform& normalized, const RunConfig& cfg, MaskMode mode) {
    const int frames = temporal_frame_count(static_cast<int>(normalized.samples.size()));
    const double frame_duration = 320.0 / cfg.sample_rate;
    if (mode != MaskMode::normal) {
        // Constant masks never consult the annotations.
        BreathMask m;
        m.frame_duration = frame_duration;
        m.bits.assign(static_cast<std::size_t>(frames), mode == MaskMode::ones ? 1 : 0);
        return m;
    }
    const BreathIntervals iv = cfg.mask_source == "heuristic" ? heuristic_breath_detect(normalized) : ds.intervals(i);
    return intervals_to_mask(iv, frames, frame_duration);
}

// ---------------------------------------------------------------------------
// Batch loss graph
// ---------------------------------------------------------------------------

struct BatchOutcome {
    double loss = 0.0;
    double ce = 0.0;
    double pscl_v = 0.0;
    double center_v = 0.0;
    double contrast_v = 0.0;
    std::vector<Tensor> grads;
};

BatchOutcome run_batch(Model& model, const DataSource& ds, const std::vector<std::size_t>& batch, const RunConfig& cfg,
                       MaskMode mask_mode, int epoch, int step_in_epoch) {
    Tape tape;
    BoundModel bound = bind_model(tape, model, true);
    const RawboostMode rb = parse_rawboost_mode(cfg.rawboost);

    // Branch forwards first; the frequency maps are normalized jointly so
    // the batch statistics span the whole mini-batch.
    std::vector<BranchPre> pre;
    std::vector<int> labels;
    for (std::size_t k = 0; k < batch.size(); ++k) {
        const std::size_t i = batch[k];
        Waveform w = read_wav(ds.wav_path(i));
        if (rb != RawboostMode::none) {
            w = rawboost_lite(w, rb, derive_seed(cfg.seed, 0xA0000000ull + static_cast<std::uint64_t>(epoch) * 1000003ull + i));
        }
        const Waveform normalized = normalize_duration(w, cfg.target_samples);
        const BreathMask mask = make_mask(ds, i, normalized, cfg, mask_mode);
        pre.push_back(forward_branches(tape, model, bound, normalized, mask));
        labels.push_back(ds.entries[i].is_bonafide ? 0 : 1);
    }

    std::vector<Var> x_freq(batch.size());
    if (model.cfg.freq_enabled) {
        std::vector<Var> maps;
        for (const BranchPre& p : pre) maps.push_back(p.freq_pooled);
        Var stacked = maps.size() == 1 ? maps[0] : tape.concat_rows(maps);
        Var normed_all = tape.batchnorm_cols(stacked, bound.freq.bn_gamma, bound.freq.bn_beta, model.bn, true);
        const int steps = model.cfg.freq_steps;
        for (std::size_t k = 0; k < batch.size(); ++k) {
            Var normed = batch.size() == 1 ? normed_all
                                           : tape.slice_rows(normed_all, static_cast<int>(k) * steps, static_cast<int>(k + 1) * steps);
            x_freq[k] = freq_project(tape, normed, bound.freq);
        }
    }

    std::vector<Var> logit_rows;
    std::vector<Var> bona_z, fake_z;
    for (std::size_t k = 0; k < batch.size(); ++k) {
        ForwardOut out = fuse_and_classify(tape, model, bound, pre[k].x_temp, x_freq[k]);
        logit_rows.push_back(out.logits);
        (labels[k] == 0 ? bona_z : fake_z).push_back(out.embedding);
    }

    Var probs = tape.rowwise_softmax(logit_rows.size() == 1 ? logit_rows[0] : tape.concat_rows(logit_rows), 1.0);
    Var ce = weighted_ce(tape, probs, labels, cfg.class_weight_bonafide, cfg.class_weight_spoof);

    Var total = ce;
    double component_values[3] = {0.0, 0.0, 0.0};
    const bool want_feature = cfg.lambda > 0.0 && (cfg.use_pscl || cfg.use_center || cfg.use_contrast);
    if (want_feature) {
        // The center initializes from the first batch that contains bona
        // fide samples; later batches use the running center in the loss and
        // update it afterwards.
        bool initialized_now = false;
        if (!model.center.initialized && !bona_z.empty()) {
            Tensor zbar(1, model.cfg.dim);
            for (Var z : bona_z) {
                const Tensor& zv = tape.val(z);
                for (std::int64_t j = 0; j < zbar.size(); ++j) zbar[j] += zv[j];
            }
            for (std::int64_t j = 0; j < zbar.size(); ++j) zbar[j] /= static_cast<double>(bona_z.size());
            update_center(model.center, zbar);
            initialized_now = true;
        }

        Var zero = tape.constant(Tensor::scalar(0.0));
        Var pscl_term = zero;
        if (cfg.use_pscl && !bona_z.empty()) {
            std::vector<Var> pool = bona_z;
            for (int j = 0; j < cfg.aug_count; ++j) {
                Var base = bona_z[static_cast<std::size_t>(j) % bona_z.size()];
                const std::uint64_t aug_seed =
                    derive_seed(cfg.seed, 0xB0000000ull + static_cast<std::uint64_t>(epoch) * 1000003ull +
                                              static_cast<std::uint64_t>(step_in_epoch) * 1009ull + static_cast<std::uint64_t>(j));
                std::vector<Var> aug = augment_bonafide(tape, base, cfg.delta, 1, aug_seed);
                pool.push_back(aug[0]);
            }
            pscl_term = pscl(tape, pool, cfg.tau);
        }
        Var center_term = cfg.use_center && model.center.initialized ? center_loss(tape, bona_z, model.center) : zero;
        Var contrast_term = cfg.use_contrast && model.center.initialized ? contrast_loss(tape, fake_z, model.center) : zero;
        Var feat = feature_loss(tape, pscl_term, center_term, contrast_term, cfg.alpha, cfg.beta);
        total = total_loss(tape, ce, feat, cfg.lambda);
        component_values[0] = tape.val(pscl_term)[0];
        component_values[1] = tape.val(center_term)[0];
        component_values[2] = tape.val(contrast_term)[0];

        if (!initialized_now && !bona_z.empty()) {
            Tensor zbar(1, model.cfg.dim);
            for (Var z : bona_z) {
                const Tensor& zv = tape.val(z);
                for (std::int64_t j = 0; j < zbar.size(); ++j) zbar[j] += zv[j];
            }
            for (std::int64_t j = 0; j < zbar.size(); ++j) zbar[j] /= static_cast<double>(bona_z.size());
            update_center(model.center, zbar);
        } else if (bona_z.empty()) {
            log_event("center_update_skipped_no_bonafide");
        }
    }

    BatchOutcome out;
    out.loss = tape.val(total)[0];
    out.ce = tape.val(ce)[0];
    if (!std::isfinite(out.loss)) {
        throw numeric_error("non-finite training loss at epoch " + std::to_string(epoch) + " step " + std::to_string(step_in_epoch) +
                            "; last written checkpoint is retained");
    }
    out.pscl_v = component_values[0];
    out.center_v = component_values[1];
    out.contrast_v = component_values[2];
    tape.backward(total);
    out.grads = collect_param_grads(tape, model, bound);
    return out;
}

void check_params_finite(Model& model, int epoch) {
    model.for_each_param([&](const std::string& name, Tensor& t, bool) {
        if (!t.all_finite()) {
            throw numeric_error("parameter '" + name + "' became non-finite after epoch " + std::to_string(epoch));
        }
    });
}

}  // namespace

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

bool should_stop_early(const std::vector<double>& epoch_losses, int patience) {
    const int n = static_cast<int>(epoch_losses.size());
    if (n < patience + 1) return false;
    for (int k = 0; k < patience; ++k) {
        const std::size_t e = static_cast<std::size_t>(n - 1 - k);
        if (epoch_losses[e] < epoch_losses[e - 1]) return false;
    }
    return true;
}

TrainResult train(const RunConfig& cfg, std::ostream& log) {
    validate_config(cfg);
    if (cfg.train_manifest.empty()) throw config_error("train_manifest is required");
    const MaskMode mask_mode = parse_mask_mode(cfg.mask_mode);
    const bool need_annotations = mask_mode == MaskMode::normal && cfg.mask_source == "annotations";
    DataSource ds = DataSource::open(cfg.train_manifest, cfg.breath_annotations, need_annotations);
    fs::create_directories(cfg.out_dir);

    Model model = Model::init(model_config(cfg), cfg.seed);
    model.center.momentum = cfg.center_momentum;
    AdamState adam;

    TrainResult result;
    for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        std::vector<std::size_t> order(ds.entries.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        Rng shuffle_rng(derive_seed(cfg.seed, 0xE0000ull + static_cast<std::uint64_t>(epoch)));
        for (std::size_t i = order.size(); i > 1; --i) {
            std::swap(order[i - 1], order[static_cast<std::size_t>(shuffle_rng.uniform_int(0, static_cast<int>(i) - 1))]);
        }

        double epoch_loss = 0.0, epoch_ce = 0.0, epoch_pscl = 0.0, epoch_center = 0.0, epoch_contrast = 0.0;
        int batches = 0;
        for (std::size_t at = 0; at < order.size(); at += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t end = std::min(order.size(), at + static_cast<std::size_t>(cfg.batch_size));
            const std::vector<std::size_t> batch(order.begin() + static_cast<std::ptrdiff_t>(at), order.begin() + static_cast<std::ptrdiff_t>(end));
            BatchOutcome outcome = run_batch(model, ds, batch, cfg, mask_mode, epoch, batches);
            adam_step(model, outcome.grads, adam, cfg);
            epoch_loss += outcome.loss;
            epoch_ce += outcome.ce;
            epoch_pscl += outcome.pscl_v;
            epoch_center += outcome.center_v;
            epoch_contrast += outcome.contrast_v;
            ++batches;
        }
        epoch_loss /= std::max(1, batches);
        check_params_finite(model, epoch);
        result.epoch_losses.push_back(epoch_loss);

        const std::string ck_path = (fs::path(cfg.out_dir) / ("checkpoint_epoch_" + std::to_string(epoch) + ".bnck")).string();
        save_checkpoint(ck_path, snapshot_model(model, epoch, result.epoch_losses));
        result.checkpoint_paths.push_back(ck_path);
        log << "epoch " << epoch << " mean total loss " << epoch_loss << " (ce " << epoch_ce / std::max(1, batches) << " pscl "
            << epoch_pscl / std::max(1, batches) << " center " << epoch_center / std::max(1, batches) << " contrast "
            << epoch_contrast / std::max(1, batches) << ")\n";

        if (should_stop_early(result.epoch_losses, cfg.patience)) {
            log << "early stop: training loss has not improved for " << cfg.patience << " consecutive epochs\n";
            result.early_stopped = true;
            break;
        }
    }

    if (!result.checkpoint_paths.empty()) {
        const int avg_n = std::min<int>(cfg.checkpoint_average, static_cast<int>(result.checkpoint_paths.size()));
        std::vector<Checkpoint> last;
        for (int i = static_cast<int>(result.checkpoint_paths.size()) - avg_n; i < static_cast<int>(result.checkpoint_paths.size()); ++i) {
            last.push_back(load_checkpoint(result.checkpoint_paths[static_cast<std::size_t>(i)]));
        }
        const Checkpoint avg = average_checkpoints(last);
        result.averaged_path = (fs::path(cfg.out_dir) / "final.bnck").string();
        save_checkpoint(result.averaged_path, avg);
        log << "averaged last " << avg_n << " checkpoints -> " << result.averaged_path << "\n";
    }
    return result;
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------

EvalResult evaluate(const RunConfig& cfg, const std::string& checkpoint_path, const std::string& manifest_path,
                    MaskMode mode, const std::string& score_path, std::ostream& log) {
    validate_config(cfg);
    const bool need_annotations = mode == MaskMode::normal && cfg.mask_source == "annotations";
    DataSource ds = DataSource::open(manifest_path, need_annotations ? cfg.breath_annotations : std::string(), need_annotations);

    Model model = Model::init(model_config(cfg), cfg.seed);
    restore_model(model, load_checkpoint(checkpoint_path));

    EvalResult result;
    for (std::size_t i = 0; i < ds.entries.size(); ++i) {
        Waveform w;
        try {
            w = read_wav(ds.wav_path(i));
        } catch (const data_error& e) {
            log << "warning: skipping utterance '" << ds.entries[i].utt_id << "': " << e.what() << "\n";
            ++result.skipped;
            continue;
        }
        const Waveform normalized = normalize_duration(w, cfg.target_samples);
        const BreathMask mask = make_mask(ds, i, normalized, cfg, mode);
        Tape tape;
        BoundModel bound = bind_model(tape, model, false);
        ForwardOut out = model_forward(tape, model, bound, normalized, mask, false);
        ScoreRecord rec;
        rec.utt_id = ds.entries[i].utt_id;
        rec.is_bonafide = ds.entries[i].is_bonafide;
        rec.score = detection_score(tape, out);
        rec.condition = ds.entries[i].style;
        result.records.push_back(std::move(rec));
        ++result.scored;
    }
    if (result.records.empty()) throw data_error("no utterance could be scored from " + manifest_path);

    if (!score_path.empty()) {
        const std::string dir = path_dirname(score_path);
        if (!dir.empty()) fs::create_directories(dir);
        write_score_file(score_path, result.records);
        result.score_path = score_path;
    }
    result.eer_value = eer(result.records);
    result.min_dcf_value = min_dcf(result.records);
    result.cllr_value = cllr(result.records);
    char line[160];
    std::snprintf(line, sizeof(line), "mask=%s scored=%d skipped=%d EER=%.4f%% minDCF=%.4f CLLR=%.4f\n",
                  mask_mode_name(mode).c_str(), result.scored, result.skipped, 100.0 * result.eer_value, result.min_dcf_value,
                  result.cllr_value);
    log << line;
    return result;
}

// ---------------------------------------------------------------------------
// ablation
// ---------------------------------------------------------------------------

bool subset_eer(const std::vector<ScoreRecord>& records, const std::vector<std::string>& spoof_styles, double* out) {
    std::vector<ScoreRecord> subset;
    for (const ScoreRecord& r : records) {
        if (r.is_bonafide || std::find(spoof_styles.begin(), spoof_styles.end(), r.condition) != spoof_styles.end()) {
            subset.push_back(r);
        }
    }
    bool has_bona = false, has_spoof = false;
    for (const ScoreRecord& r : subset) (r.is_bonafide ? has_bona : has_spoof) = true;
    if (!has_bona || !has_spoof) return false;
    *out = eer(subset);
    return true;
}

AblationResult ablate(const RunConfig& cfg, std::ostream& log) {
    validate_config(cfg);
    if (cfg.eval_manifest.empty()) throw config_error("ablate requires eval_manifest");

    struct Variant {
        std::string name;
        std::function<void(RunConfig&)> apply;
    };
    const std::vector<Variant> variants = {
        {"full", [](RunConfig&) {}},
        {"wo_breathfilm", [](RunConfig& c) { c.film_enabled = false; }},
        {"wo_freq", [](RunConfig& c) { c.freq_enabled = false; }},
        {"wo_feature_loss", [](RunConfig& c) { c.lambda = 0.0; }},
        {"wo_pscl", [](RunConfig& c) { c.use_pscl = false; }},
        {"wo_center", [](RunConfig& c) { c.use_center = false; }},
        {"wo_contrast", [](RunConfig& c) { c.use_contrast = false; }},
    };

    AblationResult result;
    for (const Variant& v : variants) {
        RunConfig vc = cfg;
        v.apply(vc);
        vc.out_dir = (fs::path(cfg.out_dir) / v.name).string();
        log << "--- variant " << v.name << " ---\n";
        TrainResult tr = train(vc, log);
        if (tr.averaged_path.empty()) throw data_error("ablate: variant '" + v.name + "' trained no checkpoints");
        const std::string score_path = (fs::path(vc.out_dir) / "eval_scores.tsv").string();
        EvalResult ev = evaluate(vc, tr.averaged_path, vc.eval_manifest, parse_mask_mode(vc.mask_mode), score_path, log);
        AblationRow row;
        row.variant = v.name;
        row.eer_pooled = ev.eer_value;
        row.breath_valid = subset_eer(ev.records, {"no_breath", "breath_removed"}, &row.eer_breath_subset);
        row.spectral_valid = subset_eer(ev.records, {"comb_artifact", "lowpass"}, &row.eer_spectral_subset);
        result.rows.push_back(row);
    }

    std::ostringstream table;
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%-16s  %10s  %14s  %16s\n", "variant", "EER%", "breath-EER%", "spectral-EER%");
    table << buf;
    for (const AblationRow& r : result.rows) {
        char breath[24], spectral[24];
        if (r.breath_valid) std::snprintf(breath, sizeof(breath), "%.3f", 100.0 * r.eer_breath_subset);
        else std::snprintf(breath, sizeof(breath), "n/a");
        if (r.spectral_valid) std::snprintf(spectral, sizeof(spectral), "%.3f", 100.0 * r.eer_spectral_subset);
        else std::snprintf(spectral, sizeof(spectral), "n/a");
        std::snprintf(buf, sizeof(buf), "%-16s  %10.3f  %14s  %16s\n", r.variant.c_str(), 100.0 * r.eer_pooled, breath, spectral);
        table << buf;
    }
    result.table = table.str();
    log << result.table;
    return result;
}

// ---------------------------------------------------------------------------
// embedding export
// ---------------------------------------------------------------------------

void export_embeddings(const RunConfig& cfg, const std::string& checkpoint_path, const std::string& manifest_path,
                       const std::string& out_path, std::ostream& log) {
    validate_config(cfg);
    const MaskMode mode = parse_mask_mode(cfg.mask_mode);
    const bool need_annotations = mode == MaskMode::normal && cfg.mask_source == "annotations";
    DataSource ds = DataSource::open(manifest_path, need_annotations ? cfg.breath_annotations : std::string(), need_annotations);

    Model model = Model::init(model_config(cfg), cfg.seed);
    restore_model(model, load_checkpoint(checkpoint_path));

    const std::string dir = path_dirname(out_path);
    if (!dir.empty()) fs::create_directories(dir);
    std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
    if (!out) throw data_error("cannot write embedding file: " + out_path);
    out << "utt_id,label";
    for (int d = 0; d < model.cfg.dim; ++d) out << ",e" << d;
    out << "\n";

    int exported = 0;
    for (std::size_t i = 0; i < ds.entries.size(); ++i) {
        Waveform w;
        try {
            w = read_wav(ds.wav_path(i));
        } catch (const data_error& e) {
            log << "warning: skipping utterance '" << ds.entries[i].utt_id << "': " << e.what() << "\n";
            continue;
        }
        const Waveform normalized = normalize_duration(w, cfg.target_samples);
        const BreathMask mask = make_mask(ds, i, normalized, cfg, mode);
        Tape tape;
        BoundModel bound = bind_model(tape, model, false);
        ForwardOut fwd = model_forward(tape, model, bound, normalized, mask, false);
        const Tensor& z = tape.val(fwd.embedding);
        out << ds.entries[i].utt_id << ',' << (ds.entries[i].is_bonafide ? "bonafide" : "spoof");
        char num[32];
        for (std::int64_t j = 0; j < z.size(); ++j) {
            std::snprintf(num, sizeof(num), "%.8g", z[j]);
            out << ',' << num;
        }
        out << '\n';
        ++exported;
    }
    log << "exported " << exported << " embeddings -> " << out_path << "\n";
}

}  // namespace breathnet
