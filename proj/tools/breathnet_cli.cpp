// Command-line front end: corpus synthesis, training, evaluation, ablation,
// embedding export, and offline scoring of an existing score file.

#include <cstdio>
#include <iostream>
#include <map>
#include <string>

#include <CLI11.hpp>

#include "breathnet/config.hpp"
#include "breathnet/errors.hpp"
#include "breathnet/metrics.hpp"
#include "breathnet/synthcorpus.hpp"
#include "breathnet/trainer.hpp"

namespace {

using namespace breathnet;

struct ConfigCli {
    std::string config_path;
    std::map<std::string, std::string> overrides;
};

// Registers --config plus one string flag per config key; flags override the
// file.
void add_config_options(CLI::App* cmd, ConfigCli& cc) {
    cmd->add_option("--config", cc.config_path, "config file (key = value lines)");
    for (const ConfigKey& key : config_schema()) {
        const std::string flag = "--" + key.name;
        const std::string help = key.description + " [" + key.type + ", default " + key.default_value + "]";
        cmd->add_option_function<std::string>(
            flag, [&cc, name = key.name](const std::string& v) { cc.overrides[name] = v; }, help);
    }
}

RunConfig resolve_config(const ConfigCli& cc) {
    RunConfig cfg = cc.config_path.empty() ? RunConfig() : load_config_file(cc.config_path);
    for (const auto& [k, v] : cc.overrides) apply_config_kv(cfg, k, v);
    validate_config(cfg);
    return cfg;
}

int run(int argc, char** argv) {
    CLI::App app{"breath-cue audio anti-spoofing pipeline"};
    app.require_subcommand(1);

    // --- synth ---
    auto* synth = app.add_subcommand("synth", "generate the synthetic corpus");
    CorpusSpec corpus;
    std::string synth_out = "data/synth";
    synth->add_option("--out", synth_out, "corpus output directory");
    synth->add_option("--train-bonafide", corpus.train_bonafide, "bona fide utterances in the train split");
    synth->add_option("--train-spoof", corpus.train_spoof, "spoof utterances in the train split");
    synth->add_option("--eval-bonafide", corpus.eval_bonafide, "bona fide utterances in the eval split");
    synth->add_option("--eval-spoof", corpus.eval_spoof, "spoof utterances in the eval split");
    synth->add_option("--duration", corpus.duration_s, "utterance duration in seconds");
    synth->add_option("--seed", corpus.master_seed, "corpus master seed");
    synth->add_option("--style-mix", corpus.style_mix,
                      "spoof style mixture: no_breath comb_artifact lowpass breath_removed");

    // --- train ---
    auto* train_cmd = app.add_subcommand("train", "train a model");
    ConfigCli train_cc;
    add_config_options(train_cmd, train_cc);

    // --- eval ---
    auto* eval_cmd = app.add_subcommand("eval", "score a manifest with a checkpoint");
    ConfigCli eval_cc;
    std::string eval_checkpoint, eval_manifest_arg, eval_scores;
    bool eval_breakdown = false;
    add_config_options(eval_cmd, eval_cc);
    eval_cmd->add_option("--checkpoint", eval_checkpoint, "checkpoint to evaluate")->required();
    eval_cmd->add_option("--manifest", eval_manifest_arg, "manifest to score (default: eval_manifest from config)");
    eval_cmd->add_option("--scores", eval_scores, "score file to write");
    eval_cmd->add_flag("--breakdown", eval_breakdown, "print per-condition EER breakdown");

    // --- ablate ---
    auto* ablate_cmd = app.add_subcommand("ablate", "train and evaluate the module-ablation grid");
    ConfigCli ablate_cc;
    add_config_options(ablate_cmd, ablate_cc);

    // --- export-emb ---
    auto* export_cmd = app.add_subcommand("export-emb", "export fused embeddings for external visualization");
    ConfigCli export_cc;
    std::string export_checkpoint, export_manifest, export_out = "embeddings.csv";
    add_config_options(export_cmd, export_cc);
    export_cmd->add_option("--checkpoint", export_checkpoint, "checkpoint to load")->required();
    export_cmd->add_option("--manifest", export_manifest, "manifest to embed (default: eval_manifest from config)");
    export_cmd->add_option("--out", export_out, "output csv path");

    // --- score ---
    auto* score_cmd = app.add_subcommand("score", "compute metrics over an existing score file");
    std::string score_file, score_breakdown_out;
    bool score_breakdown = false;
    double dcf_cmiss = 1.0, dcf_cfa = 10.0, dcf_prior = 0.05;
    score_cmd->add_option("file", score_file, "score file (utt\\tlabel\\tscore[\\tcondition])")->required();
    score_cmd->add_flag("--breakdown", score_breakdown, "per-condition EER breakdown");
    score_cmd->add_option("--breakdown-out", score_breakdown_out, "write the breakdown as tsv");
    score_cmd->add_option("--dcf-cmiss", dcf_cmiss, "minDCF miss cost");
    score_cmd->add_option("--dcf-cfa", dcf_cfa, "minDCF false-alarm cost");
    score_cmd->add_option("--dcf-prior", dcf_prior, "minDCF target prior");

    // --- dump-config ---
    auto* dump_cmd = app.add_subcommand("dump-config", "print the documented default configuration");

    CLI11_PARSE(app, argc, argv);

    if (synth->parsed()) {
        generate_corpus(corpus, synth_out);
        std::cout << "corpus written to " << synth_out << "\n";
        return 0;
    }
    if (train_cmd->parsed()) {
        const RunConfig cfg = resolve_config(train_cc);
        TrainResult r = train(cfg, std::cout);
        if (r.averaged_path.empty()) {
            std::cout << "no epochs trained (max_epochs reached 0); nothing written\n";
        } else {
            std::cout << "final averaged checkpoint: " << r.averaged_path << "\n";
        }
        return 0;
    }
    if (eval_cmd->parsed()) {
        const RunConfig cfg = resolve_config(eval_cc);
        const std::string manifest = eval_manifest_arg.empty() ? cfg.eval_manifest : eval_manifest_arg;
        if (manifest.empty()) throw config_error("eval: give --manifest or set eval_manifest");
        const std::string scores = eval_scores.empty() ? cfg.out_dir + "/eval_scores_" + cfg.mask_mode + ".tsv" : eval_scores;
        EvalResult r = evaluate(cfg, eval_checkpoint, manifest, parse_mask_mode(cfg.mask_mode), scores, std::cout);
        std::cout << "scores written to " << r.score_path << "\n";
        if (eval_breakdown) std::cout << format_breakdown(pooled_breakdown(r.records));
        return 0;
    }
    if (ablate_cmd->parsed()) {
        const RunConfig cfg = resolve_config(ablate_cc);
        ablate(cfg, std::cout);
        return 0;
    }
    if (export_cmd->parsed()) {
        const RunConfig cfg = resolve_config(export_cc);
        const std::string manifest = export_manifest.empty() ? cfg.eval_manifest : export_manifest;
        if (manifest.empty()) throw config_error("export-emb: give --manifest or set eval_manifest");
        export_embeddings(cfg, export_checkpoint, manifest, export_out, std::cout);
        return 0;
    }
    if (score_cmd->parsed()) {
        const std::vector<ScoreRecord> records = read_score_file(score_file);
        char line[128];
        std::snprintf(line, sizeof(line), "EER=%.4f%% minDCF=%.4f CLLR=%.4f (n=%zu)\n", 100.0 * eer(records),
                      min_dcf(records, dcf_cmiss, dcf_cfa, dcf_prior), cllr(records), records.size());
        std::cout << line;
        if (score_breakdown || !score_breakdown_out.empty()) {
            const Breakdown b = pooled_breakdown(records);
            if (score_breakdown) std::cout << format_breakdown(b);
            if (!score_breakdown_out.empty()) write_breakdown_tsv(score_breakdown_out, b);
        }
        return 0;
    }
    if (dump_cmd->parsed()) {
        std::cout << render_config(RunConfig());
        return 0;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const config_error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const data_error& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const numeric_error& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
