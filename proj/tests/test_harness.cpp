#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <cmath>
#include <sstream>

#include "breathnet/checkpoint.hpp"
#include "breathnet/config.hpp"
#include "breathnet/errors.hpp"
#include "breathnet/optimizer.hpp"
#include "breathnet/events.hpp"
#include "breathnet/synthcorpus.hpp"
#include "breathnet/trainer.hpp"

using namespace breathnet;
namespace fs = std::filesystem;

namespace {

// Shared tiny corpus for harness tests (built once).
const std::string& tiny_corpus() {
    static const std::string dir = [] {
        const std::string d = "/tmp/breathnet_harness_corpus";
        if (!fs::exists(d + "/train.tsv")) {
            CorpusSpec spec;
            spec.train_bonafide = 4;
            spec.train_spoof = 8;
            spec.eval_bonafide = 3;
            spec.eval_spoof = 5;
            spec.master_seed = 21;
            generate_corpus(spec, d);
        }
        return d;
    }();
    return dir;
}

RunConfig tiny_config(const std::string& out_dir) {
    RunConfig cfg;
    cfg.encoder_layers = 2;
    cfg.model_dim = 8;
    cfg.film_hidden = 4;
    cfg.sinc_filters = 4;
    cfg.sinc_kernel = 33;
    cfg.heads = 2;
    cfg.lstm_hidden1 = 6;
    cfg.lstm_hidden2 = 4;
    cfg.batch_size = 4;
    cfg.max_epochs = 2;
    cfg.learning_rate = 1e-3;
    cfg.encoder_learning_rate = 1e-4;
    cfg.train_manifest = tiny_corpus() + "/train.tsv";
    cfg.eval_manifest = tiny_corpus() + "/eval.tsv";
    cfg.out_dir = out_dir;
    cfg.seed = 3;
    return cfg;
}

std::string file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("config: file parsing and overrides") {
    const std::string path = "/tmp/breathnet_test_config.cfg";
    std::ofstream out(path);
    out << "# comment line\n";
    out << "model_dim = 16\n";
    out << "lambda = 0.25   # trailing comment\n";
    out << "film_enabled = false\n";
    out << "mask_mode = zeros\n";
    out.close();
    RunConfig cfg = load_config_file(path);
    CHECK(cfg.model_dim == 16);
    CHECK(cfg.lambda == doctest::Approx(0.25));
    CHECK_FALSE(cfg.film_enabled);
    CHECK(cfg.mask_mode == "zeros");

    apply_config_kv(cfg, "model_dim", "32");
    CHECK(cfg.model_dim == 32);
    CHECK_THROWS_AS(apply_config_kv(cfg, "no_such_key", "1"), config_error);
    CHECK_THROWS_AS(apply_config_kv(cfg, "model_dim", "abc"), config_error);

    SUBCASE("validation rejects bad values") {
        RunConfig bad;
        bad.patience = 0;
        CHECK_THROWS_AS(validate_config(bad), config_error);
        RunConfig bad2;
        bad2.mask_mode = "sometimes";
        CHECK_THROWS_AS(validate_config(bad2), config_error);
    }
    SUBCASE("schema covers every key with defaults") {
        const auto schema = config_schema();
        CHECK(schema.size() >= 40);
        RunConfig defaults;
        for (const auto& key : schema) {
            // every schema key must be assignable with its own default
            apply_config_kv(defaults, key.name, key.default_value.empty() ? "" : key.default_value);
        }
    }
}

TEST_CASE("early-stop predicate") {
    CHECK_FALSE(should_stop_early({1.0}, 2));
    CHECK_FALSE(should_stop_early({3.0, 2.0, 1.0}, 2));
    CHECK_FALSE(should_stop_early({3.0, 3.5, 1.0}, 2));           // improved on the last epoch
    CHECK(should_stop_early({1.0, 1.0, 1.0}, 2));                 // two flat epochs
    CHECK(should_stop_early({2.0, 1.0, 1.2, 1.3}, 2));            // two rising epochs
    CHECK_FALSE(should_stop_early({2.0, 1.0, 1.2, 1.1}, 2));      // second epoch improved on the first
    CHECK(should_stop_early({2.0, 2.1}, 1));
}

TEST_CASE("train: zero epochs produce no checkpoints") {
    RunConfig cfg = tiny_config("/tmp/breathnet_run_zero");
    cfg.max_epochs = 0;
    std::ostringstream log;
    const TrainResult r = train(cfg, log);
    CHECK(r.checkpoint_paths.empty());
    CHECK(r.averaged_path.empty());
}

TEST_CASE("train: same seed gives identical checkpoint bytes and scores") {
    fs::remove_all("/tmp/breathnet_run_a");
    fs::remove_all("/tmp/breathnet_run_b");
    std::ostringstream log;
    RunConfig a = tiny_config("/tmp/breathnet_run_a");
    RunConfig b = tiny_config("/tmp/breathnet_run_b");
    const TrainResult ra = train(a, log);
    const TrainResult rb = train(b, log);
    REQUIRE_FALSE(ra.averaged_path.empty());
    CHECK(file_bytes(ra.averaged_path) == file_bytes(rb.averaged_path));

    const EvalResult ea = evaluate(a, ra.averaged_path, a.eval_manifest, MaskMode::normal, "/tmp/breathnet_run_a/s.tsv", log);
    const EvalResult eb = evaluate(b, rb.averaged_path, b.eval_manifest, MaskMode::normal, "/tmp/breathnet_run_b/s.tsv", log);
    CHECK(file_bytes(ea.score_path) == file_bytes(eb.score_path));
    CHECK(ea.scored == 8);

    SUBCASE("checkpoint save/load round-trips to bitwise-identical scores") {
        Model m = Model::init(model_config(a), a.seed);
        restore_model(m, load_checkpoint(ra.averaged_path));
        const std::string resaved = "/tmp/breathnet_run_a/resaved.bnck";
        save_checkpoint(resaved, snapshot_model(m, 1, {0.5, 0.4}));
        const EvalResult er = evaluate(a, resaved, a.eval_manifest, MaskMode::normal, "/tmp/breathnet_run_a/s2.tsv", log);
        CHECK(file_bytes(er.score_path) == file_bytes(ea.score_path));
    }
    SUBCASE("loading into a mismatched configuration fails") {
        RunConfig other = a;
        other.model_dim = 16;
        Model m = Model::init(model_config(other), 1);
        CHECK_THROWS_AS(restore_model(m, load_checkpoint(ra.averaged_path)), config_error);
    }
}

TEST_CASE("average_checkpoints") {
    RunConfig cfg = tiny_config("/tmp/breathnet_run_avg");
    Model m = Model::init(model_config(cfg), 9);
    const Checkpoint a = snapshot_model(m, 0, {1.0});
    SUBCASE("averaging identical checkpoints is the identity") {
        const Checkpoint avg = average_checkpoints({a, a, a});
        for (std::size_t i = 0; i < avg.params.size(); ++i) {
            CHECK(avg.params[i].second.data() == a.params[i].second.data());
        }
        CHECK(avg.epoch == 0);
    }
    SUBCASE("parameter mean of 0 and 2 is 1") {
        Checkpoint zero = a, two = a;
        for (auto& [name, t] : zero.params) t.fill(0.0);
        for (auto& [name, t] : two.params) t.fill(2.0);
        const Checkpoint avg = average_checkpoints({zero, two});
        for (const auto& [name, t] : avg.params) {
            for (std::int64_t i = 0; i < t.size(); ++i) CHECK(t[i] == 1.0);
        }
    }
    SUBCASE("unweighted mean over the given list: {A,A,B} differs from {A,B}") {
        Checkpoint zero = a, two = a;
        for (auto& [name, t] : zero.params) t.fill(0.0);
        for (auto& [name, t] : two.params) t.fill(3.0);
        const Checkpoint aab = average_checkpoints({zero, zero, two});
        const Checkpoint ab = average_checkpoints({zero, two});
        CHECK(aab.params[0].second[0] == doctest::Approx(1.0));
        CHECK(ab.params[0].second[0] == doctest::Approx(1.5));
    }
    SUBCASE("dimension mismatch names the offending tensor") {
        RunConfig other = cfg;
        other.model_dim = 16;
        Model m2 = Model::init(model_config(other), 9);
        const Checkpoint b = snapshot_model(m2, 1, {});
        CHECK_THROWS_AS(average_checkpoints({a, b}), data_error);
    }
}

TEST_CASE("evaluate: mask override modes never read breath annotations") {
    fs::remove_all("/tmp/breathnet_run_guard");
    std::ostringstream log;
    RunConfig cfg = tiny_config("/tmp/breathnet_run_guard");
    cfg.max_epochs = 1;
    const TrainResult tr = train(cfg, log);
    REQUIRE_FALSE(tr.averaged_path.empty());

    EventLog::instance().reset();
    const EvalResult ez = evaluate(cfg, tr.averaged_path, cfg.eval_manifest, MaskMode::zeros, "/tmp/breathnet_run_guard/z.tsv", log);
    const EvalResult eo = evaluate(cfg, tr.averaged_path, cfg.eval_manifest, MaskMode::ones, "/tmp/breathnet_run_guard/o.tsv", log);
    CHECK(EventLog::instance().count("annotation_parse") == 0);
    CHECK(EventLog::instance().count("annotation_file_read") == 0);
    CHECK(ez.scored == 8);
    CHECK(eo.scored == 8);

    const EvalResult en = evaluate(cfg, tr.averaged_path, cfg.eval_manifest, MaskMode::normal, "/tmp/breathnet_run_guard/n.tsv", log);
    CHECK(EventLog::instance().count("annotation_parse") > 0);
    CHECK(en.scored == 8);

    SUBCASE("an explicit annotation file is honored in normal mode only") {
        EventLog::instance().reset();
        RunConfig with_file = cfg;
        with_file.breath_annotations = tiny_corpus() + "/eval_breath.tsv";
        evaluate(with_file, tr.averaged_path, cfg.eval_manifest, MaskMode::normal, "", log);
        CHECK(EventLog::instance().count("annotation_file_read") == 1);
        EventLog::instance().reset();
        evaluate(with_file, tr.averaged_path, cfg.eval_manifest, MaskMode::zeros, "", log);
        CHECK(EventLog::instance().count("annotation_file_read") == 0);
    }
}

TEST_CASE("evaluate: error paths") {
    std::ostringstream log;
    RunConfig cfg = tiny_config("/tmp/breathnet_run_err");
    SUBCASE("empty manifest is a data error, no score file written") {
        const std::string empty = "/tmp/breathnet_empty_manifest.tsv";
        std::ofstream(empty).close();
        CHECK_THROWS_AS(evaluate(cfg, "nonexistent.bnck", empty, MaskMode::normal, "/tmp/should_not_exist.tsv", log), data_error);
        CHECK_FALSE(fs::exists("/tmp/should_not_exist.tsv"));
    }
    SUBCASE("unreadable utterances are skipped and counted") {
        fs::remove_all("/tmp/breathnet_run_err");
        RunConfig tc = tiny_config("/tmp/breathnet_run_err");
        tc.max_epochs = 1;
        const TrainResult tr = train(tc, log);
        // manifest with one broken path appended
        const std::string broken = "/tmp/breathnet_broken_manifest.tsv";
        fs::copy_file(tiny_corpus() + "/eval.tsv", broken, fs::copy_options::overwrite_existing);
        std::ofstream app(broken, std::ios::app);
        app << "ghost\twav/missing.wav\tspoof\tno_breath\t-\n";
        app.close();
        // the manifest dir must resolve: copy to corpus dir
        const std::string broken2 = tiny_corpus() + "/broken.tsv";
        fs::copy_file(broken, broken2, fs::copy_options::overwrite_existing);
        const EvalResult r = evaluate(tc, tr.averaged_path, broken2, MaskMode::normal, "", log);
        CHECK(r.skipped == 1);
        CHECK(r.scored == 8);
        CHECK(log.str().find("skipping utterance") != std::string::npos);
    }
}

TEST_CASE("export_embeddings: header plus one line per utterance, re-export identical") {
    fs::remove_all("/tmp/breathnet_run_emb");
    std::ostringstream log;
    RunConfig cfg = tiny_config("/tmp/breathnet_run_emb");
    cfg.max_epochs = 1;
    const TrainResult tr = train(cfg, log);
    const std::string out1 = "/tmp/breathnet_run_emb/e1.csv";
    const std::string out2 = "/tmp/breathnet_run_emb/e2.csv";
    export_embeddings(cfg, tr.averaged_path, cfg.eval_manifest, out1, log);
    export_embeddings(cfg, tr.averaged_path, cfg.eval_manifest, out2, log);
    CHECK(file_bytes(out1) == file_bytes(out2));

    std::ifstream in(out1);
    std::string header;
    std::getline(in, header);
    CHECK(header.rfind("utt_id,label,e0,", 0) == 0);
    int lines = 0;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        ++lines;
        CHECK(std::count(line.begin(), line.end(), ',') == 1 + cfg.model_dim);
    }
    CHECK(lines == 8);
}

TEST_CASE("encoder learning-rate split: encoder steps are 10x smaller at equal gradients") {
    RunConfig cfg = tiny_config("/tmp/breathnet_run_lr");
    cfg.learning_rate = 1e-5;
    cfg.encoder_learning_rate = 1e-6;
    cfg.weight_decay = 0.0;
    Model m = Model::init(model_config(cfg), 4);
    const Model before = m;

    std::vector<Tensor> grads;
    m.for_each_param([&](const std::string&, Tensor& t, bool) { grads.push_back(Tensor::full(t.rows(), t.cols(), 1.0)); });
    AdamState state;
    adam_step(m, grads, state, cfg);

    std::vector<double> enc_delta, rest_delta;
    std::size_t idx = 0;
    std::vector<const Tensor*> before_params;
    before.for_each_param([&](const std::string&, const Tensor& t, bool) { before_params.push_back(&t); });
    m.for_each_param([&](const std::string& name, Tensor& t, bool enc) {
        // sinc cutoffs pass through the post-step projection; skip them here
        if (name.rfind("sinc.", 0) == 0) {
            ++idx;
            return;
        }
        const double d = std::abs(t[0] - (*before_params[idx
])[0]);
        (enc ? enc_delta : rest_delta).push_back(d);
        ++idx;
    });
    REQUIRE_FALSE(enc_delta.empty());
    REQUIRE_FALSE(rest_delta.empty());
    for (double d : enc_delta) CHECK(d == doctest::Approx(enc_delta[0]).epsilon(1e-9));
    CHECK(rest_delta[0] / enc_delta[0] == doctest::Approx(10.0).epsilon(1e-6));
}
