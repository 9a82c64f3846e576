// Command-line entry point wiring dataset construction, training, scoring,
// evaluation protocols and the analysis/plot emitters behind subcommands.
// Exit codes: 0 success, 1 domain error, 2 usage error.

#include <CLI11.hpp>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "glint/core/error.hpp"
#include "glint/data/distortions.hpp"
#include "glint/data/image.hpp"
#include "glint/eval/analysis.hpp"
#include "glint/eval/correlation.hpp"
#include "glint/eval/ftest.hpp"
#include "glint/eval/gmad.hpp"
#include "glint/eval/protocol.hpp"
#include "glint/io/hash.hpp"
#include "glint/nn/model.hpp"
#include "glint/saqt/builder.hpp"
#include "glint/train/trainer.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace glint;

namespace {

struct ModelOptions {
    bool surrogate = false;
    int input_size = 224;
    std::string fusion_order = "clfe_to_vgfe";
    double dropout = 0.1;

    json to_json() const {
        return json{{"surrogate", surrogate},
                    {"input_size", input_size},
                    {"fusion_order", fusion_order},
                    {"dropout", dropout}};
    }
    static ModelOptions from_json(const json& j) {
        ModelOptions o;
        o.surrogate = j.value("surrogate", false);
        o.input_size = j.value("input_size", 224);
        o.fusion_order = j.value("fusion_order", std::string("clfe_to_vgfe"));
        o.dropout = j.value("dropout", 0.1);
        return o;
    }
    nn::ModelConfig resolve() const {
        nn::ModelConfig cfg = surrogate ? nn::surrogate_config() : nn::ModelConfig{};
        if (surrogate && input_size != 224) cfg.input_size = input_size;
        if (!surrogate) cfg.input_size = input_size;
        cfg.fusion_order = nn::fusion_order_from_string(fusion_order);
        cfg.dropout = dropout;
        return cfg;
    }
};

// seeded init, optionally served from the GLINT_CACHE weight directory
std::unique_ptr<nn::GlintModel> build_model(const ModelOptions& opts,
                                            std::uint64_t seed,
                                            bool random_init) {
    auto cfg = opts.resolve();
    auto model = std::make_unique<nn::GlintModel>(cfg, seed);
    const char* cache = std::getenv("GLINT_CACHE");
    if (cache && !random_init) {
        std::string key = config_hash(opts.to_json().dump() + "#" +
                                      std::to_string(seed));
        fs::path p = fs::path(cache) / ("init_" + key + ".ckpt");
        if (fs::exists(p)) {
            train::Checkpoint::load(p.string()).restore(model->params());
        } else {
            fs::create_directories(cache);
            train::Adam opt;
            train::Checkpoint::capture(model->params(), opt, -1, 0.0, key)
                .save(p.string());
        }
    }
    return model;
}

std::vector<train::TrainItem> load_items_csv(const std::string& csv) {
    auto ds = eval::load_dataset_csv(csv, "train");
    std::vector<train::TrainItem> items;
    for (const auto& it : ds.items)
        items.push_back({it.id, load_image(it.path), it.label});
    return items;
}

std::vector<train::TrainItem> load_items_manifest(const std::string& path) {
    auto manifest = saqt::DatasetManifest::load(path);
    std::vector<train::TrainItem> items;
    for (const auto& r : manifest.records)
        items.push_back({r.hq_id + "/" + r.family + "/l" +
                             std::to_string(r.level),
                         load_image(r.image_path), r.label});
    return items;
}

void write_json(const std::string& path, const json& j) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot write " + path);
    f << j.dump(2) << "\n";
}

std::map<std::string, double> load_scores_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open scores csv " + path);
    std::map<std::string, double> out;
    std::string line;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        auto comma = line.find(',');
        if (comma == std::string::npos)
            throw DataError("scores csv: malformed row '" + line + "'");
        std::string id = line.substr(0, comma);
        if (id == "id") continue;  // header
        out[id] = std::stod(line.substr(comma + 1));
    }
    if (out.empty()) throw DataError("scores csv: no rows in " + path);
    return out;
}

// ---- subcommand bodies ---------------------------------------------------

int cmd_build_dataset(const std::string& hq_dir, const std::string& corpus_path,
                      const std::string& out_dir,
                      std::vector<std::string> families, std::uint64_t seed,
                      bool no_images) {
    auto corpus = saqt::load_corpus(corpus_path);
    DistortionBank bank;
    if (families.empty() && !corpus.entries.empty())
        for (const auto& [fam, v] : corpus.entries.front().mos)
            families.push_back(fam);
    saqt::EmbeddingExtractor extractor(seed);
    saqt::BuildConfig cfg;
    cfg.families = families;
    cfg.seed = seed;
    cfg.out_dir = (fs::path(out_dir) / "images").string();
    cfg.write_images = !no_images;
    fs::create_directories(out_dir);
    auto [manifest, stats] = saqt::build_dataset(hq_dir, corpus, bank,
                                                 extractor, cfg);
    manifest.save((fs::path(out_dir) / "manifest.jsonl").string());
    std::cout << "records=" << manifest.records.size()
              << " hq_images=" << stats.hq_images
              << " failed=" << stats.failed_files
              << " distance_mean=" << stats.distance_mean
              << " distance_std=" << stats.distance_std << "\n";
    return 0;
}

int cmd_train(const std::string& manifest, const std::string& labels,
              const std::string& out_dir, const ModelOptions& mopts,
              train::TrainConfig tcfg, double val_fraction, bool random_init,
              bool deterministic, const std::string& resume_path) {
    if (deterministic) tcfg.val_patches = std::max(1, tcfg.val_patches);
    auto items = manifest.empty() ? load_items_csv(labels)
                                  : load_items_manifest(manifest);
    if (items.size() < 2) throw InputError("train: need at least 2 items");
    std::size_t n_val = static_cast<std::size_t>(
        static_cast<double>(items.size()) * val_fraction);
    std::vector<train::TrainItem> val(items.end() - static_cast<long>(n_val),
                                      items.end());
    items.resize(items.size() - n_val);

    json run_cfg = {{"model", mopts.to_json()},
                    {"epochs", tcfg.epochs},
                    {"batch_size", tcfg.batch_size},
                    {"initial_lr", tcfg.initial_lr},
                    {"weight_decay", tcfg.weight_decay},
                    {"mode", tcfg.mode},
                    {"seed", tcfg.seed},
                    {"deterministic", deterministic}};
    std::string hash = config_hash(run_cfg.dump());

    auto model = build_model(mopts, tcfg.seed, random_init);
    fs::create_directories(out_dir);
    std::unique_ptr<train::Checkpoint> resume;
    if (!resume_path.empty())
        resume = std::make_unique<train::Checkpoint>(
            train::Checkpoint::load(resume_path));
    auto result = train::fit(*model, items, val, tcfg,
                             (fs::path(out_dir) / "log.jsonl").string(), hash,
                             resume.get());
    result.best.meta = mopts.to_json().dump();
    result.last.meta = result.best.meta;
    result.best.save((fs::path(out_dir) / "best.ckpt").string());
    result.last.save((fs::path(out_dir) / "last.ckpt").string());
    run_cfg["config_hash"] = hash;
    write_json((fs::path(out_dir) / "config.json").string(), run_cfg);
    std::cout << "epochs=" << result.log.size()
              << " final_loss=" << (result.log.empty() ? 0.0 : result.log.back().loss)
              << " best_val_srocc=" << result.best_val_srocc
              << " config_hash=" << hash << "\n";
    return 0;
}

int cmd_score(const std::string& image_path, const std::string& ckpt_path,
              int patches, std::uint64_t seed) {
    auto ckpt = train::Checkpoint::load(ckpt_path);
    if (ckpt.meta.empty())
        throw DataError("checkpoint has no model descriptor");
    auto mopts = ModelOptions::from_json(json::parse(ckpt.meta));
    auto model = build_model(mopts, seed, /*random_init=*/true);
    ckpt.restore(model->params());
    auto img = load_image(image_path);
    double s = train::infer_patch_averaged(*model, img, patches, seed);
    std::printf("%.4f\n", s);
    return 0;
}

int cmd_evaluate(const std::string& labels, const std::string& out,
                 bool oracle, int repeats, const ModelOptions& mopts,
                 train::TrainConfig tcfg, std::uint64_t seed) {
    auto ds = eval::load_dataset_csv(labels, "dataset");
    eval::ModelFactory factory;
    if (oracle) {
        factory = [](const std::vector<eval::EvalItem>&, std::uint64_t) {
            return [](const eval::EvalItem& it) { return it.label; };
        };
    } else {
        factory = [&](const std::vector<eval::EvalItem>& train_items,
                      std::uint64_t s) {
            std::vector<train::TrainItem> items;
            for (const auto& it : train_items)
                items.push_back({it.id, load_image(it.path), it.label});
            auto model = std::make_shared<nn::GlintModel>(mopts.resolve(), s);
            train::fit(*model, items, {}, tcfg);
            return [model, s](const eval::EvalItem& it) {
                return train::infer_patch_averaged(*model, load_image(it.path),
                                                   10, s);
            };
        };
    }
    auto report = eval::run_protocol(factory, ds, repeats, seed,
                                     oracle ? "oracle" : "model");
    std::printf("srocc=%.3f plcc=%.3f\n", report.srocc_median,
                report.plcc_median);
    if (!out.empty()) {
        auto j = report.to_json();
        j["config_hash"] = config_hash(j.dump());
        write_json(out, j);
    }
    return 0;
}

int cmd_cross_eval(const std::string& ckpt_path, const std::string& source,
                   const std::vector<std::string>& target_specs,
                   const std::string& out, int patches, std::uint64_t seed) {
    auto ckpt = train::Checkpoint::load(ckpt_path);
    if (ckpt.meta.empty())
        throw DataError("checkpoint has no model descriptor");
    auto mopts = ModelOptions::from_json(json::parse(ckpt.meta));
    auto model = build_model(mopts, seed, /*random_init=*/true);
    ckpt.restore(model->params());

    std::vector<eval::DatasetView> targets;
    for (const auto& spec : target_specs) {
        auto eq = spec.find('=');
        if (eq == std::string::npos)
            throw InputError("--target expects tag=labels.csv, got '" + spec +
                             "'");
        targets.push_back(eval::load_dataset_csv(spec.substr(eq + 1),
                                                 spec.substr(0, eq)));
    }
    eval::Predictor pred = [&](const eval::EvalItem& it) {
        return train::infer_patch_averaged(*model, load_image(it.path), patches,
                                           seed);
    };
    auto report = eval::cross_eval(pred, source, targets);
    for (std::size_t i = 0; i < report.dataset_tags.size(); ++i)
        std::printf("%s srocc=%.3f plcc=%.3f\n", report.dataset_tags[i].c_str(),
                    report.srocc_per_repeat[i], report.plcc_per_repeat[i]);
    if (!out.empty()) {
        auto j = report.to_json();
        j["config_hash"] = config_hash(j.dump());
        write_json(out, j);
    }
    return 0;
}

int cmd_analyze_semantic(const std::string& corpus_path,
                         const std::string& out_dir, double bin_width,
                         std::uint64_t seed) {
    auto corpus = saqt::load_corpus(corpus_path);
    saqt::EmbeddingExtractor extractor(seed);
    std::vector<eval::AnalysisEntry> entries;
    for (const auto& e : corpus.entries) {
        eval::AnalysisEntry a;
        a.id = e.id;
        a.embedding = extractor(load_image(e.path), e.id);
        for (const auto& [fam, v] : e.mos)  // map order: sorted by family
            a.mos.insert(a.mos.end(), v.begin(), v.end());
        entries.push_back(std::move(a));
    }
    auto table = eval::analyze_distance_quality(entries, bin_width);
    fs::create_directories(out_dir);
    table.save_csv((fs::path(out_dir) / "distance_quality.csv").string());
    table.save_plot((fs::path(out_dir) / "distance_quality.svg").string());
    for (const auto& b : table.bins)
        std::printf("bin %.3f pairs=%zu mean_plcc=%.4f std=%.4f\n", b.center,
                    b.pairs, b.mean_plcc, b.std_plcc);
    if (table.skipped_pairs)
        std::printf("skipped_pairs=%zu\n", table.skipped_pairs);
    return 0;
}

int cmd_gmad(const std::string& defender_csv, const std::string& attacker_csv,
             int levels, const std::string& out_dir) {
    auto defender = load_scores_csv(defender_csv);
    auto attacker = load_scores_csv(attacker_csv);
    auto pairs = eval::gmad_pairs(defender, attacker, levels);
    fs::create_directories(out_dir);
    {
        std::ofstream f((fs::path(out_dir) / "gmad_pairs.csv").string());
        f << "level,low_img,high_img,attacker_gap\n";
        for (const auto& p : pairs)
            f << p.level << "," << p.low_img << "," << p.high_img << ","
              << p.attacker_gap << "\n";
    }
    eval::PlotSeries s;
    for (const auto& p : pairs) {
        s.x.push_back(p.level);
        s.y.push_back(p.attacker_gap);
    }
    eval::write_svg_plot((fs::path(out_dir) / "gmad_gaps.svg").string(), s,
                         "Attacker score gap per defender quality level",
                         "defender quality level", "attacker gap");
    for (const auto& p : pairs)
        std::printf("level %d: %s vs %s (gap %.4f)\n", p.level,
                    p.low_img.c_str(), p.high_img.c_str(), p.attacker_gap);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"glint: no-reference image quality assessment toolkit"};
    app.require_subcommand(1);
    app.set_config("--config", "", "read options from a config file");

    std::uint64_t seed = 0;
    bool deterministic = false;
    app.add_option("--seed", seed, "global random seed");
    app.add_flag("--deterministic", deterministic,
                 "fix all sampler seeds for reproducible artifacts");

    // build-dataset
    auto* bd = app.add_subcommand("build-dataset",
                                  "match, degrade and label a corpus");
    std::string bd_hq, bd_corpus, bd_out = "dataset";
    std::vector<std::string> bd_families;
    bool bd_no_images = false;
    bd->add_option("--hq", bd_hq, "directory of high-quality images")
        ->required();
    bd->add_option("--corpus", bd_corpus,
                   "labeled pristine corpus JSON (ids, paths, MOS grids)")
        ->required();
    bd->add_option("--out", bd_out, "output directory");
    bd->add_option("--families", bd_families,
                   "distortion families (default: all in the corpus)");
    bd->add_flag("--no-images", bd_no_images,
                 "emit labels only, skip degraded image files");

    // shared model options
    auto add_model_opts = [](CLI::App* cmd, ModelOptions& m) {
        cmd->add_flag("--surrogate", m.surrogate,
                      "use the small test-scale model");
        cmd->add_option("--input-size", m.input_size, "square crop size");
        cmd->add_option("--fusion-order", m.fusion_order,
                        "clfe_to_vgfe or vgfe_to_clfe");
        cmd->add_option("--dropout", m.dropout, "head dropout rate");
    };

    // train
    auto* tr = app.add_subcommand("train", "train or fine-tune a model");
    std::string tr_manifest, tr_labels, tr_out = "runs/run";
    std::string tr_mode = "finetune", tr_resume;
    ModelOptions tr_model;
    double tr_val_fraction = 0.2;
    bool tr_random_init = false;
    int tr_epochs = -1, tr_batch = -1;
    double tr_lr = -1.0, tr_wd = -1.0;
    tr->add_option("--manifest", tr_manifest, "dataset manifest JSONL");
    tr->add_option("--labels", tr_labels, "labels CSV alternative");
    tr->add_option("--out", tr_out, "run output directory");
    tr->add_option("--mode", tr_mode, "finetune or pretrain");
    tr->add_option("--epochs", tr_epochs, "override epoch count");
    tr->add_option("--batch-size", tr_batch, "override batch size");
    tr->add_option("--lr", tr_lr, "override initial learning rate");
    tr->add_option("--weight-decay", tr_wd, "override weight decay");
    tr->add_option("--val-fraction", tr_val_fraction, "held-out fraction");
    tr->add_option("--resume", tr_resume, "checkpoint to continue from");
    tr->add_flag("--random-init", tr_random_init,
                 "skip the GLINT_CACHE weight cache");
    add_model_opts(tr, tr_model);

    // score
    auto* sc = app.add_subcommand("score", "score a single image");
    std::string sc_image, sc_ckpt;
    int sc_patches = 25;
    sc->add_option("--image", sc_image, "image to score")->required();
    sc->add_option("--ckpt", sc_ckpt, "model checkpoint")->required();
    sc->add_option("--patches", sc_patches, "random patches to average");

    // evaluate
    auto* ev = app.add_subcommand("evaluate",
                                  "repeated-split evaluation protocol");
    std::string ev_labels, ev_out;
    bool ev_oracle = false;
    int ev_repeats = 10, ev_epochs = 10;
    ModelOptions ev_model;
    ev->add_option("--labels", ev_labels, "labels CSV");
    ev->add_option("--out", ev_out, "report JSON path");
    ev->add_option("--repeats", ev_repeats, "number of random partitions");
    ev->add_option("--epochs", ev_epochs, "training epochs per repeat");
    ev->add_flag("--oracle", ev_oracle,
                 "self-test with a ground-truth predictor");
    add_model_opts(ev, ev_model);

    // cross-eval
    auto* ce = app.add_subcommand("cross-eval",
                                  "evaluate a checkpoint on unseen corpora");
    std::string ce_ckpt, ce_source, ce_out;
    std::vector<std::string> ce_targets;
    int ce_patches = 25;
    ce->add_option("--ckpt", ce_ckpt, "trained checkpoint")->required();
    ce->add_option("--source", ce_source, "tag of the training corpus")
        ->required();
    ce->add_option("--target", ce_targets, "tag=labels.csv (repeatable)")
        ->required();
    ce->add_option("--out", ce_out, "report JSON path");
    ce->add_option("--patches", ce_patches, "patches per image");

    // analyze-semantic
    auto* an = app.add_subcommand(
        "analyze-semantic", "distance vs label-agreement analysis and plot");
    std::string an_corpus, an_out = "analysis";
    double an_bin = 0.07;
    an->add_option("--corpus", an_corpus, "labeled pristine corpus JSON")
        ->required();
    an->add_option("--out-dir", an_out, "output directory");
    an->add_option("--bin-width", an_bin, "distance bin width");

    // gmad
    auto* gm = app.add_subcommand("gmad",
                                  "maximum-differentiation pair selection");
    std::string gm_def, gm_atk, gm_out = "gmad";
    int gm_levels = 6;
    gm->add_option("--defender", gm_def, "defender scores CSV (id,score)")
        ->required();
    gm->add_option("--attacker", gm_atk, "attacker scores CSV (id,score)")
        ->required();
    gm->add_option("--levels", gm_levels, "quality levels");
    gm->add_option("--out-dir", gm_out, "output directory");

    // let global options (--seed, --deterministic) appear after a subcommand
    for (auto* sub : app.get_subcommands([](const CLI::App*) { return true; }))
        sub->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n\n" << app.help() << std::endl;
        return 2;
    }

    try {
        if (bd->parsed())
            return cmd_build_dataset(bd_hq, bd_corpus, bd_out, bd_families,
                                     seed, bd_no_images);
        if (tr->parsed()) {
            auto tcfg = tr_mode == "pretrain" ? train::TrainConfig::pretrain()
                                              : train::TrainConfig::finetune();
            if (tr_mode != "pretrain" && tr_mode != "finetune")
                throw ConfigError("unknown mode '" + tr_mode + "'");
            if (tr_epochs > 0) tcfg.epochs = tr_epochs;
            if (tr_batch > 0) tcfg.batch_size = tr_batch;
            if (tr_lr > 0) tcfg.initial_lr = tr_lr;
            if (tr_wd >= 0) tcfg.weight_decay = tr_wd;
            tcfg.crop_size = tr_model.resolve().input_size;
            tcfg.seed = seed;
            if (tr_manifest.empty() == tr_labels.empty())
                throw InputError("train: provide exactly one of --manifest or "
                                 "--labels");
            return cmd_train(tr_manifest, tr_labels, tr_out, tr_model, tcfg,
                             tr_val_fraction, tr_random_init, deterministic,
                             tr_resume);
        }
        if (sc->parsed()) return cmd_score(sc_image, sc_ckpt, sc_patches, seed);
        if (ev->parsed()) {
            if (!ev_oracle && ev_labels.empty())
                throw InputError("evaluate: --labels required");
            if (ev_oracle && ev_labels.empty()) {
                // pure self-test: synthesize a small labeled set in memory
                eval::DatasetView ds;
                ds.tag = "oracle-selftest";
                for (int i = 0; i < 50; ++i)
                    ds.items.push_back({"img" + std::to_string(i),
                                        "c" + std::to_string(i), "", i * 0.17});
                eval::ModelFactory factory =
                    [](const std::vector<eval::EvalItem>&, std::uint64_t) {
                        return [](const eval::EvalItem& it) { return it.label; };
                    };
                auto rep = eval::run_protocol(factory, ds, ev_repeats, seed,
                                              "oracle");
                std::printf("srocc=%.3f plcc=%.3f\n", rep.srocc_median,
                            rep.plcc_median);
                return 0;
            }
            auto tcfg = train::TrainConfig::finetune();
            tcfg.epochs = ev_epochs;
            tcfg.seed = seed;
            tcfg.crop_size = ev_model.resolve().input_size;
            return cmd_evaluate(ev_labels, ev_out, ev_oracle, ev_repeats,
                                ev_model, tcfg, seed);
        }
        if (ce->parsed())
            return cmd_cross_eval(ce_ckpt, ce_source, ce_targets, ce_out,
                                  ce_patches, seed);
        if (an->parsed())
            return cmd_analyze_semantic(an_corpus, an_out, an_bin, seed);
        if (gm->parsed()) return cmd_gmad(gm_def, gm_atk, gm_levels, gm_out);
    } catch (const Error& e) {
        std::cerr << "error [" << e.code() << "] " << e.what() << std::endl;
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return 1;
    }
    return 2;  // unreachable with require_subcommand(1)
}
