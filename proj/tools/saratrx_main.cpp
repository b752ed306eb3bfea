// saratrx: synthetic-SAR self-supervised pre-training toolkit.
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "CLI11.hpp"
#include "json.hpp"

#include "saratrx/datakit.hpp"
#include "saratrx/eval.hpp"
#include "saratrx/features.hpp"
#include "saratrx/imageio.hpp"
#include "saratrx/pretrain.hpp"
#include "saratrx/specklesim.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace saratrx;

namespace {

// Environment overrides are limited to the output directory and workers.
fs::path resolve_out(const std::string& flag_value) {
    if (const char* env = std::getenv("SARATRX_OUT_DIR")) return fs::path(env);
    return fs::path(flag_value);
}

int resolve_workers(int flag_value) {
    if (const char* env = std::getenv("SARATRX_WORKERS")) return std::max(1, std::atoi(env));
    return std::max(1, flag_value);
}

json load_config(const fs::path& path, const std::set<std::string>& allowed) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open config " + path.string());
    json j = json::parse(in, nullptr, /*allow_exceptions=*/true, /*ignore_comments=*/true);
    if (!j.is_object()) throw ValidationError("config root must be a JSON object");
    std::string unknown;
    for (const auto& [key, value] : j.items())
        if (!allowed.count(key)) unknown += (unknown.empty() ? "" : ", ") + key;
    if (!unknown.empty()) throw ValidationError("unknown config keys: " + unknown);
    return j;
}

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
    std::string unknown;
    for (const auto& [key, value] : j.items())
        if (!allowed.count(key)) unknown += (unknown.empty() ? "" : ", ") + key;
    if (!unknown.empty()) throw ValidationError("unknown keys in " + where + ": " + unknown);
}

backbone::EncoderConfig encoder_from_json(const json& j) {
    check_keys(j, {"input_size", "variant", "dim1", "dim2", "dim3", "depth1", "depth2", "depth3",
                   "heads", "mlp_ratio"},
               "encoder");
    backbone::EncoderConfig cfg;
    cfg.input_size = j.value("input_size", cfg.input_size);
    if (j.contains("variant")) cfg.variant = backbone::variant_from_string(j.at("variant"));
    cfg.dim1 = j.value("dim1", cfg.dim1);
    cfg.dim2 = j.value("dim2", cfg.dim2);
    cfg.dim3 = j.value("dim3", cfg.dim3);
    cfg.depth1 = j.value("depth1", cfg.depth1);
    cfg.depth2 = j.value("depth2", cfg.depth2);
    cfg.depth3 = j.value("depth3", cfg.depth3);
    cfg.heads = j.value("heads", cfg.heads);
    cfg.mlp_ratio = j.value("mlp_ratio", cfg.mlp_ratio);
    cfg.validate();
    return cfg;
}

pretrain::PretrainConfig pretrain_from_json(const json& j) {
    check_keys(j, {"base_lr", "weight_decay", "warmup_epochs", "epochs", "batch_size",
                   "mask_ratio", "target", "mgf_scales", "normalize_targets", "seed",
                   "checkpoint_every", "decoder_width", "decoder_depth", "decoder_heads",
                   "crop_scale_min", "crop_scale_max", "hflip", "contrast"},
               "pretrain");
    pretrain::PretrainConfig cfg;
    cfg.base_lr = j.value("base_lr", cfg.base_lr);
    cfg.weight_decay = j.value("weight_decay", cfg.weight_decay);
    cfg.warmup_epochs = j.value("warmup_epochs", cfg.warmup_epochs);
    cfg.epochs = j.value("epochs", cfg.epochs);
    cfg.batch_size = j.value("batch_size", cfg.batch_size);
    cfg.mask_ratio = j.value("mask_ratio", cfg.mask_ratio);
    if (j.contains("target")) cfg.target = features::target_kind_from_string(j.at("target"));
    if (j.contains("mgf_scales")) cfg.mgf_scales = j.at("mgf_scales").get<std::vector<int>>();
    cfg.normalize_targets = j.value("normalize_targets", cfg.normalize_targets);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.checkpoint_every = j.value("checkpoint_every", cfg.checkpoint_every);
    cfg.decoder_width = j.value("decoder_width", cfg.decoder_width);
    cfg.decoder_depth = j.value("decoder_depth", cfg.decoder_depth);
    cfg.decoder_heads = j.value("decoder_heads", cfg.decoder_heads);
    cfg.aug.crop_scale_min = j.value("crop_scale_min", cfg.aug.crop_scale_min);
    cfg.aug.crop_scale_max = j.value("crop_scale_max", cfg.aug.crop_scale_max);
    cfg.aug.hflip = j.value("hflip", cfg.aug.hflip);
    cfg.aug.contrast = j.value("contrast", cfg.aug.contrast);
    cfg.validate();
    return cfg;
}

void snapshot_config(const json& j, const fs::path& dir) {
    fs::create_directories(dir);
    std::ofstream out(dir / "config.json", std::ios::binary);
    out << j.dump(2) << "\n";
}

pretrain::LoadedCorpus load_from_manifest(const fs::path& manifest_path) {
    CorpusManifest manifest = load_manifest(manifest_path);
    return pretrain::load_corpus(manifest, manifest_path.parent_path());
}

// Minimal line chart written next to a CSV: one polyline over the series.
void plot_series(const std::vector<double>& ys, const std::string& title, const fs::path& path) {
    if (ys.empty()) return;
    const int w = 640, h = 400, m = 48;
    cv::Mat canvas(h, w, CV_8UC3, cv::Scalar(255, 255, 255));
    double lo = ys[0], hi = ys[0];
    for (double y : ys) {
        lo = std::min(lo, y);
        hi = std::max(hi, y);
    }
    if (hi - lo < 1e-12) hi = lo + 1.0;
    cv::rectangle(canvas, {m, m}, {w - m, h - m}, cv::Scalar(0, 0, 0));
    std::vector<cv::Point> pts;
    for (std::size_t i = 0; i < ys.size(); ++i) {
        const double fx = ys.size() == 1 ? 0.0 : double(i) / double(ys.size() - 1);
        const double fy = (ys[i] - lo) / (hi - lo);
        pts.emplace_back(m + int(fx * (w - 2 * m)), h - m - int(fy * (h - 2 * m)));
    }
    cv::polylines(canvas, pts, false, cv::Scalar(180, 80, 0), 2, cv::LINE_AA);
    cv::putText(canvas, title, {m, m - 12}, cv::FONT_HERSHEY_SIMPLEX, 0.6, cv::Scalar(0, 0, 0), 1,
                cv::LINE_AA);
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.4g", hi);
    cv::putText(canvas, buf, {4, m + 6}, cv::FONT_HERSHEY_SIMPLEX, 0.45, cv::Scalar(0, 0, 0), 1);
    std::snprintf(buf, sizeof(buf), "%.4g", lo);
    cv::putText(canvas, buf, {4, h - m}, cv::FONT_HERSHEY_SIMPLEX, 0.45, cv::Scalar(0, 0, 0), 1);
    cv::imwrite(path.string(), canvas);
}

void report_probe(const eval::ProbeResult& result, const std::string& hash, const fs::path& out) {
    fs::create_directories(out);
    eval::write_probe_json(result, hash, out / "probe.json");
    std::cout << "accuracy " << result.accuracy << "\n";
    std::cout << "wrote " << (out / "probe.json").string() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"saratrx: SAR feature extraction, speckle simulation, and masked-image "
                 "pre-training tools"};
    app.require_subcommand(1);
    std::uint64_t seed = 0;
    int workers = 1;
    app.add_option("--seed", seed, "global random seed");
    app.add_option("--workers", workers, "worker count (compute is single-threaded per worker)");

    // --- simulate ---------------------------------------------------------
    auto* sim = app.add_subcommand("simulate", "generate a synthetic speckled corpus");
    std::string sim_out;
    specklesim::CorpusConfig sim_cfg;
    sim->add_option("--out", sim_out, "output directory")->required();
    sim->add_option("--images", sim_cfg.num_images, "number of images");
    sim->add_option("--classes", sim_cfg.num_classes, "number of classes");
    sim->add_option("--size", sim_cfg.height, "image side in pixels");
    sim->add_option("--looks", sim_cfg.looks_mix, "multilook mix");
    sim->add_option("--train-fraction", sim_cfg.train_fraction, "train split fraction");
    sim->add_flag("--generic", sim_cfg.generic_style, "clean generic-style rendering");

    // --- extract ----------------------------------------------------------
    auto* ext = app.add_subcommand("extract", "compute feature targets for one image");
    std::string ext_in, ext_out, ext_kind = "mgf";
    std::vector<int> ext_scales = {9, 13, 17};
    ext->add_option("--input", ext_in, "input image")->required();
    ext->add_option("--out", ext_out, "output directory")->required();
    ext->add_option("--target", ext_kind, "mgf | pixel | lowpass | hog | sarhog");
    ext->add_option("--scales", ext_scales, "MGF half-window scales");

    // --- pretrain / twostep / sweep ----------------------------------------
    auto* pre = app.add_subcommand("pretrain", "masked-image pre-training");
    std::string pre_cfg_path, pre_data, pre_out, pre_init;
    double pre_fraction = 1.0;
    pre->add_option("--config", pre_cfg_path, "JSON config")->required();
    pre->add_option("--data", pre_data, "corpus manifest")->required();
    pre->add_option("--out", pre_out, "run directory")->required();
    pre->add_option("--init", pre_init, "checkpoint to initialize or resume from");
    pre->add_option("--fraction", pre_fraction, "fraction of the pre-training pool");

    auto* two = app.add_subcommand("twostep", "two-step schedule: generic then SAR");
    std::string two_cfg_path, two_data, two_generic, two_init_a, two_out;
    two->add_option("--config", two_cfg_path, "JSON config")->required();
    two->add_option("--data", two_data, "SAR corpus manifest (stage b)")->required();
    two->add_option("--generic-data", two_generic, "generic corpus manifest (stage a)");
    two->add_option("--init-a", two_init_a, "precomputed stage-a checkpoint");
    two->add_option("--out", two_out, "run directory")->required();

    auto* swp = app.add_subcommand("sweep", "scaling sweep over data/size/epochs");
    std::string swp_cfg_path, swp_data, swp_out;
    std::vector<double> swp_fractions;
    std::vector<int> swp_dims, swp_epochs;
    swp->add_option("--config", swp_cfg_path, "JSON config")->required();
    swp->add_option("--data", swp_data, "corpus manifest")->required();
    swp->add_option("--out", swp_out, "run directory")->required();
    swp->add_option("--fractions", swp_fractions, "data fractions in (0,1]");
    swp->add_option("--dims", swp_dims, "final-stage widths");
    swp->add_option("--epochs", swp_epochs, "epoch budgets");

    // --- evaluation ---------------------------------------------------------
    auto* prb = app.add_subcommand("probe", "linear probe on a frozen encoder");
    std::string prb_ckpt, prb_data, prb_out;
    int prb_epochs = 30;
    prb->add_option("--ckpt", prb_ckpt, "checkpoint base path")->required();
    prb->add_option("--data", prb_data, "corpus manifest")->required();
    prb->add_option("--out", prb_out, "output directory")->required();
    prb->add_option("--epochs", prb_epochs, "probe epochs");

    auto* few = app.add_subcommand("fewshot", "N-way K-shot evaluation");
    std::string few_ckpt, few_data, few_out;
    eval::FewShotTask few_task;
    few->add_option("--ckpt", few_ckpt, "checkpoint base path")->required();
    few->add_option("--data", few_data, "corpus manifest")->required();
    few->add_option("--out", few_out, "output directory")->required();
    few->add_option("--ways", few_task.ways, "classes per episode (0 = all)");
    few->add_option("--shots", few_task.shots, "train items per class");
    few->add_option("--episodes", few_task.episodes, "episode count");

    auto* pft = app.add_subcommand("partialft", "fine-tune the last k blocks");
    std::string pft_ckpt, pft_data, pft_out;
    int pft_blocks = 0, pft_epochs = 30;
    pft->add_option("--ckpt", pft_ckpt, "checkpoint base path")->required();
    pft->add_option("--data", pft_data, "corpus manifest")->required();
    pft->add_option("--out", pft_out, "output directory")->required();
    pft->add_option("--blocks", pft_blocks, "unfrozen final-stage blocks")->required();
    pft->add_option("--epochs", pft_epochs, "fine-tune epochs");

    auto* att = app.add_subcommand("attndist", "mean attention distance per layer/head");
    std::string att_ckpt, att_data, att_out;
    int att_samples = 8;
    att->add_option("--ckpt", att_ckpt, "checkpoint base path")->required();
    att->add_option("--data", att_data, "corpus manifest")->required();
    att->add_option("--out", att_out, "output directory")->required();
    att->add_option("--samples", att_samples, "images to aggregate");

    // --- datakit ------------------------------------------------------------
    auto* slc = app.add_subcommand("slice", "tile a large image");
    std::string slc_in, slc_out;
    datakit::TilePolicy slc_policy;
    slc->add_option("--input", slc_in, "input image")->required();
    slc->add_option("--out", slc_out, "output directory")->required();
    slc->add_option("--threshold", slc_policy.threshold, "max side before tiling");
    slc->add_option("--tile", slc_policy.tile, "tile side");
    slc->add_option("--overlap", slc_policy.overlap, "tile overlap");

    auto* ing = app.add_subcommand("ingest", "validate and copy a corpus");
    std::string ing_manifest, ing_root, ing_out;
    ing->add_option("--manifest", ing_manifest, "input manifest")->required();
    ing->add_option("--root", ing_root, "root for relative record paths");
    ing->add_option("--out", ing_out, "output directory")->required();

    auto* reb = app.add_subcommand("rebalance", "equalize per-class record counts");
    std::string reb_manifest, reb_strategy = "none", reb_out;
    reb->add_option("--manifest", reb_manifest, "input manifest")->required();
    reb->add_option("--strategy", reb_strategy, "none | oversample | undersample");
    reb->add_option("--out", reb_out, "output manifest path")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        workers = resolve_workers(workers);
        (void)workers;

        if (sim->parsed()) {
            sim_cfg.width = sim_cfg.height;
            sim_cfg.seed = seed;
            sim_cfg.out_dir = resolve_out(sim_out);
            auto manifest = specklesim::make_corpus(sim_cfg);
            std::cout << "wrote " << manifest.records.size() << " records to "
                      << (sim_cfg.out_dir / "manifest.jsonl").string() << "\n";
        } else if (ext->parsed()) {
            const fs::path out = resolve_out(ext_out);
            fs::create_directories(out);
            SarImage img = imageio::load_gray(ext_in);
            img.pixels /= imageio::kAmplitudeScale;
            const auto kind = features::target_kind_from_string(ext_kind);
            features::FeatureStack stack = kind == features::TargetKind::Mgf
                                               ? features::mgf(img, ext_scales)
                                               : features::baseline_target(img, kind);
            json meta;
            for (int c = 0; c < stack.num_channels(); ++c) {
                const Image& ch = stack.channels[std::size_t(c)];
                const double lo = ch.minCoeff(), hi = ch.maxCoeff();
                const double span = hi - lo < 1e-12 ? 1.0 : hi - lo;
                imageio::save_png16((ch - lo) / span * 65535.0,
                                    out / (stack.channel_names[std::size_t(c)] + ".png"));
                meta[stack.channel_names[std::size_t(c)]] = {{"min", lo}, {"max", hi}};
            }
            std::ofstream(out / "channels.json") << meta.dump(2) << "\n";
            std::cout << "wrote " << stack.num_channels() << " channels to " << out.string()
                      << "\n";
        } else if (pre->parsed()) {
            const json j = load_config(pre_cfg_path, {"encoder", "pretrain"});
            auto enc_cfg = encoder_from_json(j.value("encoder", json::object()));
            auto cfg = pretrain_from_json(j.value("pretrain", json::object()));
            if (!j.contains("pretrain") || !j.at("pretrain").contains("seed")) cfg.seed = seed;
            const fs::path out = resolve_out(pre_out);
            snapshot_config(j, out);
            auto corpus = load_from_manifest(pre_data);
            std::optional<EncoderCheckpoint> init;
            if (!pre_init.empty()) init = load_checkpoint(pre_init);
            auto result = pretrain::pretrain_run(corpus, enc_cfg, cfg,
                                                 init ? &*init : nullptr, out, pre_fraction);
            plot_series(result.loss.epoch_loss, "pretraining loss", out / "loss.png");
            std::cout << "final loss " << result.loss.epoch_loss.back() << "\n";
            std::cout << "config hash " << config_hash(enc_cfg) << "\n";
            std::cout << "wrote " << (out / "checkpoint_final.bin").string() << "\n";
        } else if (two->parsed()) {
            const json j = load_config(two_cfg_path, {"encoder", "stage_a", "stage_b"});
            auto enc_cfg = encoder_from_json(j.value("encoder", json::object()));
            auto cfg_a = pretrain_from_json(j.value("stage_a", json::object()));
            auto cfg_b = pretrain_from_json(j.value("stage_b", json::object()));
            if (!j.contains("stage_a") || !j.at("stage_a").contains("target"))
                cfg_a.target = features::TargetKind::Pixel;
            if (two_generic.empty() == two_init_a.empty())
                throw ValidationError("twostep: pass exactly one of --generic-data / --init-a");
            const fs::path out = resolve_out(two_out);
            snapshot_config(j, out);
            auto corpus_b = load_from_manifest(two_data);
            std::optional<pretrain::LoadedCorpus> corpus_a;
            if (!two_generic.empty()) corpus_a = load_from_manifest(two_generic);
            std::optional<EncoderCheckpoint> init_a;
            if (!two_init_a.empty()) init_a = load_checkpoint(two_init_a);
            auto result = pretrain::two_step(corpus_a ? &*corpus_a : nullptr, cfg_a,
                                             init_a ? &*init_a : nullptr, corpus_b, cfg_b,
                                             enc_cfg, out);
            plot_series(result.stage_b.loss.epoch_loss, "stage-b loss", out / "loss_stage_b.png");
            std::cout << "stage-b final loss " << result.stage_b.loss.epoch_loss.back() << "\n";
            std::cout << "wrote " << (out / "stage_b" / "checkpoint_final.bin").string() << "\n";
        } else if (swp->parsed()) {
            const json j = load_config(swp_cfg_path, {"encoder", "pretrain"});
            auto enc_cfg = encoder_from_json(j.value("encoder", json::object()));
            auto cfg = pretrain_from_json(j.value("pretrain", json::object()));
            const fs::path out = resolve_out(swp_out);
            snapshot_config(j, out);
            auto corpus = load_from_manifest(swp_data);
            auto points = pretrain::scaling_sweep(corpus, enc_cfg, cfg, swp_fractions, swp_dims,
                                                  swp_epochs, out);
            std::vector<double> accs;
            for (const auto& p : points) accs.push_back(p.probe_accuracy);
            plot_series(accs, "probe accuracy per sweep point", out / "sweep.png");
            for (const auto& p : points)
                std::cout << "fraction " << p.fraction << " dim " << p.dim3 << " epochs "
                          << p.epochs << " accuracy " << p.probe_accuracy << "\n";
        } else if (prb->parsed()) {
            auto ckpt = load_checkpoint(prb_ckpt);
            auto corpus = load_from_manifest(prb_data);
            eval::ProbeConfig cfg;
            cfg.epochs = prb_epochs;
            cfg.seed = seed;
            report_probe(eval::linear_probe(ckpt, corpus, cfg), config_hash(ckpt.config),
                         resolve_out(prb_out));
        } else if (few->parsed()) {
            auto ckpt = load_checkpoint(few_ckpt);
            auto corpus = load_from_manifest(few_data);
            eval::ProbeConfig cfg;
            cfg.seed = seed;
            few_task.seed = seed;
            auto result = eval::fewshot_eval(ckpt, corpus, few_task, cfg);
            const fs::path out = resolve_out(few_out);
            fs::create_directories(out);
            eval::write_fewshot_csv(result, out / "fewshot.csv");
            std::cout << "mean accuracy " << result.mean_accuracy << " std "
                      << result.std_accuracy << "\n";
            std::cout << "wrote " << (out / "fewshot.csv").string() << "\n";
        } else if (pft->parsed()) {
            auto ckpt = load_checkpoint(pft_ckpt);
            auto corpus = load_from_manifest(pft_data);
            eval::ProbeConfig cfg;
            cfg.epochs = pft_epochs;
            cfg.seed = seed;
            report_probe(eval::partial_finetune(ckpt, pft_blocks, corpus, cfg),
                         config_hash(ckpt.config), resolve_out(pft_out));
        } else if (att->parsed()) {
            auto ckpt = load_checkpoint(att_ckpt);
            auto corpus = load_from_manifest(att_data);
            auto enc = make_encoder<float>(ckpt);
            std::vector<const Image*> images;
            for (std::size_t i = 0; i < corpus.images.size() && int(images.size()) < att_samples;
                 ++i)
                if (corpus.images[i].rows() == ckpt.config.input_size)
                    images.push_back(&corpus.images[i]);
            if (images.empty())
                throw ValidationError("attndist: no images match the encoder input size");
            auto report = backbone::attention_distance(enc, images);
            const fs::path out = resolve_out(att_out);
            fs::create_directories(out);
            pretrain::write_attn_csv(report, out / "attn_distance.csv");
            for (std::size_t l = 0; l < report.distances.size(); ++l) {
                std::cout << "layer " << l << ":";
                for (double d : report.distances[l]) std::cout << " " << d;
                std::cout << "\n";
            }
            std::cout << "wrote " << (out / "attn_distance.csv").string() << "\n";
        } else if (slc->parsed()) {
            slc_policy.validate();
            SarImage img = imageio::load_gray(slc_in);
            auto tiles = datakit::slice_large(img, slc_policy);
            const fs::path out = resolve_out(slc_out);
            fs::create_directories(out);
            CorpusManifest manifest;
            for (std::size_t i = 0; i < tiles.size(); ++i) {
                char name[64];
                std::snprintf(name, sizeof(name), "tile_%03zu.png", i);
                imageio::save_png16(tiles[i].pixels, out / name);
                ManifestRecord rec;
                rec.path = name;
                rec.dataset = "sliced";
                rec.parent = fs::path(slc_in).filename().string();
                rec.tile_origin = {{tiles[i].origin_row, tiles[i].origin_col}};
                manifest.records.push_back(rec);
            }
            save_manifest(manifest, out / "manifest.jsonl");
            std::cout << "wrote " << tiles.size() << " tiles to " << out.string() << "\n";
        } else if (ing->parsed()) {
            auto manifest = load_manifest(ing_manifest);
            const fs::path root =
                ing_root.empty() ? fs::path(ing_manifest).parent_path() : fs::path(ing_root);
            auto report = datakit::ingest(manifest, root, resolve_out(ing_out));
            for (const auto& err : report.errors) std::cerr << "skipped: " << err << "\n";
            std::cout << "ingested " << report.manifest.records.size() << " records ("
                      << report.errors.size() << " skipped)\n";
        } else if (reb->parsed()) {
            auto manifest = load_manifest(reb_manifest);
            auto out = datakit::rebalance(manifest, datakit::rebalance_from_string(reb_strategy),
                                          seed);
            save_manifest(out, reb_out);
            std::cout << "wrote " << out.records.size() << " records to " << reb_out << "\n";
        }
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
