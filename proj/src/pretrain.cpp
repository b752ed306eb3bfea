#include "saratrx/pretrain.hpp"

#include <chrono>
#include <fstream>

#include "saratrx/eval.hpp"
#include "saratrx/imageio.hpp"

namespace saratrx::pretrain {

namespace fs = std::filesystem;

MaskPlan make_mask(int grid, double ratio, std::uint64_t seed) {
    if (grid < 1) throw ValidationError("make_mask: grid must be >= 1");
    if (!(ratio > 0.0 && ratio < 1.0))
        throw ValidationError("make_mask: ratio must be in (0, 1)");
    const int n = grid * grid;
    const int n_masked = int(std::lround(ratio * n));
    if (n_masked == 0) throw ValidationError("make_mask: ratio rounds to an empty masked set");
    if (n_masked == n) throw ValidationError("make_mask: ratio rounds to an empty visible set");

    std::vector<int> ids(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) ids[std::size_t(i)] = i;
    Rng rng(seed);
    for (int i = 0; i < n_masked; ++i) {
        const int j = i + int(rng.below(std::uint64_t(n - i)));
        std::swap(ids[std::size_t(i)], ids[std::size_t(j)]);
    }
    MaskPlan plan;
    plan.grid = grid;
    plan.ratio = ratio;
    plan.seed = seed;
    plan.masked.assign(ids.begin(), ids.begin() + n_masked);
    plan.visible.assign(ids.begin() + n_masked, ids.end());
    std::sort(plan.masked.begin(), plan.masked.end());
    std::sort(plan.visible.begin(), plan.visible.end());
    return plan;
}

Image resize_bilinear(const Image& src, int out_h, int out_w) {
    const Eigen::Index h = src.rows(), w = src.cols();
    Image out(out_h, out_w);
    for (int y = 0; y < out_h; ++y) {
        double sy = (double(y) + 0.5) * double(h) / double(out_h) - 0.5;
        sy = std::clamp(sy, 0.0, double(h - 1));
        const Eigen::Index y0 = Eigen::Index(sy);
        const Eigen::Index y1 = std::min(y0 + 1, h - 1);
        const double fy = sy - double(y0);
        for (int x = 0; x < out_w; ++x) {
            double sx = (double(x) + 0.5) * double(w) / double(out_w) - 0.5;
            sx = std::clamp(sx, 0.0, double(w - 1));
            const Eigen::Index x0 = Eigen::Index(sx);
            const Eigen::Index x1 = std::min(x0 + 1, w - 1);
            const double fx = sx - double(x0);
            out(y, x) = (1 - fy) * ((1 - fx) * src(y0, x0) + fx * src(y0, x1)) +
                        fy * ((1 - fx) * src(y1, x0) + fx * src(y1, x1));
        }
    }
    return out;
}

Image augment(const Image& src, const AugmentConfig& cfg, Rng& rng, int out_size) {
    const Eigen::Index h = src.rows(), w = src.cols();
    // Resized crop: sample area scale and aspect ratio, clamp to the image.
    const double scale = rng.uniform(cfg.crop_scale_min, cfg.crop_scale_max);
    const double aspect = rng.uniform(0.75, 4.0 / 3.0);
    const double area = scale * double(h) * double(w);
    Eigen::Index cw = Eigen::Index(std::lround(std::sqrt(area * aspect)));
    Eigen::Index ch = Eigen::Index(std::lround(std::sqrt(area / aspect)));
    cw = std::clamp<Eigen::Index>(cw, 1, w);
    ch = std::clamp<Eigen::Index>(ch, 1, h);
    const Eigen::Index r0 = Eigen::Index(rng.below(std::uint64_t(h - ch + 1)));
    const Eigen::Index c0 = Eigen::Index(rng.below(std::uint64_t(w - cw + 1)));
    Image view = resize_bilinear(src.block(r0, c0, ch, cw), out_size, out_size);

    if (cfg.hflip && rng.uniform() < 0.5) view = view.rowwise().reverse().eval();

    if (cfg.contrast > 0.0) {
        const double f = rng.uniform(1.0 - cfg.contrast, 1.0 + cfg.contrast);
        const double mean = view.mean();
        view = (mean + f * (view - mean)).max(0.0);
    }
    return view;
}

void PretrainConfig::validate() const {
    if (base_lr <= 0.0) throw ValidationError("pretrain: base_lr must be > 0");
    if (!(mask_ratio > 0.0 && mask_ratio < 1.0))
        throw ValidationError("pretrain: mask_ratio must be in (0, 1)");
    if (epochs < 1) throw ValidationError("pretrain: epochs must be >= 1");
    if (batch_size < 1) throw ValidationError("pretrain: batch_size must be >= 1");
    if (decoder_width % 4 != 0 || decoder_width % decoder_heads != 0)
        throw ValidationError("pretrain: decoder_width must divide by 4 and by heads");
    if (target == features::TargetKind::Mgf && mgf_scales.empty())
        throw ValidationError("pretrain: empty MGF scale list");
}

features::FeatureStack compute_target(const Image& view, const PretrainConfig& cfg) {
    SarImage img{view, std::nullopt};
    if (cfg.target == features::TargetKind::Mgf) return features::mgf(img, cfg.mgf_scales);
    return features::baseline_target(img, cfg.target, cfg.baseline);
}

std::vector<std::size_t> LoadedCorpus::indices_of(Split split) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < splits.size(); ++i)
        if (splits[i] == split) out.push_back(i);
    return out;
}

LoadedCorpus load_corpus(const CorpusManifest& manifest, const fs::path& root) {
    if (manifest.empty()) throw ValidationError("load_corpus: empty manifest");
    LoadedCorpus corpus;
    corpus.class_names = manifest.class_labels();
    auto class_index = [&](const std::optional<std::string>& label) {
        if (!label) return -1;
        const auto it = std::lower_bound(corpus.class_names.begin(), corpus.class_names.end(),
                                         *label);
        return int(it - corpus.class_names.begin());
    };
    for (const auto& rec : manifest.records) {
        const fs::path p = fs::path(rec.path).is_absolute() ? fs::path(rec.path)
                                                            : root / rec.path;
        SarImage img = imageio::load_gray(p);
        corpus.images.push_back(img.pixels / imageio::kAmplitudeScale);
        corpus.labels.push_back(class_index(rec.class_label));
        corpus.splits.push_back(rec.split);
    }
    return corpus;
}

namespace {

int target_channels(const PretrainConfig& cfg) {
    using features::TargetKind;
    switch (cfg.target) {
        case TargetKind::Mgf: return int(cfg.mgf_scales.size());
        case TargetKind::Pixel: return 1;
        case TargetKind::Lowpass: return 1;
        case TargetKind::Hog: return cfg.baseline.hog.bins;
        case TargetKind::SarHog:
            return cfg.baseline.hog.bins * int(cfg.baseline.sarhog_scales.size());
    }
    throw ValidationError("bad target kind");
}

std::uint64_t mix_epoch(std::uint64_t seed, int epoch) {
    return seed ^ (0x9e3779b97f4a7c15ull * std::uint64_t(epoch + 1));
}

}  // namespace

PretrainResult pretrain_run(const LoadedCorpus& corpus, const backbone::EncoderConfig& enc_cfg,
                            const PretrainConfig& cfg, const EncoderCheckpoint* init,
                            const fs::path& run_dir, double fraction) {
    cfg.validate();
    enc_cfg.validate();
    if (!(fraction > 0.0 && fraction <= 1.0))
        throw ValidationError("pretrain: fraction must be in (0, 1]");

    // Pre-training is unsupervised: everything except the test split.
    std::vector<std::size_t> pool;
    for (std::size_t i = 0; i < corpus.images.size(); ++i)
        if (corpus.splits[i] != Split::Test) pool.push_back(i);
    if (pool.empty()) throw ValidationError("pretrain: no non-test images in corpus");
    if (fraction < 1.0) {
        Rng rng(cfg.seed ^ 0xf4ac7104ull);
        for (std::size_t i = 0; i + 1 < pool.size(); ++i) {
            const std::size_t j = i + std::size_t(rng.below(pool.size() - i));
            std::swap(pool[i], pool[j]);
        }
        pool.resize(std::max<std::size_t>(1, std::size_t(std::lround(fraction * pool.size()))));
    }

    const int grid = enc_cfg.grid();
    const int unit_px = enc_cfg.unit_px();
    const Eigen::Index target_dim = Eigen::Index(target_channels(cfg)) * unit_px * unit_px;

    MimModel<float> model(enc_cfg, cfg.decoder_width, cfg.decoder_depth, cfg.decoder_heads,
                          target_dim, cfg.seed, cfg.normalize_targets);
    nn::ParamRefs<float> params = model.params();

    int start_epoch = 0;
    bool resume = false;
    if (init) {
        if (!(init->config == enc_cfg))
            throw RuntimeError("incompatible checkpoint: config hash " + config_hash(init->config) +
                               " != " + config_hash(enc_cfg));
        // A checkpoint carrying a matching decoder head and optimizer state
        // resumes the run; otherwise only encoder weights initialize stage b.
        const auto head = init->tensors.find("dec.head.w");
        resume = init->epoch > 0 && head != init->tensors.end() &&
                 head->second.cols() == target_dim && init->tensors.count("opt.t") > 0;
        if (resume) {
            load_params(init->tensors, params);
        } else {
            nn::ParamRefs<float> enc_params;
            model.encoder.collect(enc_params);
            load_params(init->tensors, enc_params);
        }
    }

    nn::AdamW<float> opt(params, {cfg.beta1, cfg.beta2, 1e-8, cfg.weight_decay});
    if (resume) {
        opt.import_state(init->tensors);
        start_epoch = init->epoch;
    }

    if (!run_dir.empty()) fs::create_directories(run_dir);

    const std::size_t n_pool = pool.size();
    const int steps_per_epoch = int((n_pool + std::size_t(cfg.batch_size) - 1) /
                                    std::size_t(cfg.batch_size));
    PretrainResult result;
    const auto t_start = std::chrono::steady_clock::now();

    auto make_checkpoint = [&](int epoch) {
        EncoderCheckpoint ckpt;
        ckpt.config = enc_cfg;
        ckpt.epoch = epoch;
        ckpt.global_step = opt.steps_taken();
        ckpt.rng_seed = cfg.seed;
        store_params(params, ckpt.tensors);
        opt.export_state(ckpt.tensors);
        return ckpt;
    };

    for (int epoch = start_epoch; epoch < cfg.epochs; ++epoch) {
        std::vector<std::size_t> order = pool;
        Rng shuffle_rng(mix_epoch(cfg.seed, epoch));
        for (std::size_t i = 0; i + 1 < order.size(); ++i) {
            const std::size_t j = i + std::size_t(shuffle_rng.below(order.size() - i));
            std::swap(order[i], order[j]);
        }

        double epoch_loss = 0.0;
        for (int step = 0; step < steps_per_epoch; ++step) {
            const std::size_t lo = std::size_t(step) * std::size_t(cfg.batch_size);
            const std::size_t hi = std::min(n_pool, lo + std::size_t(cfg.batch_size));
            const Eigen::Index bsz = Eigen::Index(hi - lo);

            std::vector<Image> views(static_cast<std::size_t>(bsz));
            std::vector<MaskPlan> plans(static_cast<std::size_t>(bsz));
            Mat<float> targets(bsz * grid * grid, target_dim);
            // Per-sample streams derive from (seed, epoch, sample index), so
            // batching and worker count never change the data.
            for (Eigen::Index b = 0; b < bsz; ++b) {
                const std::size_t idx = order[lo + std::size_t(b)];
                Rng srng = Rng::for_index(mix_epoch(cfg.seed, epoch), idx);
                views[std::size_t(b)] =
                    augment(corpus.images[idx], cfg.aug, srng, enc_cfg.input_size);
                const auto stack = compute_target(views[std::size_t(b)], cfg);
                targets.middleRows(b * grid * grid, grid * grid) =
                    patchify_target<float>(stack, unit_px);
                plans[std::size_t(b)] = make_mask(grid, cfg.mask_ratio, srng.next_u64());
            }
            std::vector<const Image*> view_ptrs;
            for (const auto& v : views) view_ptrs.push_back(&v);

            const double lr = nn::cosine_lr(cfg.base_lr, double(epoch) + double(step) / steps_per_epoch,
                                            cfg.warmup_epochs, cfg.epochs);
            opt.zero_grad();
            const float loss = model.forward_loss(view_ptrs, plans, targets);
            if (!std::isfinite(loss)) {
                double grad_norm = 0.0;
                for (const auto* p : params) grad_norm += double(p->grad.squaredNorm());
                throw RuntimeError("non-finite loss at epoch " + std::to_string(epoch) +
                                   " step " + std::to_string(step) + " lr " + std::to_string(lr) +
                                   " grad-norm " + std::to_string(std::sqrt(grad_norm)));
            }
            model.backward();
            opt.step(lr);
            epoch_loss += double(loss) * double(bsz);
        }
        result.loss.epoch_loss.push_back(epoch_loss / double(n_pool));
        result.loss.wall_clock_s.push_back(
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count());

        if (!run_dir.empty() && cfg.checkpoint_every > 0 &&
            (epoch + 1) % cfg.checkpoint_every == 0 && epoch + 1 < cfg.epochs)
            save_checkpoint(make_checkpoint(epoch + 1),
                            run_dir / ("checkpoint_ep" + std::to_string(epoch + 1)));
    }

    result.checkpoint = make_checkpoint(cfg.epochs);
    if (!run_dir.empty()) {
        save_checkpoint(result.checkpoint, run_dir / "checkpoint_final");
        write_loss_csv(result.loss, run_dir / "loss.csv");
    }
    return result;
}

TwoStepResult two_step(const LoadedCorpus* stage_a_corpus, const PretrainConfig& stage_a_cfg,
                       const EncoderCheckpoint* stage_a_init, const LoadedCorpus& stage_b_corpus,
                       const PretrainConfig& stage_b_cfg, const backbone::EncoderConfig& enc_cfg,
                       const fs::path& run_dir) {
    TwoStepResult out;
    if (stage_a_init) {
        if (!(stage_a_init->config == enc_cfg))
            throw RuntimeError("incompatible checkpoint: stage-a config hash " +
                               config_hash(stage_a_init->config) + " != " + config_hash(enc_cfg));
        out.stage_a.checkpoint = *stage_a_init;
    } else {
        if (!stage_a_corpus) throw ValidationError("two_step: stage a needs a corpus or an init");
        out.stage_a = pretrain_run(*stage_a_corpus, enc_cfg, stage_a_cfg, nullptr,
                                   run_dir.empty() ? fs::path{} : run_dir / "stage_a");
    }

    // Attention diagnostics on a fixed sample of stage-b imagery.
    std::vector<const Image*> sample;
    for (std::size_t i = 0; i < stage_b_corpus.images.size() && sample.size() < 8; ++i)
        if (stage_b_corpus.images[i].rows() == enc_cfg.input_size) sample.push_back(&stage_b_corpus.images[i]);
    if (!sample.empty()) {
        auto enc = make_encoder<float>(out.stage_a.checkpoint);
        out.attn_before = backbone::attention_distance(enc, sample);
    }

    out.stage_b = pretrain_run(stage_b_corpus, enc_cfg, stage_b_cfg, &out.stage_a.checkpoint,
                               run_dir.empty() ? fs::path{} : run_dir / "stage_b");
    if (!sample.empty()) {
        auto enc = make_encoder<float>(out.stage_b.checkpoint);
        out.attn_after = backbone::attention_distance(enc, sample);
    }
    if (!run_dir.empty()) {
        write_attn_csv(out.attn_before, run_dir / "attn_distance_stage_a.csv");
        write_attn_csv(out.attn_after, run_dir / "attn_distance_stage_b.csv");
    }
    return out;
}

std::vector<SweepPoint> scaling_sweep(const LoadedCorpus& corpus,
                                      const backbone::EncoderConfig& base_enc,
                                      const PretrainConfig& base_cfg,
                                      const std::vector<double>& fractions,
                                      const std::vector<int>& dims,
                                      const std::vector<int>& epoch_grid,
                                      const fs::path& run_dir) {
    const std::vector<double> fr = fractions.empty() ? std::vector<double>{1.0} : fractions;
    const std::vector<int> dm = dims.empty() ? std::vector<int>{base_enc.dim3} : dims;
    const std::vector<int> eg = epoch_grid.empty() ? std::vector<int>{base_cfg.epochs} : epoch_grid;
    for (double f : fr)
        if (!(f > 0.0 && f <= 1.0)) throw ValidationError("sweep: fractions must lie in (0, 1]");

    std::vector<SweepPoint> points;
    for (double f : fr)
        for (int d : dm)
            for (int ep : eg) {
                backbone::EncoderConfig enc = base_enc;
                if (d != base_enc.dim3) {
                    enc.dim3 = d;
                    enc.dim1 = std::max(4, d / 4);
                    enc.dim2 = std::max(4, d / 2);
                }
                PretrainConfig cfg = base_cfg;
                cfg.epochs = ep;
                const auto t0 = std::chrono::steady_clock::now();
                auto run = pretrain_run(corpus, enc, cfg, nullptr, {}, f);
                eval::ProbeConfig pcfg;
                pcfg.seed = cfg.seed;
                const auto probe = eval::linear_probe(run.checkpoint, corpus, pcfg);
                SweepPoint pt;
                pt.fraction = f;
                pt.dim3 = d;
                pt.epochs = ep;
                pt.probe_accuracy = probe.accuracy;
                pt.final_loss = run.loss.epoch_loss.back();
                pt.wall_clock_s =
                    std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
                points.push_back(pt);
            }
    if (!run_dir.empty()) {
        fs::create_directories(run_dir);
        write_sweep_csv(points, run_dir / "sweep.csv");
    }
    return points;
}

void write_loss_csv(const LossRecord& loss, const fs::path& path) {
    // Metrics stay deterministic; wall clock goes to a sibling timing file.
    std::ofstream out(path, std::ios::binary);
    if (!out) throw RuntimeError("cannot write " + path.string());
    out << "epoch,loss\n";
    char buf[128];
    for (std::size_t i = 0; i < loss.epoch_loss.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%zu,%.8f\n", i + 1, loss.epoch_loss[i]);
        out << buf;
    }
    fs::path timing = path;
    timing.replace_filename(path.stem().string() + "_timing.csv");
    std::ofstream tout(timing, std::ios::binary);
    tout << "epoch,wall_clock_s\n";
    for (std::size_t i = 0; i < loss.wall_clock_s.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%zu,%.3f\n", i + 1, loss.wall_clock_s[i]);
        tout << buf;
    }
}

void write_attn_csv(const backbone::AttnDistanceReport& report, const fs::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw RuntimeError("cannot write " + path.string());
    out << "layer,head,distance_px\n";
    char buf[128];
    for (std::size_t l = 0; l < report.distances.size(); ++l)
        for (std::size_t h = 0; h < report.distances[l].size(); ++h) {
            std::snprintf(buf, sizeof(buf), "%zu,%zu,%.6f\n", l, h, report.distances[l][h]);
            out << buf;
        }
}

void write_sweep_csv(const std::vector<SweepPoint>& points, const fs::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw RuntimeError("cannot write " + path.string());
    out << "fraction,dim3,epochs,probe_accuracy,final_loss\n";
    char buf[160];
    for (const auto& p : points) {
        std::snprintf(buf, sizeof(buf), "%.4f,%d,%d,%.6f,%.8f\n", p.fraction, p.dim3, p.epochs,
                      p.probe_accuracy, p.final_loss);
        out << buf;
    }
    fs::path timing = path;
    timing.replace_filename(path.stem().string() + "_timing.csv");
    std::ofstream tout(timing, std::ios::binary);
    tout << "fraction,dim3,epochs,wall_clock_s\n";
    for (const auto& p : points) {
        std::snprintf(buf, sizeof(buf), "%.4f,%d,%d,%.3f\n", p.fraction, p.dim3, p.epochs,
                      p.wall_clock_s);
        tout << buf;
    }
}

}  // namespace saratrx::pretrain
