#pragma once

#include <filesystem>
#include <optional>
#include <vector>

#include "saratrx/backbone.hpp"
#include "saratrx/checkpoint.hpp"
#include "saratrx/common.hpp"
#include "saratrx/features.hpp"
#include "saratrx/manifest.hpp"
#include "saratrx/nn.hpp"
#include "saratrx/rng.hpp"

namespace saratrx::pretrain {

// Deterministic visible/masked partition of the stride-16 token grid.
struct MaskPlan {
    int grid = 0;
    std::vector<int> masked;   // sorted unit ids
    std::vector<int> visible;  // sorted unit ids
    double ratio = 0.0;
    std::uint64_t seed = 0;

    int num_units() const { return grid * grid; }
};

// Uniform sample without replacement of round(ratio * G^2) masked units.
MaskPlan make_mask(int grid, double ratio, std::uint64_t seed);

struct AugmentConfig {
    double crop_scale_min = 0.5;
    double crop_scale_max = 1.0;
    bool hflip = true;
    // ColorJitter-style contrast on single-channel data: deviations from the
    // image mean scale by a factor uniform in [1-contrast, 1+contrast].
    double contrast = 0.5;
};

// Resized-crop + horizontal flip + contrast jitter; output is out_size^2,
// amplitudes clamped at zero.
Image augment(const Image& src, const AugmentConfig& cfg, Rng& rng, int out_size);

Image resize_bilinear(const Image& src, int out_h, int out_w);

// Flatten a feature stack onto the stride-16 grid: row u holds channels
// c-major, then pixels row-major, of unit u (dim = C * unit_px^2).
template <class S>
Mat<S> patchify_target(const features::FeatureStack& stack, int unit_px) {
    const int grid_r = int(stack.rows()) / unit_px;
    const int grid_c = int(stack.cols()) / unit_px;
    if (grid_r != grid_c || grid_r * unit_px != stack.rows())
        throw ValidationError("patchify_target: image not divisible by unit size");
    const int C = stack.num_channels();
    Mat<S> out(grid_r * grid_c, Eigen::Index(C) * unit_px * unit_px);
    for (int u = 0; u < grid_r * grid_c; ++u) {
        const int r0 = (u / grid_c) * unit_px, c0 = (u % grid_c) * unit_px;
        for (int c = 0; c < C; ++c)
            for (int dy = 0; dy < unit_px; ++dy)
                for (int dx = 0; dx < unit_px; ++dx)
                    out(u, Eigen::Index(c) * unit_px * unit_px + dy * unit_px + dx) =
                        S(stack.channels[std::size_t(c)](r0 + dy, c0 + dx));
    }
    return out;
}

// Per-row (per-patch) standardization used when normalize_targets is on.
template <class S>
void standardize_rows(Mat<S>& t) {
    for (Eigen::Index i = 0; i < t.rows(); ++i) {
        const S mean = t.row(i).mean();
        const S var = (t.row(i).array() - mean).square().mean();
        t.row(i) = ((t.row(i).array() - mean) / std::sqrt(double(var) + 1e-6)).matrix();
    }
}

// Mean squared error over masked tokens only. pred/target rows are full-grid
// row-major tokens of one image.
template <class S>
S mim_loss(const Mat<S>& pred, const Mat<S>& target, const MaskPlan& plan,
           bool normalize_targets = false) {
    if (pred.rows() != target.rows() || pred.cols() != target.cols())
        throw ValidationError("mim_loss: pred/target shape mismatch");
    if (pred.rows() != plan.num_units()) throw ValidationError("mim_loss: plan grid mismatch");
    if (plan.masked.empty()) throw ValidationError("mim_loss: empty masked set");
    Mat<S> tgt = target;
    if (normalize_targets) standardize_rows(tgt);
    S acc = 0;
    for (int u : plan.masked) acc += (pred.row(u) - tgt.row(u)).squaredNorm();
    return acc / S(double(plan.masked.size()) * double(pred.cols()));
}

// MAE-style lightweight decoder: embed visible tokens, insert a learned mask
// token at masked positions, add sinusoidal positions, run transformer
// blocks, project to the flattened target dimension.
template <class S>
class Decoder {
   public:
    Decoder() = default;
    Decoder(int grid, Eigen::Index enc_dim, Eigen::Index width, int depth, int heads,
            Eigen::Index target_dim, double mlp_ratio, Rng& rng)
        : grid_(grid), width_(width),
          embed_("dec.embed", enc_dim, width, rng) {
        mask_token_.name = "dec.mask_token";
        mask_token_.decay = false;
        mask_token_.init_zero(1, width);
        nn::init_normal(mask_token_, rng);
        for (int i = 0; i < depth; ++i)
            blocks_.emplace_back("dec.b" + std::to_string(i), width, heads,
                                 Eigen::Index(width * mlp_ratio), rng);
        norm_ = nn::LayerNorm<S>("dec.norm", width);
        head_ = nn::Linear<S>("dec.head", width, target_dim, rng);
        pos_ = nn::sincos_position_table<S>(grid, width);
    }

    // enc_tokens: (B * Nv) x enc_dim, grouped per image in plan.visible
    // order. Returns (B * N) x target_dim, full grid row-major per image.
    Mat<S> forward(const Mat<S>& enc_tokens, const std::vector<MaskPlan>& plans) {
        plans_ = &plans;
        const Eigen::Index batch = Eigen::Index(plans.size());
        const Eigen::Index n = grid_ * grid_;
        const Eigen::Index nvis = Eigen::Index(plans[0].visible.size());
        if (enc_tokens.rows() != batch * nvis)
            throw ValidationError("decoder: token count does not match plans");

        Mat<S> z = embed_.forward(enc_tokens);
        Mat<S> x(batch * n, width_);
        for (Eigen::Index b = 0; b < batch; ++b) {
            const MaskPlan& plan = plans[std::size_t(b)];
            for (int u : plan.masked) x.row(b * n + u) = mask_token_.value.row(0);
            for (std::size_t i = 0; i < plan.visible.size(); ++i)
                x.row(b * n + plan.visible[i]) = z.row(b * nvis + Eigen::Index(i));
            x.middleRows(b * n, n) += pos_;
        }
        for (auto& blk : blocks_) x = blk.forward(x, batch, n);
        return head_.forward(norm_.forward(x));
    }

    // Returns gradient w.r.t. the encoder tokens.
    Mat<S> backward(const Mat<S>& dpred) {
        const auto& plans = *plans_;
        const Eigen::Index batch = Eigen::Index(plans.size());
        const Eigen::Index n = grid_ * grid_;
        const Eigen::Index nvis = Eigen::Index(plans[0].visible.size());

        Mat<S> dx = norm_.backward(head_.backward(dpred));
        for (auto it = blocks_.rbegin(); it != blocks_.rend(); ++it) dx = it->backward(dx);

        Mat<S> dz = Mat<S>::Zero(batch * nvis, width_);
        for (Eigen::Index b = 0; b < batch; ++b) {
            const MaskPlan& plan = plans[std::size_t(b)];
            for (int u : plan.masked) mask_token_.grad.row(0) += dx.row(b * n + u);
            for (std::size_t i = 0; i < plan.visible.size(); ++i)
                dz.row(b * nvis + Eigen::Index(i)) = dx.row(b * n + plan.visible[i]);
        }
        return embed_.backward(dz);
    }

    void collect(nn::ParamRefs<S>& out) {
        embed_.collect(out);
        out.push_back(&mask_token_);
        for (auto& b : blocks_) b.collect(out);
        norm_.collect(out);
        head_.collect(out);
    }

   private:
    Eigen::Index grid_ = 0, width_ = 0;
    nn::Linear<S> embed_;
    nn::Param<S> mask_token_;
    std::vector<nn::TransformerBlock<S>> blocks_;
    nn::LayerNorm<S> norm_;
    nn::Linear<S> head_;
    Mat<S> pos_;
    const std::vector<MaskPlan>* plans_ = nullptr;
};

// Encoder + decoder pair with a single masked-MSE objective; the unit the
// finite-difference gradient check runs against.
template <class S>
struct MimModel {
    backbone::Encoder<S> encoder;
    Decoder<S> decoder;
    bool normalize_targets = false;

    MimModel(const backbone::EncoderConfig& cfg, int dec_width, int dec_depth, int dec_heads,
             Eigen::Index target_dim, std::uint64_t init_seed, bool normalize = false)
        : encoder(cfg, init_seed), normalize_targets(normalize) {
        Rng rng(init_seed ^ 0xdecdecdecull);
        decoder = Decoder<S>(cfg.grid(), cfg.dim3, dec_width, dec_depth, dec_heads, target_dim,
                             cfg.mlp_ratio, rng);
    }

    nn::ParamRefs<S> params() {
        nn::ParamRefs<S> out;
        encoder.collect(out);
        decoder.collect(out);
        return out;
    }

    // targets: (B * N) x D full-grid rows per image (pre-normalization).
    S forward_loss(const std::vector<const Image*>& images, const std::vector<MaskPlan>& plans,
                   const Mat<S>& targets) {
        std::vector<std::vector<int>> visible;
        visible.reserve(plans.size());
        for (const auto& p : plans) visible.push_back(p.visible);
        auto grid = encoder.forward(images, visible);
        pred_ = decoder.forward(grid.tokens, plans);

        tgt_ = targets;
        if (normalize_targets) standardize_rows(tgt_);

        const Eigen::Index n = Eigen::Index(plans[0].num_units());
        std::int64_t masked_total = 0;
        for (const auto& p : plans) masked_total += std::int64_t(p.masked.size());
        if (masked_total == 0) throw ValidationError("mim: empty masked set");
        inv_denom_ = S(1.0 / (double(masked_total) * double(pred_.cols())));

        S acc = 0;
        plans_ = &plans;
        for (std::size_t b = 0; b < plans.size(); ++b)
            for (int u : plans[b].masked) {
                const Eigen::Index row = Eigen::Index(b) * n + u;
                acc += (pred_.row(row) - tgt_.row(row)).squaredNorm();
            }
        return acc * inv_denom_;
    }

    void backward() {
        const auto& plans = *plans_;
        const Eigen::Index n = Eigen::Index(plans[0].num_units());
        Mat<S> dpred = Mat<S>::Zero(pred_.rows(), pred_.cols());
        for (std::size_t b = 0; b < plans.size(); ++b)
            for (int u : plans[b].masked) {
                const Eigen::Index row = Eigen::Index(b) * n + u;
                dpred.row(row) = S(2) * inv_denom_ * (pred_.row(row) - tgt_.row(row));
            }
        encoder.backward(decoder.backward(dpred));
    }

    Mat<S> pred_, tgt_;
    S inv_denom_ = 0;
    const std::vector<MaskPlan>* plans_ = nullptr;
};

struct PretrainConfig {
    double base_lr = 1.5e-4;
    double weight_decay = 0.05;
    double beta1 = 0.9;
    double beta2 = 0.95;
    int warmup_epochs = 5;
    int epochs = 100;
    int batch_size = 64;
    double mask_ratio = 0.75;
    features::TargetKind target = features::TargetKind::Mgf;
    std::vector<int> mgf_scales = {9, 13, 17};
    features::BaselineParams baseline;
    bool normalize_targets = false;  // off for SAR
    AugmentConfig aug;
    int decoder_width = 64;
    int decoder_depth = 2;
    int decoder_heads = 4;
    std::uint64_t seed = 0;
    int checkpoint_every = 0;  // epochs between checkpoints; 0 = final only

    void validate() const;
};

struct LossRecord {
    std::vector<double> epoch_loss;
    std::vector<double> wall_clock_s;
};

// In-memory corpus; pixels are stored as loaded (amplitude-scaled integers
// are divided back by the storage scale).
struct LoadedCorpus {
    std::vector<Image> images;
    std::vector<int> labels;  // -1 when unlabeled
    std::vector<Split> splits;
    std::vector<std::string> class_names;

    std::vector<std::size_t> indices_of(Split split) const;
};

LoadedCorpus load_corpus(const CorpusManifest& manifest, const std::filesystem::path& root);

struct PretrainResult {
    EncoderCheckpoint checkpoint;
    LossRecord loss;
};

// Full MIM pre-training over the non-test records of the corpus. When
// run_dir is set, writes config snapshot, loss.csv and checkpoints there.
// `init` must match encoder_cfg exactly (no partial load). `fraction`
// restricts to a deterministic prefix of the shuffled sample list.
PretrainResult pretrain_run(const LoadedCorpus& corpus, const backbone::EncoderConfig& enc_cfg,
                            const PretrainConfig& cfg,
                            const EncoderCheckpoint* init = nullptr,
                            const std::filesystem::path& run_dir = {},
                            double fraction = 1.0);

struct TwoStepResult {
    PretrainResult stage_a;  // empty loss when initialized from file
    PretrainResult stage_b;
    backbone::AttnDistanceReport attn_before;
    backbone::AttnDistanceReport attn_after;
};

// Stage a: pixel-target MIM on a generic-style corpus (or a provided
// checkpoint); stage b: MGF-target MIM on the SAR corpus initialized from
// stage a. Attention-distance reports are captured before and after stage b.
TwoStepResult two_step(const LoadedCorpus* stage_a_corpus, const PretrainConfig& stage_a_cfg,
                       const EncoderCheckpoint* stage_a_init, const LoadedCorpus& stage_b_corpus,
                       const PretrainConfig& stage_b_cfg, const backbone::EncoderConfig& enc_cfg,
                       const std::filesystem::path& run_dir = {});

struct SweepPoint {
    double fraction = 1.0;
    int dim3 = 0;
    int epochs = 0;
    double probe_accuracy = 0.0;
    double final_loss = 0.0;
    double wall_clock_s = 0.0;
};

// One pre-training run + linear probe per grid point (cartesian product of
// fractions x dims x epoch grid).
std::vector<SweepPoint> scaling_sweep(const LoadedCorpus& corpus,
                                      const backbone::EncoderConfig& base_enc,
                                      const PretrainConfig& base_cfg,
                                      const std::vector<double>& fractions,
                                      const std::vector<int>& dims,
                                      const std::vector<int>& epoch_grid,
                                      const std::filesystem::path& run_dir = {});

void write_loss_csv(const LossRecord& loss, const std::filesystem::path& path);
void write_attn_csv(const backbone::AttnDistanceReport& report,
                    const std::filesystem::path& path);
void write_sweep_csv(const std::vector<SweepPoint>& points, const std::filesystem::path& path);

// Feature target of one (augmented) view under a pretrain config.
features::FeatureStack compute_target(const Image& view, const PretrainConfig& cfg);

}  // namespace saratrx::pretrain
