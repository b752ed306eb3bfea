#pragma once

#include <vector>

#include "saratrx/common.hpp"
#include "saratrx/nn.hpp"

namespace saratrx::backbone {

enum class Variant { HiViT, ViT };

Variant variant_from_string(const std::string& s);
std::string to_string(Variant v);

// Hierarchical encoder: 4x4 patches, two 2x2 merges (token stride 16),
// MLP-only early stages, self-attention only at the final stride. The plain
// ViT variant embeds stride-16 patches directly into the final stage.
struct EncoderConfig {
    int input_size = 128;
    int patch_size = 4;          // fixed; stride-16 units are 4x4 patches
    Variant variant = Variant::HiViT;
    int dim1 = 32;
    int dim2 = 64;
    int dim3 = 128;
    int depth1 = 1;
    int depth2 = 1;
    int depth3 = 4;
    int heads = 4;
    double mlp_ratio = 2.0;

    int unit_px() const { return 16; }
    int grid() const { return input_size / unit_px(); }
    int num_units() const { return grid() * grid(); }

    void validate() const;
    bool operator==(const EncoderConfig&) const = default;
};

// Token sequence on a square grid; stride = pixels per token.
template <class S>
struct TokenGrid {
    Mat<S> tokens;  // (batch * units) x dim
    Eigen::Index batch = 0;
    Eigen::Index grid = 0;
    int stride = 0;
    Eigen::Index tokens_per_image() const { return tokens.rows() / batch; }
};

// Mean attention distance per (layer, head), in input-image pixels.
struct AttnDistanceReport {
    int grid = 0;
    int stride = 0;
    // distances[layer][head]
    std::vector<std::vector<double>> distances;
    std::int64_t aggregated_queries = 0;
};

// Extracts the 4x4-patch rows for the listed stride-16 units of one image.
// Rows are grouped unit-by-unit, patches row-major inside each unit, so the
// two 2x2 merges and the final per-unit token are index-computable.
template <class S>
void patchify_units(const Image& img, const std::vector<int>& units, int grid, int unit_px,
                    int patch, Mat<S>& out, Eigen::Index row_offset) {
    const int per_side = unit_px / patch;          // 4
    const int per_unit = per_side * per_side;      // 16
    const int pdim = patch * patch;
    for (std::size_t u = 0; u < units.size(); ++u) {
        const int ur = units[u] / grid, uc = units[u] % grid;
        for (int p = 0; p < per_unit; ++p) {
            const int pr = p / per_side, pc = p % per_side;
            const int y0 = ur * unit_px + pr * patch;
            const int x0 = uc * unit_px + pc * patch;
            auto row = out.row(row_offset + Eigen::Index(u) * per_unit + p);
            for (int dy = 0; dy < patch; ++dy)
                for (int dx = 0; dx < patch; ++dx)
                    row(dy * patch + dx) = S(img(y0 + dy, x0 + dx));
        }
        (void)pdim;
    }
}

// Full stride-16 patch rows (ViT variant): one 256-value row per unit.
template <class S>
void patchify_units_coarse(const Image& img, const std::vector<int>& units, int grid, int unit_px,
                           Mat<S>& out, Eigen::Index row_offset) {
    for (std::size_t u = 0; u < units.size(); ++u) {
        const int ur = units[u] / grid, uc = units[u] % grid;
        auto row = out.row(row_offset + Eigen::Index(u));
        for (int dy = 0; dy < unit_px; ++dy)
            for (int dx = 0; dx < unit_px; ++dx)
                row(dy * unit_px + dx) = S(img(ur * unit_px + dy, uc * unit_px + dx));
    }
}

template <class S>
class Encoder {
   public:
    Encoder() = default;
    Encoder(const EncoderConfig& cfg, std::uint64_t init_seed) : cfg_(cfg) {
        cfg.validate();
        Rng rng(init_seed);
        const Eigen::Index pdim = cfg.patch_size * cfg.patch_size;
        if (cfg.variant == Variant::HiViT) {
            patch_proj_ = nn::Linear<S>("enc.patch", pdim, cfg.dim1, rng);
            for (int i = 0; i < cfg.depth1; ++i)
                stage1_.emplace_back("enc.s1b" + std::to_string(i), cfg.dim1,
                                     Eigen::Index(cfg.dim1 * cfg.mlp_ratio), rng);
            merge1_ = nn::Linear<S>("enc.merge1", 4 * cfg.dim1, cfg.dim2, rng);
            for (int i = 0; i < cfg.depth2; ++i)
                stage2_.emplace_back("enc.s2b" + std::to_string(i), cfg.dim2,
                                     Eigen::Index(cfg.dim2 * cfg.mlp_ratio), rng);
            merge2_ = nn::Linear<S>("enc.merge2", 4 * cfg.dim2, cfg.dim3, rng);
        } else {
            patch_proj_ = nn::Linear<S>("enc.patch", Eigen::Index(cfg.unit_px() * cfg.unit_px()),
                                        cfg.dim3, rng);
        }
        for (int i = 0; i < cfg.depth3; ++i)
            stage3_.emplace_back("enc.s3b" + std::to_string(i), cfg.dim3, cfg.heads,
                                 Eigen::Index(cfg.dim3 * cfg.mlp_ratio), rng);
        norm_ = nn::LayerNorm<S>("enc.norm", cfg.dim3);
        pos_ = nn::sincos_position_table<S>(cfg.grid(), cfg.dim3);
    }

    const EncoderConfig& config() const { return cfg_; }

    // All stride-16 unit ids, row-major.
    std::vector<int> all_units() const {
        std::vector<int> v(std::size_t(cfg_.num_units()));
        for (std::size_t i = 0; i < v.size(); ++i) v[i] = int(i);
        return v;
    }

    // Forward over a batch of images restricted to per-image visible units.
    // All images must expose the same visible count. Returns one stride-16
    // token per visible unit, grouped per image in the given unit order.
    TokenGrid<S> forward(const std::vector<const Image*>& images,
                         const std::vector<std::vector<int>>& visible_units,
                         bool keep_attn = false) {
        const Eigen::Index batch = Eigen::Index(images.size());
        if (batch == 0) throw ValidationError("encoder: empty batch");
        if (visible_units.size() != images.size())
            throw ValidationError("encoder: visible_units size mismatch");
        const Eigen::Index nvis = Eigen::Index(visible_units[0].size());
        for (const auto& u : visible_units)
            if (Eigen::Index(u.size()) != nvis)
                throw ValidationError("encoder: nonuniform visible counts in batch");
        for (const Image* im : images)
            if (im->rows() != cfg_.input_size || im->cols() != cfg_.input_size)
                throw ValidationError("encoder: image size does not match config");

        units_ = visible_units;
        Mat<S> x;
        if (cfg_.variant == Variant::HiViT) {
            const int per_unit = 16;
            Mat<S> patches(batch * nvis * per_unit,
                           Eigen::Index(cfg_.patch_size * cfg_.patch_size));
            for (Eigen::Index b = 0; b < batch; ++b)
                patchify_units<S>(*images[std::size_t(b)], visible_units[std::size_t(b)],
                                  cfg_.grid(), cfg_.unit_px(), cfg_.patch_size, patches,
                                  b * nvis * per_unit);
            x = patch_proj_.forward(patches);
            for (auto& blk : stage1_) x = blk.forward(x);
            x = merge1_.forward(regroup_concat(x, 4));  // 16 -> 4 tokens per unit
            for (auto& blk : stage2_) x = blk.forward(x);
            x = merge2_.forward(regroup_concat(x, 2));  // 4 -> 1 token per unit
        } else {
            Mat<S> patches(batch * nvis, Eigen::Index(cfg_.unit_px() * cfg_.unit_px()));
            for (Eigen::Index b = 0; b < batch; ++b)
                patchify_units_coarse<S>(*images[std::size_t(b)], visible_units[std::size_t(b)],
                                         cfg_.grid(), cfg_.unit_px(), patches, b * nvis);
            x = patch_proj_.forward(patches);
        }

        // Positional identity of each token is its (row, col) on the grid.
        for (Eigen::Index b = 0; b < batch; ++b)
            for (Eigen::Index u = 0; u < nvis; ++u)
                x.row(b * nvis + u) += pos_.row(units_[std::size_t(b)][std::size_t(u)]);

        for (auto& blk : stage3_) x = blk.forward(x, batch, nvis, keep_attn);
        x = norm_.forward(x);

        TokenGrid<S> out;
        out.tokens = std::move(x);
        out.batch = batch;
        out.grid = cfg_.grid();
        out.stride = cfg_.unit_px();
        return out;
    }

    // Backward from gradient w.r.t. the output tokens. When `frozen_below` is
    // set to k, only the last k stage-3 blocks (plus the final norm)
    // accumulate parameter gradients; the pass still stops there.
    void backward(const Mat<S>& dtokens, int unfrozen_stage3_blocks = -1) {
        Mat<S> d = norm_.backward(dtokens);
        const int depth = int(stage3_.size());
        const int stop = unfrozen_stage3_blocks < 0 ? 0 : depth - unfrozen_stage3_blocks;
        for (int i = depth - 1; i >= stop; --i) d = stage3_[std::size_t(i)].backward(d);
        if (stop > 0) return;
        if (cfg_.variant == Variant::HiViT) {
            d = scatter_concat(merge2_.backward(d), 2);
            for (auto it = stage2_.rbegin(); it != stage2_.rend(); ++it) d = it->backward(d);
            d = scatter_concat(merge1_.backward(d), 4);
            for (auto it = stage1_.rbegin(); it != stage1_.rend(); ++it) d = it->backward(d);
        }
        patch_proj_.backward(d);
    }

    void collect(nn::ParamRefs<S>& out) {
        patch_proj_.collect(out);
        for (auto& b : stage1_) b.collect(out);
        if (cfg_.variant == Variant::HiViT) merge1_.collect(out);
        for (auto& b : stage2_) b.collect(out);
        if (cfg_.variant == Variant::HiViT) merge2_.collect(out);
        for (auto& b : stage3_) b.collect(out);
        norm_.collect(out);
    }

    // Parameters of the last k stage-3 blocks plus the final norm. Used by
    // partial fine-tuning.
    nn::ParamRefs<S> collect_last_blocks(int k) {
        nn::ParamRefs<S> out;
        const int depth = int(stage3_.size());
        if (k < 0 || k > depth) throw ValidationError("k_blocks out of range");
        for (int i = depth - k; i < depth; ++i) stage3_[std::size_t(i)].collect(out);
        if (k > 0) norm_.collect(out);
        return out;
    }

    std::vector<nn::TransformerBlock<S>>& stage3() { return stage3_; }

   private:
    // Concatenate 2x2 groups of tokens inside each unit. `half` is the group
    // count per side after merging (4 -> 2 for merge1, 2 -> 1 for merge2).
    Mat<S> regroup_concat(const Mat<S>& x, int side_before) {
        const int side_after = side_before / 2;
        const Eigen::Index per_before = side_before * side_before;
        const Eigen::Index per_after = side_after * side_after;
        const Eigen::Index nunits = x.rows() / per_before;
        const Eigen::Index d = x.cols();
        Mat<S> out(nunits * per_after, 4 * d);
        for (Eigen::Index u = 0; u < nunits; ++u)
            for (Eigen::Index q = 0; q < per_after; ++q) {
                const Eigen::Index qr = q / side_after, qc = q % side_after;
                for (Eigen::Index k = 0; k < 4; ++k) {
                    const Eigen::Index pr = 2 * qr + k / 2, pc = 2 * qc + k % 2;
                    out.row(u * per_after + q).segment(k * d, d) =
                        x.row(u * per_before + pr * side_before + pc);
                }
            }
        return out;
    }

    // Inverse of regroup_concat for the same side_before.
    Mat<S> scatter_concat(const Mat<S>& dy, int side_before) {
        const int side_after = side_before / 2;
        const Eigen::Index per_before = side_before * side_before;
        const Eigen::Index per_after = side_after * side_after;
        const Eigen::Index nunits = dy.rows() / per_after;
        const Eigen::Index d = dy.cols() / 4;
        Mat<S> dx(nunits * per_before, d);
        for (Eigen::Index u = 0; u < nunits; ++u)
            for (Eigen::Index q = 0; q < per_after; ++q) {
                const Eigen::Index qr = q / side_after, qc = q % side_after;
                for (Eigen::Index k = 0; k < 4; ++k) {
                    const Eigen::Index pr = 2 * qr + k / 2, pc = 2 * qc + k % 2;
                    dx.row(u * per_before + pr * side_before + pc) =
                        dy.row(u * per_after + q).segment(k * d, d);
                }
            }
        return dx;
    }

    EncoderConfig cfg_;
    nn::Linear<S> patch_proj_;
    std::vector<nn::MlpBlock<S>> stage1_, stage2_;
    nn::Linear<S> merge1_, merge2_;
    std::vector<nn::TransformerBlock<S>> stage3_;
    nn::LayerNorm<S> norm_;
    Mat<S> pos_;
    std::vector<std::vector<int>> units_;
};

// Attention-weighted mean distance between token centers, per layer/head,
// over an unmasked forward of the given images.
template <class S>
AttnDistanceReport attention_distance(Encoder<S>& enc, const std::vector<const Image*>& images) {
    const EncoderConfig& cfg = enc.config();
    const int grid = cfg.grid();
    const int stride = cfg.unit_px();
    const Eigen::Index n = Eigen::Index(grid) * grid;

    // Pairwise center distances in input pixels.
    Mat<double> dist(n, n);
    for (Eigen::Index q = 0; q < n; ++q)
        for (Eigen::Index k = 0; k < n; ++k) {
            const double dr = double(q / grid - k / grid) * stride;
            const double dc = double(q % grid - k % grid) * stride;
            dist(q, k) = std::sqrt(dr * dr + dc * dc);
        }

    std::vector<std::vector<int>> units(images.size(), enc.all_units());
    enc.forward(images, units, /*keep_attn=*/true);

    AttnDistanceReport report;
    report.grid = grid;
    report.stride = stride;
    report.aggregated_queries = std::int64_t(images.size()) * n;
    for (auto& blk : enc.stage3()) {
        const auto& maps = blk.attention().attention();
        const int heads = blk.attention().heads();
        std::vector<double> per_head(std::size_t(heads), 0.0);
        for (std::size_t b = 0; b < images.size(); ++b)
            for (int h = 0; h < heads; ++h) {
                const Mat<S>& a = maps[b * std::size_t(heads) + std::size_t(h)];
                double acc = 0.0;
                for (Eigen::Index q = 0; q < n; ++q)
                    for (Eigen::Index k = 0; k < n; ++k) acc += double(a(q, k)) * dist(q, k);
                per_head[std::size_t(h)] += acc / double(n);
            }
        for (double& v : per_head) v /= double(images.size());
        report.distances.push_back(std::move(per_head));
    }
    return report;
}

}  // namespace saratrx::backbone
