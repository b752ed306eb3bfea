#pragma once

#include <filesystem>
#include <vector>

#include "saratrx/backbone.hpp"
#include "saratrx/checkpoint.hpp"
#include "saratrx/common.hpp"
#include "saratrx/pretrain.hpp"

namespace saratrx::eval {

// Linear-probing settings: frozen encoder, feature-normalization layer
// (running statistics, no learned scale/shift) + linear classifier.
struct ProbeConfig {
    double base_lr = 1e-3;
    double weight_decay = 1e-4;
    int batch_size = 25;
    int epochs = 30;
    int warmup_epochs = 1;       // constant warmup
    double warmup_lr = 1e-5;
    std::uint64_t seed = 0;
};

struct EmbeddingTable {
    Mat<float> features;  // rows x dim
    std::vector<int> labels;
};

// Feature-normalization layer (running statistics, no learned scale/shift)
// followed by a linear classifier, trained with cross-entropy.
template <class S>
class ProbeHead {
   public:
    ProbeHead() = default;
    ProbeHead(Eigen::Index dim, int classes, std::uint64_t seed) {
        Rng rng(seed ^ 0x9ead);
        fc_ = nn::Linear<S>("head.fc", dim, classes, rng);
        running_mean_ = Mat<S>::Zero(1, dim);
        running_var_ = Mat<S>::Ones(1, dim);
    }

    Mat<S> forward(const Mat<S>& x, bool training) {
        Mat<S> mean, var;
        if (training) {
            mean = x.colwise().mean();
            var = (x.rowwise() - mean.row(0)).array().square().colwise().mean().matrix();
            running_mean_ = ((1 - kMomentum) * running_mean_.array() + kMomentum * mean.array()).matrix();
            running_var_ = ((1 - kMomentum) * running_var_.array() + kMomentum * var.array()).matrix();
        } else {
            mean = running_mean_;
            var = running_var_;
        }
        inv_std_ = (var.array() + S(kEps)).rsqrt().matrix();
        xhat_ = ((x.rowwise() - mean.row(0)).array().rowwise() * inv_std_.row(0).array()).matrix();
        training_ = training;
        return fc_.forward(xhat_);
    }

    // Mean cross-entropy; caches the logit gradient for backward().
    S ce_loss(const Mat<S>& logits, const std::vector<int>& labels) {
        if (logits.rows() != Eigen::Index(labels.size()))
            throw ValidationError("probe: logits/labels size mismatch");
        const Eigen::Index m = logits.rows();
        dlogits_.resize(m, logits.cols());
        S loss = 0;
        for (Eigen::Index i = 0; i < m; ++i) {
            const int y = labels[std::size_t(i)];
            if (y < 0 || y >= int(logits.cols()))
                throw ValidationError("probe: label out of range");
            const S mx = logits.row(i).maxCoeff();
            Mat<S> e = (logits.row(i).array() - mx).exp().matrix();
            const S z = e.sum();
            loss -= std::log(e(0, y) / z);
            dlogits_.row(i) = (e / z) / S(m);
            dlogits_(i, y) -= S(1) / S(m);
        }
        return loss / S(m);
    }

    // Gradient w.r.t. the raw input features.
    Mat<S> backward() {
        Mat<S> dxhat = fc_.backward(dlogits_);
        if (!training_) return (dxhat.array().rowwise() * inv_std_.row(0).array()).matrix();
        const S m = S(dxhat.rows());
        Mat<S> sum_d = dxhat.colwise().sum();
        Mat<S> sum_dx = (dxhat.array() * xhat_.array()).colwise().sum().matrix();
        Mat<S> dx = (m * dxhat.array() - sum_d.replicate(dxhat.rows(), 1).array() -
                     xhat_.array() * sum_dx.replicate(dxhat.rows(), 1).array())
                        .rowwise() *
                    (inv_std_.row(0).array() / m);
        return dx.matrix();
    }

    nn::ParamRefs<S> params() {
        nn::ParamRefs<S> out;
        fc_.collect(out);
        return out;
    }

   private:
    static constexpr double kMomentum = 0.1;
    static constexpr double kEps = 1e-5;
    nn::Linear<S> fc_;
    Mat<S> running_mean_, running_var_, inv_std_, xhat_, dlogits_;
    bool training_ = false;
};

// Mean-pooled final-stage tokens over a full (unmasked) forward.
EmbeddingTable extract_embeddings(backbone::Encoder<float>& encoder,
                                  const std::vector<const Image*>& images,
                                  const std::vector<int>& labels);

struct ProbeResult {
    double accuracy = 0.0;
    std::vector<double> per_class_accuracy;
    std::vector<std::vector<int>> confusion;  // [true][pred]
};

// Train only the normalization + linear head on precomputed embeddings.
ProbeResult probe_on_embeddings(const EmbeddingTable& train, const EmbeddingTable& test,
                                int num_classes, const ProbeConfig& cfg);

// Builds the encoder from the checkpoint, embeds both manifests, probes.
// Encoder parameters are bit-identical before and after.
ProbeResult linear_probe(const EncoderCheckpoint& ckpt, const pretrain::LoadedCorpus& corpus,
                         const ProbeConfig& cfg);

struct FewShotTask {
    int ways = 0;   // 0 = all available classes
    int shots = 5;
    int episodes = 10;
    std::uint64_t seed = 0;
};

struct FewShotResult {
    double mean_accuracy = 0.0;
    double std_accuracy = 0.0;  // sample std over episodes
    std::vector<double> episode_accuracies;
};

// N-way K-shot episodes: K train items per class, full test pool of the
// sampled classes, disjointly seeded per (seed, episode index).
FewShotResult fewshot_eval(const EncoderCheckpoint& ckpt, const pretrain::LoadedCorpus& corpus,
                           const FewShotTask& task, const ProbeConfig& cfg);

FewShotResult fewshot_on_embeddings(const EmbeddingTable& train, const EmbeddingTable& test,
                                    int num_classes, const FewShotTask& task,
                                    const ProbeConfig& cfg);

// Unfreezes the last k stage-3 blocks plus the head; k = 0 reduces exactly
// to linear_probe.
ProbeResult partial_finetune(const EncoderCheckpoint& ckpt, int k_blocks,
                             const pretrain::LoadedCorpus& corpus, const ProbeConfig& cfg);

void write_probe_json(const ProbeResult& result, const std::string& config_hash,
                      const std::filesystem::path& path);
void write_fewshot_csv(const FewShotResult& result, const std::filesystem::path& path);

}  // namespace saratrx::eval
