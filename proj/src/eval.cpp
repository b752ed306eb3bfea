#include "saratrx/eval.hpp"

#include <cmath>
#include <fstream>
#include <set>

#include "nlohmann/json.hpp"

namespace saratrx::eval {

namespace {

constexpr Eigen::Index kForwardBatch = 16;

std::vector<std::size_t> labeled_split(const pretrain::LoadedCorpus& corpus, Split split) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < corpus.images.size(); ++i)
        if (corpus.splits[i] == split && corpus.labels[i] >= 0) out.push_back(i);
    return out;
}

EmbeddingTable embed_split(backbone::Encoder<float>& enc, const pretrain::LoadedCorpus& corpus,
                           const std::vector<std::size_t>& indices) {
    std::vector<const Image*> images;
    std::vector<int> labels;
    for (std::size_t i : indices) {
        images.push_back(&corpus.images[i]);
        labels.push_back(corpus.labels[i]);
    }
    return extract_embeddings(enc, images, labels);
}

void require_trainable(const std::vector<int>& labels) {
    std::set<int> distinct(labels.begin(), labels.end());
    if (distinct.size() < 2)
        throw ValidationError("probe: training set must contain at least two classes");
}

ProbeResult evaluate_head(ProbeHead<float>& head, const EmbeddingTable& test, int num_classes) {
    ProbeResult result;
    result.confusion.assign(std::size_t(num_classes), std::vector<int>(std::size_t(num_classes), 0));
    Mat<float> logits = head.forward(test.features, false);
    int correct = 0;
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        Eigen::Index pred = 0;
        logits.row(i).maxCoeff(&pred);
        const int y = test.labels[std::size_t(i)];
        result.confusion[std::size_t(y)][std::size_t(pred)] += 1;
        if (int(pred) == y) ++correct;
    }
    result.accuracy = double(correct) / double(logits.rows());
    result.per_class_accuracy.assign(std::size_t(num_classes), 0.0);
    for (int c = 0; c < num_classes; ++c) {
        int total = 0;
        for (int p = 0; p < num_classes; ++p) total += result.confusion[std::size_t(c)][std::size_t(p)];
        if (total > 0)
            result.per_class_accuracy[std::size_t(c)] =
                double(result.confusion[std::size_t(c)][std::size_t(c)]) / double(total);
    }
    return result;
}

std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, int epoch) {
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    Rng rng = Rng::for_index(seed, std::uint64_t(epoch));
    for (std::size_t i = 0; i + 1 < n; ++i) {
        const std::size_t j = i + std::size_t(rng.below(n - i));
        std::swap(order[i], order[j]);
    }
    return order;
}

}  // namespace

EmbeddingTable extract_embeddings(backbone::Encoder<float>& encoder,
                                  const std::vector<const Image*>& images,
                                  const std::vector<int>& labels) {
    if (images.empty()) throw ValidationError("extract_embeddings: empty image list");
    if (images.size() != labels.size())
        throw ValidationError("extract_embeddings: images/labels size mismatch");
    const Eigen::Index n = encoder.config().num_units();
    EmbeddingTable table;
    table.features.resize(Eigen::Index(images.size()), encoder.config().dim3);
    table.labels = labels;
    for (std::size_t lo = 0; lo < images.size(); lo += std::size_t(kForwardBatch)) {
        const std::size_t hi = std::min(images.size(), lo + std::size_t(kForwardBatch));
        std::vector<const Image*> chunk(images.begin() + std::ptrdiff_t(lo),
                                        images.begin() + std::ptrdiff_t(hi));
        std::vector<std::vector<int>> units(chunk.size(), encoder.all_units());
        auto grid = encoder.forward(chunk, units);
        for (std::size_t b = 0; b < chunk.size(); ++b)
            table.features.row(Eigen::Index(lo + b)) =
                grid.tokens.middleRows(Eigen::Index(b) * n, n).colwise().mean();
    }
    return table;
}

ProbeResult probe_on_embeddings(const EmbeddingTable& train, const EmbeddingTable& test,
                                int num_classes, const ProbeConfig& cfg) {
    if (train.features.rows() == 0 || test.features.rows() == 0)
        throw ValidationError("probe: empty embedding table");
    if (num_classes < 2) throw ValidationError("probe: need at least two classes");
    require_trainable(train.labels);

    ProbeHead<float> head(train.features.cols(), num_classes, cfg.seed);
    nn::AdamW<float> opt(head.params(), {0.9, 0.999, 1e-8, float(cfg.weight_decay)});

    const std::size_t n = std::size_t(train.features.rows());
    const int steps = int((n + std::size_t(cfg.batch_size) - 1) / std::size_t(cfg.batch_size));
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto order = epoch_order(n, cfg.seed ^ 0x0bde, epoch);
        for (int step = 0; step < steps; ++step) {
            const std::size_t lo = std::size_t(step) * std::size_t(cfg.batch_size);
            const std::size_t hi = std::min(n, lo + std::size_t(cfg.batch_size));
            Mat<float> x(Eigen::Index(hi - lo), train.features.cols());
            std::vector<int> y(hi - lo);
            for (std::size_t i = lo; i < hi; ++i) {
                x.row(Eigen::Index(i - lo)) = train.features.row(Eigen::Index(order[i]));
                y[i - lo] = train.labels[order[i]];
            }
            const double lr = nn::cosine_lr(cfg.base_lr, double(epoch) + double(step) / steps,
                                            cfg.warmup_epochs, cfg.epochs, cfg.warmup_lr,
                                            /*constant_warmup=*/true);
            opt.zero_grad();
            head.ce_loss(head.forward(x, true), y);
            head.backward();
            opt.step(lr);
        }
    }
    return evaluate_head(head, test, num_classes);
}

ProbeResult linear_probe(const EncoderCheckpoint& ckpt, const pretrain::LoadedCorpus& corpus,
                         const ProbeConfig& cfg) {
    auto enc = make_encoder<float>(ckpt);
    const auto train_idx = labeled_split(corpus, Split::Train);
    const auto test_idx = labeled_split(corpus, Split::Test);
    if (train_idx.empty() || test_idx.empty())
        throw ValidationError("linear_probe: corpus needs labeled train and test records");
    const auto train = embed_split(enc, corpus, train_idx);
    const auto test = embed_split(enc, corpus, test_idx);
    return probe_on_embeddings(train, test, int(corpus.class_names.size()), cfg);
}

FewShotResult fewshot_on_embeddings(const EmbeddingTable& train, const EmbeddingTable& test,
                                    int num_classes, const FewShotTask& task,
                                    const ProbeConfig& cfg) {
    if (task.episodes < 1) throw ValidationError("fewshot: episodes must be >= 1");
    if (task.shots < 1) throw ValidationError("fewshot: shots must be >= 1");

    std::vector<std::vector<Eigen::Index>> pools(static_cast<std::size_t>(num_classes));
    for (Eigen::Index i = 0; i < train.features.rows(); ++i) {
        const int y = train.labels[std::size_t(i)];
        if (y >= 0 && y < num_classes) pools[std::size_t(y)].push_back(i);
    }
    std::vector<int> present;
    for (int c = 0; c < num_classes; ++c)
        if (!pools[std::size_t(c)].empty()) present.push_back(c);
    const int ways = task.ways == 0 ? int(present.size()) : task.ways;
    if (ways < 2 || ways > int(present.size()))
        throw ValidationError("fewshot: ways must lie in [2, classes available]");
    std::size_t smallest = SIZE_MAX;
    for (int c : present) smallest = std::min(smallest, pools[std::size_t(c)].size());
    if (std::size_t(task.shots) > smallest)
        throw ValidationError("fewshot: shots exceed the smallest class pool (" +
                              std::to_string(smallest) + ")");

    FewShotResult result;
    for (int ep = 0; ep < task.episodes; ++ep) {
        Rng rng = Rng::for_index(task.seed, std::uint64_t(ep));
        std::vector<int> classes = present;
        for (std::size_t i = 0; i + 1 < classes.size(); ++i) {
            const std::size_t j = i + std::size_t(rng.below(classes.size() - i));
            std::swap(classes[i], classes[j]);
        }
        classes.resize(std::size_t(ways));
        std::vector<int> remap(std::size_t(num_classes), -1);
        for (int w = 0; w < ways; ++w) remap[std::size_t(classes[std::size_t(w)])] = w;

        EmbeddingTable etrain;
        etrain.features.resize(Eigen::Index(ways) * task.shots, train.features.cols());
        Eigen::Index row = 0;
        for (int c : classes) {
            std::vector<Eigen::Index> pool = pools[std::size_t(c)];
            for (int s = 0; s < task.shots; ++s) {
                const std::size_t j = std::size_t(s) + std::size_t(rng.below(pool.size() - std::size_t(s)));
                std::swap(pool[std::size_t(s)], pool[j]);
                etrain.features.row(row++) = train.features.row(pool[std::size_t(s)]);
                etrain.labels.push_back(remap[std::size_t(c)]);
            }
        }
        EmbeddingTable etest;
        std::vector<Eigen::Index> keep;
        for (Eigen::Index i = 0; i < test.features.rows(); ++i) {
            const int y = test.labels[std::size_t(i)];
            if (y >= 0 && y < num_classes && remap[std::size_t(y)] >= 0) keep.push_back(i);
        }
        if (keep.empty()) throw ValidationError("fewshot: no test items for the sampled classes");
        etest.features.resize(Eigen::Index(keep.size()), test.features.cols());
        for (std::size_t i = 0; i < keep.size(); ++i) {
            etest.features.row(Eigen::Index(i)) = test.features.row(keep[i]);
            etest.labels.push_back(remap[std::size_t(test.labels[std::size_t(keep[i])])]);
        }

        ProbeConfig ecfg = cfg;
        ecfg.seed = Rng::for_index(cfg.seed, std::uint64_t(ep)).next_u64();
        result.episode_accuracies.push_back(
            probe_on_embeddings(etrain, etest, ways, ecfg).accuracy);
    }

    double mean = 0.0;
    for (double a : result.episode_accuracies) mean += a;
    mean /= double(result.episode_accuracies.size());
    result.mean_accuracy = mean;
    if (result.episode_accuracies.size() > 1) {
        double var = 0.0;
        for (double a : result.episode_accuracies) var += (a - mean) * (a - mean);
        result.std_accuracy = std::sqrt(var / double(result.episode_accuracies.size() - 1));
    }
    return result;
}

FewShotResult fewshot_eval(const EncoderCheckpoint& ckpt, const pretrain::LoadedCorpus& corpus,
                           const FewShotTask& task, const ProbeConfig& cfg) {
    auto enc = make_encoder<float>(ckpt);
    const auto train_idx = labeled_split(corpus, Split::Train);
    const auto test_idx = labeled_split(corpus, Split::Test);
    if (train_idx.empty() || test_idx.empty())
        throw ValidationError("fewshot: corpus needs labeled train and test records");
    const auto train = embed_split(enc, corpus, train_idx);
    const auto test = embed_split(enc, corpus, test_idx);
    return fewshot_on_embeddings(train, test, int(corpus.class_names.size()), task, cfg);
}

ProbeResult partial_finetune(const EncoderCheckpoint& ckpt, int k_blocks,
                             const pretrain::LoadedCorpus& corpus, const ProbeConfig& cfg) {
    if (k_blocks == 0) return linear_probe(ckpt, corpus, cfg);
    if (k_blocks < 0 || k_blocks > ckpt.config.depth3)
        throw ValidationError("partial_finetune: k_blocks out of range");

    auto enc = make_encoder<float>(ckpt);
    const auto train_idx = labeled_split(corpus, Split::Train);
    const auto test_idx = labeled_split(corpus, Split::Test);
    if (train_idx.empty() || test_idx.empty())
        throw ValidationError("partial_finetune: corpus needs labeled train and test records");
    std::vector<int> train_labels;
    for (std::size_t i : train_idx) train_labels.push_back(corpus.labels[i]);
    require_trainable(train_labels);

    const int num_classes = int(corpus.class_names.size());
    const Eigen::Index n = enc.config().num_units();
    ProbeHead<float> head(enc.config().dim3, num_classes, cfg.seed);
    nn::ParamRefs<float> params = enc.collect_last_blocks(k_blocks);
    for (auto* p : head.params()) params.push_back(p);
    nn::AdamW<float> opt(params, {0.9, 0.999, 1e-8, float(cfg.weight_decay)});

    const std::size_t ntr = train_idx.size();
    const int steps = int((ntr + std::size_t(cfg.batch_size) - 1) / std::size_t(cfg.batch_size));
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto order = epoch_order(ntr, cfg.seed ^ 0x0bde, epoch);
        for (int step = 0; step < steps; ++step) {
            const std::size_t lo = std::size_t(step) * std::size_t(cfg.batch_size);
            const std::size_t hi = std::min(ntr, lo + std::size_t(cfg.batch_size));
            const Eigen::Index bsz = Eigen::Index(hi - lo);
            std::vector<const Image*> images;
            std::vector<int> y;
            for (std::size_t i = lo; i < hi; ++i) {
                images.push_back(&corpus.images[train_idx[order[i]]]);
                y.push_back(corpus.labels[train_idx[order[i]]]);
            }
            std::vector<std::vector<int>> units(images.size(), enc.all_units());
            auto grid = enc.forward(images, units);
            Mat<float> feats(bsz, enc.config().dim3);
            for (Eigen::Index b = 0; b < bsz; ++b)
                feats.row(b) = grid.tokens.middleRows(b * n, n).colwise().mean();

            const double lr = nn::cosine_lr(cfg.base_lr, double(epoch) + double(step) / steps,
                                            cfg.warmup_epochs, cfg.epochs, cfg.warmup_lr, true);
            opt.zero_grad();
            head.ce_loss(head.forward(feats, true), y);
            Mat<float> dfeat = head.backward();
            Mat<float> dtokens(bsz * n, enc.config().dim3);
            for (Eigen::Index b = 0; b < bsz; ++b)
                dtokens.middleRows(b * n, n) = (dfeat.row(b) / float(n)).replicate(n, 1);
            enc.backward(dtokens, k_blocks);
            opt.step(lr);
        }
    }

    const auto test = embed_split(enc, corpus, test_idx);
    return evaluate_head(head, test, num_classes);
}

void write_probe_json(const ProbeResult& result, const std::string& config_hash,
                      const std::filesystem::path& path) {
    nlohmann::ordered_json j;
    j["accuracy"] = result.accuracy;
    j["config_hash"] = config_hash;
    j["confusion"] = result.confusion;
    j["per_class_accuracy"] = result.per_class_accuracy;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw RuntimeError("cannot write " + path.string());
    out << j.dump(2) << "\n";
}

void write_fewshot_csv(const FewShotResult& result, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw RuntimeError("cannot write " + path.string());
    out << "episode,accuracy\n";
    char buf[64];
    for (std::size_t i = 0; i < result.episode_accuracies.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%zu,%.6f\n", i + 1, result.episode_accuracies[i]);
        out << buf;
    }
    std::snprintf(buf, sizeof(buf), "mean,%.6f\nstd,%.6f\n", result.mean_accuracy,
                  result.std_accuracy);
    out << buf;
}

}  // namespace saratrx::eval
