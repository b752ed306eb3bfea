#include "doctest.h"
#include "saratrx/eval.hpp"
#include "saratrx/pretrain.hpp"
#include "saratrx/rng.hpp"

using namespace saratrx;

namespace {

// Directional finite-difference check: for random unit directions d,
// (L(p + eps d) - L(p - eps d)) / (2 eps) must match grad . d.
template <class LossFn>
void check_directions(nn::ParamRefs<double>& params, LossFn loss_fn, int directions,
                      double eps, double tol) {
    loss_fn();  // populate grads at the base point
    std::vector<Mat<double>> base, grad;
    for (auto* p : params) {
        base.push_back(p->value);
        grad.push_back(p->grad);
    }

    Rng rng(0x6ead);
    for (int t = 0; t < directions; ++t) {
        std::vector<Mat<double>> dir;
        double norm2 = 0.0, analytic = 0.0;
        for (std::size_t i = 0; i < params.size(); ++i) {
            Mat<double> d(base[i].rows(), base[i].cols());
            for (Eigen::Index c = 0; c < d.cols(); ++c)
                for (Eigen::Index r = 0; r < d.rows(); ++r) d(r, c) = rng.normal();
            norm2 += d.squaredNorm();
            dir.push_back(std::move(d));
        }
        const double inv_norm = 1.0 / std::sqrt(norm2);
        for (std::size_t i = 0; i < params.size(); ++i) {
            dir[i] *= inv_norm;
            analytic += (grad[i].array() * dir[i].array()).sum();
        }

        for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = base[i] + eps * dir[i];
        const double lp = loss_fn();
        for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = base[i] - eps * dir[i];
        const double lm = loss_fn();
        for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = base[i];

        const double numeric = (lp - lm) / (2.0 * eps);
        const double denom = std::max({1e-8, std::abs(numeric), std::abs(analytic)});
        CHECK(std::abs(numeric - analytic) / denom < tol);
    }
}

}  // namespace

TEST_CASE("masked-image model gradients match finite differences") {
    backbone::EncoderConfig cfg;
    cfg.input_size = 32;  // 2x2 grid
    cfg.dim1 = 4;
    cfg.dim2 = 8;
    cfg.dim3 = 8;
    cfg.depth1 = 1;
    cfg.depth2 = 1;
    cfg.depth3 = 1;
    cfg.heads = 2;
    cfg.mlp_ratio = 1.0;

    const Eigen::Index target_dim = 256;  // one channel per stride-16 unit
    Rng rng(2);
    Image img(32, 32);
    for (int r = 0; r < 32; ++r)
        for (int c = 0; c < 32; ++c) img(r, c) = rng.uniform();
    Mat<double> target(4, target_dim);
    for (Eigen::Index c = 0; c < target_dim; ++c)
        for (Eigen::Index r = 0; r < 4; ++r) target(r, c) = rng.normal();

    for (const bool normalize : {false, true}) {
        pretrain::MimModel<double> model(cfg, /*dec_width=*/8, /*dec_depth=*/1, /*dec_heads=*/2,
                                         target_dim, /*seed=*/5, normalize);
        const std::vector<pretrain::MaskPlan> plans = {pretrain::make_mask(2, 0.5, 3)};
        nn::ParamRefs<double> params = model.params();
        auto loss_fn = [&]() {
            for (auto* p : params) p->grad.setZero();
            const double loss = model.forward_loss({&img}, plans, target);
            model.backward();
            return loss;
        };
        check_directions(params, loss_fn, /*directions=*/20, /*eps=*/1e-5, /*tol=*/1e-4);
    }
}

TEST_CASE("plain-ViT variant gradients match finite differences") {
    backbone::EncoderConfig cfg;
    cfg.input_size = 32;
    cfg.variant = backbone::Variant::ViT;
    cfg.dim3 = 8;
    cfg.depth3 = 2;
    cfg.heads = 2;
    cfg.mlp_ratio = 1.0;

    Rng rng(4);
    Image img(32, 32);
    for (int r = 0; r < 32; ++r)
        for (int c = 0; c < 32; ++c) img(r, c) = rng.uniform();
    Mat<double> target(4, 256);
    for (Eigen::Index c = 0; c < 256; ++c)
        for (Eigen::Index r = 0; r < 4; ++r) target(r, c) = rng.normal();

    pretrain::MimModel<double> model(cfg, 8, 1, 2, 256, 6, false);
    const std::vector<pretrain::MaskPlan> plans = {pretrain::make_mask(2, 0.5, 9)};
    nn::ParamRefs<double> params = model.params();
    auto loss_fn = [&]() {
        for (auto* p : params) p->grad.setZero();
        const double loss = model.forward_loss({&img}, plans, target);
        model.backward();
        return loss;
    };
    check_directions(params, loss_fn, 10, 1e-5, 1e-4);
}

TEST_CASE("probe-head cross-entropy gradients match finite differences") {
    const Eigen::Index dim = 6;
    const int classes = 4;
    Rng rng(8);
    Mat<double> x(10, dim);
    for (Eigen::Index c = 0; c < dim; ++c)
        for (Eigen::Index r = 0; r < 10; ++r) x(r, c) = rng.normal();
    std::vector<int> y;
    for (int i = 0; i < 10; ++i) y.push_back(int(rng.below(classes)));

    eval::ProbeHead<double> head(dim, classes, 1);
    nn::ParamRefs<double> params = head.params();
    auto loss_fn = [&]() {
        for (auto* p : params) p->grad.setZero();
        // Evaluation-mode statistics keep the loss a fixed function of the
        // parameters across finite-difference probes.
        const double loss = head.ce_loss(head.forward(x, false), y);
        head.backward();
        return loss;
    };
    check_directions(params, loss_fn, 20, 1e-6, 1e-5);

    // Input gradient, checked against a directional difference on x itself.
    loss_fn();
    Mat<double> dx = head.backward();
    Rng drng(3);
    Mat<double> d(x.rows(), x.cols());
    for (Eigen::Index c = 0; c < x.cols(); ++c)
        for (Eigen::Index r = 0; r < x.rows(); ++r) d(r, c) = drng.normal();
    d /= d.norm();
    const double analytic = (dx.array() * d.array()).sum();
    const double eps = 1e-6;
    const Mat<double> x0 = x;
    x = x0 + eps * d;
    const double lp = head.ce_loss(head.forward(x, false), y);
    x = x0 - eps * d;
    const double lm = head.ce_loss(head.forward(x, false), y);
    const double numeric = (lp - lm) / (2.0 * eps);
    CHECK(std::abs(numeric - analytic) / std::max(1e-8, std::abs(analytic)) < 1e-5);

    // Training mode: the loss depends on x through the batch statistics too.
    x = x0;
    head.ce_loss(head.forward(x, true), y);
    for (auto* p : params) p->grad.setZero();
    dx = head.backward();
    const double analytic_tr = (dx.array() * d.array()).sum();
    x = x0 + eps * d;
    const double lp_tr = head.ce_loss(head.forward(x, true), y);
    x = x0 - eps * d;
    const double lm_tr = head.ce_loss(head.forward(x, true), y);
    const double numeric_tr = (lp_tr - lm_tr) / (2.0 * eps);
    CHECK(std::abs(numeric_tr - analytic_tr) / std::max(1e-8, std::abs(analytic_tr)) < 1e-5);
}
