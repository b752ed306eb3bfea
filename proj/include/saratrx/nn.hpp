#pragma once

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "saratrx/common.hpp"
#include "saratrx/rng.hpp"

// Minimal dense NN layers with explicit forward/backward passes. Sequences
// are stored as (batch * tokens) x dim matrices; token counts are uniform
// across a batch so all linear algebra runs on one big matrix and only
// softmax attention loops over per-image blocks.
namespace saratrx::nn {

template <class S>
struct Param {
    std::string name;
    Mat<S> value;
    Mat<S> grad;
    bool decay = true;  // weight decay applies to weight matrices only

    void init_zero(Eigen::Index r, Eigen::Index c) {
        value = Mat<S>::Zero(r, c);
        grad = Mat<S>::Zero(r, c);
    }
    Eigen::Index count() const { return value.size(); }
};

template <class S>
using ParamRefs = std::vector<Param<S>*>;

template <class S>
void init_normal(Param<S>& p, Rng& rng, double stddev = 0.02) {
    for (Eigen::Index j = 0; j < p.value.cols(); ++j)
        for (Eigen::Index i = 0; i < p.value.rows(); ++i)
            p.value(i, j) = S(stddev * rng.normal());
}

template <class S>
class Linear {
   public:
    Linear() = default;
    Linear(std::string name, Eigen::Index in, Eigen::Index out, Rng& rng) {
        w_.name = name + ".w";
        b_.name = name + ".b";
        b_.decay = false;
        w_.init_zero(in, out);
        b_.init_zero(1, out);
        init_normal(w_, rng);
    }

    Mat<S> forward(const Mat<S>& x) {
        x_ = x;
        return (x * w_.value).rowwise() + b_.value.row(0);
    }
    Mat<S> backward(const Mat<S>& dy) {
        w_.grad.noalias() += x_.transpose() * dy;
        b_.grad.row(0) += dy.colwise().sum();
        return dy * w_.value.transpose();
    }
    void collect(ParamRefs<S>& out) {
        out.push_back(&w_);
        out.push_back(&b_);
    }
    Param<S>& weight() { return w_; }
    Param<S>& bias() { return b_; }

   private:
    Param<S> w_, b_;
    Mat<S> x_;
};

template <class S>
class LayerNorm {
   public:
    static constexpr double kEps = 1e-6;

    LayerNorm() = default;
    LayerNorm(std::string name, Eigen::Index dim) {
        gamma_.name = name + ".gamma";
        beta_.name = name + ".beta";
        gamma_.decay = beta_.decay = false;
        gamma_.init_zero(1, dim);
        gamma_.value.setOnes();
        beta_.init_zero(1, dim);
    }

    Mat<S> forward(const Mat<S>& x) {
        const Eigen::Index d = x.cols();
        Vec<S> mean = x.rowwise().mean();
        Mat<S> centered = x.colwise() - mean;
        inv_std_ = ((centered.array().square().rowwise().sum() / S(d)) + S(kEps))
                       .sqrt()
                       .inverse()
                       .matrix();
        xhat_ = centered.array().colwise() * inv_std_.array();
        return (xhat_.array().rowwise() * gamma_.value.row(0).array()).rowwise() +
               beta_.value.row(0).array();
    }
    Mat<S> backward(const Mat<S>& dy) {
        const Eigen::Index d = xhat_.cols();
        gamma_.grad.row(0) += (dy.array() * xhat_.array()).colwise().sum().matrix();
        beta_.grad.row(0) += dy.colwise().sum();
        Mat<S> dxhat = dy.array().rowwise() * gamma_.value.row(0).array();
        Vec<S> m1 = dxhat.rowwise().mean();
        Vec<S> m2 = (dxhat.array() * xhat_.array()).rowwise().mean().matrix();
        Mat<S> dx = dxhat;
        dx.colwise() -= m1;
        dx.array() -= xhat_.array().colwise() * m2.array();
        dx.array().colwise() *= inv_std_.array();
        return dx;
    }
    void collect(ParamRefs<S>& out) {
        out.push_back(&gamma_);
        out.push_back(&beta_);
    }

   private:
    Param<S> gamma_, beta_;
    Mat<S> xhat_;
    Vec<S> inv_std_;
};

// Exact GELU (erf form).
template <class S>
class Gelu {
   public:
    Mat<S> forward(const Mat<S>& x) {
        x_ = x;
        return x.unaryExpr([](S v) {
            return S(0.5) * v * (S(1) + S(std::erf(double(v) * M_SQRT1_2)));
        });
    }
    Mat<S> backward(const Mat<S>& dy) {
        Mat<S> dx = x_.unaryExpr([](S v) {
            const double xd = double(v);
            const double cdf = 0.5 * (1.0 + std::erf(xd * M_SQRT1_2));
            const double pdf = std::exp(-0.5 * xd * xd) / std::sqrt(2.0 * M_PI);
            return S(cdf + xd * pdf);
        });
        return dx.cwiseProduct(dy);
    }

   private:
    Mat<S> x_;
};

template <class S>
class Mlp {
   public:
    Mlp() = default;
    Mlp(std::string name, Eigen::Index dim, Eigen::Index hidden, Rng& rng)
        : fc1_(name + ".fc1", dim, hidden, rng), fc2_(name + ".fc2", hidden, dim, rng) {}

    Mat<S> forward(const Mat<S>& x) { return fc2_.forward(act_.forward(fc1_.forward(x))); }
    Mat<S> backward(const Mat<S>& dy) { return fc1_.backward(act_.backward(fc2_.backward(dy))); }
    void collect(ParamRefs<S>& out) {
        fc1_.collect(out);
        fc2_.collect(out);
    }

   private:
    Linear<S> fc1_, fc2_;
    Gelu<S> act_;
};

// Multi-head self-attention over per-image blocks of `tokens` rows.
template <class S>
class Attention {
   public:
    Attention() = default;
    Attention(std::string name, Eigen::Index dim, int heads, Rng& rng)
        : dim_(dim), heads_(heads), qkv_(name + ".qkv", dim, 3 * dim, rng),
          proj_(name + ".proj", dim, dim, rng) {
        if (dim % heads != 0) throw ValidationError("attention: dim % heads != 0");
    }

    Mat<S> forward(const Mat<S>& x, Eigen::Index batch, Eigen::Index tokens,
                   bool keep_attn = false) {
        batch_ = batch;
        tokens_ = tokens;
        qkv_out_ = qkv_.forward(x);
        const Eigen::Index dh = dim_ / heads_;
        const S scale = S(1.0 / std::sqrt(double(dh)));

        attn_.assign(std::size_t(batch * heads_), Mat<S>());
        Mat<S> heads_out(x.rows(), dim_);
        for (Eigen::Index b = 0; b < batch; ++b) {
            const auto rows = Eigen::seqN(b * tokens, tokens);
            for (int h = 0; h < heads_; ++h) {
                auto q = qkv_out_(rows, Eigen::seqN(h * dh, dh));
                auto k = qkv_out_(rows, Eigen::seqN(dim_ + h * dh, dh));
                auto v = qkv_out_(rows, Eigen::seqN(2 * dim_ + h * dh, dh));
                Mat<S> logits = q * k.transpose() * scale;
                Mat<S>& a = attn_[std::size_t(b * heads_ + h)];
                a = softmax_rows(logits);
                heads_out(rows, Eigen::seqN(h * dh, dh)).noalias() = a * v;
            }
        }
        Mat<S> out = proj_.forward(heads_out);
        if (!keep_attn) last_attn_kept_ = false;
        else last_attn_kept_ = true;
        return out;
    }

    Mat<S> backward(const Mat<S>& dy) {
        const Eigen::Index dh = dim_ / heads_;
        const S scale = S(1.0 / std::sqrt(double(dh)));
        Mat<S> dheads = proj_.backward(dy);
        Mat<S> dqkv = Mat<S>::Zero(dheads.rows(), 3 * dim_);
        for (Eigen::Index b = 0; b < batch_; ++b) {
            const auto rows = Eigen::seqN(b * tokens_, tokens_);
            for (int h = 0; h < heads_; ++h) {
                const Mat<S>& a = attn_[std::size_t(b * heads_ + h)];
                auto q = qkv_out_(rows, Eigen::seqN(h * dh, dh));
                auto k = qkv_out_(rows, Eigen::seqN(dim_ + h * dh, dh));
                auto v = qkv_out_(rows, Eigen::seqN(2 * dim_ + h * dh, dh));
                Mat<S> doh = dheads(rows, Eigen::seqN(h * dh, dh));
                Mat<S> da = doh * v.transpose();
                // softmax backward, row-wise
                Vec<S> dot = (da.array() * a.array()).rowwise().sum().matrix();
                Mat<S> dlogits = a.array() * (da.colwise() - dot).array();
                dqkv(rows, Eigen::seqN(h * dh, dh)).noalias() = dlogits * k * scale;
                dqkv(rows, Eigen::seqN(dim_ + h * dh, dh)).noalias() =
                    dlogits.transpose() * q * scale;
                dqkv(rows, Eigen::seqN(2 * dim_ + h * dh, dh)).noalias() = a.transpose() * doh;
            }
        }
        return qkv_.backward(dqkv);
    }

    void collect(ParamRefs<S>& out) {
        qkv_.collect(out);
        proj_.collect(out);
    }

    int heads() const { return heads_; }
    // Attention matrices from the last forward with keep_attn=true,
    // indexed [b * heads + h].
    const std::vector<Mat<S>>& attention() const {
        if (!last_attn_kept_) throw RuntimeError("attention maps were not kept");
        return attn_;
    }

    static Mat<S> softmax_rows(const Mat<S>& logits) {
        Mat<S> out(logits.rows(), logits.cols());
        for (Eigen::Index i = 0; i < logits.rows(); ++i) {
            Eigen::Array<S, Eigen::Dynamic, 1> row = logits.row(i).transpose().array();
            row -= row.maxCoeff();
            row = row.exp();
            out.row(i) = (row / row.sum()).matrix().transpose();
        }
        return out;
    }

   private:
    Eigen::Index dim_ = 0;
    int heads_ = 0;
    Linear<S> qkv_, proj_;
    Mat<S> qkv_out_;
    std::vector<Mat<S>> attn_;
    Eigen::Index batch_ = 0, tokens_ = 0;
    bool last_attn_kept_ = false;
};

// Pre-norm transformer block: x += attn(ln1(x)); x += mlp(ln2(x)).
template <class S>
class TransformerBlock {
   public:
    TransformerBlock() = default;
    TransformerBlock(std::string name, Eigen::Index dim, int heads, Eigen::Index hidden, Rng& rng)
        : ln1_(name + ".ln1", dim), attn_(name + ".attn", dim, heads, rng),
          ln2_(name + ".ln2", dim), mlp_(name + ".mlp", dim, hidden, rng) {}

    Mat<S> forward(const Mat<S>& x, Eigen::Index batch, Eigen::Index tokens,
                   bool keep_attn = false) {
        Mat<S> y = x + attn_.forward(ln1_.forward(x), batch, tokens, keep_attn);
        return y + mlp_.forward(ln2_.forward(y));
    }
    Mat<S> backward(const Mat<S>& dy) {
        Mat<S> d1 = dy + ln2_.backward(mlp_.backward(dy));
        return d1 + ln1_.backward(attn_.backward(d1));
    }
    void collect(ParamRefs<S>& out) {
        ln1_.collect(out);
        attn_.collect(out);
        ln2_.collect(out);
        mlp_.collect(out);
    }
    Attention<S>& attention() { return attn_; }

   private:
    LayerNorm<S> ln1_;
    Attention<S> attn_;
    LayerNorm<S> ln2_;
    Mlp<S> mlp_;
};

// Token-local block for the early hierarchical stages: x += mlp(ln(x)).
template <class S>
class MlpBlock {
   public:
    MlpBlock() = default;
    MlpBlock(std::string name, Eigen::Index dim, Eigen::Index hidden, Rng& rng)
        : ln_(name + ".ln", dim), mlp_(name + ".mlp", dim, hidden, rng) {}

    Mat<S> forward(const Mat<S>& x) { return x + mlp_.forward(ln_.forward(x)); }
    Mat<S> backward(const Mat<S>& dy) { return dy + ln_.backward(mlp_.backward(dy)); }
    void collect(ParamRefs<S>& out) {
        ln_.collect(out);
        mlp_.collect(out);
    }

   private:
    LayerNorm<S> ln_;
    Mlp<S> mlp_;
};

// Fixed 2-D sine/cosine position table for a G x G grid, one row per unit in
// row-major order. dim must be divisible by 4.
template <class S>
Mat<S> sincos_position_table(Eigen::Index grid, Eigen::Index dim) {
    if (dim % 4 != 0) throw ValidationError("position table dim must be divisible by 4");
    const Eigen::Index half = dim / 2, quarter = dim / 4;
    Mat<S> table(grid * grid, dim);
    for (Eigen::Index r = 0; r < grid; ++r)
        for (Eigen::Index c = 0; c < grid; ++c) {
            const Eigen::Index row = r * grid + c;
            for (Eigen::Index i = 0; i < quarter; ++i) {
                const double omega = 1.0 / std::pow(10000.0, double(i) / double(quarter));
                table(row, 2 * i) = S(std::sin(double(r) * omega));
                table(row, 2 * i + 1) = S(std::cos(double(r) * omega));
                table(row, half + 2 * i) = S(std::sin(double(c) * omega));
                table(row, half + 2 * i + 1) = S(std::cos(double(c) * omega));
            }
        }
    return table;
}

// Decoupled AdamW with cosine learning-rate decay and linear warmup.
template <class S>
class AdamW {
   public:
    struct Settings {
        double beta1 = 0.9;
        double beta2 = 0.95;
        double eps = 1e-8;
        double weight_decay = 0.05;
    };

    AdamW() = default;
    AdamW(ParamRefs<S> params, Settings s) : params_(std::move(params)), s_(s) {
        for (auto* p : params_) {
            m_.push_back(Mat<S>::Zero(p->value.rows(), p->value.cols()));
            v_.push_back(Mat<S>::Zero(p->value.rows(), p->value.cols()));
        }
    }

    void zero_grad() {
        for (auto* p : params_) p->grad.setZero();
    }

    void step(double lr) {
        ++t_;
        const double bc1 = 1.0 - std::pow(s_.beta1, double(t_));
        const double bc2 = 1.0 - std::pow(s_.beta2, double(t_));
        for (std::size_t i = 0; i < params_.size(); ++i) {
            Param<S>& p = *params_[i];
            m_[i] = S(s_.beta1) * m_[i] + S(1.0 - s_.beta1) * p.grad;
            v_[i] = (S(s_.beta2) * v_[i].array() +
                     S(1.0 - s_.beta2) * p.grad.array().square())
                        .matrix();
            Mat<S> mhat = m_[i] / S(bc1);
            Mat<S> vhat = v_[i] / S(bc2);
            if (p.decay && s_.weight_decay > 0.0) p.value *= S(1.0 - lr * s_.weight_decay);
            p.value.array() -= S(lr) * mhat.array() / (vhat.array().sqrt() + S(s_.eps));
        }
    }

    std::int64_t steps_taken() const { return t_; }

    // Moment export/import keyed by parameter name; used for exact resume.
    void export_state(std::map<std::string, Mat<double>>& out) const {
        for (std::size_t i = 0; i < params_.size(); ++i) {
            out["opt.m:" + params_[i]->name] = m_[i].template cast<double>();
            out["opt.v:" + params_[i]->name] = v_[i].template cast<double>();
        }
        Mat<double> t(1, 1);
        t(0, 0) = double(t_);
        out["opt.t"] = t;
    }
    void import_state(const std::map<std::string, Mat<double>>& in) {
        for (std::size_t i = 0; i < params_.size(); ++i) {
            auto m = in.find("opt.m:" + params_[i]->name);
            auto v = in.find("opt.v:" + params_[i]->name);
            if (m == in.end() || v == in.end())
                throw RuntimeError("checkpoint lacks optimizer state for " + params_[i]->name);
            m_[i] = m->second.template cast<S>();
            v_[i] = v->second.template cast<S>();
        }
        auto t = in.find("opt.t");
        if (t == in.end()) throw RuntimeError("checkpoint lacks optimizer step counter");
        t_ = std::int64_t(t->second(0, 0));
    }

   private:
    ParamRefs<S> params_;
    Settings s_;
    std::vector<Mat<S>> m_, v_;
    std::int64_t t_ = 0;
};

// Cosine schedule with linear warmup, indexed by fractional epoch.
inline double cosine_lr(double base_lr, double epoch, double warmup_epochs, double total_epochs,
                        double warmup_start_lr = 0.0, bool constant_warmup = false) {
    if (epoch < warmup_epochs && warmup_epochs > 0.0) {
        if (constant_warmup) return warmup_start_lr;
        return warmup_start_lr + (base_lr - warmup_start_lr) * (epoch / warmup_epochs);
    }
    const double span = std::max(1e-12, total_epochs - warmup_epochs);
    const double tt = std::clamp((epoch - warmup_epochs) / span, 0.0, 1.0);
    return 0.5 * base_lr * (1.0 + std::cos(M_PI * tt));
}

template <class S>
Eigen::Index parameter_count(const ParamRefs<S>& params) {
    Eigen::Index n = 0;
    for (auto* p : params) n += p->count();
    return n;
}

}  // namespace saratrx::nn
