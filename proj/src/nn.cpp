#include "gridident/nn.hpp"

#include <cmath>

namespace gridident {

int64_t total_parameter_count(const std::vector<NamedParam>& params) {
    int64_t n = 0;
    for (const auto& p : params) n += p.tensor.numel();
    return n;
}

uint64_t parameter_checksum(const std::vector<NamedParam>& params) {
    uint64_t h = 0xcbf29ce484222325ull;
    for (const auto& p : params) {
        h = fnv1a(p.name, h);
        h = fnv1a(p.tensor.data().data(), p.tensor.data().size() * sizeof(double), h);
    }
    return h;
}

Activation activation_from_string(const std::string& s) {
    if (s == "relu") return Activation::relu;
    if (s == "silu") return Activation::silu;
    if (s == "gelu") return Activation::gelu;
    if (s == "tanh") return Activation::tanh;
    throw ConfigError("unknown activation '" + s + "'");
}

std::string activation_to_string(Activation a) {
    switch (a) {
        case Activation::relu: return "relu";
        case Activation::silu: return "silu";
        case Activation::gelu: return "gelu";
        case Activation::tanh: return "tanh";
    }
    return "?";
}

Tensor apply_activation(Activation a, const Tensor& x) {
    switch (a) {
        case Activation::relu: return relu(x);
        case Activation::silu: return silu(x);
        case Activation::gelu: return gelu(x);
        case Activation::tanh: return tanh_t(x);
    }
    throw std::logic_error("unreachable");
}

void MlpConfig::validate() const {
    if (input_dim < 1 || output_dim < 1) throw ConfigError("mlp: dims must be >= 1");
    if (hidden_layers < 0) throw ConfigError("mlp: hidden_layers must be >= 0");
    if (hidden_layers > 0 && hidden_width < 1) throw ConfigError("mlp: hidden_width must be >= 1");
}

namespace {

Tensor init_weight(Shape shape, int64_t fan_in, Rng& rng) {
    double bound = std::sqrt(1.0 / static_cast<double>(fan_in));
    Tensor w = Tensor::zeros(std::move(shape), true);
    for (auto& v : w.data()) v = rng.uniform(-bound, bound);
    return w;
}

}  // namespace

Mlp::Mlp(MlpConfig cfg, Rng& rng) : cfg_(cfg) {
    cfg_.validate();
    int64_t in = cfg_.input_dim;
    for (int64_t l = 0; l < cfg_.hidden_layers; ++l) {
        weights_.push_back(init_weight({in, cfg_.hidden_width}, in, rng));
        biases_.push_back(Tensor::zeros({cfg_.hidden_width}, true));
        in = cfg_.hidden_width;
    }
    weights_.push_back(init_weight({in, cfg_.output_dim}, in, rng));
    biases_.push_back(Tensor::zeros({cfg_.output_dim}, true));
}

Tensor Mlp::forward(const Tensor& x) const {
    if (x.rank() != 2 || x.dim(1) != cfg_.input_dim) {
        throw ShapeError(format_str("mlp: expected input [batch,%lld], got %s",
                                    static_cast<long long>(cfg_.input_dim),
                                    shape_str(x.shape()).c_str()));
    }
    Tensor h = x;
    for (int64_t l = 0; l < cfg_.hidden_layers; ++l) {
        h = apply_activation(cfg_.activation, add(matmul(h, weights_[l]), biases_[l]));
    }
    return add(matmul(h, weights_.back()), biases_.back());
}

void Mlp::collect_parameters(const std::string& prefix, std::vector<NamedParam>& out) const {
    for (size_t l = 0; l < weights_.size(); ++l) {
        out.push_back({prefix + ".w" + std::to_string(l), weights_[l]});
        out.push_back({prefix + ".b" + std::to_string(l), biases_[l]});
    }
}

int64_t Mlp::parameter_count() const {
    int64_t n = 0;
    for (const auto& w : weights_) n += w.numel();
    for (const auto& b : biases_) n += b.numel();
    return n;
}

Tensor causal_conv1d(const Tensor& seq, const Tensor& weight, const Tensor& bias,
                     int64_t dilation) {
    if (dilation < 1) throw ShapeError("conv1d: dilation must be >= 1");
    if (weight.rank() != 3) throw ShapeError("conv1d: weight must be [O,K,I]");
    bool batched = seq.rank() == 3;
    if (!batched && seq.rank() != 2) throw ShapeError("conv1d: seq must be [T,I] or [B,T,I]");
    int64_t B = batched ? seq.dim(0) : 1;
    int64_t T = seq.dim(batched ? 1 : 0);
    int64_t I = seq.dim(batched ? 2 : 1);
    int64_t O = weight.dim(0), K = weight.dim(1);
    if (weight.dim(2) != I) {
        throw ShapeError(format_str("conv1d: weight wants %lld input channels, seq has %lld",
                                    static_cast<long long>(weight.dim(2)),
                                    static_cast<long long>(I)));
    }
    if (bias.numel() != O) throw ShapeError("conv1d: bias length must equal output channels");

    bool req = seq.requires_grad() || weight.requires_grad() || bias.requires_grad();
    Shape out_shape = batched ? Shape{B, T, O} : Shape{T, O};
    Tensor out = make_result(out_shape, req);
    const double* X = seq.data().data();
    const double* W = weight.data().data();
    const double* Bv = bias.data().data();
    double* Y = out.data().data();
    for (int64_t b = 0; b < B; ++b) {
        const double* Xb = X + b * T * I;
        double* Yb = Y + b * T * O;
        for (int64_t t = 0; t < T; ++t) {
            double* Yt = Yb + t * O;
            for (int64_t o = 0; o < O; ++o) Yt[o] = Bv[o];
            for (int64_t j = 0; j < K; ++j) {
                int64_t tt = t - dilation * j;
                if (tt < 0) break;
                const double* Xt = Xb + tt * I;
                const double* Wj = W + j * I;  // + o*K*I below
                for (int64_t o = 0; o < O; ++o) {
                    const double* Wo = Wj + o * K * I;
                    double acc = 0.0;
                    for (int64_t i = 0; i < I; ++i) acc += Wo[i] * Xt[i];
                    Yt[o] += acc;
                }
            }
        }
    }
    if (req && Tape::active()) {
        auto xn = seq.node();
        auto wn = weight.node();
        auto bn = bias.node();
        auto on = out.node();
        Tape::active()->record(on, [xn, wn, bn, on, B, T, I, O, K, dilation] {
            if (on->grad.empty()) return;
            const double* G = on->grad.data();
            const double* X = xn->value.data();
            const double* W = wn->value.data();
            bool need_x = xn->requires_grad;
            bool need_w = wn->requires_grad;
            bool need_b = bn->requires_grad;
            if (need_x) xn->ensure_grad();
            if (need_w) wn->ensure_grad();
            if (need_b) bn->ensure_grad();
            double* dX = need_x ? xn->grad.data() : nullptr;
            double* dW = need_w ? wn->grad.data() : nullptr;
            double* dB = need_b ? bn->grad.data() : nullptr;
            for (int64_t b = 0; b < B; ++b) {
                const double* Xb = X + b * T * I;
                const double* Gb = G + b * T * O;
                double* dXb = need_x ? dX + b * T * I : nullptr;
                for (int64_t t = 0; t < T; ++t) {
                    const double* Gt = Gb + t * O;
                    if (need_b) {
                        for (int64_t o = 0; o < O; ++o) dB[o] += Gt[o];
                    }
                    for (int64_t j = 0; j < K; ++j) {
                        int64_t tt = t - dilation * j;
                        if (tt < 0) break;
                        const double* Xt = Xb + tt * I;
                        double* dXt = need_x ? dXb + tt * I : nullptr;
                        for (int64_t o = 0; o < O; ++o) {
                            double g = Gt[o];
                            if (g == 0.0) continue;
                            const double* Wo = W + (o * K + j) * I;
                            if (need_x) {
                                for (int64_t i = 0; i < I; ++i) dXt[i] += g * Wo[i];
                            }
                            if (need_w) {
                                double* dWo = dW + (o * K + j) * I;
                                for (int64_t i = 0; i < I; ++i) dWo[i] += g * Xt[i];
                            }
                        }
                    }
                }
            }
        });
    }
    return out;
}

ResidualBlock::ResidualBlock(int64_t channels, int64_t hidden_channels, int64_t kernel_size,
                             int64_t dilation, Rng& rng)
    : dilation_(dilation), kernel_(kernel_size) {
    if (channels < 1 || hidden_channels < 1 || kernel_size < 1 || dilation < 1)
        throw ConfigError("residual block: all dims must be >= 1");
    w1_ = init_weight({hidden_channels, kernel_size, channels}, kernel_size * channels, rng);
    b1_ = Tensor::zeros({hidden_channels}, true);
    w2_ = init_weight({channels, kernel_size, hidden_channels}, kernel_size * hidden_channels,
                      rng);
    b2_ = Tensor::zeros({channels}, true);
}

Tensor ResidualBlock::forward(const Tensor& seq) const {
    int64_t c = seq.dim(seq.rank() - 1);
    if (c != w1_.dim(2)) {
        throw ShapeError(format_str("residual block: expected %lld channels, got %lld",
                                    static_cast<long long>(w1_.dim(2)),
                                    static_cast<long long>(c)));
    }
    Tensor h = relu(causal_conv1d(seq, w1_, b1_, dilation_));
    h = relu(causal_conv1d(h, w2_, b2_, dilation_));
    return add(seq, h);
}

void ResidualBlock::collect_parameters(const std::string& prefix,
                                       std::vector<NamedParam>& out) const {
    out.push_back({prefix + ".conv1.w", w1_});
    out.push_back({prefix + ".conv1.b", b1_});
    out.push_back({prefix + ".conv2.w", w2_});
    out.push_back({prefix + ".conv2.b", b2_});
}

int64_t receptive_field(int64_t kernel_size, int64_t blocks) {
    if (kernel_size < 1 || blocks < 1)
        throw ConfigError("receptive_field: kernel_size and blocks must be >= 1");
    // two convs per block, each reaching (K-1)*2^(b-1) steps back
    return 1 + 2 * (kernel_size - 1) * ((int64_t{1} << blocks) - 1);
}

int64_t blocks_for_history(int64_t kernel_size, int64_t history) {
    if (history < 1) throw ConfigError("blocks_for_history: history must be >= 1");
    if (kernel_size < 2 && history > 1)
        throw ConfigError("blocks_for_history: kernel_size 1 cannot cover history > 1");
    int64_t b = 1;
    while (receptive_field(kernel_size, b) < history) {
        ++b;
        if (b > 62) throw ConfigError("blocks_for_history: history too large");
    }
    return b;
}

void TcnConfig::validate() const {
    if (in_channels < 1 || hidden_channels < 1 || out_dim < 1)
        throw ConfigError("tcn: dims must be >= 1");
    if (kernel_size < 2) throw ConfigError("tcn: kernel_size must be >= 2");
    if (blocks < 1) throw ConfigError("tcn: blocks must be >= 1");
}

Tcn::Tcn(TcnConfig cfg, Rng& rng) : cfg_(cfg) {
    cfg_.validate();
    for (int64_t b = 0; b < cfg_.blocks; ++b) {
        blocks_.emplace_back(cfg_.in_channels, cfg_.hidden_channels, cfg_.kernel_size,
                             int64_t{1} << b, rng);
    }
    proj_w_ = init_weight({cfg_.in_channels, cfg_.out_dim}, cfg_.in_channels, rng);
    proj_b_ = Tensor::zeros({cfg_.out_dim}, true);
}

int64_t Tcn::receptive_field() const {
    return gridident::receptive_field(cfg_.kernel_size, cfg_.blocks);
}

Tensor Tcn::forward(const Tensor& seq) const {
    bool batched = seq.rank() == 3;
    if (!batched && seq.rank() != 2) throw ShapeError("tcn: seq must be [T,I] or [B,T,I]");
    int64_t t_len = seq.dim(batched ? 1 : 0);
    int64_t r = receptive_field();
    if (t_len > r) {
        throw ShapeError(format_str(
            "tcn: sequence length %lld exceeds receptive field %lld (kernel %lld, blocks %lld)",
            static_cast<long long>(t_len), static_cast<long long>(r),
            static_cast<long long>(cfg_.kernel_size), static_cast<long long>(cfg_.blocks)));
    }
    Tensor h = seq;
    for (const auto& blk : blocks_) h = blk.forward(h);
    size_t time_axis = batched ? 1 : 0;
    Tensor last = slice(h, time_axis, t_len - 1, t_len);
    int64_t batch = batched ? seq.dim(0) : 1;
    last = reshape(last, {batch, cfg_.in_channels});
    Tensor out = add(matmul(last, proj_w_), proj_b_);
    if (!batched) out = reshape(out, {cfg_.out_dim});
    return out;
}

void Tcn::collect_parameters(const std::string& prefix, std::vector<NamedParam>& out) const {
    for (size_t b = 0; b < blocks_.size(); ++b)
        blocks_[b].collect_parameters(prefix + ".block" + std::to_string(b), out);
    out.push_back({prefix + ".proj.w", proj_w_});
    out.push_back({prefix + ".proj.b", proj_b_});
}

int64_t Tcn::parameter_count() const {
    std::vector<NamedParam> ps;
    collect_parameters("h", ps);
    return total_parameter_count(ps);
}

}  // namespace gridident
