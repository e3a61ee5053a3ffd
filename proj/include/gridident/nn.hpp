#pragma once

#include <string>
#include <vector>

#include "gridident/tensor.hpp"
#include "gridident/util.hpp"

namespace gridident {

struct NamedParam {
    std::string name;
    Tensor tensor;
};

int64_t total_parameter_count(const std::vector<NamedParam>& params);
uint64_t parameter_checksum(const std::vector<NamedParam>& params);

enum class Activation { relu, silu, gelu, tanh };

Activation activation_from_string(const std::string& s);
std::string activation_to_string(Activation a);
Tensor apply_activation(Activation a, const Tensor& x);

struct MlpConfig {
    int64_t input_dim = 1;
    int64_t hidden_layers = 0;  // L; 0 means a single affine map
    int64_t hidden_width = 1;   // uniform across hidden layers
    int64_t output_dim = 1;
    Activation activation = Activation::silu;

    void validate() const;
};

// y = W^{L+1} sigma(...sigma(W^1 x + b^1)...) + b^{L+1}, stored row-major as
// x [batch,in] * W [in,out] + b [out].
class Mlp {
  public:
    Mlp() = default;
    Mlp(MlpConfig cfg, Rng& rng);

    Tensor forward(const Tensor& x) const;  // [batch, in] -> [batch, out]

    const MlpConfig& config() const { return cfg_; }
    std::vector<Tensor>& weights() { return weights_; }
    std::vector<Tensor>& biases() { return biases_; }
    void collect_parameters(const std::string& prefix, std::vector<NamedParam>& out) const;
    int64_t parameter_count() const;

  private:
    MlpConfig cfg_;
    std::vector<Tensor> weights_;  // layer l: [in_l, out_l]
    std::vector<Tensor> biases_;   // layer l: [out_l]
};

// out(t,o) = b(o) + sum_i sum_j W(o,j,i) * in(t - d*j, i); indices before the
// start read as zero, so length and causality are preserved.
// seq: [T,I] or [B,T,I]; weight: [O,K,I]; bias: [O].
Tensor causal_conv1d(const Tensor& seq, const Tensor& weight, const Tensor& bias,
                     int64_t dilation);

// seq + relu(conv2(relu(conv1(seq)))), both convs dilated the same; the inner
// conv widens to hidden_channels, the outer returns to the block channel
// count so the skip stays well-defined.
class ResidualBlock {
  public:
    ResidualBlock() = default;
    ResidualBlock(int64_t channels, int64_t hidden_channels, int64_t kernel_size,
                  int64_t dilation, Rng& rng);

    Tensor forward(const Tensor& seq) const;  // [T,C] or [B,T,C]

    int64_t dilation() const { return dilation_; }
    int64_t kernel_size() const { return kernel_; }
    void collect_parameters(const std::string& prefix, std::vector<NamedParam>& out) const;

  private:
    Tensor w1_, b1_;  // [hidden,K,C], [hidden]
    Tensor w2_, b2_;  // [C,K,hidden], [C]
    int64_t dilation_ = 1;
    int64_t kernel_ = 1;
};

// R = 1 + 2 (K_c - 1) (2^B - 1): two convs per block, dilation 2^(b-1).
int64_t receptive_field(int64_t kernel_size, int64_t blocks);
// Smallest B with receptive_field(K_c, B) >= history.
int64_t blocks_for_history(int64_t kernel_size, int64_t history);

struct TcnConfig {
    int64_t in_channels = 1;
    int64_t hidden_channels = 1;
    int64_t out_dim = 1;
    int64_t kernel_size = 2;
    int64_t blocks = 1;

    void validate() const;
};

// B residual blocks with dilation 2^(b-1), then a linear projection of the
// last time instance.
class Tcn {
  public:
    Tcn() = default;
    Tcn(TcnConfig cfg, Rng& rng);

    // [T,I] -> [O]; [B,T,I] -> [B,O]. T must not exceed the receptive field.
    Tensor forward(const Tensor& seq) const;

    const TcnConfig& config() const { return cfg_; }
    int64_t receptive_field() const;
    std::vector<ResidualBlock>& blocks() { return blocks_; }
    Tensor& projection_weight() { return proj_w_; }
    Tensor& projection_bias() { return proj_b_; }
    void collect_parameters(const std::string& prefix, std::vector<NamedParam>& out) const;
    int64_t parameter_count() const;

  private:
    TcnConfig cfg_;
    std::vector<ResidualBlock> blocks_;
    Tensor proj_w_;  // [I, O]
    Tensor proj_b_;  // [O]
};

}  // namespace gridident
