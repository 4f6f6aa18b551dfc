#pragma once

#include <string>
#include <vector>

#include "flowgnn/graph.hpp"
#include "flowgnn/kernels.hpp"
#include "flowgnn/rng.hpp"
#include "flowgnn/tensor.hpp"

namespace flowgnn::nn {

enum class activation { none, relu };

struct layer_params {
    tensor2 weight;  // in x out
    std::vector<double> bias;  // empty for bias-free layers
    tensor2 grad_weight;
    std::vector<double> grad_bias;

    void init(size_t in, size_t out, bool with_bias, rng& gen, double scale_mult = 1.0);
    void zero_grad();
};

// single-head attention: shared projection plus a learned vector over the
// concatenated projected pair, nonlinearity applied before the vector
struct attention_params {
    tensor2 weight;             // in x out
    std::vector<double> attn;   // 2 * out: [left half | right half]
    double leaky_slope = 0.2;
    tensor2 grad_weight;
    std::vector<double> grad_attn;

    void init(size_t in, size_t out, rng& gen);
    void zero_grad();
};

struct linear_ctx {
    tensor2 input;
    tensor2 pre;  // pre-activation, kept only for relu
    activation act = activation::none;
};

tensor2 linear_forward(const tensor2& x, const layer_params& p, activation act, linear_ctx* ctx = nullptr);
// accumulates into p.grad_*; returns gradient wrt the input
tensor2 linear_backward(const tensor2& d_out, layer_params& p, const linear_ctx& ctx);

struct gcn_ctx {
    tensor2 aggregated;  // norm_adj * h
    tensor2 pre;
};

// relu(norm_adj * h * W), bias-free
tensor2 gcn_forward(const tensor2& h, const csr_matrix& norm_adj, const layer_params& p, gcn_ctx* ctx = nullptr);
tensor2 gcn_backward(const tensor2& d_out, const csr_matrix& norm_adj, layer_params& p, const gcn_ctx& ctx);

struct gat_ctx {
    tensor2 input;
    tensor2 proj;               // h * W
    std::vector<double> left;   // per node, attention vector's left half applied
    std::vector<double> right;  // per node, right half
    std::vector<double> alpha;  // per adjacency slot
    tensor2 pre;
    bool used_zeta = false;
};

// Per node i over neighbors-and-self: score(i,j) = a_left . lrelu(W h_i) +
// a_right . lrelu(W h_j) (+ the edge similarity when add_zeta), softmax with
// max subtraction, then relu of the alpha-weighted sum of projected neighbors.
tensor2 gat_forward(const tensor2& h, const attention_graph& g, const attention_params& p, bool add_zeta,
                    gat_ctx* ctx = nullptr);
tensor2 gat_backward(const tensor2& d_out, const attention_graph& g, attention_params& p, const gat_ctx& ctx);

struct loss_result {
    double loss = 0.0;
    tensor2 grad;  // d loss / d logits
};

// mean negative log-softmax of the true class over n x 2 logits; labels in {0, 1}
loss_result cross_entropy_loss(const tensor2& logits, const std::vector<int>& labels);

struct adam_hparams {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.98;
    double eps = 1e-8;
    double weight_decay = 1e-6;  // decoupled
};

// one trainable tensor, registered by the model in a stable order
struct param_ref {
    std::string name;
    double* value = nullptr;
    double* grad = nullptr;
    size_t size = 0;
};

struct adam_state {
    std::vector<std::vector<double>> m, v;
    long step = 0;

    void init(const std::vector<param_ref>& params);
};

void adam_step(const std::vector<param_ref>& params, adam_state& state, const adam_hparams& hp);

}  // namespace flowgnn::nn
