#pragma once

#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "flowgnn/graph.hpp"
#include "flowgnn/ingest.hpp"
#include "flowgnn/nn.hpp"

namespace flowgnn {

// Model layout and run settings. Sizes chain: input D -> embed_dims...; the
// last embed width feeds both graph branches; the two branch outputs are
// concatenated and fed through score_dims... to 2 logits.
struct model_config {
    std::vector<size_t> embed_dims = {64, 32};
    std::vector<size_t> conv_dims = {32, 32};  // exactly two convolution layers
    size_t attn_dim = 32;
    std::vector<size_t> score_dims = {32, 16};
    bool weighted_adjacency = true;
    bool attention_uses_weights = true;
    double threshold = 0.0;  // alert when score > threshold
    uint64_t seed = 1;
    size_t epochs = 100;
    size_t window = 1024;
    key_mode keying = key_mode::addr;
    double learning_rate = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.98;
    double adam_eps = 1e-8;
    double weight_decay = 1e-6;
    double val_fraction = 0.2;
    size_t patience = 20;
    double leaky_slope = 0.2;

    void validate() const;
    nn::adam_hparams adam() const { return {learning_rate, beta1, beta2, adam_eps, weight_decay}; }
    static model_config from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
    static model_config load(const std::string& path);
};

struct model {
    model_config cfg;
    size_t input_dim = 0;
    std::vector<nn::layer_params> embed;
    nn::layer_params conv1, conv2;  // bias-free
    nn::attention_params attn;
    std::vector<nn::layer_params> score;

    void init(size_t in_dim, const model_config& c);
    std::vector<nn::param_ref> params();  // stable registration order
    void zero_grad();
};

// one window of flows prepared for the model
struct window_graph {
    flow_graph g;
    csr_matrix norm_adj;
    attention_graph attn;
    std::vector<int> labels01;          // empty when unlabeled
    std::vector<uint64_t> provenance;   // global record index per node
};

// chunks `indices` (positions into records/features, dataset order) into
// windows of cfg.window and builds one graph per chunk
std::vector<window_graph> make_windows(const std::vector<flow_record>& records, const tensor2& features,
                                       const std::vector<uint64_t>& indices, const model_config& cfg);

struct forward_ctx;  // opaque cache owned by the training loop

// per-node logits (n x 2)
tensor2 model_logits(model& m, const window_graph& w, forward_ctx* ctx = nullptr);
// maliciousness score per node: logit(malicious) - logit(benign)
std::vector<double> model_scores(model& m, const window_graph& w);

struct scored_flow {
    uint64_t provenance = 0;
    double score = 0.0;
    flow_label decision = flow_label::normal;
    flow_label truth = flow_label::unknown;
};

std::vector<scored_flow> classify_windows(model& m, const std::vector<window_graph>& windows, double threshold);

struct epoch_stats {
    double loss = 0.0;
    double val_f1 = 0.0;
    std::optional<double> val_auc;
};

struct train_result {
    std::vector<epoch_stats> curve;
    size_t epochs_run = 0;
    size_t best_epoch = 0;
    double best_val_f1 = 0.0;
};

// Full-batch step per window graph, Adam updates, early stopping on the
// validation F1 plateau; parameters are restored to the best epoch. Throws
// with learning-rate guidance if the loss leaves the finite range.
train_result train_model(model& m, const std::vector<window_graph>& train_windows,
                         const std::vector<window_graph>& val_windows);

// checkpoint bundles the parameters with the preprocessing state so that
// classification applies the exact training-time feature space
void save_checkpoint(const std::string& path, const model& m, const feature_schema& schema, const scaler& s);

struct checkpoint {
    model net;
    feature_schema schema;
    scaler scale;
};

checkpoint load_checkpoint(const std::string& path);

}  // namespace flowgnn
