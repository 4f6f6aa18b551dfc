#include "flowgnn/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "flowgnn/eval.hpp"

namespace flowgnn {

using nlohmann::json;

void model_config::validate() const {
    if (embed_dims.empty()) throw std::invalid_argument("config: embed_dims must not be empty");
    if (conv_dims.size() != 2) throw std::invalid_argument("config: exactly two convolution layers expected");
    for (size_t d : embed_dims)
        if (d == 0) throw std::invalid_argument("config: zero embed width");
    for (size_t d : conv_dims)
        if (d == 0) throw std::invalid_argument("config: zero convolution width");
    for (size_t d : score_dims)
        if (d == 0) throw std::invalid_argument("config: zero scorer width");
    if (attn_dim == 0) throw std::invalid_argument("config: zero attention width");
    if (window == 0) throw std::invalid_argument("config: window must be >= 1");
    if (epochs == 0) throw std::invalid_argument("config: epochs must be >= 1");
    if (val_fraction < 0.0 || val_fraction >= 1.0) throw std::invalid_argument("config: val_fraction in [0, 1)");
    if (learning_rate <= 0.0) throw std::invalid_argument("config: learning_rate must be positive");
}

model_config model_config::from_json(const json& j) {
    model_config c;
    auto opt = [&](const char* key, auto& field) {
        if (j.contains(key)) field = j.at(key).template get<std::decay_t<decltype(field)>>();
    };
    opt("embed_dims", c.embed_dims);
    opt("conv_dims", c.conv_dims);
    opt("attn_dim", c.attn_dim);
    opt("score_dims", c.score_dims);
    opt("weighted_adjacency", c.weighted_adjacency);
    opt("attention_uses_weights", c.attention_uses_weights);
    opt("threshold", c.threshold);
    opt("seed", c.seed);
    opt("epochs", c.epochs);
    opt("window", c.window);
    opt("learning_rate", c.learning_rate);
    opt("beta1", c.beta1);
    opt("beta2", c.beta2);
    opt("adam_eps", c.adam_eps);
    opt("weight_decay", c.weight_decay);
    opt("val_fraction", c.val_fraction);
    opt("patience", c.patience);
    opt("leaky_slope", c.leaky_slope);
    if (j.contains("key_mode")) {
        std::string k = j.at("key_mode").get<std::string>();
        if (k == "addr") c.keying = key_mode::addr;
        else if (k == "addr+port") c.keying = key_mode::addr_port;
        else throw std::invalid_argument("config: key_mode must be 'addr' or 'addr+port'");
    }
    c.validate();
    return c;
}

json model_config::to_json() const {
    return json{{"embed_dims", embed_dims},
                {"conv_dims", conv_dims},
                {"attn_dim", attn_dim},
                {"score_dims", score_dims},
                {"weighted_adjacency", weighted_adjacency},
                {"attention_uses_weights", attention_uses_weights},
                {"threshold", threshold},
                {"seed", seed},
                {"epochs", epochs},
                {"window", window},
                {"key_mode", keying == key_mode::addr ? "addr" : "addr+port"},
                {"learning_rate", learning_rate},
                {"beta1", beta1},
                {"beta2", beta2},
                {"adam_eps", adam_eps},
                {"weight_decay", weight_decay},
                {"val_fraction", val_fraction},
                {"patience", patience},
                {"leaky_slope", leaky_slope}};
}

model_config model_config::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    json j;
    in >> j;
    return from_json(j);
}

void model::init(size_t in_dim, const model_config& c) {
    c.validate();
    cfg = c;
    input_dim = in_dim;
    rng gen(c.seed, "model-init");

    embed.clear();
    size_t d = in_dim;
    for (size_t width : c.embed_dims) {
        embed.emplace_back();
        embed.back().init(d, width, true, gen);
        d = width;
    }
    conv1.init(d, c.conv_dims[0], false, gen);
    conv2.init(c.conv_dims[0], c.conv_dims[1], false, gen);
    attn.init(d, c.attn_dim, gen);
    attn.leaky_slope = c.leaky_slope;

    score.clear();
    size_t sd = c.conv_dims[1] + c.attn_dim;
    for (size_t width : c.score_dims) {
        score.emplace_back();
        score.back().init(sd, width, true, gen);
        sd = width;
    }
    score.emplace_back();
    // small output head keeps initial logits near zero
    score.back().init(sd, 2, true, gen, 0.01);
}

std::vector<nn::param_ref> model::params() {
    std::vector<nn::param_ref> out;
    auto add_layer = [&](const std::string& name, nn::layer_params& p) {
        out.push_back({name + ".w", p.weight.data.data(), p.grad_weight.data.data(), p.weight.size()});
        if (!p.bias.empty()) out.push_back({name + ".b", p.bias.data(), p.grad_bias.data(), p.bias.size()});
    };
    for (size_t i = 0; i < embed.size(); ++i) add_layer("embed" + std::to_string(i + 1), embed[i]);
    add_layer("conv1", conv1);
    add_layer("conv2", conv2);
    out.push_back({"attn.w", attn.weight.data.data(), attn.grad_weight.data.data(), attn.weight.size()});
    out.push_back({"attn.a", attn.attn.data(), attn.grad_attn.data(), attn.attn.size()});
    for (size_t i = 0; i < score.size(); ++i) add_layer("score" + std::to_string(i + 1), score[i]);
    return out;
}

void model::zero_grad() {
    for (auto& l : embed) l.zero_grad();
    conv1.zero_grad();
    conv2.zero_grad();
    attn.zero_grad();
    for (auto& l : score) l.zero_grad();
}

std::vector<window_graph> make_windows(const std::vector<flow_record>& records, const tensor2& features,
                                       const std::vector<uint64_t>& indices, const model_config& cfg) {
    if (features.rows != records.size())
        throw std::invalid_argument("make_windows: features do not match records");
    std::vector<window_graph> out;
    for (size_t start = 0; start < indices.size(); start += cfg.window) {
        const size_t end = std::min(indices.size(), start + cfg.window);
        std::vector<flow_record> chunk;
        chunk.reserve(end - start);
        tensor2 feats(end - start, features.cols);
        for (size_t k = start; k < end; ++k) {
            chunk.push_back(records[indices[k]]);
            std::memcpy(feats.row(k - start), features.row(indices[k]), features.cols * sizeof(double));
        }
        window_graph w;
        w.g = build_flow_graph(chunk, feats, cfg.keying);
        w.norm_adj = normalized_adjacency(w.g, cfg.weighted_adjacency);
        w.attn = make_attention_graph(w.g);
        w.provenance.assign(indices.begin() + static_cast<ptrdiff_t>(start),
                            indices.begin() + static_cast<ptrdiff_t>(end));
        bool labeled = true;
        for (const auto& r : chunk) {
            if (r.label == flow_label::unknown) {
                labeled = false;
                break;
            }
        }
        if (labeled) {
            w.labels01.reserve(chunk.size());
            for (const auto& r : chunk) w.labels01.push_back(r.label == flow_label::malicious ? 1 : 0);
        }
        out.push_back(std::move(w));
    }
    return out;
}

struct forward_ctx {
    std::vector<nn::linear_ctx> embed;
    nn::gcn_ctx conv1, conv2;
    nn::gat_ctx attn;
    std::vector<nn::linear_ctx> score;
};

namespace {

tensor2 concat_cols(const tensor2& a, const tensor2& b) {
    tensor2 out(a.rows, a.cols + b.cols);
    for (size_t i = 0; i < a.rows; ++i) {
        std::memcpy(out.row(i), a.row(i), a.cols * sizeof(double));
        std::memcpy(out.row(i) + a.cols, b.row(i), b.cols * sizeof(double));
    }
    return out;
}

void split_cols(const tensor2& d, size_t left_cols, tensor2& dl, tensor2& dr) {
    dl = tensor2(d.rows, left_cols);
    dr = tensor2(d.rows, d.cols - left_cols);
    for (size_t i = 0; i < d.rows; ++i) {
        std::memcpy(dl.row(i), d.row(i), left_cols * sizeof(double));
        std::memcpy(dr.row(i), d.row(i) + left_cols, (d.cols - left_cols) * sizeof(double));
    }
}

}  // namespace

tensor2 model_logits(model& m, const window_graph& w, forward_ctx* ctx) {
    if (w.g.node_features.cols != m.input_dim)
        throw std::invalid_argument("model_logits: feature width does not match model input");
    forward_ctx local;
    forward_ctx* c = ctx ? ctx : &local;
    c->embed.resize(m.embed.size());
    c->score.resize(m.score.size());

    tensor2 z = w.g.node_features;
    for (size_t i = 0; i < m.embed.size(); ++i) {
        z = nn::linear_forward(z, m.embed[i], nn::activation::relu, ctx ? &c->embed[i] : nullptr);
    }
    tensor2 conv_out = nn::gcn_forward(z, w.norm_adj, m.conv1, ctx ? &c->conv1 : nullptr);
    conv_out = nn::gcn_forward(conv_out, w.norm_adj, m.conv2, ctx ? &c->conv2 : nullptr);
    tensor2 attn_out =
        nn::gat_forward(z, w.attn, m.attn, m.cfg.attention_uses_weights, ctx ? &c->attn : nullptr);

    tensor2 h = concat_cols(conv_out, attn_out);
    for (size_t i = 0; i < m.score.size(); ++i) {
        nn::activation act = i + 1 < m.score.size() ? nn::activation::relu : nn::activation::none;
        h = nn::linear_forward(h, m.score[i], act, ctx ? &c->score[i] : nullptr);
    }
    check_finite(h, "model logits");
    return h;
}

namespace {

void model_backward(model& m, const window_graph& w, const tensor2& d_logits, forward_ctx& ctx) {
    tensor2 d = d_logits;
    for (size_t i = m.score.size(); i-- > 0;) {
        d = nn::linear_backward(d, m.score[i], ctx.score[i]);
    }
    tensor2 d_conv, d_attn;
    split_cols(d, m.cfg.conv_dims[1], d_conv, d_attn);
    tensor2 d_z = nn::gcn_backward(d_conv, w.norm_adj, m.conv2, ctx.conv2);
    d_z = nn::gcn_backward(d_z, w.norm_adj, m.conv1, ctx.conv1);
    tensor2 d_z2 = nn::gat_backward(d_attn, w.attn, m.attn, ctx.attn);
    for (size_t i = 0; i < d_z.size(); ++i) d_z.data[i] += d_z2.data[i];
    for (size_t i = m.embed.size(); i-- > 0;) {
        d_z = nn::linear_backward(d_z, m.embed[i], ctx.embed[i]);
    }
}

}  // namespace

std::vector<double> model_scores(model& m, const window_graph& w) {
    tensor2 logits = model_logits(m, w);
    std::vector<double> s(logits.rows);
    for (size_t i = 0; i < logits.rows; ++i) s[i] = logits.at(i, 1) - logits.at(i, 0);
    return s;
}

std::vector<scored_flow> classify_windows(model& m, const std::vector<window_graph>& windows, double threshold) {
    std::vector<scored_flow> out;
    for (const auto& w : windows) {
        auto scores = model_scores(m, w);
        for (size_t i = 0; i < scores.size(); ++i) {
            scored_flow sf;
            sf.provenance = w.provenance[i];
            sf.score = scores[i];
            sf.decision = scores[i] > threshold ? flow_label::malicious : flow_label::normal;
            if (!w.g.node_labels.empty()) sf.truth = w.g.node_labels[i];
            out.push_back(sf);
        }
    }
    std::sort(out.begin(), out.end(),
              [](const scored_flow& a, const scored_flow& b) { return a.provenance < b.provenance; });
    return out;
}

train_result train_model(model& m, const std::vector<window_graph>& train_windows,
                         const std::vector<window_graph>& val_windows) {
    if (train_windows.empty()) throw std::invalid_argument("train: no training windows");
    for (const auto& w : train_windows) {
        if (w.labels01.empty()) throw std::invalid_argument("train: training windows must be labeled");
    }
    const std::vector<window_graph>& vals = val_windows.empty() ? train_windows : val_windows;

    auto params = m.params();
    nn::adam_state opt;
    opt.init(params);
    const nn::adam_hparams hp = m.cfg.adam();

    train_result res;
    std::vector<std::vector<double>> best_params;
    // plateau detection is lexicographic: a run still lowering its training
    // loss has not plateaued even while the thresholded F1 sits flat
    double best_f1 = -1.0, best_auc = -1.0, best_loss = 1e300;
    size_t best_epoch = 0;
    size_t since_best = 0;

    for (size_t epoch = 0; epoch < m.cfg.epochs; ++epoch) {
        double loss_sum = 0.0;
        for (const auto& w : train_windows) {
            m.zero_grad();
            forward_ctx ctx;
            tensor2 logits = model_logits(m, w, &ctx);
            auto lr = nn::cross_entropy_loss(logits, w.labels01);
            if (!std::isfinite(lr.loss)) {
                throw std::runtime_error("train: loss diverged (NaN/Inf); try a lower learning rate");
            }
            loss_sum += lr.loss;
            model_backward(m, w, lr.grad, ctx);
            nn::adam_step(params, opt, hp);
        }

        auto scored = classify_windows(m, vals, m.cfg.threshold);
        eval_report rep = compute_metrics(scored);

        epoch_stats es;
        es.loss = loss_sum / static_cast<double>(train_windows.size());
        es.val_f1 = rep.f1;
        es.val_auc = rep.auc;
        res.curve.push_back(es);

        const double auc = rep.auc.value_or(0.0);
        const bool f1_up = rep.f1 > best_f1 + 1e-4;
        const bool f1_tied = rep.f1 > best_f1 - 1e-4;
        const bool auc_up = auc > best_auc + 1e-4;
        const bool auc_tied = auc > best_auc - 1e-4;
        const bool loss_down = es.loss < best_loss - 1e-5;
        if (f1_up || (f1_tied && auc_up) || (f1_tied && auc_tied && loss_down)) {
            best_f1 = std::max(best_f1, rep.f1);
            best_auc = std::max(best_auc, auc);
            best_loss = std::min(best_loss, es.loss);
            best_epoch = epoch;
            since_best = 0;
            best_params.clear();
            for (const auto& p : params) best_params.emplace_back(p.value, p.value + p.size);
        } else {
            ++since_best;
        }
        if (since_best >= m.cfg.patience) break;
    }

    if (!best_params.empty()) {
        for (size_t t = 0; t < params.size(); ++t) {
            std::copy(best_params[t].begin(), best_params[t].end(), params[t].value);
        }
    }
    res.epochs_run = res.curve.size();
    res.best_epoch = best_epoch;
    res.best_val_f1 = best_f1 < 0 ? 0.0 : best_f1;
    return res;
}

// ---- checkpoint io ----

namespace {

constexpr char kCkptMagic[4] = {'F', 'G', 'C', 'K'};
constexpr uint32_t kCkptVersion = 1;

void put_str(std::ostream& os, const std::string& s) {
    uint64_t n = s.size();
    os.write(reinterpret_cast<const char*>(&n), 8);
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_str(std::istream& is) {
    uint64_t n = 0;
    if (!is.read(reinterpret_cast<char*>(&n), 8)) throw std::runtime_error("checkpoint: truncated");
    if (n > (1ull << 32)) throw std::runtime_error("checkpoint: implausible string length");
    std::string s(n, '\0');
    if (!is.read(s.data(), static_cast<std::streamsize>(n))) throw std::runtime_error("checkpoint: truncated");
    return s;
}

struct named_tensor {
    std::string name;
    uint64_t rows = 0, cols = 0;
    const double* data = nullptr;
};

}  // namespace

void save_checkpoint(const std::string& path, const model& m, const feature_schema& schema, const scaler& s) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open checkpoint output: " + path);
    os.write(kCkptMagic, 4);
    os.write(reinterpret_cast<const char*>(&kCkptVersion), 4);

    json meta;
    meta["config"] = m.cfg.to_json();
    meta["input_dim"] = m.input_dim;
    meta["schema"] = schema.to_json();
    meta["scaler"] = {{"mean", s.mean}, {"stddev", s.stddev}};
    put_str(os, meta.dump());

    std::vector<named_tensor> tensors;
    auto add_layer = [&](const std::string& name, const nn::layer_params& p) {
        tensors.push_back({name + ".w", p.weight.rows, p.weight.cols, p.weight.data.data()});
        if (!p.bias.empty()) tensors.push_back({name + ".b", 1, p.bias.size(), p.bias.data()});
    };
    for (size_t i = 0; i < m.embed.size(); ++i) add_layer("embed" + std::to_string(i + 1), m.embed[i]);
    add_layer("conv1", m.conv1);
    add_layer("conv2", m.conv2);
    tensors.push_back({"attn.w", m.attn.weight.rows, m.attn.weight.cols, m.attn.weight.data.data()});
    tensors.push_back({"attn.a", 1, m.attn.attn.size(), m.attn.attn.data()});
    for (size_t i = 0; i < m.score.size(); ++i) add_layer("score" + std::to_string(i + 1), m.score[i]);

    uint32_t count = static_cast<uint32_t>(tensors.size());
    os.write(reinterpret_cast<const char*>(&count), 4);
    for (const auto& t : tensors) {
        put_str(os, t.name);
        os.write(reinterpret_cast<const char*>(&t.rows), 8);
        os.write(reinterpret_cast<const char*>(&t.cols), 8);
        os.write(reinterpret_cast<const char*>(t.data),
                 static_cast<std::streamsize>(t.rows * t.cols * sizeof(double)));
    }
    if (!os) throw std::runtime_error("failed writing checkpoint: " + path);
}

checkpoint load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open checkpoint: " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kCkptMagic, 4) != 0) throw std::runtime_error("not a checkpoint: " + path);
    uint32_t ver;
    is.read(reinterpret_cast<char*>(&ver), 4);
    if (ver != kCkptVersion) throw std::runtime_error("unsupported checkpoint version");

    json meta = json::parse(get_str(is));
    checkpoint ck;
    model_config cfg = model_config::from_json(meta.at("config"));
    size_t input_dim = meta.at("input_dim").get<size_t>();
    ck.net.init(input_dim, cfg);
    ck.schema = feature_schema::from_json(meta.at("schema"));
    ck.scale.mean = meta.at("scaler").at("mean").get<std::vector<double>>();
    ck.scale.stddev = meta.at("scaler").at("stddev").get<std::vector<double>>();

    uint32_t count = 0;
    is.read(reinterpret_cast<char*>(&count), 4);

    auto fill = [&](const std::string& name, double* dst, uint64_t rows, uint64_t cols, const std::string& got,
                    uint64_t grows, uint64_t gcols) {
        if (name != got || rows != grows || cols != gcols)
            throw std::runtime_error("checkpoint: tensor '" + got + "' does not match config shape for '" +
                                     name + "'");
        if (!is.read(reinterpret_cast<char*>(dst), static_cast<std::streamsize>(rows * cols * sizeof(double))))
            throw std::runtime_error("checkpoint: truncated tensor data");
    };

    std::vector<std::pair<std::string, std::pair<double*, std::pair<uint64_t, uint64_t>>>> expect;
    auto add_layer = [&](const std::string& name, nn::layer_params& p) {
        expect.push_back({name + ".w", {p.weight.data.data(), {p.weight.rows, p.weight.cols}}});
        if (!p.bias.empty()) expect.push_back({name + ".b", {p.bias.data(), {1, p.bias.size()}}});
    };
    for (size_t i = 0; i < ck.net.embed.size(); ++i) add_layer("embed" + std::to_string(i + 1), ck.net.embed[i]);
    add_layer("conv1", ck.net.conv1);
    add_layer("conv2", ck.net.conv2);
    expect.push_back({"attn.w", {ck.net.attn.weight.data.data(), {ck.net.attn.weight.rows, ck.net.attn.weight.cols}}});
    expect.push_back({"attn.a", {ck.net.attn.attn.data(), {1, ck.net.attn.attn.size()}}});
    for (size_t i = 0; i < ck.net.score.size(); ++i) add_layer("score" + std::to_string(i + 1), ck.net.score[i]);

    if (count != expect.size()) throw std::runtime_error("checkpoint: tensor count does not match config");
    for (const auto& [name, slot] : expect) {
        std::string got = get_str(is);
        uint64_t rows, cols;
        is.read(reinterpret_cast<char*>(&rows), 8);
        is.read(reinterpret_cast<char*>(&cols), 8);
        fill(name, slot.first, slot.second.first, slot.second.second, got, rows, cols);
    }
    return ck;
}

}  // namespace flowgnn
