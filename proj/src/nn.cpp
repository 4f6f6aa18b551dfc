#include "flowgnn/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace flowgnn::nn {

namespace {

inline double lrelu(double x, double slope) { return x > 0.0 ? x : slope * x; }
inline double lrelu_grad(double x, double slope) { return x > 0.0 ? 1.0 : slope; }

tensor2 relu_mask_apply(const tensor2& d_out, const tensor2& pre) {
    tensor2 d = d_out;
    for (size_t i = 0; i < d.size(); ++i) {
        if (pre.data[i] <= 0.0) d.data[i] = 0.0;
    }
    return d;
}

}  // namespace

void layer_params::init(size_t in, size_t out, bool with_bias, rng& gen, double scale_mult) {
    weight = tensor2(in, out);
    const double scale = scale_mult * std::sqrt(2.0 / static_cast<double>(in));
    for (auto& w : weight.data) w = gen.normal() * scale;
    bias.assign(with_bias ? out : 0, 0.0);
    grad_weight = tensor2(in, out);
    grad_bias.assign(bias.size(), 0.0);
}

void layer_params::zero_grad() {
    std::fill(grad_weight.data.begin(), grad_weight.data.end(), 0.0);
    std::fill(grad_bias.begin(), grad_bias.end(), 0.0);
}

void attention_params::init(size_t in, size_t out, rng& gen) {
    weight = tensor2(in, out);
    const double wscale = std::sqrt(2.0 / static_cast<double>(in));
    for (auto& w : weight.data) w = gen.normal() * wscale;
    attn.assign(2 * out, 0.0);
    const double ascale = std::sqrt(1.0 / static_cast<double>(out));
    for (auto& a : attn) a = gen.normal() * ascale;
    grad_weight = tensor2(in, out);
    grad_attn.assign(attn.size(), 0.0);
}

void attention_params::zero_grad() {
    std::fill(grad_weight.data.begin(), grad_weight.data.end(), 0.0);
    std::fill(grad_attn.begin(), grad_attn.end(), 0.0);
}

tensor2 linear_forward(const tensor2& x, const layer_params& p, activation act, linear_ctx* ctx) {
    if (x.cols != p.weight.rows) throw std::invalid_argument("linear_forward: shape mismatch");
    tensor2 pre = kernels::matmul(x, p.weight);
    if (!p.bias.empty()) kernels::add_row_inplace(pre, p.bias);
    tensor2 out = pre;
    if (act == activation::relu) kernels::relu_inplace(out);
    if (ctx) {
        ctx->input = x;
        ctx->pre = std::move(pre);
        ctx->act = act;
    }
    return out;
}

tensor2 linear_backward(const tensor2& d_out, layer_params& p, const linear_ctx& ctx) {
    tensor2 d_pre = ctx.act == activation::relu ? relu_mask_apply(d_out, ctx.pre) : d_out;
    tensor2 gw = kernels::matmul_tn(ctx.input, d_pre);
    for (size_t i = 0; i < gw.size(); ++i) p.grad_weight.data[i] += gw.data[i];
    if (!p.bias.empty()) {
        for (size_t r = 0; r < d_pre.rows; ++r) {
            const double* dr = d_pre.row(r);
            for (size_t j = 0; j < d_pre.cols; ++j) p.grad_bias[j] += dr[j];
        }
    }
    return kernels::matmul_nt(d_pre, p.weight);
}

tensor2 gcn_forward(const tensor2& h, const csr_matrix& norm_adj, const layer_params& p, gcn_ctx* ctx) {
    if (h.rows != norm_adj.n || h.cols != p.weight.rows) throw std::invalid_argument("gcn_forward: shape mismatch");
    tensor2 agg = kernels::spmm(norm_adj, h);
    tensor2 pre = kernels::matmul(agg, p.weight);
    tensor2 out = pre;
    kernels::relu_inplace(out);
    if (ctx) {
        ctx->aggregated = std::move(agg);
        ctx->pre = std::move(pre);
    }
    return out;
}

tensor2 gcn_backward(const tensor2& d_out, const csr_matrix& norm_adj, layer_params& p, const gcn_ctx& ctx) {
    tensor2 d_pre = relu_mask_apply(d_out, ctx.pre);
    tensor2 gw = kernels::matmul_tn(ctx.aggregated, d_pre);
    for (size_t i = 0; i < gw.size(); ++i) p.grad_weight.data[i] += gw.data[i];
    tensor2 d_agg = kernels::matmul_nt(d_pre, p.weight);
    // norm_adj is symmetric, so its transpose-product is the same gather
    return kernels::spmm(norm_adj, d_agg);
}

tensor2 gat_forward(const tensor2& h, const attention_graph& g, const attention_params& p, bool add_zeta,
                    gat_ctx* ctx) {
    const size_t n = g.n;
    const size_t k = p.weight.cols;
    if (h.rows != n || h.cols != p.weight.rows) throw std::invalid_argument("gat_forward: shape mismatch");
    if (p.attn.size() != 2 * k) throw std::invalid_argument("gat_forward: attention vector size mismatch");

    tensor2 proj = kernels::matmul(h, p.weight);
    std::vector<double> left(n, 0.0), right(n, 0.0);
    const double* a_left = p.attn.data();
    const double* a_right = p.attn.data() + k;
    const double slope = p.leaky_slope;
#pragma omp parallel for schedule(static) if (n * k > 1 << 14)
    for (long long ii = 0; ii < static_cast<long long>(n); ++ii) {
        size_t i = static_cast<size_t>(ii);
        const double* pr = proj.row(i);
        double l = 0.0, r = 0.0;
        for (size_t c = 0; c < k; ++c) {
            double v = lrelu(pr[c], slope);
            l += a_left[c] * v;
            r += a_right[c] * v;
        }
        left[i] = l;
        right[i] = r;
    }

    std::vector<double> alpha(g.col.size(), 0.0);
    tensor2 pre(n, k);
#pragma omp parallel for schedule(static) if (g.col.size() * k > 1 << 14)
    for (long long ii = 0; ii < static_cast<long long>(n); ++ii) {
        size_t i = static_cast<size_t>(ii);
        const size_t b = g.row_ptr[i], e = g.row_ptr[i + 1];
        double mx = -1e300;
        for (size_t s = b; s < e; ++s) {
            double score = left[i] + right[g.col[s]] + (add_zeta ? g.zeta[s] : 0.0);
            alpha[s] = score;
            if (score > mx) mx = score;
        }
        double denom = 0.0;
        for (size_t s = b; s < e; ++s) {
            alpha[s] = std::exp(alpha[s] - mx);
            denom += alpha[s];
        }
        double* out_row = pre.row(i);
        for (size_t s = b; s < e; ++s) {
            alpha[s] /= denom;
            const double* pj = proj.row(g.col[s]);
            for (size_t c = 0; c < k; ++c) out_row[c] += alpha[s] * pj[c];
        }
    }

    tensor2 out = pre;
    kernels::relu_inplace(out);
    if (ctx) {
        ctx->input = h;
        ctx->proj = std::move(proj);
        ctx->left = std::move(left);
        ctx->right = std::move(right);
        ctx->alpha = std::move(alpha);
        ctx->pre = std::move(pre);
        ctx->used_zeta = add_zeta;
    }
    return out;
}

tensor2 gat_backward(const tensor2& d_out, const attention_graph& g, attention_params& p, const gat_ctx& ctx) {
    const size_t n = g.n;
    const size_t k = p.weight.cols;
    const double slope = p.leaky_slope;
    tensor2 d_pre = relu_mask_apply(d_out, ctx.pre);

    // softmax backward per row; each row owns its slots
    std::vector<double> d_score(g.col.size(), 0.0);
    std::vector<double> d_left(n, 0.0), d_right(n, 0.0);
#pragma omp parallel for schedule(static) if (g.col.size() * k > 1 << 14)
    for (long long ii = 0; ii < static_cast<long long>(n); ++ii) {
        size_t i = static_cast<size_t>(ii);
        const size_t b = g.row_ptr[i], e = g.row_ptr[i + 1];
        const double* dq = d_pre.row(i);
        double inner = 0.0;
        for (size_t s = b; s < e; ++s) {
            const double* pj = ctx.proj.row(g.col[s]);
            double da = 0.0;
            for (size_t c = 0; c < k; ++c) da += dq[c] * pj[c];
            d_score[s] = da;  // reused as d_alpha for the moment
            inner += ctx.alpha[s] * da;
        }
        double dl = 0.0;
        for (size_t s = b; s < e; ++s) {
            d_score[s] = ctx.alpha[s] * (d_score[s] - inner);
            dl += d_score[s];
        }
        d_left[i] = dl;
    }

    // gathers through the mirror slots: row j's entries (j -> i) mirror (i -> j)
#pragma omp parallel for schedule(static) if (g.col.size() > 1 << 14)
    for (long long jj = 0; jj < static_cast<long long>(n); ++jj) {
        size_t j = static_cast<size_t>(jj);
        double dr = 0.0;
        for (size_t s = g.row_ptr[j]; s < g.row_ptr[j + 1]; ++s) dr += d_score[g.reverse_slot[s]];
        d_right[j] = dr;
    }

    tensor2 d_proj(n, k);
#pragma omp parallel for schedule(static) if (g.col.size() * k > 1 << 14)
    for (long long jj = 0; jj < static_cast<long long>(n); ++jj) {
        size_t j = static_cast<size_t>(jj);
        double* dpj = d_proj.row(j);
        for (size_t s = g.row_ptr[j]; s < g.row_ptr[j + 1]; ++s) {
            const double a = ctx.alpha[g.reverse_slot[s]];
            const double* dq = d_pre.row(g.col[s]);
            for (size_t c = 0; c < k; ++c) dpj[c] += a * dq[c];
        }
        const double* pj = ctx.proj.row(j);
        const double* a_left = p.attn.data();
        const double* a_right = p.attn.data() + k;
        for (size_t c = 0; c < k; ++c) {
            dpj[c] += (d_left[j] * a_left[c] + d_right[j] * a_right[c]) * lrelu_grad(pj[c], slope);
        }
    }

    for (size_t i = 0; i < n; ++i) {
        const double* pr = ctx.proj.row(i);
        for (size_t c = 0; c < k; ++c) {
            double v = lrelu(pr[c], slope);
            p.grad_attn[c] += d_left[i] * v;
            p.grad_attn[k + c] += d_right[i] * v;
        }
    }

    tensor2 gw = kernels::matmul_tn(ctx.input, d_proj);
    for (size_t i = 0; i < gw.size(); ++i) p.grad_weight.data[i] += gw.data[i];
    return kernels::matmul_nt(d_proj, p.weight);
}

loss_result cross_entropy_loss(const tensor2& logits, const std::vector<int>& labels) {
    if (logits.rows == 0) throw std::invalid_argument("cross_entropy_loss: empty batch");
    if (logits.cols != 2 || labels.size() != logits.rows)
        throw std::invalid_argument("cross_entropy_loss: shape mismatch");
    const size_t n = logits.rows;
    for (int y : labels) {
        if (y != 0 && y != 1) throw std::invalid_argument("cross_entropy_loss: labels must be 0/1");
    }
    loss_result res;
    res.grad = tensor2(n, 2);
    std::vector<double> row_loss(n);
#pragma omp parallel for schedule(static) if (n > 1 << 14)
    for (long long ii = 0; ii < static_cast<long long>(n); ++ii) {
        size_t i = static_cast<size_t>(ii);
        int y = labels[i];
        const double* l = logits.row(i);
        double mx = std::max(l[0], l[1]);
        double e0 = std::exp(l[0] - mx), e1 = std::exp(l[1] - mx);
        double z = e0 + e1;
        double p0 = e0 / z, p1 = e1 / z;
        row_loss[i] = -std::log(y == 0 ? p0 : p1);
        double* gr = res.grad.row(i);
        gr[0] = (p0 - (y == 0 ? 1.0 : 0.0)) / static_cast<double>(n);
        gr[1] = (p1 - (y == 1 ? 1.0 : 0.0)) / static_cast<double>(n);
    }
    double total = 0.0;
    for (double v : row_loss) total += v;  // serial sum, fixed order
    res.loss = total / static_cast<double>(n);
    if (!std::isfinite(res.loss)) throw std::runtime_error("cross_entropy_loss: non-finite loss");
    return res;
}

void adam_state::init(const std::vector<param_ref>& params) {
    m.clear();
    v.clear();
    for (const auto& p : params) {
        m.emplace_back(p.size, 0.0);
        v.emplace_back(p.size, 0.0);
    }
    step = 0;
}

void adam_step(const std::vector<param_ref>& params, adam_state& state, const adam_hparams& hp) {
    if (state.m.size() != params.size()) throw std::invalid_argument("adam_step: state does not match params");
    ++state.step;
    const double b1c = 1.0 - std::pow(hp.beta1, static_cast<double>(state.step));
    const double b2c = 1.0 - std::pow(hp.beta2, static_cast<double>(state.step));
    for (size_t t = 0; t < params.size(); ++t) {
        const param_ref& p = params[t];
        if (state.m[t].size() != p.size) throw std::invalid_argument("adam_step: moment shape mismatch");
        double* m = state.m[t].data();
        double* v = state.v[t].data();
        for (size_t i = 0; i < p.size; ++i) {
            double g = p.grad[i];
            m[i] = hp.beta1 * m[i] + (1.0 - hp.beta1) * g;
            v[i] = hp.beta2 * v[i] + (1.0 - hp.beta2) * g * g;
            double mhat = m[i] / b1c;
            double vhat = v[i] / b2c;
            double theta = p.value[i];
            p.value[i] = theta - hp.lr * mhat / (std::sqrt(vhat) + hp.eps) - hp.lr * hp.weight_decay * theta;
        }
    }
}

}  // namespace flowgnn::nn
