#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "flowgnn/nn.hpp"
#include "gradcheck.hpp"

using namespace flowgnn;

namespace {

// independent triple-loop product used as the matmul oracle
tensor2 naive_matmul(const tensor2& a, const tensor2& b) {
    tensor2 c(a.rows, b.cols);
    for (size_t i = 0; i < a.rows; ++i)
        for (size_t j = 0; j < b.cols; ++j) {
            double s = 0.0;
            for (size_t k = 0; k < a.cols; ++k) s += a.at(i, k) * b.at(k, j);
            c.at(i, j) = s;
        }
    return c;
}

}  // namespace

TEST_CASE("linear layer basic contracts") {
    // identity weights, zero bias, relu clamps a negative input
    nn::layer_params p;
    rng gen(1);
    p.init(2, 2, true, gen);
    p.weight.data = {1, 0, 0, 1};
    p.bias = {0, 0};
    tensor2 x(1, 2);
    x.data = {-1, 2};
    tensor2 y = nn::linear_forward(x, p, nn::activation::relu);
    CHECK(y.data == std::vector<double>{0, 2});

    // zero weights and constant bias pass the bias through
    p.weight.data = {0, 0, 0, 0};
    p.bias = {3, 3};
    tensor2 x2(4, 2, 1.5);
    tensor2 y2 = nn::linear_forward(x2, p, nn::activation::none);
    for (size_t i = 0; i < y2.size(); ++i) CHECK(y2.data[i] == 3.0);

    CHECK_THROWS_AS(nn::linear_forward(tensor2(2, 3), p, nn::activation::none), std::invalid_argument);
}

TEST_CASE("linear layer matches the naive product oracle") {
    rng gen(7);
    tensor2 x = gradcheck::random_tensor(3, 4, gen);
    nn::layer_params p;
    p.init(4, 2, false, gen);
    tensor2 got = nn::linear_forward(x, p, nn::activation::none);
    tensor2 want = naive_matmul(x, p.weight);
    for (size_t i = 0; i < got.size(); ++i) CHECK(got.data[i] == doctest::Approx(want.data[i]).epsilon(1e-12));
}

TEST_CASE("gcn reduces to a linear map on a single node") {
    rng gen(3);
    nn::layer_params p;
    p.init(3, 2, false, gen);
    csr_matrix adj;
    adj.n = 1;
    adj.row_ptr = {0, 1};
    adj.col = {0};
    adj.val = {1.0};
    tensor2 h = gradcheck::random_tensor(1, 3, gen);
    tensor2 got = nn::gcn_forward(h, adj, p);
    tensor2 lin = naive_matmul(h, p.weight);
    for (size_t i = 0; i < got.size(); ++i) CHECK(got.data[i] == doctest::Approx(std::max(0.0, lin.data[i])));
}

TEST_CASE("gcn two-node hand case") {
    // norm_adj all 0.5, identity W, h = ((2,0),(0,2)) -> both rows (1,1)
    csr_matrix adj;
    adj.n = 2;
    adj.row_ptr = {0, 2, 4};
    adj.col = {0, 1, 0, 1};
    adj.val = {0.5, 0.5, 0.5, 0.5};
    nn::layer_params p;
    rng gen(4);
    p.init(2, 2, false, gen);
    p.weight.data = {1, 0, 0, 1};
    tensor2 h(2, 2);
    h.data = {2, 0, 0, 2};
    tensor2 y = nn::gcn_forward(h, adj, p);
    CHECK(y.data == std::vector<double>{1, 1, 1, 1});
}

TEST_CASE("gcn matches a dense oracle on random graphs") {
    rng gen(11);
    for (int inst = 0; inst < 5; ++inst) {
        size_t n = 10;
        auto recs = gradcheck::random_flows(gen, n, 4);
        tensor2 feats = gradcheck::random_tensor(n, 3, gen);
        flow_graph g = build_flow_graph(recs, feats);
        csr_matrix adj = normalized_adjacency(g, true);

        // densify the csr and use the naive product
        tensor2 dense(n, n);
        for (size_t i = 0; i < n; ++i)
            for (size_t p2 = adj.row_ptr[i]; p2 < adj.row_ptr[i + 1]; ++p2) dense.at(i, adj.col[p2]) = adj.val[p2];

        nn::layer_params p;
        p.init(3, 2, false, gen);
        tensor2 got = nn::gcn_forward(feats, adj, p);
        tensor2 want = naive_matmul(naive_matmul(dense, feats), p.weight);
        for (auto& v : want.data) v = std::max(0.0, v);
        for (size_t i = 0; i < got.size(); ++i)
            CHECK(std::abs(got.data[i] - want.data[i]) < 1e-10);
    }
}

TEST_CASE("attention layer: isolated node is a per-node transform") {
    rng gen(5);
    std::vector<flow_record> recs(1);
    recs[0].src_addr = "a";
    recs[0].dst_addr = "b";
    tensor2 feats = gradcheck::random_tensor(1, 3, gen);
    flow_graph g = build_flow_graph(recs, feats);
    attention_graph ag = make_attention_graph(g);
    nn::attention_params p;
    p.init(3, 2, gen);

    nn::gat_ctx ctx;
    tensor2 out = nn::gat_forward(feats, ag, p, true, &ctx);
    CHECK(ctx.alpha.size() == 1);
    CHECK(ctx.alpha[0] == doctest::Approx(1.0).epsilon(1e-15));
    tensor2 lin = naive_matmul(feats, p.weight);
    for (size_t i = 0; i < out.size(); ++i)
        CHECK(out.data[i] == doctest::Approx(std::max(0.0, lin.data[i])).epsilon(1e-12));
}

TEST_CASE("attention weights are uniform over identical neighbors") {
    // node 0 linked to nodes 1 and 2, everything has the same features
    std::vector<flow_record> recs(3);
    recs[0] = {"u", "x", 0, 0, 0, {}, {}, flow_label::unknown, ""};
    recs[1] = {"u", "y", 0, 0, 0, {}, {}, flow_label::unknown, ""};
    recs[2] = {"u", "z", 0, 0, 0, {}, {}, flow_label::unknown, ""};
    tensor2 feats(3, 2);
    for (auto& v : feats.data) v = 1.0;
    flow_graph g = build_flow_graph(recs, feats);
    REQUIRE(g.edges.size() == 3);
    attention_graph ag = make_attention_graph(g);
    rng gen(6);
    nn::attention_params p;
    p.init(2, 2, gen);

    nn::gat_ctx ctx;
    nn::gat_forward(feats, ag, p, true, &ctx);
    for (size_t i = 0; i < ag.n; ++i) {
        for (size_t s = ag.row_ptr[i]; s < ag.row_ptr[i + 1]; ++s) {
            CHECK(ctx.alpha[s] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
        }
    }
}

TEST_CASE("attention rows sum to one and match a scalar-loop oracle") {
    rng gen(12);
    for (int inst = 0; inst < 5; ++inst) {
        size_t n = 6;
        auto recs = gradcheck::random_flows(gen, n, 3);
        tensor2 feats = gradcheck::random_tensor(n, 3, gen);
        flow_graph g = build_flow_graph(recs, feats);
        attention_graph ag = make_attention_graph(g);
        nn::attention_params p;
        p.init(3, 2, gen);

        nn::gat_ctx ctx;
        tensor2 out = nn::gat_forward(feats, ag, p, true, &ctx);

        // row sums
        for (size_t i = 0; i < n; ++i) {
            double s = 0.0;
            for (size_t sl = ag.row_ptr[i]; sl < ag.row_ptr[i + 1]; ++sl) s += ctx.alpha[sl];
            CHECK(std::abs(s - 1.0) < 1e-12);
        }

        // direct per-edge recomputation
        const size_t k = 2;
        tensor2 proj = naive_matmul(feats, p.weight);
        auto lrelu = [&](double x) { return x > 0 ? x : p.leaky_slope * x; };
        for (size_t i = 0; i < n; ++i) {
            std::vector<double> scores;
            std::vector<uint32_t> nbrs;
            for (size_t sl = ag.row_ptr[i]; sl < ag.row_ptr[i + 1]; ++sl) {
                uint32_t j = ag.col[sl];
                double e = 0.0;
                for (size_t c = 0; c < k; ++c) {
                    e += p.attn[c] * lrelu(proj.at(i, c));
                    e += p.attn[k + c] * lrelu(proj.at(j, c));
                }
                e += ag.zeta[sl];
                scores.push_back(e);
                nbrs.push_back(j);
            }
            double mx = *std::max_element(scores.begin(), scores.end());
            double denom = 0.0;
            for (double& s : scores) {
                s = std::exp(s - mx);
                denom += s;
            }
            std::vector<double> want(k, 0.0);
            for (size_t t = 0; t < nbrs.size(); ++t) {
                for (size_t c = 0; c < k; ++c) want[c] += scores[t] / denom * proj.at(nbrs[t], c);
            }
            for (size_t c = 0; c < k; ++c) {
                CHECK(out.at(i, c) == doctest::Approx(std::max(0.0, want[c])).epsilon(1e-10));
            }
        }
    }
}

TEST_CASE("cross entropy examples") {
    tensor2 logits(1, 2);
    logits.data = {0, 0};
    CHECK(nn::cross_entropy_loss(logits, {0}).loss == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    CHECK(nn::cross_entropy_loss(logits, {1}).loss == doctest::Approx(std::log(2.0)).epsilon(1e-12));

    logits.data = {100, -100};
    CHECK(nn::cross_entropy_loss(logits, {0}).loss == doctest::Approx(0.0).epsilon(1e-12));

    CHECK_THROWS_AS(nn::cross_entropy_loss(tensor2(0, 2), {}), std::invalid_argument);
}

TEST_CASE("loss gradient matches finite differences (rel < 1e-5)") {
    double worst = gradcheck::run_many(gradcheck::check_loss, 10, 100);
    CHECK(worst < 1e-5);
}

TEST_CASE("gradient checks per layer (rel < 1e-4)") {
    CHECK(gradcheck::run_many(gradcheck::check_linear, 6, 200) < 1e-4);
    CHECK(gradcheck::run_many(gradcheck::check_gcn, 6, 300) < 1e-4);
    CHECK(gradcheck::run_many([](uint64_t s) { return gradcheck::check_gat(s, true); }, 6, 400) < 1e-4);
    CHECK(gradcheck::run_many([](uint64_t s) { return gradcheck::check_gat(s, false); }, 6, 500) < 1e-4);
    CHECK(gradcheck::run_many(gradcheck::check_scorer, 6, 600) < 1e-4);
}

TEST_CASE("zero upstream gradient gives zero parameter gradients") {
    rng gen(9);
    tensor2 x = gradcheck::random_tensor(4, 3, gen);
    nn::layer_params p;
    p.init(3, 2, true, gen);
    nn::linear_ctx ctx;
    nn::linear_forward(x, p, nn::activation::relu, &ctx);
    p.zero_grad();
    nn::linear_backward(tensor2(4, 2), p, ctx);
    for (double v : p.grad_weight.data) CHECK(v == 0.0);
    for (double v : p.grad_bias) CHECK(v == 0.0);
}

TEST_CASE("adam: zero gradient moves parameters only by weight decay") {
    double theta = 0.5;
    double grad = 0.0;
    std::vector<nn::param_ref> params{{"t", &theta, &grad, 1}};
    nn::adam_state st;
    st.init(params);
    nn::adam_hparams hp;
    hp.lr = 1e-3;
    hp.weight_decay = 1e-2;
    nn::adam_step(params, st, hp);
    CHECK(theta == 0.5 - 1e-3 * 1e-2 * 0.5);
}

TEST_CASE("adam single step matches the hand formula") {
    double theta = 0.5;
    double grad = 0.2;
    std::vector<nn::param_ref> params{{"t", &theta, &grad, 1}};
    nn::adam_state st;
    st.init(params);
    nn::adam_hparams hp;  // defaults: lr 1e-4, b1 .9, b2 .98, eps 1e-8, wd 1e-6

    // fresh state: mhat = g, vhat = g^2
    double expect = 0.5 - hp.lr * (0.2 / (std::sqrt(0.2 * 0.2) + hp.eps)) - hp.lr * hp.weight_decay * 0.5;
    nn::adam_step(params, st, hp);
    CHECK(theta == doctest::Approx(expect).epsilon(1e-15));
}

TEST_CASE("adam runs are bitwise deterministic") {
    auto run = [] {
        rng gen(42);
        std::vector<double> theta(8), grad(8);
        for (auto& v : theta) v = gen.normal();
        std::vector<nn::param_ref> params{{"t", theta.data(), grad.data(), theta.size()}};
        nn::adam_state st;
        st.init(params);
        nn::adam_hparams hp;
        hp.lr = 1e-2;
        for (int it = 0; it < 50; ++it) {
            for (auto& g : grad) g = gen.normal();
            nn::adam_step(params, st, hp);
        }
        return theta;
    };
    CHECK(run() == run());
}

TEST_CASE("non-finite activations are rejected") {
    tensor2 t(1, 2);
    t.data = {1.0, std::numeric_limits<double>::quiet_NaN()};
    CHECK_THROWS_AS(check_finite(t, "test"), std::runtime_error);
}
