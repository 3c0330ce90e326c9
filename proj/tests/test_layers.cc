#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "hstgnn/gradcheck.h"
#include "hstgnn/layers.h"
#include "hstgnn/losses.h"
#include "testutil.h"

#include <cmath>
#include <numeric>

using namespace layers;
using testutil::random_matrix;

namespace {

    la::matrix eye(std::size_t n)
    {
        la::matrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) {
            m(i, i) = 1.0;
        }
        return m;
    }

    la::matrix permute_rows(la::matrix const& m, std::vector<std::size_t> const& p)
    {
        la::matrix out(m.rows(), m.cols());
        for (std::size_t i = 0; i < m.rows(); ++i) {
            for (std::size_t j = 0; j < m.cols(); ++j) {
                out(i, j) = m(p[i], j);
            }
        }
        return out;
    }

    la::matrix permute_both(la::matrix const& m, std::vector<std::size_t> const& p)
    {
        la::matrix out(m.rows(), m.cols());
        for (std::size_t i = 0; i < m.rows(); ++i) {
            for (std::size_t j = 0; j < m.cols(); ++j) {
                out(i, j) = m(p[i], p[j]);
            }
        }
        return out;
    }

    std::vector<std::size_t> random_permutation(std::size_t n, rng::generator& gen)
    {
        std::vector<std::size_t> p(n);
        std::iota(p.begin(), p.end(), 0);
        for (std::size_t i = n; i > 1; --i) {
            std::swap(p[i - 1], p[std::size_t(gen.below(i))]);
        }
        return p;
    }

    // a well-scaled random sigmoid-range adjacency, symmetric and normalized
    la::matrix random_adjacency(std::size_t n, rng::generator& gen)
    {
        la::matrix raw = random_matrix(n, n, gen, 0.05, 1.0);
        la::matrix a(n, n);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j <= i; ++j) {
                a(i, j) = a(j, i) = 0.5 * (raw(i, j) + raw(j, i));
            }
        }
        double fro = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) {
            fro += a.data()[i] * a.data()[i];
        }
        fro = std::sqrt(fro);
        for (std::size_t i = 0; i < a.size(); ++i) {
            a.data()[i] /= fro;
        }
        return a;
    }

}

TEST_CASE("graph_conv contract cases and loop oracle")
{
    diff::param_store store;
    store.register_param("w", 3, 3, diff::init_spec::zeros());

    SUBCASE("identity adjacency and weights with identity activation")
    {
        diff::tape t;
        rng::generator gen(1);
        la::matrix hm = random_matrix(4, 3, gen);
        diff::var h = t.input(hm);
        diff::var out = graph_conv(h, t.input(eye(4)), t.input(eye(3)),
            activation::identity);
        CHECK(testutil::max_abs_diff(out.value(), hm) < 1e-15);
    }
    SUBCASE("zero adjacency maps everything to f(0)")
    {
        diff::tape t;
        rng::generator gen(2);
        diff::var out = graph_conv(t.input(random_matrix(4, 3, gen)),
            t.input(la::matrix(4, 4)), t.input(random_matrix(3, 5, gen)),
            activation::relu);
        for (std::size_t i = 0; i < out.value().size(); ++i) {
            CHECK(out.value().data()[i] == 0.0);
        }
    }
    SUBCASE("five-vertex graph against the per-vertex loop")
    {
        diff::tape t;
        rng::generator gen(3);
        la::matrix am = random_adjacency(5, gen);
        la::matrix hm = random_matrix(5, 4, gen);
        la::matrix wm = random_matrix(4, 3, gen);
        diff::var out = graph_conv(t.input(hm), t.input(am), t.input(wm),
            activation::identity);
        for (std::size_t i = 0; i < 5; ++i) {
            for (std::size_t c = 0; c < 3; ++c) {
                double v = 0.0;
                for (std::size_t j = 0; j < 5; ++j) {
                    for (std::size_t k = 0; k < 4; ++k) {
                        v += am(i, j) * hm(j, k) * wm(k, c);
                    }
                }
                CHECK(std::fabs(out.value()(i, c) - v) < 1e-12);
            }
        }
    }
}

TEST_CASE("attention_scores: singleton, zero query, row stochasticity")
{
    diff::tape t;
    rng::generator gen(4);

    SUBCASE("single vertex")
    {
        diff::var s = attention_scores(t.input(random_matrix(1, 4, gen)),
            t.input(random_matrix(4, 2, gen)), t.input(random_matrix(4, 2, gen)));
        CHECK(s.rows() == 1);
        CHECK(s.value()(0, 0) == 1.0);
    }
    SUBCASE("zero query weight gives uniform rows")
    {
        diff::var s = attention_scores(t.input(random_matrix(5, 4, gen)),
            t.input(la::matrix(4, 2)), t.input(random_matrix(4, 2, gen)));
        for (std::size_t i = 0; i < 5; ++i) {
            for (std::size_t j = 0; j < 5; ++j) {
                CHECK(s.value()(i, j) == doctest::Approx(0.2).epsilon(1e-14));
            }
        }
    }
    SUBCASE("rows sum to one over random draws")
    {
        for (int trial = 0; trial < 100; ++trial) {
            std::size_t n = 2 + gen.below(6);
            diff::var s = attention_scores(t.input(random_matrix(n, 4, gen)),
                t.input(random_matrix(4, 3, gen)), t.input(random_matrix(4, 3, gen)));
            for (std::size_t i = 0; i < n; ++i) {
                double sum = 0.0;
                for (std::size_t j = 0; j < n; ++j) {
                    sum += s.value()(i, j);
                }
                CHECK(std::fabs(sum - 1.0) < 1e-12);
            }
        }
    }
}

TEST_CASE("gate_scores: diagonal shortcut, constant-row cancellation, stochasticity")
{
    diff::tape t;
    rng::generator gen(5);

    SUBCASE("adjacency with only the diagonal keeps self-attention only")
    {
        la::matrix a(3, 3);
        a(0, 0) = 0.4;
        a(1, 1) = 0.7;
        a(2, 2) = 0.1;
        la::matrix sdot(3, 3, 1.0 / 3.0);
        diff::var g = gate_scores(t.input(sdot), t.input(a));
        for (std::size_t i = 0; i < 3; ++i) {
            for (std::size_t j = 0; j < 3; ++j) {
                CHECK(g.value()(i, j) == doctest::Approx(i == j ? 1.0 : 0.0));
            }
        }
    }
    SUBCASE("uniform positive adjacency row reduces to softmax of the row")
    {
        for (int trial = 0; trial < 20; ++trial) {
            std::size_t n = 2 + gen.below(5);
            la::matrix sdot = random_matrix(n, n, gen, 0.0, 1.0);
            la::matrix a(n, n, 0.3 + 0.5 * gen.uniform());
            diff::var g = gate_scores(t.input(sdot), t.input(a));
            for (std::size_t i = 0; i < n; ++i) {
                double z = 0.0;
                for (std::size_t j = 0; j < n; ++j) {
                    z += std::exp(sdot(i, j));
                }
                for (std::size_t j = 0; j < n; ++j) {
                    CHECK(std::fabs(g.value()(i, j) - std::exp(sdot(i, j)) / z) < 1e-12);
                }
            }
        }
    }
    SUBCASE("non-degenerate rows sum to one; zero rows fall back and are flagged")
    {
        for (int trial = 0; trial < 100; ++trial) {
            std::size_t n = 2 + gen.below(5);
            diff::var g = gate_scores(t.input(random_matrix(n, n, gen, 0.0, 1.0)),
                t.input(random_matrix(n, n, gen, 0.0, 1.0)));
            for (std::size_t i = 0; i < n; ++i) {
                double sum = 0.0;
                for (std::size_t j = 0; j < n; ++j) {
                    sum += g.value()(i, j);
                }
                CHECK(std::fabs(sum - 1.0) < 1e-12);
            }
        }
        la::matrix sdot = random_matrix(2, 2, gen);
        la::matrix a(2, 2);  // all-zero adjacency: every row degenerates
        diff::var g = gate_scores(t.input(sdot), t.input(a));
        CHECK(t.gate_rows(g)[0] == 1);
        CHECK(t.gate_rows(g)[1] == 1);
        CHECK(testutil::max_abs_diff(g.value(), sdot) == 0.0);
    }
}

TEST_CASE("attend: identity, uniform averaging, loop oracle")
{
    diff::tape t;
    rng::generator gen(6);
    la::matrix lm = random_matrix(4, 3, gen);

    diff::var out = attend(t.input(eye(4)), t.input(lm));
    CHECK(testutil::max_abs_diff(out.value(), lm) == 0.0);

    diff::var avg = attend(t.input(la::matrix(4, 4, 0.25)), t.input(lm));
    for (std::size_t i = 0; i < 4; ++i) {
        for (std::size_t c = 0; c < 3; ++c) {
            double mean = (lm(0, c) + lm(1, c) + lm(2, c) + lm(3, c)) / 4.0;
            CHECK(std::fabs(avg.value()(i, c) - mean) < 1e-14);
        }
    }

    la::matrix s = random_matrix(4, 4, gen);
    diff::var o2 = attend(t.input(s), t.input(lm));
    for (std::size_t i = 0; i < 4; ++i) {
        for (std::size_t c = 0; c < 3; ++c) {
            double v = 0.0;
            for (std::size_t j = 0; j < 4; ++j) {
                v += s(i, j) * lm(j, c);
            }
            CHECK(std::fabs(o2.value()(i, c) - v) < 1e-12);
        }
    }
}

TEST_CASE("transformer_layer: contract, single-head reduction")
{
    encoder_config cfg;
    cfg.n_conv_layers = 0;
    cfg.n_transformer_layers = 1;
    cfg.d_model = 6;
    cfg.d_ff = 12;
    cfg.n_heads = 1;
    cfg.d_head = 6;

    diff::param_store store;
    register_stream(store, "s", 6, cfg, 77);
    // with W_multihead = I the merge is a no-op and the layer is exactly
    // the single-head path
    store.at("s.tf0.wo").value = eye(6);

    rng::generator gen(7);
    diff::tape t;
    graphs::graph_vars g;
    g.v = t.input(random_matrix(5, 6, gen));
    g.a = t.input(random_adjacency(5, gen));

    graphs::graph_vars out = transformer_layer(t, store, g, "s", 0, cfg);
    CHECK(out.v.rows() == 5);
    CHECK(out.v.cols() == 6);
    CHECK(out.a.id == g.a.id);  // adjacency passes through untouched

    diff::var sdot = attention_scores(g.v, t.param(store, "s.tf0.h0.wq"),
        t.param(store, "s.tf0.h0.wk"));
    diff::var head = attend(gate_scores(sdot, g.a),
        diff::matmul(g.v, t.param(store, "s.tf0.h0.wv")));
    diff::var ffn = diff::add_rowvec(
        diff::matmul(diff::relu(diff::add_rowvec(
                         diff::matmul(head, t.param(store, "s.tf0.ffn.w1")),
                         t.param(store, "s.tf0.ffn.b1"))),
            t.param(store, "s.tf0.ffn.w2")),
        t.param(store, "s.tf0.ffn.b2"));
    CHECK(testutil::max_abs_diff(out.v.value(), ffn.value()) < 1e-14);
}

TEST_CASE("permutation equivariance of conv, transformer, and composition")
{
    encoder_config cfg;
    cfg.n_conv_layers = 2;
    cfg.n_transformer_layers = 1;
    cfg.d_model = 8;
    cfg.d_ff = 16;
    cfg.n_heads = 2;
    cfg.d_head = 4;

    diff::param_store store;
    register_stream(store, "s", 5, cfg, 13);

    rng::generator gen(14);
    for (int trial = 0; trial < 20; ++trial) {
        std::size_t n = 4 + gen.below(5);
        la::matrix vm = random_matrix(n, 5, gen);
        la::matrix am = random_adjacency(n, gen);
        auto p = random_permutation(n, gen);

        diff::tape t;
        graphs::graph_vars g;
        g.v = t.input(vm);
        g.a = t.input(am);
        graphs::graph_vars enc = encode_stream(t, store, g, "s", cfg);
        diff::var pooled = avg_pool(enc);

        graphs::graph_vars gp;
        gp.v = t.input(permute_rows(vm, p));
        gp.a = t.input(permute_both(am, p));
        graphs::graph_vars encp = encode_stream(t, store, gp, "s", cfg);
        diff::var pooledp = avg_pool(encp);

        la::matrix expect = permute_rows(enc.v.value(), p);
        CHECK(testutil::max_abs_diff(expect, encp.v.value()) < 1e-10);
        CHECK(testutil::max_abs_diff(pooled.value(), pooledp.value()) < 1e-10);
    }
}

TEST_CASE("encode_stream: conv-only degradation and config validation")
{
    encoder_config cfg;
    cfg.n_conv_layers = 1;
    cfg.n_transformer_layers = 0;
    cfg.d_model = 4;

    diff::param_store store;
    register_stream(store, "s", 3, cfg, 5);

    rng::generator gen(15);
    diff::tape t;
    graphs::graph_vars g;
    g.v = t.input(random_matrix(4, 3, gen));
    g.a = t.input(random_adjacency(4, gen));
    graphs::graph_vars out = encode_stream(t, store, g, "s", cfg);
    diff::var manual = graph_conv(g.v, g.a, t.param(store, "s.conv0.w"),
        activation::relu);
    CHECK(testutil::max_abs_diff(out.v.value(), manual.value()) == 0.0);

    encoder_config bad;
    bad.n_conv_layers = 0;
    bad.d_model = 7;  // input dim 3 cannot feed the transformer directly
    CHECK_THROWS(bad.validate(3));

    std::vector<graphs::graph_vars> seq = {g, g, g};
    auto encoded = encode_stream(t, store, seq, "s", cfg);
    CHECK(encoded.size() == 3);
}

TEST_CASE("encoder stream gradients check out on a tiny config")
{
    encoder_config cfg;
    cfg.n_conv_layers = 2;
    cfg.n_transformer_layers = 1;
    cfg.d_model = 4;
    cfg.d_ff = 8;
    cfg.n_heads = 2;
    cfg.d_head = 2;

    diff::param_store store;
    register_stream(store, "s", 3, cfg, 99);

    rng::generator gen(16);
    la::matrix vm = random_matrix(4, 3, gen);
    la::matrix am = random_adjacency(4, gen);
    la::matrix readout = random_matrix(1, 4, gen);

    // the weight-decay term keeps every coordinate's gradient well away
    // from the finite-difference noise floor
    auto build = [&](diff::tape& t) {
        graphs::graph_vars g;
        g.v = t.input(vm);
        g.a = t.input(am);
        graphs::graph_vars enc = encode_stream(t, store, g, "s", cfg);
        diff::var fit = diff::sum_all(diff::emul(avg_pool(enc), t.input(readout)));
        return diff::add(fit, diff::scale(losses::l2_penalty(t, store), 0.05));
    };
    auto res = diff::grad_check(build, store, {});
    CHECK(res.ok);
    CHECK(res.max_rel_error < 1e-5);
}

TEST_CASE("avg_pool: constant rows, hand value, permutation invariance")
{
    diff::tape t;
    rng::generator gen(17);

    la::matrix rows(3, 2);
    for (std::size_t i = 0; i < 3; ++i) {
        rows(i, 0) = 4.5;
        rows(i, 1) = -1.25;
    }
    diff::var pooled = avg_pool(t.input(rows));
    CHECK(pooled.value()(0, 0) == 4.5);
    CHECK(pooled.value()(0, 1) == -1.25);

    la::matrix two{{0, 2}, {2, 0}};
    diff::var p2 = avg_pool(t.input(two));
    CHECK(p2.value()(0, 0) == 1.0);
    CHECK(p2.value()(0, 1) == 1.0);

    la::matrix m = random_matrix(6, 3, gen);
    auto perm = random_permutation(6, gen);
    diff::var a = avg_pool(t.input(m));
    diff::var b = avg_pool(t.input(permute_rows(m, perm)));
    CHECK(testutil::max_abs_diff(a.value(), b.value()) < 1e-12);
}

TEST_CASE("hierarchical_pool: dimension, fusion behavior, degenerate flag")
{
    encoder_config cfg;
    cfg.d_model = 6;

    diff::param_store store;
    graphs::adjacency_learner fusion = graphs::make_learner(store, "adj.fuse", 6, 3,
        graphs::nonlinearity::relu, 500);

    rng::generator gen(18);
    auto make_graph = [&](diff::tape& t, std::size_t n, bool zero = false) {
        graphs::graph_vars g;
        g.v = t.input(zero ? la::matrix(n, 6) : random_matrix(n, 6, gen));
        g.a = t.input(random_adjacency(n, gen));
        return g;
    };

    SUBCASE("fused vector concatenates the three pooled streams")
    {
        diff::tape t;
        auto app = make_graph(t, 9);
        auto flow = make_graph(t, 9);
        auto face = make_graph(t, 8);
        auto lh = make_graph(t, 7);
        auto rh = make_graph(t, 7);
        pooled_frame out = hierarchical_pool(t, store, app, flow, face, lh, rh, fusion);
        CHECK(out.p.rows() == 1);
        CHECK(out.p.cols() == 18);
        CHECK(out.fusion_adjacency.rows() == 3);
        CHECK(!out.fusion_degenerate);

        // first d_model entries are the appearance pool
        diff::var ap = avg_pool(app);
        for (std::size_t c = 0; c < 6; ++c) {
            CHECK(out.p.value()(0, c) == ap.value()(0, c));
        }
    }
    SUBCASE("swapping the hand streams: fusion adjacency permutes, the fused "
            "vector is unchanged (mean pooling is order-blind)")
    {
        diff::tape t;
        auto app = make_graph(t, 9);
        auto flow = make_graph(t, 9);
        auto face = make_graph(t, 8);
        auto lh = make_graph(t, 7);
        auto rh = make_graph(t, 7);
        pooled_frame base = hierarchical_pool(t, store, app, flow, face, lh, rh, fusion);
        pooled_frame swapped = hierarchical_pool(t, store, app, flow, face, rh, lh, fusion);

        // permutation (0)(1 2) applied to both axes of the 3x3 adjacency
        std::vector<std::size_t> p = {0, 2, 1};
        la::matrix expect = permute_both(base.fusion_adjacency.value(), p);
        CHECK(testutil::max_abs_diff(expect, swapped.fusion_adjacency.value()) < 1e-12);
        CHECK(testutil::max_abs_diff(base.p.value(), swapped.p.value()) < 1e-12);
    }
    SUBCASE("zero fine features hit the degenerate normalization")
    {
        diff::tape t;
        auto app = make_graph(t, 9);
        auto flow = make_graph(t, 9);
        auto face = make_graph(t, 8, true);
        auto lh = make_graph(t, 7, true);
        auto rh = make_graph(t, 7, true);
        pooled_frame out = hierarchical_pool(t, store, app, flow, face, lh, rh, fusion);
        CHECK(out.fusion_degenerate);
    }
    SUBCASE("fine streams must agree on d_model")
    {
        diff::tape t;
        auto app = make_graph(t, 9);
        auto flow = make_graph(t, 9);
        auto face = make_graph(t, 8);
        auto lh = make_graph(t, 7);
        graphs::graph_vars rh;
        rh.v = t.input(random_matrix(7, 4, gen));
        rh.a = t.input(random_adjacency(7, gen));
        CHECK_THROWS(hierarchical_pool(t, store, app, flow, face, lh, rh, fusion));
    }
}
