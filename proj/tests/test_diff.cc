#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "hstgnn/diff.h"
#include "hstgnn/gradcheck.h"
#include "hstgnn/optim.h"
#include "testutil.h"

#include <cmath>

using namespace diff;
using testutil::random_matrix;

TEST_CASE("register_param: zeros, duplicates, seeded repeatability")
{
    param_store store;
    store.register_param("W0", 4, 4, init_spec::zeros());
    for (std::size_t i = 0; i < 16; ++i) {
        CHECK(store.at("W0").value.data()[i] == 0.0);
    }
    CHECK_THROWS(store.register_param("W0", 4, 4, init_spec::zeros()));

    param_store s1, s2;
    s1.register_param("M1", 1024, 8, init_spec::uniform(-1.0, 1.0, 7));
    s2.register_param("M1", 1024, 8, init_spec::uniform(-1.0, 1.0, 7));
    CHECK(s1.at("M1").value == s2.at("M1").value);

    CHECK_THROWS(store.register_param("bad", 0, 3, init_spec::zeros()));
}

TEST_CASE("backward: linear and quadratic hand values")
{
    param_store store;
    store.register_param("W", 2, 2, init_spec::zeros());
    store.at("W").value = la::matrix{{3, 0}, {0, 0}};

    {
        tape t;
        var w = t.param(store, "W");
        t.backward(sum_all(w));
        for (std::size_t i = 0; i < 4; ++i) {
            CHECK(store.at("W").grad.data()[i] == 1.0);
        }
    }
    store.zero_grads();
    {
        tape t;
        var w = t.param(store, "W");
        t.backward(sum_all(emul(w, w)));
        CHECK(store.at("W").grad(0, 0) == 6.0);
        CHECK(store.at("W").grad(0, 1) == 0.0);
        CHECK(store.at("W").grad(1, 0) == 0.0);
        CHECK(store.at("W").grad(1, 1) == 0.0);
    }
}

TEST_CASE("backward: softmax cross entropy of [0,0] vs class 0")
{
    param_store store;
    store.register_param("logits", 1, 2, init_spec::zeros());
    tape t;
    var logits = t.param(store, "logits");
    var logp = row_log_softmax(logits);
    var loss = scale(entry(logp, 0, 0), -1.0);
    t.backward(loss);
    CHECK(store.at("logits").grad(0, 0) == doctest::Approx(-0.5).epsilon(1e-12));
    CHECK(store.at("logits").grad(0, 1) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("backward twice accumulates exactly 2x")
{
    param_store store;
    store.register_param("W", 3, 3, init_spec::uniform(-1.0, 1.0, 5));
    tape t;
    var w = t.param(store, "W");
    var loss = sum_all(emul(w, w));
    t.backward(loss);
    la::matrix once = store.at("W").grad;
    t.backward(loss);
    for (std::size_t i = 0; i < once.size(); ++i) {
        CHECK(store.at("W").grad.data()[i] == 2.0 * once.data()[i]);
    }
}

TEST_CASE("backward rejects non-scalar loss")
{
    param_store store;
    store.register_param("W", 2, 2, init_spec::zeros());
    tape t;
    var w = t.param(store, "W");
    CHECK_THROWS(t.backward(w));
}

TEST_CASE("inputs receive no stored gradient")
{
    param_store store;
    store.register_param("W", 2, 2, init_spec::uniform(-1.0, 1.0, 9));
    tape t;
    rng::generator gen(2);
    var x = t.input(random_matrix(2, 2, gen));
    var w = t.param(store, "W");
    t.backward(sum_all(matmul(x, w)));
    CHECK(t.at(x.id).grad.size() == 0);  // input grads never allocated
    double gsum = 0.0;
    for (std::size_t i = 0; i < 4; ++i) {
        gsum += std::fabs(store.at("W").grad.data()[i]);
    }
    CHECK(gsum > 0.0);
}

TEST_CASE("grad_check on smooth scalar functions")
{
    param_store store;
    store.register_param("x", 1, 1, init_spec::zeros());
    store.at("x").value(0, 0) = 3.0;
    auto build = [&](tape& t) {
        var x = t.param(store, "x");
        return sum_all(emul(x, x));
    };
    auto res = grad_check(build, store, {});
    CHECK(res.ok);
    CHECK(res.max_rel_error < 1e-9);
}

TEST_CASE("grad_check flags a kink at zero as non-differentiable")
{
    // note: a symmetric kink like |x| cancels under *central* differences
    // (numeric = analytic = 0 at the apex), so the one-sided relu kink is
    // the honest demonstration that non-smooth points get surfaced
    param_store store;
    store.register_param("x", 1, 1, init_spec::zeros());
    auto build = [&](tape& t) {
        return sum_all(relu(t.param(store, "x")));
    };
    auto res = grad_check(build, store, {});
    CHECK(res.ok);
    CHECK(res.max_rel_error > 0.9);  // analytic 0 vs numeric 0.5
}

namespace {

    // every primitive, finite-differenced through a weighted scalar readout
    double check_primitive(std::function<var(tape&, param_store&)> op_builder,
        param_store& store, la::matrix const& readout_weights, std::uint64_t seed = 0)
    {
        auto build = [&](tape& t) {
            var out = op_builder(t, store);
            var w = t.input(readout_weights);
            return sum_all(emul(out, w));
        };
        grad_check_options opts;
        opts.seed = seed;
        auto res = grad_check(build, store, opts);
        REQUIRE(res.ok);
        return res.max_rel_error;
    }

}

TEST_CASE("primitive jacobians match central differences at 1e-6")
{
    rng::generator gen(42);

    SUBCASE("matmul")
    {
        param_store s;
        s.register_param("a", 3, 4, init_spec::uniform(-1, 1, 1));
        s.register_param("b", 4, 5, init_spec::uniform(-1, 1, 2));
        double err = check_primitive([&](tape& t, param_store& st) {
            return matmul(t.param(st, "a"), t.param(st, "b"));
        }, s, random_matrix(3, 5, gen));
        CHECK(err < 1e-6);
    }
    SUBCASE("matmul_nt")
    {
        param_store s;
        s.register_param("a", 3, 4, init_spec::uniform(-1, 1, 1));
        s.register_param("b", 5, 4, init_spec::uniform(-1, 1, 2));
        double err = check_primitive([&](tape& t, param_store& st) {
            return matmul_nt(t.param(st, "a"), t.param(st, "b"));
        }, s, random_matrix(3, 5, gen));
        CHECK(err < 1e-6);
    }
    SUBCASE("add emul add_rowvec scale")
    {
        param_store s;
        s.register_param("a", 3, 4, init_spec::uniform(-1, 1, 1));
        s.register_param("b", 3, 4, init_spec::uniform(-1, 1, 2));
        s.register_param("r", 1, 4, init_spec::uniform(-1, 1, 3));
        double err = check_primitive([&](tape& t, param_store& st) {
            var sum = add(t.param(st, "a"), t.param(st, "b"));
            var prod = emul(sum, t.param(st, "b"));
            return scale(add_rowvec(prod, t.param(st, "r")), 1.3);
        }, s, random_matrix(3, 4, gen));
        CHECK(err < 1e-6);
    }
    SUBCASE("elementwise nonlinearities")
    {
        param_store s;
        s.register_param("a", 4, 4, init_spec::uniform(0.2, 1.5, 1));
        double err = check_primitive([&](tape& t, param_store& st) {
            var a = t.param(st, "a");
            return emul(sigmoid(a), emul(tanh_fn(a), emul(exp_fn(scale(a, -1.0)), relu(a))));
        }, s, random_matrix(4, 4, gen));
        CHECK(err < 1e-6);
    }
    SUBCASE("row_softmax and row_log_softmax")
    {
        param_store s;
        s.register_param("a", 3, 5, init_spec::uniform(-2, 2, 4));
        double err = check_primitive([&](tape& t, param_store& st) {
            var a = t.param(st, "a");
            return emul(row_softmax(a), row_log_softmax(a));
        }, s, random_matrix(3, 5, gen));
        CHECK(err < 1e-6);
    }
    SUBCASE("gram and unit_fro")
    {
        param_store s;
        s.register_param("a", 4, 3, init_spec::uniform(-1, 1, 6));
        double err = check_primitive([&](tape& t, param_store& st) {
            return unit_fro(gram(t.param(st, "a")));
        }, s, random_matrix(3, 3, gen));
        CHECK(err < 1e-6);
    }
    SUBCASE("adj_gate")
    {
        param_store s;
        s.register_param("sraw", 4, 4, init_spec::uniform(-1, 1, 7));
        s.register_param("araw", 4, 4, init_spec::uniform(-1, 1, 8));
        double err = check_primitive([&](tape& t, param_store& st) {
            var sdot = row_softmax(t.param(st, "sraw"));
            var a = sigmoid(t.param(st, "araw"));
            return adj_gate(sdot, a);
        }, s, random_matrix(4, 4, gen));
        CHECK(err < 1e-6);
    }
    SUBCASE("reductions slices and concats")
    {
        param_store s;
        s.register_param("a", 3, 6, init_spec::uniform(-1, 1, 9));
        s.register_param("b", 2, 6, init_spec::uniform(-1, 1, 10));
        double err = check_primitive([&](tape& t, param_store& st) {
            var a = t.param(st, "a");
            var b = t.param(st, "b");
            var stacked = concat_rows({a, b});
            var wide = concat_cols({mean_rows(stacked), slice_cols(mean_rows(a), 2, 4),
                entry(b, 1, 3), sum_squares(a)});
            return wide;
        }, s, random_matrix(1, 6 + 4 + 1 + 1, gen));
        CHECK(err < 1e-6);
    }
    SUBCASE("logaddexp")
    {
        param_store s;
        s.register_param("a", 2, 3, init_spec::uniform(-2, 2, 11));
        s.register_param("b", 2, 3, init_spec::uniform(-2, 2, 12));
        double err = check_primitive([&](tape& t, param_store& st) {
            return logaddexp(t.param(st, "a"), t.param(st, "b"));
        }, s, random_matrix(2, 3, gen));
        CHECK(err < 1e-6);
    }
}

TEST_CASE("adam: first step magnitude, zero grads, quadratic descent")
{
    SUBCASE("first step moves by about -lr * sign(g)")
    {
        param_store store;
        store.register_param("w", 1, 1, init_spec::zeros());
        store.at("w").value(0, 0) = 1.0;
        store.at("w").grad(0, 0) = 2.0;
        adam_state opt;
        adam_step(store, opt);
        CHECK(store.at("w").value(0, 0) == doctest::Approx(1.0 - 0.001).epsilon(1e-6));
        CHECK(store.at("w").grad(0, 0) == 0.0);
        CHECK(opt.t == 1);
    }
    SUBCASE("zero gradient leaves the parameter unchanged")
    {
        param_store store;
        store.register_param("w", 2, 2, init_spec::uniform(-1, 1, 3));
        la::matrix before = store.at("w").value;
        adam_state opt;
        adam_step(store, opt);
        CHECK(store.at("w").value == before);
    }
    SUBCASE("descent on a quadratic is monotone")
    {
        param_store store;
        store.register_param("w", 1, 1, init_spec::zeros());
        store.at("w").value(0, 0) = 0.7;
        adam_state opt;
        double prev = 0.7 * 0.7;
        for (int i = 0; i < 2; ++i) {
            tape t;
            var w = t.param(store, "w");
            var loss = sum_all(emul(w, w));
            double lv = loss.scalar();
            CHECK(lv < prev + 1e-15);
            prev = lv;
            t.backward(loss);
            adam_step(store, opt);
        }
        double after = store.at("w").value(0, 0) * store.at("w").value(0, 0);
        CHECK(after < prev);
    }
    SUBCASE("non-finite gradient aborts with the parameter name")
    {
        param_store store;
        store.register_param("bad_param", 1, 1, init_spec::zeros());
        store.at("bad_param").grad(0, 0) = std::nan("");
        adam_state opt;
        la::matrix before = store.at("bad_param").value;
        CHECK_THROWS_WITH_AS(adam_step(store, opt),
            doctest::Contains("bad_param"), std::runtime_error);
        CHECK(store.at("bad_param").value == before);
        CHECK(opt.t == 0);
    }
}

TEST_CASE("determinism: identical seeds give bit-identical losses and gradients")
{
    auto run = [](std::uint64_t seed) {
        param_store store;
        store.register_param("w1", 4, 6, init_spec::xavier(rng::derive(seed, "w1")));
        store.register_param("w2", 6, 3, init_spec::xavier(rng::derive(seed, "w2")));
        rng::generator gen(rng::derive(seed, "input"));
        tape t;
        var x = t.input(random_matrix(2, 4, gen));
        var h = sigmoid(matmul(x, t.param(store, "w1")));
        var loss = sum_all(emul(matmul(h, t.param(store, "w2")),
            matmul(h, t.param(store, "w2"))));
        t.backward(loss);
        return std::make_tuple(loss.scalar(), store.at("w1").grad, store.at("w2").grad);
    };
    auto [l1, g1a, g1b] = run(99);
    auto [l2, g2a, g2b] = run(99);
    CHECK(l1 == l2);
    CHECK(g1a == g2a);
    CHECK(g1b == g2b);
}

TEST_CASE("checkpoint round trip is value-exact")
{
    testutil::temp_dir dir;
    param_store store;
    store.register_param("a", 3, 7, init_spec::xavier(17));
    store.register_param("b", 1, 4, init_spec::uniform(-2, 2, 18));
    std::string path = dir.path + "/params.ckpt";
    save_checkpoint(store, path, 1234);

    std::uint64_t seed = 0;
    param_store loaded = load_checkpoint(path, &seed);
    CHECK(seed == 1234);
    CHECK(loaded.entries.size() == 2);
    CHECK(loaded.at("a").value == store.at("a").value);
    CHECK(loaded.at("b").value == store.at("b").value);

    CHECK_THROWS(load_checkpoint(dir.path + "/missing.ckpt"));
}
