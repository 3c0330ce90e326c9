#include "hstgnn/diff.h"
#include "hstgnn/kernels.h"

#include <cmath>
#include <stdexcept>

namespace diff {

    namespace {

        constexpr double degenerate_eps = 1e-12;

    }

    la::matrix const& var::value() const
    {
        return t->at(id).val;
    }

    la::matrix const& var::grad() const
    {
        return t->at(id).grad;
    }

    double var::scalar() const
    {
        la::check_shape(rows() == 1 && cols() == 1, "scalar() on " + la::shape_str(value()));
        return value()(0, 0);
    }

    var make_node(tape& t, node&& n)
    {
        if (!n.needs_grad) {
            for (int p : n.parents) {
                if (t.at(p).needs_grad) {
                    n.needs_grad = true;
                    break;
                }
            }
        }
        t.nodes.push_back(std::move(n));
        return var{&t, int(t.nodes.size()) - 1};
    }

    var tape::input(la::matrix v)
    {
        node n;
        n.kind = op_kind::input;
        n.val = std::move(v);
        return make_node(*this, std::move(n));
    }

    var tape::constant(double v)
    {
        la::matrix m(1, 1);
        m(0, 0) = v;
        return input(std::move(m));
    }

    var tape::param(param_store& store, std::string const& name)
    {
        param_entry* e = &store.at(name);
        for (auto const& [bound, id] : bound_params) {
            if (bound == e) {
                return var{this, id};
            }
        }
        node n;
        n.kind = op_kind::param;
        n.val = e->value;
        n.bound = e;
        n.needs_grad = true;
        var v = make_node(*this, std::move(n));
        bound_params.emplace_back(e, v.id);
        return v;
    }

    void tape::clear()
    {
        nodes.clear();
        bound_params.clear();
    }

    namespace {

        node binary(tape& t, op_kind kind, var a, var b)
        {
            la::check_shape(a.t == &t && b.t == &t, "operands from different tapes");
            node n;
            n.kind = kind;
            n.parents = {a.id, b.id};
            return n;
        }

        node unary(tape& t, op_kind kind, var a)
        {
            la::check_shape(a.t == &t, "operand from different tape");
            node n;
            n.kind = kind;
            n.parents = {a.id};
            return n;
        }

    }

    var matmul(var a, var b)
    {
        tape& t = *a.t;
        la::matrix const& av = a.value();
        la::matrix const& bv = b.value();
        la::check_shape(av.cols() == bv.rows(),
            "matmul " + la::shape_str(av) + " x " + la::shape_str(bv));
        node n = binary(t, op_kind::matmul, a, b);
        n.val = la::matrix(av.rows(), bv.cols());
        kernels::matmul(av.data(), bv.data(), n.val.data(), av.rows(), av.cols(), bv.cols());
        return make_node(t, std::move(n));
    }

    var matmul_nt(var a, var b)
    {
        tape& t = *a.t;
        la::matrix const& av = a.value();
        la::matrix const& bv = b.value();
        la::check_shape(av.cols() == bv.cols(),
            "matmul_nt " + la::shape_str(av) + " x " + la::shape_str(bv) + "^T");
        node n = binary(t, op_kind::matmul_nt, a, b);
        n.val = la::matrix(av.rows(), bv.rows());
        kernels::matmul_nt(av.data(), bv.data(), n.val.data(), av.rows(), av.cols(), bv.rows());
        return make_node(t, std::move(n));
    }

    var add(var a, var b)
    {
        tape& t = *a.t;
        la::check_shape(a.value().same_shape(b.value()),
            "add " + la::shape_str(a.value()) + " vs " + la::shape_str(b.value()));
        node n = binary(t, op_kind::add, a, b);
        n.val = la::matrix(a.rows(), a.cols());
        kernels::add(a.value().data(), b.value().data(), n.val.data(), n.val.size());
        return make_node(t, std::move(n));
    }

    var emul(var a, var b)
    {
        tape& t = *a.t;
        la::check_shape(a.value().same_shape(b.value()),
            "emul " + la::shape_str(a.value()) + " vs " + la::shape_str(b.value()));
        node n = binary(t, op_kind::emul, a, b);
        n.val = la::matrix(a.rows(), a.cols());
        kernels::mul(a.value().data(), b.value().data(), n.val.data(), n.val.size());
        return make_node(t, std::move(n));
    }

    var add_rowvec(var a, var b)
    {
        tape& t = *a.t;
        la::check_shape(b.rows() == 1 && b.cols() == a.cols(),
            "add_rowvec " + la::shape_str(a.value()) + " + " + la::shape_str(b.value()));
        node n = binary(t, op_kind::add_rowvec, a, b);
        n.val = la::matrix(a.rows(), a.cols());
        for (std::size_t i = 0; i < a.rows(); ++i) {
            kernels::add(a.value().row(i), b.value().data(), n.val.row(i), a.cols());
        }
        return make_node(t, std::move(n));
    }

    var scale(var a, double alpha)
    {
        tape& t = *a.t;
        node n = unary(t, op_kind::scale, a);
        n.alpha = alpha;
        n.val = la::matrix(a.rows(), a.cols());
        kernels::scale(a.value().data(), alpha, n.val.data(), n.val.size());
        return make_node(t, std::move(n));
    }

    namespace {

        var elementwise(var a, op_kind kind,
            void (*fn)(double const*, double*, std::size_t))
        {
            tape& t = *a.t;
            node n = unary(t, kind, a);
            n.val = la::matrix(a.rows(), a.cols());
            fn(a.value().data(), n.val.data(), n.val.size());
            return make_node(t, std::move(n));
        }

    }

    var sigmoid(var a) { return elementwise(a, op_kind::sigmoid, &kernels::vsigmoid); }
    var relu(var a) { return elementwise(a, op_kind::relu, &kernels::vrelu); }
    var tanh_fn(var a) { return elementwise(a, op_kind::tanh_fn, &kernels::vtanh); }
    var exp_fn(var a) { return elementwise(a, op_kind::exp_fn, &kernels::vexp); }

    var row_softmax(var a)
    {
        tape& t = *a.t;
        node n = unary(t, op_kind::row_softmax, a);
        n.val = la::matrix(a.rows(), a.cols());
        std::size_t d = a.cols();
        for (std::size_t i = 0; i < a.rows(); ++i) {
            double const* x = a.value().row(i);
            double* y = n.val.row(i);
            double m = kernels::max_value(x, d);
            double z = 0.0;
            for (std::size_t j = 0; j < d; ++j) {
                y[j] = std::exp(x[j] - m);
                z += y[j];
            }
            kernels::scale(y, 1.0 / z, y, d);
        }
        return make_node(t, std::move(n));
    }

    var row_log_softmax(var a)
    {
        tape& t = *a.t;
        node n = unary(t, op_kind::row_log_softmax, a);
        n.val = la::matrix(a.rows(), a.cols());
        std::size_t d = a.cols();
        for (std::size_t i = 0; i < a.rows(); ++i) {
            double const* x = a.value().row(i);
            double* y = n.val.row(i);
            double m = kernels::max_value(x, d);
            double z = 0.0;
            for (std::size_t j = 0; j < d; ++j) {
                z += std::exp(x[j] - m);
            }
            double logz = m + std::log(z);
            for (std::size_t j = 0; j < d; ++j) {
                y[j] = x[j] - logz;
            }
        }
        return make_node(t, std::move(n));
    }

    var gram(var a)
    {
        tape& t = *a.t;
        la::matrix const& av = a.value();
        node n = unary(t, op_kind::gram, a);
        std::size_t k = av.cols();
        n.val = la::matrix(k, k);
        kernels::matmul_tn_acc(av.data(), av.data(), n.val.data(), av.rows(), k, k);
        // mirror the upper triangle so symmetry holds bitwise
        for (std::size_t i = 0; i < k; ++i) {
            for (std::size_t j = i + 1; j < k; ++j) {
                n.val(j, i) = n.val(i, j);
            }
        }
        return make_node(t, std::move(n));
    }

    var unit_fro(var a)
    {
        tape& t = *a.t;
        node n = unary(t, op_kind::unit_fro, a);
        double norm = std::sqrt(kernels::sum_squares(a.value().data(), a.value().size()));
        n.alpha = norm;
        if (norm < degenerate_eps) {
            n.flagged = true;
            n.val = a.value();
        } else {
            n.val = la::matrix(a.rows(), a.cols());
            kernels::scale(a.value().data(), 1.0 / norm, n.val.data(), n.val.size());
        }
        return make_node(t, std::move(n));
    }

    var adj_gate(var sdot, var a)
    {
        tape& t = *sdot.t;
        la::check_shape(sdot.value().same_shape(a.value()),
            "adj_gate " + la::shape_str(sdot.value()) + " vs " + la::shape_str(a.value()));
        node n = binary(t, op_kind::adj_gate, sdot, a);
        std::size_t rows = sdot.rows();
        std::size_t cols = sdot.cols();
        n.val = la::matrix(rows, cols);
        n.row_flags.assign(rows, 0);
        for (std::size_t i = 0; i < rows; ++i) {
            double const* s = sdot.value().row(i);
            double const* arow = a.value().row(i);
            double* y = n.val.row(i);
            double r = 0.0;
            for (std::size_t j = 0; j < cols; ++j) {
                y[j] = arow[j] * std::exp(s[j]);
                r += y[j];
            }
            if (r < degenerate_eps) {
                n.row_flags[i] = 1;
                for (std::size_t j = 0; j < cols; ++j) {
                    y[j] = s[j];
                }
            } else {
                kernels::scale(y, 1.0 / r, y, cols);
            }
        }
        return make_node(t, std::move(n));
    }

    var mean_rows(var a)
    {
        tape& t = *a.t;
        la::check_shape(a.rows() >= 1, "mean_rows on empty matrix");
        node n = unary(t, op_kind::mean_rows, a);
        n.val = la::matrix(1, a.cols());
        for (std::size_t i = 0; i < a.rows(); ++i) {
            kernels::add(n.val.data(), a.value().row(i), n.val.data(), a.cols());
        }
        kernels::scale(n.val.data(), 1.0 / double(a.rows()), n.val.data(), a.cols());
        return make_node(t, std::move(n));
    }

    var sum_all(var a)
    {
        tape& t = *a.t;
        node n = unary(t, op_kind::sum_all, a);
        n.val = la::matrix(1, 1);
        n.val(0, 0) = kernels::sum(a.value().data(), a.value().size());
        return make_node(t, std::move(n));
    }

    var sum_squares(var a)
    {
        tape& t = *a.t;
        node n = unary(t, op_kind::sum_squares, a);
        n.val = la::matrix(1, 1);
        n.val(0, 0) = kernels::sum_squares(a.value().data(), a.value().size());
        return make_node(t, std::move(n));
    }

    var entry(var a, std::size_t i, std::size_t j)
    {
        tape& t = *a.t;
        la::check_shape(i < a.rows() && j < a.cols(), "entry out of range");
        node n = unary(t, op_kind::entry, a);
        n.i0 = int(i);
        n.i1 = int(j);
        n.val = la::matrix(1, 1);
        n.val(0, 0) = a.value()(i, j);
        return make_node(t, std::move(n));
    }

    var select_row(var a, std::size_t i)
    {
        tape& t = *a.t;
        la::check_shape(i < a.rows(), "select_row out of range");
        node n = unary(t, op_kind::select_row, a);
        n.i0 = int(i);
        n.val = la::matrix(1, a.cols());
        std::copy(a.value().row(i), a.value().row(i) + a.cols(), n.val.data());
        return make_node(t, std::move(n));
    }

    var slice_cols(var a, std::size_t start, std::size_t len)
    {
        tape& t = *a.t;
        la::check_shape(start + len <= a.cols(), "slice_cols out of range");
        node n = unary(t, op_kind::slice_cols, a);
        n.i0 = int(start);
        n.i1 = int(len);
        n.val = la::matrix(a.rows(), len);
        for (std::size_t i = 0; i < a.rows(); ++i) {
            double const* src = a.value().row(i) + start;
            std::copy(src, src + len, n.val.row(i));
        }
        return make_node(t, std::move(n));
    }

    var concat_rows(std::vector<var> const& vs)
    {
        la::check_shape(!vs.empty(), "concat_rows of nothing");
        tape& t = *vs[0].t;
        std::size_t cols = vs[0].cols();
        std::size_t rows = 0;
        for (var v : vs) {
            la::check_shape(v.cols() == cols, "concat_rows: column mismatch");
            rows += v.rows();
        }
        node n;
        n.kind = op_kind::concat_rows;
        n.val = la::matrix(rows, cols);
        std::size_t at_row = 0;
        for (var v : vs) {
            n.parents.push_back(v.id);
            std::copy(v.value().data(), v.value().data() + v.value().size(),
                n.val.row(at_row));
            at_row += v.rows();
        }
        return make_node(t, std::move(n));
    }

    var concat_cols(std::vector<var> const& vs)
    {
        la::check_shape(!vs.empty(), "concat_cols of nothing");
        tape& t = *vs[0].t;
        std::size_t rows = vs[0].rows();
        std::size_t cols = 0;
        for (var v : vs) {
            la::check_shape(v.rows() == rows, "concat_cols: row mismatch");
            cols += v.cols();
        }
        node n;
        n.kind = op_kind::concat_cols;
        n.val = la::matrix(rows, cols);
        std::size_t at_col = 0;
        for (var v : vs) {
            n.parents.push_back(v.id);
            for (std::size_t i = 0; i < rows; ++i) {
                std::copy(v.value().row(i), v.value().row(i) + v.cols(),
                    n.val.row(i) + at_col);
            }
            at_col += v.cols();
        }
        return make_node(t, std::move(n));
    }

    var logaddexp(var a, var b)
    {
        tape& t = *a.t;
        la::check_shape(a.value().same_shape(b.value()),
            "logaddexp " + la::shape_str(a.value()) + " vs " + la::shape_str(b.value()));
        node n = binary(t, op_kind::logaddexp, a, b);
        n.val = la::matrix(a.rows(), a.cols());
        for (std::size_t i = 0; i < n.val.size(); ++i) {
            double x = a.value().data()[i];
            double y = b.value().data()[i];
            double m = x > y ? x : y;
            n.val.data()[i] = m + std::log(std::exp(x - m) + std::exp(y - m));
        }
        return make_node(t, std::move(n));
    }

    namespace {

        void backprop_node(tape& t, int id)
        {
            node& n = t.at(id);
            la::matrix const& g = n.grad;

            auto parent = [&](int slot) -> node& { return t.at(n.parents[std::size_t(slot)]); };
            auto wants = [&](int slot) { return parent(slot).needs_grad; };

            switch (n.kind) {
            case op_kind::input:
            case op_kind::param:
                break;
            case op_kind::matmul: {
                node& a = parent(0);
                node& b = parent(1);
                if (wants(0)) {
                    kernels::matmul_nt_acc(g.data(), b.val.data(), a.grad.data(),
                        g.rows(), g.cols(), a.val.cols());
                }
                if (wants(1)) {
                    kernels::matmul_tn_acc(a.val.data(), g.data(), b.grad.data(),
                        a.val.rows(), a.val.cols(), g.cols());
                }
                break;
            }
            case op_kind::matmul_nt: {
                node& a = parent(0);
                node& b = parent(1);
                if (wants(0)) {
                    kernels::matmul_acc(g.data(), b.val.data(), a.grad.data(),
                        g.rows(), g.cols(), b.val.cols());
                }
                if (wants(1)) {
                    kernels::matmul_tn_acc(g.data(), a.val.data(), b.grad.data(),
                        g.rows(), g.cols(), a.val.cols());
                }
                break;
            }
            case op_kind::add:
                for (int s : {0, 1}) {
                    if (wants(s)) {
                        kernels::axpy(1.0, g.data(), parent(s).grad.data(), g.size());
                    }
                }
                break;
            case op_kind::emul: {
                node& a = parent(0);
                node& b = parent(1);
                if (wants(0)) {
                    kernels::axpby_mul(1.0, g.data(), b.val.data(), a.grad.data(), g.size());
                }
                if (wants(1)) {
                    kernels::axpby_mul(1.0, g.data(), a.val.data(), b.grad.data(), g.size());
                }
                break;
            }
            case op_kind::add_rowvec: {
                node& a = parent(0);
                node& b = parent(1);
                if (wants(0)) {
                    kernels::axpy(1.0, g.data(), a.grad.data(), g.size());
                }
                if (wants(1)) {
                    for (std::size_t i = 0; i < g.rows(); ++i) {
                        kernels::axpy(1.0, g.row(i), b.grad.data(), g.cols());
                    }
                }
                break;
            }
            case op_kind::scale:
                if (wants(0)) {
                    kernels::axpy(n.alpha, g.data(), parent(0).grad.data(), g.size());
                }
                break;
            case op_kind::sigmoid:
                if (wants(0)) {
                    node& a = parent(0);
                    for (std::size_t i = 0; i < g.size(); ++i) {
                        double y = n.val.data()[i];
                        a.grad.data()[i] += g.data()[i] * y * (1.0 - y);
                    }
                }
                break;
            case op_kind::relu:
                if (wants(0)) {
                    node& a = parent(0);
                    for (std::size_t i = 0; i < g.size(); ++i) {
                        if (a.val.data()[i] > 0.0) {
                            a.grad.data()[i] += g.data()[i];
                        }
                    }
                }
                break;
            case op_kind::tanh_fn:
                if (wants(0)) {
                    node& a = parent(0);
                    for (std::size_t i = 0; i < g.size(); ++i) {
                        double y = n.val.data()[i];
                        a.grad.data()[i] += g.data()[i] * (1.0 - y * y);
                    }
                }
                break;
            case op_kind::exp_fn:
                if (wants(0)) {
                    kernels::axpby_mul(1.0, g.data(), n.val.data(), parent(0).grad.data(), g.size());
                }
                break;
            case op_kind::row_softmax:
                if (wants(0)) {
                    node& a = parent(0);
                    for (std::size_t i = 0; i < g.rows(); ++i) {
                        double const* y = n.val.row(i);
                        double const* gr = g.row(i);
                        double* ag = a.grad.row(i);
                        double dotv = kernels::dot(gr, y, g.cols());
                        for (std::size_t j = 0; j < g.cols(); ++j) {
                            ag[j] += y[j] * (gr[j] - dotv);
                        }
                    }
                }
                break;
            case op_kind::row_log_softmax:
                if (wants(0)) {
                    node& a = parent(0);
                    for (std::size_t i = 0; i < g.rows(); ++i) {
                        double const* y = n.val.row(i);
                        double const* gr = g.row(i);
                        double* ag = a.grad.row(i);
                        double gsum = kernels::sum(gr, g.cols());
                        for (std::size_t j = 0; j < g.cols(); ++j) {
                            ag[j] += gr[j] - std::exp(y[j]) * gsum;
                        }
                    }
                }
                break;
            case op_kind::gram:
                if (wants(0)) {
                    node& a = parent(0);
                    std::size_t k = g.rows();
                    la::matrix sym(k, k);
                    for (std::size_t i = 0; i < k; ++i) {
                        for (std::size_t j = 0; j < k; ++j) {
                            sym(i, j) = g(i, j) + g(j, i);
                        }
                    }
                    kernels::matmul_acc(a.val.data(), sym.data(), a.grad.data(),
                        a.val.rows(), k, k);
                }
                break;
            case op_kind::unit_fro:
                if (wants(0)) {
                    node& a = parent(0);
                    if (n.flagged) {
                        kernels::axpy(1.0, g.data(), a.grad.data(), g.size());
                    } else {
                        double norm = n.alpha;
                        double d = kernels::dot(g.data(), a.val.data(), g.size());
                        kernels::axpy(1.0 / norm, g.data(), a.grad.data(), g.size());
                        kernels::axpy(-d / (norm * norm * norm), a.val.data(),
                            a.grad.data(), g.size());
                    }
                }
                break;
            case op_kind::adj_gate: {
                node& s = parent(0);
                node& a = parent(1);
                std::size_t cols = g.cols();
                for (std::size_t i = 0; i < g.rows(); ++i) {
                    double const* gr = g.row(i);
                    if (n.row_flags[i]) {
                        if (wants(0)) {
                            kernels::axpy(1.0, gr, s.grad.row(i), cols);
                        }
                        continue;
                    }
                    double const* y = n.val.row(i);
                    double const* srow = s.val.row(i);
                    double const* arow = a.val.row(i);
                    double r = 0.0;
                    for (std::size_t j = 0; j < cols; ++j) {
                        r += arow[j] * std::exp(srow[j]);
                    }
                    double c = kernels::dot(gr, y, cols);
                    if (wants(0)) {
                        double* sg = s.grad.row(i);
                        for (std::size_t j = 0; j < cols; ++j) {
                            sg[j] += y[j] * (gr[j] - c);
                        }
                    }
                    if (wants(1)) {
                        double* ag = a.grad.row(i);
                        for (std::size_t j = 0; j < cols; ++j) {
                            ag[j] += std::exp(srow[j]) * (gr[j] - c) / r;
                        }
                    }
                }
                break;
            }
            case op_kind::mean_rows:
                if (wants(0)) {
                    node& a = parent(0);
                    double inv = 1.0 / double(a.val.rows());
                    for (std::size_t i = 0; i < a.val.rows(); ++i) {
                        kernels::axpy(inv, g.data(), a.grad.row(i), g.cols());
                    }
                }
                break;
            case op_kind::sum_all:
                if (wants(0)) {
                    node& a = parent(0);
                    double gv = g(0, 0);
                    for (std::size_t i = 0; i < a.grad.size(); ++i) {
                        a.grad.data()[i] += gv;
                    }
                }
                break;
            case op_kind::sum_squares:
                if (wants(0)) {
                    node& a = parent(0);
                    kernels::axpy(2.0 * g(0, 0), a.val.data(), a.grad.data(), a.val.size());
                }
                break;
            case op_kind::entry:
                if (wants(0)) {
                    parent(0).grad(std::size_t(n.i0), std::size_t(n.i1)) += g(0, 0);
                }
                break;
            case op_kind::select_row:
                if (wants(0)) {
                    kernels::axpy(1.0, g.data(), parent(0).grad.row(std::size_t(n.i0)),
                        g.cols());
                }
                break;
            case op_kind::slice_cols:
                if (wants(0)) {
                    node& a = parent(0);
                    for (std::size_t i = 0; i < g.rows(); ++i) {
                        kernels::axpy(1.0, g.row(i), a.grad.row(i) + n.i0, g.cols());
                    }
                }
                break;
            case op_kind::concat_rows: {
                std::size_t at_row = 0;
                for (std::size_t s = 0; s < n.parents.size(); ++s) {
                    node& a = parent(int(s));
                    if (a.needs_grad) {
                        kernels::axpy(1.0, g.row(at_row), a.grad.data(), a.val.size());
                    }
                    at_row += a.val.rows();
                }
                break;
            }
            case op_kind::concat_cols: {
                std::size_t at_col = 0;
                for (std::size_t s = 0; s < n.parents.size(); ++s) {
                    node& a = parent(int(s));
                    if (a.needs_grad) {
                        for (std::size_t i = 0; i < g.rows(); ++i) {
                            kernels::axpy(1.0, g.row(i) + at_col, a.grad.row(i), a.val.cols());
                        }
                    }
                    at_col += a.val.cols();
                }
                break;
            }
            case op_kind::logaddexp: {
                node& a = parent(0);
                node& b = parent(1);
                for (std::size_t i = 0; i < g.size(); ++i) {
                    double gv = g.data()[i];
                    double yv = n.val.data()[i];
                    if (wants(0)) {
                        a.grad.data()[i] += gv * std::exp(a.val.data()[i] - yv);
                    }
                    if (wants(1)) {
                        b.grad.data()[i] += gv * std::exp(b.val.data()[i] - yv);
                    }
                }
                break;
            }
            }
        }

    }

    void tape::backward(var loss)
    {
        la::check_shape(loss.t == this, "loss from different tape");
        node& ln = at(loss.id);
        la::check_shape(ln.val.rows() == 1 && ln.val.cols() == 1,
            "loss must be scalar, got " + la::shape_str(ln.val));

        for (int id = 0; id <= loss.id; ++id) {
            node& n = at(id);
            if (n.needs_grad) {
                n.grad = la::matrix(n.val.rows(), n.val.cols());
            }
        }
        if (!ln.needs_grad) {
            return;  // loss does not depend on any parameter
        }
        ln.grad(0, 0) = 1.0;
        for (int id = loss.id; id >= 0; --id) {
            if (at(id).needs_grad) {
                backprop_node(*this, id);
            }
        }
        for (auto const& [entry, id] : bound_params) {
            if (id <= loss.id) {
                kernels::axpy(1.0, at(id).grad.data(), entry->grad.data(),
                    entry->grad.size());
            }
        }
    }

}
