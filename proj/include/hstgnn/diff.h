#ifndef HSTGNN_DIFF_H
#define HSTGNN_DIFF_H

#include "hstgnn/mat.h"
#include "hstgnn/store.h"

#include <cstdint>
#include <string>
#include <vector>

namespace diff {

    struct tape;

    // Handle to one node of a tape. Values are computed eagerly when the op
    // is built; backward() fills gradients afterwards.
    struct var {
        tape* t = nullptr;
        int id = -1;

        bool valid() const { return t != nullptr && id >= 0; }
        la::matrix const& value() const;
        la::matrix const& grad() const;
        std::size_t rows() const { return value().rows(); }
        std::size_t cols() const { return value().cols(); }
        double scalar() const;
    };

    enum class op_kind {
        input,
        param,
        matmul,
        matmul_nt,
        add,
        emul,
        add_rowvec,
        scale,
        sigmoid,
        relu,
        tanh_fn,
        exp_fn,
        row_softmax,
        row_log_softmax,
        gram,
        unit_fro,
        adj_gate,
        mean_rows,
        sum_all,
        sum_squares,
        entry,
        select_row,
        slice_cols,
        concat_rows,
        concat_cols,
        logaddexp,
    };

    struct node {
        op_kind kind;
        la::matrix val;
        la::matrix grad;
        std::vector<int> parents;
        double alpha = 0.0;
        int i0 = 0;
        int i1 = 0;
        std::vector<std::uint8_t> row_flags;  // adj_gate: 1 marks a fallback row
        bool flagged = false;                 // unit_fro: degenerate input
        param_entry* bound = nullptr;
        bool needs_grad = false;
    };

    // One computation, from inputs and parameters to (typically) a scalar
    // loss. Nodes only ever reference earlier nodes, so reverse id order is
    // a reverse topological order.
    struct tape {
        std::vector<node> nodes;

        var input(la::matrix v);
        var constant(double v);

        // One node per store entry per tape; repeated calls return the
        // original handle.
        var param(param_store& store, std::string const& name);

        // Accumulates d loss / d theta into the store gradients of every
        // bound parameter. Calling it twice accumulates twice.
        void backward(var loss);

        node& at(int id) { return nodes[std::size_t(id)]; }
        node const& at(int id) const { return nodes[std::size_t(id)]; }
        std::size_t size() const { return nodes.size(); }

        bool degenerate(var v) const { return at(v.id).flagged; }
        std::vector<std::uint8_t> const& gate_rows(var v) const { return at(v.id).row_flags; }

        void clear();

    private:
        friend var make_node(tape& t, node&& n);
        std::vector<std::pair<param_entry*, int>> bound_params;
    };

    var matmul(var a, var b);       // a * b
    var matmul_nt(var a, var b);    // a * b^T
    var add(var a, var b);
    var emul(var a, var b);
    var add_rowvec(var a, var b);   // a (n x d) + broadcast b (1 x d)
    var scale(var a, double alpha);
    var sigmoid(var a);
    var relu(var a);
    var tanh_fn(var a);
    var exp_fn(var a);
    var row_softmax(var a);
    var row_log_softmax(var a);
    var gram(var a);                // a^T a, mirrored so symmetry is exact
    var unit_fro(var a);            // a / ||a||_F, pass-through when ||a||_F < 1e-12
    var adj_gate(var sdot, var a);  // row-renormalized a .* exp(sdot), fallback to sdot row
    var mean_rows(var a);
    var sum_all(var a);
    var sum_squares(var a);
    var entry(var a, std::size_t i, std::size_t j);
    var select_row(var a, std::size_t i);
    var slice_cols(var a, std::size_t start, std::size_t len);
    var concat_rows(std::vector<var> const& vs);
    var concat_cols(std::vector<var> const& vs);
    var logaddexp(var a, var b);

}

#endif
