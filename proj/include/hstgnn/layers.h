#ifndef HSTGNN_LAYERS_H
#define HSTGNN_LAYERS_H

#include "hstgnn/graphs.h"

#include <array>
#include <string>
#include <vector>

namespace layers {

    enum class activation { relu, tanh, sigmoid, identity };

    activation activation_from_name(std::string const& name);
    char const* activation_name(activation f);

    struct encoder_config {
        std::size_t n_conv_layers = 2;
        std::size_t n_transformer_layers = 1;
        std::size_t d_model = 32;
        std::size_t d_ff = 64;
        std::size_t n_heads = 4;
        std::size_t d_head = 8;
        activation conv_activation = activation::relu;
        activation ffn_activation = activation::relu;

        void validate(std::size_t in_dim) const;
    };

    // Registers the conv stack and transformer parameters for one stream
    // under <prefix>.conv<l>.w, <prefix>.tf<l>.h<k>.{wq,wk,wv},
    // <prefix>.tf<l>.wo and <prefix>.tf<l>.ffn.{w1,b1,w2,b2}.
    void register_stream(diff::param_store& store, std::string const& prefix,
        std::size_t in_dim, encoder_config const& cfg, std::uint64_t seed);

    // One message-passing layer: f(A H W).
    diff::var graph_conv(diff::var h, diff::var a, diff::var w, activation f);

    // Row-stochastic scores softmax(Q K^T / sqrt(n)), n = vertex count.
    diff::var attention_scores(diff::var vfeat, diff::var wq, diff::var wk);

    // Adjacency-gated renormalization of already-softmaxed scores.
    inline diff::var gate_scores(diff::var sdot, diff::var a)
    {
        return diff::adj_gate(sdot, a);
    }

    // Context gather: S * L.
    inline diff::var attend(diff::var s, diff::var l) { return diff::matmul(s, l); }

    // Multi-head gated self-attention plus the vertex-wise FFN; the
    // adjacency passes through untouched.
    graphs::graph_vars transformer_layer(diff::tape& t, diff::param_store& store,
        graphs::graph_vars const& g, std::string const& prefix, std::size_t layer,
        encoder_config const& cfg);

    // Conv stack then transformer stack for one stream.
    graphs::graph_vars encode_stream(diff::tape& t, diff::param_store& store,
        graphs::graph_vars const& g, std::string const& prefix, encoder_config const& cfg);

    // Whole graph sequence through the same stream parameters.
    std::vector<graphs::graph_vars> encode_stream(diff::tape& t, diff::param_store& store,
        std::vector<graphs::graph_vars> const& seq, std::string const& prefix,
        encoder_config const& cfg);

    inline diff::var avg_pool(diff::var v) { return diff::mean_rows(v); }
    inline diff::var avg_pool(graphs::graph_vars const& g) { return diff::mean_rows(g.v); }

    struct pooled_frame {
        diff::var p;                     // 1 x (3 * d_model)
        diff::var fusion_adjacency;      // 3 x 3 learned adjacency of the pooled graph
        bool fusion_degenerate = false;
    };

    // Encoded streams in fixed order: appearance, flow, face, lhand, rhand.
    // Pools the fine graphs, re-graphs the pooled vectors with the fusion
    // learner, then pools the three high-level graphs and concatenates.
    pooled_frame hierarchical_pool(diff::tape& t, diff::param_store& store,
        graphs::graph_vars const& app, graphs::graph_vars const& flow,
        graphs::graph_vars const& face, graphs::graph_vars const& lhand,
        graphs::graph_vars const& rhand, graphs::adjacency_learner const& fusion);

}

#endif
