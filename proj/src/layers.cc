#include "hstgnn/layers.h"
#include "hstgnn/rng.h"

#include <cmath>
#include <stdexcept>

namespace layers {

    activation activation_from_name(std::string const& name)
    {
        if (name == "relu") return activation::relu;
        if (name == "tanh") return activation::tanh;
        if (name == "sigmoid") return activation::sigmoid;
        if (name == "identity") return activation::identity;
        throw std::invalid_argument("unknown activation '" + name + "'");
    }

    char const* activation_name(activation f)
    {
        switch (f) {
        case activation::relu: return "relu";
        case activation::tanh: return "tanh";
        case activation::sigmoid: return "sigmoid";
        case activation::identity: return "identity";
        }
        return "?";
    }

    namespace {

        diff::var apply_activation(diff::var x, activation f)
        {
            switch (f) {
            case activation::relu: return diff::relu(x);
            case activation::tanh: return diff::tanh_fn(x);
            case activation::sigmoid: return diff::sigmoid(x);
            case activation::identity: return x;
            }
            throw std::logic_error("unreachable");
        }

        std::string conv_name(std::string const& prefix, std::size_t l)
        {
            return prefix + ".conv" + std::to_string(l) + ".w";
        }

        std::string tf_name(std::string const& prefix, std::size_t l)
        {
            return prefix + ".tf" + std::to_string(l);
        }

    }

    void encoder_config::validate(std::size_t in_dim) const
    {
        if (d_model == 0 || d_ff == 0 || n_heads == 0 || d_head == 0) {
            throw std::invalid_argument("encoder config: dims must be positive");
        }
        if (n_conv_layers == 0 && in_dim != d_model && n_transformer_layers > 0) {
            throw std::invalid_argument("encoder config: without conv layers the input dim ("
                + std::to_string(in_dim) + ") must equal d_model ("
                + std::to_string(d_model) + ")");
        }
    }

    void register_stream(diff::param_store& store, std::string const& prefix,
        std::size_t in_dim, encoder_config const& cfg, std::uint64_t seed)
    {
        cfg.validate(in_dim);
        std::size_t d = in_dim;
        for (std::size_t l = 0; l < cfg.n_conv_layers; ++l) {
            std::string name = conv_name(prefix, l);
            store.register_param(name, d, cfg.d_model,
                diff::init_spec::xavier(rng::derive(seed, name)));
            d = cfg.d_model;
        }
        for (std::size_t l = 0; l < cfg.n_transformer_layers; ++l) {
            std::string base = tf_name(prefix, l);
            for (std::size_t k = 0; k < cfg.n_heads; ++k) {
                for (char const* role : {"wq", "wk", "wv"}) {
                    std::string name = base + ".h" + std::to_string(k) + "." + role;
                    store.register_param(name, cfg.d_model, cfg.d_head,
                        diff::init_spec::xavier(rng::derive(seed, name)));
                }
            }
            store.register_param(base + ".wo", cfg.n_heads * cfg.d_head, cfg.d_model,
                diff::init_spec::xavier(rng::derive(seed, base + ".wo")));
            store.register_param(base + ".ffn.w1", cfg.d_model, cfg.d_ff,
                diff::init_spec::xavier(rng::derive(seed, base + ".ffn.w1")));
            store.register_param(base + ".ffn.b1", 1, cfg.d_ff, diff::init_spec::zeros());
            store.register_param(base + ".ffn.w2", cfg.d_ff, cfg.d_model,
                diff::init_spec::xavier(rng::derive(seed, base + ".ffn.w2")));
            store.register_param(base + ".ffn.b2", 1, cfg.d_model, diff::init_spec::zeros());
        }
    }

    diff::var graph_conv(diff::var h, diff::var a, diff::var w, activation f)
    {
        return apply_activation(diff::matmul(diff::matmul(a, h), w), f);
    }

    diff::var attention_scores(diff::var vfeat, diff::var wq, diff::var wk)
    {
        diff::var q = diff::matmul(vfeat, wq);
        diff::var k = diff::matmul(vfeat, wk);
        diff::var s = diff::matmul_nt(q, k);
        double n = double(vfeat.rows());
        return diff::row_softmax(diff::scale(s, 1.0 / std::sqrt(n)));
    }

    graphs::graph_vars transformer_layer(diff::tape& t, diff::param_store& store,
        graphs::graph_vars const& g, std::string const& prefix, std::size_t layer,
        encoder_config const& cfg)
    {
        std::string base = tf_name(prefix, layer);
        std::vector<diff::var> heads;
        heads.reserve(cfg.n_heads);
        for (std::size_t k = 0; k < cfg.n_heads; ++k) {
            std::string h = base + ".h" + std::to_string(k);
            diff::var sdot = attention_scores(g.v,
                t.param(store, h + ".wq"), t.param(store, h + ".wk"));
            diff::var gated = gate_scores(sdot, g.a);
            diff::var values = diff::matmul(g.v, t.param(store, h + ".wv"));
            heads.push_back(attend(gated, values));
        }
        diff::var merged = diff::matmul(concat_cols(heads), t.param(store, base + ".wo"));
        diff::var hidden = apply_activation(
            diff::add_rowvec(diff::matmul(merged, t.param(store, base + ".ffn.w1")),
                t.param(store, base + ".ffn.b1")),
            cfg.ffn_activation);
        diff::var out = diff::add_rowvec(diff::matmul(hidden, t.param(store, base + ".ffn.w2")),
            t.param(store, base + ".ffn.b2"));
        graphs::graph_vars res = g;
        res.v = out;
        return res;
    }

    graphs::graph_vars encode_stream(diff::tape& t, diff::param_store& store,
        graphs::graph_vars const& g, std::string const& prefix, encoder_config const& cfg)
    {
        cfg.validate(g.v.cols());
        graphs::graph_vars cur = g;
        for (std::size_t l = 0; l < cfg.n_conv_layers; ++l) {
            cur.v = graph_conv(cur.v, cur.a, t.param(store, conv_name(prefix, l)),
                cfg.conv_activation);
        }
        for (std::size_t l = 0; l < cfg.n_transformer_layers; ++l) {
            cur = transformer_layer(t, store, cur, prefix, l, cfg);
        }
        return cur;
    }

    std::vector<graphs::graph_vars> encode_stream(diff::tape& t, diff::param_store& store,
        std::vector<graphs::graph_vars> const& seq, std::string const& prefix,
        encoder_config const& cfg)
    {
        std::vector<graphs::graph_vars> out;
        out.reserve(seq.size());
        for (auto const& g : seq) {
            out.push_back(encode_stream(t, store, g, prefix, cfg));
        }
        return out;
    }

    pooled_frame hierarchical_pool(diff::tape& t, diff::param_store& store,
        graphs::graph_vars const& app, graphs::graph_vars const& flow,
        graphs::graph_vars const& face, graphs::graph_vars const& lhand,
        graphs::graph_vars const& rhand, graphs::adjacency_learner const& fusion)
    {
        la::check_shape(face.v.cols() == lhand.v.cols() && face.v.cols() == rhand.v.cols(),
            "hierarchical_pool: fine streams disagree on d_model");
        diff::var pooled_fine = diff::concat_rows({avg_pool(face), avg_pool(lhand),
            avg_pool(rhand)});  // 3-vertex graph in region order

        pooled_frame out;
        out.fusion_adjacency = graphs::learned_adjacency(t, store, pooled_fine, fusion,
            &out.fusion_degenerate);
        out.p = diff::concat_cols({avg_pool(app), avg_pool(flow),
            diff::mean_rows(pooled_fine)});
        return out;
    }

}
