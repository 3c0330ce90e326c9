#include "hstgnn/decoder.h"
#include "hstgnn/rng.h"

#include <cmath>
#include <stdexcept>

namespace decoder {

    namespace {

        void register_lstm(diff::param_store& store, std::string const& prefix,
            std::size_t in_dim, std::size_t hidden, std::uint64_t seed)
        {
            store.register_param(prefix + ".wx", in_dim, 4 * hidden,
                diff::init_spec::xavier(rng::derive(seed, prefix + ".wx")));
            store.register_param(prefix + ".wh", hidden, 4 * hidden,
                diff::init_spec::xavier(rng::derive(seed, prefix + ".wh")));
            store.register_param(prefix + ".b", 1, 4 * hidden, diff::init_spec::zeros());
        }

        lstm_refs refs(std::string const& prefix, std::size_t hidden)
        {
            return {prefix + ".wx", prefix + ".wh", prefix + ".b", hidden};
        }

    }

    void register_decoder(diff::param_store& store, std::size_t input_dim,
        std::size_t gloss_vocab, std::size_t word_vocab, decoder_config const& cfg,
        std::uint64_t seed)
    {
        if (cfg.hidden == 0 || cfg.gloss_emb == 0 || cfg.word_emb == 0) {
            throw std::invalid_argument("decoder config: dims must be positive");
        }
        store.register_param("dec1.in.w", input_dim, cfg.hidden,
            diff::init_spec::xavier(rng::derive(seed, "dec1.in.w")));
        store.register_param("dec1.in.b", 1, cfg.hidden, diff::init_spec::zeros());
        register_lstm(store, "dec1.lstm", cfg.hidden, cfg.hidden, seed);
        store.register_param("dec1.out.w", cfg.hidden, gloss_vocab,
            diff::init_spec::xavier(rng::derive(seed, "dec1.out.w")));
        store.register_param("dec1.out.b", 1, gloss_vocab, diff::init_spec::zeros());

        store.register_param("dec2.gemb", gloss_vocab, cfg.gloss_emb,
            diff::init_spec::xavier(rng::derive(seed, "dec2.gemb")));
        register_lstm(store, "dec2.enc", cfg.gloss_emb, cfg.hidden, seed);
        store.register_param("dec2.wemb", word_vocab, cfg.word_emb,
            diff::init_spec::xavier(rng::derive(seed, "dec2.wemb")));
        register_lstm(store, "dec2.dec", cfg.word_emb, cfg.hidden, seed);
        store.register_param("dec2.att.wa", cfg.hidden, cfg.hidden,
            diff::init_spec::xavier(rng::derive(seed, "dec2.att.wa")));
        store.register_param("dec2.out.w", 2 * cfg.hidden, word_vocab,
            diff::init_spec::xavier(rng::derive(seed, "dec2.out.w")));
        store.register_param("dec2.out.b", 1, word_vocab, diff::init_spec::zeros());
    }

    lstm_state lstm_zero_state(diff::tape& t, std::size_t hidden)
    {
        return {t.input(la::matrix(1, hidden)), t.input(la::matrix(1, hidden))};
    }

    lstm_state lstm_step(diff::tape& t, diff::param_store& store, lstm_refs const& cell,
        lstm_state const& prev, diff::var x)
    {
        diff::var z = diff::add_rowvec(
            diff::add(diff::matmul(x, t.param(store, cell.wx)),
                diff::matmul(prev.h, t.param(store, cell.wh))),
            t.param(store, cell.b));
        std::size_t h = cell.hidden;
        diff::var in_gate = diff::sigmoid(diff::slice_cols(z, 0, h));
        diff::var forget_gate = diff::sigmoid(diff::slice_cols(z, h, h));
        diff::var candidate = diff::tanh_fn(diff::slice_cols(z, 2 * h, h));
        diff::var out_gate = diff::sigmoid(diff::slice_cols(z, 3 * h, h));
        lstm_state next;
        next.c = diff::add(diff::emul(forget_gate, prev.c), diff::emul(in_gate, candidate));
        next.h = diff::emul(out_gate, diff::tanh_fn(next.c));
        return next;
    }

    diff::var feats2gloss(diff::tape& t, diff::param_store& store,
        std::vector<diff::var> const& fused, decoder_config const& cfg)
    {
        la::check_shape(!fused.empty(), "feats2gloss: empty sequence");
        lstm_refs cell = refs("dec1.lstm", cfg.hidden);
        lstm_state state = lstm_zero_state(t, cfg.hidden);
        std::vector<diff::var> logit_rows;
        logit_rows.reserve(fused.size());
        for (diff::var p : fused) {
            diff::var x = diff::add_rowvec(diff::matmul(p, t.param(store, "dec1.in.w")),
                t.param(store, "dec1.in.b"));
            state = lstm_step(t, store, cell, state, x);
            logit_rows.push_back(diff::add_rowvec(
                diff::matmul(state.h, t.param(store, "dec1.out.w")),
                t.param(store, "dec1.out.b")));
        }
        return diff::row_log_softmax(diff::concat_rows(logit_rows));
    }

    std::vector<int> best_path_decode(la::matrix const& probs, int blank)
    {
        std::vector<int> out;
        int prev = -1;
        for (std::size_t t = 0; t < probs.rows(); ++t) {
            int best = 0;
            double best_p = probs(t, 0);
            for (std::size_t j = 1; j < probs.cols(); ++j) {
                if (probs(t, j) > best_p) {
                    best_p = probs(t, j);
                    best = int(j);
                }
            }
            if (best != prev && best != blank) {
                out.push_back(best);
            }
            prev = best;
        }
        return out;
    }

    attention_result general_attention(diff::var h_dec, diff::var enc_states, diff::var w_a)
    {
        la::check_shape(enc_states.rows() >= 1, "general_attention: no encoder states");
        diff::var scores = diff::matmul_nt(diff::matmul(h_dec, w_a), enc_states);
        attention_result res;
        res.weights = diff::row_softmax(scores);
        res.context = diff::matmul(res.weights, enc_states);
        return res;
    }

    gloss2text_state gloss2text_start(diff::tape& t, diff::param_store& store,
        std::vector<int> const& gloss_ids, decoder_config const& cfg)
    {
        gloss2text_state s;
        if (gloss_ids.empty()) {
            // no glosses to attend over; a single zero state keeps the
            // attention well-defined
            s.enc_states = t.input(la::matrix(1, cfg.hidden));
        } else {
            lstm_refs cell = refs("dec2.enc", cfg.hidden);
            lstm_state state = lstm_zero_state(t, cfg.hidden);
            diff::var gemb = t.param(store, "dec2.gemb");
            std::vector<diff::var> states;
            states.reserve(gloss_ids.size());
            for (int g : gloss_ids) {
                la::check_shape(g >= 0 && std::size_t(g) < gemb.rows(),
                    "gloss id out of range");
                state = lstm_step(t, store, cell, state,
                    diff::select_row(gemb, std::size_t(g)));
                states.push_back(state.h);
            }
            s.enc_states = diff::concat_rows(states);
        }
        s.dec = lstm_zero_state(t, cfg.hidden);
        return s;
    }

    diff::var gloss2text_step(diff::tape& t, diff::param_store& store,
        gloss2text_state& state, int prev_word, decoder_config const& cfg)
    {
        diff::var wemb = t.param(store, "dec2.wemb");
        la::check_shape(prev_word >= 0 && std::size_t(prev_word) < wemb.rows(),
            "word id out of range");
        lstm_refs cell = refs("dec2.dec", cfg.hidden);
        state.dec = lstm_step(t, store, cell, state.dec,
            diff::select_row(wemb, std::size_t(prev_word)));
        attention_result att = general_attention(state.dec.h, state.enc_states,
            t.param(store, "dec2.att.wa"));
        diff::var fused = diff::concat_cols({state.dec.h, att.context});
        diff::var logits = diff::add_rowvec(
            diff::matmul(fused, t.param(store, "dec2.out.w")),
            t.param(store, "dec2.out.b"));
        return diff::row_log_softmax(logits);
    }

    std::vector<diff::var> gloss2text_teacher_forced(diff::tape& t,
        diff::param_store& store, std::vector<int> const& gloss_ids,
        std::vector<int> const& targets_padded, dataio::vocabulary const& words,
        decoder_config const& cfg)
    {
        la::check_shape(!targets_padded.empty() && targets_padded.back() == words.stop,
            "gloss2text: padded target must end with the stop index");
        gloss2text_state state = gloss2text_start(t, store, gloss_ids, cfg);
        std::vector<diff::var> dists;
        dists.reserve(targets_padded.size());
        int prev = words.start;
        for (int target : targets_padded) {
            dists.push_back(gloss2text_step(t, store, state, prev, cfg));
            prev = target;
        }
        return dists;
    }

    std::vector<int> generate_text(diff::tape& t, diff::param_store& store,
        std::vector<int> const& gloss_ids, dataio::vocabulary const& words,
        decoder_config const& cfg, std::size_t max_len)
    {
        la::check_shape(max_len >= 1, "generate_text: max_len must be >= 1");
        gloss2text_state state = gloss2text_start(t, store, gloss_ids, cfg);
        std::vector<int> out;
        int prev = words.start;
        for (std::size_t l = 0; l < max_len; ++l) {
            diff::var dist = gloss2text_step(t, store, state, prev, cfg);
            int best = 0;
            double best_p = dist.value()(0, 0);
            for (std::size_t j = 1; j < dist.cols(); ++j) {
                if (dist.value()(0, j) > best_p) {
                    best_p = dist.value()(0, j);
                    best = int(j);
                }
            }
            if (best == words.stop) {
                break;
            }
            if (best != words.start) {  // specials stay out of the surface sequence
                out.push_back(best);
            }
            prev = best;
        }
        return out;
    }

}
