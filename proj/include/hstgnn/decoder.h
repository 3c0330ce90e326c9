#ifndef HSTGNN_DECODER_H
#define HSTGNN_DECODER_H

#include "hstgnn/dataio.h"
#include "hstgnn/diff.h"

#include <cmath>
#include <string>
#include <vector>

namespace decoder {

    struct decoder_config {
        std::size_t hidden = 64;
        std::size_t gloss_emb = 32;
        std::size_t word_emb = 32;
        std::size_t max_text_len = 32;
    };

    // Stage 1 (feats2gloss): input projection, one recurrent cell, output
    // projection over the gloss vocabulary plus blank. Stage 2
    // (gloss2text): gloss embedding, encoder cell over the gloss sequence,
    // decoder cell with a bilinear attention over encoder states, output
    // projection over the word vocabulary.
    void register_decoder(diff::param_store& store, std::size_t input_dim,
        std::size_t gloss_vocab, std::size_t word_vocab, decoder_config const& cfg,
        std::uint64_t seed);

    struct lstm_refs {
        std::string wx;
        std::string wh;
        std::string b;
        std::size_t hidden = 0;
    };

    struct lstm_state {
        diff::var h;
        diff::var c;
    };

    lstm_state lstm_zero_state(diff::tape& t, std::size_t hidden);
    lstm_state lstm_step(diff::tape& t, diff::param_store& store, lstm_refs const& cell,
        lstm_state const& prev, diff::var x);

    // Per-frame log emission distributions, T x (|G|+1); the blank is the
    // last column.
    diff::var feats2gloss(diff::tape& t, diff::param_store& store,
        std::vector<diff::var> const& fused, decoder_config const& cfg);

    inline la::matrix emission_probs(diff::var log_probs)
    {
        la::matrix p(log_probs.rows(), log_probs.cols());
        for (std::size_t i = 0; i < p.size(); ++i) {
            p.data()[i] = std::exp(log_probs.value().data()[i]);
        }
        return p;
    }

    // Per-frame argmax (ties -> lowest index), collapse consecutive
    // repeats, delete blanks. May return the empty sequence.
    std::vector<int> best_path_decode(la::matrix const& probs, int blank);

    // score_j = h_dec^T W_a e_j; weights = softmax(scores);
    // context = sum_j weight_j e_j
    struct attention_result {
        diff::var context;
        diff::var weights;
    };
    attention_result general_attention(diff::var h_dec, diff::var enc_states, diff::var w_a);

    // Decoding state for stage 2: encoder states over the (estimated or
    // ground-truth) gloss sequence plus the decoder cell state.
    struct gloss2text_state {
        diff::var enc_states;  // L x hidden (a single zero row when no glosses)
        lstm_state dec;
    };

    gloss2text_state gloss2text_start(diff::tape& t, diff::param_store& store,
        std::vector<int> const& gloss_ids, decoder_config const& cfg);

    // Advances one position: embeds the previous word, steps the decoder
    // cell, attends over the encoder states, projects and log-softmaxes.
    diff::var gloss2text_step(diff::tape& t, diff::param_store& store,
        gloss2text_state& state, int prev_word, decoder_config const& cfg);

    // One distribution per target position, the w_end position included.
    // targets_padded must end with the stop index.
    std::vector<diff::var> gloss2text_teacher_forced(diff::tape& t,
        diff::param_store& store, std::vector<int> const& gloss_ids,
        std::vector<int> const& targets_padded, dataio::vocabulary const& words,
        decoder_config const& cfg);

    // Greedy decoding from w_start until w_end or max_len; specials are not
    // part of the returned sequence.
    std::vector<int> generate_text(diff::tape& t, diff::param_store& store,
        std::vector<int> const& gloss_ids, dataio::vocabulary const& words,
        decoder_config const& cfg, std::size_t max_len);

}

#endif
