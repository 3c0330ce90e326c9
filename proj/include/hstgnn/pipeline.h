#ifndef HSTGNN_PIPELINE_H
#define HSTGNN_PIPELINE_H

#include "hstgnn/config.h"
#include "hstgnn/metrics.h"
#include "hstgnn/optim.h"

#include <array>
#include <string>
#include <vector>

namespace pipeline {

    struct model {
        model_config cfg;
        std::size_t d_a = 0;
        std::size_t d_o = 0;
        dataio::vocabulary gloss_vocab;
        dataio::vocabulary word_vocab;
        diff::param_store store;

        graphs::adjacency_learner adj_app;
        graphs::adjacency_learner adj_flow;
        graphs::adjacency_learner adj_face;
        graphs::adjacency_learner adj_lhand;
        graphs::adjacency_learner adj_rhand;
        graphs::adjacency_learner adj_fuse;

        static model init(model_config const& cfg, std::size_t d_a, std::size_t d_o,
            dataio::vocabulary gloss_vocab, dataio::vocabulary word_vocab);

        // Replaces parameter values with a loaded checkpoint, shape-checked.
        void adopt_params(diff::param_store&& loaded);
    };

    // Five encoded streams pooled into the fused vector for one frame.
    diff::var encode_frame(diff::tape& t, model& m, dataio::sample_record const& sample,
        std::size_t frame);

    struct forward_result {
        diff::var log_emissions;  // T x (|G|+1)
        bool ctc_feasible = true;
        diff::var loss_ctc;
        diff::var loss_ce;
        diff::var loss_total;
    };

    // Teacher-forced forward building all loss terms.
    forward_result forward_training(diff::tape& t, model& m,
        dataio::sample_record const& sample);

    struct decode_result {
        std::vector<std::string> glosses;
        std::vector<std::string> words;
    };

    decode_result decode_sample(model& m, dataio::sample_record const& sample);

    metrics::score_report evaluate(model& m, std::vector<dataio::sample_record> const& samples);

    struct epoch_log {
        std::size_t epoch = 0;
        double loss = 0.0;
        double ctc = 0.0;
        double ce = 0.0;
        double reg = 0.0;
        double dev_wer = 0.0;
        std::array<double, 4> dev_bleu = {0, 0, 0, 0};
        double wall_ms = 0.0;
        std::size_t infeasible = 0;
    };

    struct train_result {
        std::vector<epoch_log> log;
        std::string best_checkpoint;
        std::string final_checkpoint;
        double best_dev_wer = 0.0;
        std::size_t best_epoch = 0;
        bool stopped_early = false;
    };

    // Adam over the combined loss with per-epoch dev evaluation and
    // best-dev-WER checkpointing. Writes checkpoints, vocabularies,
    // model.meta and train_log.txt under out_dir.
    train_result train(std::string const& data_dir, model_config const& cfg,
        std::string const& out_dir);

    // Rebuilds the model recorded next to the checkpoint and scores a split.
    metrics::score_report evaluate_checkpoint(std::string const& checkpoint_path,
        std::string const& data_dir, std::string const& split);

    model load_model(std::string const& checkpoint_path);

    std::vector<dataio::sample_record> load_manifest_split(std::string const& data_dir,
        std::string const& split);

    struct sweep_row {
        std::size_t span = 0;
        double wer = 0.0;
        double bleu4 = 0.0;
    };

    std::vector<sweep_row> sweep_window(std::string const& data_dir,
        model_config const& cfg, std::vector<std::size_t> const& spans,
        std::string const& out_dir);

    // Desk-size model for gradient verification: d_a = d_o = 4, three
    // frames, three content glosses, a four-word vocabulary.
    model_config tiny_gradcheck_config();

    struct gradcheck_report {
        bool ok = false;
        double max_rel_error = 0.0;
        std::string worst_param;
        std::size_t worst_coord = 0;
        std::size_t coords_checked = 0;
        std::string message;
    };

    // Full-model analytic gradients against central finite differences.
    gradcheck_report run_gradcheck(model_config const& cfg, double eps,
        std::uint64_t seed);

    struct ctc_check_report {
        double max_abs_log_diff = 0.0;
        std::size_t trials = 0;
        std::size_t feasible = 0;
    };

    // Randomized dynamic-program vs brute-force comparison, T <= 6, L <= 3,
    // |G| <= 3.
    ctc_check_report run_ctc_check(std::size_t trials, std::uint64_t seed);

}

#endif
