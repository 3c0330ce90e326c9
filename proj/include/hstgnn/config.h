#ifndef HSTGNN_CONFIG_H
#define HSTGNN_CONFIG_H

#include "hstgnn/dataio.h"
#include "hstgnn/decoder.h"
#include "hstgnn/graphs.h"
#include "hstgnn/layers.h"
#include "hstgnn/losses.h"

#include <map>
#include <string>

namespace pipeline {

    // Flat key=value text; '#' starts a comment line. Later keys override
    // earlier ones.
    std::map<std::string, std::string> read_kv_file(std::string const& path);

    struct model_config {
        std::uint64_t seed = 1;

        std::size_t span = 3;
        std::size_t rank_p = 8;
        graphs::nonlinearity adjacency_sigma = graphs::nonlinearity::sigmoid;
        graphs::nonlinearity fusion_sigma = graphs::nonlinearity::relu;

        layers::encoder_config enc;
        decoder::decoder_config dec;
        losses::loss_weights weights;

        double lr = 0.001;
        double beta1 = 0.9;
        double beta2 = 0.999;
        double adam_epsilon = 1e-8;
        std::size_t epochs = 30;

        // overfit-harness controls: when eval_train_every > 0, training
        // stops once the train split reaches both targets
        std::size_t eval_train_every = 0;
        double stop_train_wer = 0.0;
        double stop_train_bleu4 = 1.0;

        void validate() const;

        // Unknown keys are rejected; every field is addressable.
        static model_config from_map(std::map<std::string, std::string> const& kv);
        static model_config from_file(std::string const& path);
        std::map<std::string, std::string> to_map() const;
        void save(std::string const& path) const;
    };

    dataio::synth_config synth_config_from_map(std::map<std::string, std::string> const& kv);
    dataio::synth_config synth_config_from_file(std::string const& path);

}

#endif
