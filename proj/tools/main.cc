#include "hstgnn/kernels.h"
#include "hstgnn/pipeline.h"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>

namespace fs = std::filesystem;

namespace {

    constexpr int exit_ok = 0;
    constexpr int exit_failure = 1;
    constexpr int exit_usage = 2;

    std::vector<std::size_t> parse_spans(std::string const& csv)
    {
        std::vector<std::size_t> spans;
        std::string tok;
        std::istringstream is(csv);
        while (std::getline(is, tok, ',')) {
            if (!tok.empty()) {
                spans.push_back(std::stoul(tok));
            }
        }
        return spans;
    }

}

int main(int argc, char** argv)
{
    CLI::App app{"hierarchical spatio-temporal graph network for sign-language-style "
                 "sequence transduction"};
    app.require_subcommand(1);

    std::string config_path;
    std::string data_dir;
    std::string out_dir;
    std::string checkpoint;
    std::string split = "dev";
    std::string input_path;
    std::string decode_out;
    std::string spans_csv = "1,3,5";
    std::uint64_t seed = 0;
    bool seed_set = false;
    double eps = 1e-5;
    double tol = 1e-5;
    double ctc_tol = 1e-9;
    std::size_t trials = 200;

    auto add_seed = [&](CLI::App* cmd) {
        cmd->add_option("--seed", seed, "override the config seed")
            ->each([&](std::string const&) { seed_set = true; });
    };

    auto* synth = app.add_subcommand("synth", "generate a synthetic corpus");
    synth->add_option("--config", config_path, "synth config file");
    synth->add_option("--out", out_dir, "output directory")->required();
    add_seed(synth);

    auto* train = app.add_subcommand("train", "train a model");
    train->add_option("--config", config_path, "model config file");
    train->add_option("--data", data_dir, "corpus directory (manifest.*.txt)")->required();
    train->add_option("--out", out_dir, "output directory")->required();
    add_seed(train);

    auto* evalc = app.add_subcommand("eval", "score a checkpoint on a split");
    evalc->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
    evalc->add_option("--data", data_dir, "corpus directory")->required();
    evalc->add_option("--split", split, "train|dev|test");

    auto* decode = app.add_subcommand("decode", "decode a manifest to glosses and text");
    decode->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
    decode->add_option("--input", input_path, "manifest file")->required();
    decode->add_option("--out", decode_out, "output file")->required();

    auto* gradcheck = app.add_subcommand("gradcheck",
        "full-model analytic vs finite-difference gradients");
    gradcheck->add_option("--config", config_path, "model config file");
    gradcheck->add_option("--eps", eps, "central difference step");
    gradcheck->add_option("--tol", tol, "max relative error to accept");
    add_seed(gradcheck);

    auto* ctc_check = app.add_subcommand("ctc-check",
        "randomized dynamic program vs literal path enumeration");
    ctc_check->add_option("--trials", trials, "instance count");
    ctc_check->add_option("--tol", ctc_tol, "max |log p| difference to accept");
    add_seed(ctc_check);

    auto* sweep = app.add_subcommand("sweep", "train and score one model per window span");
    sweep->add_option("--config", config_path, "model config file");
    sweep->add_option("--data", data_dir, "corpus directory (generated when omitted)");
    sweep->add_option("--out", out_dir, "output directory");
    sweep->add_option("--spans", spans_csv, "comma-separated odd spans");
    add_seed(sweep);

    try {
        app.parse(argc, argv);
    } catch (CLI::ParseError const& e) {
        if (e.get_exit_code() == 0) {
            return app.exit(e);
        }
        std::cerr << "error: " << e.what() << "\n";
        return exit_usage;
    }

    try {
        if (synth->parsed()) {
            dataio::synth_config cfg = config_path.empty()
                ? dataio::synth_config{}
                : pipeline::synth_config_from_file(config_path);
            if (seed_set) {
                cfg.seed = seed;
            }
            auto manifests = dataio::synth_corpus(cfg, out_dir);
            for (auto const& m : manifests) {
                std::cout << "manifest=" << m << "\n";
            }
            return exit_ok;
        }

        if (train->parsed()) {
            pipeline::model_config cfg = config_path.empty()
                ? pipeline::model_config{}
                : pipeline::model_config::from_file(config_path);
            if (seed_set) {
                cfg.seed = seed;
            }
            auto res = pipeline::train(data_dir, cfg, out_dir);
            std::cout << "best_epoch=" << res.best_epoch << "\n"
                      << "best_dev_wer=" << res.best_dev_wer << "\n"
                      << "checkpoint=" << res.best_checkpoint << "\n"
                      << "epochs_run=" << res.log.size() << "\n";
            return exit_ok;
        }

        if (evalc->parsed()) {
            auto rep = pipeline::evaluate_checkpoint(checkpoint, data_dir, split);
            metrics::write_report(std::cout, rep);
            return exit_ok;
        }

        if (decode->parsed()) {
            pipeline::model m = pipeline::load_model(checkpoint);
            auto records = dataio::load_split(input_path);
            std::ofstream os(decode_out);
            if (!os) {
                throw std::invalid_argument("decode: cannot open " + decode_out
                    + " for writing");
            }
            for (auto const& s : records) {
                auto d = pipeline::decode_sample(m, s);
                os << s.id << "\t";
                for (std::size_t i = 0; i < d.glosses.size(); ++i) {
                    os << (i ? " " : "") << d.glosses[i];
                }
                os << "\t";
                for (std::size_t i = 0; i < d.words.size(); ++i) {
                    os << (i ? " " : "") << d.words[i];
                }
                os << "\n";
            }
            return exit_ok;
        }

        if (gradcheck->parsed()) {
            pipeline::model_config cfg = config_path.empty()
                ? pipeline::tiny_gradcheck_config()
                : pipeline::model_config::from_file(config_path);
            auto rep = pipeline::run_gradcheck(cfg, eps, seed_set ? seed : cfg.seed);
            if (!rep.ok) {
                std::cerr << "error: " << rep.message << "\n";
                return exit_failure;
            }
            std::cout << "kernels=" << kernels::lane_name() << "\n"
                      << "coords_checked=" << rep.coords_checked << "\n"
                      << "max_rel_error=" << std::setprecision(6) << rep.max_rel_error
                      << "\n"
                      << "worst_param=" << rep.worst_param << "\n";
            return rep.max_rel_error < tol ? exit_ok : exit_failure;
        }

        if (ctc_check->parsed()) {
            auto rep = pipeline::run_ctc_check(trials, seed_set ? seed : 1);
            std::cout << "trials=" << rep.trials << "\n"
                      << "feasible=" << rep.feasible << "\n"
                      << "max_abs_log_diff=" << std::setprecision(6)
                      << rep.max_abs_log_diff << "\n";
            return rep.max_abs_log_diff < ctc_tol ? exit_ok : exit_failure;
        }

        if (sweep->parsed()) {
            pipeline::model_config cfg = config_path.empty()
                ? pipeline::model_config{}
                : pipeline::model_config::from_file(config_path);
            if (seed_set) {
                cfg.seed = seed;
            }
            if (out_dir.empty()) {
                out_dir = "sweep_out";
            }
            if (data_dir.empty()) {
                // default corpus so the harness is self-contained
                dataio::synth_config synth_cfg;
                synth_cfg.d_a = 16;
                synth_cfg.d_o = 16;
                if (seed_set) {
                    synth_cfg.seed = seed;
                }
                data_dir = (fs::path(out_dir) / "corpus").string();
                dataio::synth_corpus(synth_cfg, data_dir);
            }
            auto rows = pipeline::sweep_window(data_dir, cfg, parse_spans(spans_csv),
                out_dir);
            std::cout << "span\twer\tbleu4\n";
            std::ofstream table((fs::path(out_dir) / "sweep.txt").string());
            table << "span\twer\tbleu4\n";
            for (auto const& r : rows) {
                std::cout << r.span << "\t" << r.wer << "\t" << r.bleu4 << "\n";
                table << r.span << "\t" << r.wer << "\t" << r.bleu4 << "\n";
            }
            return exit_ok;
        }
    } catch (dataio::parse_error const& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_usage;
    } catch (std::invalid_argument const& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_usage;
    } catch (std::out_of_range const& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_usage;
    } catch (std::exception const& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_failure;
    }
    return exit_usage;
}
