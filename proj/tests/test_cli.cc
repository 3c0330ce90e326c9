#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "testutil.h"

#include <cstdlib>
#include <fstream>
#include <sstream>

#ifndef HSTGNN_CLI_PATH
#error "HSTGNN_CLI_PATH must be defined"
#endif

namespace {

    struct run_result {
        int exit_code = -1;
        std::string out;
        std::string err;
    };

    run_result run_cli(std::string const& args, std::string const& workdir)
    {
        std::string out_file = workdir + "/stdout.txt";
        std::string err_file = workdir + "/stderr.txt";
        std::string cmd = "cd " + workdir + " && " + HSTGNN_CLI_PATH + " " + args
            + " > " + out_file + " 2> " + err_file;
        int rc = std::system(cmd.c_str());
        run_result r;
        r.exit_code = WEXITSTATUS(rc);
        auto slurp = [](std::string const& p) {
            std::ifstream is(p);
            std::ostringstream os;
            os << is.rdbuf();
            return os.str();
        };
        r.out = slurp(out_file);
        r.err = slurp(err_file);
        return r;
    }

    void write_file(std::string const& path, std::string const& content)
    {
        std::ofstream os(path);
        os << content;
    }

}

TEST_CASE("synth, train, eval, decode run end to end")
{
    testutil::temp_dir dir;
    write_file(dir.path + "/synth.conf",
        "n_samples=10\ngloss_vocab_size=4\ntext_vocab_size=8\nframes_per_gloss=2\n"
        "d_a=6\nd_o=6\nnoise_sigma=0\nseed=5\nmin_glosses=2\nmax_glosses=3\n");
    write_file(dir.path + "/model.conf",
        "seed=3\nspan=3\nrank_p=2\nn_conv_layers=1\nn_transformer_layers=1\n"
        "d_model=6\nd_ff=12\nn_heads=2\nd_head=3\ndec_hidden=8\ngloss_emb=4\n"
        "word_emb=4\nepochs=2\n");

    auto synth = run_cli("synth --config synth.conf --out corpus", dir.path);
    CAPTURE(synth.err);
    REQUIRE(synth.exit_code == 0);
    CHECK(synth.out.find("manifest=") != std::string::npos);

    auto train = run_cli("train --config model.conf --data corpus --out run", dir.path);
    CAPTURE(train.err);
    REQUIRE(train.exit_code == 0);
    CHECK(train.out.find("best_dev_wer=") != std::string::npos);

    auto eval = run_cli(
        "eval --checkpoint run/checkpoint_best.bin --data corpus --split train",
        dir.path);
    CAPTURE(eval.err);
    REQUIRE(eval.exit_code == 0);
    for (char const* key : {"wer=", "bleu1=", "bleu4=", "brevity_penalty="}) {
        CHECK(eval.out.find(key) != std::string::npos);
    }

    auto decode = run_cli(
        "decode --checkpoint run/checkpoint_best.bin --input corpus/manifest.dev.txt "
        "--out decoded.txt",
        dir.path);
    REQUIRE(decode.exit_code == 0);
    std::ifstream is(dir.path + "/decoded.txt");
    std::string line;
    std::size_t lines = 0;
    while (std::getline(is, line)) {
        lines += 1;
        CHECK(std::count(line.begin(), line.end(), '\t') == 2);
        CHECK(line.find("synth_") == 0);
    }
    CHECK(lines >= 1);
}

TEST_CASE("usage errors exit with code 2")
{
    testutil::temp_dir dir;
    SUBCASE("unknown flag")
    {
        auto r = run_cli("train --data x --out y --frobnicate", dir.path);
        CHECK(r.exit_code == 2);
        CHECK(r.err.find("error:") != std::string::npos);
    }
    SUBCASE("missing subcommand")
    {
        auto r = run_cli("", dir.path);
        CHECK(r.exit_code == 2);
    }
    SUBCASE("nonexistent data directory names the path")
    {
        auto r = run_cli("train --data /no/such/dir --out out", dir.path);
        CHECK(r.exit_code == 2);
        CHECK(r.err.find("/no/such/dir") != std::string::npos);
    }
    SUBCASE("config schema violation")
    {
        write_file(dir.path + "/bad.conf", "bogus_key=1\n");
        auto r = run_cli("train --config bad.conf --data x --out y", dir.path);
        CHECK(r.exit_code == 2);
        CHECK(r.err.find("bogus_key") != std::string::npos);
    }
}

TEST_CASE("ctc-check prints its maximum and exits by tolerance")
{
    testutil::temp_dir dir;
    auto r = run_cli("ctc-check --trials 50", dir.path);
    CHECK(r.exit_code == 0);
    CHECK(r.out.find("max_abs_log_diff=") != std::string::npos);
    CHECK(r.out.find("trials=50") != std::string::npos);
}

TEST_CASE("gradcheck smoke: runs a micro config and reports")
{
    testutil::temp_dir dir;
    write_file(dir.path + "/micro.conf",
        "seed=1\nspan=3\nrank_p=2\nn_conv_layers=1\nn_transformer_layers=0\n"
        "d_model=4\nd_ff=8\nn_heads=1\nd_head=4\ndec_hidden=4\ngloss_emb=3\n"
        "word_emb=3\nlambda_r=0.01\n");
    // loose tolerance: this is a plumbing check, the acceptance suite runs
    // the real gate
    auto r = run_cli("gradcheck --config micro.conf --tol 1e-3", dir.path);
    CAPTURE(r.err);
    CHECK(r.exit_code == 0);
    CHECK(r.out.find("max_rel_error=") != std::string::npos);
    CHECK(r.out.find("coords_checked=") != std::string::npos);
}

TEST_CASE("identical seeded invocations produce identical outputs")
{
    testutil::temp_dir dir;
    write_file(dir.path + "/synth.conf",
        "n_samples=5\ngloss_vocab_size=3\ntext_vocab_size=7\nframes_per_gloss=2\n"
        "d_a=5\nd_o=5\nnoise_sigma=0.01\nseed=2\n");
    auto a = run_cli("synth --config synth.conf --out c1 --seed 42", dir.path);
    auto b = run_cli("synth --config synth.conf --out c2 --seed 42", dir.path);
    REQUIRE(a.exit_code == 0);
    REQUIRE(b.exit_code == 0);
    auto slurp = [&](std::string const& p) {
        std::ifstream is(dir.path + "/" + p);
        std::ostringstream os;
        os << is.rdbuf();
        return os.str();
    };
    CHECK(slurp("c1/samples/synth_0.json") == slurp("c2/samples/synth_0.json"));
    CHECK(slurp("c1/manifest.train.txt") == slurp("c2/manifest.train.txt"));
}
