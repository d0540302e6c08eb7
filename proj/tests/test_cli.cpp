#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "msdyn/dataset.hpp"

#ifndef MSDYN_CLI_PATH
#error "MSDYN_CLI_PATH must be defined"
#endif

namespace fs = std::filesystem;

namespace {

struct RunResult {
    int exit_code;
    std::string output;  // stdout + stderr
};

RunResult run(const std::string& args, const std::string& env = "") {
    const std::string out_file = "/tmp/msdyn_cli_out.txt";
    std::string cmd = env + " " + std::string(MSDYN_CLI_PATH) + " " + args + " > " + out_file +
                      " 2>&1";
    const int status = std::system(cmd.c_str());
    std::ifstream in(out_file);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return {WEXITSTATUS(status), text};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::path("/tmp") / ("msdyn_cli_" + name)) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("help exits zero for the app and every subcommand") {
    CHECK(run("--help").exit_code == 0);
    for (const char* sub :
         {"gen", "train", "eval", "gridsearch", "linear-lab", "sigmoid-lab"}) {
        RunResult r = run(std::string(sub) + " --help");
        CHECK(r.exit_code == 0);
        CHECK(r.output.find("--help") != std::string::npos);
    }
}

TEST_CASE("usage errors exit one") {
    CHECK(run("").exit_code == 1);                         // missing subcommand
    CHECK(run("gen --out /tmp/x.csv --frobnicate").exit_code == 1);
    CHECK(run("train --out-dir /tmp/x").exit_code == 1);   // missing required --data
    CHECK(run("explode").exit_code == 1);
}

TEST_CASE("missing input files exit two and name the path") {
    TempDir dir("missing");
    RunResult r = run("train --data /nonexistent/data.csv --model linear --out-dir " +
                      (dir.path / "run").string());
    CHECK(r.exit_code == 2);
    CHECK(r.output.find("/nonexistent/data.csv") != std::string::npos);
}

TEST_CASE("gen is deterministic and refuses to overwrite without --force") {
    TempDir dir("gen");
    const fs::path out = dir.path / "data.csv";
    const std::string base = "gen --env linear --theta 0.7 --episodes 4 --horizon 8 --seed 5 "
                             "--out " + out.string();
    REQUIRE(run(base).exit_code == 0);
    const std::string first = slurp(out);
    CHECK(fs::exists(dir.path / "data.csv.config"));

    // rerun refuses
    RunResult refuse = run(base);
    CHECK(refuse.exit_code == 2);
    CHECK(refuse.output.find("--force") != std::string::npos);
    CHECK(slurp(out) == first);

    // forced rerun is byte-identical
    REQUIRE(run(base + " --force").exit_code == 0);
    CHECK(slurp(out) == first);

    // different seed differs
    const fs::path out2 = dir.path / "data2.csv";
    REQUIRE(run("gen --env linear --theta 0.7 --episodes 4 --horizon 8 --seed 6 --out " +
                out2.string()).exit_code == 0);
    CHECK(slurp(out2) != first);
}

TEST_CASE("seed precedence: flag over MSDYN_SEED over default") {
    TempDir dir("seed");
    auto gen = [&](const std::string& name, const std::string& extra, const std::string& env) {
        const fs::path out = dir.path / name;
        REQUIRE(run("gen --env linear --episodes 3 --horizon 6 --out " + out.string() + " " +
                    extra, env).exit_code == 0);
        return slurp(out);
    };
    const std::string flag7 = gen("a.csv", "--seed 7", "");
    const std::string env7 = gen("b.csv", "", "MSDYN_SEED=7");
    const std::string flag_wins = gen("c.csv", "--seed 7", "MSDYN_SEED=8");
    const std::string env8 = gen("d.csv", "", "MSDYN_SEED=8");
    const std::string dflt = gen("e.csv", "", "");
    const std::string seed42 = gen("f.csv", "--seed 42", "");
    CHECK(env7 == flag7);
    CHECK(flag_wins == flag7);
    CHECK(env8 != flag7);
    CHECK(dflt == seed42);
}

TEST_CASE("zero noise makes observations equal states") {
    TempDir dir("noise0");
    const fs::path out = dir.path / "data.csv";
    REQUIRE(run("gen --env cartpole --episodes 2 --horizon 10 --noise 0 --seed 3 --out " +
                out.string()).exit_code == 0);
    msdyn::TrajectoryDataset ds = msdyn::load_dataset(out.string());
    for (const auto& tr : ds.trajectories) CHECK(tr.observations == tr.states);
}

TEST_CASE("train, eval and rerun byte-identity") {
    TempDir dir("train");
    const fs::path data = dir.path / "data.csv";
    REQUIRE(run("gen --env linear --theta 0.78 --episodes 10 --horizon 10 --seed 11 --out " +
                data.string()).exit_code == 0);

    const fs::path run1 = dir.path / "run1";
    const std::string targs = "train --data " + data.string() +
                              " --model linear --h 2 --beta 0.5 --epochs 30 --lr 0.05 "
                              "--seed 4 --out-dir ";
    REQUIRE(run(targs + run1.string()).exit_code == 0);
    for (const char* f : {"model.ckpt", "train_record.json", "train.log", "resolved.config"})
        CHECK(fs::exists(run1 / f));

    // refusal without --force
    CHECK(run(targs + run1.string()).exit_code == 2);

    // rerun into a fresh directory: checkpoint and record are byte-identical
    const fs::path run2 = dir.path / "run2";
    REQUIRE(run(targs + run2.string()).exit_code == 0);
    CHECK(slurp(run1 / "model.ckpt") == slurp(run2 / "model.ckpt"));
    CHECK(slurp(run1 / "train_record.json") == slurp(run2 / "train_record.json"));

    // evaluation emits the curve and summary
    const fs::path ev = dir.path / "eval";
    RunResult er = run("eval --model " + (run1 / "model.ckpt").string() + " --data " +
                       data.string() + " --H 5 --millesimal --out-dir " + ev.string());
    REQUIRE(er.exit_code == 0);
    const std::string curve = slurp(ev / "r2_curve.csv");
    CHECK(curve.rfind("h,r2,r2_dim_0", 0) == 0);
    CHECK(slurp(ev / "summary.json").find("r2_bar") != std::string::npos);
    CHECK(fs::exists(ev / "resolved.config"));

    // eval rerun is byte-identical too
    const fs::path ev2 = dir.path / "eval2";
    REQUIRE(run("eval --model " + (run1 / "model.ckpt").string() + " --data " + data.string() +
                " --H 5 --millesimal --out-dir " + ev2.string()).exit_code == 0);
    CHECK(slurp(ev2 / "r2_curve.csv") == curve);
    CHECK(slurp(ev2 / "summary.json") == slurp(ev / "summary.json"));
}

TEST_CASE("config file round trip") {
    TempDir dir("config");
    const fs::path data = dir.path / "data.csv";
    REQUIRE(run("gen --env linear --theta 0.6 --episodes 8 --horizon 8 --seed 2 --out " +
                data.string()).exit_code == 0);

    const fs::path run1 = dir.path / "run1";
    REQUIRE(run("train --data " + data.string() +
                " --model linear --h 2 --epochs 10 --lr 0.05 --seed 9 --out-dir " +
                run1.string()).exit_code == 0);

    // replay from the resolved config, overriding only the output directory
    const fs::path run2 = dir.path / "run2";
    REQUIRE(run("--config " + (run1 / "resolved.config").string() + " train --out-dir " +
                run2.string()).exit_code == 0);
    CHECK(slurp(run1 / "model.ckpt") == slurp(run2 / "model.ckpt"));

    // unknown config keys are rejected
    const fs::path bad = dir.path / "bad.config";
    std::ofstream(bad) << "[train]\nfrobnicate = 1\n";
    RunResult r = run("--config " + bad.string() + " train --data " + data.string() +
                      " --out-dir " + (dir.path / "run3").string());
    CHECK(r.exit_code == 1);
}

TEST_CASE("gridsearch on a small linear dataset") {
    TempDir dir("grid");
    const fs::path data = dir.path / "data.csv";
    REQUIRE(run("gen --env linear --theta 0.78 --episodes 9 --horizon 10 --seed 13 --out " +
                data.string()).exit_code == 0);
    const fs::path out = dir.path / "gs";
    RunResult r = run("gridsearch --data " + data.string() +
                      " --model linear --h 2 --grid 0.5,1.0 --folds 2 --H 4 --epochs 40 "
                      "--lr 0.05 --seed 21 --out-dir " + out.string());
    REQUIRE(r.exit_code == 0);
    const std::string table = slurp(out / "gridsearch.csv");
    CHECK(table.rfind("h,beta,fold,r2bar", 0) == 0);
    const std::string summary = slurp(out / "summary.json");
    CHECK(summary.find("selected_beta") != std::string::npos);
}
