#include <doctest.h>

#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "recbench/cli.hpp"
#include "recbench/error.hpp"
#include "recbench/interactions.hpp"
#include "recbench/latefusion.hpp"
#include "recbench/rng.hpp"

using namespace recbench;
namespace fs = std::filesystem;

namespace {

int run_cli(const std::vector<std::string>& args, std::string* captured_stdout = nullptr) {
    std::vector<const char*> argv{"recbench"};
    for (const auto& a : args) argv.push_back(a.c_str());

    const fs::path capture = fs::temp_directory_path() / "recbench_cli_stdout.txt";
    std::fflush(stdout);
    const int saved = dup(fileno(stdout));
    FILE* redirected = std::freopen(capture.string().c_str(), "w", stdout);
    REQUIRE(redirected != nullptr);
    const int code = cli::main(static_cast<int>(argv.size()), argv.data());
    std::fflush(stdout);
    dup2(saved, fileno(stdout));
    close(saved);
    if (captured_stdout) {
        std::ifstream in(capture);
        std::ostringstream buf;
        buf << in.rdbuf();
        *captured_stdout = buf.str();
    }
    fs::remove(capture);
    return code;
}

struct TempDir {
    fs::path dir;
    explicit TempDir(const std::string& tag) {
        dir = fs::temp_directory_path() / ("recbench_cli_" + tag);
        fs::remove_all(dir);
        fs::create_directories(dir);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(dir, ec);
    }
};

}  // namespace

TEST_CASE("cli rejects unknown subcommands and missing files with exit 2") {
    CHECK(run_cli({"frobnicate"}) == 2);
    CHECK(run_cli({"run", "--config", "/nonexistent/config.yml"}) == 2);
    CHECK(run_cli({"run", "--bogus-flag"}) == 2);
    CHECK(run_cli({"stats", "--data", "/nonexistent/data.tsv"}) == 2);
}

TEST_CASE("cli stats prints the dataset_stats values") {
    TempDir tmp("stats");
    const auto data_path = (tmp.dir / "data.tsv").string();
    {
        std::ofstream out(data_path);
        out << "1\t10\t5\t100\n1\t11\t4\t101\n2\t10\t3\t102\n2\t10\t5\t103\n";
    }
    std::string captured;
    CHECK(run_cli({"stats", "--data", data_path}, &captured) == 0);
    // same fixture as the corpus tests: 2 users, 2 items, 3 events
    CHECK(captured.find("interactions\t3") != std::string::npos);
    CHECK(captured.find("users\t2") != std::string::npos);
    CHECK(captured.find("items\t2") != std::string::npos);
    CHECK(captured.find("density\t0.75") != std::string::npos);
}

TEST_CASE("cli aggregate matches the in-process rrf on the same lists") {
    TempDir tmp("agg");
    // two systems over items a, b, c for one user
    const auto sys1 = (tmp.dir / "sys1.tsv").string();
    const auto sys2 = (tmp.dir / "sys2.tsv").string();
    {
        std::ofstream s1(sys1);
        s1 << "u\ta\t1\t0.9\nu\tb\t2\t0.8\nu\tc\t3\t0.7\n";
        std::ofstream s2(sys2);
        s2 << "u\tc\t1\t0.5\nu\ta\t2\t0.4\nu\tb\t3\t0.3\n";
    }
    const auto out_path = (tmp.dir / "fused.tsv").string();
    CHECK(run_cli({"aggregate", "--lists", sys1, sys2, "--rule", "rrf", "--out", out_path}) == 0);

    // oracle: in-process rrf over the equivalent index-space lists
    latefusion::FusionInput in;
    in.catalog_size = 3;
    models::RankedList l1;
    l1.items = {0, 1, 2};  // a, b, c
    l1.scores = {0.9, 0.8, 0.7};
    models::RankedList l2;
    l2.items = {2, 0, 1};
    l2.scores = {0.5, 0.4, 0.3};
    in.lists = {l1, l2};
    const auto meta = latefusion::rrf(in);

    const auto fused = latefusion::read_interchange(out_path);
    const auto& items = fused.by_user.at("u");
    REQUIRE(items.size() == 3);
    const std::vector<std::string> names = {"a", "b", "c"};
    for (std::size_t r = 0; r < items.size(); ++r) {
        CHECK(items[r].first == names[static_cast<std::size_t>(meta.items[r])]);
        CHECK(items[r].second == doctest::Approx(meta.fused_scores[r]).epsilon(1e-12));
    }
}

TEST_CASE("cli aggregate honors weighted borda schedules") {
    TempDir tmp("wb");
    const auto sys1 = (tmp.dir / "sys1.tsv").string();
    const auto sys2 = (tmp.dir / "sys2.tsv").string();
    {
        std::ofstream s1(sys1);
        s1 << "u\ta\t1\t2\nu\tb\t2\t1\n";
        std::ofstream s2(sys2);
        s2 << "u\tb\t1\t2\nu\ta\t2\t1\n";
    }
    const auto out_path = (tmp.dir / "fused.tsv").string();
    CHECK(run_cli({"aggregate", "--lists", sys1, sys2, "--rule", "wborda", "--weights",
                   "0.9,0.1", "--out", out_path}) == 0);
    const auto fused = latefusion::read_interchange(out_path);
    CHECK(fused.by_user.at("u")[0].first == "a");  // heavy weight on system 1
}

TEST_CASE("cli run + fuse + report drive the pipeline end to end") {
    TempDir tmp("run");
    Rng rng(12345);
    {
        std::ofstream inter(tmp.dir / "interactions.tsv");
        for (int u = 0; u < 25; ++u) {
            std::vector<int> items;
            while (items.size() < 5) {
                const int i = static_cast<int>(rng.uniform_index(15));
                if (std::find(items.begin(), items.end(), i) == items.end()) items.push_back(i);
            }
            for (std::size_t e = 0; e < items.size(); ++e) {
                inter << "u" << u << "\tit" << items[e] << "\t1\t" << (100 + u * 10 + e) << '\n';
            }
        }
        std::ofstream audio(tmp.dir / "audio.tsv");
        audio.precision(17);
        for (int i = 0; i < 15; ++i) {
            audio << "it" << i;
            for (int c = 0; c < 4; ++c) audio << '\t' << rng.normal();
            audio << '\n';
        }
        std::ofstream meta(tmp.dir / "movies.tsv");
        for (int i = 0; i < 15; ++i) {
            meta << "it" << i << "\tMovie " << i << "\t" << (i % 2 ? "Drama" : "Comedy") << '\n';
        }
    }
    auto config_text = [&](const std::string& family, const std::string& outdir,
                           int seed) {
        std::ostringstream y;
        y << "root_path: " << tmp.dir.string() << "\n"
          << "dataset: {format: tsv, path: interactions.tsv, metadata_path: movies.tsv, "
             "metadata_format: tsv}\n"
          << "split: {strategy: per_user, test_ratio: 0.4}\n"
          << "modality:\n  enabled: [audio]\n  paths: {audio: audio.tsv}\n"
          << "fusion: {operator: pca, rho: 0.95}\n"
          << "model:\n  family: " << family << "\n  hyperparams: {latent_dim: 2, epochs: 4}\n"
          << "runtime: {seed: " << seed << ", top_k: 3, list_length: 6}\n"
          << "output: {dir: " << outdir << "}\n";
        return y.str();
    };
    const auto cfg_path = (tmp.dir / "config.yml").string();
    {
        std::ofstream out(cfg_path);
        out << config_text("vbpr", "out_run", 3);
    }
    std::string captured;
    CHECK(run_cli({"run", "--config", cfg_path}, &captured) == 0);
    CHECK(captured.find("model,fusion,stage") != std::string::npos);
    CHECK(fs::exists(tmp.dir / "out_run" / "results.csv"));
    CHECK(fs::exists(tmp.dir / "out_run" / "ranked_lists.tsv"));
    CHECK(fs::exists(tmp.dir / "out_run" / "manifest.json"));
    CHECK(fs::exists(tmp.dir / "out_run" / "fusion.json"));

    CHECK(run_cli({"fuse", "--config", cfg_path, "--out", (tmp.dir / "fused").string()},
                  &captured) == 0);
    CHECK(fs::exists(tmp.dir / "fused" / "fused_features.tsv"));
    CHECK(fs::exists(tmp.dir / "fused" / "fusion.json"));

    // second run with a different seed, then an aggregate report over both
    {
        std::ofstream out(cfg_path);
        out << config_text("mf", "out_run2", 4);
    }
    CHECK(run_cli({"run", "--config", cfg_path}, &captured) == 0);
    CHECK(run_cli({"report", "--runs", tmp.dir.string(),
                   "--out", (tmp.dir / "report.csv").string()}, &captured) == 0);
    CHECK(captured.find("model,n_runs,auc_ndcg_coldrate,auc_ndcg_coverage") !=
          std::string::npos);
    CHECK(fs::exists(tmp.dir / "report.csv"));
}
