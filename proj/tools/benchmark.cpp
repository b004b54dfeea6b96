// Compares the OpenMP kernels against their serial reference on a synthetic
// workload and checks that both produce bit-identical output.

#include <chrono>
#include <cstdio>
#include <string>
#include <vector>

#include "recbench/interactions.hpp"
#include "recbench/metrics.hpp"
#include "recbench/models.hpp"
#include "recbench/parallel.hpp"
#include "recbench/rng.hpp"

using namespace recbench;

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

bool lists_equal(const std::vector<models::RankedList>& a,
                 const std::vector<models::RankedList>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i].items != b[i].items) return false;
        for (std::size_t r = 0; r < a[i].scores.size(); ++r) {
            if (a[i].scores[r] != b[i].scores[r]) return false;  // bitwise
        }
    }
    return true;
}

}  // namespace

int main(int argc, char** argv) {
    int n_users = 2000;
    int n_items = 1500;
    int top_n = 50;
    if (argc > 1) n_users = std::stoi(argv[1]);
    if (argc > 2) n_items = std::stoi(argv[2]);

    Rng rng(7);
    std::vector<corpus::Interaction> events;
    for (int u = 0; u < n_users; ++u) {
        const int n = 5 + static_cast<int>(rng.uniform_index(20));
        for (int e = 0; e < n; ++e) {
            events.push_back({u, static_cast<int>(rng.uniform_index(n_items)), 1.0,
                              static_cast<std::int64_t>(events.size())});
        }
    }
    const auto data = models::TrainData::from_events(n_users, n_items, events);

    models::HyperParams hp;
    hp.latent_dim = 32;
    hp.epochs = 3;
    hp.seed = 11;
    const auto t_train = std::chrono::steady_clock::now();
    const models::MfModel model = models::train_mf(data, hp);
    std::printf("setup: %d users x %d items, mf trained in %.2fs\n", n_users, n_items,
                seconds_since(t_train));

    std::vector<int> users(n_users);
    std::vector<std::vector<int>> exclude(n_users);
    for (int u = 0; u < n_users; ++u) {
        users[u] = u;
        exclude[u] = data.positives[u];
    }

    const int max_threads = hardware_threads();
    std::printf("\n%-28s %10s %10s %8s\n", "kernel", "serial(s)", "omp(s)", "speedup");

    const auto t_serial = std::chrono::steady_clock::now();
    const auto serial_lists = models::recommend_all(model, users, top_n, exclude, 1);
    const double serial_rec = seconds_since(t_serial);

    const auto t_par = std::chrono::steady_clock::now();
    const auto parallel_lists = models::recommend_all(model, users, top_n, exclude, max_threads);
    const double par_rec = seconds_since(t_par);

    if (!lists_equal(serial_lists, parallel_lists)) {
        std::printf("FAIL: recommend_all outputs differ between serial and %d threads\n",
                    max_threads);
        return 1;
    }
    std::printf("%-28s %10.3f %10.3f %7.2fx\n", "recommend_all(top-50)", serial_rec, par_rec,
                serial_rec / par_rec);

    // metric suite over the produced lists
    metrics::EvalContext ctx;
    ctx.relevant.resize(n_users);
    Rng rel_rng(13);
    for (int u = 0; u < n_users; ++u) {
        for (int j = 0; j < 5; ++j) {
            ctx.relevant[u].push_back(static_cast<int>(rel_rng.uniform_index(n_items)));
        }
        std::sort(ctx.relevant[u].begin(), ctx.relevant[u].end());
        ctx.relevant[u].erase(std::unique(ctx.relevant[u].begin(), ctx.relevant[u].end()),
                              ctx.relevant[u].end());
    }
    ctx.train_popularity = data.item_popularity;
    ctx.catalog_size = n_items;
    ctx.k = 10;
    Eigen::MatrixXd feats(n_items, 16);
    for (int i = 0; i < n_items; ++i) {
        for (int c = 0; c < 16; ++c) feats(i, c) = rel_rng.normal();
    }
    ctx.item_features = feats;

    ctx.threads = 1;
    const auto t_ms = std::chrono::steady_clock::now();
    const auto r_serial = metrics::compute_metrics(serial_lists, ctx);
    const double serial_met = seconds_since(t_ms);

    ctx.threads = max_threads;
    const auto t_mp = std::chrono::steady_clock::now();
    const auto r_parallel = metrics::compute_metrics(serial_lists, ctx);
    const double par_met = seconds_since(t_mp);

    if (r_serial.recall != r_parallel.recall || r_serial.ndcg != r_parallel.ndcg ||
        r_serial.ild != r_parallel.ild) {
        std::printf("FAIL: metric values differ between serial and %d threads\n", max_threads);
        return 1;
    }
    std::printf("%-28s %10.3f %10.3f %7.2fx\n", "compute_metrics", serial_met, par_met,
                serial_met / par_met);
    std::printf("\nok: serial and %d-thread results are bit-identical\n", max_threads);
    return 0;
}
