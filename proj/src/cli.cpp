#include "recbench/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "recbench/bench.hpp"
#include "recbench/earlyfusion.hpp"
#include "recbench/error.hpp"
#include "recbench/interactions.hpp"
#include "recbench/latefusion.hpp"
#include "recbench/metrics.hpp"

namespace recbench::cli {

namespace fs = std::filesystem;

namespace {

int cmd_run(const std::string& config_path, bool lax) {
    if (!fs::exists(config_path)) {
        std::cerr << "error: config file not found: " << config_path << "\n";
        return 2;
    }
    const bench::ExperimentConfig cfg = bench::load_config(config_path, !lax);
    const bench::RunArtifacts art = bench::run_experiment(cfg);
    for (const auto& w : art.warnings) std::cerr << "warning: " << w << "\n";
    std::cout << bench::kResultsCsvHeader << "\n"
              << bench::metric_report_csv_row(art.report) << "\n";
    std::cerr << "results: " << art.results_csv << "\n"
              << "lists:   " << art.lists_path << "\n"
              << "manifest: " << art.manifest_path << "\n";
    if (!art.fusion_path.empty()) std::cerr << "fusion:  " << art.fusion_path << "\n";
    return 0;
}

int cmd_stats(const std::string& data_path, const std::string& format) {
    if (!fs::exists(data_path)) {
        std::cerr << "error: data file not found: " << data_path << "\n";
        return 2;
    }
    const auto log = corpus::load_interactions(
        data_path, format == "movielens_dat" ? corpus::LogFormat::movielens_dat
                                             : corpus::LogFormat::tsv);
    const auto s = corpus::dataset_stats(log);
    std::cout.precision(10);
    std::cout << "interactions\t" << s.n_interactions << "\n"
              << "users\t" << s.n_users << "\n"
              << "items\t" << s.n_items << "\n"
              << "avg_per_user\t" << s.avg_per_user << "\n"
              << "avg_per_item\t" << s.avg_per_item << "\n"
              << "density\t" << s.density << "\n";
    return 0;
}

int cmd_fuse(const std::string& config_path, const std::string& out_dir) {
    if (!fs::exists(config_path)) {
        std::cerr << "error: config file not found: " << config_path << "\n";
        return 2;
    }
    const bench::ExperimentConfig cfg = bench::load_config(config_path);
    if (cfg.modality.enabled.empty()) {
        std::cerr << "error: fuse needs at least one enabled modality\n";
        return 2;
    }
    std::vector<textprep::EmbeddingTable> tables;
    for (const char* name : {"audio", "visual", "text"}) {
        if (std::find(cfg.modality.enabled.begin(), cfg.modality.enabled.end(), name) ==
            cfg.modality.enabled.end()) {
            continue;
        }
        const std::string variant = std::string(name) == "audio"
                                        ? cfg.modality.audio_variant
                                        : (std::string(name) == "visual" ? cfg.modality.visual_variant
                                                                         : cfg.modality.text_variant);
        fs::path p = fs::path(cfg.modality.paths.at(name));
        if (p.is_relative()) p = fs::path(cfg.root_path) / p;
        auto t = textprep::load_embedding_table(p.string(), textprep::modality_from_string(name),
                                                variant);
        if (cfg.modality.normalize) t = textprep::l2_normalize(t).table;
        tables.push_back(std::move(t));
    }
    const auto aligned = earlyfusion::align(tables);
    const std::string op = cfg.fusion.present ? cfg.fusion.op : "concat";
    earlyfusion::FusedFeatures fused;
    if (cfg.fusion.present && cfg.fusion.stage == "mid") {
        fused = earlyfusion::fuse_mid(aligned, earlyfusion::fusion_op_from_string(op),
                                      cfg.fusion.rho.value_or(0.95), cfg.fusion.k.value_or(40));
    } else if (op == "pca") {
        fused = earlyfusion::fit_apply_pca(aligned, cfg.fusion.rho.value_or(0.95));
    } else if (op == "cca") {
        fused = earlyfusion::fit_apply_cca(aligned, cfg.fusion.k.value_or(40));
    } else {
        fused = earlyfusion::fuse_concat(aligned);
    }

    const fs::path dir = out_dir.empty() ? fs::path(cfg.root_path) / cfg.output_dir
                                         : fs::path(out_dir);
    fs::create_directories(dir);
    const std::string table_path = (dir / "fused_features.tsv").string();
    std::ofstream out(table_path, std::ios::binary);
    if (!out) throw DataError("cannot write " + table_path);
    out.precision(17);
    for (std::size_t r = 0; r < fused.item_ids.size(); ++r) {
        out << fused.item_ids[r];
        for (Eigen::Index c = 0; c < fused.matrix.cols(); ++c) {
            out << '\t' << fused.matrix(static_cast<Eigen::Index>(r), c);
        }
        out << '\n';
    }
    std::cerr << "fused " << fused.item_ids.size() << " items to dim " << fused.dim() << "\n";
    std::cout << table_path << "\n";
    if (fused.projection) {
        const std::string proj_path = (dir / "fusion.json").string();
        earlyfusion::save_projection(*fused.projection, proj_path);
        std::cout << proj_path << "\n";
    }
    return 0;
}

int cmd_aggregate(const std::vector<std::string>& list_paths, const std::string& rule_name,
                  const std::string& weights_csv, const std::string& schedule, int rrf_k,
                  int catalog, const std::string& out_path) {
    for (const auto& p : list_paths) {
        if (!fs::exists(p)) {
            std::cerr << "error: ranked-list file not found: " << p << "\n";
            return 2;
        }
    }
    const auto rule = latefusion::fusion_rule_from_string(rule_name);
    std::vector<latefusion::InterchangeLists> systems;
    for (const auto& p : list_paths) systems.push_back(latefusion::read_interchange(p));

    // Users present in every file are fused; others are skipped with a note.
    std::map<std::string, int> user_count;
    for (const auto& s : systems) {
        for (const auto& [user, items] : s.by_user) ++user_count[user];
    }
    std::vector<std::string> users;
    int skipped = 0;
    for (const auto& [user, count] : user_count) {
        if (count == static_cast<int>(systems.size())) {
            users.push_back(user);
        } else {
            ++skipped;
        }
    }
    if (users.empty()) {
        std::cerr << "error: no user appears in every ranked-list file\n";
        return 2;
    }
    if (skipped) std::cerr << "warning: " << skipped << " users missing from some file, skipped\n";

    // Item vocabulary across all files.
    std::map<std::string, int> item_index;
    std::vector<std::string> item_ids;
    for (const auto& s : systems) {
        for (const auto& [user, items] : s.by_user) {
            for (const auto& [item, scr] : items) {
                if (item_index.try_emplace(item, static_cast<int>(item_ids.size())).second) {
                    item_ids.push_back(item);
                }
            }
        }
    }

    std::optional<std::vector<double>> weights;
    if (rule == latefusion::FusionRule::weighted_borda) {
        if (!weights_csv.empty()) {
            std::vector<double> w;
            std::stringstream ss(weights_csv);
            std::string tok;
            while (std::getline(ss, tok, ',')) w.push_back(std::stod(tok));
            weights = std::move(w);
        } else {
            weights = latefusion::weight_schedule(schedule.empty() ? "uniform" : schedule,
                                                  systems.size());
        }
    }

    const int catalog_size = catalog > 0 ? catalog : static_cast<int>(item_ids.size());
    std::vector<std::pair<std::string, latefusion::MetaRanking>> fused;
    for (const auto& user : users) {
        latefusion::FusionInput input;
        input.catalog_size = catalog_size;
        input.rrf_k = rrf_k;
        input.weights = weights;
        for (const auto& s : systems) {
            models::RankedList list;
            list.user = 0;
            for (const auto& [item, scr] : s.by_user.at(user)) {
                list.items.push_back(item_index.at(item));
                list.scores.push_back(scr);
            }
            input.lists.push_back(std::move(list));
        }
        fused.emplace_back(user, latefusion::fuse(input, rule));
    }
    latefusion::write_interchange(out_path, fused, item_ids);
    std::cerr << "fused " << users.size() << " users from " << systems.size() << " systems into "
              << out_path << "\n";
    return 0;
}

int cmd_report(const std::string& runs_dir, const std::string& out_path) {
    if (!fs::exists(runs_dir)) {
        std::cerr << "error: runs directory not found: " << runs_dir << "\n";
        return 2;
    }
    // Collect rows from every results CSV under the directory.
    std::vector<std::map<std::string, std::string>> rows;
    std::vector<std::string> header;
    {
        std::stringstream hs(bench::kResultsCsvHeader);
        std::string col;
        while (std::getline(hs, col, ',')) header.push_back(col);
    }
    for (const auto& entry : fs::recursive_directory_iterator(runs_dir)) {
        if (!entry.is_regular_file() || entry.path().extension() != ".csv") continue;
        std::ifstream in(entry.path());
        std::string line;
        if (!std::getline(in, line)) continue;
        if (line != bench::kResultsCsvHeader) continue;  // not a results file
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            std::vector<std::string> fields;
            std::stringstream ls(line);
            std::string f;
            while (std::getline(ls, f, ',')) fields.push_back(f);
            fields.resize(header.size());
            std::map<std::string, std::string> row;
            for (std::size_t i = 0; i < header.size(); ++i) row[header[i]] = fields[i];
            rows.push_back(std::move(row));
        }
    }
    if (rows.empty()) {
        std::cerr << "error: no results CSV rows found under " << runs_dir << "\n";
        return 2;
    }

    // Group by model; each run is one point on the model's tradeoff curves.
    std::map<std::string, std::vector<std::map<std::string, std::string>>> groups;
    for (auto& row : rows) groups[row["model"]].push_back(row);

    std::ostringstream out;
    out << "model,n_runs,auc_ndcg_coldrate,auc_ndcg_coverage\n";
    for (const auto& [model, group] : groups) {
        auto collect = [&](const std::string& xcol) {
            std::vector<std::pair<double, double>> pts;
            for (const auto& row : group) {
                const auto& x = row.at(xcol);
                const auto& y = row.at("ndcg");
                if (x.empty() || y.empty()) continue;
                pts.emplace_back(std::stod(x), std::stod(y));
            }
            return pts;
        };
        auto auc_or_blank = [&](const std::string& xcol) -> std::string {
            const auto pts = collect(xcol);
            try {
                std::ostringstream v;
                v.precision(17);
                v << metrics::tradeoff_auc(pts);
                return v.str();
            } catch (const Error& e) {
                std::cerr << "warning: model " << model << ", " << xcol << ": " << e.what()
                          << "\n";
                return "";
            }
        };
        out << model << ',' << group.size() << ',' << auc_or_blank("coldrate") << ','
            << auc_or_blank("coverage") << "\n";
    }
    std::cout << out.str();
    if (!out_path.empty()) {
        std::ofstream f(out_path, std::ios::binary);
        if (!f) throw DataError("cannot write " + out_path);
        f << out.str();
        std::cerr << "report written to " << out_path << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, const char* const* argv) {
    CLI::App app{"multimodal top-N recommendation benchmark"};
    app.require_subcommand(1);

    std::string config_path, data_path, out_dir, out_path;
    std::string format = "tsv";
    bool lax = false;
    auto* run = app.add_subcommand("run", "execute the full pipeline from a config file");
    run->add_option("--config", config_path, "experiment config (YAML)")->required();
    run->add_flag("--lax", lax, "warn on unknown config keys instead of rejecting");

    auto* stats = app.add_subcommand("stats", "dataset statistics for an interaction file");
    stats->add_option("--data", data_path, "interaction file")->required();
    stats->add_option("--format", format, "tsv | movielens_dat")
        ->check(CLI::IsMember({"tsv", "movielens_dat"}));

    auto* fuse = app.add_subcommand("fuse", "early fusion only; emits the fused feature table");
    fuse->add_option("--config", config_path, "experiment config (YAML)")->required();
    fuse->add_option("--out", out_dir, "output directory (default: config output dir)");

    std::vector<std::string> list_paths;
    std::string rule = "borda", weights_csv, schedule;
    int rrf_k = 60, catalog = 0;
    auto* agg = app.add_subcommand("aggregate", "late-fuse ranked-list files");
    agg->add_option("--lists", list_paths, "ranked-list interchange files (one per system)")
        ->required()
        ->expected(1, -1);
    agg->add_option("--rule", rule, "borda | wborda | avgrank | rrf")
        ->check(CLI::IsMember({"borda", "wborda", "avgrank", "rrf"}));
    agg->add_option("--weights", weights_csv, "comma-separated weights (wborda)");
    agg->add_option("--schedule", schedule,
                    "weight schedule: uniform|linear|harmonic|log|exp|quadratic (wborda)");
    agg->add_option("--rrf-k", rrf_k, "rrf constant (default 60)");
    agg->add_option("--catalog", catalog, "catalog size for Borda (default: distinct items)");
    agg->add_option("--out", out_path, "output ranked-list file")->required();

    std::string runs_dir;
    auto* report = app.add_subcommand("report", "aggregate results CSVs and tradeoff AUCs");
    report->add_option("--runs", runs_dir, "directory of results CSVs")->required();
    report->add_option("--out", out_path, "write the report CSV here too");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n" << app.help() << "\n";
        return 2;
    }

    try {
        if (run->parsed()) return cmd_run(config_path, lax);
        if (stats->parsed()) return cmd_stats(data_path, format);
        if (fuse->parsed()) return cmd_fuse(config_path, out_dir);
        if (agg->parsed()) {
            return cmd_aggregate(list_paths, rule, weights_csv, schedule, rrf_k, catalog,
                                 out_path);
        }
        if (report->parsed()) return cmd_report(runs_dir, out_path);
    } catch (const ValidationError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const ArgumentError& e) {
        std::cerr << "argument error: " << e.what() << "\n";
        return 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}

}  // namespace recbench::cli
