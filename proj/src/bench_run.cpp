#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "recbench/bench.hpp"
#include "recbench/error.hpp"
#include "recbench/latefusion.hpp"
#include "recbench/rng.hpp"
#include "recbench/textprep.hpp"

namespace recbench::bench {

namespace fs = std::filesystem;

const char* kResultsCsvHeader =
    "model,fusion,stage,text_variant,augmented,audio_variant,visual_variant,seed,k,"
    "recall,ndcg,hitrate,coverage,coldrate,novelty,ild,calibration_bias,train_seconds";

namespace {

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string fmt(const std::optional<double>& v) { return v ? fmt(*v) : std::string(); }

std::string resolve(const std::string& root, const std::string& path) {
    if (path.empty()) return path;
    fs::path p(path);
    if (p.is_absolute()) return path;
    return (fs::path(root) / p).string();
}

struct StageClock {
    std::vector<std::pair<std::string, double>>& timings;
    std::string name;
    std::chrono::steady_clock::time_point start;
    StageClock(std::vector<std::pair<std::string, double>>& t, std::string n)
        : timings(t), name(std::move(n)), start(std::chrono::steady_clock::now()) {}
    ~StageClock() {
        timings.emplace_back(
            name, std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
    }
};

[[noreturn]] void stage_fail(const std::string& stage, const std::exception& e) {
    throw Error("stage " + stage + ": " + e.what());
}

std::unique_ptr<models::Recommender> train_for_run(const ExperimentConfig& cfg,
                                                   const models::TrainData& data,
                                                   const models::ContentFeatures& features,
                                                   const models::HyperParams& hp) {
    const std::string& family = cfg.model.family;
    if (family == "mf") return std::make_unique<models::MfModel>(models::train_mf(data, hp));
    if (family == "vaecf")
        return std::make_unique<models::VaecfModel>(models::train_vaecf(data, hp));
    return std::make_unique<models::ContentModel>(models::train_content(
        data, features, models::content_variant_from_string(family), hp));
}

}  // namespace

std::string metric_report_csv_row(const metrics::MetricReport& r) {
    std::ostringstream os;
    os << r.model << ',' << r.fusion << ',' << r.stage << ',' << r.text_variant << ','
       << (r.augmented ? "true" : "false") << ',' << r.audio_variant << ',' << r.visual_variant
       << ',' << r.seed << ',' << r.k << ',' << fmt(r.recall) << ',' << fmt(r.ndcg) << ','
       << fmt(r.hitrate) << ',' << fmt(r.coverage) << ',' << fmt(r.coldrate) << ','
       << fmt(r.novelty) << ',' << fmt(r.ild) << ',' << fmt(r.calibration_bias) << ','
       << fmt(r.train_seconds);
    return os.str();
}

RunArtifacts run_experiment(const ExperimentConfig& cfg) {
    if (cfg.fusion.present && cfg.fusion.stage == "late") {
        throw ValidationError(
            "fusion.stage 'late' merges ranked lists after training; run each model and use "
            "the 'aggregate' subcommand on the ranked-list files");
    }
    const bool model_uses_features =
        cfg.model.family == "vbpr" || cfg.model.family == "vmf" || cfg.model.family == "amr";
    if (model_uses_features && cfg.modality.enabled.empty()) {
        throw ValidationError("model.family '" + cfg.model.family +
                              "' needs item features; enable at least one modality");
    }

    RunArtifacts art;
    art.warnings = cfg.load_warnings;
    std::vector<std::pair<std::string, double>> timings;
    std::vector<std::string> created_files;
    const fs::path outdir = fs::path(resolve(cfg.root_path, cfg.output_dir));

    try {
        // ---- stage 1: ingestion, k-core -----------------------------------
        corpus::InteractionLog log;
        try {
            StageClock clock(timings, "ingest");
            log = corpus::load_interactions(
                resolve(cfg.root_path, cfg.dataset.path),
                cfg.dataset.format == "movielens_dat" ? corpus::LogFormat::movielens_dat
                                                      : corpus::LogFormat::tsv);
            if (cfg.split.k_core >= 2 && cfg.split.k_core_order == "before_alignment") {
                log = corpus::k_core_filter(log, cfg.split.k_core);
            }
        } catch (const Error& e) {
            stage_fail("ingest", e);
        }

        // ---- stage 2: text enrichment + embedding tables ------------------
        std::vector<textprep::ItemMetadata> metadata;
        std::unordered_map<std::string, const textprep::ItemMetadata*> meta_by_id;
        std::vector<textprep::EmbeddingTable> tables;
        try {
            StageClock clock(timings, "textprep");
            if (!cfg.dataset.metadata_path.empty()) {
                metadata = textprep::load_metadata(
                    resolve(cfg.root_path, cfg.dataset.metadata_path),
                    cfg.dataset.metadata_format == "movielens_dat");
                for (const auto& m : metadata) meta_by_id.emplace(m.item_id, &m);
            }
            for (const char* name : {"audio", "visual", "text"}) {
                if (std::find(cfg.modality.enabled.begin(), cfg.modality.enabled.end(), name) ==
                    cfg.modality.enabled.end()) {
                    continue;
                }
                const std::string variant = std::string(name) == "audio"
                                                ? cfg.modality.audio_variant
                                                : (std::string(name) == "visual"
                                                       ? cfg.modality.visual_variant
                                                       : cfg.modality.text_variant);
                textprep::EmbeddingTable t = textprep::load_embedding_table(
                    resolve(cfg.root_path, cfg.modality.paths.at(name)),
                    textprep::modality_from_string(name), variant);
                if (cfg.modality.normalize) {
                    auto norm = textprep::l2_normalize(t);
                    if (!norm.zero_rows.empty()) {
                        art.warnings.push_back(std::string(name) + " table has " +
                                               std::to_string(norm.zero_rows.size()) +
                                               " zero rows left unnormalized");
                    }
                    t = std::move(norm.table);
                }
                tables.push_back(std::move(t));
            }
            if (cfg.modality.augmentation) {
                if (metadata.empty()) {
                    art.warnings.push_back(
                        "modality.augmentation is on but dataset.metadata_path is missing; "
                        "no synopses generated");
                } else {
                    fs::create_directories(outdir);
                    const std::string transcript_path = (outdir / "transcripts.jsonl").string();
                    std::error_code ec;
                    fs::remove(transcript_path, ec);
                    textprep::TranscriptLog tlog(transcript_path);
                    created_files.push_back(transcript_path);
                    textprep::StubSynopsisProvider provider;
                    int generated = 0;
                    for (const auto& id : log.item_ids()) {
                        auto it = meta_by_id.find(id);
                        if (it == meta_by_id.end()) continue;
                        const auto text = textprep::augment_synopsis(*it->second, provider);
                        tlog.append(text);
                        ++generated;
                    }
                    art.warnings.push_back("generated " + std::to_string(generated) +
                                           " synopses with provider 'stub'");
                }
            }
        } catch (const Error& e) {
            stage_fail("textprep", e);
        }

        // ---- stage 3: alignment + fusion, catalog intersection -------------
        std::optional<earlyfusion::FusedFeatures> fused;
        std::optional<earlyfusion::AlignedFeatures> aligned_blocks;
        models::ContentFeatures features;
        // Rebuilds the index-space feature matrices for the current log.
        auto gather_features = [&](const corpus::InteractionLog& current) {
            models::ContentFeatures out_f;
            std::unordered_map<std::string, int> row_of;
            for (std::size_t i = 0; i < fused->item_ids.size(); ++i) {
                row_of.emplace(fused->item_ids[i], static_cast<int>(i));
            }
            out_f.fused.resize(current.num_items(), fused->matrix.cols());
            for (int i = 0; i < current.num_items(); ++i) {
                auto it = row_of.find(current.item_id(i));
                if (it == row_of.end()) {
                    throw DataError("item " + current.item_id(i) + " has no feature row");
                }
                out_f.fused.row(i) = fused->matrix.row(it->second);
            }
            for (const auto& block : aligned_blocks->blocks) {
                Eigen::MatrixXd b(current.num_items(), block.matrix.cols());
                for (int i = 0; i < current.num_items(); ++i) {
                    b.row(i) = block.matrix.row(row_of.at(current.item_id(i)));
                }
                out_f.blocks.push_back(std::move(b));
            }
            return out_f;
        };
        try {
            StageClock clock(timings, "fusion");
            if (!tables.empty()) {
                const earlyfusion::AlignedFeatures aligned = earlyfusion::align(tables);
                const std::string op = cfg.fusion.present ? cfg.fusion.op : "concat";
                const double rho = cfg.fusion.rho.value_or(0.95);
                const int k = cfg.fusion.k.value_or(40);
                if (cfg.fusion.present && cfg.fusion.stage == "mid") {
                    fused = earlyfusion::fuse_mid(aligned,
                                                  earlyfusion::fusion_op_from_string(op), rho, k);
                } else if (op == "pca") {
                    fused = earlyfusion::fit_apply_pca(aligned, rho);
                } else if (op == "cca") {
                    int split_dim = 0;
                    if (cfg.fusion.cca_split == "modality" && aligned.blocks.size() >= 2) {
                        // boundary before the last concatenated block
                        split_dim = 0;
                        const auto dims = aligned.block_dims();
                        for (std::size_t bi = 0; bi + 1 < dims.size(); ++bi) {
                            split_dim += dims[bi];
                        }
                    }
                    fused = earlyfusion::fit_apply_cca(aligned, k, split_dim);
                } else {
                    fused = earlyfusion::fuse_concat(aligned);
                }

                // Restrict the catalog to items that have features.
                std::set<std::string> keep(fused->item_ids.begin(), fused->item_ids.end());
                std::vector<std::size_t> kept_events;
                for (std::size_t idx = 0; idx < log.num_events(); ++idx) {
                    if (keep.count(log.item_id(log.events()[idx].item))) kept_events.push_back(idx);
                }
                if (kept_events.empty()) {
                    throw DataError("no interaction references an item with features");
                }
                if (kept_events.size() != log.num_events()) {
                    art.warnings.push_back(
                        std::to_string(log.num_events() - kept_events.size()) +
                        " events dropped: items lack modality features");
                }
                log = corpus::sublog(log, kept_events);

                aligned_blocks = aligned;
                features = gather_features(log);
            }
            if (cfg.fusion.present &&
                (cfg.model.family == "mf" || cfg.model.family == "vaecf")) {
                art.warnings.push_back("fusion block ignored by model '" + cfg.model.family +
                                       "' (interaction-only); features still feed the metrics");
            }
        } catch (const Error& e) {
            stage_fail("fusion", e);
        }

        if (cfg.split.k_core >= 2 && cfg.split.k_core_order == "after_alignment") {
            try {
                StageClock clock(timings, "k_core");
                const auto before = log.num_events();
                log = corpus::k_core_filter(log, cfg.split.k_core);
                if (!tables.empty()) features = gather_features(log);
                if (before != log.num_events()) {
                    art.warnings.push_back(
                        "k-core after alignment dropped " +
                        std::to_string(before - log.num_events()) + " events");
                }
            } catch (const Error& e) {
                stage_fail("k_core", e);
            }
        }

        // ---- stage 4a: split ------------------------------------------------
        corpus::SplitPlan plan;
        try {
            StageClock clock(timings, "split");
            plan = corpus::split(log, corpus::split_strategy_from_string(cfg.split.strategy),
                                 cfg.split.test_ratio, cfg.runtime.seed);
            if (cfg.split.simulate_cold_start && cfg.split.cold_fraction > 0.0) {
                plan = corpus::simulate_cold_start(plan, log, cfg.split.cold_fraction,
                                                   derive_seed(cfg.runtime.seed, "cold-start"));
            }
        } catch (const Error& e) {
            stage_fail("split", e);
        }

        // ---- stage 4b: train (grid search first when configured) ----------
        models::TrainData data = models::TrainData::from_split(log, plan);
        models::HyperParams hp = cfg.model.hp;
        hp.epochs = cfg.effective_epochs();
        hp.seed = cfg.runtime.seed;
        std::unique_ptr<models::Recommender> model;
        double train_seconds = 0.0;
        try {
            StageClock clock(timings, "train");
            if (!cfg.model.grid.empty()) {
                const int workers = cfg.runtime.parallel_hpo ? cfg.runtime.workers : 1;
                const BestHyper best =
                    grid_search(cfg, cfg.model.grid, log, plan,
                                model_uses_features ? &features : nullptr, workers);
                hp = best.hp;
                if (cfg.runtime.fast_prototype) hp.epochs = 1;
                hp.seed = cfg.runtime.seed;
                art.warnings.push_back("grid search picked trial " +
                                       std::to_string(best.best_trial) + " of " +
                                       std::to_string(best.table.size()));
            }
            const auto t0 = std::chrono::steady_clock::now();
            model = train_for_run(cfg, data, features, hp);
            train_seconds =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        } catch (const Error& e) {
            stage_fail("train", e);
        }

        // ---- stage 4c: recommend -------------------------------------------
        std::vector<int> eval_users;
        std::vector<std::vector<int>> exclude;
        std::vector<std::vector<int>> relevant(log.num_users());
        for (std::size_t idx : plan.test_indices) {
            relevant[log.events()[idx].user].push_back(log.events()[idx].item);
        }
        for (auto& r : relevant) std::sort(r.begin(), r.end());
        for (int u = 0; u < log.num_users(); ++u) {
            if (!relevant[u].empty()) {
                eval_users.push_back(u);
                exclude.push_back(data.positives[u]);
            }
        }
        std::vector<models::RankedList> lists;
        try {
            StageClock clock(timings, "recommend");
            const int n = std::max(cfg.runtime.top_k, cfg.runtime.list_length);
            lists = models::recommend_all(*model, eval_users, n, exclude, cfg.runtime.workers);
        } catch (const Error& e) {
            stage_fail("recommend", e);
        }

        // ---- stage 4d: evaluate ---------------------------------------------
        try {
            StageClock clock(timings, "evaluate");
            metrics::EvalContext ctx;
            ctx.relevant = relevant;
            ctx.train_popularity = data.item_popularity;
            ctx.catalog_size = log.num_items();
            ctx.k = cfg.runtime.top_k;
            ctx.threads = cfg.runtime.workers;
            if (features.fused.size()) ctx.item_features = features.fused;
            if (!meta_by_id.empty()) {
                std::unordered_map<std::string, int> genre_ids;
                ctx.item_genres.resize(log.num_items());
                for (int i = 0; i < log.num_items(); ++i) {
                    auto it = meta_by_id.find(log.item_id(i));
                    if (it == meta_by_id.end() || it->second->genres.empty()) continue;
                    const double mass = 1.0 / static_cast<double>(it->second->genres.size());
                    for (const auto& g : it->second->genres) {
                        const auto [git, fresh] =
                            genre_ids.try_emplace(g, static_cast<int>(genre_ids.size()));
                        (void)fresh;
                        ctx.item_genres[i].emplace_back(git->second, mass);
                    }
                }
                ctx.train_items = data.positives;
            }
            art.report = metrics::compute_metrics(lists, ctx);
            if (cfg.runtime.coldrate == "user") {
                art.report.coldrate = metrics::user_coldrate_at_k(lists, ctx);
            }
        } catch (const Error& e) {
            stage_fail("evaluate", e);
        }

        art.report.model = cfg.model.family;
        art.report.fusion = tables.empty() ? "none" : (cfg.fusion.present ? cfg.fusion.op : "concat");
        art.report.stage = tables.empty() ? "none" : (cfg.fusion.present ? cfg.fusion.stage : "early");
        art.report.text_variant = cfg.modality.text_variant;
        art.report.audio_variant = cfg.modality.audio_variant;
        art.report.visual_variant = cfg.modality.visual_variant;
        art.report.augmented = cfg.modality.augmentation;
        art.report.seed = cfg.runtime.seed;
        art.report.k = cfg.runtime.top_k;
        art.report.train_seconds = train_seconds;

        // ---- stage 5: write artifacts ----------------------------------------
        try {
            StageClock clock(timings, "write");
            fs::create_directories(outdir);

            art.results_csv = (outdir / "results.csv").string();
            {
                std::ofstream csv(art.results_csv, std::ios::binary);
                if (!csv) throw DataError("cannot write " + art.results_csv);
                csv << kResultsCsvHeader << '\n' << metric_report_csv_row(art.report) << '\n';
            }
            created_files.push_back(art.results_csv);

            art.lists_path = (outdir / "ranked_lists.tsv").string();
            latefusion::write_interchange_lists(art.lists_path, lists, log.user_ids(),
                                                log.item_ids());
            created_files.push_back(art.lists_path);

            if (fused && fused->projection) {
                art.fusion_path = (outdir / "fusion.json").string();
                earlyfusion::save_projection(*fused->projection, art.fusion_path);
                created_files.push_back(art.fusion_path);
            }

            nlohmann::json manifest{
                {"format", "recbench.manifest"},
                {"version", 1},
                {"library", "recbench 0.1.0"},
                {"config_hash", config_hash(cfg)},
                {"seed", cfg.runtime.seed},
                {"dataset",
                 {{"users", log.num_users()},
                  {"items", log.num_items()},
                  {"events", log.num_events()},
                  {"cold_items", plan.cold_items.size()}}},
                {"warnings", art.warnings},
            };
            nlohmann::json stage_times = nlohmann::json::array();
            for (const auto& [name, seconds] : timings) {
                stage_times.push_back({{"stage", name}, {"seconds", seconds}});
            }
            manifest["stages"] = std::move(stage_times);
            art.manifest_path = (outdir / "manifest.json").string();
            std::ofstream mf(art.manifest_path, std::ios::binary);
            if (!mf) throw DataError("cannot write " + art.manifest_path);
            mf << manifest.dump(2) << '\n';
            created_files.push_back(art.manifest_path);
        } catch (const Error& e) {
            stage_fail("write", e);
        }
    } catch (...) {
        // no partial outputs: whatever this run already created is removed
        for (const auto& f : created_files) {
            std::error_code ec;
            fs::remove(f, ec);
        }
        throw;
    }
    return art;
}

}  // namespace recbench::bench
