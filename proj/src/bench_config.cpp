#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "recbench/bench.hpp"
#include "recbench/error.hpp"
#include "recbench/rng.hpp"

namespace recbench::bench {

namespace {

const std::set<std::string> kTopKeys = {"root_path", "dataset", "split",  "modality",
                                        "fusion",    "model",   "runtime", "output"};
const std::set<std::string> kDatasetKeys = {"name", "format", "path", "metadata_path",
                                            "metadata_format"};
const std::set<std::string> kSplitKeys = {"strategy", "test_ratio",    "k_core",
                                          "k_core_order", "simulate_cold_start",
                                          "cold_fraction"};
const std::set<std::string> kModalityKeys = {"enabled",       "text_variant", "augmentation",
                                             "audio_variant", "visual_variant", "paths",
                                             "normalize"};
const std::set<std::string> kFusionKeys = {"operator", "rho", "k", "stage", "cca_split"};
const std::set<std::string> kModelKeys = {"family", "hyperparams", "grid", "objective"};
const std::set<std::string> kHpKeys = {"latent_dim", "learning_rate", "reg",
                                       "epochs",     "negatives_per_positive",
                                       "beta",       "hidden_dim",
                                       "z_dim"};
// gpu_id/use_gpu are accepted for config compatibility and ignored.
const std::set<std::string> kRuntimeKeys = {"seed",        "epochs",         "top_k",
                                            "list_length", "fast_prototype", "parallel_hpo",
                                            "workers",     "coldrate",       "use_gpu",
                                            "gpu_id"};
const std::set<std::string> kOutputKeys = {"dir"};

void check_keys(const YAML::Node& node, const std::set<std::string>& allowed,
                const std::string& where, bool strict, std::vector<std::string>& warnings) {
    if (!node || !node.IsMap()) return;
    for (const auto& kv : node) {
        const std::string key = kv.first.as<std::string>();
        if (!allowed.count(key)) {
            std::string names;
            for (const auto& a : allowed) names += (names.empty() ? "" : ", ") + a;
            const std::string msg = "unknown key '" + where + key + "' (allowed: " + names + ")";
            if (strict) throw ValidationError(msg);
            warnings.push_back(msg);
        }
    }
}

void require_enum(const std::string& value, const std::set<std::string>& allowed,
                  const std::string& key) {
    if (!allowed.count(value)) {
        std::string names;
        for (const auto& a : allowed) names += (names.empty() ? "" : ", ") + a;
        throw ValidationError("invalid value '" + value + "' for " + key +
                              " (allowed: " + names + ")");
    }
}

template <typename T>
T get_or(const YAML::Node& node, const std::string& key, T fallback) {
    if (node && node[key]) return node[key].as<T>();
    return fallback;
}

}  // namespace

std::size_t GridSpec::size() const {
    std::size_t n = 1;
    for (const auto& [name, values] : axes) n *= values.size();
    return axes.empty() ? 0 : n;
}

int ExperimentConfig::effective_epochs() const {
    if (runtime.fast_prototype) return 1;  // single-epoch fast prototypes
    if (model.epochs_explicit) return model.hp.epochs;
    if (runtime.epochs) return *runtime.epochs;
    return model.hp.epochs;
}

ExperimentConfig parse_config(const std::string& yaml_text, bool strict,
                              const std::string& source_name) {
    YAML::Node root;
    try {
        root = YAML::Load(yaml_text);
    } catch (const YAML::Exception& e) {
        throw ValidationError(source_name + ": YAML parse error: " + e.what());
    }
    if (!root.IsMap()) throw ValidationError(source_name + ": config must be a mapping");

    ExperimentConfig cfg;
    check_keys(root, kTopKeys, "", strict, cfg.load_warnings);

    cfg.root_path = get_or<std::string>(root, "root_path", ".");

    const YAML::Node ds = root["dataset"];
    if (!ds) throw ValidationError(source_name + ": missing required key 'dataset'");
    check_keys(ds, kDatasetKeys, "dataset.", strict, cfg.load_warnings);
    cfg.dataset.name = get_or<std::string>(ds, "name", "dataset");
    cfg.dataset.format = get_or<std::string>(ds, "format", "tsv");
    require_enum(cfg.dataset.format, {"tsv", "movielens_dat"}, "dataset.format");
    if (!ds["path"]) throw ValidationError(source_name + ": missing required key 'dataset.path'");
    cfg.dataset.path = ds["path"].as<std::string>();
    cfg.dataset.metadata_path = get_or<std::string>(ds, "metadata_path", "");
    cfg.dataset.metadata_format = get_or<std::string>(ds, "metadata_format", cfg.dataset.format);
    require_enum(cfg.dataset.metadata_format, {"tsv", "movielens_dat"}, "dataset.metadata_format");

    const YAML::Node sp = root["split"];
    check_keys(sp, kSplitKeys, "split.", strict, cfg.load_warnings);
    cfg.split.strategy = get_or<std::string>(sp, "strategy", "random");
    require_enum(cfg.split.strategy, {"random", "temporal", "per_user"}, "split.strategy");
    cfg.split.test_ratio = get_or<double>(sp, "test_ratio", 0.2);
    if (!(cfg.split.test_ratio > 0.0 && cfg.split.test_ratio < 1.0)) {
        throw ValidationError("split.test_ratio must lie in (0,1)");
    }
    cfg.split.k_core = get_or<int>(sp, "k_core", 0);
    if (cfg.split.k_core < 0) throw ValidationError("split.k_core must be >= 0");
    cfg.split.k_core_order = get_or<std::string>(sp, "k_core_order", "before_alignment");
    require_enum(cfg.split.k_core_order, {"before_alignment", "after_alignment"},
                 "split.k_core_order");
    cfg.split.simulate_cold_start = get_or<bool>(sp, "simulate_cold_start", false);
    cfg.split.cold_fraction = get_or<double>(sp, "cold_fraction", 0.0);
    if (cfg.split.cold_fraction < 0.0 || cfg.split.cold_fraction >= 1.0) {
        throw ValidationError("split.cold_fraction must lie in [0,1)");
    }

    const YAML::Node mo = root["modality"];
    check_keys(mo, kModalityKeys, "modality.", strict, cfg.load_warnings);
    if (mo && mo["enabled"]) {
        for (const auto& v : mo["enabled"]) {
            const auto name = v.as<std::string>();
            require_enum(name, {"audio", "visual", "text"}, "modality.enabled");
            cfg.modality.enabled.push_back(name);
        }
    }
    cfg.modality.text_variant = get_or<std::string>(mo, "text_variant", "st");
    cfg.modality.augmentation = get_or<bool>(mo, "augmentation", false);
    cfg.modality.audio_variant = get_or<std::string>(mo, "audio_variant", "blf");
    require_enum(cfg.modality.audio_variant, {"blf", "i_vec"}, "modality.audio_variant");
    cfg.modality.visual_variant = get_or<std::string>(mo, "visual_variant", "cnn");
    require_enum(cfg.modality.visual_variant, {"cnn", "avf"}, "modality.visual_variant");
    if (mo && mo["paths"]) {
        for (const auto& kv : mo["paths"]) {
            const auto key = kv.first.as<std::string>();
            require_enum(key, {"audio", "visual", "text"}, "modality.paths");
            cfg.modality.paths[key] = kv.second.as<std::string>();
        }
    }
    cfg.modality.normalize = get_or<bool>(mo, "normalize", true);
    for (const auto& name : cfg.modality.enabled) {
        if (!cfg.modality.paths.count(name)) {
            throw ValidationError("modality '" + name + "' enabled but modality.paths." + name +
                                  " is missing");
        }
    }

    const YAML::Node fu = root["fusion"];
    if (fu) {
        cfg.fusion.present = true;
        check_keys(fu, kFusionKeys, "fusion.", strict, cfg.load_warnings);
        cfg.fusion.op = get_or<std::string>(fu, "operator", "concat");
        require_enum(cfg.fusion.op, {"concat", "pca", "cca"}, "fusion.operator");
        if (fu["rho"]) cfg.fusion.rho = fu["rho"].as<double>();
        if (fu["k"]) cfg.fusion.k = fu["k"].as<int>();
        cfg.fusion.stage = get_or<std::string>(fu, "stage", "early");
        require_enum(cfg.fusion.stage, {"early", "mid", "late"}, "fusion.stage");
        if (cfg.fusion.op == "pca" && !cfg.fusion.rho) {
            throw ValidationError("fusion.operator 'pca' requires fusion.rho");
        }
        if (cfg.fusion.op == "cca" && !cfg.fusion.k) {
            throw ValidationError("fusion.operator 'cca' requires fusion.k");
        }
        if (cfg.fusion.rho && !(*cfg.fusion.rho > 0.0 && *cfg.fusion.rho <= 1.0)) {
            throw ValidationError("fusion.rho must lie in (0,1]");
        }
        cfg.fusion.cca_split = get_or<std::string>(fu, "cca_split", "half");
        require_enum(cfg.fusion.cca_split, {"half", "modality"}, "fusion.cca_split");
        if (cfg.fusion.k && *cfg.fusion.k < 1) throw ValidationError("fusion.k must be >= 1");
    }

    const YAML::Node md = root["model"];
    if (!md) throw ValidationError(source_name + ": missing required key 'model'");
    if (md.IsScalar()) {
        cfg.model.family = md.as<std::string>();
    } else {
        check_keys(md, kModelKeys, "model.", strict, cfg.load_warnings);
        cfg.model.family = get_or<std::string>(md, "family", "mf");
        const YAML::Node hp = md["hyperparams"];
        check_keys(hp, kHpKeys, "model.hyperparams.", strict, cfg.load_warnings);
        cfg.model.hp.latent_dim = get_or<int>(hp, "latent_dim", cfg.model.hp.latent_dim);
        cfg.model.hp.learning_rate =
            get_or<double>(hp, "learning_rate", cfg.model.hp.learning_rate);
        cfg.model.hp.reg = get_or<double>(hp, "reg", cfg.model.hp.reg);
        if (hp && hp["epochs"]) {
            cfg.model.hp.epochs = hp["epochs"].as<int>();
            cfg.model.epochs_explicit = true;
        }
        cfg.model.hp.negatives_per_positive =
            get_or<int>(hp, "negatives_per_positive", cfg.model.hp.negatives_per_positive);
        cfg.model.hp.beta = get_or<double>(hp, "beta", cfg.model.hp.beta);
        cfg.model.hp.hidden_dim = get_or<int>(hp, "hidden_dim", cfg.model.hp.hidden_dim);
        cfg.model.hp.z_dim = get_or<int>(hp, "z_dim", cfg.model.hp.z_dim);
        const YAML::Node grid = md["grid"];
        if (grid) {
            for (const auto& kv : grid) {
                const auto key = kv.first.as<std::string>();
                if (!kHpKeys.count(key)) {
                    throw ValidationError("unknown grid axis 'model.grid." + key + "'");
                }
                std::vector<double> values;
                for (const auto& v : kv.second) values.push_back(v.as<double>());
                if (values.empty()) throw ValidationError("empty grid axis 'model.grid." + key + "'");
                cfg.model.grid.axes.emplace_back(key, std::move(values));
            }
        }
        cfg.model.objective = get_or<std::string>(md, "objective", "ndcg");
        require_enum(cfg.model.objective, {"ndcg", "recall"}, "model.objective");
    }
    require_enum(cfg.model.family, {"mf", "vaecf", "vbpr", "vmf", "amr"}, "model.family");

    const YAML::Node rt = root["runtime"];
    check_keys(rt, kRuntimeKeys, "runtime.", strict, cfg.load_warnings);
    cfg.runtime.seed = get_or<std::uint64_t>(rt, "seed", 42);
    if (rt && rt["epochs"]) cfg.runtime.epochs = rt["epochs"].as<int>();
    cfg.runtime.top_k = get_or<int>(rt, "top_k", 10);
    if (cfg.runtime.top_k < 1) throw ValidationError("runtime.top_k must be >= 1");
    cfg.runtime.list_length = get_or<int>(rt, "list_length", 100);
    cfg.runtime.fast_prototype = get_or<bool>(rt, "fast_prototype", false);
    cfg.runtime.parallel_hpo = get_or<bool>(rt, "parallel_hpo", false);
    cfg.runtime.workers = get_or<int>(rt, "workers", 1);
    if (cfg.runtime.workers < 1) throw ValidationError("runtime.workers must be >= 1");
    cfg.runtime.coldrate = get_or<std::string>(rt, "coldrate", "item");
    require_enum(cfg.runtime.coldrate, {"item", "user"}, "runtime.coldrate");
    if (rt && (rt["use_gpu"] || rt["gpu_id"])) {
        cfg.load_warnings.push_back("runtime.use_gpu/gpu_id are accepted but ignored "
                                    "(CPU execution with seeded parallelism)");
    }

    const YAML::Node out = root["output"];
    check_keys(out, kOutputKeys, "output.", strict, cfg.load_warnings);
    cfg.output_dir = get_or<std::string>(out, "dir", "outputs");

    return cfg;
}

ExperimentConfig load_config(const std::string& path, bool strict) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open config file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str(), strict, path);
}

namespace {

std::string fmt_double(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

}  // namespace

std::string serialize_config(const ExperimentConfig& cfg) {
    std::ostringstream os;
    os << "root_path: " << cfg.root_path << "\n";
    os << "dataset:\n";
    os << "  name: " << cfg.dataset.name << "\n";
    os << "  format: " << cfg.dataset.format << "\n";
    os << "  path: " << cfg.dataset.path << "\n";
    if (!cfg.dataset.metadata_path.empty()) {
        os << "  metadata_path: " << cfg.dataset.metadata_path << "\n";
        os << "  metadata_format: " << cfg.dataset.metadata_format << "\n";
    }
    os << "split:\n";
    os << "  strategy: " << cfg.split.strategy << "\n";
    os << "  test_ratio: " << fmt_double(cfg.split.test_ratio) << "\n";
    os << "  k_core: " << cfg.split.k_core << "\n";
    os << "  k_core_order: " << cfg.split.k_core_order << "\n";
    os << "  simulate_cold_start: " << (cfg.split.simulate_cold_start ? "true" : "false") << "\n";
    os << "  cold_fraction: " << fmt_double(cfg.split.cold_fraction) << "\n";
    os << "modality:\n";
    os << "  enabled: [";
    for (std::size_t i = 0; i < cfg.modality.enabled.size(); ++i) {
        os << (i ? ", " : "") << cfg.modality.enabled[i];
    }
    os << "]\n";
    os << "  text_variant: " << cfg.modality.text_variant << "\n";
    os << "  augmentation: " << (cfg.modality.augmentation ? "true" : "false") << "\n";
    os << "  audio_variant: " << cfg.modality.audio_variant << "\n";
    os << "  visual_variant: " << cfg.modality.visual_variant << "\n";
    if (!cfg.modality.paths.empty()) {
        os << "  paths:\n";
        for (const auto& [key, value] : cfg.modality.paths) {
            os << "    " << key << ": " << value << "\n";
        }
    }
    os << "  normalize: " << (cfg.modality.normalize ? "true" : "false") << "\n";
    if (cfg.fusion.present) {
        os << "fusion:\n";
        os << "  operator: " << cfg.fusion.op << "\n";
        if (cfg.fusion.rho) os << "  rho: " << fmt_double(*cfg.fusion.rho) << "\n";
        if (cfg.fusion.k) os << "  k: " << *cfg.fusion.k << "\n";
        os << "  stage: " << cfg.fusion.stage << "\n";
        os << "  cca_split: " << cfg.fusion.cca_split << "\n";
    }
    os << "model:\n";
    os << "  family: " << cfg.model.family << "\n";
    os << "  hyperparams:\n";
    os << "    latent_dim: " << cfg.model.hp.latent_dim << "\n";
    os << "    learning_rate: " << fmt_double(cfg.model.hp.learning_rate) << "\n";
    os << "    reg: " << fmt_double(cfg.model.hp.reg) << "\n";
    if (cfg.model.epochs_explicit) os << "    epochs: " << cfg.model.hp.epochs << "\n";
    os << "    negatives_per_positive: " << cfg.model.hp.negatives_per_positive << "\n";
    os << "    beta: " << fmt_double(cfg.model.hp.beta) << "\n";
    os << "    hidden_dim: " << cfg.model.hp.hidden_dim << "\n";
    os << "    z_dim: " << cfg.model.hp.z_dim << "\n";
    if (!cfg.model.grid.empty()) {
        os << "  grid:\n";
        for (const auto& [axis, values] : cfg.model.grid.axes) {
            os << "    " << axis << ": [";
            for (std::size_t i = 0; i < values.size(); ++i) {
                os << (i ? ", " : "") << fmt_double(values[i]);
            }
            os << "]\n";
        }
    }
    os << "  objective: " << cfg.model.objective << "\n";
    os << "runtime:\n";
    os << "  seed: " << cfg.runtime.seed << "\n";
    if (cfg.runtime.epochs) os << "  epochs: " << *cfg.runtime.epochs << "\n";
    os << "  top_k: " << cfg.runtime.top_k << "\n";
    os << "  list_length: " << cfg.runtime.list_length << "\n";
    os << "  fast_prototype: " << (cfg.runtime.fast_prototype ? "true" : "false") << "\n";
    os << "  parallel_hpo: " << (cfg.runtime.parallel_hpo ? "true" : "false") << "\n";
    os << "  workers: " << cfg.runtime.workers << "\n";
    os << "  coldrate: " << cfg.runtime.coldrate << "\n";
    os << "output:\n";
    os << "  dir: " << cfg.output_dir << "\n";
    return os.str();
}

std::uint64_t config_hash(const ExperimentConfig& cfg) { return fnv1a(serialize_config(cfg)); }

}  // namespace recbench::bench
