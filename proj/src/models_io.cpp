#include <fstream>

#include <json.hpp>

#include "recbench/error.hpp"
#include "recbench/models.hpp"

namespace recbench::models {

namespace {

using nlohmann::json;

json matrix_to_json(const Eigen::MatrixXd& m) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

Eigen::MatrixXd matrix_from_json(const json& j) {
    const auto r = static_cast<Eigen::Index>(j.size());
    const auto c = r ? static_cast<Eigen::Index>(j[0].size()) : 0;
    Eigen::MatrixXd m(r, c);
    for (Eigen::Index i = 0; i < r; ++i) {
        for (Eigen::Index k = 0; k < c; ++k) m(i, k) = j[i][k].get<double>();
    }
    return m;
}

json vector_to_json(const Eigen::VectorXd& v) {
    json arr = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
    return arr;
}

Eigen::VectorXd vector_from_json(const json& j) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = j[i].get<double>();
    return v;
}

json hp_to_json(const HyperParams& hp) {
    return json{{"latent_dim", hp.latent_dim},
                {"learning_rate", hp.learning_rate},
                {"reg", hp.reg},
                {"epochs", hp.epochs},
                {"negatives_per_positive", hp.negatives_per_positive},
                {"beta", hp.beta},
                {"hidden_dim", hp.hidden_dim},
                {"z_dim", hp.z_dim},
                {"seed", hp.seed}};
}

HyperParams hp_from_json(const json& j) {
    HyperParams hp;
    hp.latent_dim = j.at("latent_dim").get<int>();
    hp.learning_rate = j.at("learning_rate").get<double>();
    hp.reg = j.at("reg").get<double>();
    hp.epochs = j.at("epochs").get<int>();
    hp.negatives_per_positive = j.at("negatives_per_positive").get<int>();
    hp.beta = j.at("beta").get<double>();
    hp.hidden_dim = j.at("hidden_dim").get<int>();
    hp.z_dim = j.at("z_dim").get<int>();
    hp.seed = j.at("seed").get<std::uint64_t>();
    return hp;
}

}  // namespace

void save_model(const Recommender& model, const std::string& path) {
    json j{{"format", "recbench.model"}, {"version", 1}, {"family", model.family()}};
    if (const auto* mf = dynamic_cast<const MfModel*>(&model)) {
        j["hyperparams"] = hp_to_json(mf->hp);
        j["global_bias"] = mf->global_bias;
        j["user_bias"] = vector_to_json(mf->user_bias);
        j["item_bias"] = vector_to_json(mf->item_bias);
        j["user_factors"] = matrix_to_json(mf->user_factors);
        j["item_factors"] = matrix_to_json(mf->item_factors);
        j["user_seen"] = mf->user_seen;
        j["popularity"] = mf->popularity;
    } else if (const auto* vae = dynamic_cast<const VaecfModel*>(&model)) {
        j["hyperparams"] = hp_to_json(vae->hp);
        j["enc_hidden_w"] = matrix_to_json(vae->enc_hidden_w);
        j["enc_hidden_b"] = vector_to_json(vae->enc_hidden_b);
        j["enc_mean_w"] = matrix_to_json(vae->enc_mean_w);
        j["enc_mean_b"] = vector_to_json(vae->enc_mean_b);
        j["enc_logvar_w"] = matrix_to_json(vae->enc_logvar_w);
        j["enc_logvar_b"] = vector_to_json(vae->enc_logvar_b);
        j["dec_hidden_w"] = matrix_to_json(vae->dec_hidden_w);
        j["dec_hidden_b"] = vector_to_json(vae->dec_hidden_b);
        j["dec_out_w"] = matrix_to_json(vae->dec_out_w);
        j["dec_out_b"] = vector_to_json(vae->dec_out_b);
        j["train_positives"] = vae->train_positives;
        j["popularity"] = vae->popularity;
    } else if (const auto* cm = dynamic_cast<const ContentModel*>(&model)) {
        j["hyperparams"] = hp_to_json(cm->hp);
        j["variant"] = to_string(cm->variant);
        j["global_bias"] = cm->global_bias;
        j["user_bias"] = vector_to_json(cm->user_bias);
        j["item_bias"] = vector_to_json(cm->item_bias);
        j["user_factors"] = matrix_to_json(cm->user_factors);
        j["item_factors"] = matrix_to_json(cm->item_factors);
        j["content_weights"] = matrix_to_json(cm->content_weights);
        j["feature_projection"] = matrix_to_json(cm->feature_projection);
        json gates = json::array();
        for (const auto& a : cm->gate_vectors) gates.push_back(vector_to_json(a));
        j["gate_vectors"] = std::move(gates);
        j["features_fused"] = matrix_to_json(cm->features.fused);
        json blocks = json::array();
        for (const auto& b : cm->features.blocks) blocks.push_back(matrix_to_json(b));
        j["features_blocks"] = std::move(blocks);
        j["user_seen"] = cm->user_seen;
        j["popularity"] = cm->popularity;
    } else {
        throw ArgumentError("save_model: unknown model type");
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write model checkpoint: " + path);
    out << j.dump() << '\n';
}

std::unique_ptr<Recommender> load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open model checkpoint: " + path);
    json j;
    in >> j;
    if (j.value("format", "") != "recbench.model" || j.value("version", 0) != 1) {
        throw ParseError("unrecognized model checkpoint: " + path);
    }
    const std::string family = j.at("family").get<std::string>();
    if (family == "mf") {
        auto m = std::make_unique<MfModel>();
        m->hp = hp_from_json(j.at("hyperparams"));
        m->global_bias = j.at("global_bias").get<double>();
        m->user_bias = vector_from_json(j.at("user_bias"));
        m->item_bias = vector_from_json(j.at("item_bias"));
        m->user_factors = matrix_from_json(j.at("user_factors"));
        m->item_factors = matrix_from_json(j.at("item_factors"));
        m->user_seen = j.at("user_seen").get<std::vector<char>>();
        m->popularity = j.at("popularity").get<std::vector<int>>();
        return m;
    }
    if (family == "vaecf") {
        auto m = std::make_unique<VaecfModel>();
        m->hp = hp_from_json(j.at("hyperparams"));
        m->enc_hidden_w = matrix_from_json(j.at("enc_hidden_w"));
        m->enc_hidden_b = vector_from_json(j.at("enc_hidden_b"));
        m->enc_mean_w = matrix_from_json(j.at("enc_mean_w"));
        m->enc_mean_b = vector_from_json(j.at("enc_mean_b"));
        m->enc_logvar_w = matrix_from_json(j.at("enc_logvar_w"));
        m->enc_logvar_b = vector_from_json(j.at("enc_logvar_b"));
        m->dec_hidden_w = matrix_from_json(j.at("dec_hidden_w"));
        m->dec_hidden_b = vector_from_json(j.at("dec_hidden_b"));
        m->dec_out_w = matrix_from_json(j.at("dec_out_w"));
        m->dec_out_b = vector_from_json(j.at("dec_out_b"));
        m->train_positives = j.at("train_positives").get<std::vector<std::vector<int>>>();
        m->popularity = j.at("popularity").get<std::vector<int>>();
        return m;
    }
    auto m = std::make_unique<ContentModel>();
    m->variant = content_variant_from_string(family);
    m->hp = hp_from_json(j.at("hyperparams"));
    m->global_bias = j.at("global_bias").get<double>();
    m->user_bias = vector_from_json(j.at("user_bias"));
    m->item_bias = vector_from_json(j.at("item_bias"));
    m->user_factors = matrix_from_json(j.at("user_factors"));
    m->item_factors = matrix_from_json(j.at("item_factors"));
    m->content_weights = matrix_from_json(j.at("content_weights"));
    m->feature_projection = matrix_from_json(j.at("feature_projection"));
    for (const auto& g : j.at("gate_vectors")) m->gate_vectors.push_back(vector_from_json(g));
    m->features.fused = matrix_from_json(j.at("features_fused"));
    for (const auto& b : j.at("features_blocks")) m->features.blocks.push_back(matrix_from_json(b));
    m->user_seen = j.at("user_seen").get<std::vector<char>>();
    m->popularity = j.at("popularity").get<std::vector<int>>();
    return m;
}

}  // namespace recbench::models
