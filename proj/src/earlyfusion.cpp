#include "recbench/earlyfusion.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <algorithm>
#include <fstream>
#include <set>

#include <json.hpp>

#include "recbench/error.hpp"

namespace recbench::earlyfusion {

namespace {

// Ridge added to the within-view covariances, relative to trace/d. Kept two
// orders below the 1e-6 tolerance on affine invariance of the canonical
// correlations, which a larger ridge measurably violates.
constexpr double kRidgeScale = 1e-8;

int modality_rank(Modality m) {
    switch (m) {
        case Modality::audio: return 0;
        case Modality::visual: return 1;
        case Modality::text: return 2;
    }
    return 3;
}

// Canonical block order: (audio, visual, text) when all three are present,
// otherwise the aligned order.
std::vector<std::size_t> block_order(const AlignedFeatures& aligned) {
    std::vector<std::size_t> order(aligned.blocks.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::set<Modality> present;
    for (const auto& b : aligned.blocks) present.insert(b.modality);
    if (present.size() == 3) {
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return modality_rank(aligned.blocks[a].modality) <
                   modality_rank(aligned.blocks[b].modality);
        });
    }
    return order;
}

// Flip each column so its largest-magnitude coefficient is positive;
// eigenvectors are sign-ambiguous otherwise.
void fix_signs(Eigen::MatrixXd& m, Eigen::MatrixXd* follower = nullptr) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
        Eigen::Index at = 0;
        m.col(c).cwiseAbs().maxCoeff(&at);
        if (m(at, c) < 0.0) {
            m.col(c) = -m.col(c);
            if (follower && c < follower->cols()) follower->col(c) = -follower->col(c);
        }
    }
}

Eigen::MatrixXd inverse_sqrt(const Eigen::MatrixXd& sym) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
    Eigen::VectorXd vals = es.eigenvalues();
    for (Eigen::Index i = 0; i < vals.size(); ++i) {
        vals[i] = vals[i] > 0.0 ? 1.0 / std::sqrt(vals[i]) : 0.0;
    }
    return es.eigenvectors() * vals.asDiagonal() * es.eigenvectors().transpose();
}

struct Scaling {
    Eigen::VectorXd means;
    Eigen::VectorXd stds;  // 0 marks a constant column
};

Scaling column_scaling(const Eigen::MatrixXd& x) {
    const auto n = static_cast<double>(x.rows());
    Scaling s;
    s.means = x.colwise().mean();
    s.stds.resize(x.cols());
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
        const double var = (x.col(c).array() - s.means[c]).square().sum() / (n - 1.0);
        const double sd = std::sqrt(std::max(var, 0.0));
        s.stds[c] = sd <= 1e-14 * (1.0 + std::abs(s.means[c])) ? 0.0 : sd;
    }
    return s;
}

Eigen::MatrixXd apply_scaling(const Eigen::MatrixXd& x, const Scaling& s) {
    Eigen::MatrixXd z(x.rows(), x.cols());
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
        if (s.stds[c] > 0.0) {
            z.col(c) = (x.col(c).array() - s.means[c]) / s.stds[c];
        } else {
            z.col(c).setZero();
        }
    }
    return z;
}

}  // namespace

std::vector<int> AlignedFeatures::block_dims() const {
    std::vector<int> dims;
    dims.reserve(blocks.size());
    for (const auto& b : blocks) dims.push_back(static_cast<int>(b.matrix.cols()));
    return dims;
}

Eigen::MatrixXd AlignedFeatures::concatenated() const {
    const auto order = block_order(*this);
    Eigen::Index total = 0;
    for (const auto& b : blocks) total += b.matrix.cols();
    Eigen::MatrixXd out(num_items(), total);
    Eigen::Index at = 0;
    for (std::size_t idx : order) {
        out.middleCols(at, blocks[idx].matrix.cols()) = blocks[idx].matrix;
        at += blocks[idx].matrix.cols();
    }
    return out;
}

AlignedFeatures align(const std::vector<EmbeddingTable>& tables) {
    if (tables.empty()) throw ArgumentError("align: need at least one table");
    for (const auto& t : tables) {
        if (t.ids.empty()) throw DataError("align: empty table for modality " +
                                           std::string(textprep::to_string(t.modality)));
    }
    std::vector<std::string> common(tables.front().ids);
    std::sort(common.begin(), common.end());
    for (std::size_t t = 1; t < tables.size(); ++t) {
        std::vector<std::string> next;
        for (const auto& id : common) {
            if (tables[t].contains(id)) next.push_back(id);
        }
        common = std::move(next);
    }
    if (common.empty()) throw DataError("align: no common items across modality tables");

    AlignedFeatures out;
    out.item_ids = common;
    for (const auto& t : tables) {
        FeatureBlock block;
        block.modality = t.modality;
        block.variant = t.variant;
        block.matrix.resize(static_cast<Eigen::Index>(common.size()), t.dim);
        for (std::size_t r = 0; r < common.size(); ++r) {
            block.matrix.row(static_cast<Eigen::Index>(r)) = t.rows.row(t.index.at(common[r]));
        }
        out.blocks.push_back(std::move(block));
        out.dropped_per_table.push_back(static_cast<int>(t.ids.size() - common.size()));
    }
    return out;
}

FusedFeatures fuse_concat(const AlignedFeatures& aligned) {
    if (aligned.num_items() == 0) throw DataError("fuse_concat: empty alignment");
    FusedFeatures out;
    out.item_ids = aligned.item_ids;
    out.matrix = aligned.concatenated();
    out.op = FusionOp::concat;
    return out;
}

FusedFeatures fit_apply_pca(const AlignedFeatures& aligned, double rho) {
    if (!(rho > 0.0 && rho <= 1.0)) {
        throw ArgumentError("pca: rho must lie in (0,1], got " + std::to_string(rho));
    }
    if (aligned.num_items() < 2) throw DataError("pca: need at least 2 items");

    const Eigen::MatrixXd x = aligned.concatenated();
    const Scaling scaling = column_scaling(x);
    const Eigen::MatrixXd z = apply_scaling(x, scaling);

    std::vector<Eigen::Index> active;
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
        if (scaling.stds[c] > 0.0) active.push_back(c);
    }
    if (active.empty()) throw DataError("pca: every column is constant");

    Eigen::MatrixXd za(z.rows(), static_cast<Eigen::Index>(active.size()));
    for (std::size_t j = 0; j < active.size(); ++j) za.col(static_cast<Eigen::Index>(j)) = z.col(active[j]);

    const auto n = static_cast<double>(z.rows());
    const Eigen::MatrixXd cov = za.transpose() * za / (n - 1.0);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);

    // Descending spectrum; noise-level eigenvalues are clamped to zero so
    // rho = 1.0 retains exactly the numerical rank.
    const Eigen::Index d_active = cov.rows();
    Eigen::VectorXd spectrum(d_active);
    Eigen::MatrixXd vectors(d_active, d_active);
    for (Eigen::Index j = 0; j < d_active; ++j) {
        spectrum[j] = es.eigenvalues()[d_active - 1 - j];
        vectors.col(j) = es.eigenvectors().col(d_active - 1 - j);
    }
    const double clamp = spectrum[0] > 0.0 ? spectrum[0] * 1e-12 : 0.0;
    for (Eigen::Index j = 0; j < d_active; ++j) {
        if (spectrum[j] < clamp) spectrum[j] = 0.0;
    }
    const double total = spectrum.sum();
    if (total <= 0.0) throw DataError("pca: covariance has no positive eigenvalue");

    int retained = 0;
    double cum = 0.0;
    for (Eigen::Index j = 0; j < d_active; ++j) {
        cum += spectrum[j];
        retained = static_cast<int>(j) + 1;
        if (cum / total >= rho - 1e-12) break;
    }

    Eigen::MatrixXd top = vectors.leftCols(retained);
    fix_signs(top);

    FusionProjection proj;
    proj.kind = FusionOp::pca;
    proj.means = scaling.means;
    proj.stds = scaling.stds;
    proj.loadings = Eigen::MatrixXd::Zero(x.cols(), retained);
    for (std::size_t j = 0; j < active.size(); ++j) {
        proj.loadings.row(active[j]) = top.row(static_cast<Eigen::Index>(j));
    }
    proj.retained = retained;
    proj.spectrum = spectrum;
    proj.param = rho;

    FusedFeatures out;
    out.item_ids = aligned.item_ids;
    out.matrix = za * top;
    out.op = FusionOp::pca;
    out.projection = std::move(proj);
    return out;
}

FusedFeatures fit_apply_cca(const AlignedFeatures& aligned, int k, int split_dim) {
    const Eigen::MatrixXd x = aligned.concatenated();
    const Eigen::Index d = x.cols();
    if (split_dim < 0 || split_dim >= d) {
        if (split_dim != 0) {
            throw ArgumentError("cca: split_dim must lie in [1, d-1], got " +
                                std::to_string(split_dim));
        }
    }
    const Eigen::Index d1 = split_dim > 0 ? split_dim : (d + 1) / 2;  // default: ceiling half
    const Eigen::Index d2 = d - d1;
    if (d2 == 0) throw ArgumentError("cca: need at least 2 concatenated columns");
    if (k < 1 || k > std::min(d1, d2)) {
        throw ArgumentError("cca: k must lie in [1, min(d1,d2)] = [1, " +
                            std::to_string(std::min(d1, d2)) + "], got " + std::to_string(k));
    }
    if (x.rows() <= std::max(d1, static_cast<Eigen::Index>(k))) {
        throw DataError("cca: need more items than max(d/2, k)");
    }

    const Eigen::VectorXd means = x.colwise().mean();
    const Eigen::MatrixXd centered = x.rowwise() - means.transpose();
    const Eigen::MatrixXd x1 = centered.leftCols(d1);
    const Eigen::MatrixXd x2 = centered.rightCols(d2);

    const auto n = static_cast<double>(x.rows());
    Eigen::MatrixXd c11 = x1.transpose() * x1 / (n - 1.0);
    Eigen::MatrixXd c22 = x2.transpose() * x2 / (n - 1.0);
    const Eigen::MatrixXd c12 = x1.transpose() * x2 / (n - 1.0);

    const double eps1 = std::max(kRidgeScale * c11.trace() / static_cast<double>(d1), 1e-12);
    const double eps2 = std::max(kRidgeScale * c22.trace() / static_cast<double>(d2), 1e-12);
    c11 += eps1 * Eigen::MatrixXd::Identity(d1, d1);
    c22 += eps2 * Eigen::MatrixXd::Identity(d2, d2);

    const Eigen::MatrixXd w1_whiten = inverse_sqrt(c11);
    const Eigen::MatrixXd w2_whiten = inverse_sqrt(c22);
    const Eigen::MatrixXd m = w1_whiten * c12 * w2_whiten;

    Eigen::BDCSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    Eigen::MatrixXd u = svd.matrixU();
    Eigen::MatrixXd v = svd.matrixV();
    Eigen::VectorXd corr = svd.singularValues();
    for (Eigen::Index i = 0; i < corr.size(); ++i) corr[i] = std::clamp(corr[i], 0.0, 1.0);

    Eigen::MatrixXd w1 = w1_whiten * u;
    Eigen::MatrixXd w2 = w2_whiten * v;
    // Sign-fix the view-1 directions; view 2 follows so correlations stay >= 0.
    fix_signs(w1, &w2);

    FusionProjection proj;
    proj.kind = FusionOp::cca;
    proj.means = means;
    proj.stds = Eigen::VectorXd::Ones(d);
    proj.loadings = w1.leftCols(k);
    proj.retained = k;
    proj.spectrum = corr;
    proj.split_dim = static_cast<int>(d1);
    proj.param = static_cast<double>(k);

    FusedFeatures out;
    out.item_ids = aligned.item_ids;
    out.matrix = x1 * proj.loadings;
    out.op = FusionOp::cca;
    out.projection = std::move(proj);
    return out;
}

FusedFeatures fuse_mid(const AlignedFeatures& aligned, FusionOp op, double rho, int k) {
    if (op == FusionOp::concat) return fuse_concat(aligned);
    const auto order = block_order(aligned);
    std::vector<Eigen::MatrixXd> projected;
    Eigen::Index total = 0;
    for (std::size_t idx : order) {
        AlignedFeatures single;
        single.item_ids = aligned.item_ids;
        single.blocks.push_back(aligned.blocks[idx]);
        FusedFeatures f = op == FusionOp::pca ? fit_apply_pca(single, rho)
                                              : fit_apply_cca(single, k);
        total += f.matrix.cols();
        projected.push_back(std::move(f.matrix));
    }
    FusedFeatures out;
    out.item_ids = aligned.item_ids;
    out.matrix.resize(aligned.num_items(), total);
    Eigen::Index at = 0;
    for (const auto& m : projected) {
        out.matrix.middleCols(at, m.cols()) = m;
        at += m.cols();
    }
    out.op = op;
    return out;
}

Eigen::MatrixXd FusionProjection::apply(const Eigen::MatrixXd& concatenated) const {
    if (concatenated.cols() != means.size()) {
        throw ArgumentError("projection: input has " + std::to_string(concatenated.cols()) +
                            " columns, fitted on " + std::to_string(means.size()));
    }
    if (kind == FusionOp::pca) {
        Eigen::MatrixXd z(concatenated.rows(), concatenated.cols());
        for (Eigen::Index c = 0; c < concatenated.cols(); ++c) {
            if (stds[c] > 0.0) {
                z.col(c) = (concatenated.col(c).array() - means[c]) / stds[c];
            } else {
                z.col(c).setZero();
            }
        }
        return z * loadings;
    }
    const Eigen::MatrixXd centered = concatenated.rowwise() - means.transpose();
    return centered.leftCols(split_dim) * loadings;
}

namespace {

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        nlohmann::json row = nlohmann::json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

Eigen::MatrixXd matrix_from_json(const nlohmann::json& j) {
    const auto r = static_cast<Eigen::Index>(j.size());
    if (r == 0) return {};
    const auto c = static_cast<Eigen::Index>(j[0].size());
    Eigen::MatrixXd m(r, c);
    for (Eigen::Index i = 0; i < r; ++i) {
        for (Eigen::Index k2 = 0; k2 < c; ++k2) m(i, k2) = j[i][k2].get<double>();
    }
    return m;
}

nlohmann::json vector_to_json(const Eigen::VectorXd& v) {
    nlohmann::json arr = nlohmann::json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
    return arr;
}

Eigen::VectorXd vector_from_json(const nlohmann::json& j) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = j[i].get<double>();
    return v;
}

}  // namespace

void save_projection(const FusionProjection& proj, const std::string& path) {
    nlohmann::json j{
        {"format", "recbench.fusion"},
        {"version", 1},
        {"operator", to_string(proj.kind)},
        {"param", proj.param},
        {"retained", proj.retained},
        {"split_dim", proj.split_dim},
        {"means", vector_to_json(proj.means)},
        {"stds", vector_to_json(proj.stds)},
        {"loadings", matrix_to_json(proj.loadings)},
        {"spectrum", vector_to_json(proj.spectrum)},
    };
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write projection record: " + path);
    out << j.dump(2) << '\n';
}

FusionProjection load_projection(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open projection record: " + path);
    nlohmann::json j;
    in >> j;
    if (j.value("format", "") != "recbench.fusion" || j.value("version", 0) != 1) {
        throw ParseError("unrecognized projection record: " + path);
    }
    FusionProjection proj;
    proj.kind = fusion_op_from_string(j.at("operator").get<std::string>());
    proj.param = j.at("param").get<double>();
    proj.retained = j.at("retained").get<int>();
    proj.split_dim = j.at("split_dim").get<int>();
    proj.means = vector_from_json(j.at("means"));
    proj.stds = vector_from_json(j.at("stds"));
    proj.loadings = matrix_from_json(j.at("loadings"));
    proj.spectrum = vector_from_json(j.at("spectrum"));
    return proj;
}

const char* to_string(FusionOp op) {
    switch (op) {
        case FusionOp::concat: return "concat";
        case FusionOp::pca: return "pca";
        case FusionOp::cca: return "cca";
    }
    return "?";
}

FusionOp fusion_op_from_string(const std::string& s) {
    if (s == "concat") return FusionOp::concat;
    if (s == "pca") return FusionOp::pca;
    if (s == "cca") return FusionOp::cca;
    throw ArgumentError("unknown fusion operator '" + s + "' (allowed: concat, pca, cca)");
}

}  // namespace recbench::earlyfusion
