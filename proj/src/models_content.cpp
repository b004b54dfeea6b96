#include <cmath>

#include "recbench/error.hpp"
#include "recbench/models.hpp"
#include "recbench/rng.hpp"

namespace recbench::models {

namespace {

// -ln sigma(x), numerically stable.
double softplus_neg(double x) {
    return x > 0.0 ? std::log1p(std::exp(-x)) : -x + std::log1p(std::exp(x));
}

double sigmoid(double x) {
    return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

struct GateEval {
    Eigen::VectorXd raw;        // s_m = a_m . e_i^(m)
    Eigen::VectorXd attention;  // softmax(s)
    double value = 0.0;         // g = sum_m attention_m * s_m
};

GateEval eval_gate(const ContentModel& m, int item) {
    const auto n_mod = static_cast<Eigen::Index>(m.gate_vectors.size());
    GateEval g;
    g.raw.resize(n_mod);
    for (Eigen::Index k = 0; k < n_mod; ++k) {
        g.raw[k] = m.features.blocks[static_cast<std::size_t>(k)]
                       .row(item)
                       .dot(m.gate_vectors[static_cast<std::size_t>(k)]);
    }
    const double mx = g.raw.maxCoeff();
    g.attention = (g.raw.array() - mx).exp();
    g.attention /= g.attention.sum();
    g.value = g.attention.dot(g.raw);
    return g;
}

double item_score(const ContentModel& m, int user, int item) {
    switch (m.variant) {
        case ContentVariant::vbpr:
            return m.user_factors.row(user).dot(m.item_factors.row(item)) +
                   m.content_weights.row(user).dot(m.features.fused.row(item));
        case ContentVariant::vmf:
            return m.global_bias + m.user_bias[user] + m.item_bias[item] +
                   m.user_factors.row(user).dot(
                       (m.feature_projection * m.features.fused.row(item).transpose()));
        case ContentVariant::amr:
            return m.user_factors.row(user).dot(m.item_factors.row(item)) +
                   eval_gate(m, item).value;
    }
    return 0.0;
}

double triple_delta(const ContentModel& m, const BprTriple& t) {
    return item_score(m, t.user, t.pos_item) - item_score(m, t.user, t.neg_item);
}

double triple_reg(const ContentModel& m, const BprTriple& t) {
    double reg = m.user_factors.row(t.user).squaredNorm();
    switch (m.variant) {
        case ContentVariant::vbpr:
            reg += m.item_factors.row(t.pos_item).squaredNorm() +
                   m.item_factors.row(t.neg_item).squaredNorm() +
                   m.content_weights.row(t.user).squaredNorm();
            break;
        case ContentVariant::vmf:
            reg += m.item_bias[t.pos_item] * m.item_bias[t.pos_item] +
                   m.item_bias[t.neg_item] * m.item_bias[t.neg_item] +
                   m.feature_projection.squaredNorm();
            break;
        case ContentVariant::amr:
            reg += m.item_factors.row(t.pos_item).squaredNorm() +
                   m.item_factors.row(t.neg_item).squaredNorm();
            for (const auto& a : m.gate_vectors) reg += a.squaredNorm();
            break;
    }
    return reg;
}

// d g(item) / d a_m = attention_m * (1 + s_m - g) * e_item^(m)
void add_gate_gradient(const ContentModel& m, int item, double coeff,
                       std::vector<Eigen::VectorXd>& grads) {
    const GateEval g = eval_gate(m, item);
    for (std::size_t k = 0; k < m.gate_vectors.size(); ++k) {
        const auto ki = static_cast<Eigen::Index>(k);
        const double w = g.attention[ki] * (1.0 + g.raw[ki] - g.value);
        grads[k] += coeff * w * m.features.blocks[k].row(item).transpose();
    }
}

void check_features(const TrainData& data, const ContentFeatures& features,
                    ContentVariant variant) {
    if (variant == ContentVariant::amr) {
        if (features.blocks.empty()) {
            throw ArgumentError("train_content(amr): needs per-modality feature blocks");
        }
        for (const auto& b : features.blocks) {
            if (b.rows() != data.n_items) {
                throw ArgumentError("train_content: feature block has " +
                                    std::to_string(b.rows()) + " rows, catalog has " +
                                    std::to_string(data.n_items));
            }
        }
    } else {
        if (features.fused.rows() != data.n_items) {
            throw ArgumentError("train_content: fused features have " +
                                std::to_string(features.fused.rows()) + " rows, catalog has " +
                                std::to_string(data.n_items));
        }
    }
}

}  // namespace

std::string ContentModel::family() const { return to_string(variant); }

int ContentModel::num_items() const {
    if (variant == ContentVariant::amr) {
        return features.blocks.empty() ? static_cast<int>(item_factors.rows())
                                       : static_cast<int>(features.blocks.front().rows());
    }
    return static_cast<int>(features.fused.rows());
}

Eigen::VectorXd ContentModel::gate_attention(int item) const {
    return eval_gate(*this, item).attention;
}

void ContentModel::score_items(int user, Eigen::VectorXd& out) const {
    const int n = num_items();
    out.resize(n);
    switch (variant) {
        case ContentVariant::vbpr:
            out = item_factors * user_factors.row(user).transpose() +
                  features.fused * content_weights.row(user).transpose();
            break;
        case ContentVariant::vmf:
            out = (features.fused * feature_projection.transpose()) *
                  user_factors.row(user).transpose();
            out += item_bias;
            out.array() += global_bias + user_bias[user];
            break;
        case ContentVariant::amr: {
            out = item_factors * user_factors.row(user).transpose();
            for (int i = 0; i < n; ++i) out[i] += eval_gate(*this, i).value;
            break;
        }
    }
}

bool ContentModel::is_cold_user(int user) const {
    return user >= 0 && user < static_cast<int>(user_seen.size()) && !user_seen[user];
}

ContentModel train_content(const TrainData& data, const ContentFeatures& features,
                           ContentVariant variant, const HyperParams& hp) {
    hp.validate();
    if (data.n_events == 0) throw DataError("train_content: no train events");
    check_features(data, features, variant);

    ContentModel m;
    m.variant = variant;
    m.features = features;
    m.hp = hp;
    m.popularity = data.item_popularity;
    m.user_seen.resize(data.n_users);
    for (int u = 0; u < data.n_users; ++u) m.user_seen[u] = data.user_seen(u) ? 1 : 0;

    Rng rng(hp.seed);
    auto gaussian_matrix = [&](Eigen::Index rows, Eigen::Index cols) {
        Eigen::MatrixXd x(rows, cols);
        for (Eigen::Index r = 0; r < rows; ++r) {
            for (Eigen::Index c = 0; c < cols; ++c) x(r, c) = 0.01 * rng.normal();
        }
        return x;
    };

    m.user_factors = gaussian_matrix(data.n_users, hp.latent_dim);
    m.global_bias = 0.0;
    m.user_bias = Eigen::VectorXd::Zero(data.n_users);
    switch (variant) {
        case ContentVariant::vbpr:
            m.item_factors = gaussian_matrix(data.n_items, hp.latent_dim);
            m.content_weights = gaussian_matrix(data.n_users, features.fused.cols());
            break;
        case ContentVariant::vmf:
            m.item_bias = Eigen::VectorXd::Zero(data.n_items);
            m.feature_projection = gaussian_matrix(hp.latent_dim, features.fused.cols());
            break;
        case ContentVariant::amr:
            m.item_factors = gaussian_matrix(data.n_items, hp.latent_dim);
            for (const auto& b : features.blocks) {
                Eigen::VectorXd a(b.cols());
                for (Eigen::Index j = 0; j < a.size(); ++j) a[j] = 0.01 * rng.normal();
                m.gate_vectors.push_back(std::move(a));
            }
            break;
    }

    std::vector<std::pair<int, int>> positives;  // (user, item)
    for (int u = 0; u < data.n_users; ++u) {
        if (static_cast<int>(data.positives[u].size()) >= data.n_items) continue;  // nothing to contrast
        for (int item : data.positives[u]) positives.emplace_back(u, item);
    }
    if (positives.empty()) throw DataError("train_content: no (user, positive) pairs trainable");

    const double lr = hp.learning_rate;
    const double reg = hp.reg;
    std::vector<std::size_t> order(positives.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    std::vector<Eigen::VectorXd> gate_grads;
    for (const auto& a : m.gate_vectors) gate_grads.push_back(Eigen::VectorXd::Zero(a.size()));

    for (int epoch = 0; epoch < hp.epochs; ++epoch) {
        rng.shuffle(order);
        double loss_sum = 0.0;
        std::size_t n_triples = 0;
        for (std::size_t pos : order) {
            const auto [u, pos_item] = positives[pos];
            const auto& seen = data.positives[u];
            for (int rep = 0; rep < hp.negatives_per_positive; ++rep) {
                int neg_item = static_cast<int>(rng.uniform_index(data.n_items));
                while (std::binary_search(seen.begin(), seen.end(), neg_item)) {
                    neg_item = static_cast<int>(rng.uniform_index(data.n_items));
                }
                const BprTriple t{u, pos_item, neg_item};
                const double delta = triple_delta(m, t);
                loss_sum += softplus_neg(delta) + reg * triple_reg(m, t);
                ++n_triples;
                const double sig = sigmoid(-delta);

                const Eigen::RowVectorXd pu = m.user_factors.row(u);
                switch (variant) {
                    case ContentVariant::vbpr: {
                        const Eigen::RowVectorXd qdiff =
                            m.item_factors.row(pos_item) - m.item_factors.row(neg_item);
                        const Eigen::RowVectorXd ediff =
                            m.features.fused.row(pos_item) - m.features.fused.row(neg_item);
                        m.user_factors.row(u) += lr * (sig * qdiff - 2.0 * reg * pu);
                        m.item_factors.row(pos_item) +=
                            lr * (sig * pu - 2.0 * reg * m.item_factors.row(pos_item));
                        m.item_factors.row(neg_item) +=
                            lr * (-sig * pu - 2.0 * reg * m.item_factors.row(neg_item));
                        m.content_weights.row(u) +=
                            lr * (sig * ediff - 2.0 * reg * m.content_weights.row(u));
                        break;
                    }
                    case ContentVariant::vmf: {
                        const Eigen::VectorXd ediff =
                            (m.features.fused.row(pos_item) - m.features.fused.row(neg_item))
                                .transpose();
                        const Eigen::VectorXd proj = m.feature_projection * ediff;
                        m.item_bias[pos_item] +=
                            lr * (sig - 2.0 * reg * m.item_bias[pos_item]);
                        m.item_bias[neg_item] +=
                            lr * (-sig - 2.0 * reg * m.item_bias[neg_item]);
                        m.user_factors.row(u) +=
                            lr * (sig * proj.transpose() - 2.0 * reg * pu);
                        m.feature_projection += lr * (sig * pu.transpose() * ediff.transpose() -
                                                      2.0 * reg * m.feature_projection);
                        break;
                    }
                    case ContentVariant::amr: {
                        const Eigen::RowVectorXd qdiff =
                            m.item_factors.row(pos_item) - m.item_factors.row(neg_item);
                        m.user_factors.row(u) += lr * (sig * qdiff - 2.0 * reg * pu);
                        m.item_factors.row(pos_item) +=
                            lr * (sig * pu - 2.0 * reg * m.item_factors.row(pos_item));
                        m.item_factors.row(neg_item) +=
                            lr * (-sig * pu - 2.0 * reg * m.item_factors.row(neg_item));
                        for (auto& g : gate_grads) g.setZero();
                        add_gate_gradient(m, pos_item, 1.0, gate_grads);
                        add_gate_gradient(m, neg_item, -1.0, gate_grads);
                        for (std::size_t k = 0; k < m.gate_vectors.size(); ++k) {
                            m.gate_vectors[k] +=
                                lr * (sig * gate_grads[k] - 2.0 * reg * m.gate_vectors[k]);
                        }
                        break;
                    }
                }
            }
        }
        const double mean_loss = loss_sum / static_cast<double>(n_triples);
        if (!std::isfinite(mean_loss)) {
            throw DivergenceError(epoch + 1, lr,
                                  "train_content diverged at epoch " + std::to_string(epoch + 1) +
                                      " (lr=" + std::to_string(lr) + ")");
        }
        m.loss_trace.push_back(mean_loss);
    }
    return m;
}

double bpr_loss(const ContentModel& m, const std::vector<BprTriple>& triples, double reg) {
    double loss = 0.0;
    for (const auto& t : triples) {
        loss += softplus_neg(triple_delta(m, t)) + reg * triple_reg(m, t);
    }
    return loss;
}

// Flat layouts (matrices row-major):
//   vbpr: [P, Q, W]
//   vmf:  [b_i, P, H]
//   amr:  [P, Q, a_0, a_1, ...]
// Only the blocks BPR training actually updates are included.
Eigen::VectorXd content_parameters(const ContentModel& m) {
    std::vector<double> vals;
    auto push_matrix = [&](const Eigen::MatrixXd& x) {
        for (Eigen::Index r = 0; r < x.rows(); ++r) {
            for (Eigen::Index c = 0; c < x.cols(); ++c) vals.push_back(x(r, c));
        }
    };
    auto push_vector = [&](const Eigen::VectorXd& x) {
        for (Eigen::Index i = 0; i < x.size(); ++i) vals.push_back(x[i]);
    };
    switch (m.variant) {
        case ContentVariant::vbpr:
            push_matrix(m.user_factors);
            push_matrix(m.item_factors);
            push_matrix(m.content_weights);
            break;
        case ContentVariant::vmf:
            push_vector(m.item_bias);
            push_matrix(m.user_factors);
            push_matrix(m.feature_projection);
            break;
        case ContentVariant::amr:
            push_matrix(m.user_factors);
            push_matrix(m.item_factors);
            for (const auto& a : m.gate_vectors) push_vector(a);
            break;
    }
    return Eigen::Map<Eigen::VectorXd>(vals.data(), static_cast<Eigen::Index>(vals.size()));
}

void content_set_parameters(ContentModel& m, const Eigen::VectorXd& theta) {
    Eigen::Index at = 0;
    auto pull_matrix = [&](Eigen::MatrixXd& x) {
        for (Eigen::Index r = 0; r < x.rows(); ++r) {
            for (Eigen::Index c = 0; c < x.cols(); ++c) x(r, c) = theta[at++];
        }
    };
    auto pull_vector = [&](Eigen::VectorXd& x) {
        for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = theta[at++];
    };
    switch (m.variant) {
        case ContentVariant::vbpr:
            pull_matrix(m.user_factors);
            pull_matrix(m.item_factors);
            pull_matrix(m.content_weights);
            break;
        case ContentVariant::vmf:
            pull_vector(m.item_bias);
            pull_matrix(m.user_factors);
            pull_matrix(m.feature_projection);
            break;
        case ContentVariant::amr:
            pull_matrix(m.user_factors);
            pull_matrix(m.item_factors);
            for (auto& a : m.gate_vectors) pull_vector(a);
            break;
    }
}

Eigen::VectorXd bpr_loss_gradient(const ContentModel& m, const std::vector<BprTriple>& triples,
                                  double reg) {
    ContentModel grads = m;  // same shapes, zeroed below
    grads.user_factors.setZero();
    if (grads.item_factors.size()) grads.item_factors.setZero();
    if (grads.item_bias.size()) grads.item_bias.setZero();
    if (grads.content_weights.size()) grads.content_weights.setZero();
    if (grads.feature_projection.size()) grads.feature_projection.setZero();
    for (auto& a : grads.gate_vectors) a.setZero();

    std::vector<Eigen::VectorXd> gate_grads;
    for (const auto& a : m.gate_vectors) gate_grads.push_back(Eigen::VectorXd::Zero(a.size()));

    for (const auto& t : triples) {
        const double sig = sigmoid(-triple_delta(m, t));
        grads.user_factors.row(t.user) += 2.0 * reg * m.user_factors.row(t.user);
        switch (m.variant) {
            case ContentVariant::vbpr: {
                const Eigen::RowVectorXd qdiff =
                    m.item_factors.row(t.pos_item) - m.item_factors.row(t.neg_item);
                const Eigen::RowVectorXd ediff =
                    m.features.fused.row(t.pos_item) - m.features.fused.row(t.neg_item);
                grads.user_factors.row(t.user) += -sig * qdiff;
                grads.item_factors.row(t.pos_item) +=
                    -sig * m.user_factors.row(t.user) + 2.0 * reg * m.item_factors.row(t.pos_item);
                grads.item_factors.row(t.neg_item) +=
                    sig * m.user_factors.row(t.user) + 2.0 * reg * m.item_factors.row(t.neg_item);
                grads.content_weights.row(t.user) +=
                    -sig * ediff + 2.0 * reg * m.content_weights.row(t.user);
                break;
            }
            case ContentVariant::vmf: {
                const Eigen::VectorXd ediff =
                    (m.features.fused.row(t.pos_item) - m.features.fused.row(t.neg_item))
                        .transpose();
                grads.item_bias[t.pos_item] += -sig + 2.0 * reg * m.item_bias[t.pos_item];
                grads.item_bias[t.neg_item] += sig + 2.0 * reg * m.item_bias[t.neg_item];
                grads.user_factors.row(t.user) +=
                    -sig * (m.feature_projection * ediff).transpose();
                grads.feature_projection +=
                    -sig * m.user_factors.row(t.user).transpose() * ediff.transpose() +
                    2.0 * reg * m.feature_projection;
                break;
            }
            case ContentVariant::amr: {
                const Eigen::RowVectorXd qdiff =
                    m.item_factors.row(t.pos_item) - m.item_factors.row(t.neg_item);
                grads.user_factors.row(t.user) += -sig * qdiff;
                grads.item_factors.row(t.pos_item) +=
                    -sig * m.user_factors.row(t.user) + 2.0 * reg * m.item_factors.row(t.pos_item);
                grads.item_factors.row(t.neg_item) +=
                    sig * m.user_factors.row(t.user) + 2.0 * reg * m.item_factors.row(t.neg_item);
                for (auto& g : gate_grads) g.setZero();
                add_gate_gradient(m, t.pos_item, 1.0, gate_grads);
                add_gate_gradient(m, t.neg_item, -1.0, gate_grads);
                for (std::size_t k = 0; k < m.gate_vectors.size(); ++k) {
                    grads.gate_vectors[k] += -sig * gate_grads[k] + 2.0 * reg * m.gate_vectors[k];
                }
                break;
            }
        }
    }
    return content_parameters(grads);
}

}  // namespace recbench::models
