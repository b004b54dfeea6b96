#include <cmath>

#include "recbench/error.hpp"
#include "recbench/models.hpp"
#include "recbench/rng.hpp"

namespace recbench::models {

namespace {

double predict(const MfModel& m, int u, int i) {
    return m.global_bias + m.user_bias[u] + m.item_bias[i] +
           m.user_factors.row(u).dot(m.item_factors.row(i));
}

}  // namespace

void MfModel::score_items(int user, Eigen::VectorXd& out) const {
    out = item_factors * user_factors.row(user).transpose();
    out.array() += global_bias + user_bias[user];
    out += item_bias;
}

bool MfModel::is_cold_user(int user) const {
    return user >= 0 && user < static_cast<int>(user_seen.size()) && !user_seen[user];
}

MfModel train_mf(const TrainData& data, const HyperParams& hp) {
    hp.validate();
    if (data.n_events == 0) throw DataError("train_mf: no train events");

    MfModel m;
    m.hp = hp;
    m.global_bias = data.mean_rating;
    m.user_bias = Eigen::VectorXd::Zero(data.n_users);
    m.item_bias = Eigen::VectorXd::Zero(data.n_items);
    m.user_factors.resize(data.n_users, hp.latent_dim);
    m.item_factors.resize(data.n_items, hp.latent_dim);
    m.popularity = data.item_popularity;
    m.user_seen.resize(data.n_users);
    for (int u = 0; u < data.n_users; ++u) m.user_seen[u] = data.user_seen(u) ? 1 : 0;

    Rng rng(hp.seed);
    for (int u = 0; u < data.n_users; ++u) {
        for (int f = 0; f < hp.latent_dim; ++f) m.user_factors(u, f) = 0.01 * rng.normal();
    }
    for (int i = 0; i < data.n_items; ++i) {
        for (int f = 0; f < hp.latent_dim; ++f) m.item_factors(i, f) = 0.01 * rng.normal();
    }

    std::vector<corpus::Interaction> events;
    events.reserve(data.n_events);
    for (int u = 0; u < data.n_users; ++u) {
        for (const auto& [item, rating] : data.events_by_user[u]) {
            events.push_back({u, item, rating, 0});
        }
    }

    std::vector<std::size_t> order(events.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    const double lr = hp.learning_rate;
    const double reg = hp.reg;
    for (int epoch = 0; epoch < hp.epochs; ++epoch) {
        rng.shuffle(order);
        for (std::size_t pos : order) {
            const auto& e = events[pos];
            const double err = e.rating - predict(m, e.user, e.item);
            m.global_bias += lr * 2.0 * err;
            m.user_bias[e.user] += lr * 2.0 * err;
            m.item_bias[e.item] += lr * 2.0 * err;
            const Eigen::RowVectorXd pu = m.user_factors.row(e.user);
            m.user_factors.row(e.user) +=
                lr * 2.0 * (err * m.item_factors.row(e.item) - reg * pu);
            m.item_factors.row(e.item) += lr * 2.0 * (err * pu - reg * m.item_factors.row(e.item));
        }
        const double loss = mf_loss(m, events, reg);
        if (!std::isfinite(loss)) {
            throw DivergenceError(epoch + 1, lr,
                                  "train_mf diverged at epoch " + std::to_string(epoch + 1) +
                                      " (lr=" + std::to_string(lr) + ")");
        }
        m.loss_trace.push_back(loss);
    }
    return m;
}

double mf_loss(const MfModel& model, const std::vector<corpus::Interaction>& events, double reg) {
    double loss = 0.0;
    for (const auto& e : events) {
        const double err = e.rating - predict(model, e.user, e.item);
        loss += err * err + reg * (model.user_factors.row(e.user).squaredNorm() +
                                   model.item_factors.row(e.item).squaredNorm());
    }
    return loss;
}

// Flat layout: [mu, b_u (|U|), b_i (|I|), P row-major, Q row-major].
Eigen::VectorXd mf_parameters(const MfModel& m) {
    const int n_users = m.num_users();
    const int n_items = m.num_items();
    const int d = static_cast<int>(m.user_factors.cols());
    Eigen::VectorXd theta(1 + n_users + n_items + (n_users + n_items) * d);
    Eigen::Index at = 0;
    theta[at++] = m.global_bias;
    theta.segment(at, n_users) = m.user_bias;
    at += n_users;
    theta.segment(at, n_items) = m.item_bias;
    at += n_items;
    for (int u = 0; u < n_users; ++u, at += d) theta.segment(at, d) = m.user_factors.row(u);
    for (int i = 0; i < n_items; ++i, at += d) theta.segment(at, d) = m.item_factors.row(i);
    return theta;
}

void mf_set_parameters(MfModel& m, const Eigen::VectorXd& theta) {
    const int n_users = m.num_users();
    const int n_items = m.num_items();
    const int d = static_cast<int>(m.user_factors.cols());
    Eigen::Index at = 0;
    m.global_bias = theta[at++];
    m.user_bias = theta.segment(at, n_users);
    at += n_users;
    m.item_bias = theta.segment(at, n_items);
    at += n_items;
    for (int u = 0; u < n_users; ++u, at += d) m.user_factors.row(u) = theta.segment(at, d);
    for (int i = 0; i < n_items; ++i, at += d) m.item_factors.row(i) = theta.segment(at, d);
}

Eigen::VectorXd mf_loss_gradient(const MfModel& m,
                                 const std::vector<corpus::Interaction>& events, double reg) {
    const int n_users = m.num_users();
    const int n_items = m.num_items();
    const int d = static_cast<int>(m.user_factors.cols());
    double g_mu = 0.0;
    Eigen::VectorXd g_bu = Eigen::VectorXd::Zero(n_users);
    Eigen::VectorXd g_bi = Eigen::VectorXd::Zero(n_items);
    Eigen::MatrixXd g_p = Eigen::MatrixXd::Zero(n_users, d);
    Eigen::MatrixXd g_q = Eigen::MatrixXd::Zero(n_items, d);
    for (const auto& e : events) {
        const double err = e.rating - predict(m, e.user, e.item);
        g_mu += -2.0 * err;
        g_bu[e.user] += -2.0 * err;
        g_bi[e.item] += -2.0 * err;
        g_p.row(e.user) +=
            -2.0 * err * m.item_factors.row(e.item) + 2.0 * reg * m.user_factors.row(e.user);
        g_q.row(e.item) +=
            -2.0 * err * m.user_factors.row(e.user) + 2.0 * reg * m.item_factors.row(e.item);
    }
    Eigen::VectorXd grad(1 + n_users + n_items + (n_users + n_items) * d);
    Eigen::Index at = 0;
    grad[at++] = g_mu;
    grad.segment(at, n_users) = g_bu;
    at += n_users;
    grad.segment(at, n_items) = g_bi;
    at += n_items;
    for (int u = 0; u < n_users; ++u, at += d) grad.segment(at, d) = g_p.row(u);
    for (int i = 0; i < n_items; ++i, at += d) grad.segment(at, d) = g_q.row(i);
    return grad;
}

}  // namespace recbench::models
