#include <cmath>

#include "recbench/error.hpp"
#include "recbench/models.hpp"
#include "recbench/rng.hpp"

namespace recbench::models {

namespace {

struct Forward {
    Eigen::VectorXd h1, mean, logvar, sigma, z, h2, logits;
    double lse = 0.0;
    double loglik = 0.0;
    double kl = 0.0;
};

Forward run_forward(const VaecfModel& m, const Eigen::VectorXd& x, const Eigen::VectorXd& noise) {
    Forward f;
    f.h1 = (m.enc_hidden_w * x + m.enc_hidden_b).array().tanh();
    f.mean = m.enc_mean_w * f.h1 + m.enc_mean_b;
    f.logvar = m.enc_logvar_w * f.h1 + m.enc_logvar_b;
    f.sigma = (0.5 * f.logvar.array()).exp();
    f.z = f.mean + f.sigma.cwiseProduct(noise);
    f.h2 = (m.dec_hidden_w * f.z + m.dec_hidden_b).array().tanh();
    f.logits = m.dec_out_w * f.h2 + m.dec_out_b;
    const double mx = f.logits.maxCoeff();
    f.lse = mx + std::log((f.logits.array() - mx).exp().sum());
    f.loglik = x.dot(f.logits) - x.sum() * f.lse;
    f.kl = gaussian_kl(f.mean, f.logvar);
    return f;
}

// Gradient blocks mirror the model fields.
struct Grads {
    Eigen::MatrixXd enc_hidden_w, enc_mean_w, enc_logvar_w, dec_hidden_w, dec_out_w;
    Eigen::VectorXd enc_hidden_b, enc_mean_b, enc_logvar_b, dec_hidden_b, dec_out_b;

    static Grads zeros_like(const VaecfModel& m) {
        Grads g;
        g.enc_hidden_w = Eigen::MatrixXd::Zero(m.enc_hidden_w.rows(), m.enc_hidden_w.cols());
        g.enc_hidden_b = Eigen::VectorXd::Zero(m.enc_hidden_b.size());
        g.enc_mean_w = Eigen::MatrixXd::Zero(m.enc_mean_w.rows(), m.enc_mean_w.cols());
        g.enc_mean_b = Eigen::VectorXd::Zero(m.enc_mean_b.size());
        g.enc_logvar_w = Eigen::MatrixXd::Zero(m.enc_logvar_w.rows(), m.enc_logvar_w.cols());
        g.enc_logvar_b = Eigen::VectorXd::Zero(m.enc_logvar_b.size());
        g.dec_hidden_w = Eigen::MatrixXd::Zero(m.dec_hidden_w.rows(), m.dec_hidden_w.cols());
        g.dec_hidden_b = Eigen::VectorXd::Zero(m.dec_hidden_b.size());
        g.dec_out_w = Eigen::MatrixXd::Zero(m.dec_out_w.rows(), m.dec_out_w.cols());
        g.dec_out_b = Eigen::VectorXd::Zero(m.dec_out_b.size());
        return g;
    }
};

// Backprop of loss = -loglik + beta * KL for one user.
void run_backward(const VaecfModel& m, const Eigen::VectorXd& x, const Eigen::VectorXd& noise,
                  double beta, const Forward& f, Grads& g) {
    const Eigen::VectorXd softmax = (f.logits.array() - f.lse).exp();
    const Eigen::VectorXd dlogits = -x + x.sum() * softmax;
    g.dec_out_w += dlogits * f.h2.transpose();
    g.dec_out_b += dlogits;
    const Eigen::VectorXd dh2 = m.dec_out_w.transpose() * dlogits;
    const Eigen::VectorXd da2 = dh2.cwiseProduct((1.0 - f.h2.array().square()).matrix());
    g.dec_hidden_w += da2 * f.z.transpose();
    g.dec_hidden_b += da2;
    const Eigen::VectorXd dz = m.dec_hidden_w.transpose() * da2;
    const Eigen::VectorXd dmean = dz + beta * f.mean;
    const Eigen::VectorXd dlogvar =
        0.5 * dz.cwiseProduct(noise).cwiseProduct(f.sigma) +
        0.5 * beta * (f.logvar.array().exp() - 1.0).matrix();
    g.enc_mean_w += dmean * f.h1.transpose();
    g.enc_mean_b += dmean;
    g.enc_logvar_w += dlogvar * f.h1.transpose();
    g.enc_logvar_b += dlogvar;
    const Eigen::VectorXd dh1 =
        m.enc_mean_w.transpose() * dmean + m.enc_logvar_w.transpose() * dlogvar;
    const Eigen::VectorXd da1 = dh1.cwiseProduct((1.0 - f.h1.array().square()).matrix());
    g.enc_hidden_w += da1 * x.transpose();
    g.enc_hidden_b += da1;
}

template <typename F>
void for_each_block(VaecfModel& m, Grads& g, Grads& adam_m, Grads& adam_v, F&& f) {
    f(m.enc_hidden_w, g.enc_hidden_w, adam_m.enc_hidden_w, adam_v.enc_hidden_w);
    f(m.enc_hidden_b, g.enc_hidden_b, adam_m.enc_hidden_b, adam_v.enc_hidden_b);
    f(m.enc_mean_w, g.enc_mean_w, adam_m.enc_mean_w, adam_v.enc_mean_w);
    f(m.enc_mean_b, g.enc_mean_b, adam_m.enc_mean_b, adam_v.enc_mean_b);
    f(m.enc_logvar_w, g.enc_logvar_w, adam_m.enc_logvar_w, adam_v.enc_logvar_w);
    f(m.enc_logvar_b, g.enc_logvar_b, adam_m.enc_logvar_b, adam_v.enc_logvar_b);
    f(m.dec_hidden_w, g.dec_hidden_w, adam_m.dec_hidden_w, adam_v.dec_hidden_w);
    f(m.dec_hidden_b, g.dec_hidden_b, adam_m.dec_hidden_b, adam_v.dec_hidden_b);
    f(m.dec_out_w, g.dec_out_w, adam_m.dec_out_w, adam_v.dec_out_w);
    f(m.dec_out_b, g.dec_out_b, adam_m.dec_out_b, adam_v.dec_out_b);
}

Eigen::MatrixXd init_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
    Eigen::MatrixXd m(rows, cols);
    const double scale = 1.0 / std::sqrt(static_cast<double>(cols));
    for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = scale * rng.normal();
    }
    return m;
}

}  // namespace

double gaussian_kl(const Eigen::VectorXd& mean, const Eigen::VectorXd& logvar) {
    return 0.5 * (mean.array().square() + logvar.array().exp() - 1.0 - logvar.array()).sum();
}

Eigen::VectorXd VaecfModel::user_input(int user) const {
    Eigen::VectorXd x = Eigen::VectorXd::Zero(num_items());
    for (int item : train_positives[user]) x[item] = 1.0;
    return x;
}

Eigen::VectorXd VaecfModel::decode_logits(const Eigen::VectorXd& x) const {
    // Posterior mean, no sampling: scoring stays deterministic.
    const Eigen::VectorXd h1 = (enc_hidden_w * x + enc_hidden_b).array().tanh();
    const Eigen::VectorXd mean = enc_mean_w * h1 + enc_mean_b;
    const Eigen::VectorXd h2 = (dec_hidden_w * mean + dec_hidden_b).array().tanh();
    return dec_out_w * h2 + dec_out_b;
}

void VaecfModel::score_items(int user, Eigen::VectorXd& out) const {
    out = decode_logits(user_input(user));
}

VaecfModel train_vaecf(const TrainData& data, const HyperParams& hp) {
    hp.validate();
    bool any = false;
    for (int u = 0; u < data.n_users && !any; ++u) any = data.user_seen(u);
    if (!any) throw DataError("train_vaecf: no user has a train item");

    VaecfModel m;
    m.hp = hp;
    Rng rng(hp.seed);
    m.enc_hidden_w = init_matrix(hp.hidden_dim, data.n_items, rng);
    m.enc_hidden_b = Eigen::VectorXd::Zero(hp.hidden_dim);
    m.enc_mean_w = init_matrix(hp.z_dim, hp.hidden_dim, rng);
    m.enc_mean_b = Eigen::VectorXd::Zero(hp.z_dim);
    m.enc_logvar_w = init_matrix(hp.z_dim, hp.hidden_dim, rng);
    m.enc_logvar_b = Eigen::VectorXd::Zero(hp.z_dim);
    m.dec_hidden_w = init_matrix(hp.hidden_dim, hp.z_dim, rng);
    m.dec_hidden_b = Eigen::VectorXd::Zero(hp.hidden_dim);
    m.dec_out_w = init_matrix(data.n_items, hp.hidden_dim, rng);
    m.dec_out_b = Eigen::VectorXd::Zero(data.n_items);
    m.train_positives = data.positives;
    m.popularity = data.item_popularity;

    std::vector<int> train_users;
    for (int u = 0; u < data.n_users; ++u) {
        if (data.user_seen(u)) train_users.push_back(u);
    }

    Grads grad = Grads::zeros_like(m);
    Grads adam_m = Grads::zeros_like(m);
    Grads adam_v = Grads::zeros_like(m);
    const double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;
    long long step = 0;

    for (int epoch = 0; epoch < hp.epochs; ++epoch) {
        rng.shuffle(train_users);
        double elbo_sum = 0.0;
        for (int u : train_users) {
            const Eigen::VectorXd x = m.user_input(u);
            Eigen::VectorXd noise(hp.z_dim);
            for (int j = 0; j < hp.z_dim; ++j) noise[j] = rng.normal();

            const Forward f = run_forward(m, x, noise);
            elbo_sum += f.loglik - hp.beta * f.kl;

            for_each_block(m, grad, adam_m, adam_v,
                           [](auto& /*p*/, auto& g, auto&, auto&) { g.setZero(); });
            run_backward(m, x, noise, hp.beta, f, grad);

            ++step;
            const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step));
            const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step));
            const double lr = hp.learning_rate;
            for_each_block(m, grad, adam_m, adam_v, [&](auto& p, auto& g, auto& mm, auto& vv) {
                mm = beta1 * mm + (1.0 - beta1) * g;
                vv = beta2 * vv + (1.0 - beta2) * g.cwiseProduct(g);
                p.array() -=
                    lr * (mm.array() / bc1) / ((vv.array() / bc2).sqrt() + adam_eps);
            });
        }
        const double mean_elbo = elbo_sum / static_cast<double>(train_users.size());
        if (!std::isfinite(mean_elbo)) {
            throw DivergenceError(epoch + 1, hp.learning_rate,
                                  "train_vaecf diverged at epoch " + std::to_string(epoch + 1) +
                                      " (lr=" + std::to_string(hp.learning_rate) + ")");
        }
        m.elbo_trace.push_back(mean_elbo);
    }
    return m;
}

double vaecf_loss(const VaecfModel& m, const Eigen::VectorXd& x, const Eigen::VectorXd& noise,
                  double beta) {
    const Forward f = run_forward(m, x, noise);
    return -(f.loglik - beta * f.kl);
}

// Flat layout: the ten blocks in declaration order, matrices row-major.
Eigen::VectorXd vaecf_parameters(const VaecfModel& m) {
    VaecfModel& mm = const_cast<VaecfModel&>(m);
    Grads dummy = Grads::zeros_like(m);
    Eigen::Index total = 0;
    for_each_block(mm, dummy, dummy, dummy,
                   [&](auto& p, auto&, auto&, auto&) { total += p.size(); });
    Eigen::VectorXd theta(total);
    Eigen::Index at = 0;
    for_each_block(mm, dummy, dummy, dummy, [&](auto& p, auto&, auto&, auto&) {
        for (Eigen::Index r = 0; r < p.rows(); ++r) {
            for (Eigen::Index c = 0; c < p.cols(); ++c) theta[at++] = p(r, c);
        }
    });
    return theta;
}

void vaecf_set_parameters(VaecfModel& m, const Eigen::VectorXd& theta) {
    Grads dummy = Grads::zeros_like(m);
    Eigen::Index at = 0;
    for_each_block(m, dummy, dummy, dummy, [&](auto& p, auto&, auto&, auto&) {
        for (Eigen::Index r = 0; r < p.rows(); ++r) {
            for (Eigen::Index c = 0; c < p.cols(); ++c) p(r, c) = theta[at++];
        }
    });
}

Eigen::VectorXd vaecf_loss_gradient(const VaecfModel& m, const Eigen::VectorXd& x,
                                    const Eigen::VectorXd& noise, double beta) {
    const Forward f = run_forward(m, x, noise);
    Grads g = Grads::zeros_like(m);
    run_backward(m, x, noise, beta, f, g);
    VaecfModel& mm = const_cast<VaecfModel&>(m);
    Grads dummy = Grads::zeros_like(m);
    Eigen::Index total = 0;
    for_each_block(mm, g, dummy, dummy,
                   [&](auto& p, auto&, auto&, auto&) { total += p.size(); });
    Eigen::VectorXd grad(total);
    Eigen::Index at = 0;
    for_each_block(mm, g, dummy, dummy, [&](auto&, auto& gb, auto&, auto&) {
        for (Eigen::Index r = 0; r < gb.rows(); ++r) {
            for (Eigen::Index c = 0; c < gb.cols(); ++c) grad[at++] = gb(r, c);
        }
    });
    return grad;
}

}  // namespace recbench::models
