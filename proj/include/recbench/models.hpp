#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "recbench/interactions.hpp"

namespace recbench::models {

struct HyperParams {
    int latent_dim = 16;
    double learning_rate = 0.05;
    double reg = 0.01;
    int epochs = 30;
    int negatives_per_positive = 1;
    double beta = 1.0;   // VAECF KL weight
    int hidden_dim = 64; // VAECF
    int z_dim = 16;      // VAECF
    std::uint64_t seed = 42;

    void validate() const;
};

// Training-side view of (log, plan): train events grouped per user.
struct TrainData {
    int n_users = 0;
    int n_items = 0;
    std::size_t n_events = 0;
    double mean_rating = 0.0;
    std::vector<std::vector<std::pair<int, double>>> events_by_user;  // (item, rating)
    std::vector<std::vector<int>> positives;                          // sorted item indices
    std::vector<int> item_popularity;                                 // train counts

    static TrainData from_split(const corpus::InteractionLog& log, const corpus::SplitPlan& plan);
    static TrainData from_events(int n_users, int n_items,
                                 const std::vector<corpus::Interaction>& events);
    bool user_seen(int user) const { return !events_by_user[user].empty(); }
};

struct RankedList {
    int user = 0;
    std::vector<int> items;
    std::vector<double> scores;  // non-increasing
};

// Item features handed to the content-aware variants. vbpr/vmf consume the
// fused matrix; amr consumes the per-modality blocks.
struct ContentFeatures {
    Eigen::MatrixXd fused;                    // n_items x d_e
    std::vector<Eigen::MatrixXd> blocks;      // n_items x d_m each
};

class Recommender {
public:
    virtual ~Recommender() = default;
    virtual std::string family() const = 0;
    virtual int num_users() const = 0;
    virtual int num_items() const = 0;
    // Equation scores for every catalog item; pure in (model, user).
    virtual void score_items(int user, Eigen::VectorXd& out) const = 0;
    // True when the user had no train events; recommend_topk then ranks by
    // train popularity instead of untrained parameters.
    virtual bool is_cold_user(int user) const = 0;
    virtual const std::vector<int>& item_popularity() const = 0;
};

// ---------------------------------------------------------------------------
// Matrix factorization: r = mu + b_u + b_i + p_u . q_i, squared error + L2.

struct MfModel final : Recommender {
    double global_bias = 0.0;
    Eigen::VectorXd user_bias;
    Eigen::VectorXd item_bias;
    Eigen::MatrixXd user_factors;  // |U| x d
    Eigen::MatrixXd item_factors;  // |I| x d
    HyperParams hp;
    std::vector<double> loss_trace;  // per-epoch objective
    std::vector<char> user_seen;
    std::vector<int> popularity;

    std::string family() const override { return "mf"; }
    int num_users() const override { return static_cast<int>(user_factors.rows()); }
    int num_items() const override { return static_cast<int>(item_factors.rows()); }
    void score_items(int user, Eigen::VectorXd& out) const override;
    bool is_cold_user(int user) const override;
    const std::vector<int>& item_popularity() const override { return popularity; }
};

MfModel train_mf(const TrainData& data, const HyperParams& hp);

// Exact loss and gradient of the regularized squared error over `events`,
// as a flat parameter vector [mu, b_u, b_i, P(row major), Q(row major)].
double mf_loss(const MfModel& model, const std::vector<corpus::Interaction>& events, double reg);
Eigen::VectorXd mf_parameters(const MfModel& model);
void mf_set_parameters(MfModel& model, const Eigen::VectorXd& theta);
Eigen::VectorXd mf_loss_gradient(const MfModel& model,
                                 const std::vector<corpus::Interaction>& events, double reg);

// ---------------------------------------------------------------------------
// VAECF: encoder/decoder over the user's binary interaction vector.

struct VaecfModel final : Recommender {
    Eigen::MatrixXd enc_hidden_w;  // hidden x |I|
    Eigen::VectorXd enc_hidden_b;
    Eigen::MatrixXd enc_mean_w;    // z x hidden
    Eigen::VectorXd enc_mean_b;
    Eigen::MatrixXd enc_logvar_w;  // z x hidden
    Eigen::VectorXd enc_logvar_b;
    Eigen::MatrixXd dec_hidden_w;  // hidden x z
    Eigen::VectorXd dec_hidden_b;
    Eigen::MatrixXd dec_out_w;     // |I| x hidden
    Eigen::VectorXd dec_out_b;
    HyperParams hp;
    std::vector<double> elbo_trace;  // per-epoch mean ELBO
    std::vector<std::vector<int>> train_positives;  // forms x_u at inference
    std::vector<int> popularity;

    std::string family() const override { return "vaecf"; }
    int num_users() const override { return static_cast<int>(train_positives.size()); }
    int num_items() const override { return static_cast<int>(dec_out_w.rows()); }
    void score_items(int user, Eigen::VectorXd& out) const override;
    bool is_cold_user(int) const override { return false; }  // zero input is valid
    const std::vector<int>& item_popularity() const override { return popularity; }

    Eigen::VectorXd user_input(int user) const;
    // Posterior-mean decoder logits for an arbitrary interaction vector.
    Eigen::VectorXd decode_logits(const Eigen::VectorXd& x) const;
};

VaecfModel train_vaecf(const TrainData& data, const HyperParams& hp);

// Diagonal-Gaussian KL against the standard normal, in nats.
double gaussian_kl(const Eigen::VectorXd& mean, const Eigen::VectorXd& logvar);

// Negative per-user ELBO with a frozen noise draw, plus its exact gradient
// over the flat parameter vector; the finite-difference suite drives these.
double vaecf_loss(const VaecfModel& model, const Eigen::VectorXd& x, const Eigen::VectorXd& noise,
                  double beta);
Eigen::VectorXd vaecf_parameters(const VaecfModel& model);
void vaecf_set_parameters(VaecfModel& model, const Eigen::VectorXd& theta);
Eigen::VectorXd vaecf_loss_gradient(const VaecfModel& model, const Eigen::VectorXd& x,
                                    const Eigen::VectorXd& noise, double beta);

// ---------------------------------------------------------------------------
// Content-aware BPR variants.

enum class ContentVariant { vbpr, vmf, amr };

struct BprTriple {
    int user;
    int pos_item;
    int neg_item;
};

struct ContentModel final : Recommender {
    ContentVariant variant = ContentVariant::vbpr;
    double global_bias = 0.0;       // vmf scoring only; frozen under BPR
    Eigen::VectorXd user_bias;      // vmf scoring only; frozen under BPR
    Eigen::VectorXd item_bias;      // vmf
    Eigen::MatrixXd user_factors;   // |U| x d
    Eigen::MatrixXd item_factors;   // |I| x d (vbpr, amr)
    Eigen::MatrixXd content_weights;  // vbpr: |U| x d_e
    Eigen::MatrixXd feature_projection;  // vmf: d x d_e
    std::vector<Eigen::VectorXd> gate_vectors;  // amr: a_m per modality
    ContentFeatures features;
    HyperParams hp;
    std::vector<double> loss_trace;
    std::vector<char> user_seen;
    std::vector<int> popularity;

    std::string family() const override;
    int num_users() const override { return static_cast<int>(user_factors.rows()); }
    int num_items() const override;
    void score_items(int user, Eigen::VectorXd& out) const override;
    bool is_cold_user(int user) const override;
    const std::vector<int>& item_popularity() const override { return popularity; }

    // Modality attention for one item (amr); weights sum to 1.
    Eigen::VectorXd gate_attention(int item) const;
};

ContentModel train_content(const TrainData& data, const ContentFeatures& features,
                           ContentVariant variant, const HyperParams& hp);

// BPR surrogate over a fixed triple set: sum of -ln sigma(delta) plus reg on
// the parameters each triple touches. Flat layout per variant is documented
// in the implementation.
double bpr_loss(const ContentModel& model, const std::vector<BprTriple>& triples, double reg);
Eigen::VectorXd content_parameters(const ContentModel& model);
void content_set_parameters(ContentModel& model, const Eigen::VectorXd& theta);
Eigen::VectorXd bpr_loss_gradient(const ContentModel& model, const std::vector<BprTriple>& triples,
                                  double reg);

// ---------------------------------------------------------------------------

double score(const Recommender& model, int user, int item);

// Top-n over all non-excluded items, descending score, ties broken by
// ascending item index. exclude must be sorted.
RankedList recommend_topk(const Recommender& model, int user, int n,
                          const std::vector<int>& exclude);

// Batch recommendation across users; the per-user loop is the OpenMP kernel,
// threads <= 1 is the serial reference. Output order follows `users`.
std::vector<RankedList> recommend_all(const Recommender& model, const std::vector<int>& users,
                                      int n, const std::vector<std::vector<int>>& exclude,
                                      int threads = 1);

// Bit-exact checkpoint (JSON, versioned).
void save_model(const Recommender& model, const std::string& path);
std::unique_ptr<Recommender> load_model(const std::string& path);

const char* to_string(ContentVariant v);
ContentVariant content_variant_from_string(const std::string& s);

}  // namespace recbench::models
