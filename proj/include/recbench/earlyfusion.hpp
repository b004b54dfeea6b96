#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "recbench/textprep.hpp"

namespace recbench::earlyfusion {

using textprep::EmbeddingTable;
using textprep::Modality;

struct FeatureBlock {
    Modality modality;
    std::string variant;
    Eigen::MatrixXd matrix;  // n_items x dim, rows follow AlignedFeatures::item_ids
};

// Per-modality tables restricted to their shared item keys, one row order
// for every block.
struct AlignedFeatures {
    std::vector<std::string> item_ids;  // key intersection, sorted by external id
    std::vector<FeatureBlock> blocks;
    std::vector<int> dropped_per_table;  // keys each input lost to the intersection

    int num_items() const { return static_cast<int>(item_ids.size()); }
    std::vector<int> block_dims() const;
    Eigen::MatrixXd concatenated() const;
};

enum class FusionOp { concat, pca, cca };

// Fitted projection, reusable across runs. means/stds cover the full
// concatenated width; a zero std marks a constant column that was excluded
// from the eigenproblem and maps to 0 under scaling.
struct FusionProjection {
    FusionOp kind = FusionOp::pca;
    Eigen::VectorXd means;
    Eigen::VectorXd stds;
    Eigen::MatrixXd loadings;         // pca: d x d_rho; cca: d1 x k (view-1 map)
    int retained = 0;                 // d_rho or k
    Eigen::VectorXd spectrum;         // pca: eigenvalues desc; cca: canonical correlations
    int split_dim = 0;                // cca only: columns in view 1 (= ceil(d/2))
    double param = 0.0;               // rho or k as configured

    Eigen::MatrixXd apply(const Eigen::MatrixXd& concatenated) const;
};

struct FusedFeatures {
    std::vector<std::string> item_ids;
    Eigen::MatrixXd matrix;  // n_items x d_f
    FusionOp op = FusionOp::concat;
    std::optional<FusionProjection> projection;  // pca/cca only

    int dim() const { return static_cast<int>(matrix.cols()); }
};

// Key intersection sorted by external id; throws when no item survives.
AlignedFeatures align(const std::vector<EmbeddingTable>& tables);

// Block-wise concatenation; blocks are ordered (audio, visual, text) when
// all three modalities are present, otherwise in aligned order.
FusedFeatures fuse_concat(const AlignedFeatures& aligned);

// z-score columns, eigendecompose the covariance, keep the smallest d_rho
// whose cumulative variance ratio reaches rho.
FusedFeatures fit_apply_pca(const AlignedFeatures& aligned, double rho);

// Split the concatenated vector into two views, solve ridge-regularized
// CCA, keep the first k canonical dimensions of the view-1 projection.
// split_dim 0 means the default halves split (first view gets ceil(d/2)
// columns); a positive value places the boundary explicitly, which lets
// callers align the views with modality boundaries.
FusedFeatures fit_apply_cca(const AlignedFeatures& aligned, int k, int split_dim = 0);

// Experimental mid-fusion: project each modality block on its own
// (pca with `rho`, or cca with `k` splitting the block in half), then
// concatenate the projected blocks.
FusedFeatures fuse_mid(const AlignedFeatures& aligned, FusionOp op, double rho, int k);

// Versioned on-disk record (JSON); doubles survive the round trip exactly.
void save_projection(const FusionProjection& proj, const std::string& path);
FusionProjection load_projection(const std::string& path);

const char* to_string(FusionOp op);
FusionOp fusion_op_from_string(const std::string& s);

}  // namespace recbench::earlyfusion
