#pragma once

#include "ppr/common.hpp"
#include "ppr/constraints.hpp"
#include "ppr/random.hpp"

#include "json.hpp"

#include <vector>

namespace ppr {

// ---------------------------------------------------------------- transport

struct SinkhornOptions {
    /// Entropic regularization; <= 0 selects 0.05 x the median pairwise
    /// squared distance of the pooled clouds.
    double eps = 0.0;
    int max_iters = 5000;
    /// L1 marginal violation at which iteration stops.
    double tol = 1e-9;
};

struct SinkhornResult {
    double divergence = 0.0;
    double eps = 0.0;
    bool converged = true;
};

/// Entropic OT cost with squared-Euclidean cost and uniform weights (dual
/// value of the log-domain iteration).
double entropic_ot(const PointCloud& A, const PointCloud& B, double eps, int max_iters, double tol,
                   bool* converged = nullptr);
/// OT(A,B) - OT(A,A)/2 - OT(B,B)/2, clamped at 0.
SinkhornResult sinkhorn_divergence(const PointCloud& A, const PointCloud& B, const SinkhornOptions& opt = {});
double median_pairwise_sq_distance(const PointCloud& A, const PointCloud& B);

/// Rows drawn without replacement.
PointCloud subsample_rows(const PointCloud& cloud, Eigen::Index count, Rng& rng);

// ---------------------------------------------------------------- k-NN

/// Indices of the k nearest neighbours (Euclidean, self excluded, ties by
/// index) of every row.
std::vector<std::vector<Eigen::Index>> knn_graph(const PointCloud& points, int k);

/// Cross-edge fraction of the directed k-NN graph on the pooled clouds.
double cross_edge_rate(const PointCloud& A, const PointCloud& B, int k);
/// Mean over repeats of cross_edge_rate on `subsample` rows of each cloud.
double knn_cross_edge_rate(const PointCloud& A, const PointCloud& B, int k, int subsample, int repeats, Rng& rng);

// ---------------------------------------------------------------- violation

/// Linear-interpolation quantile of unsorted values, q in [0, 1].
double quantile(std::vector<double> values, double q);

struct ViolationStats {
    double median = 0.0, q25 = 0.0, q75 = 0.0, max = 0.0, mean = 0.0;
    /// Histogram of log10(c + 1e-6): bin edges (size bins + 1) and counts.
    std::vector<double> edges;
    std::vector<long> counts;

    nlohmann::json to_json() const;
};

inline constexpr double kViolationFloor = 1e-6;

ViolationStats violation_stats(const Vec& values);
ViolationStats violation_stats(const PointCloud& cloud, const Constraint& constraint);

// ---------------------------------------------------------------- ensembles

struct EnsembleScores {
    double skill = 0.0;
    double spread = 0.0;
    /// NaN when skill is 0.
    double ratio = 0.0;
    double crps = 0.0;
    int members = 0;
    int cases = 0;
    int field_size = 0;

    nlohmann::json to_json() const;
};

/// ensembles[k] holds the M members of case k as rows (flattened fields);
/// truths holds the K true fields as rows.
EnsembleScores ensemble_scores(const std::vector<Matrix>& ensembles, const Matrix& truths);

// ---------------------------------------------------------------- continuity

struct ContinuityScore {
    double mean_step_norm = 0.0;
    double max_step_norm = 0.0;
};

/// Norms of consecutive row differences of a time-major field.
ContinuityScore continuity_norms(const Matrix& field);

}  // namespace ppr
