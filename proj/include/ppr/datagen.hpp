#pragma once

#include "ppr/common.hpp"
#include "ppr/random.hpp"

#include "json.hpp"

#include <vector>

namespace ppr {

/// Per-coordinate affine standardization (x - mean) / std.
struct Standardization {
    Vec mean;
    Vec std;

    PointCloud apply(const PointCloud& raw) const;
    PointCloud invert(const PointCloud& standardized) const;
    nlohmann::json to_json() const;
    static Standardization from_json(const nlohmann::json& j);
    static Standardization estimate(const PointCloud& raw);
};

/// Number of draws used to estimate standardization statistics.
inline constexpr int kStandardizationDraws = 100000;

struct Checkerboard2D {
    int grid_size = 4;
    double jitter = 0.0;

    void validate() const;
    nlohmann::json to_json() const;
};

/// Draws on the non-standardized law. Cell indices go to `cells` (i, j per
/// row) when non-null; jitter is applied after the cell draw.
PointCloud checkerboard_raw(const Checkerboard2D& params, int n, Rng& rng,
                            Eigen::MatrixXi* cells = nullptr);
/// Statistics of the non-standardized law from a fixed-seed pre-pass.
Standardization checkerboard_stats(const Checkerboard2D& params);
PointCloud checkerboard_sample(const Checkerboard2D& params, int n, Rng& rng);

struct BananaGmm {
    std::vector<double> weights;
    std::vector<Eigen::Vector2d> means;
    std::vector<Eigen::Vector2d> stds;
    double curvature = 0.0;

    void validate() const;
    /// E[z_1^2] under the mixture, before the shear.
    double first_coordinate_second_moment() const;
    nlohmann::json to_json() const;
    static BananaGmm defaults();
};

PointCloud banana_raw(const BananaGmm& params, int n, Rng& rng,
                      std::vector<int>* components = nullptr);
Standardization banana_stats(const BananaGmm& params);
PointCloud banana_sample(const BananaGmm& params, int n, Rng& rng);

}  // namespace ppr
