#pragma once

#include "ppr/common.hpp"
#include "ppr/datagen.hpp"
#include "ppr/random.hpp"

#include "json.hpp"

#include <complex>
#include <memory>
#include <vector>

namespace ppr {

struct KsParams {
    int grid = 128;
    double length = 64.0;
    double dt = 0.1;
    int steps = 512;
    double newton_tol = 1e-9;
    int newton_max_iter = 50;

    void validate() const;
    double dx() const { return length / grid; }
    nlohmann::json to_json() const;
    static KsParams from_json(const nlohmann::json& j);
};

/// Rows are time levels; row 0 is the initial condition.
struct Trajectory {
    Matrix values;
    double dt = 0.0;
    double dx = 0.0;
    /// Final residual infinity norm of each implicit step (empty when not solved).
    std::vector<double> residuals;
};

/// Real-to-complex FFT of fixed length with spectral differentiation on a
/// periodic interval. Planning is serialized internally.
class SpectralDerivative {
public:
    SpectralDerivative(int n, double length);
    ~SpectralDerivative();
    SpectralDerivative(const SpectralDerivative&) = delete;
    SpectralDerivative& operator=(const SpectralDerivative&) = delete;

    int size() const { return n_; }
    /// Wavenumber of Fourier bin k in [0, n/2].
    double wavenumber(int k) const;

    /// Coefficients for bins [0, n/2], unnormalized.
    Eigen::VectorXcd forward(const Vec& u);
    /// Inverse of forward(), including the 1/n normalization.
    Vec inverse(const Eigen::VectorXcd& coeffs);

    Vec derivative(const Vec& u, int order);

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
    int n_;
    double length_;
};

Trajectory ks_solve(const Vec& u0, const KsParams& params);

/// Sum of ten cosine modes a_k cos(2 pi w_k x / L + phi_k) with integer w_k
/// in {1..5}. The drawn modes are written to `modes` when non-null.
Vec ks_initial_condition(const KsParams& params, Rng& rng, std::vector<int>* modes = nullptr);

/// Block area-average of `field` down to rows x cols; both must divide evenly.
Matrix downsample_area(const Matrix& field, int rows, int cols);

struct KsDataset {
    std::vector<Trajectory> trajectories;
    double mean = 0.0;
    double std = 1.0;

    /// One flattened time-major row per trajectory.
    PointCloud as_cloud() const;
    Matrix to_physical(const Matrix& standardized) const;
};

/// Solves `count` trajectories, keeps the second half (the last steps/2
/// levels), area-averages to out_rows x out_cols and standardizes with a
/// single dataset-wide mean and std.
KsDataset prepare_ks_dataset(int count, const KsParams& params, int out_rows, int out_cols, Rng& rng);

}  // namespace ppr

