#pragma once

#include "ppr/common.hpp"

namespace ppr {

/// Posterior-mean estimator d(x, sigma) ~ E[x0 | x_t = x] together with its
/// vector-Jacobian product. Implementations are immutable after construction
/// and safe to share between concurrent callers.
class Denoiser {
public:
    virtual ~Denoiser() = default;

    virtual int dim() const = 0;

    /// Rows of X are evaluated independently. sigma == 0 is the identity.
    virtual Matrix denoise_batch(const Matrix& X, double sigma) const = 0;

    /// Row i of the result is U.row(i) * J(X.row(i)). When `denoised` is
    /// non-null it also receives denoise_batch(X, sigma).
    virtual Matrix vjp_batch(const Matrix& X, double sigma, const Matrix& U,
                             Matrix* denoised = nullptr) const = 0;

    Vec denoise(const Vec& x, double sigma) const;
    Vec grad_input(const Vec& x, double sigma, const Vec& upstream) const;

protected:
    void check_batch(const Matrix& X, double sigma) const;
};

/// d(x) = x at every noise level.
class IdentityDenoiser final : public Denoiser {
public:
    explicit IdentityDenoiser(int dim) : dim_(dim) {}
    int dim() const override { return dim_; }
    Matrix denoise_batch(const Matrix& X, double sigma) const override;
    Matrix vjp_batch(const Matrix& X, double sigma, const Matrix& U,
                     Matrix* denoised = nullptr) const override;

private:
    int dim_;
};

/// Exact posterior mean for Gaussian data N(mean, cov):
/// d(x) = mean + cov (cov + sigma^2 I)^{-1} (x - mean).
class GaussianDenoiser final : public Denoiser {
public:
    GaussianDenoiser(Vec mean, Matrix cov);
    static GaussianDenoiser isotropic(int dim, double std_dev);

    int dim() const override { return int(mean_.size()); }
    Matrix denoise_batch(const Matrix& X, double sigma) const override;
    Matrix vjp_batch(const Matrix& X, double sigma, const Matrix& U,
                     Matrix* denoised = nullptr) const override;

    const Vec& mean() const { return mean_; }
    const Matrix& cov() const { return cov_; }

private:
    Matrix gain(double sigma) const;

    Vec mean_;
    Matrix cov_;
};

}  // namespace ppr
