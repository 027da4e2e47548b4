#include "ppr/denoiser.hpp"

#include <cmath>
#include <string>

namespace ppr {

void Denoiser::check_batch(const Matrix& X, double sigma) const {
    if (X.cols() != dim())
        throw DimensionError("denoiser expects dimension " + std::to_string(dim()) + ", got " +
                             std::to_string(X.cols()));
    if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw InputError("denoiser: invalid sigma");
}

Vec Denoiser::denoise(const Vec& x, double sigma) const {
    Matrix X = x.transpose();
    Matrix out = denoise_batch(X, sigma);
    return out.row(0).transpose();
}

Vec Denoiser::grad_input(const Vec& x, double sigma, const Vec& upstream) const {
    if (upstream.size() != dim()) throw DimensionError("grad_input: upstream dimension mismatch");
    if (!upstream.allFinite()) throw InputError("grad_input: non-finite upstream");
    Matrix X = x.transpose();
    Matrix U = upstream.transpose();
    Matrix out = vjp_batch(X, sigma, U);
    return out.row(0).transpose();
}

Matrix IdentityDenoiser::denoise_batch(const Matrix& X, double sigma) const {
    check_batch(X, sigma);
    return X;
}

Matrix IdentityDenoiser::vjp_batch(const Matrix& X, double sigma, const Matrix& U,
                                   Matrix* denoised) const {
    check_batch(X, sigma);
    if (denoised) *denoised = X;
    return U;
}

GaussianDenoiser::GaussianDenoiser(Vec mean, Matrix cov) : mean_(std::move(mean)), cov_(std::move(cov)) {
    if (cov_.rows() != mean_.size() || cov_.cols() != mean_.size())
        throw DimensionError("GaussianDenoiser: covariance shape mismatch");
}

GaussianDenoiser GaussianDenoiser::isotropic(int dim, double std_dev) {
    Matrix cov = Matrix::Identity(dim, dim) * (std_dev * std_dev);
    return GaussianDenoiser(Vec::Zero(dim), cov);
}

Matrix GaussianDenoiser::gain(double sigma) const {
    const Eigen::Index d = mean_.size();
    Matrix a = cov_ + Matrix::Identity(d, d) * (sigma * sigma);
    // cov and (cov + s^2 I) commute, so the gain is symmetric.
    Matrix k = a.ldlt().solve(cov_);
    return k.transpose();
}

Matrix GaussianDenoiser::denoise_batch(const Matrix& X, double sigma) const {
    check_batch(X, sigma);
    if (sigma == 0.0) return X;
    Matrix k = gain(sigma);
    Matrix centered = X.rowwise() - mean_.transpose();
    Matrix out = centered * k.transpose();
    out.rowwise() += mean_.transpose();
    return out;
}

Matrix GaussianDenoiser::vjp_batch(const Matrix& X, double sigma, const Matrix& U,
                                   Matrix* denoised) const {
    check_batch(X, sigma);
    if (U.rows() != X.rows() || U.cols() != X.cols())
        throw DimensionError("vjp: upstream shape mismatch");
    if (denoised) *denoised = denoise_batch(X, sigma);
    if (sigma == 0.0) return U;
    return U * gain(sigma);
}

}  // namespace ppr
