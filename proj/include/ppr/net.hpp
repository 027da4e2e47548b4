#pragma once

#include "ppr/common.hpp"
#include "ppr/denoiser.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace ppr {

enum class Activation { SiLU, Tanh };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& s);

struct NetConfig {
    int dim = 2;
    std::vector<int> hidden = {128, 128, 128, 128};
    Activation activation = Activation::SiLU;
    /// Number of Fourier features of c_noise(sigma); must be even.
    int embed_features = 16;
    double sigma_data = 1.0;
    /// Replace c_skip x by the posterior mean of a Gaussian fitted to the
    /// training data; the network then models the residual.
    bool gaussian_skip = false;

    void validate() const;
};

/// Posterior mean under N(mean, basis diag(variances) basis^T).
struct GaussianSkip {
    Vec mean;
    Matrix basis;  // orthonormal eigenvectors as columns
    Vec variances;

    /// Sample mean and covariance; variances are floored at a tiny fraction of
    /// the largest one.
    static GaussianSkip fit(const PointCloud& samples);
    /// Per-row shrinkage factors variances / (variances + sigma^2).
    Matrix gains(const Vec& sigmas) const;
};

/// EDM preconditioning scalings.
struct Preconditioning {
    double c_skip, c_out, c_in, c_noise;
    static Preconditioning at(double sigma, double sigma_data);
};

/// Primal values recorded by a forward pass; enough to run vector-Jacobian
/// products for both the input and the parameters. One tape per call.
struct GradTape {
    Matrix x;
    Vec c_skip, c_out, c_in;
    Matrix skip_gain;             // empty without a Gaussian skip
    Matrix input;                 // [c_in * x | embedding]
    std::vector<Matrix> pre;      // pre-activations, one per layer
    std::vector<Matrix> post;     // activations of hidden layers
};

/// Fully connected denoiser
///   d(x, sigma) = c_skip x + c_out F([c_in x, fourier(c_noise)]),
/// or with a Gaussian skip, skip(x, sigma) + c_out F(...).
/// Parameters live in one flat vector (per layer: row-major W, then b).
class DenoiserNet final : public Denoiser {
public:
    DenoiserNet(NetConfig config, std::uint64_t seed, bool zero_final_layer = false);
    DenoiserNet(NetConfig config, Vec parameters, Vec embed_frequencies);

    int dim() const override { return config_.dim; }
    Matrix denoise_batch(const Matrix& X, double sigma) const override;
    Matrix vjp_batch(const Matrix& X, double sigma, const Matrix& U,
                     Matrix* denoised = nullptr) const override;

    /// Per-row noise levels (all > 0). Fills `tape` when non-null.
    Matrix forward(const Matrix& X, const Vec& sigmas, GradTape* tape) const;

    /// Gradient of <upstream, d(X)> with respect to X; parameter gradients are
    /// accumulated into `param_grad` (sized num_parameters()) when non-null.
    Matrix backward(const GradTape& tape, const Matrix& upstream, Vec* param_grad) const;

    const NetConfig& config() const { return config_; }
    const Vec& parameters() const { return params_; }
    Vec& mutable_parameters() { return params_; }
    void set_parameters(const Vec& p);
    const Vec& embed_frequencies() const { return freqs_; }
    Eigen::Index num_parameters() const { return params_.size(); }
    void zero_final_layer();

    void set_gaussian_skip(GaussianSkip skip);
    const std::optional<GaussianSkip>& gaussian_skip() const { return skip_; }

private:
    struct Layer {
        int in, out;
        Eigen::Index w_off, b_off;
    };

    void build_layout();
    Eigen::Map<const Matrix> weight(std::size_t l) const;
    Eigen::Map<const Vec> bias(std::size_t l) const;
    Matrix embed(const Vec& c_noise) const;

    NetConfig config_;
    std::vector<Layer> layers_;
    Vec params_;
    Vec freqs_;
    std::optional<GaussianSkip> skip_;
};

}  // namespace ppr
