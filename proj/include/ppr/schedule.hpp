#pragma once

#include "ppr/common.hpp"
#include "ppr/random.hpp"

#include <string>
#include <vector>

namespace ppr {

enum class Spacing { LogLinear, EdmRho };

std::string to_string(Spacing s);
Spacing spacing_from_string(const std::string& s);

/// Discrete noise levels of the variance-exploding forward process.
/// sigma(0) = 0 is the data endpoint, sigma(1) = sigma_min and
/// sigma(num_steps) = sigma_max (a single-step schedule uses sigma_max).
struct NoiseSchedule {
    int num_steps = 64;
    double sigma_min = 0.01;
    double sigma_max = 10.0;
    Spacing spacing = Spacing::LogLinear;
    double rho = 7.0;

    void validate() const;
    double sigma(int step) const;
    /// sigma(0..num_steps) inclusive.
    std::vector<double> sigmas() const;
};

double sigma_at(const NoiseSchedule& schedule, int step);

/// x_t of the forward process at noise level sigma.
struct DiffusionState {
    Vec x;
    int step = 0;
    double sigma = 0.0;

    static DiffusionState make(const NoiseSchedule& schedule, Vec x, int step);
};

/// Draw from p(x_t | x_0) = N(x0, sigma^2 I).
Vec forward_kernel_sample(const Vec& x0, double sigma, Rng& rng);

/// Same kernel with the Gaussian draw supplied by the caller.
Vec forward_kernel_apply(const Vec& x0, double sigma, const Vec& xi);

/// Score from a denoiser output via Tweedie: (x0_hat - x) / sigma^2.
Vec tweedie_score(const Vec& x, const Vec& x0_hat, double sigma);

/// Row-wise forward kernel applied to every sample of a cloud.
PointCloud marginal_cloud(const PointCloud& cloud0, double sigma, Rng& rng);

}  // namespace ppr
