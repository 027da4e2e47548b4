#pragma once

#include "ppr/common.hpp"
#include "ppr/net.hpp"
#include "ppr/random.hpp"

#include <functional>
#include <string>
#include <vector>

namespace ppr {

struct TrainConfig {
    int batch = 256;
    long steps = 10000;
    double lr = 1e-3;
    /// Cosine decay from lr to lr * lr_final_fraction; 1 keeps lr constant.
    double lr_final_fraction = 1.0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    /// log(sigma) ~ N(p_mean, p_std^2), clipped to [sigma_min, sigma_max].
    double p_mean = -1.2;
    double p_std = 1.2;
    double sigma_min = 0.002;
    double sigma_max = 80.0;

    void validate() const;
};

/// In-place minibatch transform (e.g. symmetry augmentation).
using BatchAugment = std::function<void(Matrix& batch, Rng& rng)>;

/// EDM-weighted denoising loss for a fixed batch and per-row sigmas; also
/// returns the parameter gradient when `grad` is non-null.
double denoising_loss(const DenoiserNet& net, const Matrix& x0, const Matrix& noise,
                      const Vec& sigmas, Vec* grad);

/// Adam on the denoising objective. Returns the per-step loss history.
std::vector<double> train(DenoiserNet& net, const PointCloud& dataset, const TrainConfig& config,
                          Rng& rng, const BatchAugment& augment = {});

void write_loss_csv(const std::string& path, const std::vector<double>& history);

}  // namespace ppr
