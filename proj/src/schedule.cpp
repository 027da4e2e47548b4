#include "ppr/schedule.hpp"

#include <cmath>

namespace ppr {

std::string to_string(Spacing s) { return s == Spacing::LogLinear ? "log-linear" : "edm-rho"; }

Spacing spacing_from_string(const std::string& s) {
    if (s == "log-linear") return Spacing::LogLinear;
    if (s == "edm-rho") return Spacing::EdmRho;
    throw ValidationError("unknown spacing '" + s + "'");
}

void NoiseSchedule::validate() const {
    if (num_steps < 1) throw ValidationError("num_steps must be positive");
    if (!(std::isfinite(sigma_min) && std::isfinite(sigma_max)) || sigma_min <= 0.0)
        throw ValidationError("sigma bounds must be finite and positive");
    if (!(sigma_min < sigma_max)) throw ValidationError("sigma_min must be below sigma_max");
    if (spacing == Spacing::EdmRho && !(rho > 0.0)) throw ValidationError("rho must be positive");
}

double NoiseSchedule::sigma(int step) const {
    if (step < 0 || step > num_steps)
        throw RangeError("step " + std::to_string(step) + " outside [0, " +
                         std::to_string(num_steps) + "]");
    if (step == 0) return 0.0;
    if (step == num_steps) return sigma_max;
    if (num_steps == 1) return sigma_max;
    if (step == 1) return sigma_min;
    const double u = double(step - 1) / double(num_steps - 1);
    if (spacing == Spacing::LogLinear)
        return std::exp(std::log(sigma_min) + u * (std::log(sigma_max) - std::log(sigma_min)));
    const double a = std::pow(sigma_min, 1.0 / rho);
    const double b = std::pow(sigma_max, 1.0 / rho);
    return std::pow(a + u * (b - a), rho);
}

std::vector<double> NoiseSchedule::sigmas() const {
    std::vector<double> out(num_steps + 1);
    for (int i = 0; i <= num_steps; ++i) out[i] = sigma(i);
    return out;
}

double sigma_at(const NoiseSchedule& schedule, int step) { return schedule.sigma(step); }

DiffusionState DiffusionState::make(const NoiseSchedule& schedule, Vec x, int step) {
    if (!x.allFinite()) throw InputError("diffusion state has non-finite entries");
    DiffusionState s;
    s.sigma = schedule.sigma(step);
    s.step = step;
    s.x = std::move(x);
    return s;
}

Vec forward_kernel_apply(const Vec& x0, double sigma, const Vec& xi) {
    if (!x0.allFinite()) throw InputError("forward kernel: non-finite x0");
    if (sigma < 0.0) throw InputError("forward kernel: negative sigma");
    if (xi.size() != x0.size()) throw DimensionError("forward kernel: noise dimension mismatch");
    if (sigma == 0.0) return x0;
    return x0 + sigma * xi;
}

Vec forward_kernel_sample(const Vec& x0, double sigma, Rng& rng) {
    if (!x0.allFinite()) throw InputError("forward kernel: non-finite x0");
    if (sigma < 0.0) throw InputError("forward kernel: negative sigma");
    if (sigma == 0.0) return x0;
    return x0 + sigma * rng.normal_vector(x0.size());
}

Vec tweedie_score(const Vec& x, const Vec& x0_hat, double sigma) {
    if (!(sigma > 0.0)) throw InputError("tweedie_score: sigma must be positive");
    if (x.size() != x0_hat.size()) throw DimensionError("tweedie_score: dimension mismatch");
    return (x0_hat - x) / (sigma * sigma);
}

PointCloud marginal_cloud(const PointCloud& cloud0, double sigma, Rng& rng) {
    if (cloud0.rows() == 0) throw InputError("marginal_cloud: empty cloud");
    if (!cloud0.allFinite()) throw InputError("marginal_cloud: non-finite entries");
    if (sigma < 0.0) throw InputError("marginal_cloud: negative sigma");
    if (sigma == 0.0) return cloud0;
    PointCloud out = cloud0;
    for (Eigen::Index i = 0; i < out.rows(); ++i)
        for (Eigen::Index j = 0; j < out.cols(); ++j) out(i, j) += sigma * rng.normal();
    return out;
}

}  // namespace ppr
