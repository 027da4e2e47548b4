#pragma once

#include "ppr/common.hpp"
#include "ppr/constraints.hpp"
#include "ppr/denoiser.hpp"
#include "ppr/projection.hpp"
#include "ppr/random.hpp"
#include "ppr/schedule.hpp"

#include "json.hpp"

#include <cstdint>
#include <map>
#include <vector>

namespace ppr {

enum class Predictor { EulerOde, DdimStochastic };
std::string to_string(Predictor p);
Predictor predictor_from_string(const std::string& s);

struct SamplerConfig {
    NoiseSchedule schedule;
    Predictor predictor = Predictor::EulerOde;
    /// Stochasticity of the DDIM predictor in [0, 1].
    double churn = 0.0;
    int correct_steps = 0;
    double langevin_snr = 0.1;

    int inner_steps = 2;
    ProjectionConfig projection;
    /// Permits inner_steps == 0 for ablations and trace tests.
    bool allow_zero_inner = false;

    double dps_zeta = 1.0;
    int x0proj_iters = 8;
    double x0proj_lr = 0.1;
    int xtproj_iters = 8;
    double xtproj_lr = 0.1;

    /// Steps whose state x_step is recorded; step 0 is the output.
    std::vector<int> snapshot_steps;

    void validate() const;
    nlohmann::json to_json() const;
    static SamplerConfig from_json(const nlohmann::json& j);
};

struct SampleRun {
    PointCloud cloud;
    std::map<int, PointCloud> snapshots;
    /// c(x0) per sample; empty for unconstrained runs.
    Vec violation;
    std::vector<char> failed;
    std::uint64_t seed = 0;
    double seconds = 0.0;

    long failure_count() const;
};

/// One reverse step from sigma_t to sigma_prev < sigma_t.
Matrix predict_batch(const Denoiser& net, const Matrix& X, double sigma_t, double sigma_prev, Rng& rng,
                     const SamplerConfig& config, const Matrix* x0_hat = nullptr);
Vec predict_step(const Denoiser& net, const Vec& x, double sigma_t, double sigma_prev, Rng& rng,
                 const SamplerConfig& config);

/// Langevin step x + tau sigma^2 score + sqrt(2 tau) sigma xi with tau = snr^2.
Matrix correct_batch(const Denoiser& net, const Matrix& X, double sigma, Rng& rng, double snr);
Vec correct_step(const Denoiser& net, const Vec& x, double sigma, Rng& rng, double snr);

SampleRun pc_sample(const Denoiser& net, const SamplerConfig& config, int n, Rng& rng);
SampleRun ppr_sample(const Denoiser& net, const Constraint& constraint, const SamplerConfig& config, int n,
                     Rng& rng);
SampleRun dps_sample(const Denoiser& net, const Constraint& constraint, const SamplerConfig& config, int n,
                     Rng& rng);
SampleRun x0_projection_sample(const Denoiser& net, const Constraint& constraint, const SamplerConfig& config,
                               int n, Rng& rng);
SampleRun xt_projection_sample(const Denoiser& net, const Constraint& constraint, const SamplerConfig& config,
                               int n, Rng& rng);

enum class Method { Pc, Ppr, Dps, X0Proj, XtProj };
std::string to_string(Method m);
Method method_from_string(const std::string& s);

/// Dispatches to the sampler for `method`; Pc ignores the constraint except
/// for recording violations.
SampleRun run_method(Method method, const Denoiser& net, const Constraint& constraint,
                     const SamplerConfig& config, int n, Rng& rng);

}  // namespace ppr
