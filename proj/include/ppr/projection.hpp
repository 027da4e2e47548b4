#pragma once

#include "ppr/common.hpp"
#include "ppr/constraints.hpp"
#include "ppr/denoiser.hpp"
#include "ppr/random.hpp"

#include "json.hpp"

#include <vector>

namespace ppr {

enum class LambdaKind { Zero, Data2d, Table };

/// Penalty weight on ||x - x_t||^2 as a function of the sampling step.
struct LambdaSchedule {
    LambdaKind kind = LambdaKind::Zero;
    /// Per-step values for LambdaKind::Table, indexed by schedule step.
    std::vector<double> table;

    nlohmann::json to_json() const;
    static LambdaSchedule from_json(const nlohmann::json& j);
};

/// Zero: 0. Data2d: t^2 / (4 sigma^2 + 4) with t := sigma. Table: table[step].
double lambda_at(const LambdaSchedule& schedule, int step, double sigma);

enum class ProjectionOptimizer { Lbfgs, Adam };

struct ProjectionConfig {
    ProjectionOptimizer optimizer = ProjectionOptimizer::Lbfgs;
    int memory = 10;
    int max_iters = 8;
    /// Objective evaluations including the initial one and line-search
    /// trials; 0 selects ceil(1.25 * max_iters).
    int max_evals = 0;
    double objective_tol = 1e-10;
    double adam_lr = 1e-2;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    LambdaSchedule lambda;

    void validate() const;
    nlohmann::json to_json() const;
    static ProjectionConfig from_json(const nlohmann::json& j);
};

struct ProjectionResult {
    Vec x_star;
    double objective_value = 0.0;
    /// c(d(x_star, sigma)).
    double constraint_value = 0.0;
    int iters_used = 0;
    bool converged = false;
};

struct BatchProjection {
    Matrix x_star;
    Vec objective_value;
    Vec constraint_value;
    std::vector<int> iters_used;
    std::vector<char> converged;
    /// Rows whose start point had a non-finite objective; x_star keeps x_t.
    std::vector<char> failed;
};

/// argmin_x c(d(x, sigma)) + lambda ||x - x_t||^2 started from x_t.
ProjectionResult project(const Denoiser& net, const Constraint& constraint, const Vec& x_t, double sigma,
                         double lambda, const ProjectionConfig& config);
BatchProjection project_batch(const Denoiser& net, const Constraint& constraint, const Matrix& X_t,
                              double sigma, double lambda, const ProjectionConfig& config);

/// d(x_star, sigma) + sigma * xi.
Vec renoise(const Denoiser& net, const Vec& x_star, double sigma, Rng& rng);
Matrix renoise_batch(const Denoiser& net, const Matrix& X_star, double sigma, Rng& rng);

}  // namespace ppr
