#pragma once

#include "ppr/common.hpp"
#include "ppr/constraints.hpp"
#include "ppr/random.hpp"

#include "json.hpp"

#include <functional>

namespace ppr {

struct OracleConfig {
    double epsilon = 1e-2;
    int refine_steps = 50;
    double refine_lr = 0.1;
    int target_count = 4096;
    long max_proposals = 4000000;
    int batch = 8192;

    void validate() const;
    nlohmann::json to_json() const;
    static OracleConfig from_json(const nlohmann::json& j);
};

/// Draws n prior samples.
using PriorSampler = std::function<PointCloud(int n, Rng& rng)>;

struct OracleResult {
    PointCloud cloud;
    long proposals = 0;
    long accepted = 0;

    double acceptance_rate() const { return proposals > 0 ? double(accepted) / double(proposals) : 0.0; }
};

/// Keeps prior draws with c(x) <= epsilon until target_count are found, then
/// refines them. Throws OracleExhaustedError if max_proposals runs out first.
OracleResult rejection_sample(const PriorSampler& prior, const Constraint& constraint, const OracleConfig& config,
                              Rng& rng);

/// Per-point gradient descent on c. A step that does not lower c is rejected
/// and that point's rate is halved, so c never increases.
PointCloud refine(const PointCloud& cloud, const Constraint& constraint, int steps, double lr);

/// Exact draws from N(mean, cov) conditioned on a . x = b.
PointCloud gaussian_conditional_oracle(const Vec& mean, const Matrix& cov, const Vec& a, double b, int n, Rng& rng);

}  // namespace ppr
