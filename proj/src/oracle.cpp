#include "ppr/oracle.hpp"

#include <cmath>

namespace ppr {

void OracleConfig::validate() const {
    if (!(epsilon > 0.0)) throw ValidationError("oracle epsilon must be positive");
    if (refine_steps < 0) throw ValidationError("oracle refine_steps must be nonnegative");
    if (!(refine_lr > 0.0)) throw ValidationError("oracle refine_lr must be positive");
    if (target_count < 1) throw ValidationError("oracle target_count must be positive");
    if (max_proposals < 1) throw ValidationError("oracle max_proposals must be positive");
    if (batch < 1) throw ValidationError("oracle batch must be positive");
}

nlohmann::json OracleConfig::to_json() const {
    return {{"epsilon", epsilon},           {"refine_steps", refine_steps},   {"refine_lr", refine_lr},
            {"target_count", target_count}, {"max_proposals", max_proposals}, {"batch", batch}};
}

OracleConfig OracleConfig::from_json(const nlohmann::json& j) {
    OracleConfig c;
    c.epsilon = j.value("epsilon", c.epsilon);
    c.refine_steps = j.value("refine_steps", c.refine_steps);
    c.refine_lr = j.value("refine_lr", c.refine_lr);
    c.target_count = j.value("target_count", c.target_count);
    c.max_proposals = j.value("max_proposals", c.max_proposals);
    c.batch = j.value("batch", c.batch);
    c.validate();
    return c;
}

OracleResult rejection_sample(const PriorSampler& prior, const Constraint& constraint, const OracleConfig& config,
                              Rng& rng) {
    config.validate();
    OracleResult res;
    std::vector<Vec> kept;
    kept.reserve(std::size_t(config.target_count));
    while (long(kept.size()) < config.target_count && res.proposals < config.max_proposals) {
        const int n = int(std::min<long>(config.batch, config.max_proposals - res.proposals));
        PointCloud draws = prior(n, rng);
        if (draws.rows() != n || draws.cols() != constraint.dim())
            throw DimensionError("rejection_sample: prior returned a cloud of the wrong shape");
        Vec c = constraint.eval_batch(draws);
        res.proposals += n;
        for (Eigen::Index i = 0; i < n; ++i) {
            if (c(i) <= config.epsilon) {
                ++res.accepted;
                if (long(kept.size()) < config.target_count) kept.push_back(draws.row(i).transpose());
            }
        }
    }
    if (long(kept.size()) < config.target_count)
        throw OracleExhaustedError("rejection_sample: only " + std::to_string(kept.size()) + " of " +
                                       std::to_string(config.target_count) + " accepted within " +
                                       std::to_string(res.proposals) + " proposals",
                                   long(kept.size()));
    PointCloud cloud(config.target_count, constraint.dim());
    for (std::size_t i = 0; i < kept.size(); ++i) cloud.row(Eigen::Index(i)) = kept[i].transpose();
    res.cloud = refine(cloud, constraint, config.refine_steps, config.refine_lr);
    return res;
}

PointCloud refine(const PointCloud& cloud, const Constraint& constraint, int steps, double lr) {
    if (steps < 0) throw InputError("refine: steps must be nonnegative");
    if (!(lr > 0.0)) throw InputError("refine: lr must be positive");
    PointCloud out = cloud;
    if (steps == 0) return out;
    for (Eigen::Index i = 0; i < out.rows(); ++i) {
        Vec x = out.row(i).transpose();
        double c = constraint.eval(x);
        double rate = lr;
        for (int s = 0; s < steps && c > 0.0; ++s) {
            Vec trial = x - rate * constraint.grad(x);
            const double ct = trial.allFinite() ? constraint.eval(trial) : c;
            if (ct < c) {
                x = std::move(trial);
                c = ct;
            } else {
                rate *= 0.5;
            }
        }
        out.row(i) = x.transpose();
    }
    return out;
}

PointCloud gaussian_conditional_oracle(const Vec& mean, const Matrix& cov, const Vec& a, double b, int n, Rng& rng) {
    const Eigen::Index d = mean.size();
    if (cov.rows() != d || cov.cols() != d || a.size() != d)
        throw DimensionError("gaussian_conditional_oracle: dimension mismatch");
    if (n < 1) throw InputError("gaussian_conditional_oracle: n must be positive");
    if (!(a.squaredNorm() > 0.0)) throw InputError("gaussian_conditional_oracle: a must be nonzero");
    Eigen::MatrixXd C = cov;
    Eigen::LLT<Eigen::MatrixXd> llt(C);
    if (llt.info() != Eigen::Success) throw InputError("gaussian_conditional_oracle: covariance is not positive definite");
    const Eigen::VectorXd ca = C * a;
    const double aca = a.dot(ca);
    Eigen::MatrixXd L = llt.matrixL();
    PointCloud out(n, d);
    for (int i = 0; i < n; ++i) {
        Vec x = mean + L * rng.normal_vector(d);
        // Conditioning by kriging: shift along C a to land on the hyperplane.
        x += ca * ((b - a.dot(x)) / aca);
        out.row(i) = x.transpose();
    }
    return out;
}

}  // namespace ppr
