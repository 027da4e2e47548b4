#include "ppr/projection.hpp"

#include "ppr/optimize.hpp"
#include "ppr/schedule.hpp"

#include <cmath>

namespace ppr {

nlohmann::json LambdaSchedule::to_json() const {
    switch (kind) {
        case LambdaKind::Zero: return {{"kind", "zero"}};
        case LambdaKind::Data2d: return {{"kind", "data2d"}};
        case LambdaKind::Table: return {{"kind", "table"}, {"values", table}};
    }
    return {};
}

LambdaSchedule LambdaSchedule::from_json(const nlohmann::json& j) {
    LambdaSchedule s;
    const std::string kind = j.is_string() ? j.get<std::string>() : j.at("kind").get<std::string>();
    if (kind == "zero") {
        s.kind = LambdaKind::Zero;
    } else if (kind == "data2d") {
        s.kind = LambdaKind::Data2d;
    } else if (kind == "table") {
        s.kind = LambdaKind::Table;
        s.table = j.at("values").get<std::vector<double>>();
        for (double v : s.table)
            if (!(v >= 0.0)) throw ValidationError("lambda table entries must be nonnegative");
    } else {
        throw ValidationError("unknown lambda schedule: " + kind);
    }
    return s;
}

double lambda_at(const LambdaSchedule& s, int step, double sigma) {
    switch (s.kind) {
        case LambdaKind::Zero: return 0.0;
        case LambdaKind::Data2d: {
            const double t = sigma;
            return t * t / (4.0 * sigma * sigma + 4.0);
        }
        case LambdaKind::Table:
            if (step < 0 || std::size_t(step) >= s.table.size())
                throw RangeError("lambda table has no entry for step " + std::to_string(step));
            return s.table[std::size_t(step)];
    }
    return 0.0;
}

void ProjectionConfig::validate() const {
    if (max_iters < 1) throw ValidationError("projection max_iters must be at least 1");
    if (max_evals < 0 || max_evals == 1) throw ValidationError("projection max_evals must be 0 or at least 2");
    if (memory < 1) throw ValidationError("projection memory must be at least 1");
    if (!(objective_tol >= 0.0)) throw ValidationError("projection objective_tol must be nonnegative");
    if (!(adam_lr > 0.0)) throw ValidationError("projection adam_lr must be positive");
}

nlohmann::json ProjectionConfig::to_json() const {
    return {{"optimizer", optimizer == ProjectionOptimizer::Lbfgs ? "lbfgs" : "adam"},
            {"memory", memory},
            {"max_iters", max_iters},
            {"max_evals", max_evals},
            {"objective_tol", objective_tol},
            {"adam_lr", adam_lr},
            {"adam_beta1", adam_beta1},
            {"adam_beta2", adam_beta2},
            {"lambda", lambda.to_json()}};
}

ProjectionConfig ProjectionConfig::from_json(const nlohmann::json& j) {
    ProjectionConfig c;
    const std::string opt = j.value("optimizer", std::string("lbfgs"));
    if (opt == "lbfgs") c.optimizer = ProjectionOptimizer::Lbfgs;
    else if (opt == "adam") c.optimizer = ProjectionOptimizer::Adam;
    else throw ValidationError("unknown projection optimizer: " + opt);
    c.memory = j.value("memory", c.memory);
    c.max_iters = j.value("max_iters", c.max_iters);
    c.max_evals = j.value("max_evals", c.max_evals);
    c.objective_tol = j.value("objective_tol", c.objective_tol);
    c.adam_lr = j.value("adam_lr", c.adam_lr);
    c.adam_beta1 = j.value("adam_beta1", c.adam_beta1);
    c.adam_beta2 = j.value("adam_beta2", c.adam_beta2);
    if (j.contains("lambda")) c.lambda = LambdaSchedule::from_json(j.at("lambda"));
    c.validate();
    return c;
}

BatchProjection project_batch(const Denoiser& net, const Constraint& constraint, const Matrix& X_t, double sigma,
                              double lambda, const ProjectionConfig& config) {
    config.validate();
    if (!(lambda >= 0.0)) throw InputError("projection: lambda must be nonnegative");
    if (X_t.cols() != constraint.dim() || X_t.cols() != net.dim())
        throw DimensionError("projection: dimension mismatch");

    BatchObjective objective = [&](const Matrix& X, const std::vector<Eigen::Index>& rows, Vec& values,
                                   Matrix& grads) {
        Matrix denoised = net.denoise_batch(X, sigma);
        Vec c;
        Matrix gc = constraint.grad_batch(denoised, &c);
        // Rows whose constraint is already non-finite keep a finite dummy
        // gradient; the optimizer rejects them through the value.
        for (Eigen::Index i = 0; i < gc.rows(); ++i)
            if (!gc.row(i).allFinite()) gc.row(i).setZero();
        grads = net.vjp_batch(X, sigma, gc);
        values = c;
        if (lambda > 0.0) {
            for (std::size_t k = 0; k < rows.size(); ++k) {
                const Eigen::Index i = Eigen::Index(k);
                const auto diff = X.row(i) - X_t.row(rows[k]);
                values(i) += lambda * diff.squaredNorm();
                grads.row(i) += 2.0 * lambda * diff;
            }
        }
    };

    BatchResult r;
    if (config.optimizer == ProjectionOptimizer::Lbfgs) {
        LbfgsOptions o;
        o.memory = config.memory;
        o.max_iters = config.max_iters;
        o.max_evals = (config.max_evals > 0 ? config.max_evals : (5 * config.max_iters + 3) / 4) - 1;
        o.tol = config.objective_tol;
        o.nonnegative = true;
        r = lbfgs_batch(objective, X_t, o);
    } else {
        AdamOptions o;
        o.lr = config.adam_lr;
        o.beta1 = config.adam_beta1;
        o.beta2 = config.adam_beta2;
        o.max_iters = config.max_iters;
        o.tol = config.objective_tol;
        r = adam_batch(objective, X_t, o);
    }

    BatchProjection out;
    out.x_star = std::move(r.x);
    out.objective_value = std::move(r.value);
    out.constraint_value = constraint.eval_batch(net.denoise_batch(out.x_star, sigma));
    out.iters_used = std::move(r.iters);
    out.converged = std::move(r.converged);
    out.failed = std::move(r.failed);
    return out;
}

ProjectionResult project(const Denoiser& net, const Constraint& constraint, const Vec& x_t, double sigma,
                         double lambda, const ProjectionConfig& config) {
    if (!x_t.allFinite()) throw InputError("projection: start point is not finite");
    BatchProjection b = project_batch(net, constraint, x_t.transpose(), sigma, lambda, config);
    if (b.failed[0] || !std::isfinite(b.objective_value(0)))
        throw ProjectionError("projection: objective is not finite at the start point", x_t);
    ProjectionResult r;
    r.x_star = b.x_star.row(0).transpose();
    r.objective_value = b.objective_value(0);
    r.constraint_value = b.constraint_value(0);
    r.iters_used = b.iters_used[0];
    r.converged = b.converged[0] != 0;
    return r;
}

Vec renoise(const Denoiser& net, const Vec& x_star, double sigma, Rng& rng) {
    if (!(sigma >= 0.0)) throw InputError("renoise: sigma must be nonnegative");
    Vec d = net.denoise(x_star, sigma);
    if (sigma == 0.0) return d;
    return forward_kernel_sample(d, sigma, rng);
}

Matrix renoise_batch(const Denoiser& net, const Matrix& X_star, double sigma, Rng& rng) {
    if (!(sigma >= 0.0)) throw InputError("renoise: sigma must be nonnegative");
    Matrix d = net.denoise_batch(X_star, sigma);
    if (sigma == 0.0) return d;
    Matrix xi(d.rows(), d.cols());
    rng.fill_normal(xi);
    return d + sigma * xi;
}

}  // namespace ppr
