#include "ppr/samplers.hpp"

#include "ppr/optimize.hpp"

#include <chrono>
#include <cmath>
#include <functional>
#include <limits>

namespace ppr {

std::string to_string(Predictor p) {
    return p == Predictor::EulerOde ? "euler-ode" : "ddim-stochastic";
}

Predictor predictor_from_string(const std::string& s) {
    if (s == "euler-ode") return Predictor::EulerOde;
    if (s == "ddim-stochastic") return Predictor::DdimStochastic;
    throw ValidationError("unknown predictor: " + s);
}

std::string to_string(Method m) {
    switch (m) {
        case Method::Pc: return "pc";
        case Method::Ppr: return "ppr";
        case Method::Dps: return "dps";
        case Method::X0Proj: return "x0proj";
        case Method::XtProj: return "xtproj";
    }
    return "?";
}

Method method_from_string(const std::string& s) {
    if (s == "pc") return Method::Pc;
    if (s == "ppr") return Method::Ppr;
    if (s == "dps") return Method::Dps;
    if (s == "x0proj") return Method::X0Proj;
    if (s == "xtproj") return Method::XtProj;
    throw ValidationError("unknown method: " + s);
}

// ---------------------------------------------------------------- config

void SamplerConfig::validate() const {
    schedule.validate();
    if (!(churn >= 0.0 && churn <= 1.0)) throw ValidationError("sampler churn must lie in [0, 1]");
    if (correct_steps < 0) throw ValidationError("sampler correct_steps must be nonnegative");
    if (!(langevin_snr >= 0.0)) throw ValidationError("sampler langevin_snr must be nonnegative");
    if (inner_steps < 0 || (inner_steps == 0 && !allow_zero_inner))
        throw ValidationError("sampler inner_steps must be at least 1");
    projection.validate();
    if (!(dps_zeta >= 0.0)) throw ValidationError("sampler dps_zeta must be nonnegative");
    if (x0proj_iters < 0 || xtproj_iters < 0) throw ValidationError("baseline iteration budgets must be nonnegative");
    if (!(x0proj_lr >= 0.0 && xtproj_lr >= 0.0)) throw ValidationError("baseline learning rates must be nonnegative");
    for (int s : snapshot_steps)
        if (s < 0 || s > schedule.num_steps) throw ValidationError("snapshot step outside the schedule");
}

nlohmann::json SamplerConfig::to_json() const {
    return {{"schedule",
             {{"num_steps", schedule.num_steps},
              {"sigma_min", schedule.sigma_min},
              {"sigma_max", schedule.sigma_max},
              {"spacing", to_string(schedule.spacing)},
              {"rho", schedule.rho}}},
            {"predictor", to_string(predictor)},
            {"churn", churn},
            {"correct_steps", correct_steps},
            {"langevin_snr", langevin_snr},
            {"inner_steps", inner_steps},
            {"allow_zero_inner", allow_zero_inner},
            {"projection", projection.to_json()},
            {"dps_zeta", dps_zeta},
            {"x0proj_iters", x0proj_iters},
            {"x0proj_lr", x0proj_lr},
            {"xtproj_iters", xtproj_iters},
            {"xtproj_lr", xtproj_lr},
            {"snapshot_steps", snapshot_steps}};
}

SamplerConfig SamplerConfig::from_json(const nlohmann::json& j) {
    SamplerConfig c;
    if (j.contains("schedule")) {
        const auto& s = j.at("schedule");
        c.schedule.num_steps = s.value("num_steps", c.schedule.num_steps);
        c.schedule.sigma_min = s.value("sigma_min", c.schedule.sigma_min);
        c.schedule.sigma_max = s.value("sigma_max", c.schedule.sigma_max);
        c.schedule.spacing = spacing_from_string(s.value("spacing", to_string(c.schedule.spacing)));
        c.schedule.rho = s.value("rho", c.schedule.rho);
    }
    c.predictor = predictor_from_string(j.value("predictor", to_string(c.predictor)));
    c.churn = j.value("churn", c.churn);
    c.correct_steps = j.value("correct_steps", c.correct_steps);
    c.langevin_snr = j.value("langevin_snr", c.langevin_snr);
    c.inner_steps = j.value("inner_steps", c.inner_steps);
    c.allow_zero_inner = j.value("allow_zero_inner", c.allow_zero_inner);
    if (j.contains("projection")) c.projection = ProjectionConfig::from_json(j.at("projection"));
    c.dps_zeta = j.value("dps_zeta", c.dps_zeta);
    c.x0proj_iters = j.value("x0proj_iters", c.x0proj_iters);
    c.x0proj_lr = j.value("x0proj_lr", c.x0proj_lr);
    c.xtproj_iters = j.value("xtproj_iters", c.xtproj_iters);
    c.xtproj_lr = j.value("xtproj_lr", c.xtproj_lr);
    c.snapshot_steps = j.value("snapshot_steps", c.snapshot_steps);
    c.validate();
    return c;
}

long SampleRun::failure_count() const {
    long k = 0;
    for (char f : failed) k += f ? 1 : 0;
    return k;
}

// ---------------------------------------------------------------- steps

Matrix predict_batch(const Denoiser& net, const Matrix& X, double sigma_t, double sigma_prev, Rng& rng,
                     const SamplerConfig& config, const Matrix* x0_hat) {
    if (!(sigma_prev >= 0.0 && sigma_prev < sigma_t)) throw InputError("predict: requires 0 <= sigma_prev < sigma_t");
    Matrix own;
    if (!x0_hat) {
        own = net.denoise_batch(X, sigma_t);
        x0_hat = &own;
    }
    const Matrix& d = *x0_hat;
    if (config.predictor == Predictor::EulerOde || config.churn == 0.0 || sigma_prev == 0.0)
        return d + (sigma_prev / sigma_t) * (X - d);
    const double ratio = sigma_prev / sigma_t;
    const double s = config.churn * sigma_prev * std::sqrt(1.0 - ratio * ratio);
    const double keep = std::sqrt(std::max(sigma_prev * sigma_prev - s * s, 0.0));
    Matrix xi(X.rows(), X.cols());
    rng.fill_normal(xi);
    return d + (keep / sigma_t) * (X - d) + s * xi;
}

Vec predict_step(const Denoiser& net, const Vec& x, double sigma_t, double sigma_prev, Rng& rng,
                 const SamplerConfig& config) {
    return predict_batch(net, x.transpose(), sigma_t, sigma_prev, rng, config).row(0).transpose();
}

Matrix correct_batch(const Denoiser& net, const Matrix& X, double sigma, Rng& rng, double snr) {
    if (!(sigma > 0.0)) throw InputError("correct: sigma must be positive");
    if (snr == 0.0) return X;
    const double tau = snr * snr;
    Matrix d = net.denoise_batch(X, sigma);
    Matrix xi(X.rows(), X.cols());
    rng.fill_normal(xi);
    // tau * sigma^2 * score = tau * (d - x).
    return X + tau * (d - X) + std::sqrt(2.0 * tau) * sigma * xi;
}

Vec correct_step(const Denoiser& net, const Vec& x, double sigma, Rng& rng, double snr) {
    return correct_batch(net, x.transpose(), sigma, rng, snr).row(0).transpose();
}

// ---------------------------------------------------------------- driver

namespace {

using AfterPredict = std::function<void(Matrix& X_prev, const Matrix& X_t, const Matrix& x0_hat, double sigma_t,
                                        double sigma_prev, int prev_step, std::vector<char>& failed)>;

// States beyond this magnitude count as diverged.
constexpr double kDivergenceBound = 1e8;

// Diverged rows are flagged and set to NaN so downstream metrics drop them.
void flag_diverged(Matrix& X, std::vector<char>& failed) {
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        if (X.row(i).allFinite() && X.row(i).cwiseAbs().maxCoeff() <= kDivergenceBound) continue;
        failed[std::size_t(i)] = 1;
        X.row(i).setConstant(std::numeric_limits<double>::quiet_NaN());
    }
}

SampleRun reverse_loop(const Denoiser& net, const Constraint* constraint, const SamplerConfig& config, int n,
                       Rng& rng, const AfterPredict& hook) {
    config.validate();
    if (n < 1) throw InputError("sampler: n must be positive");
    if (constraint && constraint->dim() != net.dim()) throw DimensionError("sampler: constraint dimension mismatch");
    const auto t0 = std::chrono::steady_clock::now();
    const auto& sched = config.schedule;
    const int T = sched.num_steps;

    SampleRun run;
    run.seed = rng.seed();
    run.failed.assign(std::size_t(n), 0);
    auto want = [&](int step) {
        for (int s : config.snapshot_steps)
            if (s == step) return true;
        return false;
    };

    Matrix X(n, net.dim());
    rng.fill_normal(X);
    X *= sched.sigma(T);
    if (want(T)) run.snapshots[T] = X;

    for (int t = T; t >= 1; --t) {
        const double st = sched.sigma(t), sp = sched.sigma(t - 1);
        Matrix x0_hat = net.denoise_batch(X, st);
        Matrix Xp = predict_batch(net, X, st, sp, rng, config, &x0_hat);
        if (sp > 0.0)
            for (int k = 0; k < config.correct_steps; ++k) Xp = correct_batch(net, Xp, sp, rng, config.langevin_snr);
        if (hook) hook(Xp, X, x0_hat, st, sp, t - 1, run.failed);
        flag_diverged(Xp, run.failed);
        X = std::move(Xp);
        if (t - 1 > 0 && want(t - 1)) run.snapshots[t - 1] = X;
    }
    run.cloud = std::move(X);
    if (want(0)) run.snapshots[0] = run.cloud;
    if (constraint) {
        run.violation = constraint->eval_batch(run.cloud);
        for (Eigen::Index i = 0; i < run.violation.size(); ++i)
            if (!std::isfinite(run.violation(i))) run.failed[std::size_t(i)] = 1;
    }
    run.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return run;
}

// Row-wise gradient descent on c directly.
Matrix descend_on_constraint(const Constraint& c, const Matrix& X0, int iters, double lr) {
    if (iters == 0 || lr == 0.0) return X0;
    BatchObjective obj = [&](const Matrix& X, const std::vector<Eigen::Index>&, Vec& values, Matrix& grads) {
        grads = c.grad_batch(X, &values);
    };
    GradientDescentOptions o;
    o.lr = lr;
    o.max_iters = iters;
    o.tol = 0.0;
    return gradient_descent_batch(obj, X0, o).x;
}

}  // namespace

SampleRun pc_sample(const Denoiser& net, const SamplerConfig& config, int n, Rng& rng) {
    return reverse_loop(net, nullptr, config, n, rng, {});
}

SampleRun ppr_sample(const Denoiser& net, const Constraint& constraint, const SamplerConfig& config, int n,
                     Rng& rng) {
    auto hook = [&](Matrix& Xp, const Matrix&, const Matrix&, double, double sp, int prev_step,
                    std::vector<char>& failed) {
        const double lambda = lambda_at(config.projection.lambda, prev_step, sp);
        auto project_into = [&](Matrix& target) {
            BatchProjection p = project_batch(net, constraint, Xp, sp, lambda, config.projection);
            for (Eigen::Index i = 0; i < Xp.rows(); ++i) {
                if (p.failed[std::size_t(i)]) failed[std::size_t(i)] = 1;
                else target.row(i) = p.x_star.row(i);
            }
        };
        if (sp > 0.0) {
            for (int m = 0; m < config.inner_steps; ++m) {
                Matrix Xs = Xp;
                project_into(Xs);
                Xp = renoise_batch(net, Xs, sp, rng);
            }
        } else {
            // Final step: one projection, no renoise; the denoiser is the identity at sigma = 0.
            project_into(Xp);
        }
    };
    return reverse_loop(net, &constraint, config, n, rng, hook);
}

SampleRun dps_sample(const Denoiser& net, const Constraint& constraint, const SamplerConfig& config, int n,
                     Rng& rng) {
    auto hook = [&](Matrix& Xp, const Matrix& Xt, const Matrix& x0_hat, double st, double, int,
                    std::vector<char>&) {
        if (config.dps_zeta == 0.0) return;
        Vec c;
        Matrix gc = constraint.grad_batch(x0_hat, &c);
        Matrix g = net.vjp_batch(Xt, st, gc);
        for (Eigen::Index i = 0; i < Xp.rows(); ++i) {
            const double zeta = config.dps_zeta * st * st / (c(i) + 1e-8);
            Xp.row(i) -= zeta * g.row(i);
        }
    };
    return reverse_loop(net, &constraint, config, n, rng, hook);
}

SampleRun x0_projection_sample(const Denoiser& net, const Constraint& constraint, const SamplerConfig& config,
                               int n, Rng& rng) {
    auto hook = [&](Matrix& Xp, const Matrix&, const Matrix& x0_hat, double, double, int, std::vector<char>&) {
        // Continue the predictor from the projected estimate with the original noise direction.
        Matrix projected = descend_on_constraint(constraint, x0_hat, config.x0proj_iters, config.x0proj_lr);
        Xp += projected - x0_hat;
    };
    return reverse_loop(net, &constraint, config, n, rng, hook);
}

SampleRun xt_projection_sample(const Denoiser& net, const Constraint& constraint, const SamplerConfig& config,
                               int n, Rng& rng) {
    auto hook = [&](Matrix& Xp, const Matrix&, const Matrix&, double, double, int, std::vector<char>&) {
        Xp = descend_on_constraint(constraint, Xp, config.xtproj_iters, config.xtproj_lr);
    };
    return reverse_loop(net, &constraint, config, n, rng, hook);
}

SampleRun run_method(Method method, const Denoiser& net, const Constraint& constraint, const SamplerConfig& config,
                     int n, Rng& rng) {
    switch (method) {
        case Method::Pc: {
            SampleRun r = pc_sample(net, config, n, rng);
            r.violation = constraint.eval_batch(r.cloud);
            return r;
        }
        case Method::Ppr: return ppr_sample(net, constraint, config, n, rng);
        case Method::Dps: return dps_sample(net, constraint, config, n, rng);
        case Method::X0Proj: return x0_projection_sample(net, constraint, config, n, rng);
        case Method::XtProj: return xt_projection_sample(net, constraint, config, n, rng);
    }
    throw ValidationError("unknown method");
}

}  // namespace ppr
