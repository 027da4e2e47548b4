#include "doctest.h"

#include "ppr/samplers.hpp"

#include <algorithm>
#include <cmath>

using namespace ppr;

namespace {

SamplerConfig small_config(int steps) {
    SamplerConfig cfg;
    cfg.schedule.num_steps = steps;
    cfg.schedule.sigma_min = 0.01;
    cfg.schedule.sigma_max = 10.0;
    return cfg;
}

double column_variance(const Matrix& X, int c) {
    const double mu = X.col(c).mean();
    return (X.col(c).array() - mu).square().sum() / double(X.rows() - 1);
}

// Exact variance of the sampler output for N(0, s^2) data and the analytic
// denoiser d(x) = g x, with `renoise` inner denoise-renoise rounds per step.
double variance_recursion(const NoiseSchedule& sched, double s, int renoise) {
    double v = sched.sigma(sched.num_steps) * sched.sigma(sched.num_steps);
    for (int t = sched.num_steps; t >= 1; --t) {
        const double st = sched.sigma(t), sp = sched.sigma(t - 1);
        const double gt = s * s / (s * s + st * st);
        const double a = gt + (sp / st) * (1.0 - gt);
        v *= a * a;
        if (sp > 0.0) {
            const double gp = s * s / (s * s + sp * sp);
            for (int m = 0; m < renoise; ++m) v = gp * gp * v + sp * sp;
        }
    }
    return v;
}

}  // namespace

TEST_SUITE("samplers") {

TEST_CASE("predict step examples") {
    SamplerConfig cfg = small_config(8);
    Rng rng(1);
    IdentityDenoiser id(2);
    Vec x(2);
    x << 0.3, -1.0;
    CHECK(predict_step(id, x, 2.0, 1.0, rng, cfg) == x);
    GaussianDenoiser g = GaussianDenoiser::isotropic(2, 1.0);
    CHECK(predict_step(g, x, 2.0, 0.0, rng, cfg) == g.denoise(x, 2.0));
    Matrix X(1, 1), D(1, 1);
    X << 2.0;
    D << 0.0;
    IdentityDenoiser id1(1);
    CHECK(predict_batch(id1, X, 2.0, 1.0, rng, cfg, &D)(0, 0) == 1.0);
    CHECK_THROWS_AS(predict_step(id, x, 1.0, 2.0, rng, cfg), InputError);
}

TEST_CASE("stochastic predictor reduces to the ODE step without churn") {
    SamplerConfig ode = small_config(8), ddim = small_config(8);
    ddim.predictor = Predictor::DdimStochastic;
    GaussianDenoiser g = GaussianDenoiser::isotropic(1, 1.0);
    Rng rng(2);
    Matrix X = rng.normal_matrix(100, 1) * 2.0;
    CHECK(predict_batch(g, X, 1.5, 0.8, rng, ddim) == predict_batch(g, X, 1.5, 0.8, rng, ode));
    ddim.churn = 1.0;
    Rng a(3), b(3);
    Matrix Pa = predict_batch(g, X, 1.5, 0.8, a, ddim);
    CHECK(Pa == predict_batch(g, X, 1.5, 0.8, b, ddim));
    CHECK(Pa != predict_batch(g, X, 1.5, 0.8, rng, ode));
}

TEST_CASE("Langevin corrector") {
    GaussianDenoiser g = GaussianDenoiser::isotropic(1, 1.0);
    Rng rng(3);
    Vec x(1);
    x << 0.7;
    CHECK(correct_step(g, x, 0.5, rng, 0.0) == x);
    const double sigma = 0.5, v = 1.0 + sigma * sigma;
    Matrix X = rng.normal_matrix(10000, 1) * std::sqrt(v);
    for (int k = 0; k < 100; ++k) X = correct_batch(g, X, sigma, rng, 0.1);
    CHECK(std::abs(column_variance(X, 0) / v - 1.0) < 0.03);
}

TEST_CASE("single-step schedule collapses to the denoised prior draw") {
    SamplerConfig cfg = small_config(1);
    GaussianDenoiser g = GaussianDenoiser::isotropic(2, 1.0);
    Rng a(4), b(4);
    SampleRun run = pc_sample(g, cfg, 50, a);
    Matrix xT = b.normal_matrix(50, 2) * 10.0;
    CHECK((run.cloud - g.denoise_batch(xT, 10.0)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("unconstrained sampler matches the exact variance recursion") {
    SamplerConfig cfg = small_config(32);
    const double s = 1.0;
    GaussianDenoiser g = GaussianDenoiser::isotropic(1, s);
    Rng rng(5);
    SampleRun run = pc_sample(g, cfg, 100000, rng);
    const double expect = variance_recursion(cfg.schedule, s, 0);
    CHECK(std::abs(column_variance(run.cloud, 0) / expect - 1.0) < 0.03);
    CHECK(std::abs(run.cloud.col(0).mean()) < 3.0 * std::sqrt(expect / 1e5));
}

TEST_CASE("PPR with an all-feasible constraint matches the denoise-renoise recursion") {
    SamplerConfig cfg = small_config(16);
    cfg.inner_steps = 2;
    const double s = 1.0;
    GaussianDenoiser g = GaussianDenoiser::isotropic(1, s);
    ZeroConstraint zero(1);
    Rng rng(6);
    SampleRun run = ppr_sample(g, zero, cfg, 100000, rng);
    const double expect = variance_recursion(cfg.schedule, s, cfg.inner_steps);
    CHECK(std::abs(column_variance(run.cloud, 0) / expect - 1.0) < 0.03);
    CHECK(run.failure_count() == 0);
}

TEST_CASE("PPR with a point constraint collapses onto the point") {
    SamplerConfig cfg = small_config(16);
    GaussianDenoiser g = GaussianDenoiser::isotropic(1, 1.0);
    QuadraticConstraint point(Vec::Ones(1));
    Rng rng(7);
    SampleRun run = ppr_sample(g, point, cfg, 500, rng);
    CHECK((run.cloud.array() - 1.0).abs().maxCoeff() < 1e-3);
    CHECK(run.violation.maxCoeff() < 1e-6);

    cfg.dps_zeta = 0.01;
    Rng twin(7);
    SampleRun dps = dps_sample(g, point, cfg, 500, twin);
    std::vector<double> a(run.violation.data(), run.violation.data() + 500);
    std::vector<double> b(dps.violation.data(), dps.violation.data() + 500);
    std::nth_element(a.begin(), a.begin() + 250, a.end());
    std::nth_element(b.begin(), b.begin() + 250, b.end());
    CHECK(b[250] > a[250]);
}

TEST_CASE("PPR with zero inner steps is the prior sampler plus one projection") {
    SamplerConfig cfg = small_config(12);
    cfg.inner_steps = 0;
    CHECK_THROWS_AS(cfg.validate(), ValidationError);
    cfg.allow_zero_inner = true;
    GaussianDenoiser g = GaussianDenoiser::isotropic(2, 1.0);
    Rng crng(8);
    GrfConstraint c = grf_sample(GrfHyper{}, crng);
    Rng a(9), b(9);
    SampleRun ppr = ppr_sample(g, c, cfg, 64, a);
    SampleRun pc = pc_sample(g, cfg, 64, b);
    BatchProjection last = project_batch(g, c, pc.cloud, 0.0, lambda_at(cfg.projection.lambda, 0, 0.0), cfg.projection);
    CHECK(ppr.cloud == last.x_star);
}

TEST_CASE("baselines reduce to the prior sampler without a constraint") {
    SamplerConfig cfg = small_config(12);
    GaussianDenoiser g = GaussianDenoiser::isotropic(2, 1.0);
    ZeroConstraint zero(2);
    Rng r0(10);
    const PointCloud pc = pc_sample(g, cfg, 64, r0).cloud;
    for (Method m : {Method::X0Proj, Method::XtProj}) {
        Rng r(10);
        CHECK(run_method(m, g, zero, cfg, 64, r).cloud == pc);
    }
    cfg.dps_zeta = 0.0;
    Rng crng(11);
    GrfConstraint c = grf_sample(GrfHyper{}, crng);
    Rng r(10);
    CHECK(dps_sample(g, c, cfg, 64, r).cloud == pc);
}

TEST_CASE("DPS divergence is flagged per sample") {
    SamplerConfig cfg = small_config(12);
    cfg.dps_zeta = 1e30;
    GaussianDenoiser g = GaussianDenoiser::isotropic(2, 1.0);
    Rng crng(12);
    GrfConstraint c = grf_sample(GrfHyper{}, crng);
    Rng r(13);
    SampleRun run = dps_sample(g, c, cfg, 64, r);
    CHECK(run.failure_count() > 0);
    for (Eigen::Index i = 0; i < 64; ++i)
        if (run.failed[std::size_t(i)]) CHECK(!run.cloud.row(i).allFinite());
}

TEST_CASE("x_t-space projection is feasible for a convex quadratic") {
    SamplerConfig cfg = small_config(12);
    cfg.xtproj_lr = 0.5;
    GaussianDenoiser g = GaussianDenoiser::isotropic(2, 1.0);
    Vec center(2);
    center << 0.5, -0.25;
    QuadraticConstraint q(center);
    Rng r(14);
    SampleRun run = xt_projection_sample(g, q, cfg, 128, r);
    CHECK(run.violation.maxCoeff() < 1e-6);
}

TEST_CASE("determinism and snapshots") {
    SamplerConfig cfg = small_config(10);
    cfg.snapshot_steps = {0, 5, 10};
    GaussianDenoiser g = GaussianDenoiser::isotropic(2, 1.0);
    Rng crng(15);
    GrfConstraint c = grf_sample(GrfHyper{}, crng);
    Rng a(16), b(16);
    SampleRun ra = ppr_sample(g, c, cfg, 32, a);
    SampleRun rb = ppr_sample(g, c, cfg, 32, b);
    CHECK(ra.cloud == rb.cloud);
    CHECK(ra.violation == rb.violation);
    CHECK(ra.snapshots.size() == 3);
    CHECK(ra.snapshots.at(0) == ra.cloud);
    CHECK(ra.snapshots.at(10).cwiseAbs().maxCoeff() > 1.0);
    for (const auto& [step, cloud] : ra.snapshots) CHECK(cloud == rb.snapshots.at(step));
}

TEST_CASE("config and method names") {
    SamplerConfig cfg = small_config(20);
    cfg.predictor = Predictor::DdimStochastic;
    cfg.churn = 0.5;
    cfg.snapshot_steps = {0, 3};
    CHECK(SamplerConfig::from_json(cfg.to_json()).to_json() == cfg.to_json());
    for (Method m : {Method::Pc, Method::Ppr, Method::Dps, Method::X0Proj, Method::XtProj})
        CHECK(method_from_string(to_string(m)) == m);
    CHECK_THROWS_AS(method_from_string("annealed"), ValidationError);
    cfg.snapshot_steps = {21};
    CHECK_THROWS_AS(cfg.validate(), ValidationError);
}

}  // TEST_SUITE
