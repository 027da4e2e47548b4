#include "doctest.h"

#include "ppr/datagen.hpp"
#include "ppr/ks.hpp"

#include <cmath>
#include <numbers>
#include <set>

using namespace ppr;

TEST_SUITE("datagen") {

TEST_CASE("checkerboard parity holds before jitter") {
    Rng rng(1);
    Eigen::MatrixXi cells;
    PointCloud x = checkerboard_raw(Checkerboard2D{2, 0.0}, 10000, rng, &cells);
    int violations = 0;
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        const int i = int(std::floor(x(r, 0))), j = int(std::floor(x(r, 1)));
        if ((i + j) % 2 != 0 || i != cells(r, 0) || j != cells(r, 1)) ++violations;
        CHECK(x(r, 0) >= 0.0);
        CHECK(x(r, 0) < 2.0);
    }
    CHECK(violations == 0);
}

TEST_CASE("checkerboard cells are uniform over the allowed set") {
    Rng rng(2);
    const int n = 100000;
    Eigen::MatrixXi cells;
    checkerboard_raw(Checkerboard2D{4, 0.0}, n, rng, &cells);
    Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(4, 4);
    for (int r = 0; r < n; ++r) counts(cells(r, 0), cells(r, 1)) += 1.0;
    double chi2 = 0.0;
    int allowed = 0;
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) {
            if ((i + j) % 2) {
                CHECK(counts(i, j) == 0.0);
                continue;
            }
            ++allowed;
            const double e = n / 8.0;
            chi2 += (counts(i, j) - e) * (counts(i, j) - e) / e;
        }
    CHECK(allowed == 8);
    // 99th percentile of chi-square with 7 degrees of freedom.
    CHECK(chi2 < 18.475);
}

TEST_CASE("standardized samples have zero mean and unit std") {
    Rng rng(3);
    for (int which = 0; which < 2; ++which) {
        PointCloud x = which == 0 ? checkerboard_sample(Checkerboard2D{}, 100000, rng)
                                  : banana_sample(BananaGmm::defaults(), 100000, rng);
        for (int c = 0; c < 2; ++c) {
            const double mu = x.col(c).mean();
            const double sd = std::sqrt((x.col(c).array() - mu).square().sum() / (x.rows() - 1));
            CHECK(std::abs(mu) < 0.02);
            CHECK(sd > 0.98);
            CHECK(sd < 1.02);
        }
    }
}

TEST_CASE("standardization round trip") {
    Rng rng(4);
    PointCloud raw = banana_raw(BananaGmm::defaults(), 50, rng);
    Standardization s = Standardization::estimate(raw);
    CHECK((s.invert(s.apply(raw)) - raw).cwiseAbs().maxCoeff() < 1e-12);
    Standardization back = Standardization::from_json(s.to_json());
    CHECK(back.mean == s.mean);
    CHECK(back.std == s.std);
    CHECK_THROWS_AS(s.apply(PointCloud::Zero(3, 3)), DimensionError);
}

TEST_CASE("banana without shear matches component means") {
    BananaGmm g = BananaGmm::defaults();
    g.curvature = 0.0;
    Rng rng(5);
    std::vector<int> comp;
    PointCloud x = banana_raw(g, 100000, rng, &comp);
    for (std::size_t k = 0; k < g.weights.size(); ++k) {
        Eigen::Vector2d sum = Eigen::Vector2d::Zero();
        int n = 0;
        for (std::size_t r = 0; r < comp.size(); ++r)
            if (comp[r] == int(k)) {
                sum += x.row(Eigen::Index(r)).transpose();
                ++n;
            }
        Eigen::Vector2d mean = sum / n;
        for (int c = 0; c < 2; ++c) CHECK(std::abs(mean(c) - g.means[k](c)) < 3.0 * g.stds[k](c) / std::sqrt(n));
    }
}

TEST_CASE("banana shear is centered") {
    BananaGmm g;
    g.weights = {1.0};
    g.means = {Eigen::Vector2d(0.0, 0.0)};
    g.stds = {Eigen::Vector2d(1.0, 1.0)};
    g.curvature = 1.0;
    CHECK(g.first_coordinate_second_moment() == 1.0);
    Rng rng(6);
    PointCloud x = banana_raw(g, 100000, rng);
    // Var(z2 + z1^2 - 1) = 1 + 2.
    CHECK(std::abs(x.col(1).mean()) < 3.0 * std::sqrt(3.0 / 1e5));
}

TEST_CASE("banana degenerate and invalid weights") {
    BananaGmm g = BananaGmm::defaults();
    g.weights = {1.0, 0.0, 0.0};
    Rng rng(7);
    std::vector<int> comp;
    banana_raw(g, 5000, rng, &comp);
    CHECK(std::set<int>(comp.begin(), comp.end()) == std::set<int>{0});
    g.weights = {0.0, 0.0, 1.0};
    banana_raw(g, 5000, rng, &comp);
    CHECK(std::set<int>(comp.begin(), comp.end()) == std::set<int>{2});
    g.weights = {0.5, 0.6, -0.1};
    CHECK_THROWS_AS(banana_raw(g, 1, rng), ValidationError);
    g.weights = {0.5, 0.4, 0.0};
    CHECK_THROWS_AS(banana_raw(g, 1, rng), ValidationError);
    CHECK_THROWS_AS(checkerboard_raw(Checkerboard2D{0, 0.0}, 1, rng), ValidationError);
}

TEST_CASE("spectral derivative is exact on band-limited input") {
    const int n = 128;
    const double L = 64.0;
    SpectralDerivative d(n, L);
    for (int k : {1, 3, 7, 20}) {
        const double q = 2.0 * std::numbers::pi * k / L;
        Vec u(n), du(n), d2u(n);
        for (int i = 0; i < n; ++i) {
            const double x = i * L / n;
            u(i) = std::cos(q * x);
            du(i) = -q * std::sin(q * x);
            d2u(i) = -q * q * std::cos(q * x);
        }
        CHECK((d.derivative(u, 1) - du).lpNorm<Eigen::Infinity>() < 1e-12 * q);
        CHECK((d.derivative(u, 2) - d2u).lpNorm<Eigen::Infinity>() < 1e-12 * std::max(q * q, 1.0));
    }
    Rng rng(8);
    Vec u = rng.normal_vector(n);
    CHECK((d.inverse(d.forward(u)) - u).lpNorm<Eigen::Infinity>() < 1e-12);
}

TEST_CASE("KS zero state is a fixed point") {
    KsParams p;
    p.steps = 20;
    Trajectory t = ks_solve(Vec::Zero(p.grid), p);
    CHECK(t.values.rows() == 21);
    CHECK(t.values.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("KS linear growth rate matches the dispersion relation") {
    KsParams p;
    p.steps = 50;
    const int k = 5;
    const double q = 2.0 * std::numbers::pi * k / p.length;
    Vec u0(p.grid);
    for (int i = 0; i < p.grid; ++i) u0(i) = 1e-4 * std::cos(q * i * p.dx());
    Trajectory t = ks_solve(u0, p);
    SpectralDerivative fft(p.grid, p.length);
    // Least-squares slope of log amplitude against time.
    double st = 0, sy = 0, stt = 0, sty = 0;
    const int n = p.steps + 1;
    for (int s = 0; s < n; ++s) {
        const double time = s * p.dt;
        const double y = std::log(std::abs(fft.forward(t.values.row(s).transpose())(k)));
        st += time;
        sy += y;
        stt += time * time;
        sty += time * y;
    }
    const double slope = (n * sty - st * sy) / (n * stt - st * st);
    const double rate = q * q - q * q * q * q;
    CHECK(std::abs(slope - rate) < 0.05 * rate);
    for (double r : t.residuals) CHECK(r < p.newton_tol);
}

TEST_CASE("KS initial condition bounds and spectral support") {
    KsParams p;
    Rng rng(9), twin(9);
    std::vector<int> modes;
    Vec u = ks_initial_condition(p, rng, &modes);
    CHECK(modes.size() == 10);
    CHECK(u.cwiseAbs().maxCoeff() <= 10.0);
    CHECK(ks_initial_condition(p, twin) == u);
    SpectralDerivative fft(p.grid, p.length);
    Eigen::VectorXcd c = fft.forward(u);
    std::set<int> support(modes.begin(), modes.end());
    double inside = 0.0, outside = 0.0;
    for (Eigen::Index k = 0; k < c.size(); ++k) (support.count(int(k)) ? inside : outside) += std::norm(c(k));
    CHECK(outside < 1e-20 * inside);
}

TEST_CASE("area downsampling") {
    Rng rng(10);
    Matrix f = rng.normal_matrix(8, 12);
    CHECK(downsample_area(f, 8, 12) == f);
    Matrix constant = Matrix::Constant(8, 12, 2.5);
    CHECK((downsample_area(constant, 2, 3).array() == 2.5).all());
    Matrix coarse = downsample_area(f, 4, 4);
    // Energy per unit area cannot grow under block averaging.
    CHECK(coarse.squaredNorm() * (8 * 12 / 16.0) <= f.squaredNorm());
    CHECK_THROWS_AS(downsample_area(f, 3, 4), DimensionError);
}

TEST_CASE("KS dataset is deterministic and standardized") {
    KsParams p;
    p.grid = 64;
    p.steps = 64;
    Rng a(11), b(11);
    KsDataset da = prepare_ks_dataset(3, p, 16, 16, a);
    KsDataset db = prepare_ks_dataset(3, p, 16, 16, b);
    PointCloud ca = da.as_cloud(), cb = db.as_cloud();
    CHECK(ca.rows() == 3);
    CHECK(ca.cols() == 256);
    CHECK(ca == cb);
    CHECK(std::abs(ca.mean()) < 1e-12);
    CHECK(std::sqrt((ca.array() - ca.mean()).square().mean()) == doctest::Approx(1.0).epsilon(1e-12));

    // Energy contraction per trajectory, checked against a direct solve.
    Rng c(11);
    Trajectory full = ks_solve(ks_initial_condition(p, c), p);
    Matrix tail = full.values.bottomRows(p.steps / 2);
    Matrix coarse = downsample_area(tail, 16, 16);
    CHECK(coarse.squaredNorm() * (tail.size() / 256.0) <= tail.squaredNorm() * (1 + 1e-12));
    Matrix phys = da.to_physical(Eigen::Map<const Matrix>(ca.row(0).data(), 16, 16));
    CHECK((phys - coarse).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("KS parameter validation") {
    KsParams p;
    p.grid = 7;
    CHECK_THROWS_AS(p.validate(), ValidationError);
    p = KsParams{};
    CHECK(KsParams::from_json(p.to_json()).to_json() == p.to_json());
    CHECK_THROWS_AS(ks_solve(Vec::Zero(5), p), DimensionError);
}

}  // TEST_SUITE
