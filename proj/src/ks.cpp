#include "ppr/ks.hpp"

#include <fftw3.h>

#include <cmath>
#include <mutex>
#include <numbers>

namespace ppr {

namespace {
std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}
}  // namespace

// ---------------------------------------------------------------- params

void KsParams::validate() const {
    if (grid < 4 || grid % 2 != 0) throw ValidationError("ks: grid must be an even integer >= 4");
    if (!(length > 0.0)) throw ValidationError("ks: domain length must be positive");
    if (!(dt > 0.0)) throw ValidationError("ks: dt must be positive");
    // The preconditioner 1 + dt (q^4 - q^2) has minimum 1 - dt / 4.
    if (dt >= 4.0) throw ValidationError("ks: dt must be below 4");
    if (steps < 1) throw ValidationError("ks: steps must be positive");
    if (!(newton_tol > 0.0)) throw ValidationError("ks: newton_tol must be positive");
    if (newton_max_iter < 1) throw ValidationError("ks: newton_max_iter must be positive");
}

nlohmann::json KsParams::to_json() const {
    return {{"grid", grid},          {"length", length},         {"dt", dt}, {"steps", steps},
            {"newton_tol", newton_tol}, {"newton_max_iter", newton_max_iter}};
}

KsParams KsParams::from_json(const nlohmann::json& j) {
    KsParams p;
    p.grid = j.value("grid", p.grid);
    p.length = j.value("length", p.length);
    p.dt = j.value("dt", p.dt);
    p.steps = j.value("steps", p.steps);
    p.newton_tol = j.value("newton_tol", p.newton_tol);
    p.newton_max_iter = j.value("newton_max_iter", p.newton_max_iter);
    p.validate();
    return p;
}

// ---------------------------------------------------------------- spectral

struct SpectralDerivative::Impl {
    double* real = nullptr;
    fftw_complex* spec = nullptr;
    fftw_plan r2c = nullptr;
    fftw_plan c2r = nullptr;
};

SpectralDerivative::SpectralDerivative(int n, double length)
    : impl_(std::make_unique<Impl>()), n_(n), length_(length) {
    if (n < 2) throw InputError("spectral: size must be at least 2");
    if (!(length > 0.0)) throw InputError("spectral: length must be positive");
    std::lock_guard<std::mutex> lock(planner_mutex());
    impl_->real = fftw_alloc_real(std::size_t(n));
    impl_->spec = fftw_alloc_complex(std::size_t(n / 2 + 1));
    impl_->r2c = fftw_plan_dft_r2c_1d(n, impl_->real, impl_->spec, FFTW_ESTIMATE);
    impl_->c2r = fftw_plan_dft_c2r_1d(n, impl_->spec, impl_->real, FFTW_ESTIMATE);
    if (!impl_->r2c || !impl_->c2r) throw InputError("spectral: FFT planning failed");
}

SpectralDerivative::~SpectralDerivative() {
    std::lock_guard<std::mutex> lock(planner_mutex());
    fftw_destroy_plan(impl_->r2c);
    fftw_destroy_plan(impl_->c2r);
    fftw_free(impl_->real);
    fftw_free(impl_->spec);
}

double SpectralDerivative::wavenumber(int k) const {
    return 2.0 * std::numbers::pi * k / length_;
}

Eigen::VectorXcd SpectralDerivative::forward(const Vec& u) {
    if (u.size() != n_) throw DimensionError("spectral: length mismatch");
    std::copy(u.data(), u.data() + n_, impl_->real);
    fftw_execute(impl_->r2c);
    Eigen::VectorXcd c(n_ / 2 + 1);
    for (int k = 0; k <= n_ / 2; ++k) c(k) = {impl_->spec[k][0], impl_->spec[k][1]};
    return c;
}

Vec SpectralDerivative::inverse(const Eigen::VectorXcd& c) {
    if (c.size() != n_ / 2 + 1) throw DimensionError("spectral: coefficient length mismatch");
    for (int k = 0; k <= n_ / 2; ++k) {
        impl_->spec[k][0] = c(k).real();
        impl_->spec[k][1] = c(k).imag();
    }
    fftw_execute(impl_->c2r);
    Vec u(n_);
    const double scale = 1.0 / n_;
    for (int i = 0; i < n_; ++i) u(i) = impl_->real[i] * scale;
    return u;
}

Vec SpectralDerivative::derivative(const Vec& u, int order) {
    if (order < 0) throw InputError("spectral: derivative order must be nonnegative");
    Eigen::VectorXcd c = forward(u);
    const std::complex<double> iunit(0.0, 1.0);
    for (int k = 0; k <= n_ / 2; ++k) c(k) *= std::pow(iunit * wavenumber(k), order);
    // The Nyquist mode has no well-defined odd derivative for real signals.
    if (order % 2 == 1 && n_ % 2 == 0) c(n_ / 2) = 0.0;
    return inverse(c);
}

// ---------------------------------------------------------------- solver

Trajectory ks_solve(const Vec& u0, const KsParams& p) {
    p.validate();
    if (u0.size() != p.grid) throw DimensionError("ks_solve: initial condition length must equal grid");
    if (!u0.allFinite()) throw InputError("ks_solve: initial condition is not finite");

    SpectralDerivative fft(p.grid, p.length);
    const int half = p.grid / 2;
    Vec linear(half + 1), precond(half + 1), ik(half + 1);
    for (int k = 0; k <= half; ++k) {
        const double q = fft.wavenumber(k);
        linear(k) = q * q * q * q - q * q;
        precond(k) = 1.0 / (1.0 + p.dt * linear(k));
        ik(k) = (k == half) ? 0.0 : q;
    }
    const std::complex<double> iunit(0.0, 1.0);

    Trajectory traj;
    traj.dt = p.dt;
    traj.dx = p.dx();
    traj.values.resize(p.steps + 1, p.grid);
    traj.values.row(0) = u0.transpose();
    traj.residuals.reserve(std::size_t(p.steps));

    Vec prev = u0;
    Vec v = u0;
    for (int step = 1; step <= p.steps; ++step) {
        v = prev;
        double res_norm = 0.0;
        bool converged = false;
        for (int it = 0; it <= p.newton_max_iter; ++it) {
            Eigen::VectorXcd c = fft.forward(v);
            Eigen::VectorXcd lin(half + 1), grad(half + 1);
            for (int k = 0; k <= half; ++k) {
                lin(k) = linear(k) * c(k);
                grad(k) = iunit * ik(k) * c(k);
            }
            Vec residual = v + p.dt * (fft.inverse(lin) + v.cwiseProduct(fft.inverse(grad))) - prev;
            res_norm = residual.lpNorm<Eigen::Infinity>();
            if (!std::isfinite(res_norm)) throw SolverError("ks_solve: non-finite state (blow-up)", step);
            if (res_norm < p.newton_tol) {
                converged = true;
                break;
            }
            if (it == p.newton_max_iter) break;
            Eigen::VectorXcd r = fft.forward(residual);
            for (int k = 0; k <= half; ++k) r(k) *= precond(k);
            v -= fft.inverse(r);
        }
        if (!converged)
            throw SolverError("ks_solve: implicit step did not converge (residual " +
                                  std::to_string(res_norm) + ")",
                              step);
        traj.values.row(step) = v.transpose();
        traj.residuals.push_back(res_norm);
        prev = v;
    }
    return traj;
}

Vec ks_initial_condition(const KsParams& p, Rng& rng, std::vector<int>* modes) {
    p.validate();
    Vec u = Vec::Zero(p.grid);
    if (modes) modes->clear();
    for (int m = 0; m < 10; ++m) {
        const double a = rng.uniform();
        const int w = int(rng.integer(1, 5));
        const double phi = rng.uniform(0.0, 2.0 * std::numbers::pi);
        if (modes) modes->push_back(w);
        const double q = 2.0 * std::numbers::pi * w / p.length;
        for (int i = 0; i < p.grid; ++i) u(i) += a * std::cos(q * i * p.dx() + phi);
    }
    return u;
}

Matrix downsample_area(const Matrix& field, int rows, int cols) {
    if (rows < 1 || cols < 1) throw InputError("downsample: output size must be positive");
    if (field.rows() % rows != 0 || field.cols() % cols != 0)
        throw DimensionError("downsample: output size must divide the input size");
    const Eigen::Index br = field.rows() / rows, bc = field.cols() / cols;
    Matrix out(rows, cols);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) out(i, j) = field.block(i * br, j * bc, br, bc).mean();
    return out;
}

// ---------------------------------------------------------------- dataset

PointCloud KsDataset::as_cloud() const {
    if (trajectories.empty()) throw InputError("ks dataset is empty");
    const Eigen::Index width = trajectories.front().values.size();
    PointCloud out(Eigen::Index(trajectories.size()), width);
    for (std::size_t i = 0; i < trajectories.size(); ++i)
        out.row(Eigen::Index(i)) = Eigen::Map<const Eigen::RowVectorXd>(trajectories[i].values.data(), width);
    return out;
}

Matrix KsDataset::to_physical(const Matrix& z) const {
    return (z.array() * std + mean).matrix();
}

KsDataset prepare_ks_dataset(int count, const KsParams& p, int out_rows, int out_cols, Rng& rng) {
    if (count < 1) throw InputError("prepare_ks_dataset: count must be positive");
    p.validate();
    const int keep = p.steps / 2;
    if (keep < 1) throw InputError("prepare_ks_dataset: too few steps to take the second half");
    KsDataset ds;
    ds.trajectories.reserve(std::size_t(count));
    for (int i = 0; i < count; ++i) {
        Vec u0 = ks_initial_condition(p, rng);
        Trajectory full = ks_solve(u0, p);
        Matrix tail = full.values.bottomRows(keep);
        Trajectory t;
        t.values = downsample_area(tail, out_rows, out_cols);
        t.dt = p.dt * double(keep) / out_rows;
        t.dx = p.length / out_cols;
        ds.trajectories.push_back(std::move(t));
    }
    double sum = 0.0, sq = 0.0, n = 0.0;
    for (const auto& t : ds.trajectories) {
        sum += t.values.sum();
        sq += t.values.squaredNorm();
        n += double(t.values.size());
    }
    ds.mean = sum / n;
    ds.std = std::sqrt(std::max(sq / n - ds.mean * ds.mean, 0.0));
    if (!(ds.std > 0.0)) ds.std = 1.0;
    for (auto& t : ds.trajectories) t.values = ((t.values.array() - ds.mean) / ds.std).matrix();
    return ds;
}

}  // namespace ppr
