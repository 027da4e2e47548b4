#include "ppr/net.hpp"

#include "ppr/random.hpp"

#include <cmath>

namespace ppr {

std::string to_string(Activation a) { return a == Activation::SiLU ? "silu" : "tanh"; }

Activation activation_from_string(const std::string& s) {
    if (s == "silu") return Activation::SiLU;
    if (s == "tanh") return Activation::Tanh;
    throw ValidationError("unknown activation '" + s + "'");
}

void NetConfig::validate() const {
    if (dim < 1) throw ValidationError("net dim must be positive");
    if (embed_features < 0 || embed_features % 2 != 0)
        throw ValidationError("embed_features must be a nonnegative even number");
    for (int h : hidden)
        if (h < 1) throw ValidationError("hidden widths must be positive");
    if (!(sigma_data > 0.0)) throw ValidationError("sigma_data must be positive");
}

Preconditioning Preconditioning::at(double sigma, double sd) {
    const double s2 = sigma * sigma, d2 = sd * sd;
    Preconditioning p;
    p.c_skip = d2 / (s2 + d2);
    p.c_out = sigma * sd / std::sqrt(s2 + d2);
    p.c_in = 1.0 / std::sqrt(s2 + d2);
    p.c_noise = std::log(sigma) / 4.0;
    return p;
}

GaussianSkip GaussianSkip::fit(const PointCloud& samples) {
    if (samples.rows() < 2) throw InputError("gaussian skip: need at least two samples");
    GaussianSkip g;
    g.mean = samples.colwise().mean().transpose();
    const Matrix centered = samples.rowwise() - g.mean.transpose();
    const Matrix cov = (centered.transpose() * centered) / double(samples.rows() - 1);
    Eigen::SelfAdjointEigenSolver<Matrix> es(cov);
    if (es.info() != Eigen::Success) throw Error("gaussian skip: eigendecomposition failed");
    g.basis = es.eigenvectors();
    g.variances = es.eigenvalues().cwiseMax(1e-12 * std::max(es.eigenvalues().maxCoeff(), 1e-300));
    return g;
}

Matrix GaussianSkip::gains(const Vec& sigmas) const {
    Matrix g(sigmas.size(), variances.size());
    for (Eigen::Index i = 0; i < sigmas.size(); ++i)
        g.row(i) = (variances.array() / (variances.array() + sigmas(i) * sigmas(i))).transpose();
    return g;
}

namespace {

void activate(Activation act, const Matrix& z, Matrix& out) {
    if (act == Activation::SiLU)
        out = (z.array() / (1.0 + (-z.array()).exp())).matrix();
    else
        out = z.array().tanh().matrix();
}

// dz = da * act'(z), computed in place on da.
void activate_backward(Activation act, const Matrix& z, const Matrix& a, Matrix& da) {
    if (act == Activation::SiLU) {
        auto sig = 1.0 / (1.0 + (-z.array()).exp());
        da.array() *= sig * (1.0 + z.array() * (1.0 - sig));
    } else {
        da.array() *= 1.0 - a.array().square();
    }
}

}  // namespace

DenoiserNet::DenoiserNet(NetConfig config, std::uint64_t seed, bool zero_final)
    : config_(std::move(config)) {
    config_.validate();
    build_layout();
    Rng rng(seed);
    params_.setZero();
    for (const Layer& l : layers_) {
        const double bound = std::sqrt(3.0 / double(l.in));
        for (Eigen::Index i = 0; i < Eigen::Index(l.in) * l.out; ++i)
            params_(l.w_off + i) = rng.uniform(-bound, bound);
    }
    const int nf = config_.embed_features / 2;
    freqs_.resize(nf);
    for (int k = 0; k < nf; ++k) freqs_(k) = std::pow(2.0, 0.5 * k);
    if (zero_final) zero_final_layer();
}

DenoiserNet::DenoiserNet(NetConfig config, Vec parameters, Vec freqs)
    : config_(std::move(config)), freqs_(std::move(freqs)) {
    config_.validate();
    build_layout();
    if (parameters.size() != params_.size())
        throw FormatError("parameter count " + std::to_string(parameters.size()) +
                          " does not match architecture (" + std::to_string(params_.size()) + ")");
    if (freqs_.size() != config_.embed_features / 2)
        throw FormatError("embedding frequency count does not match architecture");
    params_ = std::move(parameters);
}

void DenoiserNet::build_layout() {
    layers_.clear();
    int in = config_.dim + config_.embed_features;
    Eigen::Index off = 0;
    std::vector<int> widths = config_.hidden;
    widths.push_back(config_.dim);
    for (int out : widths) {
        Layer l{in, out, off, off + Eigen::Index(in) * out};
        off = l.b_off + out;
        layers_.push_back(l);
        in = out;
    }
    params_ = Vec::Zero(off);
}

void DenoiserNet::set_parameters(const Vec& p) {
    if (p.size() != params_.size()) throw DimensionError("set_parameters: size mismatch");
    params_ = p;
}

void DenoiserNet::set_gaussian_skip(GaussianSkip skip) {
    const Eigen::Index d = config_.dim;
    if (skip.mean.size() != d || skip.variances.size() != d || skip.basis.rows() != d || skip.basis.cols() != d)
        throw DimensionError("gaussian skip: dimension mismatch");
    if (!(skip.variances.array() > 0.0).all()) throw InputError("gaussian skip: variances must be positive");
    skip_ = std::move(skip);
}

void DenoiserNet::zero_final_layer() {
    const Layer& l = layers_.back();
    params_.segment(l.w_off, Eigen::Index(l.in) * l.out).setZero();
    params_.segment(l.b_off, l.out).setZero();
}

Eigen::Map<const Matrix> DenoiserNet::weight(std::size_t l) const {
    const Layer& L = layers_[l];
    return Eigen::Map<const Matrix>(params_.data() + L.w_off, L.out, L.in);
}

Eigen::Map<const Vec> DenoiserNet::bias(std::size_t l) const {
    const Layer& L = layers_[l];
    return Eigen::Map<const Vec>(params_.data() + L.b_off, L.out);
}

Matrix DenoiserNet::embed(const Vec& c_noise) const {
    const Eigen::Index nf = freqs_.size();
    Matrix e(c_noise.size(), 2 * nf);
    for (Eigen::Index i = 0; i < c_noise.size(); ++i)
        for (Eigen::Index k = 0; k < nf; ++k) {
            e(i, 2 * k) = std::cos(freqs_(k) * c_noise(i));
            e(i, 2 * k + 1) = std::sin(freqs_(k) * c_noise(i));
        }
    return e;
}

Matrix DenoiserNet::forward(const Matrix& X, const Vec& sigmas, GradTape* tape) const {
    const Eigen::Index n = X.rows();
    if (sigmas.size() != n) throw DimensionError("forward: one sigma per row required");
    Vec c_skip(n), c_out(n), c_in(n), c_noise(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        if (!(sigmas(i) > 0.0)) throw InputError("forward: sigma must be positive");
        const Preconditioning p = Preconditioning::at(sigmas(i), config_.sigma_data);
        c_skip(i) = p.c_skip;
        c_out(i) = p.c_out;
        c_in(i) = p.c_in;
        c_noise(i) = p.c_noise;
    }

    Matrix input(n, config_.dim + config_.embed_features);
    input.leftCols(config_.dim) = c_in.asDiagonal() * X;
    if (config_.embed_features > 0) input.rightCols(config_.embed_features) = embed(c_noise);

    const std::size_t nl = layers_.size();
    Matrix a = std::move(input);
    Matrix z;
    if (tape) {
        tape->x = X;
        tape->c_skip = c_skip;
        tape->c_out = c_out;
        tape->c_in = c_in;
        tape->pre.assign(nl, Matrix());
        tape->post.assign(nl - 1, Matrix());
    }
    for (std::size_t l = 0; l < nl; ++l) {
        z.noalias() = a * weight(l).transpose();
        z.rowwise() += bias(l).transpose();
        if (l + 1 == nl) break;
        if (tape) {
            if (l == 0) tape->input = a;
            tape->pre[l] = z;
            activate(config_.activation, z, tape->post[l]);
            a = tape->post[l];
        } else {
            activate(config_.activation, z, a);
        }
    }
    if (tape) {
        if (nl == 1) tape->input = a;
        tape->pre[nl - 1] = z;
    }
    Matrix out;
    if (skip_) {
        Matrix gain = skip_->gains(sigmas);
        Matrix coords = (X.rowwise() - skip_->mean.transpose()) * skip_->basis;
        coords.array() *= gain.array();
        out = coords * skip_->basis.transpose();
        out.rowwise() += skip_->mean.transpose();
        if (tape) tape->skip_gain = std::move(gain);
    } else {
        if (config_.gaussian_skip) throw InputError("forward: gaussian skip configured but not fitted");
        out = c_skip.asDiagonal() * X;
    }
    out.noalias() += c_out.asDiagonal() * z;
    return out;
}

Matrix DenoiserNet::backward(const GradTape& tape, const Matrix& U, Vec* param_grad) const {
    const Eigen::Index n = tape.x.rows();
    if (U.rows() != n || U.cols() != config_.dim)
        throw DimensionError("backward: upstream shape mismatch");
    if (param_grad && param_grad->size() != params_.size())
        throw DimensionError("backward: parameter gradient size mismatch");

    Matrix gx;
    if (tape.skip_gain.size() > 0) {
        Matrix coords = U * skip_->basis;
        coords.array() *= tape.skip_gain.array();
        gx = coords * skip_->basis.transpose();
    } else {
        gx = tape.c_skip.asDiagonal() * U;
    }
    Matrix da = tape.c_out.asDiagonal() * U;
    Matrix dprev;
    for (std::size_t l = layers_.size(); l-- > 0;) {
        const Layer& L = layers_[l];
        if (l + 1 < layers_.size()) activate_backward(config_.activation, tape.pre[l], tape.post[l], da);
        const Matrix& a_in = l == 0 ? tape.input : tape.post[l - 1];
        if (param_grad) {
            Eigen::Map<Matrix> gw(param_grad->data() + L.w_off, L.out, L.in);
            gw.noalias() += da.transpose() * a_in;
            param_grad->segment(L.b_off, L.out) += da.colwise().sum().transpose();
        }
        dprev.noalias() = da * weight(l);
        da.swap(dprev);
    }
    gx.noalias() += tape.c_in.asDiagonal() * da.leftCols(config_.dim);
    return gx;
}

Matrix DenoiserNet::denoise_batch(const Matrix& X, double sigma) const {
    check_batch(X, sigma);
    if (sigma == 0.0) return X;
    return forward(X, Vec::Constant(X.rows(), sigma), nullptr);
}

Matrix DenoiserNet::vjp_batch(const Matrix& X, double sigma, const Matrix& U,
                              Matrix* denoised) const {
    check_batch(X, sigma);
    if (U.rows() != X.rows() || U.cols() != X.cols())
        throw DimensionError("vjp: upstream shape mismatch");
    if (sigma == 0.0) {
        if (denoised) *denoised = X;
        return U;
    }
    GradTape tape;
    Matrix out = forward(X, Vec::Constant(X.rows(), sigma), &tape);
    if (denoised) *denoised = std::move(out);
    return backward(tape, U, nullptr);
}

}  // namespace ppr
