#include "ppr/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>

namespace ppr {

void TrainConfig::validate() const {
    if (batch < 1) throw ValidationError("batch must be positive");
    if (steps < 0) throw ValidationError("steps must be nonnegative");
    if (!(lr > 0.0)) throw ValidationError("lr must be positive");
    if (!(sigma_min > 0.0 && sigma_min < sigma_max)) throw ValidationError("bad sigma range");
    if (!(lr_final_fraction >= 0.0 && lr_final_fraction <= 1.0))
        throw ValidationError("lr_final_fraction must lie in [0, 1]");
}

double denoising_loss(const DenoiserNet& net, const Matrix& x0, const Matrix& noise,
                      const Vec& sigmas, Vec* grad) {
    const Eigen::Index n = x0.rows(), d = x0.cols();
    const double sd = net.config().sigma_data;
    Matrix xt = x0 + sigmas.asDiagonal() * noise;
    GradTape tape;
    Matrix out = net.forward(xt, sigmas, grad ? &tape : nullptr);
    Matrix diff = out - x0;
    Vec weight(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double s = sigmas(i);
        weight(i) = (s * s + sd * sd) / (s * sd * s * sd);
    }
    const double scale = 1.0 / double(n * d);
    const double loss = scale * (weight.asDiagonal() * diff.array().square().matrix()).sum();
    if (grad) {
        Matrix upstream = (2.0 * scale) * (weight.asDiagonal() * diff);
        grad->setZero(net.num_parameters());
        net.backward(tape, upstream, grad);
    }
    return loss;
}

std::vector<double> train(DenoiserNet& net, const PointCloud& dataset, const TrainConfig& cfg,
                          Rng& rng, const BatchAugment& augment) {
    cfg.validate();
    if (dataset.rows() == 0) throw InputError("train: empty dataset");
    if (dataset.cols() != net.dim()) throw DimensionError("train: dataset dimension mismatch");

    if (net.config().gaussian_skip && !net.gaussian_skip()) {
        // Augmented copies so the covariance sees the symmetries the batches will.
        Eigen::Index copies = 1;
        if (augment) copies = std::clamp<Eigen::Index>((8 * dataset.cols() + dataset.rows() - 1) / dataset.rows(), 1, 64);
        PointCloud sample(dataset.rows() * copies, dataset.cols());
        for (Eigen::Index c = 0; c < copies; ++c) {
            Matrix block = dataset;
            if (augment) augment(block, rng);
            sample.middleRows(c * dataset.rows(), dataset.rows()) = block;
        }
        net.set_gaussian_skip(GaussianSkip::fit(sample));
    }

    const Eigen::Index np = net.num_parameters();
    Vec m = Vec::Zero(np), v = Vec::Zero(np), grad(np);
    std::vector<double> history;
    history.reserve(std::size_t(cfg.steps));

    Matrix batch(cfg.batch, dataset.cols());
    Matrix noise(cfg.batch, dataset.cols());
    Vec sigmas(cfg.batch);
    double b1t = 1.0, b2t = 1.0;
    for (long step = 0; step < cfg.steps; ++step) {
        for (int i = 0; i < cfg.batch; ++i) {
            batch.row(i) = dataset.row(rng.integer(0, dataset.rows() - 1));
            const double s = std::exp(cfg.p_mean + cfg.p_std * rng.normal());
            sigmas(i) = std::clamp(s, cfg.sigma_min, cfg.sigma_max);
        }
        if (augment) augment(batch, rng);
        rng.fill_normal(noise);

        const double loss = denoising_loss(net, batch, noise, sigmas, &grad);
        if (!std::isfinite(loss) || !grad.allFinite())
            throw TrainingError("training diverged at step " + std::to_string(step), step);
        history.push_back(loss);

        double lr = cfg.lr;
        if (cfg.lr_final_fraction < 1.0 && cfg.steps > 1) {
            const double u = double(step) / double(cfg.steps - 1);
            const double f = cfg.lr_final_fraction;
            lr = cfg.lr * (f + (1.0 - f) * 0.5 * (1.0 + std::cos(std::numbers::pi * u)));
        }
        b1t *= cfg.beta1;
        b2t *= cfg.beta2;
        m = cfg.beta1 * m + (1.0 - cfg.beta1) * grad;
        v = cfg.beta2 * v + (1.0 - cfg.beta2) * grad.array().square().matrix();
        const double a = lr * std::sqrt(1.0 - b2t) / (1.0 - b1t);
        net.mutable_parameters().array() -= a * m.array() / (v.array().sqrt() + cfg.adam_eps);
    }
    return history;
}

void write_loss_csv(const std::string& path, const std::vector<double>& history) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path);
    out << "step,loss\n";
    out.precision(17);
    for (std::size_t i = 0; i < history.size(); ++i) out << i << ',' << history[i] << '\n';
}

}  // namespace ppr
