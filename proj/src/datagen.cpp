#include "ppr/datagen.hpp"

#include <cmath>
#include <numeric>

namespace ppr {

namespace {
constexpr std::uint64_t kStatsSeed = 0x57a7d1e5ULL;
}

PointCloud Standardization::apply(const PointCloud& raw) const {
    if (raw.cols() != mean.size()) throw DimensionError("standardization: dimension mismatch");
    PointCloud out = raw.rowwise() - mean.transpose();
    return out * std.cwiseInverse().asDiagonal();
}

PointCloud Standardization::invert(const PointCloud& z) const {
    if (z.cols() != mean.size()) throw DimensionError("standardization: dimension mismatch");
    PointCloud out = z * std.asDiagonal();
    return out.rowwise() + mean.transpose();
}

nlohmann::json Standardization::to_json() const {
    return {{"mean", std::vector<double>(mean.data(), mean.data() + mean.size())},
            {"std", std::vector<double>(std.data(), std.data() + std.size())}};
}

Standardization Standardization::from_json(const nlohmann::json& j) {
    auto m = j.at("mean").get<std::vector<double>>();
    auto s = j.at("std").get<std::vector<double>>();
    Standardization out;
    out.mean = Eigen::Map<Vec>(m.data(), Eigen::Index(m.size()));
    out.std = Eigen::Map<Vec>(s.data(), Eigen::Index(s.size()));
    return out;
}

Standardization Standardization::estimate(const PointCloud& raw) {
    if (raw.rows() < 2) throw InputError("standardization needs at least two samples");
    Standardization s;
    s.mean = raw.colwise().mean().transpose();
    PointCloud c = raw.rowwise() - s.mean.transpose();
    s.std = (c.array().square().colwise().sum() / double(raw.rows() - 1)).sqrt().transpose();
    return s;
}

// ---------------------------------------------------------------- checkerboard

void Checkerboard2D::validate() const {
    if (grid_size < 1) throw ValidationError("checkerboard grid size must be at least 1");
    if (jitter < 0.0) throw ValidationError("checkerboard jitter must be nonnegative");
}

nlohmann::json Checkerboard2D::to_json() const {
    return {{"grid_size", grid_size}, {"jitter", jitter}};
}

PointCloud checkerboard_raw(const Checkerboard2D& p, int n, Rng& rng, Eigen::MatrixXi* cells) {
    p.validate();
    if (n < 1) throw InputError("checkerboard: n must be positive");
    PointCloud out(n, 2);
    if (cells) cells->resize(n, 2);
    const int m = p.grid_size;
    for (int s = 0; s < n; ++s) {
        const int i = int(rng.integer(0, m - 1));
        // j ranges over {j : (i + j) even}: j = (i mod 2) + 2k.
        const int first = i % 2;
        const int count = (m - first + 1) / 2;
        const int j = first + 2 * int(rng.integer(0, count - 1));
        out(s, 0) = i + rng.uniform();
        out(s, 1) = j + rng.uniform();
        if (cells) {
            (*cells)(s, 0) = i;
            (*cells)(s, 1) = j;
        }
        if (p.jitter > 0.0) {
            out(s, 0) += p.jitter * rng.normal();
            out(s, 1) += p.jitter * rng.normal();
        }
    }
    return out;
}

Standardization checkerboard_stats(const Checkerboard2D& p) {
    Rng rng(kStatsSeed);
    return Standardization::estimate(checkerboard_raw(p, kStandardizationDraws, rng));
}

PointCloud checkerboard_sample(const Checkerboard2D& p, int n, Rng& rng) {
    return checkerboard_stats(p).apply(checkerboard_raw(p, n, rng));
}

// ---------------------------------------------------------------- banana

void BananaGmm::validate() const {
    if (weights.empty() || means.size() != weights.size() || stds.size() != weights.size())
        throw ValidationError("banana: weights, means and stds must have equal nonzero length");
    double total = 0.0;
    for (double w : weights) {
        if (!(w >= 0.0)) throw ValidationError("banana: weights must be nonnegative");
        total += w;
    }
    if (std::abs(total - 1.0) > 1e-9) throw ValidationError("banana: weights must sum to 1");
    for (const auto& s : stds)
        if (!(s(0) > 0.0 && s(1) > 0.0)) throw ValidationError("banana: stds must be positive");
}

double BananaGmm::first_coordinate_second_moment() const {
    double m2 = 0.0;
    for (std::size_t k = 0; k < weights.size(); ++k)
        m2 += weights[k] * (means[k](0) * means[k](0) + stds[k](0) * stds[k](0));
    return m2;
}

nlohmann::json BananaGmm::to_json() const {
    nlohmann::json mu = nlohmann::json::array(), sd = nlohmann::json::array();
    for (std::size_t k = 0; k < weights.size(); ++k) {
        mu.push_back({means[k](0), means[k](1)});
        sd.push_back({stds[k](0), stds[k](1)});
    }
    return {{"weights", weights}, {"means", mu}, {"stds", sd}, {"curvature", curvature}};
}

BananaGmm BananaGmm::defaults() {
    BananaGmm g;
    g.weights = {0.35, 0.35, 0.3};
    g.means = {Eigen::Vector2d(-1.5, 0.0), Eigen::Vector2d(1.5, 0.0), Eigen::Vector2d(0.0, 1.5)};
    g.stds = {Eigen::Vector2d(0.5, 0.3), Eigen::Vector2d(0.5, 0.3), Eigen::Vector2d(0.4, 0.4)};
    g.curvature = 0.4;
    return g;
}

PointCloud banana_raw(const BananaGmm& p, int n, Rng& rng, std::vector<int>* components) {
    p.validate();
    if (n < 1) throw InputError("banana: n must be positive");
    std::vector<double> cdf(p.weights.size());
    std::partial_sum(p.weights.begin(), p.weights.end(), cdf.begin());
    const double m2 = p.first_coordinate_second_moment();
    PointCloud out(n, 2);
    if (components) components->assign(std::size_t(n), 0);
    for (int s = 0; s < n; ++s) {
        const double u = rng.uniform();
        std::size_t k = 0;
        while (k + 1 < cdf.size() && (u >= cdf[k] || p.weights[k] == 0.0)) ++k;
        const double z1 = p.means[k](0) + p.stds[k](0) * rng.normal();
        const double z2 = p.means[k](1) + p.stds[k](1) * rng.normal();
        out(s, 0) = z1;
        out(s, 1) = z2 + p.curvature * (z1 * z1 - m2);
        if (components) (*components)[std::size_t(s)] = int(k);
    }
    return out;
}

Standardization banana_stats(const BananaGmm& p) {
    Rng rng(kStatsSeed);
    return Standardization::estimate(banana_raw(p, kStandardizationDraws, rng));
}

PointCloud banana_sample(const BananaGmm& p, int n, Rng& rng) {
    return banana_stats(p).apply(banana_raw(p, n, rng));
}

}  // namespace ppr
