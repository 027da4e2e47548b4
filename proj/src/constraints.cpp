#include "ppr/constraints.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace ppr {

using nlohmann::json;

namespace {

std::vector<double> to_std(const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Vec to_vec(const std::vector<double>& v) {
    return Eigen::Map<const Vec>(v.data(), Eigen::Index(v.size()));
}

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace

void Constraint::check(const Vec& x) const {
    if (x.size() != dim())
        throw DimensionError(kind() + " constraint expects dimension " + std::to_string(dim()) +
                             ", got " + std::to_string(x.size()));
    if (!x.allFinite()) throw InputError(kind() + " constraint: non-finite input");
}

// Batch forms map non-finite rows to NaN instead of throwing so a single
// diverged sample does not abort a whole cloud.
Vec Constraint::eval_batch(const Matrix& X) const {
    if (X.cols() != dim()) throw DimensionError(kind() + " constraint: batch dimension mismatch");
    Vec out(X.rows());
    for (Eigen::Index i = 0; i < X.rows(); ++i)
        out(i) = X.row(i).allFinite() ? eval(X.row(i).transpose()) : std::numeric_limits<double>::quiet_NaN();
    return out;
}

Matrix Constraint::grad_batch(const Matrix& X, Vec* values) const {
    if (X.cols() != dim()) throw DimensionError(kind() + " constraint: batch dimension mismatch");
    constexpr double nan = std::numeric_limits<double>::quiet_NaN();
    Matrix g(X.rows(), X.cols());
    if (values) values->resize(X.rows());
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        if (!X.row(i).allFinite()) {
            g.row(i).setConstant(nan);
            if (values) (*values)(i) = nan;
            continue;
        }
        Vec x = X.row(i).transpose();
        g.row(i) = grad(x).transpose();
        if (values) (*values)(i) = eval(x);
    }
    return g;
}

std::uint64_t constraint_hash(const Constraint& c) { return fnv1a(c.to_json().dump()); }

ConstraintPtr constraint_from_json(const json& j) {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "grf") return std::make_shared<GrfConstraint>(GrfConstraint::from_json(j));
    if (kind == "observation")
        return std::make_shared<ObservationConstraint>(ObservationConstraint::from_json(j));
    if (kind == "quadratic")
        return std::make_shared<QuadraticConstraint>(to_vec(j.at("center").get<std::vector<double>>()));
    if (kind == "linear")
        return std::make_shared<LinearConstraint>(to_vec(j.at("a").get<std::vector<double>>()),
                                                  j.at("b").get<double>());
    if (kind == "zero") return std::make_shared<ZeroConstraint>(j.at("dim").get<int>());
    throw ValidationError("unknown constraint kind '" + kind + "'");
}

// ---------------------------------------------------------------- GRF

void GrfHyper::validate() const {
    if (num_features < 1 || !(lengthscale > 0.0) || !(kernel_variance > 0.0) || bias_std < 0.0 ||
        dim < 1)
        throw ValidationError("GRF hyperparameters must be positive");
}

GrfConstraint::GrfConstraint(Matrix frequencies, Vec phases, Vec coefficients, double bias,
                             double lengthscale, double kernel_variance)
    : freq_(std::move(frequencies)),
      phase_(std::move(phases)),
      coef_(std::move(coefficients)),
      bias_(bias),
      lengthscale_(lengthscale),
      kernel_variance_(kernel_variance) {
    if (phase_.size() != freq_.rows() || coef_.size() != freq_.rows())
        throw DimensionError("GRF: feature arrays disagree in length");
}

double GrfConstraint::amplitude() const {
    return std::sqrt(2.0 * kernel_variance_ / double(freq_.rows()));
}

double GrfConstraint::field(const Vec& x) const {
    check(x);
    Vec arg = freq_ * x + phase_;
    return amplitude() * coef_.dot(arg.array().cos().matrix()) + bias_;
}

Vec GrfConstraint::field_grad(const Vec& x) const {
    check(x);
    Vec arg = freq_ * x + phase_;
    Vec w = (coef_.array() * arg.array().sin()).matrix();
    return -amplitude() * (freq_.transpose() * w);
}

double GrfConstraint::eval(const Vec& x) const {
    const double f = field(x);
    return -std::expm1(-f * f);
}

Vec GrfConstraint::grad(const Vec& x) const {
    const double f = field(x);
    return (2.0 * f * std::exp(-f * f)) * field_grad(x);
}

json GrfConstraint::to_json() const {
    std::vector<std::vector<double>> w;
    for (Eigen::Index i = 0; i < freq_.rows(); ++i) w.push_back(to_std(freq_.row(i).transpose()));
    return {{"kind", "grf"},          {"frequencies", w},
            {"phases", to_std(phase_)}, {"coefficients", to_std(coef_)},
            {"bias", bias_},          {"lengthscale", lengthscale_},
            {"kernel_variance", kernel_variance_}};
}

GrfConstraint GrfConstraint::from_json(const json& j) {
    auto w = j.at("frequencies").get<std::vector<std::vector<double>>>();
    if (w.empty()) throw ValidationError("GRF: no features");
    Matrix freq(Eigen::Index(w.size()), Eigen::Index(w[0].size()));
    for (std::size_t i = 0; i < w.size(); ++i) {
        if (w[i].size() != w[0].size()) throw ValidationError("GRF: ragged frequency matrix");
        for (std::size_t k = 0; k < w[i].size(); ++k) freq(Eigen::Index(i), Eigen::Index(k)) = w[i][k];
    }
    return GrfConstraint(freq, to_vec(j.at("phases").get<std::vector<double>>()),
                         to_vec(j.at("coefficients").get<std::vector<double>>()),
                         j.at("bias").get<double>(), j.at("lengthscale").get<double>(),
                         j.at("kernel_variance").get<double>());
}

GrfConstraint grf_sample(const GrfHyper& h, Rng& rng) {
    h.validate();
    Matrix freq(h.num_features, h.dim);
    Vec phase(h.num_features), coef(h.num_features);
    for (int m = 0; m < h.num_features; ++m) {
        for (int k = 0; k < h.dim; ++k) freq(m, k) = rng.normal() / h.lengthscale;
        phase(m) = rng.uniform(0.0, 2.0 * std::numbers::pi);
        coef(m) = rng.normal();
    }
    const double beta = h.bias_std == 0.0 ? 0.0 : rng.normal() * h.bias_std * std::sqrt(h.kernel_variance);
    return GrfConstraint(freq, phase, coef, beta, h.lengthscale, h.kernel_variance);
}

double grf_field_tolerance(double eps) { return std::sqrt(-std::log1p(-eps)); }

// ---------------------------------------------------------------- observation

std::string to_string(ObservationMap m) { return m == ObservationMap::Identity ? "identity" : "sine"; }

ObservationMap observation_map_from_string(const std::string& s) {
    if (s == "identity") return ObservationMap::Identity;
    if (s == "sine") return ObservationMap::Sine;
    throw ValidationError("unknown observation map '" + s + "'");
}

ObservationConstraint::ObservationConstraint(int dim, ObservationMap map, std::vector<int> indices,
                                             Vec target)
    : dim_(dim), map_(map), indices_(std::move(indices)), target_(std::move(target)) {
    if (target_.size() != Eigen::Index(indices_.size()))
        throw DimensionError("observation: target and index set differ in length");
    for (int i : indices_)
        if (i < 0 || i >= dim_) throw RangeError("observation index out of range");
}

ObservationConstraint ObservationConstraint::from_truth(ObservationMap map, std::vector<int> indices,
                                                        const Vec& truth) {
    Vec y(Eigen::Index(indices.size()));
    for (std::size_t k = 0; k < indices.size(); ++k) {
        const double v = truth(indices[k]);
        y(Eigen::Index(k)) = map == ObservationMap::Sine ? std::sin(v) : v;
    }
    return ObservationConstraint(int(truth.size()), map, std::move(indices), y);
}

double ObservationConstraint::eval(const Vec& x) const {
    check(x);
    double c = 0.0;
    for (std::size_t k = 0; k < indices_.size(); ++k) {
        const double v = x(indices_[k]);
        const double r = (map_ == ObservationMap::Sine ? std::sin(v) : v) - target_(Eigen::Index(k));
        c += r * r;
    }
    return c;
}

Vec ObservationConstraint::grad(const Vec& x) const {
    check(x);
    Vec g = Vec::Zero(dim_);
    for (std::size_t k = 0; k < indices_.size(); ++k) {
        const double v = x(indices_[k]);
        if (map_ == ObservationMap::Sine)
            g(indices_[k]) += 2.0 * (std::sin(v) - target_(Eigen::Index(k))) * std::cos(v);
        else
            g(indices_[k]) += 2.0 * (v - target_(Eigen::Index(k)));
    }
    return g;
}

json ObservationConstraint::to_json() const {
    return {{"kind", "observation"}, {"dim", dim_},          {"map", to_string(map_)},
            {"indices", indices_},   {"target", to_std(target_)}};
}

ObservationConstraint ObservationConstraint::from_json(const json& j) {
    return ObservationConstraint(j.at("dim").get<int>(),
                                 observation_map_from_string(j.at("map").get<std::string>()),
                                 j.at("indices").get<std::vector<int>>(),
                                 to_vec(j.at("target").get<std::vector<double>>()));
}

std::vector<int> row_indices(const std::vector<int>& rows, int width) {
    std::vector<int> out;
    for (int r : rows)
        for (int c = 0; c < width; ++c) out.push_back(r * width + c);
    return out;
}

// ---------------------------------------------------------------- analytic

double QuadraticConstraint::eval(const Vec& x) const {
    check(x);
    return (x - center_).squaredNorm();
}

Vec QuadraticConstraint::grad(const Vec& x) const {
    check(x);
    return 2.0 * (x - center_);
}

json QuadraticConstraint::to_json() const { return {{"kind", "quadratic"}, {"center", to_std(center_)}}; }

LinearConstraint::LinearConstraint(Vec a, double b) : a_(std::move(a)), b_(b) {
    if (a_.norm() == 0.0) throw InputError("linear constraint: zero normal");
}

double LinearConstraint::eval(const Vec& x) const {
    check(x);
    const double r = a_.dot(x) - b_;
    return r * r;
}

Vec LinearConstraint::grad(const Vec& x) const {
    check(x);
    return 2.0 * (a_.dot(x) - b_) * a_;
}

json LinearConstraint::to_json() const { return {{"kind", "linear"}, {"a", to_std(a_)}, {"b", b_}}; }

double ZeroConstraint::eval(const Vec& x) const {
    check(x);
    return 0.0;
}

Vec ZeroConstraint::grad(const Vec& x) const {
    check(x);
    return Vec::Zero(dim_);
}

json ZeroConstraint::to_json() const { return {{"kind", "zero"}, {"dim", dim_}}; }

}  // namespace ppr
