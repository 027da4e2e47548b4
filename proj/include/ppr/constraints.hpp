#pragma once

#include "ppr/common.hpp"
#include "ppr/random.hpp"

#include "json.hpp"

#include <memory>
#include <string>
#include <vector>

namespace ppr {

/// Nonnegative constraint c(x) >= 0 with an analytic gradient; the feasible
/// set is {x : c(x) = 0}. Immutable after construction.
class Constraint {
public:
    virtual ~Constraint() = default;

    virtual int dim() const = 0;
    virtual std::string kind() const = 0;
    virtual double eval(const Vec& x) const = 0;
    virtual Vec grad(const Vec& x) const = 0;
    virtual nlohmann::json to_json() const = 0;

    Vec eval_batch(const Matrix& X) const;
    /// Gradients row by row; constraint values go to `values` when non-null.
    Matrix grad_batch(const Matrix& X, Vec* values = nullptr) const;

protected:
    void check(const Vec& x) const;
};

using ConstraintPtr = std::shared_ptr<const Constraint>;

ConstraintPtr constraint_from_json(const nlohmann::json& j);
/// FNV-1a over the canonical JSON serialization.
std::uint64_t constraint_hash(const Constraint& c);

struct GrfHyper {
    int num_features = 64;
    double lengthscale = 0.25;
    double kernel_variance = 1.0;
    double bias_std = 0.05;
    int dim = 2;

    void validate() const;
};

/// c(x) = 1 - exp(-f(x)^2) with the random-Fourier-feature field
/// f(x) = sqrt(2 s_f^2 / M) sum_m a_m cos(w_m . x + phi_m) + beta.
class GrfConstraint final : public Constraint {
public:
    GrfConstraint(Matrix frequencies, Vec phases, Vec coefficients, double bias,
                  double lengthscale, double kernel_variance);

    int dim() const override { return int(freq_.cols()); }
    std::string kind() const override { return "grf"; }
    double eval(const Vec& x) const override;
    Vec grad(const Vec& x) const override;
    nlohmann::json to_json() const override;

    double field(const Vec& x) const;
    Vec field_grad(const Vec& x) const;

    int num_features() const { return int(freq_.rows()); }
    const Matrix& frequencies() const { return freq_; }
    const Vec& phases() const { return phase_; }
    const Vec& coefficients() const { return coef_; }
    double bias() const { return bias_; }
    double lengthscale() const { return lengthscale_; }
    double kernel_variance() const { return kernel_variance_; }

    static GrfConstraint from_json(const nlohmann::json& j);

private:
    double amplitude() const;

    Matrix freq_;
    Vec phase_;
    Vec coef_;
    double bias_;
    double lengthscale_;
    double kernel_variance_;
};

GrfConstraint grf_sample(const GrfHyper& hyper, Rng& rng);

/// Feasibility threshold on |f| equivalent to c <= eps for GRF constraints.
double grf_field_tolerance(double eps);

enum class ObservationMap { Identity, Sine };

std::string to_string(ObservationMap m);
ObservationMap observation_map_from_string(const std::string& s);

/// c(x) = sum_i (A(x[idx_i]) - y_i)^2 for a pointwise map A.
class ObservationConstraint final : public Constraint {
public:
    ObservationConstraint(int dim, ObservationMap map, std::vector<int> indices, Vec target);

    /// Observe `truth` through `map` at `indices`.
    static ObservationConstraint from_truth(ObservationMap map, std::vector<int> indices,
                                            const Vec& truth);

    int dim() const override { return dim_; }
    std::string kind() const override { return "observation"; }
    double eval(const Vec& x) const override;
    Vec grad(const Vec& x) const override;
    nlohmann::json to_json() const override;

    ObservationMap map() const { return map_; }
    const std::vector<int>& indices() const { return indices_; }
    const Vec& target() const { return target_; }

    static ObservationConstraint from_json(const nlohmann::json& j);

private:
    int dim_;
    ObservationMap map_;
    std::vector<int> indices_;
    Vec target_;
};

/// Flattened indices of whole rows of a time-major rows x width field.
std::vector<int> row_indices(const std::vector<int>& rows, int width);

/// c(x) = ||x - center||^2.
class QuadraticConstraint final : public Constraint {
public:
    explicit QuadraticConstraint(Vec center) : center_(std::move(center)) {}
    int dim() const override { return int(center_.size()); }
    std::string kind() const override { return "quadratic"; }
    double eval(const Vec& x) const override;
    Vec grad(const Vec& x) const override;
    nlohmann::json to_json() const override;
    const Vec& center() const { return center_; }

private:
    Vec center_;
};

/// c(x) = (a . x - b)^2.
class LinearConstraint final : public Constraint {
public:
    LinearConstraint(Vec a, double b);
    int dim() const override { return int(a_.size()); }
    std::string kind() const override { return "linear"; }
    double eval(const Vec& x) const override;
    Vec grad(const Vec& x) const override;
    nlohmann::json to_json() const override;
    const Vec& normal() const { return a_; }
    double offset() const { return b_; }

private:
    Vec a_;
    double b_;
};

/// c(x) = 0 everywhere.
class ZeroConstraint final : public Constraint {
public:
    explicit ZeroConstraint(int dim) : dim_(dim) {}
    int dim() const override { return dim_; }
    std::string kind() const override { return "zero"; }
    double eval(const Vec& x) const override;
    Vec grad(const Vec& x) const override;
    nlohmann::json to_json() const override;

private:
    int dim_;
};

}  // namespace ppr
