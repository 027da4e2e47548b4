#pragma once

#include "ppr/common.hpp"

#include <functional>
#include <vector>

namespace ppr {

/// Evaluates a row-separable objective on a subset of rows. `X` holds the
/// current points for the original row indices `rows`; `values` and `grads`
/// are resized by the callee to match X.
using BatchObjective =
    std::function<void(const Matrix& X, const std::vector<Eigen::Index>& rows, Vec& values, Matrix& grads)>;

struct BatchResult {
    Matrix x;          ///< best iterate per row
    Vec value;         ///< objective at the best iterate
    Vec initial_value; ///< objective at the start point
    std::vector<int> iters;
    std::vector<char> converged;
    std::vector<char> failed;  ///< start point had a non-finite objective
    long evaluations = 0;
};

struct LbfgsOptions {
    int memory = 10;
    int max_iters = 8;
    double tol = 1e-10;
    double c1 = 1e-4;
    double c2 = 0.9;
    int max_line_search = 20;
    /// Objective evaluations per row after the initial one; 0 means unlimited.
    int max_evals = 0;
    /// Objective is bounded below by zero: steepest-descent trial steps aim at
    /// the zero of the linear model instead of a unit-length step.
    bool nonnegative = false;
};

struct AdamOptions {
    double lr = 1e-2;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    int max_iters = 8;
    double tol = 1e-10;
};

struct GradientDescentOptions {
    double lr = 1e-1;
    int max_iters = 8;
    double tol = 1e-10;
};

/// Limited-memory BFGS with a strong-Wolfe line search, run independently per
/// row but evaluated in lockstep so each objective call sees a batch.
BatchResult lbfgs_batch(const BatchObjective& f, const Matrix& x0, const LbfgsOptions& opt);
BatchResult adam_batch(const BatchObjective& f, const Matrix& x0, const AdamOptions& opt);
/// Plain fixed-rate gradient descent; keeps the best iterate.
BatchResult gradient_descent_batch(const BatchObjective& f, const Matrix& x0, const GradientDescentOptions& opt);

}  // namespace ppr
