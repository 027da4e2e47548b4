#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace ppr {

using Vec = Eigen::VectorXd;
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// N x D sample matrix; row i is one sample.
using PointCloud = Matrix;

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad argument values (non-finite entries, empty clouds, wrong sizes).
class InputError : public Error {
public:
    using Error::Error;
};

class DimensionError : public InputError {
public:
    using InputError::InputError;
};

class RangeError : public Error {
public:
    using Error::Error;
};

/// Malformed, truncated or version-mismatched files.
class FormatError : public Error {
public:
    using Error::Error;
};

class ValidationError : public Error {
public:
    using Error::Error;
};

class TrainingError : public Error {
public:
    TrainingError(const std::string& what, long step) : Error(what), step_(step) {}
    long step() const { return step_; }

private:
    long step_;
};

class SolverError : public Error {
public:
    SolverError(const std::string& what, long step) : Error(what), step_(step) {}
    long step() const { return step_; }

private:
    long step_;
};

class ProjectionError : public Error {
public:
    ProjectionError(const std::string& what, Vec last_finite)
        : Error(what), last_finite_(std::move(last_finite)) {}
    const Vec& last_finite_iterate() const { return last_finite_; }

private:
    Vec last_finite_;
};

class OracleExhaustedError : public Error {
public:
    OracleExhaustedError(const std::string& what, long achieved) : Error(what), achieved_(achieved) {}
    long achieved() const { return achieved_; }

private:
    long achieved_;
};

class MetricUndefinedError : public Error {
public:
    using Error::Error;
};

inline bool all_finite(const Eigen::Ref<const Matrix>& m) { return m.allFinite(); }

}  // namespace ppr
