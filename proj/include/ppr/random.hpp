#pragma once

#include "ppr/common.hpp"

#include <cstdint>
#include <random>

namespace ppr {

/// Seeded random source. Child streams are derived deterministically so that
/// independent workers can be given reproducible, non-overlapping streams.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0);

    std::uint64_t seed() const { return seed_; }

    double normal() { return normal_(engine_); }
    double uniform() { return uniform_(engine_); }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    /// Uniform integer in [lo, hi].
    long integer(long lo, long hi);
    std::uint64_t bits() { return engine_(); }

    void fill_normal(Eigen::Ref<Matrix> out);
    Matrix normal_matrix(Eigen::Index rows, Eigen::Index cols);
    Vec normal_vector(Eigen::Index n);

    /// Independent stream keyed by (this seed, stream id).
    Rng split(std::uint64_t stream) const;

    std::mt19937_64& engine() { return engine_; }

private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
    std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

}  // namespace ppr
