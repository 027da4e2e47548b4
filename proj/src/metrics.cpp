#include "ppr/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <queue>

namespace ppr {

namespace {

Matrix sq_distances(const PointCloud& A, const PointCloud& B) {
    const Vec na = A.rowwise().squaredNorm();
    const Vec nb = B.rowwise().squaredNorm();
    Matrix C = -2.0 * (A * B.transpose());
    C.colwise() += na;
    C.rowwise() += nb.transpose();
    return C.cwiseMax(0.0);
}

// -eps * log sum_j exp(log_w + (pot_j - cost_ij) / eps) for every row i.
void soft_min_rows(const Matrix& cost, const Vec& pot, double log_w, double eps, Vec& out) {
    const Eigen::Index n = cost.rows();
    out.resize(n);
    Eigen::ArrayXd row(cost.cols());
    for (Eigen::Index i = 0; i < n; ++i) {
        row = (pot.transpose() - cost.row(i)).array() / eps;
        const double mx = row.maxCoeff();
        out(i) = -eps * (log_w + mx + std::log((row - mx).exp().sum()));
    }
}

// Log-domain Sinkhorn with epsilon scaling: the regularization starts at the
// cost scale and halves per phase, warm-starting the potentials, until the
// target eps is reached. Intermediate phases stop at a loose tolerance. For
// symmetric problems the potential is updated by averaging.
double sinkhorn_value(const PointCloud& A, const PointCloud& B, double eps, int max_iters, double tol, bool symmetric,
                      bool* converged) {
    const Eigen::Index n = A.rows(), m = B.rows();
    const Matrix C = sq_distances(A, B);
    const Matrix CT = C.transpose();
    const double log_a = -std::log(double(n)), log_b = -std::log(double(m));
    Vec f = Vec::Zero(n), g = Vec::Zero(m), f_new;
    constexpr double kPhaseTol = 1e-3;
    constexpr int kPhaseIters = 200;

    auto run_phase = [&](double e, int iters, double phase_tol) {
        for (int it = 0; it < iters; ++it) {
            soft_min_rows(C, symmetric ? f : g, log_b, e, f_new);
            // Row-marginal violation of the plan built from the current potentials.
            const double err = (((f - f_new).array() / e).exp() - 1.0).abs().sum() / double(n);
            if (symmetric) {
                f = 0.5 * (f + f_new);
            } else {
                f = f_new;
                soft_min_rows(CT, f, log_a, e, g);
            }
            if (it > 0 && err < phase_tol) return true;
        }
        return false;
    };

    for (double e = std::max(C.maxCoeff(), eps); e > eps; e *= 0.5) run_phase(e, kPhaseIters, kPhaseTol);
    const bool ok = run_phase(eps, max_iters, tol);
    if (converged) *converged = ok;
    return symmetric ? 2.0 * f.mean() : f.mean() + g.mean();
}

void check_clouds(const PointCloud& A, const PointCloud& B) {
    if (A.rows() < 1 || B.rows() < 1) throw InputError("metric: clouds must be nonempty");
    if (A.cols() != B.cols()) throw DimensionError("metric: clouds have different dimensions");
    if (!A.allFinite() || !B.allFinite()) throw InputError("metric: clouds contain non-finite values");
}

}  // namespace

double entropic_ot(const PointCloud& A, const PointCloud& B, double eps, int max_iters, double tol, bool* converged) {
    check_clouds(A, B);
    if (!(eps > 0.0)) throw InputError("entropic_ot: eps must be positive");
    return sinkhorn_value(A, B, eps, max_iters, tol, false, converged);
}

double median_pairwise_sq_distance(const PointCloud& A, const PointCloud& B) {
    check_clouds(A, B);
    PointCloud pool(A.rows() + B.rows(), A.cols());
    pool << A, B;
    constexpr Eigen::Index cap = 2048;
    if (pool.rows() > cap) {
        PointCloud thin(cap, pool.cols());
        for (Eigen::Index i = 0; i < cap; ++i) thin.row(i) = pool.row(i * pool.rows() / cap);
        pool = std::move(thin);
    }
    const Matrix D = sq_distances(pool, pool);
    std::vector<double> v;
    v.reserve(std::size_t(pool.rows() * (pool.rows() - 1) / 2));
    for (Eigen::Index i = 0; i < pool.rows(); ++i)
        for (Eigen::Index j = i + 1; j < pool.rows(); ++j) v.push_back(D(i, j));
    if (v.empty()) return 0.0;
    return quantile(std::move(v), 0.5);
}

SinkhornResult sinkhorn_divergence(const PointCloud& A, const PointCloud& B, const SinkhornOptions& opt) {
    check_clouds(A, B);
    SinkhornResult r;
    r.eps = opt.eps > 0.0 ? opt.eps : 0.05 * median_pairwise_sq_distance(A, B);
    if (!(r.eps > 0.0)) r.eps = 1e-12;
    bool c1 = true, c2 = true, c3 = true;
    const double ab = sinkhorn_value(A, B, r.eps, opt.max_iters, opt.tol, false, &c1);
    const double aa = sinkhorn_value(A, A, r.eps, opt.max_iters, opt.tol, true, &c2);
    const double bb = sinkhorn_value(B, B, r.eps, opt.max_iters, opt.tol, true, &c3);
    r.divergence = std::max(0.0, ab - 0.5 * aa - 0.5 * bb);
    r.converged = c1 && c2 && c3;
    return r;
}

PointCloud subsample_rows(const PointCloud& cloud, Eigen::Index count, Rng& rng) {
    if (count > cloud.rows() || count < 0) throw InputError("subsample: not enough rows");
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(cloud.rows()));
    std::iota(idx.begin(), idx.end(), Eigen::Index(0));
    // Partial Fisher-Yates.
    for (Eigen::Index i = 0; i < count; ++i) {
        const auto j = Eigen::Index(rng.integer(long(i), long(cloud.rows() - 1)));
        std::swap(idx[std::size_t(i)], idx[std::size_t(j)]);
    }
    PointCloud out(count, cloud.cols());
    for (Eigen::Index i = 0; i < count; ++i) out.row(i) = cloud.row(idx[std::size_t(i)]);
    return out;
}

// ---------------------------------------------------------------- k-NN

std::vector<std::vector<Eigen::Index>> knn_graph(const PointCloud& P, int k) {
    const Eigen::Index n = P.rows();
    if (k < 1 || k >= n) throw InputError("knn: need 1 <= k < number of points");
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index(0));
    std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
        return P(a, 0) < P(b, 0) || (P(a, 0) == P(b, 0) && a < b);
    });

    using Entry = std::pair<double, Eigen::Index>;
    std::vector<std::vector<Eigen::Index>> out(static_cast<std::size_t>(n));
    for (Eigen::Index r = 0; r < n; ++r) {
        const Eigen::Index p = order[std::size_t(r)];
        std::priority_queue<Entry> heap;
        auto offer = [&](Eigen::Index q) {
            const Entry e{(P.row(p) - P.row(q)).squaredNorm(), q};
            if (int(heap.size()) < k) heap.push(e);
            else if (e < heap.top()) {
                heap.pop();
                heap.push(e);
            }
        };
        Eigen::Index lo = r - 1, hi = r + 1;
        while (lo >= 0 || hi < n) {
            const double dl = lo >= 0 ? P(p, 0) - P(order[std::size_t(lo)], 0) : std::numeric_limits<double>::infinity();
            const double dh = hi < n ? P(order[std::size_t(hi)], 0) - P(p, 0) : std::numeric_limits<double>::infinity();
            const bool left = dl <= dh;
            const double gap = left ? dl : dh;
            if (int(heap.size()) == k && gap * gap > heap.top().first) break;
            if (left) offer(order[std::size_t(lo--)]);
            else offer(order[std::size_t(hi++)]);
        }
        auto& nb = out[std::size_t(p)];
        nb.resize(heap.size());
        for (std::size_t i = heap.size(); i-- > 0;) {
            nb[i] = heap.top().second;
            heap.pop();
        }
    }
    return out;
}

double cross_edge_rate(const PointCloud& A, const PointCloud& B, int k) {
    check_clouds(A, B);
    PointCloud pool(A.rows() + B.rows(), A.cols());
    pool << A, B;
    const auto graph = knn_graph(pool, k);
    long cross = 0, total = 0;
    for (Eigen::Index i = 0; i < pool.rows(); ++i) {
        const bool in_a = i < A.rows();
        for (Eigen::Index j : graph[std::size_t(i)]) {
            cross += (in_a != (j < A.rows())) ? 1 : 0;
            ++total;
        }
    }
    return double(cross) / double(total);
}

double knn_cross_edge_rate(const PointCloud& A, const PointCloud& B, int k, int subsample, int repeats, Rng& rng) {
    check_clouds(A, B);
    if (repeats < 1) throw InputError("knn_cross_edge_rate: repeats must be positive");
    if (subsample < k + 1) throw InputError("knn_cross_edge_rate: subsample must exceed k");
    if (A.rows() < subsample || B.rows() < subsample)
        throw InputError("knn_cross_edge_rate: clouds smaller than the subsample size");
    double sum = 0.0;
    for (int r = 0; r < repeats; ++r)
        sum += cross_edge_rate(subsample_rows(A, subsample, rng), subsample_rows(B, subsample, rng), k);
    return sum / repeats;
}

// ---------------------------------------------------------------- violation

double quantile(std::vector<double> v, double q) {
    if (v.empty()) throw InputError("quantile of an empty set");
    if (!(q >= 0.0 && q <= 1.0)) throw InputError("quantile level must lie in [0, 1]");
    std::sort(v.begin(), v.end());
    const double pos = q * double(v.size() - 1);
    const auto lo = std::size_t(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    const double frac = pos - double(lo);
    return v[lo] + frac * (v[hi] - v[lo]);
}

nlohmann::json ViolationStats::to_json() const {
    return {{"median", median}, {"q25", q25}, {"q75", q75}, {"max", max},
            {"mean", mean},     {"hist_edges", edges}, {"hist_counts", counts}};
}

ViolationStats violation_stats(const Vec& values) {
    if (values.size() == 0) throw InputError("violation_stats: empty input");
    std::vector<double> v(values.data(), values.data() + values.size());
    ViolationStats s;
    s.median = quantile(v, 0.5);
    s.q25 = quantile(v, 0.25);
    s.q75 = quantile(v, 0.75);
    s.max = *std::max_element(v.begin(), v.end());
    s.mean = values.mean();
    constexpr double lo = -6.0, hi = 1.0, width = 0.25;
    const int bins = int((hi - lo) / width);
    for (int b = 0; b <= bins; ++b) s.edges.push_back(lo + b * width);
    s.counts.assign(std::size_t(bins), 0);
    for (double c : v) {
        const double l = std::log10(std::max(c, 0.0) + kViolationFloor);
        const int b = std::clamp(int(std::floor((l - lo) / width)), 0, bins - 1);
        ++s.counts[std::size_t(b)];
    }
    return s;
}

ViolationStats violation_stats(const PointCloud& cloud, const Constraint& constraint) {
    return violation_stats(constraint.eval_batch(cloud));
}

// ---------------------------------------------------------------- ensembles

nlohmann::json EnsembleScores::to_json() const {
    return {{"skill", skill}, {"spread", spread}, {"ratio", std::isfinite(ratio) ? nlohmann::json(ratio) : nlohmann::json()},
            {"crps", crps},   {"members", members}, {"cases", cases}, {"field_size", field_size}};
}

EnsembleScores ensemble_scores(const std::vector<Matrix>& ensembles, const Matrix& truths) {
    const Eigen::Index K = Eigen::Index(ensembles.size());
    if (K == 0 || truths.rows() != K) throw DimensionError("ensemble_scores: case count mismatch");
    const Eigen::Index M = ensembles.front().rows(), F = truths.cols();
    if (M < 2) throw MetricUndefinedError("ensemble_scores: spread and CRPS need at least two members");
    double sq_err = 0.0, var = 0.0, crps = 0.0;
    for (Eigen::Index k = 0; k < K; ++k) {
        const Matrix& E = ensembles[std::size_t(k)];
        if (E.rows() != M || E.cols() != F) throw DimensionError("ensemble_scores: member shape mismatch");
        const Eigen::RowVectorXd mean = E.colwise().mean();
        sq_err += (truths.row(k) - mean).squaredNorm();
        var += (E.rowwise() - mean).squaredNorm() / double(M - 1);
        double to_truth = 0.0, pairwise = 0.0;
        for (Eigen::Index m = 0; m < M; ++m) {
            to_truth += (E.row(m) - truths.row(k)).lpNorm<1>();
            for (Eigen::Index q = 0; q < M; ++q) pairwise += (E.row(m) - E.row(q)).lpNorm<1>();
        }
        crps += to_truth / double(M) - pairwise / (2.0 * double(M) * double(M - 1));
    }
    EnsembleScores s;
    s.members = int(M);
    s.cases = int(K);
    s.field_size = int(F);
    s.skill = std::sqrt(sq_err / double(K * F));
    s.spread = std::sqrt(var / double(K * F));
    s.ratio = s.skill > 0.0 ? std::sqrt(double(M + 1) / double(M)) * s.spread / s.skill
                            : std::numeric_limits<double>::quiet_NaN();
    s.crps = crps / double(K);
    return s;
}

ContinuityScore continuity_norms(const Matrix& field) {
    if (field.rows() < 2) throw InputError("continuity_norms: need at least two rows");
    ContinuityScore s;
    for (Eigen::Index i = 1; i < field.rows(); ++i) {
        const double d = (field.row(i) - field.row(i - 1)).norm();
        s.mean_step_norm += d;
        s.max_step_norm = std::max(s.max_step_norm, d);
    }
    s.mean_step_norm /= double(field.rows() - 1);
    return s;
}

}  // namespace ppr
