#include "ppr/optimize.hpp"

#include <cmath>
#include <deque>
#include <limits>

namespace ppr {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double finite_or_inf(double v) { return std::isfinite(v) ? v : kInf; }

// Evaluates the objective on the listed rows of X. Non-finite values are
// mapped to +inf so callers can treat them as rejected trials.
void evaluate(const BatchObjective& f, const Matrix& X, const std::vector<Eigen::Index>& rows, Vec& values,
              Matrix& grads, long& counter) {
    Matrix sub(Eigen::Index(rows.size()), X.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) sub.row(Eigen::Index(i)) = X.row(rows[i]);
    f(sub, rows, values, grads);
    if (values.size() != sub.rows() || grads.rows() != sub.rows() || grads.cols() != sub.cols())
        throw DimensionError("batch objective returned mismatched shapes");
    for (Eigen::Index i = 0; i < values.size(); ++i) {
        values(i) = finite_or_inf(values(i));
        if (!grads.row(i).allFinite()) values(i) = kInf;
    }
    counter += long(rows.size());
}

struct RowState {
    Vec x, g;
    double f = kInf;
    std::deque<Vec> s_hist, y_hist;

    // Line search along d from (x, f, g).
    Vec d;
    double dg0 = 0.0;
    double alpha = 1.0;
    bool zoom = false;
    int ls_iters = 0;
    int evals = 0;
    double prev_alpha = 0.0, prev_f = 0.0, prev_dg = 0.0;
    double lo = 0.0, f_lo = 0.0, dg_lo = 0.0;
    double hi = 0.0, f_hi = 0.0, dg_hi = 0.0;
    Vec g_lo;

    bool done = false;
};

Vec two_loop(const RowState& r) {
    Vec q = r.g;
    const std::size_t m = r.s_hist.size();
    std::vector<double> a(m), rho(m);
    for (std::size_t i = m; i-- > 0;) {
        rho[i] = 1.0 / r.y_hist[i].dot(r.s_hist[i]);
        a[i] = rho[i] * r.s_hist[i].dot(q);
        q -= a[i] * r.y_hist[i];
    }
    if (m > 0) q *= r.s_hist.back().dot(r.y_hist.back()) / r.y_hist.back().squaredNorm();
    for (std::size_t i = 0; i < m; ++i) {
        const double b = rho[i] * r.y_hist[i].dot(q);
        q += (a[i] - b) * r.s_hist[i];
    }
    return -q;
}

// Minimizer of the cubic through (a, fa, da) and (b, fb, db), safeguarded to
// the interior of the bracket.
double interpolate(double a, double fa, double da, double b, double fb, double db) {
    const double lo = std::min(a, b), hi = std::max(a, b), width = hi - lo;
    double t = 0.5 * (a + b);
    if (std::isfinite(fa) && std::isfinite(fb)) {
        const double d1 = da + db - 3.0 * (fa - fb) / (a - b);
        const double disc = d1 * d1 - da * db;
        if (disc >= 0.0) {
            const double d2 = std::copysign(std::sqrt(disc), b - a);
            const double c = b - (b - a) * (db + d2 - d1) / (db - da + 2.0 * d2);
            if (std::isfinite(c)) t = c;
        }
    }
    if (!(t > lo + 0.1 * width && t < hi - 0.1 * width)) t = 0.5 * (a + b);
    return t;
}

}  // namespace

BatchResult lbfgs_batch(const BatchObjective& f, const Matrix& x0, const LbfgsOptions& opt) {
    if (opt.memory < 1 || opt.max_iters < 0 || opt.max_line_search < 1)
        throw ValidationError("lbfgs: invalid options");
    const Eigen::Index n = x0.rows(), dim = x0.cols();
    BatchResult res;
    res.x = x0;
    res.value = Vec::Constant(n, kInf);
    res.initial_value.resize(n);
    res.iters.assign(std::size_t(n), 0);
    res.converged.assign(std::size_t(n), 0);
    res.failed.assign(std::size_t(n), 0);
    if (n == 0) return res;

    std::vector<RowState> st(static_cast<std::size_t>(n));
    std::vector<Eigen::Index> all(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) all[std::size_t(i)] = i;
    Vec values;
    Matrix grads;
    evaluate(f, x0, all, values, grads, res.evaluations);

    auto begin_direction = [&](RowState& r, bool first) {
        r.d = two_loop(r);
        r.dg0 = r.g.dot(r.d);
        if (!(r.dg0 < 0.0)) {
            r.s_hist.clear();
            r.y_hist.clear();
            r.d = -r.g;
            r.dg0 = -r.g.squaredNorm();
            first = true;
        }
        if (!first) r.alpha = 1.0;
        else if (opt.nonnegative && r.f > 0.0) r.alpha = std::min(1.0 / r.g.norm(), r.f / r.g.squaredNorm());
        else r.alpha = std::min(1.0, 1.0 / r.g.norm());
        r.zoom = false;
        r.ls_iters = 0;
        r.prev_alpha = 0.0;
        r.prev_f = r.f;
        r.prev_dg = r.dg0;
    };

    for (Eigen::Index i = 0; i < n; ++i) {
        RowState& r = st[std::size_t(i)];
        r.x = x0.row(i).transpose();
        r.f = values(i);
        r.g = grads.row(i).transpose();
        res.initial_value(i) = r.f;
        res.value(i) = r.f;
        if (!std::isfinite(r.f)) {
            res.failed[std::size_t(i)] = 1;
            r.done = true;
            continue;
        }
        if (r.g.lpNorm<Eigen::Infinity>() < opt.tol) {
            res.converged[std::size_t(i)] = 1;
            r.done = true;
            continue;
        }
        if (opt.max_iters == 0) {
            r.done = true;
            continue;
        }
        begin_direction(r, true);
    }

    Matrix trial(n, dim);
    std::vector<Eigen::Index> active;
    while (true) {
        active.clear();
        for (Eigen::Index i = 0; i < n; ++i) {
            RowState& r = st[std::size_t(i)];
            if (r.done) continue;
            trial.row(i) = (r.x + r.alpha * r.d).transpose();
            active.push_back(i);
        }
        if (active.empty()) break;
        evaluate(f, trial, active, values, grads, res.evaluations);

        for (std::size_t k = 0; k < active.size(); ++k) {
            const Eigen::Index i = active[k];
            RowState& r = st[std::size_t(i)];
            const double ft = values(Eigen::Index(k));
            const Vec gt = grads.row(Eigen::Index(k)).transpose();
            const double dgt = std::isfinite(ft) ? gt.dot(r.d) : kInf;
            const double a = r.alpha;
            const bool armijo_fail = !(ft <= r.f + opt.c1 * a * r.dg0);
            ++r.ls_iters;
            const bool out_of_evals = opt.max_evals > 0 && ++r.evals >= opt.max_evals;

            bool accept = false;
            double acc_alpha = 0.0, acc_f = 0.0;
            Vec acc_g;
            if (!r.zoom) {
                if (armijo_fail || (r.ls_iters > 1 && ft >= r.prev_f)) {
                    r.zoom = true;
                    r.lo = r.prev_alpha, r.f_lo = r.prev_f, r.dg_lo = r.prev_dg;
                    r.hi = a, r.f_hi = ft, r.dg_hi = dgt;
                    if (r.prev_alpha == 0.0) r.g_lo = r.g;
                } else if (std::abs(dgt) <= -opt.c2 * r.dg0) {
                    accept = true, acc_alpha = a, acc_f = ft, acc_g = gt;
                } else if (dgt >= 0.0) {
                    r.zoom = true;
                    r.lo = a, r.f_lo = ft, r.dg_lo = dgt, r.g_lo = gt;
                    r.hi = r.prev_alpha, r.f_hi = r.prev_f, r.dg_hi = r.prev_dg;
                } else {
                    r.prev_alpha = a, r.prev_f = ft, r.prev_dg = dgt;
                    r.g_lo = gt;
                    r.alpha = 2.0 * a;
                }
            } else {
                if (armijo_fail || ft >= r.f_lo) {
                    r.hi = a, r.f_hi = ft, r.dg_hi = dgt;
                } else if (std::abs(dgt) <= -opt.c2 * r.dg0) {
                    accept = true, acc_alpha = a, acc_f = ft, acc_g = gt;
                } else {
                    if (dgt * (r.hi - r.lo) >= 0.0) r.hi = r.lo, r.f_hi = r.f_lo, r.dg_hi = r.dg_lo;
                    r.lo = a, r.f_lo = ft, r.dg_lo = dgt, r.g_lo = gt;
                }
            }

            if (!accept && r.zoom) {
                if (out_of_evals || r.ls_iters >= opt.max_line_search || std::abs(r.hi - r.lo) < 1e-16 * std::max(1.0, r.lo)) {
                    // Budget exhausted: take the best sufficient-decrease point found, if any.
                    if (r.lo > 0.0 && r.f_lo < r.f) {
                        accept = true, acc_alpha = r.lo, acc_f = r.f_lo, acc_g = r.g_lo;
                    } else {
                        r.done = true;
                        if (!out_of_evals) res.converged[std::size_t(i)] = 1;
                        continue;
                    }
                } else {
                    r.alpha = interpolate(r.lo, r.f_lo, r.dg_lo, r.hi, r.f_hi, r.dg_hi);
                }
            } else if (!accept && (out_of_evals || r.ls_iters >= opt.max_line_search)) {
                if (r.prev_alpha > 0.0 && r.prev_f < r.f) {
                    accept = true, acc_alpha = r.prev_alpha, acc_f = r.prev_f, acc_g = r.g_lo;
                } else {
                    r.done = true;
                    continue;
                }
            }
            if (!accept) continue;

            const Vec s = acc_alpha * r.d;
            const Vec y = acc_g - r.g;
            if (s.dot(y) > 1e-12 * s.norm() * y.norm()) {
                r.s_hist.push_back(s);
                r.y_hist.push_back(y);
                if (int(r.s_hist.size()) > opt.memory) {
                    r.s_hist.pop_front();
                    r.y_hist.pop_front();
                }
            }
            const double f_old = r.f;
            r.x += s;
            r.f = acc_f;
            r.g = acc_g;
            int& it = res.iters[std::size_t(i)];
            ++it;
            if (r.f < res.value(i)) {
                res.value(i) = r.f;
                res.x.row(i) = r.x.transpose();
            }
            if (f_old - r.f < opt.tol || r.g.lpNorm<Eigen::Infinity>() < opt.tol) {
                res.converged[std::size_t(i)] = 1;
                r.done = true;
            } else if (it >= opt.max_iters || out_of_evals) {
                r.done = true;
            } else {
                begin_direction(r, false);
            }
        }
    }
    return res;
}

BatchResult adam_batch(const BatchObjective& f, const Matrix& x0, const AdamOptions& opt) {
    if (!(opt.lr > 0.0) || opt.max_iters < 0) throw ValidationError("adam: invalid options");
    const Eigen::Index n = x0.rows();
    BatchResult res;
    res.x = x0;
    res.value = Vec::Constant(n, kInf);
    res.initial_value = Vec::Constant(n, kInf);
    res.iters.assign(std::size_t(n), 0);
    res.converged.assign(std::size_t(n), 0);
    res.failed.assign(std::size_t(n), 0);
    Matrix x = x0, m = Matrix::Zero(n, x0.cols()), v = Matrix::Zero(n, x0.cols());
    std::vector<char> done(std::size_t(n), 0);
    std::vector<Eigen::Index> active;
    Vec values;
    Matrix grads;
    for (int it = 0; it <= opt.max_iters; ++it) {
        active.clear();
        for (Eigen::Index i = 0; i < n; ++i)
            if (!done[std::size_t(i)]) active.push_back(i);
        if (active.empty()) break;
        evaluate(f, x, active, values, grads, res.evaluations);
        for (std::size_t k = 0; k < active.size(); ++k) {
            const Eigen::Index i = active[k];
            const double fv = values(Eigen::Index(k));
            if (it == 0) {
                res.initial_value(i) = fv;
                if (!std::isfinite(fv)) {
                    res.failed[std::size_t(i)] = 1;
                    done[std::size_t(i)] = 1;
                    continue;
                }
            }
            if (fv < res.value(i)) {
                res.value(i) = fv;
                res.x.row(i) = x.row(i);
            }
            if (!std::isfinite(fv)) {
                done[std::size_t(i)] = 1;
                continue;
            }
            auto g = grads.row(Eigen::Index(k));
            if (g.lpNorm<Eigen::Infinity>() < opt.tol) {
                res.converged[std::size_t(i)] = 1;
                done[std::size_t(i)] = 1;
                continue;
            }
            if (it == opt.max_iters) continue;
            const int t = it + 1;
            m.row(i) = opt.beta1 * m.row(i) + (1.0 - opt.beta1) * g;
            v.row(i) = opt.beta2 * v.row(i) + (1.0 - opt.beta2) * g.array().square().matrix();
            const double bc1 = 1.0 - std::pow(opt.beta1, t), bc2 = 1.0 - std::pow(opt.beta2, t);
            x.row(i).array() -= opt.lr * (m.row(i).array() / bc1) / ((v.row(i).array() / bc2).sqrt() + opt.eps);
            res.iters[std::size_t(i)] = t;
        }
    }
    return res;
}

BatchResult gradient_descent_batch(const BatchObjective& f, const Matrix& x0, const GradientDescentOptions& opt) {
    if (!(opt.lr >= 0.0) || opt.max_iters < 0) throw ValidationError("gradient descent: invalid options");
    const Eigen::Index n = x0.rows();
    BatchResult res;
    res.x = x0;
    res.value = Vec::Constant(n, kInf);
    res.initial_value = Vec::Constant(n, kInf);
    res.iters.assign(std::size_t(n), 0);
    res.converged.assign(std::size_t(n), 0);
    res.failed.assign(std::size_t(n), 0);
    Matrix x = x0;
    std::vector<char> done(std::size_t(n), 0);
    std::vector<Eigen::Index> active;
    Vec values;
    Matrix grads;
    for (int it = 0; it <= opt.max_iters; ++it) {
        active.clear();
        for (Eigen::Index i = 0; i < n; ++i)
            if (!done[std::size_t(i)]) active.push_back(i);
        if (active.empty()) break;
        evaluate(f, x, active, values, grads, res.evaluations);
        for (std::size_t k = 0; k < active.size(); ++k) {
            const Eigen::Index i = active[k];
            const double fv = values(Eigen::Index(k));
            if (it == 0) {
                res.initial_value(i) = fv;
                if (!std::isfinite(fv)) res.failed[std::size_t(i)] = 1;
            }
            if (fv < res.value(i)) {
                res.value(i) = fv;
                res.x.row(i) = x.row(i);
            }
            if (!std::isfinite(fv)) {
                done[std::size_t(i)] = 1;
                continue;
            }
            if (grads.row(Eigen::Index(k)).lpNorm<Eigen::Infinity>() < opt.tol) {
                res.converged[std::size_t(i)] = 1;
                done[std::size_t(i)] = 1;
                continue;
            }
            if (it == opt.max_iters) continue;
            x.row(i) -= opt.lr * grads.row(Eigen::Index(k));
            res.iters[std::size_t(i)] = it + 1;
        }
    }
    return res;
}

}  // namespace ppr
