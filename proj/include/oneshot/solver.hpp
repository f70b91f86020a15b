#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <future>
#include <limits>
#include <numeric>
#include <vector>

#include "error.hpp"
#include "linalg.hpp"
#include "random.hpp"
#include "state.hpp"

namespace oneshot {

// ---------------------------------------------------------------- 1-D search

struct Max1D {
    double tStar;
    double fStar;
};

// Golden-section maximization of a concave function on [lo, hi].
inline Max1D maximizeConcave1D(const std::function<double(double)>& f, double lo, double hi, double tol = 1e-12) {
    if (!(lo <= hi) || !std::isfinite(lo) || !std::isfinite(hi))
        fail(ErrorCode::BadInterval, "interval must satisfy lo <= hi", {{"lo", lo}, {"hi", hi}});
    const double r = (std::sqrt(5.0) - 1) / 2;
    double a = lo, b = hi;
    double c = b - r * (b - a), d = a + r * (b - a);
    double fc = f(c), fd = f(d);
    int guard = 0;
    while (b - a > tol && guard++ < 400) {
        if (fc >= fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    Max1D best{0.5 * (a + b), f(0.5 * (a + b))};
    for (double t : {lo, hi, c, d}) {
        double v = f(t);
        if (v > best.fStar) best = {t, v};
    }
    return best;
}

// ---------------------------------------------------------------- domination SDP

// min Tr Y  s.t.  1_A ⊗ Y ⪰ X,  Y ⪰ 0, with Y on the trailing factor of dimension dB.
struct DominationSDP {
    Mat target;
    std::size_t dA = 1;
    std::size_t dB = 1;
};

struct DominationResult {
    double optValue = 0;  // primal objective Tr Y
    double dualValue = 0; // Tr[Z X] for the dual certificate
    Mat Y;
    Mat dualCertificate; // Z with Z ⪰ 0, Tr_A Z ⪯ 1
    int iterations = 0;
    double gap() const { return optValue - dualValue; }
};

namespace detail {

// Orthonormal real basis of d×d Hermitian matrices under Tr[AB].
inline std::vector<Mat> hermitianBasis(std::size_t d) {
    std::vector<Mat> b;
    const double s = 1.0 / std::sqrt(2.0);
    for (std::size_t i = 0; i < d; ++i) {
        Mat e(d);
        e(i, i) = 1;
        b.push_back(e);
    }
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = i + 1; j < d; ++j) {
            Mat e(d), f(d);
            e(i, j) = s;
            e(j, i) = s;
            f(i, j) = cplx(0, -s);
            f(j, i) = cplx(0, s);
            b.push_back(e);
            b.push_back(f);
        }
    return b;
}

inline Mat liftB(const Mat& y, std::size_t dA) { return kron(Mat::identity(dA), y); }

inline Mat partialTraceA(const Mat& z, std::size_t dA, std::size_t dB) {
    Mat out(dB);
    for (std::size_t a = 0; a < dA; ++a)
        for (std::size_t i = 0; i < dB; ++i)
            for (std::size_t j = 0; j < dB; ++j) out(i, j) += z(a * dB + i, a * dB + j);
    return out;
}

inline double logDetPD(const Mat& h, bool& ok) {
    // log det via eigenvalues; ok=false if not positive definite
    auto w = eigvalsh(h);
    double s = 0;
    ok = true;
    for (double x : w) {
        if (!(x > 0)) {
            ok = false;
            return 0;
        }
        s += std::log(x);
    }
    return s;
}

} // namespace detail

namespace detail {

// Dual candidate from complementary slackness: Z = K M K† on ker(1⊗Y − X), with M the
// least-change correction of K†·hint·K that makes Tr_A Z the identity on the range of Y.
inline Mat slackDual(const Mat& X, const Mat& Y, const Mat& hint, std::size_t dA, std::size_t dB, double thr) {
    Eigh es = eigh(liftB(Y, dA) - X);
    const double top = std::max(1.0, std::abs(es.values.back()));
    std::vector<std::size_t> ker;
    for (std::size_t i = 0; i < es.values.size(); ++i)
        if (es.values[i] <= thr * top) ker.push_back(i);
    if (ker.empty()) return Mat();
    const std::size_t n = dA * dB, k = ker.size();
    Mat K(n, k);
    for (std::size_t j = 0; j < k; ++j)
        for (std::size_t i = 0; i < n; ++i) K(i, j) = es.vectors(i, ker[j]);
    Eigh ey = eigh(Y);
    double cut = supportCutoff(ey.values);
    std::vector<std::size_t> rng;
    for (std::size_t i = 0; i < dB; ++i)
        if (ey.values[i] > cut) rng.push_back(i);
    Mat V(dB, rng.size());
    for (std::size_t j = 0; j < rng.size(); ++j)
        for (std::size_t i = 0; i < dB; ++i) V(i, j) = ey.vectors(i, rng[j]);
    auto bk = hermitianBasis(k), br = hermitianBasis(rng.size());
    auto image = [&](const Mat& m) { return V.adjoint() * partialTraceA(K * m * K.adjoint(), dA, dB) * V; };
    Mat m0 = (K.adjoint() * hint * K).hermitianPart();
    Mat resid = Mat::identity(rng.size()) - image(m0);
    const std::size_t rows = br.size(), cols = bk.size();
    std::vector<std::vector<double>> A(rows, std::vector<double>(cols));
    for (std::size_t c = 0; c < cols; ++c) {
        Mat im = image(bk[c]);
        for (std::size_t r = 0; r < rows; ++r) A[r][c] = traceProductRe(br[r], im);
    }
    std::vector<double> b(rows), aat(rows * rows);
    for (std::size_t r = 0; r < rows; ++r) b[r] = traceProductRe(br[r], resid);
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < rows; ++j) {
            double v = 0;
            for (std::size_t c = 0; c < cols; ++c) v += A[i][c] * A[j][c];
            aat[i * rows + j] = v + (i == j ? 1e-14 : 0.0);
        }
    auto y = luSolve(aat, b);
    Mat m = m0;
    for (std::size_t c = 0; c < cols; ++c) {
        double coef = 0;
        for (std::size_t r = 0; r < rows; ++r) coef += A[r][c] * y[r];
        m += bk[c] * cplx(coef);
    }
    return K * m * K.adjoint();
}

} // namespace detail

inline DominationResult solveDomination(const DominationSDP& p, double tol = 1e-8) {
    const std::size_t dA = p.dA, dB = p.dB, n = dA * dB;
    if (p.target.rows() != n || !p.target.square()) fail(ErrorCode::DimMismatch, "domination target shape");
    if (p.target.hermitianDefect() > 1e-9 * std::max(1.0, p.target.maxAbs()))
        fail(ErrorCode::NotHermitian, "domination target not Hermitian");
    Mat X = p.target.hermitianPart();
    DominationResult res;
    double scale = eigvalsh(X).back();
    if (scale <= 0) {
        res.Y = Mat(dB);
        res.dualCertificate = Mat(n);
        return res;
    }
    X *= cplx(1.0 / scale);

    const auto basis = detail::hermitianBasis(dB);
    const std::size_t nb = basis.size();
    const double m = double(n + dB);

    auto barrier = [&](const Mat& y, double t, bool& ok) {
        double l1 = detail::logDetPD(detail::liftB(y, dA) - X, ok);
        if (!ok) return 0.0;
        double l2 = detail::logDetPD(y, ok);
        if (!ok) return 0.0;
        return t * y.trace().real() - l1 - l2;
    };

    Mat Y = Mat::identity(dB) * cplx(2.0);
    double t = 1.0;
    int iters = 0;

    // best certified primal/dual pair seen so far
    double bestPrimal = std::numeric_limits<double>::infinity(), bestDual = -bestPrimal;
    Mat bestY, bestZ;
    auto offerPrimal = [&](Mat y) {
        y = psdPower(y.hermitianPart(), 1.0); // clip negative eigenvalues
        auto consider = [&](const Mat& c) {
            double v = c.trace().real();
            if (v < bestPrimal) {
                bestPrimal = v;
                bestY = c;
            }
        };
        // repair by rescaling: smallest a with 1 ⊗ a·y ⪰ X
        if (isPositiveDefinite(y)) {
            Mat r = detail::liftB(psdPower(y, -0.5), dA);
            double a = eigvalsh((r * X * r).hermitianPart()).back();
            consider(y * cplx(std::max(a, 0.0)));
        }
        // repair by shifting
        double lm = eigvalsh(detail::liftB(y, dA) - X).front();
        if (lm < 0) y += Mat::identity(dB) * cplx(-lm);
        consider(y);
    };
    auto offerDual = [&](Mat z) {
        z = psdPower(z.hermitianPart(), 1.0);
        double lm = eigvalsh(detail::partialTraceA(z, dA, dB)).back();
        if (lm > 1.0) z *= cplx(1.0 / lm);
        double v = traceProductRe(z, X);
        if (v > bestDual) {
            bestDual = v;
            bestZ = z;
        }
    };

    Mat prevY, prevZ;
    for (int outer = 0; outer < 40; ++outer) {
        bool centered = true;
        for (int newton = 0; newton < 100; ++newton) {
            ++iters;
            Mat S = detail::liftB(Y, dA) - X;
            Mat W = inversePD(S);
            Mat Yi = inversePD(Y);
            Mat grad = Mat::identity(dB) * cplx(t) - detail::partialTraceA(W, dA, dB) - Yi;
            std::vector<double> g(nb), H(nb * nb);
            std::vector<Mat> MW(nb), MY(nb);
            for (std::size_t k = 0; k < nb; ++k) {
                g[k] = traceProductRe(grad, basis[k]);
                MW[k] = W * detail::liftB(basis[k], dA);
                MY[k] = Yi * basis[k];
            }
            for (std::size_t k = 0; k < nb; ++k)
                for (std::size_t l = k; l < nb; ++l) {
                    double h = traceProductRe(MW[k], MW[l]) + traceProductRe(MY[k], MY[l]);
                    H[k * nb + l] = h;
                    H[l * nb + k] = h;
                }
            std::vector<double> rhs(nb);
            for (std::size_t k = 0; k < nb; ++k) rhs[k] = -g[k];
            auto dx = luSolve(H, rhs);
            double dec = 0;
            for (std::size_t k = 0; k < nb; ++k) dec -= g[k] * dx[k];
            if (dec / 2 <= 1e-14) break;
            Mat D(dB);
            for (std::size_t k = 0; k < nb; ++k) D += basis[k] * cplx(dx[k]);
            bool ok = false;
            double f0 = barrier(Y, t, ok);
            double step = 1.0;
            Mat Ynew;
            for (int ls = 0; ls < 60; ++ls) {
                Ynew = Y + D * cplx(step);
                double f1 = barrier(Ynew, t, ok);
                if (ok && f1 <= f0 - 0.25 * step * dec + 1e-15 * std::abs(f0)) break;
                ok = false;
                step *= 0.5;
            }
            if (!ok) {
                centered = false;
                break;
            }
            Y = Ynew;
        }
        Mat Z = inversePD(detail::liftB(Y, dA) - X) * cplx(1.0 / t);
        offerPrimal(Y);
        offerDual(Z);
        // Richardson extrapolation along the central path (error O(1/t) -> O(1/t^2))
        if (centered && prevY.rows() == dB) {
            offerPrimal((Y * cplx(10.0) - prevY) * cplx(1.0 / 9));
            offerDual((Z * cplx(10.0) - prevZ) * cplx(1.0 / 9));
        }
        prevY = Y;
        prevZ = Z;
        if (bestPrimal - bestDual <= tol * std::max(1.0, bestPrimal) || m / t < 1e-13) break;
        t *= 10;
    }
    if (!(bestPrimal - bestDual <= tol * std::max(1.0, bestPrimal)) && bestY.rows() == dB) {
        Mat hint = bestZ;
        for (double thr : {1e-9, 1e-7, 1e-5, 1e-3}) {
            Mat z = detail::slackDual(X, bestY, hint, dA, dB, thr);
            if (z.rows() == n) offerDual(z);
        }
    }
    double primal = bestPrimal, dual = bestDual;
    Y = bestY;
    Mat Z = bestZ;
    if (!(primal - dual <= tol * std::max(1.0, primal)))
        fail(ErrorCode::NotConverged, "domination SDP gap not closed", {{"iterations", double(iters)}, {"gap", primal - dual}});
    res.optValue = primal * scale;
    res.dualValue = dual * scale;
    res.Y = Y * cplx(scale);
    res.dualCertificate = Z;
    res.iterations = iters;
    return res;
}

// ---------------------------------------------------------------- local search

struct SearchConfig {
    int restarts = 8;
    int maxIters = 400;
    double initialStep = 0.1;
    double stepShrink = 0.5;
    double tolerance = 1e-10;
    std::uint64_t seed = 0;
    int workers = 1;
};

struct SearchResult {
    double value = std::numeric_limits<double>::infinity();
    std::vector<double> params;
    int restart = -1;
    std::vector<double> trace; // best value after each accepted step (first restart that wins)
};

using Objective = std::function<double(const std::vector<double>&)>;
using Projection = std::function<void(std::vector<double>&)>;
using Initializer = std::function<std::vector<double>(Rng&, int restart)>;

namespace detail {

inline SearchResult descend(const Objective& f, const Projection& proj, std::vector<double> x,
                            const SearchConfig& cfg) {
    const double h = 1e-5;
    proj(x);
    double fx = f(x);
    SearchResult r;
    r.trace.push_back(fx);
    double step = cfg.initialStep;
    std::vector<double> g(x.size()), xt;
    for (int it = 0; it < cfg.maxIters; ++it) {
        for (std::size_t i = 0; i < x.size(); ++i) {
            double keep = x[i];
            x[i] = keep + h;
            double fp = f(x);
            x[i] = keep - h;
            double fm = f(x);
            x[i] = keep;
            g[i] = (fp - fm) / (2 * h);
            if (!std::isfinite(g[i])) g[i] = 0;
        }
        double gn = 0;
        for (double v : g) gn += v * v;
        gn = std::sqrt(gn);
        if (gn < 1e-14) break;
        bool accepted = false;
        while (step > 1e-14) {
            xt = x;
            for (std::size_t i = 0; i < x.size(); ++i) xt[i] -= step * g[i] / gn;
            proj(xt);
            double ft = f(xt);
            if (ft < fx) {
                double gain = fx - ft;
                x = xt;
                fx = ft;
                accepted = true;
                step /= cfg.stepShrink; // grow after success
                step = std::min(step, 1.0);
                r.trace.push_back(fx);
                if (gain < cfg.tolerance) it = cfg.maxIters;
                break;
            }
            step *= cfg.stepShrink;
        }
        if (!accepted) break;
    }
    r.value = fx;
    r.params = x;
    return r;
}

} // namespace detail

// Best-of-restarts projected gradient descent with central-difference gradients.
inline SearchResult localSearch(const Objective& f, const Projection& proj, const Initializer& init,
                                const SearchConfig& cfg) {
    const int n = std::max(1, cfg.restarts);
    std::vector<SearchResult> results(n);
    auto run = [&](int k) {
        Rng rng(cfg.seed + std::uint64_t(k));
        results[k] = detail::descend(f, proj, init(rng, k), cfg);
        results[k].restart = k;
    };
    if (cfg.workers > 1) {
        for (int base = 0; base < n; base += cfg.workers) {
            std::vector<std::future<void>> fs;
            for (int k = base; k < std::min(n, base + cfg.workers); ++k) fs.push_back(std::async(std::launch::async, run, k));
            for (auto& fu : fs) fu.get();
        }
    } else {
        for (int k = 0; k < n; ++k) run(k);
    }
    SearchResult best = results[0];
    for (int k = 1; k < n; ++k)
        if (results[k].value < best.value) best = results[k];
    return best;
}

// Euclidean projection onto the probability simplex.
inline void projectSimplex(double* v, std::size_t n, double total = 1.0) {
    std::vector<double> u(v, v + n);
    std::sort(u.begin(), u.end(), std::greater<>());
    double css = 0, theta = 0;
    for (std::size_t k = 0; k < n; ++k) {
        css += u[k];
        double t = (css - total) / double(k + 1);
        if (u[k] - t > 0) theta = t;
    }
    for (std::size_t k = 0; k < n; ++k) v[k] = std::max(0.0, v[k] - theta);
}

// ---------------------------------------------------------------- Carathéodory

struct WeightedPointSet {
    std::vector<double> weights;
    std::vector<std::vector<double>> points;
};

namespace detail {

// Null vector of a (k+1)×(k+2) matrix via Gaussian elimination with full pivoting.
inline bool nullVector(std::vector<std::vector<double>> a, std::vector<double>& v, std::size_t skipPivot) {
    const std::size_t rows = a.size(), cols = a.front().size();
    std::vector<std::size_t> colOf(rows, cols);
    std::vector<bool> used(cols, false);
    std::size_t r = 0;
    for (std::size_t step = 0; step < rows && r < rows; ++step) {
        double best = 0;
        std::size_t bi = rows, bj = cols;
        for (std::size_t i = r; i < rows; ++i)
            for (std::size_t j = 0; j < cols; ++j) {
                if (used[j]) continue;
                double val = std::abs(a[i][j]);
                // perturbed pivot choice on retries
                if (skipPivot > 0 && j == (skipPivot - 1) % cols) val *= 0.5;
                if (val > best) {
                    best = val;
                    bi = i;
                    bj = j;
                }
            }
        if (best < 1e-13) break;
        std::swap(a[r], a[bi]);
        double piv = a[r][bj];
        for (auto& x : a[r]) x /= piv;
        for (std::size_t i = 0; i < rows; ++i) {
            if (i == r || a[i][bj] == 0) continue;
            double f = a[i][bj];
            for (std::size_t j = 0; j < cols; ++j) a[i][j] -= f * a[r][j];
        }
        used[bj] = true;
        colOf[r] = bj;
        ++r;
    }
    std::size_t freeCol = cols;
    for (std::size_t j = 0; j < cols; ++j)
        if (!used[j]) {
            freeCol = j;
            break;
        }
    if (freeCol == cols) return false;
    v.assign(cols, 0.0);
    v[freeCol] = 1.0;
    for (std::size_t i = 0; i < r; ++i) v[colOf[i]] = -a[i][freeCol];
    double n = 0;
    for (double x : v) n = std::max(n, std::abs(x));
    if (n < 1e-300) return false;
    for (double& x : v) x /= n;
    return true;
}

} // namespace detail

// Reduces support to at most k+1 points while preserving all weighted coordinate sums.
inline WeightedPointSet caratheodoryPrune(const WeightedPointSet& s) {
    WeightedPointSet out;
    // merge duplicates and drop zero weights
    for (std::size_t i = 0; i < s.points.size(); ++i) {
        if (s.weights[i] < 0) fail(ErrorCode::DegenerateNullspace, "negative weight");
        if (s.weights[i] == 0) continue;
        bool merged = false;
        for (std::size_t j = 0; j < out.points.size(); ++j) {
            double d = 0;
            for (std::size_t c = 0; c < s.points[i].size(); ++c) d = std::max(d, std::abs(s.points[i][c] - out.points[j][c]));
            if (d <= 1e-12) {
                out.weights[j] += s.weights[i];
                merged = true;
                break;
            }
        }
        if (!merged) {
            out.points.push_back(s.points[i]);
            out.weights.push_back(s.weights[i]);
        }
    }
    if (out.points.empty()) return out;
    const std::size_t k = out.points.front().size();
    std::vector<double> rowScale(k, 0.0);
    for (auto& p : out.points)
        for (std::size_t c = 0; c < k; ++c) rowScale[c] = std::max(rowScale[c], std::abs(p[c]));

    std::size_t attempt = 0;
    while (out.points.size() > k + 1) {
        const std::size_t sub = k + 2;
        // candidate subset: the sub smallest-weight points
        std::vector<std::size_t> idx(out.points.size());
        std::iota(idx.begin(), idx.end(), 0);
        std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return out.weights[a] < out.weights[b]; });
        idx.resize(sub);
        std::vector<std::vector<double>> a(k + 1, std::vector<double>(sub));
        for (std::size_t j = 0; j < sub; ++j) {
            for (std::size_t c = 0; c < k; ++c) a[c][j] = rowScale[c] > 0 ? out.points[idx[j]][c] / rowScale[c] : 0.0;
            a[k][j] = 1.0;
        }
        std::vector<double> v;
        if (!detail::nullVector(a, v, attempt)) {
            if (++attempt > 2 * sub) fail(ErrorCode::DegenerateNullspace, "no null vector found");
            continue;
        }
        // ensure some positive entry
        double mx = *std::max_element(v.begin(), v.end());
        if (mx <= 1e-14)
            for (double& x : v) x = -x;
        double alpha = std::numeric_limits<double>::infinity();
        std::size_t arg = sub;
        for (std::size_t j = 0; j < sub; ++j)
            if (v[j] > 1e-14) {
                double r = out.weights[idx[j]] / v[j];
                if (r < alpha) {
                    alpha = r;
                    arg = j;
                }
            }
        if (arg == sub) {
            if (++attempt > 2 * sub) fail(ErrorCode::DegenerateNullspace, "null vector has no positive entry");
            continue;
        }
        for (std::size_t j = 0; j < sub; ++j) out.weights[idx[j]] = std::max(0.0, out.weights[idx[j]] - alpha * v[j]);
        out.weights[idx[arg]] = 0.0;
        WeightedPointSet next;
        for (std::size_t i = 0; i < out.points.size(); ++i)
            if (out.weights[i] > 0) {
                next.points.push_back(std::move(out.points[i]));
                next.weights.push_back(out.weights[i]);
            }
        out = std::move(next);
        attempt = 0;
    }
    return out;
}

// ---------------------------------------------------------------- linear programming

struct LPResult {
    bool feasible = false;
    double objective = 0;
    std::vector<double> x;
    std::vector<double> duals; // y with reduced costs c - A^T y >= 0 at optimum
};

// min c·x  s.t.  A x = b, x >= 0. Dense two-phase tableau simplex; A is row-major rows×cols.
inline LPResult solveLP(const std::vector<std::vector<double>>& A, const std::vector<double>& b,
                        const std::vector<double>& c) {
    const std::size_t m = A.size(), n = c.size();
    // tableau columns: n structural, m artificial, rhs
    const std::size_t W = n + m + 1;
    std::vector<double> T(m * W, 0.0);
    std::vector<std::size_t> basis(m);
    // a tiny distinct shift of each right-hand side breaks degenerate ties; x is recomputed from b at the end
    double bmax = 1.0;
    for (double v : b) bmax = std::max(bmax, std::abs(v));
    for (std::size_t i = 0; i < m; ++i) {
        double sgn = b[i] < 0 ? -1.0 : 1.0;
        double shift = 1e-11 * bmax * (0.5 + std::fmod(0.6180339887 * double(i + 1), 1.0));
        for (std::size_t j = 0; j < n; ++j) T[i * W + j] = sgn * A[i][j];
        T[i * W + n + i] = 1.0;
        T[i * W + W - 1] = sgn * b[i] + shift;
        basis[i] = n + i;
    }
    std::vector<bool> rowActive(m, true);

    auto pivot = [&](std::size_t r, std::size_t col) {
        double p = T[r * W + col];
        for (std::size_t j = 0; j < W; ++j) T[r * W + j] /= p;
        for (std::size_t i = 0; i < m; ++i) {
            if (i == r) continue;
            double f = T[i * W + col];
            if (f == 0) continue;
            for (std::size_t j = 0; j < W; ++j) T[i * W + j] -= f * T[r * W + j];
        }
        basis[r] = col;
    };

    auto runPhase = [&](const std::vector<double>& cost, std::size_t colLimit) {
        // reduced costs recomputed each iteration (m small)
        std::vector<double> red(colLimit);
        int stall = 0;
        double lastObj = std::numeric_limits<double>::infinity();
        for (int it = 0; it < 100000; ++it) {
            std::vector<double> cb(m);
            for (std::size_t i = 0; i < m; ++i) cb[i] = rowActive[i] ? cost[basis[i]] : 0.0;
            double obj = 0;
            for (std::size_t i = 0; i < m; ++i) obj += cb[i] * T[i * W + W - 1];
            if (obj < lastObj - 1e-13) stall = 0;
            else ++stall;
            lastObj = obj;
            bool bland = stall > 50;
            std::size_t enter = colLimit;
            double bestRed = -1e-11;
            for (std::size_t j = 0; j < colLimit; ++j) {
                double rj = cost[j];
                for (std::size_t i = 0; i < m; ++i)
                    if (rowActive[i]) rj -= cb[i] * T[i * W + j];
                if (rj < bestRed) {
                    enter = j;
                    bestRed = rj;
                    if (bland) break;
                }
            }
            if (enter == colLimit) return true;
            std::size_t leave = m;
            double bestRatio = std::numeric_limits<double>::infinity();
            for (std::size_t i = 0; i < m; ++i) {
                if (!rowActive[i]) continue;
                double a = T[i * W + enter];
                if (a > 1e-12) {
                    double r = T[i * W + W - 1] / a;
                    if (r < bestRatio - 1e-15 || (r <= bestRatio + 1e-15 && leave < m && basis[i] < basis[leave])) {
                        bestRatio = r;
                        leave = i;
                    }
                }
            }
            if (leave == m) return false; // unbounded
            pivot(leave, enter);
        }
        return true;
    };

    std::vector<double> c1(n + m, 0.0);
    for (std::size_t i = 0; i < m; ++i) c1[n + i] = 1.0;
    runPhase(c1, n + m);
    double infeas = 0;
    for (std::size_t i = 0; i < m; ++i)
        if (basis[i] >= n) infeas += T[i * W + W - 1];
    LPResult res;
    double bscale = 1.0;
    for (double v : b) bscale = std::max(bscale, std::abs(v));
    if (infeas > 1e-9 * bscale) return res;
    // drive artificials out or mark redundant rows
    for (std::size_t i = 0; i < m; ++i) {
        if (basis[i] < n) continue;
        std::size_t col = n;
        for (std::size_t j = 0; j < n; ++j)
            if (std::abs(T[i * W + j]) > 1e-9) {
                col = j;
                break;
            }
        if (col < n) pivot(i, col);
        else rowActive[i] = false;
    }
    std::vector<double> c2(n + m, 0.0);
    for (std::size_t j = 0; j < n; ++j) c2[j] = c[j];
    // artificials may not re-enter
    runPhase(c2, n);
    res.feasible = true;
    res.x.assign(n, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        if (!rowActive[i] || basis[i] >= n) continue;
        double v = 0;
        for (std::size_t k = 0; k < m; ++k) v += T[i * W + n + k] * std::abs(b[k]);
        res.x[basis[i]] = std::max(0.0, v);
    }
    res.objective = 0;
    for (std::size_t j = 0; j < n; ++j) res.objective += c[j] * res.x[j];
    // duals: y^T = c_B^T B^{-1}; B^{-1} sits in the artificial columns (sign-adjusted)
    res.duals.assign(m, 0.0);
    for (std::size_t k = 0; k < m; ++k) {
        double y = 0;
        for (std::size_t i = 0; i < m; ++i)
            if (rowActive[i]) y += c2[basis[i]] * T[i * W + n + k];
        res.duals[k] = (b[k] < 0 ? -1.0 : 1.0) * y;
    }
    return res;
}

} // namespace oneshot
