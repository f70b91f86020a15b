#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "error.hpp"
#include "linalg.hpp"
#include "solver.hpp"
#include "state.hpp"

namespace oneshot {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct DivergenceResult {
    double valueBits = 0;
    std::optional<Mat> witness;
    std::string method = "closedForm"; // closedForm | dual1D | sdp | neymanPearson
};

namespace detail {

// Joint eigenbasis for commuting operators; nullopt when they do not commute.
struct CommonBasis {
    Mat basis; // columns
    std::vector<double> p, q;
};

inline std::optional<CommonBasis> commonBasis(const Mat& a, const Mat& b) {
    const std::size_t n = a.rows();
    if (a.isDiagonal() && b.isDiagonal()) return CommonBasis{Mat::identity(n), a.realDiagonal(), b.realDiagonal()};
    double scale = std::max({1e-300, a.maxAbs(), b.maxAbs()});
    if ((a * b - b * a).maxAbs() > 1e-10 * scale * scale) return std::nullopt;
    Eigh e = eigh(a + b * cplx(0.5772156649));
    Mat ad = e.vectors.adjoint();
    Mat ta = ad * a * e.vectors, tb = ad * b * e.vectors;
    if (!ta.isDiagonal(1e-9 * scale) || !tb.isDiagonal(1e-9 * scale)) return std::nullopt;
    return CommonBasis{e.vectors, ta.realDiagonal(), tb.realDiagonal()};
}

inline Mat fromBasis(const Mat& basis, const std::vector<double>& d) {
    return basis * Mat::diag(d) * basis.adjoint();
}

// True when supp(P) ⊄ supp(Q) beyond the support cutoff.
inline bool supportViolated(const Mat& p, const Mat& q) {
    Eigh e = eigh(q);
    double cut = supportCutoff(e.values);
    Mat kernel = applyFunction(e, [&](double x) { return x > cut ? 0.0 : 1.0; });
    double leak = traceProductRe(kernel, p);
    return leak > 1e-10 * std::max(1e-300, p.trace().real());
}

inline double logSumExp(const std::vector<double>& terms) {
    double mx = -kInf;
    for (double t : terms) mx = std::max(mx, t);
    if (!std::isfinite(mx)) return mx;
    double s = 0;
    for (double t : terms) s += std::exp(t - mx);
    return mx + std::log(s);
}

inline double entropyOfSpectrum(const std::vector<double>& w) {
    double cut = supportCutoff(w), s = 0;
    for (double x : w)
        if (x > cut) s -= x * std::log2(x);
    return s;
}

} // namespace detail

// ------------------------------------------------------------------ entropies

inline double vonNeumann(const DensityMatrix& rho) { return detail::entropyOfSpectrum(eigvalsh(rho.m)); }

inline double shannon(const std::vector<double>& p) {
    double s = 0;
    for (double x : p)
        if (x > 0) s -= x * std::log2(x);
    return s;
}

inline double binaryEntropy(double x) { return shannon({x, 1 - x}); }

// H(A|B) with A the listed subsystems and B the rest.
inline double condVonNeumann(const DensityMatrix& rhoAB, const std::vector<std::size_t>& aSystems) {
    auto a = detail::normalizeIndexSet(aSystems, rhoAB.dims.size());
    auto b = detail::complementOf(a, rhoAB.dims.size());
    return vonNeumann(rhoAB) - vonNeumann(partialTrace(rhoAB, b));
}

inline std::size_t numericalRank(const DensityMatrix& rho) {
    auto w = eigvalsh(rho.m);
    double cut = supportCutoff(w);
    return std::size_t(std::count_if(w.begin(), w.end(), [&](double x) { return x > cut; }));
}

inline double h0(const DensityMatrix& rho) { return std::log2(double(numericalRank(rho))); }

inline double hR(const DensityMatrix& rho) {
    auto w = eigvalsh(rho.m);
    double cut = supportCutoff(w), mn = kInf;
    for (double x : w)
        if (x > cut) mn = std::min(mn, x);
    return -std::log2(mn);
}

// ------------------------------------------------------------------ divergences

inline double relEntropy(const DensityMatrix& P, const DensityMatrix& Q) {
    requireSameShape(P, Q);
    if (P.isClassical(0) && Q.isClassical(0)) {
        auto p = P.diagonal(), q = Q.diagonal();
        double s = 0;
        for (std::size_t i = 0; i < p.size(); ++i) {
            if (p[i] <= 0) continue;
            if (q[i] <= 0) return kInf;
            s += p[i] * (std::log2(p[i]) - std::log2(q[i]));
        }
        return s;
    }
    if (detail::supportViolated(P.m, Q.m)) return kInf;
    Eigh eq = eigh(Q.m);
    double cut = supportCutoff(eq.values);
    Mat logQ = applyFunction(eq, [&](double x) { return x > cut ? std::log2(x) : 0.0; });
    return -vonNeumann(P) - traceProductRe(P.m, logQ);
}

inline DivergenceResult dMax(const DensityMatrix& P, const DensityMatrix& Q) {
    requireSameShape(P, Q);
    DivergenceResult r;
    if (P.isClassical(0) && Q.isClassical(0)) {
        auto p = P.diagonal(), q = Q.diagonal();
        double cut = supportCutoff(q), best = 0;
        bool any = false;
        for (std::size_t i = 0; i < p.size(); ++i) {
            if (p[i] <= 0) continue;
            if (q[i] <= cut) {
                r.valueBits = kInf;
                return r;
            }
            best = std::max(best, p[i] / q[i]);
            any = true;
        }
        r.valueBits = any ? std::log2(best) : -kInf;
        return r;
    }
    if (detail::supportViolated(P.m, Q.m)) {
        r.valueBits = kInf;
        return r;
    }
    Mat qi = psdPower(Q.m, -0.5);
    double lm = eigvalsh((qi * P.m * qi).hermitianPart()).back();
    r.valueBits = lm > 0 ? std::log2(lm) : -kInf;
    return r;
}

inline double dBarZero(const DensityMatrix& rho, const DensityMatrix& sigma) {
    requireSameShape(rho, sigma);
    double tr = traceProductRe(supportProjector(rho.m), sigma.m);
    if (tr <= 1e-15) return kInf;
    return -std::log2(tr);
}

namespace detail {

inline void checkEpsilon(double eps, bool allowZero) {
    if (!(eps < 1.0) || eps < 0.0 || (!allowZero && eps == 0.0) || !std::isfinite(eps))
        fail(ErrorCode::EpsilonOutOfRange, "epsilon outside admissible range", {{"epsilon", eps}});
}

// Neyman-Pearson test on commuting (diagonal) data.
inline std::pair<double, std::vector<double>> neymanPearson(const std::vector<double>& p, const std::vector<double>& q,
                                                            double eps) {
    const std::size_t n = p.size();
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < n; ++i)
        if (p[i] > 0) idx.push_back(i);
    std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return q[a] * p[b] < q[b] * p[a]; });
    std::vector<double> lam(n, 0.0);
    double need = 1 - eps, beta = 0;
    for (auto i : idx) {
        if (need <= 0) break;
        double take = std::min(1.0, need / p[i]);
        lam[i] = take;
        need -= take * p[i];
        beta += take * q[i];
    }
    return {beta, lam};
}

} // namespace detail

inline DivergenceResult dHypoNeymanPearson(const DensityMatrix& rho, const DensityMatrix& sigma, double eps) {
    detail::checkEpsilon(eps, true);
    requireSameShape(rho, sigma);
    auto cb = detail::commonBasis(rho.m, sigma.m);
    if (!cb) fail(ErrorCode::ClassicalOnly, "Neyman-Pearson path needs commuting inputs");
    if (rho.trace() < 1 - eps - 1e-12) fail(ErrorCode::EpsilonOutOfRange, "no test reaches 1-eps on rho", {{"epsilon", eps}});
    auto [beta, lam] = detail::neymanPearson(cb->p, cb->q, eps);
    DivergenceResult r;
    r.method = "neymanPearson";
    r.valueBits = beta > 0 ? -std::log2(beta) : kInf;
    r.witness = detail::fromBasis(cb->basis, lam);
    return r;
}

inline DivergenceResult dHypoDual(const DensityMatrix& rho, const DensityMatrix& sigma, double eps) {
    detail::checkEpsilon(eps, true);
    requireSameShape(rho, sigma);
    if (rho.trace() < 1 - eps - 1e-12) fail(ErrorCode::EpsilonOutOfRange, "no test reaches 1-eps on rho", {{"epsilon", eps}});
    DivergenceResult r;
    r.method = "dual1D";
    auto f = [&](double t) {
        Mat d = rho.m * cplx(t) - sigma.m;
        double pos = 0;
        for (double x : eigvalsh(d))
            if (x > 0) pos += x;
        return t * (1 - eps) - pos;
    };
    double dm = dMax(sigma, rho).valueBits;
    double hi = kInf;
    if (std::isfinite(dm)) hi = std::pow(2.0, dm + 4);
    if (eps > 0) hi = std::min(hi, sigma.trace() / eps);
    double beta;
    if (!std::isfinite(hi)) {
        // eps = 0 with sigma leaving supp(rho): supremum only reached as t -> infinity
        Mat proj = supportProjector(rho.m);
        beta = traceProductRe(proj, sigma.m);
        r.valueBits = beta > 1e-15 ? -std::log2(beta) : kInf;
        r.witness = proj;
        return r;
    }
    auto best = maximizeConcave1D(f, 0.0, hi, 1e-13 * std::max(1.0, hi));

    // Witness: the optimal t is where Tr[ρ P+(t)] crosses 1 - eps; bisect on that
    // monotone map and mix the two bracketing projectors.
    auto positivePart = [&](double t) {
        Eigh e = eigh(rho.m * cplx(t) - sigma.m);
        return applyFunction(e, [](double x) { return x > 0 ? 1.0 : 0.0; });
    };
    double tl = 0, th = hi;
    Mat pl = positivePart(tl), ph = positivePart(th);
    for (int it = 0; it < 200 && th - tl > 1e-15 * std::max(1.0, th); ++it) {
        double mid = 0.5 * (tl + th);
        Mat pm = positivePart(mid);
        if (traceProductRe(pm, rho.m) >= 1 - eps) {
            th = mid;
            ph = std::move(pm);
        } else {
            tl = mid;
            pl = std::move(pm);
        }
    }
    double gl = traceProductRe(pl, rho.m), gh = traceProductRe(ph, rho.m);
    double mu = gh - gl > 1e-15 ? std::clamp((1 - eps - gl) / (gh - gl), 0.0, 1.0) : 1.0;
    r.witness = ph * cplx(mu) + pl * cplx(1 - mu);

    beta = std::max({best.fStar, f(tl), f(th)});
    r.valueBits = beta > 1e-15 ? -std::log2(beta) : kInf;
    return r;
}

inline DivergenceResult dHypo(const DensityMatrix& rho, const DensityMatrix& sigma, double eps) {
    detail::checkEpsilon(eps, true);
    requireSameShape(rho, sigma);
    if (detail::commonBasis(rho.m, sigma.m)) return dHypoNeymanPearson(rho, sigma, eps);
    return dHypoDual(rho, sigma, eps);
}

namespace detail {

// Tr[ρ {ρ ≤ 2^γ Q}] for a general pair.
inline double spectrumMass(const Mat& rho, const Mat& q, double gamma) {
    Mat d = q * cplx(std::exp2(gamma)) - rho;
    Eigh e = eigh(d);
    double tol = 1e-12 * std::max(1.0, std::max(std::abs(e.values.front()), std::abs(e.values.back())));
    Mat proj = applyFunction(e, [&](double x) { return x >= -tol ? 1.0 : 0.0; });
    return traceProductRe(proj, rho);
}

} // namespace detail

inline double dInfoSpectrum(const DensityMatrix& rho, const DensityMatrix& Q, double eps) {
    detail::checkEpsilon(eps, false);
    requireSameShape(rho, Q);
    if (auto cb = detail::commonBasis(rho.m, Q.m)) {
        const auto& p = cb->p;
        const auto& q = cb->q;
        double cutp = supportCutoff(p), cutq = supportCutoff(q);
        std::vector<std::pair<double, double>> bp; // (breakpoint, mass)
        for (std::size_t i = 0; i < p.size(); ++i) {
            if (p[i] <= cutp) continue;
            if (q[i] <= cutq) continue; // never inside {ρ ≤ 2^γ Q}
            bp.push_back({std::log2(p[i] / q[i]), p[i]});
        }
        std::sort(bp.begin(), bp.end());
        double mass = 0;
        for (std::size_t k = 0; k < bp.size();) {
            std::size_t j = k;
            double g = bp[k].first;
            while (j < bp.size() && bp[j].first - g <= 1e-12) mass += bp[j++].second;
            if (mass > eps) return g;
            k = j;
        }
        return kInf;
    }
    double hiEnd = dMax(rho, Q).valueBits, loEnd = dMax(Q, rho).valueBits;
    double lo = std::isfinite(loEnd) ? -loEnd - 1 : -60.0;
    double hi = std::isfinite(hiEnd) ? hiEnd + 1 : 60.0;
    auto g = [&](double gm) { return detail::spectrumMass(rho.m, Q.m, gm); };
    const int n = 1000;
    int lastOk = -1;
    for (int k = 0; k <= n; ++k) {
        double gm = lo + (hi - lo) * k / n;
        if (g(gm) <= eps) lastOk = k;
    }
    if (lastOk < 0) return lo;
    if (lastOk == n) return kInf;
    double a = lo + (hi - lo) * lastOk / n, b = lo + (hi - lo) * (lastOk + 1) / n;
    while (b - a > 1e-8) {
        double mid = 0.5 * (a + b);
        (g(mid) <= eps ? a : b) = mid;
    }
    return a;
}

enum class RenyiFlavor { Petz, Sandwiched };

inline double renyi(const DensityMatrix& P, const DensityMatrix& Q, double alpha, RenyiFlavor flavor) {
    requireSameShape(P, Q);
    if (!(alpha > 0) || alpha == 1.0 || !std::isfinite(alpha))
        fail(ErrorCode::AlphaOutOfRange, "alpha must lie in (0,1) or (1,inf)", {{"alpha", alpha}});
    if (alpha > 1 && detail::supportViolated(P.m, Q.m)) return kInf;
    Eigh ep = eigh(P.m), eq = eigh(Q.m);
    double cp = supportCutoff(ep.values), cq = supportCutoff(eq.values);
    double logTr; // natural log of the trace functional
    if (flavor == RenyiFlavor::Petz) {
        Mat ov = ep.vectors.adjoint() * eq.vectors;
        std::vector<double> terms;
        for (std::size_t i = 0; i < ep.values.size(); ++i) {
            if (ep.values[i] <= cp) continue;
            for (std::size_t j = 0; j < eq.values.size(); ++j) {
                if (eq.values[j] <= cq) continue;
                double w = std::norm(ov(i, j));
                if (w <= 0) continue;
                terms.push_back(std::log(w) + alpha * std::log(ep.values[i]) + (1 - alpha) * std::log(eq.values[j]));
            }
        }
        logTr = detail::logSumExp(terms);
    } else {
        double ex = (1 - alpha) / (2 * alpha);
        Mat qp = applyFunction(eq, [&](double x) { return x > cq ? std::pow(x, ex) : 0.0; });
        auto mu = eigvalsh((qp * P.m * qp).hermitianPart());
        double cm = supportCutoff(mu);
        std::vector<double> terms;
        for (double x : mu)
            if (x > cm) terms.push_back(alpha * std::log(x));
        logTr = detail::logSumExp(terms);
    }
    if (!std::isfinite(logTr)) return kInf; // orthogonal supports for alpha < 1
    return logTr / (alpha - 1) / std::log(2.0);
}

// ------------------------------------------------------------------ conditional min-entropy

namespace detail {

// Moves the listed subsystems to the front; returns (state, dA, dB).
inline std::tuple<DensityMatrix, std::size_t, std::size_t> splitAB(const DensityMatrix& rho,
                                                                   const std::vector<std::size_t>& aSystems) {
    const std::size_t n = rho.dims.size();
    auto a = normalizeIndexSet(aSystems, n);
    if (a.empty() || a.size() == n) fail(ErrorCode::BadCut, "cut must be a proper nonempty subset");
    auto b = complementOf(a, n);
    std::vector<std::size_t> perm = a;
    perm.insert(perm.end(), b.begin(), b.end());
    std::size_t dA = 1, dB = 1;
    for (auto k : a) dA *= rho.dims[k];
    for (auto k : b) dB *= rho.dims[k];
    return {permuteSubsystems(rho, perm), dA, dB};
}

// Blocks ρ^b (unnormalized) when ρ_AB is block diagonal in B's computational basis.
inline std::optional<std::vector<Mat>> classicalBlocks(const Mat& m, std::size_t dA, std::size_t dB) {
    for (std::size_t a = 0; a < dA; ++a)
        for (std::size_t b = 0; b < dB; ++b)
            for (std::size_t a2 = 0; a2 < dA; ++a2)
                for (std::size_t b2 = 0; b2 < dB; ++b2)
                    if (b != b2 && std::abs(m(a * dB + b, a2 * dB + b2)) > 1e-14) return std::nullopt;
    std::vector<Mat> blocks(dB, Mat(dA));
    for (std::size_t b = 0; b < dB; ++b)
        for (std::size_t a = 0; a < dA; ++a)
            for (std::size_t a2 = 0; a2 < dA; ++a2) blocks[b](a, a2) = m(a * dB + b, a2 * dB + b);
    return blocks;
}

} // namespace detail

// H_min(A|B) with A the listed subsystems.
inline double hMinCond(const DensityMatrix& rhoAB, const std::vector<std::size_t>& aSystems, double tol = 1e-8) {
    auto [r, dA, dB] = detail::splitAB(rhoAB, aSystems);
    if (auto blocks = detail::classicalBlocks(r.m, dA, dB)) {
        double s = 0;
        for (auto& blk : *blocks) s += std::max(0.0, eigvalsh(blk).back());
        return -std::log2(s);
    }
    auto res = solveDomination({r.m, dA, dB}, tol);
    return -std::log2(res.optValue);
}

// H_min(A|X) = -log Σ_x p_x ||ρ^x||_∞ for a CQ state with quantum A.
inline double hMinCondCQ(const CQState& cq) {
    double s = 0;
    for (std::size_t x = 0; x < cq.probs.size(); ++x) s += cq.probs[x] * eigvalsh(cq.conditionals[x].m).back();
    return -std::log2(s);
}

} // namespace oneshot
