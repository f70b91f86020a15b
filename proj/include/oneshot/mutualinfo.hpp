#pragma once

#include <cmath>
#include <optional>
#include <vector>

#include "entropies.hpp"
#include "random.hpp"
#include "solver.hpp"
#include "state.hpp"

namespace oneshot {

enum class MIFlavor { VonNeumann, UpUp, Up, Down, Hypo };

struct MIRequest {
    DensityMatrix state;
    std::vector<std::size_t> aSystems{0}; // A; everything else is B
    MIFlavor flavor = MIFlavor::VonNeumann;
    std::optional<double> epsilon;
    SearchConfig search{};
};

struct DownResult {
    double valueBits = kInf;
    Mat tauA, sigmaB;
    bool certified = false; // alternating minimization only bounds from above
};

namespace detail {

inline Mat productOfMarginals(const DensityMatrix& ab, std::size_t dA, std::size_t dB) {
    auto split = unchecked(ab.m, {dA, dB});
    return kron(partialTrace(split, {0}).m, partialTrace(split, {1}).m);
}

inline Mat swapFactors(const Mat& m, std::size_t dA, std::size_t dB) {
    return permuteSubsystems(unchecked(m, {dA, dB}), {1, 0}).m;
}

struct UpSolve {
    double trace = kInf; // min Tr Y with τ_A ⊗ Y ⪰ ρ_AB
    Mat y;
};

// min{Tr Y : τ_A ⊗ Y ⪰ ρ_AB}, restricting A to supp(τ_A) and conjugating by τ_A^{-1/2}.
inline UpSolve upSolve(const Mat& rhoAB, const Mat& tauA, std::size_t dA, std::size_t dB, double tol = 1e-9) {
    Eigh e = eigh(tauA);
    double cut = supportCutoff(e.values);
    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < dA; ++i)
        if (e.values[i] > cut) keep.push_back(i);
    Mat v(dA, keep.size()), w(dA, keep.size());
    for (std::size_t k = 0; k < keep.size(); ++k)
        for (std::size_t i = 0; i < dA; ++i) {
            v(i, k) = e.vectors(i, keep[k]);
            w(i, k) = v(i, k) / std::sqrt(e.values[keep[k]]);
        }
    // supp ρ_A must lie in supp τ_A
    Mat rhoA = partialTrace(unchecked(rhoAB, {dA, dB}), {0}).m;
    double trA = rhoA.trace().real();
    if (std::abs(traceProductRe(v * v.adjoint(), rhoA) - trA) > 1e-9 * std::max(1e-300, trA)) return {};
    Mat big = kron(w, Mat::identity(dB));
    Mat x = (big.adjoint() * rhoAB * big).hermitianPart();
    UpSolve r;
    if (dB == 1) {
        r.trace = std::max(0.0, eigvalsh(x).back());
        r.y = Mat::identity(1) * cplx(r.trace);
        return r;
    }
    auto sdp = solveDomination({x, keep.size(), dB}, tol);
    r.trace = sdp.optValue;
    r.y = sdp.Y;
    return r;
}

inline double upCore(const DensityMatrix& ab, std::size_t dA, std::size_t dB) {
    Mat rhoA = partialTrace(unchecked(ab.m, {dA, dB}), {0}).m;
    return upSolve(ab.m, rhoA, dA, dB).trace;
}

// Alternating minimization of D_max(ρ ‖ τ ⊗ σ) starting from τ.
inline void alternate(const Mat& rho, const Mat& swapped, std::size_t dA, std::size_t dB, Mat tau, DownResult& best) {
    double prev = kInf;
    for (int it = 0; it < 30; ++it) {
        auto s = upSolve(rho, tau, dA, dB);
        if (!std::isfinite(s.trace) || s.trace <= 0) break;
        Mat sigma = s.y * cplx(1.0 / s.y.trace().real());
        auto t = upSolve(swapped, sigma, dB, dA);
        if (!std::isfinite(t.trace) || t.trace <= 0) break;
        tau = t.y * cplx(1.0 / t.y.trace().real());
        double val = std::log2(t.trace);
        if (val < best.valueBits) best = {val, tau, sigma, false};
        if (prev - val < 1e-8) break;
        prev = val;
    }
}

// Joint descent on (τ, σ) = (GG†, HH†) normalized, with log λ_max(M) smoothed as
// (1/β) log Tr M^β and β raised in stages; escapes coordinate-wise stalls of alternation.
inline std::pair<Mat, Mat> jointRefine(const Mat& rho, std::size_t dA, std::size_t dB, const Mat& tau0, const Mat& sigma0) {
    const std::size_t na = 2 * dA * dA, nb = 2 * dB * dB;
    auto unpack = [&](const std::vector<double>& v, std::size_t off, std::size_t d) {
        Mat g(d);
        for (std::size_t i = 0; i < d * d; ++i) g.data()[i] = cplx(v[off + 2 * i], v[off + 2 * i + 1]);
        Mat m = g * g.adjoint();
        return Mat(m * cplx(1.0 / m.trace().real()));
    };
    auto pack = [&](std::vector<double>& v, std::size_t off, const Mat& m) {
        Mat g = psdPower(m.hermitianPart(), 0.5);
        for (std::size_t i = 0; i < g.data().size(); ++i) {
            v[off + 2 * i] = g.data()[i].real();
            v[off + 2 * i + 1] = g.data()[i].imag();
        }
    };
    std::vector<double> x(na + nb);
    pack(x, 0, tau0);
    pack(x, na, sigma0);
    double beta = 8;
    auto f = [&](const std::vector<double>& v) {
        Mat t = unpack(v, 0, dA), s = unpack(v, na, dB);
        if (!isPositiveDefinite(t) || !isPositiveDefinite(s)) return kInf;
        Mat r = kron(psdPower(t, -0.5), psdPower(s, -0.5));
        auto mu = eigvalsh((r * rho * r).hermitianPart());
        double top = mu.back(), acc = 0;
        for (double m : mu)
            if (m > 0) acc += std::pow(m / top, beta);
        return std::log2(top) + std::log2(acc) / beta;
    };
    SearchConfig cfg;
    cfg.restarts = 1;
    cfg.maxIters = 150;
    cfg.tolerance = 1e-12;
    for (; beta <= 4096; beta *= 4) {
        auto r = localSearch(f, [](std::vector<double>&) {}, [&](Rng&, int) { return x; }, cfg);
        x = r.params;
    }
    return {unpack(x, 0, dA), unpack(x, na, dB)};
}

inline DownResult downCore(const DensityMatrix& ab, std::size_t dA, std::size_t dB, const SearchConfig& cfg) {
    Mat swapped = swapFactors(ab.m, dA, dB);
    DownResult best;
    const int restarts = std::max(1, cfg.restarts);
    for (int k = 0; k < restarts; ++k) {
        Rng rng(cfg.seed + std::uint64_t(k));
        Mat tau = k == 0 ? partialTrace(unchecked(ab.m, {dA, dB}), {0}).m : randomDensity({dA}, rng).m;
        alternate(ab.m, swapped, dA, dB, tau, best);
    }
    if (!std::isfinite(best.valueBits)) return best;
    auto [t2, s2] = jointRefine(ab.m, dA, dB, best.tauA, best.sigmaB);
    alternate(ab.m, swapped, dA, dB, t2, best);
    return best;
}

// Classical I↑_max(A:B) from a joint table q[a][b]; invariant under rescaling q.
inline double classicalUpFromTable(const std::vector<std::vector<double>>& q) {
    std::vector<double> qa(q.size(), 0.0);
    for (std::size_t a = 0; a < q.size(); ++a)
        for (double v : q[a]) qa[a] += v;
    double s = 0;
    for (std::size_t b = 0; b < q.front().size(); ++b) {
        double mx = 0;
        for (std::size_t a = 0; a < q.size(); ++a)
            if (qa[a] > 0) mx = std::max(mx, q[a][b] / qa[a]);
        s += mx;
    }
    return std::log2(s);
}

inline std::vector<std::vector<double>> classicalTable(const DensityMatrix& ab, std::size_t dA, std::size_t dB) {
    std::vector<std::vector<double>> t(dA, std::vector<double>(dB));
    for (std::size_t a = 0; a < dA; ++a)
        for (std::size_t b = 0; b < dB; ++b) t[a][b] = ab.m(a * dB + b, a * dB + b).real();
    return t;
}

} // namespace detail

inline DownResult miDown(const DensityMatrix& rho, const std::vector<std::size_t>& aSystems, const SearchConfig& cfg = {}) {
    auto [ab, dA, dB] = detail::splitAB(rho, aSystems);
    return detail::downCore(ab, dA, dB, cfg);
}

namespace detail {

struct SmoothedUp {
    double value = 0;
    std::vector<double> u; // sqrt of the smoothed table, row-major
};

// Smoothed classical I↑_max of a joint table; warm, if given, seeds restart 0.
inline SmoothedUp smoothedUpTable(const std::vector<std::vector<double>>& table, double eps, const SearchConfig& cfg,
                                  const std::vector<double>* warm = nullptr) {
    const std::size_t dA = table.size(), dB = table.front().size(), n = dA * dB;
    double tr = 0;
    for (auto& row : table)
        for (double v : row) tr += v;
    // u = sqrt(q) on the unit sphere; the ball is the cap <u, w> >= c with w = sqrt(p / Tr p)
    std::vector<double> w(n);
    for (std::size_t i = 0; i < n; ++i) w[i] = std::sqrt(table[i / dB][i % dB] / tr);
    SmoothedUp out{classicalUpFromTable(table), w};
    if (eps == 0) return out;
    // the objective is scale invariant and shrinking q only lowers fidelity, so q stays normalized
    const double c = std::min(1.0, std::sqrt(1 - eps * eps) / std::sqrt(tr));
    auto project = [&](std::vector<double>& u) {
        double nn = 0;
        for (auto& x : u) {
            x = std::max(0.0, x);
            nn += x * x;
        }
        if (nn <= 0) {
            u = w;
            return;
        }
        for (auto& x : u) x /= std::sqrt(nn);
        double t = 0;
        for (std::size_t i = 0; i < n; ++i) t += u[i] * w[i];
        if (t >= c) return;
        std::vector<double> v(n);
        double vn = 0;
        for (std::size_t i = 0; i < n; ++i) {
            v[i] = u[i] - t * w[i];
            vn += v[i] * v[i];
        }
        vn = std::sqrt(vn);
        if (vn <= 1e-300) {
            u = w;
            return;
        }
        const double s = std::sqrt(1 - c * c);
        for (std::size_t i = 0; i < n; ++i) u[i] = std::max(0.0, c * w[i] + s * v[i] / vn);
    };
    auto objective = [&](const std::vector<double>& u) {
        std::vector<std::vector<double>> q(dA, std::vector<double>(dB));
        for (std::size_t i = 0; i < n; ++i) q[i / dB][i % dB] = u[i] * u[i];
        return classicalUpFromTable(q);
    };
    auto init = [&](Rng& rng, int k) {
        if (k == 0) return warm ? *warm : w;
        std::vector<double> u(n);
        for (auto& x : u) x = rng.uniform();
        return u;
    };
    auto res = localSearch(objective, project, init, cfg);
    if (warm) {
        std::vector<double> start = *warm;
        project(start);
        double v = objective(start);
        if (v < res.value) res = {v, start};
    }
    if (res.value < out.value) out = {res.value, res.params};
    return out;
}

} // namespace detail

// Smoothed I↑_max over the purified-distance ball, fully classical inputs only. Upper bound.
inline double miClassicalSmoothedUp(const DensityMatrix& rho, const std::vector<std::size_t>& aSystems, double eps,
                                    const SearchConfig& cfg = {}) {
    if (!rho.isClassical(1e-12)) fail(ErrorCode::ClassicalOnly, "smoothing is implemented for classical states only");
    if (!(eps >= 0 && eps < 1)) fail(ErrorCode::EpsilonOutOfRange, "epsilon outside [0,1)", {{"epsilon", eps}});
    auto [ab, dA, dB] = detail::splitAB(rho, aSystems);
    return detail::smoothedUpTable(detail::classicalTable(ab, dA, dB), eps, cfg).value;
}

inline double mi(const MIRequest& req) {
    auto [ab, dA, dB] = detail::splitAB(req.state, req.aSystems);
    if (req.flavor != MIFlavor::Hypo && req.epsilon && *req.epsilon > 0) {
        if (req.flavor != MIFlavor::Up) fail(ErrorCode::EpsilonOutOfRange, "flavor does not take epsilon");
        return miClassicalSmoothedUp(req.state, req.aSystems, *req.epsilon, req.search);
    }
    auto product = [&] { return unchecked(detail::productOfMarginals(ab, dA, dB), ab.dims); };
    switch (req.flavor) {
    case MIFlavor::VonNeumann: return relEntropy(ab, product());
    case MIFlavor::UpUp: return dMax(ab, product()).valueBits;
    case MIFlavor::Up: return std::log2(detail::upCore(ab, dA, dB));
    case MIFlavor::Down: return detail::downCore(ab, dA, dB, req.search).valueBits;
    case MIFlavor::Hypo:
        if (!req.epsilon) fail(ErrorCode::EpsilonRequired, "hypothesis-testing flavor needs epsilon");
        return dHypo(ab, product(), *req.epsilon).valueBits;
    }
    return kInf;
}

inline double mi(const DensityMatrix& rho, MIFlavor flavor, const std::vector<std::size_t>& aSystems = {0},
                 std::optional<double> eps = std::nullopt) {
    MIRequest r{rho, aSystems, flavor, eps, {}};
    return mi(r);
}

// ------------------------------------------------------------------ CQ forms

namespace detail {

// Assembled ρ_{X ⊗ inner} regrouped as (A, B ⊗ X) with A drawn from the inner subsystems.
inline std::tuple<DensityMatrix, std::size_t, std::size_t> cqAsAB(const CQState& cq, const std::vector<std::size_t>& aInner) {
    std::vector<std::size_t> a;
    for (auto k : aInner) a.push_back(k + 1);
    return splitAB(cq.assemble(), a);
}

inline std::tuple<std::vector<std::size_t>, std::size_t, std::size_t> innerSplit(const CQState& cq,
                                                                              const std::vector<std::size_t>& aInner) {
    const auto& d = cq.innerDims();
    auto a = normalizeIndexSet(aInner, d.size());
    auto b = complementOf(a, d.size());
    std::size_t dA = 1, dB = 1;
    for (auto k : a) dA *= d[k];
    for (auto k : b) dB *= d[k];
    std::vector<std::size_t> perm = a;
    perm.insert(perm.end(), b.begin(), b.end());
    return {perm, dA, dB};
}

} // namespace detail

// I↑_max(A:BX) = log Σ_x p_x 2^{I↑_max(ρ^x_AB ‖ ρ_A)}.
inline double miUpCQClosedForm(const CQState& cq, const std::vector<std::size_t>& aInner = {0}) {
    auto [perm, dA, dB] = detail::innerSplit(cq, aInner);
    Mat rhoA = partialTrace(unchecked(permuteSubsystems(cq.average(), perm).m, {dA, dB}), {0}).m;
    double s = 0;
    for (std::size_t x = 0; x < cq.probs.size(); ++x) {
        if (cq.probs[x] <= 0) continue;
        auto cx = permuteSubsystems(cq.conditionals[x], perm);
        s += cq.probs[x] * detail::upSolve(cx.m, rhoA, dA, dB).trace;
    }
    return std::log2(s);
}

struct DecompositionPair {
    double lhs = 0, rhs = 0;
};

// I↑↑_α(A:BX): direct D_α(ρ_ABX ‖ ρ_A ⊗ ρ_BX) and the per-symbol expectation form.
inline DecompositionPair renyiCQDecomposition(const CQState& cq, double alpha, RenyiFlavor flavor,
                                              const std::vector<std::size_t>& aInner = {0}) {
    if (!(alpha > 1) || !std::isfinite(alpha)) fail(ErrorCode::AlphaOutOfRange, "alpha must exceed 1", {{"alpha", alpha}});
    auto [ab, dA, dB] = detail::cqAsAB(cq, aInner);
    DecompositionPair out;
    out.lhs = renyi(ab, unchecked(detail::productOfMarginals(ab, dA, dB), ab.dims), alpha, flavor);
    auto [perm, dAi, dBi] = detail::innerSplit(cq, aInner);
    Mat rhoA = partialTrace(unchecked(permuteSubsystems(cq.average(), perm).m, {dAi, dBi}), {0}).m;
    std::vector<double> terms;
    const double ap = alpha - 1;
    for (std::size_t x = 0; x < cq.probs.size(); ++x) {
        if (cq.probs[x] <= 0) continue;
        auto cx = permuteSubsystems(cq.conditionals[x], perm);
        auto split = unchecked(cx.m, {dAi, dBi});
        auto ref = unchecked(kron(rhoA, partialTrace(split, {1}).m), cx.dims);
        double d = renyi(cx, ref, alpha, flavor);
        terms.push_back(std::log(cq.probs[x]) + ap * d * std::log(2.0));
    }
    out.rhs = detail::logSumExp(terms) / ap / std::log(2.0);
    return out;
}

struct SymmetryReport {
    double hypoAB = 0, hypoBA = 0, hypoGap = 0;
    double specAB = 0, specBA = 0, specGap = 0;
};

inline SymmetryReport checkMISymmetries(const DensityMatrix& rho, double eps, const std::vector<std::size_t>& aSystems = {0}) {
    auto [ab, dA, dB] = detail::splitAB(rho, aSystems);
    auto ba = unchecked(detail::swapFactors(ab.m, dA, dB), {dB, dA});
    auto abS = unchecked(ab.m, {dA, dB});
    auto pAB = unchecked(detail::productOfMarginals(abS, dA, dB), {dA, dB});
    auto pBA = unchecked(detail::productOfMarginals(ba, dB, dA), {dB, dA});
    SymmetryReport r;
    r.hypoAB = dHypo(abS, pAB, eps).valueBits;
    r.hypoBA = dHypo(ba, pBA, eps).valueBits;
    r.hypoGap = std::abs(r.hypoAB - r.hypoBA);
    r.specAB = dInfoSpectrum(abS, pAB, eps);
    r.specBA = dInfoSpectrum(ba, pBA, eps);
    r.specGap = std::abs(r.specAB - r.specBA);
    return r;
}

struct HypoExpectationReport {
    double directBeta = 0;    // 2^{-I_h(A:BX)}
    double perSymbolBeta = 0; // Σ_x p_x 2^{-D_h(ρ^x_AB ‖ ρ_A ⊗ ρ^x_B)}
    double directBits = 0, perSymbolBits = 0;
    double displayedBits = 0; // -log Σ_x p_x D_h(...), read literally
    double gap = 0;           // perSymbolBeta - directBeta, nonnegative
};

inline HypoExpectationReport checkHypoExpectationClaim(const CQState& cq, double eps, const std::vector<std::size_t>& aInner = {0}) {
    auto [ab, dA, dB] = detail::cqAsAB(cq, aInner);
    HypoExpectationReport r;
    r.directBits = dHypo(ab, unchecked(detail::productOfMarginals(ab, dA, dB), ab.dims), eps).valueBits;
    r.directBeta = std::exp2(-r.directBits);
    auto [perm, dAi, dBi] = detail::innerSplit(cq, aInner);
    Mat rhoA = partialTrace(unchecked(permuteSubsystems(cq.average(), perm).m, {dAi, dBi}), {0}).m;
    double lit = 0;
    for (std::size_t x = 0; x < cq.probs.size(); ++x) {
        if (cq.probs[x] <= 0) continue;
        auto cx = permuteSubsystems(cq.conditionals[x], perm);
        auto ref = unchecked(kron(rhoA, partialTrace(unchecked(cx.m, {dAi, dBi}), {1}).m), cx.dims);
        double d = dHypo(cx, ref, eps).valueBits;
        r.perSymbolBeta += cq.probs[x] * std::exp2(-d);
        lit += cq.probs[x] * d;
    }
    r.perSymbolBits = -std::log2(r.perSymbolBeta);
    r.displayedBits = lit > 0 ? -std::log2(lit) : kInf;
    r.gap = r.perSymbolBeta - r.directBeta;
    return r;
}

} // namespace oneshot
