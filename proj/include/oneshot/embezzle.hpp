#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include "state.hpp"

namespace oneshot {

inline constexpr std::size_t kMaxCatalyst = 100000;

struct Catalyst {
    std::size_t n = 1;
    SchmidtSpectrum spectrum;
};

inline Catalyst muState(std::size_t n) {
    if (n < 1) fail(ErrorCode::BadCut, "catalyst size must be at least 1");
    double h = 0;
    for (std::size_t j = 1; j <= n; ++j) h += 1.0 / double(j);
    Catalyst c{n, {std::vector<double>(n)}};
    for (std::size_t j = 1; j <= n; ++j) c.spectrum.amplitudes[j - 1] = 1.0 / std::sqrt(h * double(j));
    return c;
}

// max |⟨φ|(U⊗W)|ψ⟩| over local unitaries: sorted amplitude overlap (von Neumann trace inequality).
inline double maxLocalUnitaryFidelity(const SchmidtSpectrum& p, const SchmidtSpectrum& q) {
    auto a = p.amplitudes, b = q.amplitudes;
    std::sort(a.begin(), a.end(), std::greater<>());
    std::sort(b.begin(), b.end(), std::greater<>());
    const std::size_t n = std::min(a.size(), b.size());
    double s = 0;
    for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
    return std::min(1.0, s);
}

struct EmbezzleReport {
    std::size_t targetSchmidtRank = 1;
    double epsilon = 0;
    std::size_t nUsed = 1;
    double fidelity = 0;
    double sizeThreshold = 1; // m^{1/ε}
    bool satisfied = false;      // fidelity ≥ 1 − ε
};

inline double embezzleFidelityValue(const SchmidtSpectrum& target, std::size_t n) {
    auto mu = muState(n).spectrum.amplitudes;
    std::vector<double> t;
    for (double b : target.amplitudes)
        if (b > 0) t.push_back(b);
    std::vector<double> joint;
    joint.reserve(mu.size() * t.size());
    for (double a : mu)
        for (double b : t) joint.push_back(a * b);
    return maxLocalUnitaryFidelity({mu}, {joint});
}

inline EmbezzleReport embezzleFidelity(const SchmidtSpectrum& target, std::size_t n, double eps = 0) {
    if (n < 1) fail(ErrorCode::BadCut, "catalyst size must be at least 1");
    EmbezzleReport r;
    r.targetSchmidtRank = schmidtRank(target);
    r.epsilon = eps;
    r.nUsed = n;
    r.fidelity = embezzleFidelityValue(target, n);
    r.sizeThreshold = eps > 0 ? std::pow(double(r.targetSchmidtRank), 1 / eps) : std::numeric_limits<double>::infinity();
    r.satisfied = r.fidelity >= 1 - eps;
    return r;
}

inline std::size_t minCatalystSize(const SchmidtSpectrum& target, double eps) {
    if (!(eps > 0 && eps < 1)) fail(ErrorCode::EpsilonOutOfRange, "epsilon outside (0,1)", {{"epsilon", eps}});
    auto f = [&](std::size_t n) { return embezzleFidelityValue(target, n); };
    const double need = 1 - eps;
    std::size_t lo = 0, hi = 1;
    double prev = -1;
    bool monotone = true;
    while (true) {
        double v = f(hi);
        monotone = monotone && v >= prev - 1e-15;
        prev = v;
        if (v >= need) break;
        if (hi >= kMaxCatalyst)
            fail(ErrorCode::NotReachedWithinSchedule, "catalyst size cap reached", {{"cap", double(kMaxCatalyst)}});
        lo = hi;
        hi = std::min(2 * hi, kMaxCatalyst);
    }
    if (!monotone) {
        for (std::size_t n = 1; n <= hi; ++n)
            if (f(n) >= need) return n;
    }
    while (lo + 1 < hi) {
        std::size_t mid = lo + (hi - lo) / 2;
        if (f(mid) >= need) hi = mid;
        else lo = mid;
    }
    return hi;
}

struct CutRanks {
    std::size_t srAR_B = 0; // SR(AR : B)
    std::size_t srA_BR = 0; // SR(A : BR)
};

inline CutRanks purificationSchmidtRanks(const DensityMatrix& rhoAB) {
    if (rhoAB.dims.size() != 2) fail(ErrorCode::BadCut, "expected a bipartite state");
    if (!rhoAB.normalized) fail(ErrorCode::TraceOutOfRange, "state must be normalized", {{"trace", rhoAB.trace()}});
    auto psi = purify(rhoAB); // dims A, B, R
    return {schmidtRank(schmidt(psi, {1})), schmidtRank(schmidt(psi, {0}))};
}

// Smallest r whose top-r Schmidt mass reaches (1−ε)².
inline std::size_t approxEntRankPure(const SchmidtSpectrum& psi, double eps) {
    if (!(eps >= 0 && eps < 1)) fail(ErrorCode::EpsilonOutOfRange, "epsilon outside [0,1)", {{"epsilon", eps}});
    auto a = psi.amplitudes;
    std::sort(a.begin(), a.end(), std::greater<>());
    const std::size_t full = schmidtRank(psi);
    const double need = (1 - eps) * (1 - eps);
    double mass = 0;
    for (std::size_t r = 1; r <= full; ++r) {
        mass += a[r - 1] * a[r - 1];
        if (mass >= need - 1e-12) return r;
    }
    return std::max<std::size_t>(full, 1);
}

// Bipartite pure states with flags x.
struct PureEnsemble {
    std::vector<double> probs;
    std::vector<PureState> states;
};

struct FlaggedBounds {
    double lowerBits = 0;
    double upperBits = 0;           // (1/ε) log m
    std::size_t catalystN = 1;      // ⌈m^{1/ε}⌉ + 1
    double catalystBits = 0;        // log n of that catalyst
    double achievedFidelity = 1;    // Σ_x p_x F_x
    std::vector<double> perFlagFidelity;
    std::size_t lowerRank = 1;
    bool ordered = true;            // lower ≤ upper
};

namespace detail {

// Upper bound on max F(ρ, σ) over Schmidt number ≤ r, from the two-outcome test {ψ_x, 1 − ψ_x}:
// Tr σ ψ_x ≤ top-r mass of ψ_x, and F ≤ √(ab) + √((1−a)(1−b)).
inline double rankFidelityCap(const DensityMatrix& rho, const std::vector<PureState>& states,
                              const std::vector<SchmidtSpectrum>& sp, std::size_t r) {
    double cap = 1;
    for (std::size_t x = 0; x < states.size(); ++x) {
        double a = 0;
        const auto& v = states[x].amplitudes;
        for (std::size_t i = 0; i < v.size(); ++i)
            for (std::size_t j = 0; j < v.size(); ++j) a += (std::conj(v[i]) * rho.m(i, j) * v[j]).real();
        a = std::clamp(a, 0.0, 1.0);
        double top = 0;
        for (std::size_t i = 0; i < std::min(r, sp[x].amplitudes.size()); ++i) top += sp[x].amplitudes[i] * sp[x].amplitudes[i];
        if (top >= a) continue;
        cap = std::min(cap, std::sqrt(a * top) + std::sqrt((1 - a) * (1 - top)));
    }
    return cap;
}

} // namespace detail

inline FlaggedBounds flaggedEmbezzleBounds(const PureEnsemble& ens, double eps) {
    if (!(eps > 0 && eps < 1)) fail(ErrorCode::EpsilonOutOfRange, "epsilon outside (0,1)", {{"epsilon", eps}});
    if (ens.states.empty() || ens.states.size() != ens.probs.size()) fail(ErrorCode::DimMismatch, "one state per flag required");
    for (auto& s : ens.states)
        if (s.dims.size() != 2 || s.dims != ens.states.front().dims) fail(ErrorCode::BadCut, "bipartite states of common dims required");
    std::vector<SchmidtSpectrum> sp;
    std::size_t m = 1;
    for (auto& s : ens.states) {
        sp.push_back(schmidt(s, {0}));
        m = std::max(m, schmidtRank(sp.back()));
    }
    FlaggedBounds out;
    out.upperBits = std::log2(double(m)) / eps;
    out.catalystN = m == 1 ? 1 : std::size_t(std::ceil(std::pow(double(m), 1 / eps))) + 1;
    if (out.catalystN > kMaxCatalyst)
        fail(ErrorCode::TooLarge, "catalyst beyond the size cap", {{"n", double(out.catalystN)}});
    out.catalystBits = std::log2(double(out.catalystN));
    out.achievedFidelity = 0;
    for (std::size_t x = 0; x < sp.size(); ++x) {
        double f = embezzleFidelityValue(sp[x], out.catalystN);
        out.perFlagFidelity.push_back(f);
        out.achievedFidelity += ens.probs[x] * f;
    }
    Mat rm(dimProduct(ens.states.front().dims));
    for (std::size_t x = 0; x < sp.size(); ++x) rm += Mat::outer(ens.states[x].amplitudes) * cplx(ens.probs[x]);
    auto rho = unchecked(rm, ens.states.front().dims);
    std::size_t r = 1;
    while (r < m && detail::rankFidelityCap(rho, ens.states, sp, r) < 1 - eps) ++r;
    out.lowerRank = r;
    out.lowerBits = std::log2(double(r));
    out.ordered = out.lowerBits <= out.upperBits + 1e-12;
    return out;
}

} // namespace oneshot
