#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "commoninfo.hpp"
#include "covering.hpp"

namespace oneshot {

// Joint alphabets above this many entries are out of reach for the smoothed searches.
inline constexpr std::size_t kMaxAEPJoint = 16;

struct AEPScan {
    DensityMatrix target; // classical, two parties
    std::size_t nMax = 2;
    std::vector<double> eps{0.05, 0.1};
    CommonInfoConfig cfg;
    int workers = 1;
};

enum class AEPMeasure { CMax, CTildeMax };

inline const char* measureName(AEPMeasure m) { return m == AEPMeasure::CMax ? "cMax" : "cTildeMax"; }

struct AEPRow {
    std::size_t n = 1;
    double eps = 0;
    AEPMeasure measure = AEPMeasure::CTildeMax;
    double valuePerCopy = 0; // upper bound
    double envelope = 0;     // converse lower bound on the per-copy value
    bool aboveEnvelope = true;
};

struct AEPTable {
    double wynerBits = 0;
    std::vector<AEPRow> rows;
};

// Lower envelope for (1/n) C^ε_max: C − (1+1/n) h(ε) − 2ε log|AC|.
inline double cMaxEnvelope(double wyner, double eps, std::size_t n, std::size_t dimAC) {
    return wyner - (1 + 1.0 / double(n)) * binaryEntropy(eps) - 2 * eps * std::log2(double(dimAC));
}

// Lower envelope for (1/n) C̃^ε_max: C − 3ε log|AC| − 2(ε+1) log(ε+1) + ε log ε.
inline double cTildeMaxEnvelope(double wyner, double eps, std::size_t dimAC) {
    double elog = eps > 0 ? eps * std::log2(eps) : 0.0;
    return wyner - 3 * eps * std::log2(double(dimAC)) - 2 * (eps + 1) * std::log2(eps + 1) + elog;
}

// ρ^{⊗n} on (A^n, C^n).
inline DensityMatrix nCopyBipartite(const DensityMatrix& rho, std::size_t n) {
    if (rho.dims.size() != 2) fail(ErrorCode::BadCut, "expected a bipartite state");
    if (n < 1) fail(ErrorCode::BadSubsystemIndex, "copy count must be at least 1");
    const std::size_t D = std::size_t(std::pow(double(rho.dim()), double(n)) + 0.5);
    if (D > kMaxDim) fail(ErrorCode::TooLarge, "n-copy state exceeds 64 dimensions", {{"dim", double(D)}});
    DensityMatrix out = rho;
    for (std::size_t k = 1; k < n; ++k) out = tensor(out, rho);
    std::vector<std::size_t> perm;
    for (std::size_t k = 0; k < n; ++k) perm.push_back(2 * k);
    for (std::size_t k = 0; k < n; ++k) perm.push_back(2 * k + 1);
    out = permuteSubsystems(out, perm);
    std::size_t dA = 1, dC = 1;
    for (std::size_t k = 0; k < n; ++k) {
        dA *= rho.dims[0];
        dC *= rho.dims[1];
    }
    return unchecked(out.m, {dA, dC});
}

inline AEPTable runAEPScan(const AEPScan& scan) {
    if (!scan.target.isClassical(1e-12)) fail(ErrorCode::ClassicalOnly, "AEP scan needs a classical target");
    if (scan.target.dims.size() != 2) fail(ErrorCode::BadCut, "expected a bipartite target");
    const std::size_t dimAC = scan.target.dim();
    if (scan.nMax < 1 || std::pow(double(dimAC), double(scan.nMax)) > double(kMaxAEPJoint))
        fail(ErrorCode::TooLarge, "n-copy joint alphabet above the search cap", {{"cap", double(kMaxAEPJoint)}});
    for (double e : scan.eps)
        if (!(e >= 0 && e < 1)) fail(ErrorCode::EpsilonOutOfRange, "epsilon outside [0,1)", {{"epsilon", e}});
    auto eps = scan.eps;
    std::sort(eps.begin(), eps.end());
    eps.erase(std::unique(eps.begin(), eps.end()), eps.end());

    AEPTable t;
    t.wynerBits = wynerCI(classicalTarget(scan.target), scan.cfg).valueBits;
    for (std::size_t n = 1; n <= scan.nMax; ++n)
        for (AEPMeasure m : {AEPMeasure::CTildeMax, AEPMeasure::CMax})
            for (double e : eps) t.rows.push_back({n, e, m, 0, 0, true});

    std::vector<DensityMatrix> copies;
    for (std::size_t n = 1; n <= scan.nMax; ++n) copies.push_back(nCopyBipartite(scan.target, n));
    detail::parallelFor(t.rows.size(), scan.workers, [&](std::size_t i) {
        auto& r = t.rows[i];
        auto v = r.measure == AEPMeasure::CMax ? SmoothingVariant::BallFirst : SmoothingVariant::ExtensionFirst;
        r.valuePerCopy = cMaxSmoothed(classicalTarget(copies[r.n - 1]), r.eps, v, scan.cfg).valueBits / double(r.n);
    });
    // an upper bound at a smaller ε is an upper bound at every larger ε
    for (std::size_t i = 1; i < t.rows.size(); ++i) {
        auto& r = t.rows[i];
        const auto& prev = t.rows[i - 1];
        if (prev.n == r.n && prev.measure == r.measure) r.valuePerCopy = std::min(r.valuePerCopy, prev.valuePerCopy);
    }
    for (auto& r : t.rows) {
        r.envelope = r.measure == AEPMeasure::CMax ? cMaxEnvelope(t.wynerBits, r.eps, r.n, dimAC)
                                                   : cTildeMaxEnvelope(t.wynerBits, r.eps, dimAC);
        r.aboveEnvelope = r.valuePerCopy >= r.envelope - 5e-2;
    }
    return t;
}

struct ConverseReport {
    double perCopyUpper = 0; // (1/n) C^ε_max upper bound
    double wynerBits = 0;
    double h2 = 0;
    double envelope = 0;
    bool holds = false;
};

inline ConverseReport checkConverseEnvelope(const DensityMatrix& target, std::size_t n, double eps,
                                            const CommonInfoConfig& cfg = {}, double slack = 5e-2) {
    if (!target.isClassical(1e-12)) fail(ErrorCode::ClassicalOnly, "converse check needs a classical target");
    if (n < 1 || n > 2) fail(ErrorCode::TooLarge, "converse check runs for n in {1,2}", {{"n", double(n)}});
    if (!(eps >= 0 && eps < 1)) fail(ErrorCode::EpsilonOutOfRange, "epsilon outside [0,1)", {{"epsilon", eps}});
    ConverseReport r;
    r.wynerBits = wynerCI(classicalTarget(target), cfg).valueBits;
    r.h2 = binaryEntropy(eps);
    r.envelope = cMaxEnvelope(r.wynerBits, eps, n, target.dim());
    auto copies = nCopyBipartite(target, n);
    r.perCopyUpper = cMaxSmoothed(classicalTarget(copies), eps, SmoothingVariant::BallFirst, cfg).valueBits / double(n);
    r.holds = r.perCopyUpper >= r.envelope - slack;
    return r;
}

} // namespace oneshot
