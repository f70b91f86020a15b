#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <future>
#include <map>
#include <optional>
#include <vector>

#include "commoninfo.hpp"
#include "mutualinfo.hpp"
#include "random.hpp"

namespace oneshot {

struct Codebook {
    std::vector<std::size_t> symbols; // with repetition
    std::uint64_t sourceSeed = 0;
    std::size_t size() const { return symbols.size(); }
};

struct SizeSchedule {
    std::size_t start = 1;
    std::size_t maxM = 1u << 14;
};

struct CoveringExperiment {
    CQState cq;
    double epsilon = 0.1;
    std::size_t trials = 1000;
    SizeSchedule sizeSchedule;
    std::uint64_t seed = 0;
    int workers = 1;
};

enum class EvalPath { Auto, Exact, MonteCarlo };

struct CoveringEstimate {
    double mean = 0;
    double stdErr = 0;
    bool exact = false;
};

struct MinCodebook {
    std::size_t M = 1;
    CoveringEstimate estimate;
    bool empirical = true;
};

enum class BoundKind { Imax, Ihypo };

struct BoundConstants {
    std::size_t nu = 1;
    std::size_t nuPrime = 1;
    double gValue = 0;
    double kappaValue = 0;
    double etaChoice = 0;
    double epsTilde = 0;
    double epsBar = 0;
    double smoothing = 0; // √(ε−η), the smoothing radius of the I_max term
};

struct SoftCoverBound {
    BoundConstants constants;
    double miBits = 0;   // the mutual-information term alone
    double rhsBits = 0;
    bool outsideProofRange = false; // ε ≥ 1/2
};

inline constexpr double kMaxEnumeration = 1e4;

// g(x) = log((2(1−x)+3) / ((1−x)(1−√(1−x²))))
inline double gBound(double x) {
    if (!(x > 0 && x < 1)) fail(ErrorCode::EpsilonOutOfRange, "g needs x in (0,1)", {{"x", x}});
    return std::log2((2 * (1 - x) + 3) / ((1 - x) * (1 - std::sqrt(1 - x * x))));
}

inline double epsTilde(double eps, double eta) { return std::sqrt(eps / 8) - std::sqrt(eps - eta); }

// inverse of a ↦ x + 2√x
inline double epsBar(double eps, double eta) {
    double t = epsTilde(eps, eta);
    return 2 + t - 2 * std::sqrt(1 + t);
}

inline double defaultEta(double eps) { return 15 * eps / 16; }

inline void requireEta(double eps, double eta) {
    if (!(eta > 7 * eps / 8 && eta < eps))
        fail(ErrorCode::EtaOutOfRange, "eta must lie in (7 eps/8, eps)", {{"eta", eta}, {"epsilon", eps}});
}

inline double kappa(double x, std::size_t nu, std::optional<double> eta = std::nullopt) {
    if (!(x > 0 && x < 1)) fail(ErrorCode::EpsilonOutOfRange, "kappa needs x in (0,1)", {{"x", x}});
    double e = eta.value_or(defaultEta(x));
    requireEta(x, e);
    return std::log2(double(nu)) + gBound(epsBar(x, e)) - std::log2(1 / x - 0.125) + 3 * std::log2(3.0) + 7;
}

namespace detail {

inline std::vector<double> normalizedProbs(const CQState& cq) {
    double s = 0;
    for (double p : cq.probs) s += p;
    std::vector<double> p = cq.probs;
    for (auto& v : p) v /= s;
    return p;
}

inline Mat normalizedAverage(const CQState& cq, const std::vector<double>& p) {
    Mat m(cq.conditionals.front().dim());
    for (std::size_t x = 0; x < p.size(); ++x) m += cq.conditionals[x].m * cplx(p[x]);
    return m;
}

inline double codebookError(const CQState& cq, const Mat& avg, const std::vector<std::size_t>& symbols) {
    Mat mix(avg.rows());
    for (auto s : symbols) mix += cq.conditionals[s].m;
    mix *= cplx(1.0 / double(symbols.size()));
    return traceNormHermitian((mix - avg).hermitianPart());
}

inline std::vector<double> cumulative(const std::vector<double>& p) {
    std::vector<double> c(p.size());
    double s = 0;
    for (std::size_t i = 0; i < p.size(); ++i) c[i] = (s += p[i]);
    return c;
}

inline std::size_t sampleSymbol(const std::vector<double>& cdf, Rng& rng) {
    double u = rng.uniform() * cdf.back();
    auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    std::size_t i = std::size_t(it - cdf.begin());
    return std::min(i, cdf.size() - 1);
}

inline Codebook sampleCodebook(const std::vector<double>& cdf, std::size_t M, std::uint64_t seed) {
    Rng rng(seed);
    Codebook cb{std::vector<std::size_t>(M), seed};
    for (auto& s : cb.symbols) s = sampleSymbol(cdf, rng);
    return cb;
}

template <class F>
inline void parallelFor(std::size_t n, int workers, F f) {
    if (workers <= 1 || n < 2) {
        for (std::size_t i = 0; i < n; ++i) f(i);
        return;
    }
    std::size_t w = std::min<std::size_t>(std::size_t(workers), n);
    std::vector<std::future<void>> fs;
    for (std::size_t k = 0; k < w; ++k)
        fs.push_back(std::async(std::launch::async, [&, k] {
            for (std::size_t i = k; i < n; i += w) f(i);
        }));
    for (auto& x : fs) x.get();
}

inline bool enumerable(std::size_t nx, std::size_t M) {
    return std::pow(double(nx), double(M)) <= kMaxEnumeration;
}

// Visits every sequence in X^M with its probability.
template <class F>
inline void forEachSequence(const std::vector<double>& p, std::size_t M, F f) {
    std::vector<std::size_t> seq(M, 0);
    while (true) {
        double w = 1;
        for (auto s : seq) w *= p[s];
        f(seq, w);
        std::size_t k = 0;
        while (k < M && ++seq[k] == p.size()) seq[k++] = 0;
        if (k == M) break;
    }
}

inline std::uint64_t trialSeed(std::uint64_t seed, std::size_t M, std::size_t t) {
    return streamSeed(seed, (std::uint64_t(M) << 32) ^ std::uint64_t(t));
}

} // namespace detail

inline double coveringError(const CQState& cq, const Codebook& cb) {
    if (cb.symbols.empty()) fail(ErrorCode::BadSymbol, "codebook must be nonempty");
    for (auto s : cb.symbols)
        if (s >= cq.probs.size()) fail(ErrorCode::BadSymbol, "codebook symbol outside the alphabet", {{"symbol", double(s)}});
    auto p = detail::normalizedProbs(cq);
    return detail::codebookError(cq, detail::normalizedAverage(cq, p), cb.symbols);
}

inline CoveringEstimate expectedCoveringError(const CoveringExperiment& exp, std::size_t M, EvalPath path = EvalPath::Auto) {
    if (M < 1) fail(ErrorCode::BadSymbol, "codebook size must be at least 1");
    if (exp.trials < 1) fail(ErrorCode::NotReachedWithinSchedule, "at least one trial required");
    const auto p = detail::normalizedProbs(exp.cq);
    const Mat avg = detail::normalizedAverage(exp.cq, p);
    const bool exact = path == EvalPath::Exact || (path == EvalPath::Auto && detail::enumerable(p.size(), M));
    if (exact) {
        if (!detail::enumerable(p.size(), M)) fail(ErrorCode::TooLarge, "exact enumeration limited to 1e4 codebooks");
        double mean = 0;
        detail::forEachSequence(p, M, [&](const std::vector<std::size_t>& seq, double w) {
            if (w > 0) mean += w * detail::codebookError(exp.cq, avg, seq);
        });
        return {mean, 0.0, true};
    }
    const auto cdf = detail::cumulative(p);
    std::vector<double> err(exp.trials);
    detail::parallelFor(exp.trials, exp.workers, [&](std::size_t t) {
        auto cb = detail::sampleCodebook(cdf, M, detail::trialSeed(exp.seed, M, t));
        err[t] = detail::codebookError(exp.cq, avg, cb.symbols);
    });
    double mean = 0;
    for (double e : err) mean += e;
    mean /= double(err.size());
    double var = 0;
    for (double e : err) var += (e - mean) * (e - mean);
    double se = err.size() > 1 ? std::sqrt(var / double(err.size() - 1) / double(err.size())) : 0.0;
    return {mean, se, false};
}

inline MinCodebook minCodebookSize(const CoveringExperiment& exp, EvalPath path = EvalPath::Auto) {
    if (!(exp.epsilon > 0 && exp.epsilon < 1)) fail(ErrorCode::EpsilonOutOfRange, "epsilon outside (0,1)", {{"epsilon", exp.epsilon}});
    std::map<std::size_t, CoveringEstimate> seen;
    auto est = [&](std::size_t M) {
        auto it = seen.find(M);
        if (it != seen.end()) return it->second;
        auto e = expectedCoveringError(exp, M, path);
        seen[M] = e;
        return e;
    };
    auto ok = [&](std::size_t M) {
        auto e = est(M);
        return e.mean + 2 * e.stdErr <= exp.epsilon;
    };
    std::size_t lo = 0, hi = std::max<std::size_t>(1, exp.sizeSchedule.start);
    while (!ok(hi)) {
        lo = hi;
        if (hi >= exp.sizeSchedule.maxM)
            fail(ErrorCode::NotReachedWithinSchedule, "no codebook size in the schedule reaches epsilon",
                 {{"maxM", double(exp.sizeSchedule.maxM)}, {"epsilon", exp.epsilon}});
        hi = std::min(2 * hi, exp.sizeSchedule.maxM);
    }
    while (lo + 1 < hi) {
        std::size_t mid = lo + (hi - lo) / 2;
        if (ok(mid)) hi = mid;
        else lo = mid;
    }
    return {hi, est(hi), true};
}

inline SoftCoverBound softCoverBounds(const CQState& cq, double eps, double eta, BoundKind kind,
                                      const SearchConfig& cfg = {}) {
    if (!(eps > 0 && eps < 1)) fail(ErrorCode::EpsilonOutOfRange, "epsilon outside (0,1)", {{"epsilon", eps}});
    SoftCoverBound out;
    auto& c = out.constants;
    const auto rhoXB = cq.assemble();
    const std::size_t inner = rhoXB.dims.size() - 1;
    std::vector<std::size_t> bSys;
    for (std::size_t k = 1; k <= inner; ++k) bSys.push_back(k);
    const auto rhoB = partialTrace(rhoXB, bSys);
    const auto rhoX = partialTrace(rhoXB, {0});
    c.nu = distinctEigenvalues(rhoB);
    c.nuPrime = distinctEigenvalues(tensor(rhoX, rhoB));
    c.etaChoice = eta;
    out.outsideProofRange = eps >= 0.5;
    if (kind == BoundKind::Imax) {
        requireEta(eps, eta);
        c.epsTilde = epsTilde(eps, eta);
        c.epsBar = epsBar(eps, eta);
        c.smoothing = std::sqrt(eps - eta);
        c.gValue = gBound(c.epsBar);
        c.kappaValue = std::log2(double(c.nu)) + c.gValue - std::log2(1 / eps - 0.125) + 3 * std::log2(3.0) + 7;
        out.miBits = rhoXB.isClassical(1e-12) ? miClassicalSmoothedUp(rhoXB, bSys, c.smoothing, cfg)
                                              : mi(rhoXB, MIFlavor::Up, bSys);
    } else {
        c.kappaValue = std::log2(double(c.nu) * double(c.nuPrime)) - 2;
        out.miBits = mi(rhoXB, MIFlavor::Hypo, bSys, 1 - eps / 8);
    }
    out.rhsBits = out.miBits + c.kappaValue;
    return out;
}

// ------------------------------------------------------------------ DSS protocol

struct DSSConfig {
    std::size_t trials = 256;   // sampled codebooks per size when enumeration is out of reach
    std::size_t maxM = 1u << 12;
    std::uint64_t seed = 0;
    int workers = 1;
    CommonInfoConfig commonInfo;
};

struct DSSProtocol {
    Codebook codebook;
    std::vector<std::vector<DensityMatrix>> preparations; // [party][seed value]
    double achievedTD = 0; // ‖simulated − target‖₁
    double bits = 0;
    MarkovExtension extension; // uniform seed over the codebook
};

namespace detail {

inline CQState decompositionCQ(const SeparableDecomposition& d) {
    std::vector<DensityMatrix> conds;
    for (std::size_t x = 0; x < d.size(); ++x) conds.push_back(unchecked(d.component(x), d.dims()));
    return CQState{d.probs, std::move(conds)};
}

// Best codebook of size M: exhaustive when |X|^M is small, else best of cfg.trials samples.
inline std::pair<Codebook, double> bestCodebook(const CQState& cq, const Mat& avg, const std::vector<double>& p,
                                                std::size_t M, const DSSConfig& cfg) {
    Codebook best;
    double bestErr = kInf;
    if (enumerable(p.size(), M)) {
        forEachSequence(p, M, [&](const std::vector<std::size_t>& seq, double w) {
            if (w <= 0) return;
            double e = codebookError(cq, avg, seq);
            if (e < bestErr - 1e-15) {
                bestErr = e;
                best = Codebook{seq, 0};
            }
        });
        return {best, bestErr};
    }
    const auto cdf = cumulative(p);
    std::vector<double> err(cfg.trials);
    detail::parallelFor(cfg.trials, cfg.workers, [&](std::size_t t) {
        err[t] = codebookError(cq, avg, sampleCodebook(cdf, M, trialSeed(cfg.seed, M, t)).symbols);
    });
    std::size_t arg = std::size_t(std::min_element(err.begin(), err.end()) - err.begin());
    return {sampleCodebook(cdf, M, trialSeed(cfg.seed, M, arg)), err[arg]};
}

} // namespace detail

inline DSSProtocol buildDSSProtocol(const SeparableDecomposition& target, double eps, double eps1, double eps2,
                                    const DSSConfig& cfg = {}) {
    if (!(eps > 0 && eps < 1)) fail(ErrorCode::EpsilonOutOfRange, "epsilon outside (0,1)", {{"epsilon", eps}});
    if (!(eps1 > 0 && eps2 > 0 && 2 * eps1 + eps2 < eps))
        fail(ErrorCode::BudgetViolated, "need 2 eps1 + eps2 < eps", {{"eps1", eps1}, {"eps2", eps2}, {"epsilon", eps}});
    // The target is separable, so the shared state is the target itself and the ε₁ budget is unused.
    const CQState cq = detail::decompositionCQ(target);
    const auto p = detail::normalizedProbs(cq);
    const Mat avg = detail::normalizedAverage(cq, p);

    std::map<std::size_t, std::pair<Codebook, double>> seen;
    auto eval = [&](std::size_t M) -> const std::pair<Codebook, double>& {
        auto it = seen.find(M);
        if (it == seen.end()) it = seen.emplace(M, detail::bestCodebook(cq, avg, p, M, cfg)).first;
        return it->second;
    };
    auto ok = [&](std::size_t M) { return eval(M).second <= eps2; };
    std::size_t lo = 0, hi = 1;
    while (!ok(hi)) {
        lo = hi;
        if (hi >= cfg.maxM)
            fail(ErrorCode::NotReachedWithinSchedule, "no codebook found within the size schedule", {{"maxM", double(cfg.maxM)}});
        hi = std::min(2 * hi, cfg.maxM);
    }
    while (lo + 1 < hi) {
        std::size_t mid = lo + (hi - lo) / 2;
        if (ok(mid)) hi = mid;
        else lo = mid;
    }
    DSSProtocol out;
    out.codebook = eval(hi).first;
    out.achievedTD = coveringError(cq, out.codebook);
    out.bits = std::log2(double(hi));
    out.preparations.resize(target.partyCount());
    for (std::size_t i = 0; i < target.partyCount(); ++i)
        for (auto s : out.codebook.symbols) out.preparations[i].push_back(target.parties[i][s]);
    out.extension.seed.assign(hi, 1.0 / double(hi));
    out.extension.partyConditionals = out.preparations;
    out.extension.classicalFlag = true;
    for (auto& party : out.preparations)
        for (auto& r : party) out.extension.classicalFlag = out.extension.classicalFlag && r.isClassical(1e-12);
    return out;
}

struct BoundsReport {
    double lowerBits = 0;    // smoothed C_max at √ε
    double achievedBits = 0; // log M of the built protocol
    double upperBits = 0;    // smoothed C_max at ε₁ plus κ(ε₂)
    double kappaValue = 0;
    double achievedTD = 0;
    bool lowerBelowAchieved = false; // within slack
    bool achievedBelowUpper = false;
    DSSProtocol protocol;
};

inline BoundsReport oneShotBoundsReport(const DensityMatrix& target, double eps, double eps1, double eps2,
                                        const DSSConfig& cfg = {}, double slack = 5e-2) {
    if (!target.isClassical(1e-12)) fail(ErrorCode::ClassicalOnly, "bounds report needs a classical target");
    if (!(eps > 0 && eps < 1)) fail(ErrorCode::EpsilonOutOfRange, "epsilon outside (0,1)", {{"epsilon", eps}});
    if (!(eps1 > 0 && eps2 > 0 && 2 * eps1 + eps2 < eps))
        fail(ErrorCode::BudgetViolated, "need 2 eps1 + eps2 < eps", {{"eps1", eps1}, {"eps2", eps2}, {"epsilon", eps}});
    const auto t = classicalTarget(target);
    BoundsReport r;
    r.lowerBits = cMaxSmoothed(t, std::sqrt(eps), SmoothingVariant::BallFirst, cfg.commonInfo).valueBits;
    auto ext = cMax(t, cfg.commonInfo).extension;
    r.protocol = buildDSSProtocol(makeSeparable(ext.seed, ext.partyConditionals), eps, eps1, eps2, cfg);
    r.achievedBits = r.protocol.bits;
    r.achievedTD = r.protocol.achievedTD;
    r.kappaValue = kappa(eps2, distinctEigenvalues(target));
    r.upperBits = cMaxSmoothed(t, eps1, SmoothingVariant::BallFirst, cfg.commonInfo).valueBits + r.kappaValue;
    r.lowerBelowAchieved = r.lowerBits <= r.achievedBits + slack;
    r.achievedBelowUpper = r.achievedBits <= r.upperBits + slack;
    return r;
}

} // namespace oneshot
