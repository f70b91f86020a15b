#include "catch_amalgamated.hpp"

#include <oneshot/covering.hpp>

using namespace oneshot;
using Catch::Approx;

namespace {

ErrorCode codeOf(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected an error");
    return ErrorCode::ParseError;
}

CQState orthogonalQubits() { return makeCQ({0.5, 0.5}, {basisState(2, 0), basisState(2, 1)}); }

DensityMatrix pureQubit(double theta) {
    Mat m(2);
    double c = std::cos(theta), s = std::sin(theta);
    m(0, 0) = c * c;
    m(0, 1) = m(1, 0) = c * s;
    m(1, 1) = s * s;
    return unchecked(m, {2});
}

// ‖H‖₁ of a real symmetric traceless 2x2 matrix [[a,b],[b,-a]] is 2√(a²+b²).
double traceless2x2Norm(double a, double b) { return 2 * std::sqrt(a * a + b * b); }

// E over uniform codebooks of size M for the orthogonal-qubit source: Σ_k C(M,k) 2^{-M} · 2|k/M − 1/2|.
double binomialOracle(std::size_t M) {
    double s = 0, c = 1;
    for (std::size_t k = 0; k <= M; ++k) {
        s += c * std::pow(0.5, double(M)) * 2 * std::abs(double(k) / double(M) - 0.5);
        c = c * double(M - k) / double(k + 1);
    }
    return s;
}

CoveringExperiment experiment(const CQState& cq, double eps, std::size_t trials = 4000, std::uint64_t seed = 7) {
    CoveringExperiment e;
    e.cq = cq;
    e.epsilon = eps;
    e.trials = trials;
    e.seed = seed;
    return e;
}

SeparableDecomposition correlatedBit() {
    return makeSeparable({0.5, 0.5}, {{basisState(2, 0), basisState(2, 1)}, {basisState(2, 0), basisState(2, 1)}});
}

DSSConfig dssQuick() {
    DSSConfig c;
    c.commonInfo.search.restarts = 4;
    return c;
}

} // namespace

TEST_CASE("coveringError on small codebooks", "[covering]") {
    auto cq = makeCQ({1.0 / 3, 2.0 / 3}, {basisState(2, 0), pureQubit(0.7)});
    CHECK(coveringError(cq, {{0, 1, 1}}) == Approx(0).margin(1e-12));

    auto flat = makeCQ({0.2, 0.3, 0.5}, {maximallyMixed(2), maximallyMixed(2), maximallyMixed(2)});
    CHECK(coveringError(flat, {{2}}) == Approx(0).margin(1e-12));
    CHECK(coveringError(flat, {{0, 0, 1, 2}}) == Approx(0).margin(1e-12));

    CHECK(coveringError(orthogonalQubits(), {{0, 0}}) == Approx(1).margin(1e-12));
    CHECK(coveringError(orthogonalQubits(), {{0, 1}}) == Approx(0).margin(1e-12));

    // |0⟩ and |+⟩ uniform, codebook {0}: difference is [[1/4, -1/4], [-1/4, -1/4]].
    auto plus = makeCQ({0.5, 0.5}, {basisState(2, 0), pureQubit(std::numbers::pi / 4)});
    CHECK(coveringError(plus, {{0}}) == Approx(traceless2x2Norm(0.25, 0.25)).margin(1e-12));

    CHECK(codeOf([&] { coveringError(orthogonalQubits(), {{0, 2}}); }) == ErrorCode::BadSymbol);
    CHECK(codeOf([&] { coveringError(orthogonalQubits(), {{}}); }) == ErrorCode::BadSymbol);
}

TEST_CASE("expected covering error: exact and sampled paths", "[covering]") {
    auto e = experiment(orthogonalQubits(), 0.3);
    auto m2 = expectedCoveringError(e, 2);
    CHECK(m2.exact);
    CHECK(m2.mean == Approx(0.5).margin(1e-12));
    CHECK(expectedCoveringError(e, 1).mean == Approx(1).margin(1e-12));

    for (std::size_t M : {3u, 5u, 8u}) {
        auto ex = expectedCoveringError(e, M, EvalPath::Exact);
        auto mc = expectedCoveringError(e, M, EvalPath::MonteCarlo);
        CHECK_FALSE(mc.exact);
        CHECK(ex.mean == Approx(binomialOracle(M)).margin(1e-12));
        CHECK(std::abs(mc.mean - ex.mean) <= 3 * mc.stdErr);
    }
    // beyond 1e4 sequences only sampling applies
    auto big = expectedCoveringError(e, 20);
    CHECK_FALSE(big.exact);
    CHECK(std::abs(big.mean - binomialOracle(20)) <= 3 * big.stdErr);
    CHECK(codeOf([&] { expectedCoveringError(e, 20, EvalPath::Exact); }) == ErrorCode::TooLarge);
}

TEST_CASE("expected covering error is nonincreasing in M", "[covering][property]") {
    Rng rng(11);
    for (int rep = 0; rep < 3; ++rep) {
        std::vector<DensityMatrix> conds;
        for (int x = 0; x < 3; ++x) conds.push_back(randomDensity({2}, rng, 1));
        auto e = experiment(makeCQ(randomProbs(3, rng), conds), 0.3, 3000, 100 + rep);
        double prevUpper = kInf;
        for (std::size_t M = 1; M <= 12; ++M) {
            auto est = expectedCoveringError(e, M);
            CHECK(est.mean - est.stdErr <= prevUpper + 1e-12);
            prevUpper = est.mean + est.stdErr;
        }
    }
}

TEST_CASE("Monte Carlo is independent of the worker count", "[covering][determinism]") {
    Rng rng(3);
    std::vector<DensityMatrix> conds;
    for (int x = 0; x < 4; ++x) conds.push_back(randomDensity({3}, rng));
    auto e = experiment(makeCQ(randomProbs(4, rng), conds), 0.2, 2000, 99);
    auto a = expectedCoveringError(e, 9, EvalPath::MonteCarlo);
    e.workers = 4;
    auto b = expectedCoveringError(e, 9, EvalPath::MonteCarlo);
    CHECK(a.mean == b.mean);
    CHECK(a.stdErr == b.stdErr);
    e.seed = 100;
    CHECK(expectedCoveringError(e, 9, EvalPath::MonteCarlo).mean != a.mean);
}

TEST_CASE("minimal codebook size", "[covering]") {
    auto flat = makeCQ({0.5, 0.5}, {maximallyMixed(2), maximallyMixed(2)});
    CHECK(minCodebookSize(experiment(flat, 0.1)).M == 1);

    auto r = minCodebookSize(experiment(orthogonalQubits(), 0.6));
    CHECK(r.M == 2);
    CHECK(r.empirical);
    CHECK(r.estimate.mean == Approx(0.5).margin(1e-12));

    std::size_t prev = std::numeric_limits<std::size_t>::max();
    for (double eps : {0.15, 0.2, 0.3, 0.45, 0.6, 0.9}) {
        auto m = minCodebookSize(experiment(orthogonalQubits(), eps, 2000)).M;
        CHECK(m <= prev);
        prev = m;
    }

    auto e = experiment(orthogonalQubits(), 0.05);
    e.sizeSchedule.maxM = 4;
    CHECK(codeOf([&] { minCodebookSize(e); }) == ErrorCode::NotReachedWithinSchedule);
}

TEST_CASE("soft-covering constants", "[covering][bounds]") {
    const double g05 = std::log2(4.0 / (0.5 * (1 - std::sqrt(0.75))));
    CHECK(gBound(0.5) == Approx(g05).margin(1e-12));
    CHECK(gBound(0.5) == Approx(5.90).margin(5e-3));

    // ε̄ inverts x ↦ x + 2√x at ε̃
    for (double eps : {0.05, 0.3, 0.7})
        for (double f : {0.9, 0.95, 0.99}) {
            double eta = f * eps;
            double t = std::sqrt(eps / 8) - std::sqrt(eps - eta);
            double b = epsBar(eps, eta);
            CHECK(b > 0);
            CHECK(b + 2 * std::sqrt(b) == Approx(t).margin(1e-12));
        }

    auto sb = softCoverBounds(orthogonalQubits(), 0.3, 0.28, BoundKind::Imax);
    CHECK(sb.constants.nu == 1);       // ρ_B = π₂
    CHECK(sb.constants.nuPrime == 1);  // π₂ ⊗ π₂
    CHECK(std::isfinite(sb.rhsBits));
    CHECK_FALSE(sb.outsideProofRange);
    double tilde = std::sqrt(0.3 / 8) - std::sqrt(0.02);
    double bar = 2 + tilde - 2 * std::sqrt(1 + tilde);
    double kap = 0 + gBound(bar) - std::log2(1 / 0.3 - 0.125) + 3 * std::log2(3.0) + 7;
    CHECK(sb.constants.kappaValue == Approx(kap).margin(1e-12));
    CHECK(sb.rhsBits == Approx(sb.miBits + kap).margin(1e-12));
    CHECK(sb.miBits <= 1 + 1e-9);

    auto mEmp = minCodebookSize(experiment(orthogonalQubits(), 0.3)).M;
    CHECK(std::log2(double(mEmp)) <= sb.rhsBits);
    auto hb = softCoverBounds(orthogonalQubits(), 0.3, 0.28, BoundKind::Ihypo);
    CHECK(std::log2(double(mEmp)) <= hb.rhsBits);
    CHECK(hb.constants.kappaValue == Approx(-2).margin(1e-12));

    CHECK(codeOf([&] { softCoverBounds(orthogonalQubits(), 0.3, 0.2, BoundKind::Imax); }) == ErrorCode::EtaOutOfRange);
    CHECK(codeOf([&] { softCoverBounds(orthogonalQubits(), 0.3, 0.3, BoundKind::Imax); }) == ErrorCode::EtaOutOfRange);
    CHECK(softCoverBounds(orthogonalQubits(), 0.6, 0.58, BoundKind::Imax).outsideProofRange);

    // quantum input: unsmoothed I↑ stands in for the smoothed term
    auto q = makeCQ({0.5, 0.5}, {basisState(2, 0), pureQubit(std::numbers::pi / 4)});
    auto qb = softCoverBounds(q, 0.3, 0.28, BoundKind::Imax);
    CHECK(qb.miBits == Approx(mi(q.assemble(), MIFlavor::Up, {1})).margin(1e-9));
    CHECK(qb.constants.nu == 2);
}

TEST_CASE("kappa evaluates the closed form", "[covering][bounds]") {
    auto independent = [](double x, double nu) {
        double eta = 15 * x / 16;
        double t = std::sqrt(x / 8) - std::sqrt(x - eta);
        double xb = std::pow(std::sqrt(1 + t) - 1, 2);
        double g = std::log2((2 * (1 - xb) + 3) / ((1 - xb) * (1 - std::sqrt(1 - xb * xb))));
        return std::log2(nu) + g - std::log2(1 / x - 0.125) + 3 * std::log2(3.0) + 7;
    };
    for (double x : {0.05, 0.2, 0.5, 0.9})
        for (std::size_t nu : {1u, 2u, 5u}) CHECK(kappa(x, nu) == Approx(independent(x, double(nu))).epsilon(1e-9));
    CHECK(std::isfinite(kappa(0.5, 2)));
    CHECK(codeOf([] { kappa(0.5, 2, 0.3); }) == ErrorCode::EtaOutOfRange);
}

TEST_CASE("distributed source simulation protocol", "[covering][dss]") {
    auto product = makeSeparable({1.0}, {{pureQubit(0.3)}, {maximallyMixed(3)}});
    auto p = buildDSSProtocol(product, 0.1, 0.02, 0.05, dssQuick());
    CHECK(p.codebook.size() == 1);
    CHECK(p.bits == 0);
    CHECK(p.achievedTD == Approx(0).margin(1e-12));

    auto corr = correlatedBit();
    auto d = buildDSSProtocol(corr, 0.05, 0.01, 0.02, dssQuick());
    CHECK(d.achievedTD <= 0.05);
    double wyner = wynerCI(separableTarget(corr)).valueBits;
    CHECK(d.bits >= wyner - 1e-6);
    CHECK(d.bits == Approx(std::log2(double(d.codebook.size()))));

    // lifted covering error equals the simulation error, and the output is Σ (1/M) ρ_A ⊗ ρ_C
    CQState lifted{corr.probs, {}};
    for (std::size_t x = 0; x < corr.size(); ++x) lifted.conditionals.push_back(unchecked(corr.component(x), corr.dims()));
    CHECK(d.achievedTD == coveringError(lifted, d.codebook));
    Mat out(4);
    const double M = double(d.codebook.size());
    for (std::size_t i = 0; i < d.codebook.size(); ++i) out += kron(d.preparations[0][i].m, d.preparations[1][i].m) * cplx(1 / M);
    CHECK(traceNormHermitian(out - d.extension.reconstruct().m) < 1e-14);
    CHECK(traceNormHermitian(out - corr.reconstruct().m) == Approx(d.achievedTD).margin(1e-12));

    // A ⊗ X ⊗ C with X the uniform seed
    const std::size_t n = d.codebook.size();
    Mat axc(4 * n);
    for (std::size_t i = 0; i < n; ++i) {
        Mat xi(n);
        xi(i, i) = 1.0 / M;
        axc += kron(kron(d.preparations[0][i].m, xi), d.preparations[1][i].m);
    }
    CHECK(checkMarkov(unchecked(axc, {2, n, 2})).markov);

    CHECK(codeOf([&] { buildDSSProtocol(corr, 0.05, 0.02, 0.02, dssQuick()); }) == ErrorCode::BudgetViolated);
    CHECK(codeOf([&] { buildDSSProtocol(corr, 0.05, 0.0, 0.02, dssQuick()); }) == ErrorCode::BudgetViolated);
}

TEST_CASE("derandomized codebook beats the random-codebook mean", "[covering][dss][property]") {
    Rng rng(21);
    std::vector<DensityMatrix> a, c;
    for (int x = 0; x < 6; ++x) {
        a.push_back(randomDensity({2}, rng, 1));
        c.push_back(randomDensity({2}, rng, 1));
    }
    auto dec = makeSeparable(randomProbs(6, rng), {a, c});
    CQState cq{dec.probs, {}};
    for (std::size_t x = 0; x < dec.size(); ++x) cq.conditionals.push_back(unchecked(dec.component(x), dec.dims()));
    auto e = experiment(cq, 0.3, 500, 5);
    auto pr = detail::normalizedProbs(cq);
    auto avg = detail::normalizedAverage(cq, pr);
    DSSConfig cfg = dssQuick();
    cfg.trials = 200;
    for (std::size_t M : {2u, 4u, 6u, 9u}) {
        auto best = detail::bestCodebook(cq, avg, pr, M, cfg);
        CHECK(best.second <= expectedCoveringError(e, M).mean + 1e-12);
        CHECK(best.second == Approx(coveringError(cq, best.first)).margin(1e-12));
    }
    // quantum decomposition end to end
    auto p = buildDSSProtocol(dec, 0.5, 0.05, 0.3, cfg);
    CHECK(p.achievedTD <= 0.3 + 1e-12);
    CHECK_FALSE(p.extension.classicalFlag);
}

TEST_CASE("one-shot bounds report", "[covering][dss]") {
    auto cfg = dssQuick();
    auto prod = classicalState({0.12, 0.28, 0.18, 0.42}, {2, 2}); // (0.4, 0.6) ⊗ (0.3, 0.7)
    auto r = oneShotBoundsReport(prod, 0.2, 0.05, 0.05, cfg);
    CHECK(r.lowerBits == Approx(0).margin(1e-6));
    CHECK(r.achievedBits == 0);
    CHECK(r.upperBits == Approx(r.kappaValue).margin(1e-6));
    CHECK(r.kappaValue == Approx(kappa(0.05, 4)).margin(1e-12));

    auto corr = classicalState({0.5, 0, 0, 0.5}, {2, 2});
    auto c = oneShotBoundsReport(corr, 0.2, 0.05, 0.05, cfg);
    CHECK(c.lowerBelowAchieved);
    CHECK(c.achievedBelowUpper);
    CHECK(c.lowerBits <= c.achievedBits + 5e-2);
    CHECK(c.achievedBits <= c.upperBits);
    CHECK(c.achievedTD <= 0.2);
    CHECK(c.kappaValue == Approx(kappa(0.05, 2)).margin(1e-12));
    CHECK(codeOf([&] { oneShotBoundsReport(corr, 0.2, 0.1, 0.05, cfg); }) == ErrorCode::BudgetViolated);
}
