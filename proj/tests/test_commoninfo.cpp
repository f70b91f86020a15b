#include "catch_amalgamated.hpp"

#include <oneshot/commoninfo.hpp>

#include <array>

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

CommonInfoConfig quick(int restarts = 4) {
    CommonInfoConfig c;
    c.search.restarts = restarts;
    return c;
}

DensityMatrix binaryJoint(double p00, double p01, double p10, double p11) {
    return classicalState({p00, p01, p10, p11}, {2, 2});
}

MarkovExtension classicalExtension(const std::vector<double>& w, const std::vector<std::vector<double>>& a,
                                   const std::vector<std::vector<double>>& c) {
    MarkovExtension e;
    e.seed = w;
    e.classicalFlag = true;
    e.partyConditionals.resize(2);
    for (std::size_t x = 0; x < w.size(); ++x) {
        e.partyConditionals[0].push_back(unchecked(Mat::diag(a[x]), {a[x].size()}));
        e.partyConditionals[1].push_back(unchecked(Mat::diag(c[x]), {c[x].size()}));
    }
    return e;
}

MarkovExtension randomClassicalExtension(std::size_t nx, std::size_t dA, std::size_t dC, Rng& rng) {
    std::vector<std::vector<double>> a, c;
    for (std::size_t x = 0; x < nx; ++x) {
        a.push_back(randomProbs(dA, rng));
        c.push_back(randomProbs(dC, rng));
    }
    return classicalExtension(randomProbs(nx, rng), a, c);
}

// C_max of a 2x2 distribution by an LP over a fixed 1/g grid of product atoms.
double gridCMax(const std::vector<double>& q, int g) {
    std::vector<std::vector<double>> cols;
    std::vector<double> cost;
    for (int i = 0; i <= g; ++i)
        for (int j = 0; j <= g; ++j) {
            double a = double(i) / g, c = double(j) / g;
            std::vector<double> v{a * c, a * (1 - c), (1 - a) * c, (1 - a) * (1 - c)};
            double r = 0;
            bool ok = true;
            for (int k = 0; k < 4; ++k) {
                if (v[k] <= 0) continue;
                if (q[k] <= 0) ok = false;
                else r = std::max(r, v[k] / q[k]);
            }
            if (!ok) continue;
            cols.push_back(v);
            cost.push_back(r);
        }
    std::vector<std::vector<double>> A(4, std::vector<double>(cols.size()));
    for (std::size_t j = 0; j < cols.size(); ++j)
        for (int k = 0; k < 4; ++k) A[k][j] = cols[j][k];
    auto lp = solveLP(A, q, cost);
    return lp.feasible ? std::log2(lp.objective) : kInf;
}

double entropyBits(const std::vector<double>& p) {
    double h = 0;
    for (double v : p)
        if (v > 0) h -= v * std::log2(v);
    return h;
}

} // namespace

TEST_CASE("checkMarkov recognizes product conditionals") {
    // Σ p(x)|x><x| ⊗ ρ_A^x ⊗ ρ_C^x arranged A, X, C
    Rng rng(3);
    auto a0 = randomDensity({2}, rng), a1 = randomDensity({2}, rng);
    auto c0 = randomDensity({2}, rng), c1 = randomDensity({2}, rng);
    Mat m = kron(kron(a0.m, basisState(2, 0).m), c0.m) * cplx(0.3) + kron(kron(a1.m, basisState(2, 1).m), c1.m) * cplx(0.7);
    auto rep = checkMarkov(unchecked(m, {2, 2, 2}));
    CHECK(rep.markov);
    CHECK(rep.cmiBits == Approx(0).margin(1e-9));

    std::vector<double> ghz(8, 0.0);
    ghz[0] = ghz[7] = 0.5;
    CHECK(checkMarkov(classicalState(ghz, {2, 2, 2})).markov);

    // Bell pair on AC for every x: I(A:C|X) = 2
    std::vector<cplx> phi{1 / std::sqrt(2.0), 0, 0, 1 / std::sqrt(2.0)};
    Mat bell = Mat::outer(phi);
    Mat xac = kron(Mat::diag({0.5, 0.5}), bell);
    auto axc = permuteSubsystems(unchecked(xac, {2, 2, 2}), {1, 0, 2});
    auto bad = checkMarkov(axc);
    CHECK_FALSE(bad.markov);
    CHECK(bad.cmiBits == Approx(2).margin(1e-9));
    CHECK(bad.maxConditionalMI == Approx(2).margin(1e-9));
}

TEST_CASE("Wyner common information on classical targets") {
    auto prod = wynerCI(classicalTarget(tensor(classicalState({0.3, 0.7}, {2}), classicalState({0.2, 0.8}, {2}))));
    CHECK(prod.valueBits == Approx(0).margin(1e-6));
    CHECK(prod.certified == Certification::Exact);

    auto corr = wynerCI(classicalTarget(perfectCorrelation({0.5, 0.5})));
    CHECK(corr.valueBits == Approx(1).margin(1e-4));
    CHECK(corr.certified == Certification::Exact);

    // doubly symmetric binary source: 1 + h(a0) - 2h(a1), a1 = (1 - sqrt(1 - 2 a0)) / 2
    const double a0 = 0.2, a1 = (1 - std::sqrt(1 - 2 * a0)) / 2;
    const double closed = 1 + entropyBits({a0, 1 - a0}) - 2 * entropyBits({a1, 1 - a1});
    auto dsbs = wynerCI(classicalTarget(binaryJoint(0.4, 0.1, 0.1, 0.4)));
    CHECK(dsbs.valueBits == Approx(closed).margin(1e-3));
    CHECK(dsbs.valueBits == Approx(0.705905).margin(1e-4));
    CHECK(dsbs.certified == Certification::Exact);
    CHECK(dsbs.extension.size() <= 4);
    CHECK(dsbs.residualMarginalError <= 1e-6);
    // the reported value is the objective of the returned extension
    CHECK(extensionMutualInfo(dsbs.extension) == Approx(dsbs.valueBits).margin(1e-8));
}

TEST_CASE("Wyner common information with a separable decomposition") {
    std::vector<cplx> plus{1 / std::sqrt(2.0), 1 / std::sqrt(2.0)};
    auto p0 = basisState(2, 0), pp = unchecked(Mat::outer(plus), {2});
    auto dec = makeSeparable({0.5, 0.5}, {{p0, pp}, {p0, pp}});
    auto r = wynerCI(separableTarget(dec), quick());
    CHECK(r.residualMarginalError <= 1e-6);
    auto rho = dec.reconstruct();
    CHECK(r.valueBits >= mi(rho, MIFlavor::VonNeumann, {0}) - 1e-8);
    // the given decomposition is itself an extension
    MarkovExtension given{dec.probs, dec.parties, false};
    CHECK(r.valueBits <= extensionMutualInfo(given) + 1e-8);

    Rng rng(1);
    auto ent = randomDensity({2, 2}, rng);
    CHECK(codeOf([&] { wynerCI(classicalTarget(ent)); }) == ErrorCode::InfeasibleTarget);
    CommonInfoTarget wrong{ent, dec};
    CHECK(codeOf([&] { wynerCI(wrong); }) == ErrorCode::InfeasibleTarget);
}

TEST_CASE("C_max of perfectly correlated sources is log of the support size") {
    struct Case {
        std::vector<double> p;
        double expect;
    };
    for (auto& c : std::vector<Case>{{{0.5, 0.5}, 1.0}, {{0.25, 0.25, 0.25, 0.25}, 2.0}, {{0.5, 0.25, 0.25}, std::log2(3.0)}}) {
        auto r = cMax(classicalTarget(perfectCorrelation(c.p)));
        CHECK(r.valueBits == Approx(c.expect).margin(1e-3));
        CHECK(r.certified == Certification::Exact);
        CHECK(extensionUpBits(r.extension) == Approx(r.valueBits).margin(1e-9));
    }
    auto prod = cMax(classicalTarget(tensor(classicalState({0.3, 0.7}, {2}), classicalState({0.5, 0.5}, {2}))));
    CHECK(prod.valueBits == Approx(0).margin(1e-6));
}

TEST_CASE("C_max dominates Wyner and the extension objective matches the SDP") {
    Rng rng(11);
    for (int t = 0; t < 6; ++t) {
        auto target = classicalTarget(randomClassical({2, 2}, rng));
        auto w = wynerCI(target, quick());
        auto c = cMax(target, quick());
        CHECK(c.valueBits >= w.valueBits - 2e-3);
        CHECK(extensionMutualInfo(c.extension) <= extensionUpBits(c.extension) + 1e-8);
        // I↑_max(AC:X) via the domination SDP on the assembled X-AC state
        auto cq = c.extension.withSeed().assemble();
        CHECK(mi(cq, MIFlavor::Up, {1, 2}) == Approx(c.valueBits).margin(1e-6));
    }
}

TEST_CASE("C_max does not grow under a local channel") {
    Rng rng(5);
    for (int t = 0; t < 5; ++t) {
        auto rho = randomClassical({2, 2}, rng);
        auto ch = classicalChannelKraus(randomStochastic(2, 2, rng));
        auto out = applyLocalChannel(rho, t % 2, ch);
        auto before = cMax(classicalTarget(rho), quick());
        auto after = cMax(classicalTarget(out), quick());
        CHECK(after.valueBits <= before.valueBits + 2e-3);
    }
}

TEST_CASE("C-tilde-zero and C-tilde-h") {
    auto prodState = tensor(classicalState({0.3, 0.7}, {2}), classicalState({0.4, 0.6}, {2}));
    CHECK(cTildeZero(classicalTarget(prodState)).valueBits == Approx(0).margin(1e-9));
    const double eps = 0.1;
    CHECK(cTildeH(classicalTarget(prodState), eps, quick()).valueBits == Approx(-std::log2(1 - eps)).margin(1e-9));

    auto corr = perfectCorrelation({0.5, 0.5});
    auto canon = classicalExtension({0.5, 0.5}, {{1, 0}, {0, 1}}, {{1, 0}, {0, 1}});
    // projector-trace oracle: Σ p(x) Tr[Π_x ρ] = 2 · ½ · ½
    CHECK(extensionZeroBits(canon) == Approx(1).margin(1e-12));
    CHECK(cTildeZero(classicalTarget(corr)).valueBits <= 1 + 1e-9);

    // on a fixed extension: D_h^ε(ρ_XAC‖ρ_X⊗ρ_AC) ≤ D_max(ρ_XAC‖ρ_X⊗ρ_AC) - log(1-ε), and ≤ (I + h(ε))/(1-ε) ≤ (I↑ + h(ε))/(1-ε)
    Rng rng(8);
    const double e2 = 0.01;
    for (int t = 0; t < 10; ++t) {
        auto ext = randomClassicalExtension(3, 2, 2, rng);
        auto cq = ext.withSeed().assemble();
        auto prod = unchecked(kron(Mat::diag(ext.seed), ext.reconstruct().m), cq.dims);
        double h = extensionHypoBits(ext, e2);
        CHECK(h <= dMax(cq, prod).valueBits - std::log2(1 - e2) + 1e-9);
        CHECK(h <= (extensionUpBits(ext) + entropyBits({e2, 1 - e2})) / (1 - e2) + 1e-9);
    }
    auto r = cTildeH(classicalTarget(binaryJoint(0.4, 0.1, 0.1, 0.4)), e2, quick());
    CHECK(r.residualMarginalError <= 1e-6);
    CHECK(r.valueBits <= cMax(classicalTarget(binaryJoint(0.4, 0.1, 0.1, 0.4))).valueBits - std::log2(1 - e2) + 1e-9);
}

TEST_CASE("smoothed C_max: endpoints, monotonicity, validation") {
    auto corr = classicalTarget(perfectCorrelation({0.5, 0.5}));
    for (auto v : {SmoothingVariant::BallFirst, SmoothingVariant::ExtensionFirst}) {
        CHECK(cMaxSmoothed(corr, 0, v).valueBits == Approx(cMax(corr).valueBits).margin(1e-6));
        auto r1 = cMaxSmoothed(corr, 0.1, v, quick());
        auto r3 = cMaxSmoothed(corr, 0.3, v, quick());
        CHECK(r1.valueBits <= 1 + 1e-9);
        CHECK(r3.valueBits <= r1.valueBits + 1e-12);
        CHECK(r3.certified == Certification::LocalSearchUpperBound);
        REQUIRE(r3.ballDistance);
        CHECK(*r3.ballDistance <= 0.3 + 1e-9);
    }
    // monotone along a finer sweep
    auto dsbs = classicalTarget(binaryJoint(0.4, 0.1, 0.1, 0.4));
    double prev = kInf;
    for (double e : {0.0, 0.05, 0.1, 0.15, 0.2}) {
        double v = cMaxSmoothed(dsbs, e, SmoothingVariant::BallFirst, quick()).valueBits;
        CHECK(v <= prev + 1e-12);
        prev = v;
    }
    Rng rng(2);
    CHECK(codeOf([&] { cMaxSmoothed(classicalTarget(randomDensity({2, 2}, rng)), 0.1, SmoothingVariant::BallFirst); }) ==
          ErrorCode::ClassicalOnly);
}

TEST_CASE("ball-first smoothed C_max against a nested grid") {
    // outer grid over distributions in the purified-distance ball, inner LP over a product-atom grid;
    // the second level refines a 1/400 grid around the best coarse points
    const std::vector<double> p{0.4, 0.1, 0.1, 0.4};
    const double eps = 0.1, c = std::sqrt(1 - eps * eps);
    auto inBall = [&](const std::vector<double>& q) {
        double f = 0;
        for (int n = 0; n < 4; ++n) f += std::sqrt(q[n] * p[n]);
        return f >= c;
    };
    std::vector<std::pair<double, std::array<int, 3>>> coarse;
    const int g = 40;
    for (int i = 0; i <= g; ++i)
        for (int j = 0; i + j <= g; ++j)
            for (int k = 0; i + j + k <= g; ++k) {
                std::vector<double> q{double(i) / g, double(j) / g, double(k) / g, double(g - i - j - k) / g};
                if (inBall(q)) coarse.push_back({gridCMax(q, 20), {i, j, k}});
            }
    std::sort(coarse.begin(), coarse.end());
    double oracle = kInf;
    const int fine = 400, rad = 10;
    for (std::size_t s = 0; s < std::min<std::size_t>(3, coarse.size()); ++s) {
        auto [ci, cj, ck] = coarse[s].second;
        for (int i = ci * rad - rad; i <= ci * rad + rad; ++i)
            for (int j = cj * rad - rad; j <= cj * rad + rad; ++j)
                for (int k = ck * rad - rad; k <= ck * rad + rad; ++k) {
                    if (i < 0 || j < 0 || k < 0 || i + j + k > fine) continue;
                    std::vector<double> q{double(i) / fine, double(j) / fine, double(k) / fine, double(fine - i - j - k) / fine};
                    if (inBall(q)) oracle = std::min(oracle, gridCMax(q, 40));
                }
    }
    auto r = cMaxSmoothed(classicalTarget(binaryJoint(0.4, 0.1, 0.1, 0.4)), eps, SmoothingVariant::BallFirst, quick());
    CHECK(r.valueBits == Approx(oracle).margin(1e-2));
    // the reported extension attains the value and sits inside the ball
    CHECK(extensionUpBits(r.extension) == Approx(r.valueBits).margin(1e-9));
    CHECK(purifiedDistance(r.extension.reconstruct(), binaryJoint(0.4, 0.1, 0.1, 0.4)) <= eps + 1e-9);
}

TEST_CASE("reduceCardinality keeps tracked functionals") {
    Rng rng(21);
    auto ext = randomClassicalExtension(12, 2, 2, rng);
    auto target = classicalTarget(ext.reconstruct());
    auto red = reduceCardinality(ext, target);
    CHECK(red.size() <= 8);
    auto avg = [](const MarkovExtension& e, std::size_t which) {
        double s = 0;
        for (std::size_t x = 0; x < e.size(); ++x) {
            double ha = vonNeumann(e.partyConditionals[0][x]), hc = vonNeumann(e.partyConditionals[1][x]);
            s += e.seed[x] * (which == 0 ? ha + hc : which == 1 ? ha : hc);
        }
        return s;
    };
    // direct-sum oracle: tracked averages computed from the two extensions independently
    CHECK(traceDistance(red.reconstruct(), ext.reconstruct()) <= 1e-8);
    for (std::size_t w = 0; w < 3; ++w) CHECK(avg(red, w) == Approx(avg(ext, w)).margin(1e-8));
    CHECK(extensionUpBits(red) == Approx(extensionUpBits(ext)).margin(1e-8));
    CHECK(extensionMutualInfo(red) <= extensionMutualInfo(ext) + 1e-8);

    // at the bound already: unchanged
    auto small = randomClassicalExtension(3, 2, 2, rng);
    auto same = reduceCardinality(small, classicalTarget(small.reconstruct()));
    CHECK(same.size() == 3);
    for (std::size_t x = 0; x < 3; ++x) CHECK(same.seed[x] == Approx(small.seed[x]).margin(1e-15));

    // duplicates merged
    auto dup = classicalExtension({0.25, 0.25, 0.5}, {{1, 0}, {1, 0}, {0, 1}}, {{0.5, 0.5}, {0.5, 0.5}, {0, 1}});
    auto merged = reduceCardinality(dup, classicalTarget(dup.reconstruct()));
    CHECK(merged.size() == 2);
}

TEST_CASE("formation search") {
    auto prod = formationSearch(classicalTarget(tensor(classicalState({0.3, 0.7}, {2}), classicalState({0.4, 0.6}, {2}))), 0.05,
                                false, quick());
    CHECK(prod.k == 1);
    CHECK(prod.bits == 0);

    // k = 1 is infeasible: the closest product to the correlated bit sits at trace distance √2 - 1
    double best = kInf;
    for (int i = 0; i <= 1000; ++i)
        for (int j = 0; j <= 1000; ++j) {
            double a = i / 1000.0, c = j / 1000.0;
            double td = 0.5 * (std::abs(a * c - 0.5) + a * (1 - c) + (1 - a) * c + std::abs((1 - a) * (1 - c) - 0.5));
            best = std::min(best, td);
        }
    CHECK(best == Approx(std::sqrt(2.0) - 1).margin(1e-3));
    auto corr = formationSearch(classicalTarget(perfectCorrelation({0.5, 0.5})), 0.01, false, quick());
    CHECK(corr.k == 2);
    CHECK(corr.bits == Approx(1));
    CHECK(corr.traceDistance <= 0.01);

    // a uniform seed cannot produce (2/3, 1/3) with two symbols
    auto skew = perfectCorrelation({2.0 / 3, 1.0 / 3});
    auto u = formationSearch(classicalTarget(skew), 0.01, true, quick());
    CHECK(u.k > 2);
    auto nu = formationSearch(classicalTarget(skew), 0.01, false, quick());
    CHECK(nu.k == 2);
}

TEST_CASE("multi-party monotonicity") {
    auto bit = classicalState({0.5, 0.5}, {2});
    auto prod3 = tensor(tensor(bit, classicalState({0.2, 0.8}, {2})), bit);
    auto r0 = multiPartyMonotonicity(classicalTarget(prod3), 2);
    CHECK(r0.fullValue == Approx(0).margin(1e-6));
    CHECK(r0.holds);

    std::vector<double> ghz(8, 0.0);
    ghz[0] = ghz[7] = 0.5;
    auto r1 = multiPartyMonotonicity(classicalTarget(classicalState(ghz, {2, 2, 2})), 2);
    CHECK(r1.fullValue == Approx(1).margin(2e-3));
    CHECK(r1.reducedValue == Approx(1).margin(2e-3));
    CHECK(r1.holds);

    Rng rng(4);
    auto mix = randomClassical({2, 2, 2}, rng);
    auto r2 = multiPartyMonotonicity(classicalTarget(mix), 2, quick());
    CHECK(r2.holds);
    CHECK(codeOf([&] { multiPartyMonotonicity(classicalTarget(mix), 3); }) == ErrorCode::BadSubsystemIndex);
}

TEST_CASE("typical extensions") {
    auto ext = classicalExtension({0.5, 0.5}, {{0.9, 0.1}, {0.2, 0.8}}, {{0.7, 0.3}, {0.1, 0.9}});
    auto one = typicalExtension(ext, 1, 10.0);
    CHECK(one.traceDistance == Approx(0).margin(1e-12));
    CHECK(one.extension.size() == 2);

    // deterministic conditionals: the distance is the atypical seed mass
    auto det = classicalExtension({0.5, 0.5}, {{1, 0}, {0, 1}}, {{1, 0}, {0, 1}});
    auto t4 = typicalExtension(det, 4, 0.3);
    // typical counts of symbol 1 among 4: 1, 2, 3
    const double kept = (4 + 6 + 4) / 16.0;
    CHECK(t4.seedMass == Approx(kept).margin(1e-12));
    CHECK(t4.traceDistance == Approx(1 - kept).margin(1e-12));
    CHECK(t4.extension.size() == 14);

    double prev = kInf;
    for (std::size_t n : {2u, 4u, 6u}) {
        double td = typicalExtension(ext, n, 0.35).traceDistance;
        CHECK(td < prev);
        prev = td;
    }
    auto wide = classicalExtension(std::vector<double>(16, 1.0 / 16), std::vector<std::vector<double>>(16, {1, 0}),
                                   std::vector<std::vector<double>>(16, {1, 0}));
    CHECK(codeOf([&] { typicalExtension(wide, 5, 0.1); }) == ErrorCode::TooLarge);
}

TEST_CASE("search is deterministic for a fixed seed") {
    auto target = classicalTarget(binaryJoint(0.35, 0.15, 0.05, 0.45));
    auto a = cMaxSmoothed(target, 0.1, SmoothingVariant::BallFirst, quick());
    auto b = cMaxSmoothed(target, 0.1, SmoothingVariant::BallFirst, quick());
    CHECK(a.valueBits == b.valueBits);
    CHECK(a.extension.seed == b.extension.seed);
}
