#include "catch_amalgamated.hpp"

#include <oneshot/random.hpp>
#include <oneshot/state.hpp>

using namespace oneshot;
using Catch::Approx;

namespace {

DensityMatrix diagState(std::vector<double> p) { return classicalState(p, {p.size()}); }

PureState bell() {
    const double s = 1 / std::sqrt(2.0);
    return makePure({s, 0, 0, s}, {2, 2});
}

ErrorCode codeOf(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected an error");
    return ErrorCode::ParseError;
}

} // namespace

TEST_CASE("makeState validates its input") {
    auto mm = makeState(Mat::identity(2) * cplx(0.5), {2});
    CHECK(mm.normalized);
    CHECK(makeState(Mat::diag({0.6, 0.4}), {2}).normalized);
    CHECK(codeOf([] { makeState(Mat::diag({0.6, -0.1, 0.5}), {3}); }) == ErrorCode::NotPSD);
    CHECK(codeOf([] { makeState(Mat::diag({0.6, 0.6}), {2}); }) == ErrorCode::TraceOutOfRange);
    CHECK(codeOf([] { makeState(Mat::diag({0.5, 0.5}), {3}); }) == ErrorCode::DimMismatch);
    Mat nh = Mat::diag({0.5, 0.5});
    nh(0, 1) = 0.1;
    CHECK(codeOf([&] { makeState(nh, {2}); }) == ErrorCode::NotHermitian);
    auto sub = makeState(Mat::diag({0.3, 0.2}), {2});
    CHECK_FALSE(sub.normalized);
}

TEST_CASE("tensor products") {
    auto pi4 = tensor(maximallyMixed(2), maximallyMixed(2));
    CHECK(pi4.dims == Dims{2, 2});
    CHECK((pi4.m - Mat::identity(4) * cplx(0.25)).maxAbs() < 1e-15);
    auto p = tensor(basisState(2, 0), basisState(2, 1));
    CHECK(p.m(1, 1).real() == 1.0);
    Rng rng(1);
    auto a = makeState(Mat::diag({0.3, 0.2}), {2});
    auto b = randomDensity({3}, rng);
    CHECK(tensor(a, b).trace() == Approx(a.trace() * b.trace()).margin(1e-14));
}

TEST_CASE("partial trace") {
    Rng rng(2);
    auto ra = randomDensity({2}, rng), sb = randomDensity({3}, rng);
    auto ab = tensor(ra, sb);
    CHECK((partialTrace(ab, {0}).m - ra.m).maxAbs() <= 1e-12);
    CHECK((partialTrace(ab, {1}).m - sb.m).maxAbs() <= 1e-12);
    auto phi = toDensity(bell());
    CHECK((partialTrace(phi, {0}).m - maximallyMixed(2).m).maxAbs() <= 1e-15);
    auto t = partialTrace(ab, {});
    CHECK(t.dim() == 1);
    CHECK(t.m(0, 0).real() == Approx(1.0).margin(1e-12));
    CHECK(codeOf([&] { partialTrace(ab, {2}); }) == ErrorCode::BadSubsystemIndex);
}

TEST_CASE("partial trace of three parties keeps order") {
    Rng rng(4);
    auto a = randomDensity({2}, rng), b = randomDensity({3}, rng), c = randomDensity({2}, rng);
    auto abc = tensor(tensor(a, b), c);
    CHECK((partialTrace(abc, {2, 0}).m - tensor(a, c).m).maxAbs() <= 1e-12);
    auto swapped = permuteSubsystems(tensor(a, b), {1, 0});
    CHECK((swapped.m - tensor(b, a).m).maxAbs() <= 1e-15);
}

TEST_CASE("trace distance and fidelity") {
    auto p = diagState({0.7, 0.3}), q = diagState({0.5, 0.5});
    CHECK(traceDistance(p, p) == 0.0);
    CHECK(traceDistance(basisState(2, 0), basisState(2, 1)) == Approx(1.0));
    CHECK(traceDistance(p, q) == Approx(0.2).margin(1e-12));
    CHECK(fidelity(p, q) == Approx(std::sqrt(0.35) + std::sqrt(0.15)).margin(1e-12));
    Rng rng(8);
    auto r = randomDensity({3}, rng);
    CHECK(fidelity(r, r) == Approx(1.0).margin(1e-9));
    auto psi = randomPure({3}, rng), phi = randomPure({3}, rng);
    cplx ov = 0;
    for (std::size_t i = 0; i < 3; ++i) ov += std::conj(psi.amplitudes[i]) * phi.amplitudes[i];
    CHECK(fidelity(toDensity(psi), toDensity(phi)) == Approx(std::abs(ov)).margin(1e-7));
    CHECK(squaredFidelity(p, q) == Approx(std::pow(std::sqrt(0.35) + std::sqrt(0.15), 2)).margin(1e-12));
}

TEST_CASE("purified distance sandwich and metric properties") {
    Rng rng(9);
    CHECK(purifiedDistance(basisState(2, 0), basisState(2, 1)) == Approx(1.0));
    auto r = randomDensity({2}, rng);
    CHECK(purifiedDistance(r, r) <= 1e-6);
    for (int i = 0; i < 100; ++i) {
        auto a = randomDensity({3}, rng, 1 + i % 3), b = randomDensity({3}, rng, 1 + (i / 3) % 3);
        double td = traceDistance(a, b), pd = purifiedDistance(a, b);
        CHECK(td <= pd + 1e-9);
        CHECK(pd <= std::sqrt(2 * td) + 1e-9);
    }
    for (int i = 0; i < 50; ++i) {
        auto a = randomDensity({2}, rng), b = randomDensity({2}, rng), c = randomDensity({2}, rng);
        CHECK(traceDistance(a, c) <= traceDistance(a, b) + traceDistance(b, c) + 1e-9);
        CHECK(purifiedDistance(a, c) <= purifiedDistance(a, b) + purifiedDistance(b, c) + 1e-9);
        CHECK(traceDistance(a, b) == Approx(traceDistance(b, a)).margin(1e-12));
    }
}

TEST_CASE("generalized fidelity for subnormalized states") {
    auto a = makeState(Mat::diag({0.5, 0.3}), {2});
    auto b = makeState(Mat::diag({0.5, 0.3}), {2});
    // F = 0.8, sqrt((0.2)(0.2)) = 0.2
    CHECK(generalizedFidelity(a, b) == Approx(1.0).margin(1e-12));
    CHECK(purifiedDistance(a, b) <= 1e-6);
}

TEST_CASE("Schmidt spectra") {
    auto prod = makePure({1, 0, 0, 0}, {2, 2});
    auto s = schmidt(prod, {0});
    CHECK(s.amplitudes[0] == Approx(1.0));
    CHECK(s.amplitudes[1] == Approx(0.0).margin(1e-12));
    auto b = schmidt(bell(), {0});
    CHECK(b.amplitudes[0] == Approx(1 / std::sqrt(2.0)).margin(1e-12));
    CHECK(b.amplitudes[1] == Approx(1 / std::sqrt(2.0)).margin(1e-12));

    Rng rng(12);
    auto psi = randomPure({3, 3}, rng);
    Mat coeff(3, 3);
    for (std::size_t i = 0; i < 9; ++i) coeff(i / 3, i % 3) = psi.amplitudes[i];
    // independent oracle: square roots of eigenvalues of C C^dag
    auto w = eigvalsh(coeff * coeff.adjoint());
    auto sp = schmidt(psi, {0});
    for (std::size_t k = 0; k < 3; ++k) CHECK(sp.amplitudes[k] == Approx(std::sqrt(std::max(0.0, w[2 - k]))).margin(1e-9));

    // local unitary invariance
    Mat u = kron(randomUnitary(3, rng), randomUnitary(3, rng));
    PureState rotated{psi.dims, u * psi.amplitudes};
    auto sr = schmidt(rotated, {1});
    for (std::size_t k = 0; k < 3; ++k) CHECK(sr.amplitudes[k] == Approx(sp.amplitudes[k]).margin(1e-9));
    CHECK(codeOf([&] { schmidt(psi, {5}); }) == ErrorCode::BadCut);
}

TEST_CASE("purification round trip") {
    Rng rng(13);
    auto pure = toDensity(randomPure({2}, rng));
    CHECK(purify(pure).dims.back() == 1);
    auto pi = purify(maximallyMixed(2));
    CHECK(traceDistance(partialTrace(toDensity(pi), {0}), maximallyMixed(2)) <= 1e-9);
    for (int i = 0; i < 10; ++i) {
        auto r = randomDensity({2, 2}, rng, 1 + i % 4);
        auto psi = purify(r);
        auto back = partialTrace(toDensity(psi), {0, 1});
        CHECK((back.m - r.m).maxAbs() <= 1e-9);
    }
}

TEST_CASE("pinching") {
    Rng rng(14);
    auto r = randomDensity({3}, rng);
    CHECK((pinch(r, r).m - r.m).maxAbs() <= 1e-10);
    auto plus = makePure({1 / std::sqrt(2.0), 1 / std::sqrt(2.0)}, {2});
    auto out = pinch(toDensity(plus), basisState(2, 0));
    CHECK((out.m - maximallyMixed(2).m).maxAbs() <= 1e-12);
    for (int i = 0; i < 100; ++i) {
        auto a = randomDensity({3}, rng), b = randomDensity({3}, rng);
        auto p = pinch(a, b);
        CHECK(p.trace() == Approx(a.trace()).margin(1e-10));
        CHECK((p.m * b.m - b.m * p.m).maxAbs() <= 1e-9);
    }
}

TEST_CASE("channels") {
    Rng rng(15);
    auto r = randomDensity({3}, rng);
    CHECK((applyChannel(r, {Mat::identity(3)}).m - r.m).maxAbs() <= 1e-15);
    // preparation channel x -> rho^x applied to |x><x|
    auto target = randomDensity({2}, rng);
    auto e = eigh(target.m);
    std::vector<Mat> prep;
    for (std::size_t k = 0; k < 2; ++k)
        for (std::size_t x = 0; x < 2; ++x) {
            Mat kr(2, 2);
            for (std::size_t i = 0; i < 2; ++i) kr(i, x) = std::sqrt(std::max(0.0, e.values[k])) * e.vectors(i, k);
            prep.push_back(kr);
        }
    CHECK((applyChannel(basisState(2, 1), prep).m - target.m).maxAbs() <= 1e-12);
    for (int i = 0; i < 20; ++i) {
        auto ks = randomChannel(3, 2, 3, rng);
        CHECK(applyChannel(r, ks).trace() == Approx(1.0).margin(1e-9));
    }
    Mat bad = Mat::identity(2) * cplx(2.0);
    CHECK(codeOf([&] { applyChannel(maximallyMixed(2), {bad}); }) == ErrorCode::KrausNotTP);
}

TEST_CASE("perfect correlation") {
    auto one = perfectCorrelation({1.0});
    CHECK(one.dims == Dims{1, 1});
    CHECK(one.m(0, 0).real() == 1.0);
    auto two = perfectCorrelation({0.5, 0.5});
    CHECK(two.diagonal() == std::vector<double>{0.5, 0, 0, 0.5});
    auto p = std::vector<double>{0.2, 0.3, 0.5};
    auto chi = perfectCorrelation(p);
    CHECK(partialTrace(chi, {0}).diagonal() == p);
    CHECK(partialTrace(chi, {1}).diagonal() == p);
}

TEST_CASE("CQ assembly and separable reconstruction") {
    auto cq = makeCQ({0.5, 0.5}, {basisState(2, 0), basisState(2, 1)});
    auto s = cq.assemble();
    CHECK(s.dims == Dims{2, 2});
    CHECK(s.trace() == Approx(1.0));
    CHECK((cq.average().m - maximallyMixed(2).m).maxAbs() < 1e-15);
    auto sep = makeSeparable({0.5, 0.5}, {{basisState(2, 0), basisState(2, 1)}, {basisState(2, 0), basisState(2, 1)}});
    CHECK((sep.reconstruct().m - perfectCorrelation({0.5, 0.5}).m).maxAbs() < 1e-15);
}
