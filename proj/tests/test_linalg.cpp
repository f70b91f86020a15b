#include "catch_amalgamated.hpp"

#include <oneshot/linalg.hpp>
#include <oneshot/random.hpp>

using namespace oneshot;
using Catch::Approx;

namespace {

Mat randomHermitian(std::size_t d, Rng& rng) {
    Mat g = ginibre(d, d, rng);
    return (g + g.adjoint()) * cplx(0.5);
}

double maxDiff(const Mat& a, const Mat& b) { return (a - b).maxAbs(); }

} // namespace

TEST_CASE("eigendecomposition reconstructs random Hermitian matrices") {
    Rng rng(11);
    for (std::size_t d : {1u, 2u, 3u, 5u, 8u, 16u, 33u}) {
        Mat h = randomHermitian(d, rng);
        Eigh e = eigh(h);
        Mat rec = applyFunction(e, [](double x) { return x; });
        CHECK(maxDiff(rec, h) <= 1e-9);
        for (std::size_t k = 1; k < d; ++k) CHECK(e.values[k - 1] <= e.values[k]);
        Mat vv = e.vectors.adjoint() * e.vectors;
        CHECK(maxDiff(vv, Mat::identity(d)) <= 1e-10);
    }
}

TEST_CASE("eigenvalues of a known 2x2 complex Hermitian matrix") {
    Mat h(2);
    h(0, 0) = 2;
    h(1, 1) = -1;
    h(0, 1) = cplx(1, 1);
    h(1, 0) = cplx(1, -1);
    auto w = eigvalsh(h);
    // trace 1, det -2-2 = -4: roots (1 ± sqrt(17))/2
    CHECK(w[0] == Approx((1 - std::sqrt(17.0)) / 2).margin(1e-12));
    CHECK(w[1] == Approx((1 + std::sqrt(17.0)) / 2).margin(1e-12));
}

TEST_CASE("degenerate spectra converge") {
    Rng rng(3);
    Mat u = randomUnitary(6, rng);
    Mat d = Mat::diag({1, 1, 1, 0.5, 0.5, 0});
    Mat h = u * d * u.adjoint();
    auto w = eigvalsh(h);
    CHECK(w[0] == Approx(0).margin(1e-12));
    CHECK(w[5] == Approx(1).margin(1e-12));
}

TEST_CASE("singular values match a hand-built factorization") {
    Rng rng(5);
    Mat u = randomUnitary(3, rng), v = randomUnitary(2, rng);
    Mat s(3, 2);
    s(0, 0) = 2.5;
    s(1, 1) = 0.25;
    Mat m = u * s * v.adjoint();
    auto sv = singularValues(m);
    REQUIRE(sv.size() == 2);
    CHECK(sv[0] == Approx(2.5).margin(1e-12));
    CHECK(sv[1] == Approx(0.25).margin(1e-12));
    CHECK(traceNorm(m) == Approx(2.75).margin(1e-12));
}

TEST_CASE("dense linear solve") {
    std::vector<double> a{4, 1, 0, 1, 3, 1, 0, 1, 2};
    auto x = luSolve(a, {1, 2, 3});
    CHECK(4 * x[0] + x[1] == Approx(1));
    CHECK(x[0] + 3 * x[1] + x[2] == Approx(2));
    CHECK(x[1] + 2 * x[2] == Approx(3));
}

TEST_CASE("kron and psd powers") {
    Mat a = Mat::diag({1, 4});
    Mat b = Mat::diag({9, 16});
    Mat k = kron(a, b);
    CHECK(k(3, 3).real() == Approx(64));
    Mat r = psdPower(k, 0.5);
    CHECK(r(3, 3).real() == Approx(8));
    Mat z = psdPower(Mat::diag({4, 0}), -0.5);
    CHECK(z(0, 0).real() == Approx(0.5));
    CHECK(std::abs(z(1, 1)) == 0.0);
    CHECK(isPositiveDefinite(Mat::diag({1, 2})));
    CHECK_FALSE(isPositiveDefinite(Mat::diag({1, 0})));
}
