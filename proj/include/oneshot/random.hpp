#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

#include "state.hpp"

namespace oneshot {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Counter-derived stream seed so trial i is reproducible independent of scheduling.
inline std::uint64_t streamSeed(std::uint64_t seed, std::uint64_t counter) {
    return splitmix64(seed ^ splitmix64(counter + 0x632be59bd9b4e019ULL));
}

// Platform-stable generator: mt19937_64 plus hand-rolled distributions.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : eng_(splitmix64(seed)) {}

    std::uint64_t next() { return eng_(); }
    double uniform() { return double(eng_() >> 11) * 0x1.0p-53; }
    double normal() {
        if (haveSpare_) {
            haveSpare_ = false;
            return spare_;
        }
        double u1 = uniform(), u2 = uniform();
        if (u1 < 1e-300) u1 = 1e-300;
        double r = std::sqrt(-2 * std::log(u1)), t = 2 * std::numbers::pi * u2;
        spare_ = r * std::sin(t);
        haveSpare_ = true;
        return r * std::cos(t);
    }
    std::size_t below(std::size_t n) { return std::size_t(uniform() * double(n)) % n; }

private:
    std::mt19937_64 eng_;
    bool haveSpare_ = false;
    double spare_ = 0;
};

inline Mat ginibre(std::size_t r, std::size_t c, Rng& rng) {
    Mat g(r, c);
    for (auto& x : g.data()) x = cplx(rng.normal(), rng.normal());
    return g;
}

inline std::vector<double> randomProbs(std::size_t n, Rng& rng) {
    std::vector<double> p(n);
    double s = 0;
    for (auto& x : p) {
        x = -std::log(std::max(rng.uniform(), 1e-300));
        s += x;
    }
    for (auto& x : p) x /= s;
    return p;
}

inline DensityMatrix randomDensity(const Dims& dims, Rng& rng, std::size_t rank = 0) {
    const std::size_t d = dimProduct(dims);
    if (rank == 0) rank = d;
    Mat g = ginibre(d, rank, rng);
    Mat m = g * g.adjoint();
    m *= cplx(1.0 / m.trace().real());
    return unchecked(m.hermitianPart(), dims);
}

inline DensityMatrix randomClassical(const Dims& dims, Rng& rng) {
    return unchecked(Mat::diag(randomProbs(dimProduct(dims), rng)), dims);
}

inline PureState randomPure(const Dims& dims, Rng& rng) {
    std::vector<cplx> a(dimProduct(dims));
    double n2 = 0;
    for (auto& x : a) {
        x = cplx(rng.normal(), rng.normal());
        n2 += std::norm(x);
    }
    for (auto& x : a) x /= std::sqrt(n2);
    return {dims, a};
}

// Haar unitary via Gram-Schmidt on a Ginibre matrix.
inline Mat randomUnitary(std::size_t d, Rng& rng) {
    Mat g = ginibre(d, d, rng);
    for (std::size_t j = 0; j < d; ++j) {
        for (std::size_t k = 0; k < j; ++k) {
            cplx dot = 0;
            for (std::size_t i = 0; i < d; ++i) dot += std::conj(g(i, k)) * g(i, j);
            for (std::size_t i = 0; i < d; ++i) g(i, j) -= dot * g(i, k);
        }
        double n = 0;
        for (std::size_t i = 0; i < d; ++i) n += std::norm(g(i, j));
        n = std::sqrt(n);
        for (std::size_t i = 0; i < d; ++i) g(i, j) /= n;
    }
    return g;
}

// Kraus operators of a random CPTP map from a Stinespring isometry.
inline std::vector<Mat> randomChannel(std::size_t din, std::size_t dout, std::size_t nKraus, Rng& rng) {
    nKraus = std::max(nKraus, (din + dout - 1) / dout);
    const std::size_t big = dout * nKraus;
    Mat u = randomUnitary(big, rng);
    std::vector<Mat> ks(nKraus, Mat(dout, din));
    for (std::size_t k = 0; k < nKraus; ++k)
        for (std::size_t i = 0; i < dout; ++i)
            for (std::size_t j = 0; j < din; ++j) ks[k](i, j) = u(k * dout + i, j);
    return ks;
}

// Classical channel (stochastic matrix) as Kraus operators sqrt(W(b|a)) |b><a|.
inline std::vector<Mat> classicalChannelKraus(const std::vector<std::vector<double>>& w) {
    const std::size_t din = w.size(), dout = w.front().size();
    std::vector<Mat> ks;
    for (std::size_t a = 0; a < din; ++a)
        for (std::size_t b = 0; b < dout; ++b) {
            if (w[a][b] <= 0) continue;
            Mat k(dout, din);
            k(b, a) = std::sqrt(w[a][b]);
            ks.push_back(std::move(k));
        }
    return ks;
}

inline std::vector<std::vector<double>> randomStochastic(std::size_t din, std::size_t dout, Rng& rng) {
    std::vector<std::vector<double>> w(din);
    for (auto& row : w) row = randomProbs(dout, rng);
    return w;
}

} // namespace oneshot
