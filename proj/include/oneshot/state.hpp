#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "error.hpp"
#include "linalg.hpp"

namespace oneshot {

using Dims = std::vector<std::size_t>;

inline std::size_t dimProduct(const Dims& d) {
    return std::accumulate(d.begin(), d.end(), std::size_t{1}, std::multiplies<>());
}

constexpr double kStateTol = 1e-10;
constexpr std::size_t kMaxDim = 64;

// Possibly subnormalized density operator on a tensor product of subsystems.
struct DensityMatrix {
    Dims dims;
    Mat m;
    bool normalized = true;

    std::size_t dim() const { return m.rows(); }
    double trace() const { return m.trace().real(); }
    bool isClassical(double tol = 1e-12) const { return m.isDiagonal(tol); }
    std::vector<double> diagonal() const { return m.realDiagonal(); }
};

// Wraps an operator that is known to be valid (internal use).
inline DensityMatrix unchecked(Mat m, Dims dims) {
    DensityMatrix r;
    r.dims = std::move(dims);
    r.m = std::move(m);
    r.normalized = std::abs(r.trace() - 1.0) <= kStateTol;
    return r;
}

inline DensityMatrix makeState(const Mat& matrix, const Dims& dims) {
    if (!matrix.square() || matrix.rows() != dimProduct(dims) || dims.empty())
        fail(ErrorCode::DimMismatch, "matrix side does not match product of dims",
             {{"side", double(matrix.rows())}, {"expected", double(dimProduct(dims))}});
    for (auto d : dims)
        if (d == 0) fail(ErrorCode::DimMismatch, "zero subsystem dimension");
    if (matrix.rows() > kMaxDim)
        fail(ErrorCode::TooLarge, "total dimension exceeds 64", {{"dim", double(matrix.rows())}});
    double defect = matrix.hermitianDefect();
    if (defect > kStateTol * std::max(1.0, matrix.maxAbs()))
        fail(ErrorCode::NotHermitian, "matrix is not Hermitian", {{"defect", defect}});
    Mat h = matrix.hermitianPart();
    double lmin = eigvalsh(h).front();
    if (lmin < -kStateTol) fail(ErrorCode::NotPSD, "negative eigenvalue", {{"eigenvalue", lmin}});
    double tr = h.trace().real();
    if (tr > 1.0 + kStateTol || tr <= 0.0)
        fail(ErrorCode::TraceOutOfRange, "trace outside (0,1]", {{"trace", tr}});
    return unchecked(std::move(h), dims);
}

inline DensityMatrix classicalState(const std::vector<double>& probs, const Dims& dims) {
    if (probs.size() != dimProduct(dims)) fail(ErrorCode::DimMismatch, "probability vector length");
    Mat m(probs.size());
    for (std::size_t i = 0; i < probs.size(); ++i) m(i, i) = probs[i];
    return makeState(m, dims);
}

inline DensityMatrix maximallyMixed(std::size_t d) {
    return unchecked(Mat::identity(d) * cplx(1.0 / double(d)), {d});
}

inline DensityMatrix basisState(std::size_t d, std::size_t k) {
    Mat m(d);
    m(k, k) = 1.0;
    return unchecked(std::move(m), {d});
}

inline void requireSameShape(const DensityMatrix& a, const DensityMatrix& b) {
    if (a.dim() != b.dim()) fail(ErrorCode::DimMismatch, "operands have different dimensions");
}

inline DensityMatrix tensor(const DensityMatrix& a, const DensityMatrix& b) {
    Dims d = a.dims;
    d.insert(d.end(), b.dims.begin(), b.dims.end());
    if (dimProduct(d) > kMaxDim) fail(ErrorCode::TooLarge, "tensor product exceeds 64 dimensions");
    return unchecked(kron(a.m, b.m), std::move(d));
}

namespace detail {

// Multi-index digits of a flat index over dims (most significant first).
inline void unravel(std::size_t idx, const Dims& dims, std::vector<std::size_t>& out) {
    out.resize(dims.size());
    for (std::size_t k = dims.size(); k-- > 0;) {
        out[k] = idx % dims[k];
        idx /= dims[k];
    }
}

inline std::size_t ravel(const std::vector<std::size_t>& digits, const Dims& dims,
                         const std::vector<std::size_t>& which) {
    std::size_t idx = 0;
    for (auto k : which) idx = idx * dims[k] + digits[k];
    return idx;
}

inline std::vector<std::size_t> normalizeIndexSet(std::vector<std::size_t> s, std::size_t n) {
    std::sort(s.begin(), s.end());
    s.erase(std::unique(s.begin(), s.end()), s.end());
    for (auto k : s)
        if (k >= n) fail(ErrorCode::BadSubsystemIndex, "subsystem index out of range", {{"index", double(k)}});
    return s;
}

inline std::vector<std::size_t> complementOf(const std::vector<std::size_t>& s, std::size_t n) {
    std::vector<std::size_t> c;
    for (std::size_t k = 0; k < n; ++k)
        if (!std::binary_search(s.begin(), s.end(), k)) c.push_back(k);
    return c;
}

} // namespace detail

inline DensityMatrix partialTrace(const DensityMatrix& rho, std::vector<std::size_t> keep) {
    const std::size_t n = rho.dims.size();
    keep = detail::normalizeIndexSet(std::move(keep), n);
    auto traced = detail::complementOf(keep, n);
    Dims kd;
    for (auto k : keep) kd.push_back(rho.dims[k]);
    const std::size_t dk = dimProduct(kd);
    Mat out(dk);
    std::vector<std::size_t> di, dj;
    const std::size_t d = rho.dim();
    for (std::size_t i = 0; i < d; ++i) {
        detail::unravel(i, rho.dims, di);
        std::size_t ti = detail::ravel(di, rho.dims, traced);
        std::size_t ki = detail::ravel(di, rho.dims, keep);
        for (std::size_t j = 0; j < d; ++j) {
            detail::unravel(j, rho.dims, dj);
            if (detail::ravel(dj, rho.dims, traced) != ti) continue;
            out(ki, detail::ravel(dj, rho.dims, keep)) += rho.m(i, j);
        }
    }
    if (kd.empty()) kd.push_back(1);
    return unchecked(std::move(out), std::move(kd));
}

// Reorders subsystems: new subsystem k is old subsystem perm[k].
inline DensityMatrix permuteSubsystems(const DensityMatrix& rho, const std::vector<std::size_t>& perm) {
    const std::size_t n = rho.dims.size();
    if (perm.size() != n) fail(ErrorCode::BadSubsystemIndex, "permutation length");
    auto chk = detail::normalizeIndexSet(perm, n);
    if (chk.size() != n) fail(ErrorCode::BadSubsystemIndex, "not a permutation");
    Dims nd(n);
    for (std::size_t k = 0; k < n; ++k) nd[k] = rho.dims[perm[k]];
    Mat out(rho.dim());
    std::vector<std::size_t> di, dj;
    for (std::size_t i = 0; i < rho.dim(); ++i) {
        detail::unravel(i, rho.dims, di);
        std::size_t ni = detail::ravel(di, rho.dims, perm);
        for (std::size_t j = 0; j < rho.dim(); ++j) {
            detail::unravel(j, rho.dims, dj);
            out(ni, detail::ravel(dj, rho.dims, perm)) = rho.m(i, j);
        }
    }
    return unchecked(std::move(out), std::move(nd));
}

inline double traceDistance(const DensityMatrix& rho, const DensityMatrix& sigma) {
    requireSameShape(rho, sigma);
    return 0.5 * traceNormHermitian(rho.m - sigma.m);
}

// Root fidelity ||sqrt(rho) sqrt(sigma)||_1.
inline double fidelity(const DensityMatrix& rho, const DensityMatrix& sigma) {
    requireSameShape(rho, sigma);
    if (rho.isClassical(0) && sigma.isClassical(0)) {
        auto p = rho.diagonal(), q = sigma.diagonal();
        double f = 0;
        for (std::size_t i = 0; i < p.size(); ++i) f += std::sqrt(std::max(0.0, p[i]) * std::max(0.0, q[i]));
        return f;
    }
    // singular values of sqrt(rho) sqrt(sigma) avoid square roots of near-zero eigenvalues
    double f = 0;
    for (double x : singularValues(psdPower(rho.m, 0.5) * psdPower(sigma.m, 0.5))) f += x;
    return f;
}

inline double squaredFidelity(const DensityMatrix& rho, const DensityMatrix& sigma) {
    double f = fidelity(rho, sigma);
    return f * f;
}

inline double generalizedFidelity(const DensityMatrix& rho, const DensityMatrix& sigma) {
    double a = std::max(0.0, 1.0 - rho.trace()), b = std::max(0.0, 1.0 - sigma.trace());
    return fidelity(rho, sigma) + std::sqrt(a * b);
}

inline double purifiedDistance(const DensityMatrix& rho, const DensityMatrix& sigma) {
    double f = std::min(1.0, generalizedFidelity(rho, sigma));
    return std::sqrt(std::max(0.0, 1.0 - f * f));
}

struct PureState {
    Dims dims;
    std::vector<cplx> amplitudes;
};

inline PureState makePure(std::vector<cplx> amps, const Dims& dims) {
    if (amps.size() != dimProduct(dims)) fail(ErrorCode::DimMismatch, "amplitude count");
    double n2 = 0;
    for (auto& a : amps) n2 += std::norm(a);
    if (std::abs(std::sqrt(n2) - 1.0) > kStateTol) fail(ErrorCode::TraceOutOfRange, "pure state not unit norm", {{"norm", std::sqrt(n2)}});
    return {dims, std::move(amps)};
}

inline DensityMatrix toDensity(const PureState& psi) {
    return unchecked(Mat::outer(psi.amplitudes), psi.dims);
}

struct SchmidtSpectrum {
    std::vector<double> amplitudes; // nonincreasing, squared sum 1
};

inline SchmidtSpectrum makeSchmidt(std::vector<double> a) {
    for (double x : a)
        if (x < 0) fail(ErrorCode::NotPSD, "negative Schmidt amplitude", {{"amplitude", x}});
    std::sort(a.begin(), a.end(), std::greater<>());
    double s = 0;
    for (double x : a) s += x * x;
    if (std::abs(s - 1.0) > 1e-9) fail(ErrorCode::TraceOutOfRange, "squared amplitudes must sum to 1", {{"sum", s}});
    return {std::move(a)};
}

// Amplitude matrix with rows indexed by the cut subsystems.
inline Mat reshapeForCut(const PureState& psi, std::vector<std::size_t> cut) {
    const std::size_t n = psi.dims.size();
    for (auto k : cut)
        if (k >= n) fail(ErrorCode::BadCut, "cut index out of range", {{"index", double(k)}});
    cut = detail::normalizeIndexSet(std::move(cut), n);
    auto rest = detail::complementOf(cut, n);
    std::size_t r = 1, c = 1;
    for (auto k : cut) r *= psi.dims[k];
    for (auto k : rest) c *= psi.dims[k];
    Mat m(r, c);
    std::vector<std::size_t> dig;
    for (std::size_t i = 0; i < psi.amplitudes.size(); ++i) {
        detail::unravel(i, psi.dims, dig);
        m(detail::ravel(dig, psi.dims, cut), detail::ravel(dig, psi.dims, rest)) = psi.amplitudes[i];
    }
    return m;
}

inline SchmidtSpectrum schmidt(const PureState& psi, const std::vector<std::size_t>& cut) {
    Mat m = reshapeForCut(psi, cut);
    auto s = singularValues(m);
    double n2 = 0;
    for (double x : s) n2 += x * x;
    for (double& x : s) x /= std::sqrt(n2);
    return {s};
}

inline std::size_t schmidtRank(const SchmidtSpectrum& s, double tol = 1e-9) {
    std::size_t r = 0;
    for (double x : s.amplitudes)
        if (x > tol) ++r;
    return r;
}

// Canonical eigen-purification on dims + [rank].
inline PureState purify(const DensityMatrix& rho) {
    Eigh e = eigh(rho.m);
    double cut = supportCutoff(e.values);
    std::vector<std::size_t> keep;
    for (std::size_t k = e.values.size(); k-- > 0;)
        if (e.values[k] > cut) keep.push_back(k);
    const std::size_t d = rho.dim(), r = keep.size();
    std::vector<cplx> amps(d * r);
    for (std::size_t j = 0; j < r; ++j) {
        double s = std::sqrt(e.values[keep[j]]);
        for (std::size_t i = 0; i < d; ++i) amps[i * r + j] = s * e.vectors(i, keep[j]);
    }
    Dims dims = rho.dims;
    dims.push_back(r);
    return {dims, amps};
}

// Eigenprojectors of h with eigenvalues grouped within tolerance.
inline std::vector<Mat> eigenProjectors(const Mat& h, double tol = 1e-9) {
    Eigh e = eigh(h);
    const std::size_t n = e.values.size();
    double scale = std::max(1.0, std::abs(e.values.empty() ? 0.0 : e.values.back()));
    std::vector<Mat> out;
    std::size_t k = 0;
    while (k < n) {
        std::size_t j = k;
        while (j + 1 < n && e.values[j + 1] - e.values[k] <= tol * scale) ++j;
        Mat p(n);
        for (std::size_t t = k; t <= j; ++t)
            for (std::size_t a = 0; a < n; ++a)
                for (std::size_t b = 0; b < n; ++b) p(a, b) += e.vectors(a, t) * std::conj(e.vectors(b, t));
        out.push_back(std::move(p));
        k = j + 1;
    }
    return out;
}

inline std::size_t distinctEigenvalues(const DensityMatrix& rho, double tol = 1e-9) {
    return eigenProjectors(rho.m, tol).size();
}

inline DensityMatrix pinch(const DensityMatrix& rho, const DensityMatrix& basisOf) {
    requireSameShape(rho, basisOf);
    Mat out(rho.dim());
    for (auto& p : eigenProjectors(basisOf.m)) out += p * rho.m * p;
    return unchecked(out.hermitianPart(), rho.dims);
}

inline DensityMatrix applyChannel(const DensityMatrix& rho, const std::vector<Mat>& kraus,
                                  Dims outDims = {}, bool traceNonIncreasing = false) {
    if (kraus.empty()) fail(ErrorCode::KrausNotTP, "empty Kraus list");
    const std::size_t din = rho.dim(), dout = kraus.front().rows();
    Mat sum(din);
    for (auto& k : kraus) {
        if (k.cols() != din || k.rows() != dout) fail(ErrorCode::DimMismatch, "Kraus operator shape");
        sum += k.adjoint() * k;
    }
    Mat diff = sum - Mat::identity(din);
    if (traceNonIncreasing) {
        if (eigvalsh(diff).back() > 1e-9) fail(ErrorCode::KrausNotTP, "sum K^dag K exceeds identity");
    } else if (diff.maxAbs() > 1e-9) {
        fail(ErrorCode::KrausNotTP, "sum K^dag K differs from identity", {{"defect", diff.maxAbs()}});
    }
    Mat out(dout);
    for (auto& k : kraus) out += k * rho.m * k.adjoint();
    if (outDims.empty()) outDims = (dout == din) ? rho.dims : Dims{dout};
    if (dimProduct(outDims) != dout) fail(ErrorCode::DimMismatch, "output dims");
    return unchecked(out.hermitianPart(), std::move(outDims));
}

// Applies a channel on one subsystem of a multipartite state.
inline DensityMatrix applyLocalChannel(const DensityMatrix& rho, std::size_t party, const std::vector<Mat>& kraus) {
    if (party >= rho.dims.size()) fail(ErrorCode::BadSubsystemIndex, "party index");
    std::size_t before = 1, after = 1;
    for (std::size_t k = 0; k < party; ++k) before *= rho.dims[k];
    for (std::size_t k = party + 1; k < rho.dims.size(); ++k) after *= rho.dims[k];
    std::vector<Mat> lifted;
    for (auto& k : kraus) lifted.push_back(kron(kron(Mat::identity(before), k), Mat::identity(after)));
    Dims nd = rho.dims;
    nd[party] = kraus.front().rows();
    return applyChannel(rho, lifted, nd);
}

inline DensityMatrix perfectCorrelation(const std::vector<double>& p) {
    const std::size_t n = p.size();
    Mat m(n * n);
    for (std::size_t x = 0; x < n; ++x) m(x * n + x, x * n + x) = p[x];
    return makeState(m, {n, n});
}

// Classical register X (first subsystem) with conditional states.
struct CQState {
    std::vector<double> probs;
    std::vector<DensityMatrix> conditionals;

    const Dims& innerDims() const { return conditionals.front().dims; }

    DensityMatrix assemble() const {
        const std::size_t nx = probs.size(), d = conditionals.front().dim();
        Mat m(nx * d);
        for (std::size_t x = 0; x < nx; ++x)
            for (std::size_t i = 0; i < d; ++i)
                for (std::size_t j = 0; j < d; ++j) m(x * d + i, x * d + j) = probs[x] * conditionals[x].m(i, j);
        Dims dims{nx};
        dims.insert(dims.end(), innerDims().begin(), innerDims().end());
        return unchecked(std::move(m), std::move(dims));
    }

    DensityMatrix average() const {
        Mat m(conditionals.front().dim());
        for (std::size_t x = 0; x < probs.size(); ++x) m += conditionals[x].m * cplx(probs[x]);
        return unchecked(std::move(m), innerDims());
    }
};

inline CQState makeCQ(std::vector<double> probs, std::vector<DensityMatrix> conds) {
    if (probs.empty() || probs.size() != conds.size()) fail(ErrorCode::DimMismatch, "one conditional per symbol required");
    double s = 0;
    for (double p : probs) {
        if (p < 0) fail(ErrorCode::NotPSD, "negative probability", {{"eigenvalue", p}});
        s += p;
    }
    if (s > 1 + kStateTol) fail(ErrorCode::TraceOutOfRange, "probabilities sum above 1", {{"trace", s}});
    for (auto& c : conds)
        if (c.dims != conds.front().dims) fail(ErrorCode::DimMismatch, "conditionals must share dims");
    CQState cq{std::move(probs), std::move(conds)};
    if (cq.conditionals.front().dim() * cq.probs.size() > kMaxDim) fail(ErrorCode::TooLarge, "assembled CQ state exceeds 64 dimensions");
    return cq;
}

// Σ_x p(x) ⊗_i ρ_i^x for m parties.
struct SeparableDecomposition {
    std::vector<double> probs;
    std::vector<std::vector<DensityMatrix>> parties; // parties[i][x]

    std::size_t size() const { return probs.size(); }
    std::size_t partyCount() const { return parties.size(); }

    Dims dims() const {
        Dims d;
        for (auto& p : parties) d.push_back(p.front().dim());
        return d;
    }

    Mat component(std::size_t x) const {
        Mat m = parties[0][x].m;
        for (std::size_t i = 1; i < parties.size(); ++i) m = kron(m, parties[i][x].m);
        return m;
    }

    DensityMatrix reconstruct() const {
        Mat m(dimProduct(dims()));
        for (std::size_t x = 0; x < probs.size(); ++x) m += component(x) * cplx(probs[x]);
        return unchecked(std::move(m), dims());
    }
};

inline SeparableDecomposition makeSeparable(std::vector<double> probs, std::vector<std::vector<DensityMatrix>> parties) {
    if (parties.size() < 1) fail(ErrorCode::DimMismatch, "at least one party required");
    for (auto& p : parties) {
        if (p.size() != probs.size()) fail(ErrorCode::DimMismatch, "one conditional per symbol and party");
        for (auto& c : p) {
            if (c.dims.size() != 1 && dimProduct(c.dims) != c.dim()) fail(ErrorCode::DimMismatch, "conditional dims");
            if (!c.normalized) fail(ErrorCode::TraceOutOfRange, "conditionals must be normalized", {{"trace", c.trace()}});
            if (c.dim() != p.front().dim()) fail(ErrorCode::DimMismatch, "conditionals of a party must share dims");
        }
    }
    double s = 0;
    for (double p : probs) {
        if (p < 0) fail(ErrorCode::NotPSD, "negative probability", {{"eigenvalue", p}});
        s += p;
    }
    if (std::abs(s - 1.0) > 1e-9) fail(ErrorCode::TraceOutOfRange, "decomposition weights must sum to 1", {{"trace", s}});
    SeparableDecomposition d{std::move(probs), std::move(parties)};
    if (dimProduct(d.dims()) > kMaxDim) fail(ErrorCode::TooLarge, "target exceeds 64 dimensions");
    return d;
}

} // namespace oneshot
