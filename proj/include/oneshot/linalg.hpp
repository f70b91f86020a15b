#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <numeric>
#include <vector>

#include "error.hpp"

namespace oneshot {

using cplx = std::complex<double>;

// Dense row-major complex matrix.
class Mat {
public:
    Mat() = default;
    Mat(std::size_t r, std::size_t c) : r_(r), c_(c), a_(r * c) {}
    explicit Mat(std::size_t n) : Mat(n, n) {}

    static Mat identity(std::size_t n) {
        Mat m(n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }
    static Mat diag(const std::vector<double>& d) {
        Mat m(d.size());
        for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
        return m;
    }
    static Mat outer(const std::vector<cplx>& v) {
        Mat m(v.size());
        for (std::size_t i = 0; i < v.size(); ++i)
            for (std::size_t j = 0; j < v.size(); ++j) m(i, j) = v[i] * std::conj(v[j]);
        return m;
    }

    std::size_t rows() const { return r_; }
    std::size_t cols() const { return c_; }
    bool square() const { return r_ == c_; }

    cplx& operator()(std::size_t i, std::size_t j) { return a_[i * c_ + j]; }
    const cplx& operator()(std::size_t i, std::size_t j) const { return a_[i * c_ + j]; }
    std::vector<cplx>& data() { return a_; }
    const std::vector<cplx>& data() const { return a_; }

    Mat& operator+=(const Mat& o) {
        for (std::size_t i = 0; i < a_.size(); ++i) a_[i] += o.a_[i];
        return *this;
    }
    Mat& operator-=(const Mat& o) {
        for (std::size_t i = 0; i < a_.size(); ++i) a_[i] -= o.a_[i];
        return *this;
    }
    Mat& operator*=(cplx s) {
        for (auto& x : a_) x *= s;
        return *this;
    }

    Mat adjoint() const {
        Mat m(c_, r_);
        for (std::size_t i = 0; i < r_; ++i)
            for (std::size_t j = 0; j < c_; ++j) m(j, i) = std::conj((*this)(i, j));
        return m;
    }

    cplx trace() const {
        cplx t = 0;
        for (std::size_t i = 0; i < std::min(r_, c_); ++i) t += (*this)(i, i);
        return t;
    }

    double maxAbs() const {
        double m = 0;
        for (auto& x : a_) m = std::max(m, std::abs(x));
        return m;
    }

    double frobenius() const {
        double s = 0;
        for (auto& x : a_) s += std::norm(x);
        return std::sqrt(s);
    }

    bool isDiagonal(double tol = 0.0) const {
        for (std::size_t i = 0; i < r_; ++i)
            for (std::size_t j = 0; j < c_; ++j)
                if (i != j && std::abs((*this)(i, j)) > tol) return false;
        return true;
    }

    std::vector<double> realDiagonal() const {
        std::vector<double> d(std::min(r_, c_));
        for (std::size_t i = 0; i < d.size(); ++i) d[i] = (*this)(i, i).real();
        return d;
    }

    double hermitianDefect() const {
        double m = 0;
        for (std::size_t i = 0; i < r_; ++i)
            for (std::size_t j = i; j < c_; ++j)
                m = std::max(m, std::abs((*this)(i, j) - std::conj((*this)(j, i))));
        return m;
    }

    Mat hermitianPart() const {
        Mat m(r_, c_);
        for (std::size_t i = 0; i < r_; ++i)
            for (std::size_t j = 0; j < c_; ++j)
                m(i, j) = 0.5 * ((*this)(i, j) + std::conj((*this)(j, i)));
        return m;
    }

private:
    std::size_t r_ = 0, c_ = 0;
    std::vector<cplx> a_;
};

inline Mat operator+(Mat a, const Mat& b) { return a += b; }
inline Mat operator-(Mat a, const Mat& b) { return a -= b; }
inline Mat operator*(Mat a, cplx s) { return a *= s; }
inline Mat operator*(cplx s, Mat a) { return a *= s; }

inline Mat operator*(const Mat& a, const Mat& b) {
    if (a.cols() != b.rows()) fail(ErrorCode::DimMismatch, "matrix product shape");
    Mat c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t k = 0; k < a.cols(); ++k) {
            cplx aik = a(i, k);
            if (aik == cplx(0)) continue;
            for (std::size_t j = 0; j < b.cols(); ++j) c(i, j) += aik * b(k, j);
        }
    return c;
}

inline std::vector<cplx> operator*(const Mat& a, const std::vector<cplx>& v) {
    std::vector<cplx> out(a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) out[i] += a(i, j) * v[j];
    return out;
}

inline Mat kron(const Mat& a, const Mat& b) {
    Mat c(a.rows() * b.rows(), a.cols() * b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) {
            cplx aij = a(i, j);
            if (aij == cplx(0)) continue;
            for (std::size_t k = 0; k < b.rows(); ++k)
                for (std::size_t l = 0; l < b.cols(); ++l)
                    c(i * b.rows() + k, j * b.cols() + l) = aij * b(k, l);
        }
    return c;
}

// Re Tr[A B] for Hermitian A, B.
inline double traceProductRe(const Mat& a, const Mat& b) {
    double s = 0;
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t k = 0; k < a.cols(); ++k) s += (a(i, k) * b(k, i)).real();
    return s;
}

struct Eigh {
    std::vector<double> values; // ascending
    Mat vectors;                // columns are eigenvectors
};

// Cyclic Jacobi eigendecomposition of a Hermitian matrix.
inline Eigh eigh(const Mat& h, double tol = 1e-12) {
    const std::size_t n = h.rows();
    if (!h.square()) fail(ErrorCode::DimMismatch, "eigh needs a square matrix");
    Mat a = h.hermitianPart();
    Mat v = Mat::identity(n);
    double scale = std::max(a.frobenius(), 1e-300);

    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) off += std::norm(a(p, q));
        if (std::sqrt(2 * off) <= tol * scale) break;

        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                cplx apq = a(p, q);
                double r = std::abs(apq);
                if (r <= 1e-300 || r <= 1e-18 * scale) continue;
                cplx ph = apq / r; // e^{i phi}
                double app = a(p, p).real(), aqq = a(q, q).real();
                double theta = 0.5 * std::atan2(2 * r, aqq - app);
                double c = std::cos(theta), s = std::sin(theta);
                cplx upp = c, upq = s, uqp = -s * std::conj(ph), uqq = c * std::conj(ph);

                for (std::size_t k = 0; k < n; ++k) {
                    cplx akp = a(k, p), akq = a(k, q);
                    a(k, p) = akp * upp + akq * uqp;
                    a(k, q) = akp * upq + akq * uqq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    cplx apk = a(p, k), aqk = a(q, k);
                    a(p, k) = std::conj(upp) * apk + std::conj(uqp) * aqk;
                    a(q, k) = std::conj(upq) * apk + std::conj(uqq) * aqk;
                }
                a(p, q) = 0;
                a(q, p) = 0;
                a(p, p) = a(p, p).real();
                a(q, q) = a(q, q).real();
                for (std::size_t k = 0; k < n; ++k) {
                    cplx vkp = v(k, p), vkq = v(k, q);
                    v(k, p) = vkp * upp + vkq * uqp;
                    v(k, q) = vkp * upq + vkq * uqq;
                }
            }
        }
    }

    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::size_t i, std::size_t j) { return a(i, i).real() < a(j, j).real(); });
    Eigh out;
    out.values.resize(n);
    out.vectors = Mat(n);
    for (std::size_t k = 0; k < n; ++k) {
        out.values[k] = a(idx[k], idx[k]).real();
        for (std::size_t i = 0; i < n; ++i) out.vectors(i, k) = v(i, idx[k]);
    }
    return out;
}

inline std::vector<double> eigvalsh(const Mat& h) {
    if (h.isDiagonal()) {
        auto d = h.realDiagonal();
        std::sort(d.begin(), d.end());
        return d;
    }
    return eigh(h).values;
}

// Eigenvalues with |λ| below this are treated as zero.
inline double supportCutoff(const std::vector<double>& w) {
    double m = 0;
    for (double x : w) m = std::max(m, std::abs(x));
    return 1e-12 * m;
}

// V f(Λ) V† from a precomputed decomposition.
inline Mat applyFunction(const Eigh& e, const std::function<double(double)>& f) {
    const std::size_t n = e.values.size();
    std::vector<double> fw(n);
    for (std::size_t k = 0; k < n; ++k) fw[k] = f(e.values[k]);
    Mat out(n);
    for (std::size_t k = 0; k < n; ++k) {
        if (fw[k] == 0.0) continue;
        for (std::size_t i = 0; i < n; ++i) {
            cplx vik = e.vectors(i, k) * fw[k];
            for (std::size_t j = 0; j < n; ++j) out(i, j) += vik * std::conj(e.vectors(j, k));
        }
    }
    return out;
}

inline Mat matrixFunction(const Mat& h, const std::function<double(double)>& f) {
    return applyFunction(eigh(h), f);
}

// H^p on the support of a PSD matrix (pseudo-power for p < 0).
inline Mat psdPower(const Mat& h, double p) {
    Eigh e = eigh(h);
    double cut = supportCutoff(e.values);
    return applyFunction(e, [&](double x) { return x > cut ? std::pow(x, p) : 0.0; });
}

inline Mat supportProjector(const Mat& h) {
    Eigh e = eigh(h);
    double cut = supportCutoff(e.values);
    return applyFunction(e, [&](double x) { return x > cut ? 1.0 : 0.0; });
}

inline double traceNormHermitian(const Mat& h) {
    double s = 0;
    for (double x : eigvalsh(h)) s += std::abs(x);
    return s;
}

// Singular values (descending) through the Hermitian dilation [[0,M],[M†,0]].
inline std::vector<double> singularValues(const Mat& m) {
    const std::size_t r = m.rows(), c = m.cols();
    Mat d(r + c);
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) {
            d(i, r + j) = m(i, j);
            d(r + j, i) = std::conj(m(i, j));
        }
    auto w = eigvalsh(d);
    std::sort(w.begin(), w.end(), std::greater<>());
    std::vector<double> s(std::min(r, c));
    for (std::size_t k = 0; k < s.size(); ++k) s[k] = std::max(0.0, w[k]);
    return s;
}

inline double traceNorm(const Mat& m) {
    if (m.square() && m.hermitianDefect() < 1e-14) return traceNormHermitian(m);
    double s = 0;
    for (double x : singularValues(m)) s += x;
    return s;
}

inline double operatorNorm(const Mat& m) {
    auto s = singularValues(m);
    return s.empty() ? 0.0 : s.front();
}

// Solve A x = b for a dense real system by partial-pivot elimination.
inline std::vector<double> luSolve(std::vector<double> a, std::vector<double> b) {
    const std::size_t n = b.size();
    for (std::size_t k = 0; k < n; ++k) {
        std::size_t piv = k;
        for (std::size_t i = k + 1; i < n; ++i)
            if (std::abs(a[i * n + k]) > std::abs(a[piv * n + k])) piv = i;
        if (std::abs(a[piv * n + k]) < 1e-300) fail(ErrorCode::NotConverged, "singular linear system");
        if (piv != k) {
            for (std::size_t j = 0; j < n; ++j) std::swap(a[k * n + j], a[piv * n + j]);
            std::swap(b[k], b[piv]);
        }
        for (std::size_t i = k + 1; i < n; ++i) {
            double f = a[i * n + k] / a[k * n + k];
            if (f == 0.0) continue;
            for (std::size_t j = k; j < n; ++j) a[i * n + j] -= f * a[k * n + j];
            b[i] -= f * b[k];
        }
    }
    std::vector<double> x(n);
    for (std::size_t i = n; i-- > 0;) {
        double s = b[i];
        for (std::size_t j = i + 1; j < n; ++j) s -= a[i * n + j] * x[j];
        x[i] = s / a[i * n + i];
    }
    return x;
}

// Cholesky test for positive definiteness of a Hermitian matrix.
inline bool isPositiveDefinite(const Mat& h) {
    const std::size_t n = h.rows();
    Mat l(n);
    for (std::size_t j = 0; j < n; ++j) {
        double d = h(j, j).real();
        for (std::size_t k = 0; k < j; ++k) d -= std::norm(l(j, k));
        if (!(d > 0)) return false;
        double ljj = std::sqrt(d);
        l(j, j) = ljj;
        for (std::size_t i = j + 1; i < n; ++i) {
            cplx s = h(i, j);
            for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * std::conj(l(j, k));
            l(i, j) = s / ljj;
        }
    }
    return true;
}

// Inverse of a Hermitian positive definite matrix.
inline Mat inversePD(const Mat& h) {
    return matrixFunction(h, [](double x) { return 1.0 / x; });
}

} // namespace oneshot
