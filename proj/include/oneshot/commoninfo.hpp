#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <optional>
#include <vector>

#include "entropies.hpp"
#include "mutualinfo.hpp"
#include "random.hpp"
#include "solver.hpp"
#include "state.hpp"

namespace oneshot {

// Classical seed X with product conditionals: Σ_x p(x) ⊗_i ρ_i^x.
struct MarkovExtension {
    std::vector<double> seed;
    std::vector<std::vector<DensityMatrix>> partyConditionals; // [party][x]
    bool classicalFlag = false;

    std::size_t size() const { return seed.size(); }
    std::size_t partyCount() const { return partyConditionals.size(); }

    Dims dims() const {
        Dims d;
        for (auto& p : partyConditionals) d.push_back(p.front().dim());
        return d;
    }

    Mat component(std::size_t x) const {
        Mat m = partyConditionals[0][x].m;
        for (std::size_t i = 1; i < partyConditionals.size(); ++i) m = kron(m, partyConditionals[i][x].m);
        return m;
    }

    DensityMatrix reconstruct() const {
        Mat m(dimProduct(dims()));
        for (std::size_t x = 0; x < seed.size(); ++x) m += component(x) * cplx(seed[x]);
        return unchecked(std::move(m), dims());
    }

    // X first, then the parties.
    CQState withSeed() const {
        std::vector<DensityMatrix> conds;
        for (std::size_t x = 0; x < seed.size(); ++x) conds.push_back(unchecked(component(x), dims()));
        return CQState{seed, std::move(conds)};
    }
};

enum class Certification { Exact, LocalSearchUpperBound };

inline const char* certificationName(Certification c) {
    return c == Certification::Exact ? "exact" : "localSearchUpperBound";
}

struct CommonInfoResult {
    double valueBits = 0;
    MarkovExtension extension;
    Certification certified = Certification::LocalSearchUpperBound;
    double residualMarginalError = 0;     // trace distance of the reconstruction to the state it extends
    std::optional<double> ballDistance;   // smoothed variants: purified distance of that state to the target
};

// A classical joint state, or any state together with a separable decomposition of it.
struct CommonInfoTarget {
    DensityMatrix state;
    std::optional<SeparableDecomposition> decomposition;
};

inline CommonInfoTarget classicalTarget(const DensityMatrix& rho) { return {rho, std::nullopt}; }
inline CommonInfoTarget separableTarget(const SeparableDecomposition& d) { return {d.reconstruct(), d}; }

struct CommonInfoConfig {
    SearchConfig search;
    double tolerance = 1e-6;     // allowed reconstruction error
    int gridResolution = 40;     // simplex grid stride 1/gridResolution per party
    std::size_t maxAtoms = 40000;
    int pricingRounds = 30;
};

enum class SmoothingVariant { BallFirst, ExtensionFirst };

namespace detail {

using Atom = std::vector<Mat>; // one state per party

struct Prepared {
    DensityMatrix rho;
    Dims dims;
    bool classical = false;
    std::vector<double> p;               // diagonal, classical only
    std::vector<std::size_t> rows;       // classical: support indices used as constraints
    std::vector<double> b;               // constraint right-hand side
    std::vector<Atom> seedAtoms;         // atoms of the canonical extension
    std::vector<double> seedWeights;
};

inline std::vector<double> kronVec(const std::vector<std::vector<double>>& parts) {
    std::vector<double> v{1.0};
    for (auto& q : parts) {
        std::vector<double> n;
        n.reserve(v.size() * q.size());
        for (double a : v)
            for (double c : q) n.push_back(a * c);
        v = std::move(n);
    }
    return v;
}

inline Mat kronAtom(const Atom& a) {
    Mat m = a[0];
    for (std::size_t i = 1; i < a.size(); ++i) m = kron(m, a[i]);
    return m;
}

inline std::vector<std::vector<double>> atomDiagonals(const Atom& a) {
    std::vector<std::vector<double>> d;
    for (auto& m : a) d.push_back(m.realDiagonal());
    return d;
}

inline Atom diagAtom(const std::vector<std::vector<double>>& parts) {
    Atom a;
    for (auto& q : parts) a.push_back(Mat::diag(q));
    return a;
}

// Point mass on the joint basis index idx.
inline Atom pointAtom(std::size_t idx, const Dims& dims) {
    std::vector<std::size_t> digits;
    unravel(idx, dims, digits);
    std::vector<std::vector<double>> parts;
    for (std::size_t i = 0; i < dims.size(); ++i) {
        std::vector<double> q(dims[i], 0.0);
        q[digits[i]] = 1.0;
        parts.push_back(q);
    }
    return diagAtom(parts);
}

inline Prepared prepare(const CommonInfoTarget& t, double tol) {
    Prepared pr;
    pr.rho = t.state;
    pr.dims = t.state.dims;
    if (!t.state.normalized) fail(ErrorCode::TraceOutOfRange, "target must be normalized", {{"trace", t.state.trace()}});
    pr.classical = t.state.isClassical(1e-12);
    if (pr.classical) {
        pr.p = t.state.diagonal();
        for (std::size_t i = 0; i < pr.p.size(); ++i)
            if (pr.p[i] > 1e-15) {
                pr.rows.push_back(i);
                pr.b.push_back(pr.p[i]);
                pr.seedAtoms.push_back(pointAtom(i, pr.dims));
                pr.seedWeights.push_back(pr.p[i]);
            }
        return pr;
    }
    if (!t.decomposition)
        fail(ErrorCode::InfeasibleTarget, "a non-classical target needs a separable decomposition");
    const auto& d = *t.decomposition;
    if (d.dims() != pr.dims) fail(ErrorCode::InfeasibleTarget, "decomposition dims differ from the target");
    double err = traceDistance(d.reconstruct(), t.state);
    if (err > tol) fail(ErrorCode::InfeasibleTarget, "decomposition does not reconstruct the target", {{"traceDistance", err}});
    for (std::size_t x = 0; x < d.size(); ++x) {
        if (d.probs[x] <= 0) continue;
        Atom a;
        for (std::size_t i = 0; i < d.partyCount(); ++i) a.push_back(d.parties[i][x].m);
        pr.seedAtoms.push_back(a);
        pr.seedWeights.push_back(d.probs[x]);
    }
    const std::size_t D = dimProduct(pr.dims);
    for (std::size_t i = 0; i < D; ++i) pr.b.push_back(t.state.m(i, i).real());
    for (std::size_t i = 0; i < D; ++i)
        for (std::size_t j = i + 1; j < D; ++j) {
            pr.b.push_back(t.state.m(i, j).real());
            pr.b.push_back(t.state.m(i, j).imag());
        }
    return pr;
}

// Constraint coordinates of an atom; empty when a classical atom leaves the target support.
inline std::vector<double> atomCoords(const Atom& a, const Prepared& pr) {
    if (pr.classical) {
        auto v = kronVec(atomDiagonals(a));
        double outside = 0;
        for (std::size_t i = 0; i < v.size(); ++i)
            if (pr.p[i] <= 1e-15) outside += v[i];
        if (outside > 0) return {};
        std::vector<double> c;
        for (auto i : pr.rows) c.push_back(v[i]);
        return c;
    }
    Mat m = kronAtom(a);
    const std::size_t D = m.rows();
    std::vector<double> c;
    for (std::size_t i = 0; i < D; ++i) c.push_back(m(i, i).real());
    for (std::size_t i = 0; i < D; ++i)
        for (std::size_t j = i + 1; j < D; ++j) {
            c.push_back(m(i, j).real());
            c.push_back(m(i, j).imag());
        }
    return c;
}

enum class LinearKind { Wyner, CMax, CZero };

// Per-symbol cost; the objective is an affine or log transform of Σ_x p(x) cost(x).
inline double atomCost(LinearKind k, const Atom& a, const Prepared& pr) {
    switch (k) {
    case LinearKind::Wyner: {
        double s = 0;
        for (auto& m : a) s += pr.classical ? shannon(m.realDiagonal()) : entropyOfSpectrum(eigvalsh(m));
        return -s;
    }
    case LinearKind::CMax: {
        if (pr.classical) {
            auto v = kronVec(atomDiagonals(a));
            double best = 0;
            for (std::size_t i = 0; i < v.size(); ++i) {
                if (v[i] <= 0) continue;
                if (pr.p[i] <= 1e-15) return kInf;
                best = std::max(best, v[i] / pr.p[i]);
            }
            return best;
        }
        double bits = dMax(unchecked(kronAtom(a), pr.dims), pr.rho).valueBits;
        return std::isfinite(bits) ? std::exp2(bits) : kInf;
    }
    case LinearKind::CZero: {
        if (pr.classical) {
            auto v = kronVec(atomDiagonals(a));
            double s = 0;
            for (std::size_t i = 0; i < v.size(); ++i)
                if (v[i] > 1e-12) s += pr.p[i];
            return -s;
        }
        Atom proj;
        for (auto& m : a) proj.push_back(supportProjector(m));
        return -traceProductRe(kronAtom(proj), pr.rho.m);
    }
    }
    return 0;
}

inline double linearValueBits(LinearKind k, double lpObjective, const Prepared& pr) {
    switch (k) {
    case LinearKind::Wyner:
        return std::max(0.0, (pr.classical ? shannon(pr.p) : vonNeumann(pr.rho)) + lpObjective);
    case LinearKind::CMax: return std::max(0.0, std::log2(lpObjective));
    case LinearKind::CZero: return std::max(0.0, -std::log2(-lpObjective));
    }
    return 0;
}

inline void simplexGrid(std::size_t d, int g, std::vector<int>& cur, std::vector<std::vector<double>>& out) {
    if (cur.size() + 1 == d) {
        int used = std::accumulate(cur.begin(), cur.end(), 0);
        std::vector<double> q;
        for (int c : cur) q.push_back(double(c) / g);
        q.push_back(double(g - used) / g);
        out.push_back(q);
        return;
    }
    int used = std::accumulate(cur.begin(), cur.end(), 0);
    for (int c = 0; c <= g - used; ++c) {
        cur.push_back(c);
        simplexGrid(d, g, cur, out);
        cur.pop_back();
    }
}

inline std::vector<std::vector<double>> simplexGrid(std::size_t d, int g) {
    std::vector<std::vector<double>> out;
    std::vector<int> cur;
    if (d == 1) return {{1.0}};
    simplexGrid(d, g, cur, out);
    return out;
}

inline double binom(std::size_t n, std::size_t k) {
    double r = 1;
    for (std::size_t i = 1; i <= k; ++i) r = r * double(n - k + i) / double(i);
    return r;
}

inline std::vector<Atom> dictionary(const Prepared& pr, const CommonInfoConfig& cfg) {
    std::vector<Atom> atoms = pr.seedAtoms;
    const std::size_t m = pr.dims.size();
    {
        Atom marg;
        for (std::size_t i = 0; i < m; ++i) marg.push_back(partialTrace(pr.rho, {i}).m);
        atoms.push_back(marg);
    }
    if (pr.classical) {
        // largest stride count keeping the product dictionary within maxAtoms
        int g = std::max(1, cfg.gridResolution);
        auto count = [&](int gg) {
            double c = 1;
            for (auto d : pr.dims) c *= binom(d - 1 + std::size_t(gg), d - 1);
            return c;
        };
        while (g > 1 && count(g) > double(cfg.maxAtoms)) --g;
        std::vector<std::vector<std::vector<double>>> grids;
        for (auto d : pr.dims) grids.push_back(simplexGrid(d, g));
        std::vector<std::size_t> idx(m, 0);
        while (true) {
            std::vector<std::vector<double>> parts;
            for (std::size_t i = 0; i < m; ++i) parts.push_back(grids[i][idx[i]]);
            atoms.push_back(diagAtom(parts));
            std::size_t i = m;
            while (i > 0) {
                --i;
                if (++idx[i] < grids[i].size()) break;
                idx[i] = 0;
                if (i == 0) return atoms;
            }
            if (m == 0) break;
        }
        return atoms;
    }
    // quantum: products of per-party candidate states built from the decomposition
    std::vector<std::vector<Mat>> lists(m);
    for (std::size_t i = 0; i < m; ++i) {
        const std::size_t d = pr.dims[i];
        lists[i].push_back(Mat::identity(d) * cplx(1.0 / double(d)));
        for (auto& a : pr.seedAtoms) {
            lists[i].push_back(a[i]);
            auto e = eigh(a[i]);
            for (std::size_t k = 0; k < d; ++k) {
                if (e.values[k] < 1e-9) continue;
                std::vector<cplx> v(d);
                for (std::size_t r = 0; r < d; ++r) v[r] = e.vectors(r, k);
                lists[i].push_back(Mat::outer(v));
            }
        }
    }
    double total = 1;
    for (auto& l : lists) total *= double(l.size());
    if (total > double(cfg.maxAtoms)) return atoms;
    std::vector<std::size_t> idx(m, 0);
    while (true) {
        Atom a;
        for (std::size_t i = 0; i < m; ++i) a.push_back(lists[i][idx[i]]);
        atoms.push_back(a);
        std::size_t i = m;
        bool done = false;
        while (true) {
            if (i == 0) {
                done = true;
                break;
            }
            --i;
            if (++idx[i] < lists[i].size()) break;
            idx[i] = 0;
        }
        if (done) break;
    }
    return atoms;
}

// Search parametrization of a single atom.
inline std::size_t atomParamCount(const Prepared& pr) {
    std::size_t n = 0;
    for (auto d : pr.dims) n += pr.classical ? d : 2 * d * d;
    return n;
}

inline Atom decodeAtom(const std::vector<double>& v, const Prepared& pr) {
    Atom a;
    std::size_t off = 0;
    for (auto d : pr.dims) {
        if (pr.classical) {
            a.push_back(Mat::diag(std::vector<double>(v.begin() + long(off), v.begin() + long(off + d))));
            off += d;
        } else {
            Mat g(d);
            for (std::size_t r = 0; r < d; ++r)
                for (std::size_t c = 0; c < d; ++c) {
                    g(r, c) = cplx(v[off], v[off + 1]);
                    off += 2;
                }
            Mat m = g * g.adjoint();
            double tr = m.trace().real();
            if (tr <= 1e-300) m = Mat::identity(d), tr = double(d);
            a.push_back((m * cplx(1.0 / tr)).hermitianPart());
        }
    }
    return a;
}

inline std::vector<double> encodeAtom(const Atom& a, const Prepared& pr) {
    std::vector<double> v;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (pr.classical) {
            auto q = a[i].realDiagonal();
            v.insert(v.end(), q.begin(), q.end());
        } else {
            Mat s = psdPower(a[i], 0.5);
            for (std::size_t r = 0; r < s.rows(); ++r)
                for (std::size_t c = 0; c < s.cols(); ++c) {
                    v.push_back(s(r, c).real());
                    v.push_back(s(r, c).imag());
                }
        }
    }
    return v;
}

inline void projectAtomParams(std::vector<double>& v, const Prepared& pr) {
    if (!pr.classical) return;
    std::size_t off = 0;
    for (auto d : pr.dims) {
        projectSimplex(v.data() + off, d);
        off += d;
    }
}

struct LinearSolve {
    double lpObjective = 0;
    std::vector<Atom> atoms;
    std::vector<double> weights;
    std::vector<double> duals;
    double lowerBound = -kInf; // in LP-objective units, when a certificate exists
};

inline double dotCoords(const std::vector<double>& y, const std::vector<double>& c) {
    double s = 0;
    for (std::size_t i = 0; i < c.size(); ++i) s += y[i] * c[i];
    return s;
}

// No two support points differ in exactly one party index: every admissible product atom is a point mass.
inline bool onlyPointAtoms(const Prepared& pr) {
    if (!pr.classical) return false;
    std::vector<std::vector<std::size_t>> digits;
    for (auto i : pr.rows) {
        std::vector<std::size_t> d;
        unravel(i, pr.dims, d);
        digits.push_back(d);
    }
    for (std::size_t a = 0; a < digits.size(); ++a)
        for (std::size_t b = a + 1; b < digits.size(); ++b) {
            int diff = 0;
            for (std::size_t k = 0; k < pr.dims.size(); ++k) diff += digits[a][k] != digits[b][k];
            if (diff == 1) return false;
        }
    return true;
}

// Column generation over product atoms: min Σ w cost s.t. Σ w coords = target, w >= 0.
inline LinearSolve solveLinear(LinearKind kind, const Prepared& pr, const CommonInfoConfig& cfg, bool certify = true) {
    std::vector<Atom> atoms;
    std::vector<std::vector<double>> coords;
    std::vector<double> costs;
    auto add = [&](const Atom& a) {
        auto c = atomCoords(a, pr);
        if (c.empty()) return false;
        double k = atomCost(kind, a, pr);
        if (!std::isfinite(k)) return false;
        atoms.push_back(a);
        coords.push_back(std::move(c));
        costs.push_back(k);
        return true;
    };
    for (auto& a : dictionary(pr, cfg)) add(a);

    // restricted master: a subset of columns, grown by dictionary scans and local pricing
    const std::size_t rows = pr.b.size();
    std::vector<char> inMaster(atoms.size(), 1);
    LPResult lp;
    std::vector<double> x;
    auto solve = [&] {
        std::vector<std::size_t> cols;
        for (std::size_t j = 0; j < atoms.size(); ++j)
            if (inMaster[j]) cols.push_back(j);
        std::vector<std::vector<double>> A(rows, std::vector<double>(cols.size()));
        std::vector<double> c(cols.size());
        for (std::size_t k = 0; k < cols.size(); ++k) {
            for (std::size_t r = 0; r < rows; ++r) A[r][k] = coords[cols[k]][r];
            c[k] = costs[cols[k]];
        }
        lp = solveLP(A, pr.b, c);
        if (!lp.feasible) fail(ErrorCode::InfeasibleTarget, "no product extension reconstructs the target");
        x.assign(atoms.size(), 0.0);
        for (std::size_t k = 0; k < cols.size(); ++k) x[cols[k]] = lp.x[k];
    };
    auto reducedCosts = [&] {
        std::vector<std::pair<double, std::size_t>> rc;
        for (std::size_t j = 0; j < atoms.size(); ++j) rc.push_back({costs[j] - dotCoords(lp.duals, coords[j]), j});
        std::sort(rc.begin(), rc.end());
        return rc;
    };
    solve();
    const std::size_t keep = 200;
    if (atoms.size() > keep) {
        auto rc = reducedCosts();
        std::fill(inMaster.begin(), inMaster.end(), 0);
        for (std::size_t k = 0; k < keep; ++k) inMaster[rc[k].second] = 1;
        for (std::size_t j = 0; j < atoms.size(); ++j)
            if (x[j] > 0) inMaster[j] = 1;
    }

    auto reduced = [&](const Atom& a) {
        auto c = atomCoords(a, pr);
        if (c.empty()) return kInf;
        double k = atomCost(kind, a, pr);
        if (!std::isfinite(k)) return kInf;
        return k - dotCoords(lp.duals, c);
    };
    for (int round = 0; round < cfg.pricingRounds; ++round) {
        auto rc = reducedCosts();
        bool grew = false;
        for (std::size_t k = 0; k < rc.size() && k < 50 && rc[k].first < -1e-9; ++k)
            if (!inMaster[rc[k].second]) {
                inMaster[rc[k].second] = 1;
                grew = true;
            }
        // local pricing from the most promising atoms
        SearchConfig sc = cfg.search;
        sc.restarts = 6;
        sc.maxIters = 150;
        sc.workers = 1;
        sc.seed = cfg.search.seed + 7919u * std::uint64_t(round + 1);
        const std::size_t starts = std::min<std::size_t>(4, rc.size());
        auto f = [&](const std::vector<double>& v) { return reduced(decodeAtom(v, pr)); };
        auto proj = [&](std::vector<double>& v) { projectAtomParams(v, pr); };
        auto init = [&](Rng& rng, int k) {
            if (std::size_t(k) < starts) return encodeAtom(atoms[rc[std::size_t(k)].second], pr);
            std::vector<double> v(atomParamCount(pr));
            for (auto& e : v) e = pr.classical ? rng.uniform() : rng.normal();
            return v;
        };
        auto res = localSearch(f, proj, init, sc);
        if (res.value < -1e-9 && add(decodeAtom(res.params, pr))) {
            inMaster.push_back(1);
            grew = true;
        }
        if (!grew) break;
        solve();
    }
    // the restricted optimum must also price out over the whole dictionary
    if (std::any_of(inMaster.begin(), inMaster.end(), [](char c) { return !c; })) {
        auto rc = reducedCosts();
        if (rc.front().first < -1e-9) {
            std::fill(inMaster.begin(), inMaster.end(), 1);
            solve();
        }
    }

    LinearSolve out;
    out.lpObjective = lp.objective;
    out.duals = lp.duals;
    double total = 0;
    for (std::size_t j = 0; j < atoms.size(); ++j)
        if (x[j] > 1e-12) total += x[j];
    for (std::size_t j = 0; j < atoms.size(); ++j)
        if (x[j] > 1e-12) {
            out.atoms.push_back(atoms[j]);
            out.weights.push_back(x[j] / total);
        }

    // lower-bound certificates: finite admissible set, or a dense pricing grid for two binary parties
    if (!certify) return out;
    if (onlyPointAtoms(pr)) {
        out.lowerBound = lp.objective;
    } else if (pr.classical && pr.dims.size() == 2 && pr.dims[0] == 2 && pr.dims[1] == 2) {
        const int n = 1000;
        double mn = kInf;
        for (int i = 0; i <= n; ++i)
            for (int j = 0; j <= n; ++j) {
                double a = double(i) / n, c = double(j) / n;
                mn = std::min(mn, reduced(diagAtom({{a, 1 - a}, {c, 1 - c}})));
            }
        out.lowerBound = dotCoords(lp.duals, pr.b) + std::min(0.0, mn);
    }
    return out;
}

inline MarkovExtension assemble(const std::vector<Atom>& atoms, const std::vector<double>& w, const Dims& dims,
                                bool classical) {
    MarkovExtension e;
    e.seed = w;
    e.partyConditionals.assign(dims.size(), {});
    for (auto& a : atoms)
        for (std::size_t i = 0; i < dims.size(); ++i) e.partyConditionals[i].push_back(unchecked(a[i].hermitianPart(), {dims[i]}));
    e.classicalFlag = classical;
    return e;
}

// Tie-break: heavier symbols first, then lexicographic conditionals; duplicate symbols merged.
inline MarkovExtension canonicalOrder(const MarkovExtension& e) {
    const std::size_t n = e.size();
    std::vector<std::vector<double>> keys(n);
    for (std::size_t x = 0; x < n; ++x)
        for (auto& p : e.partyConditionals)
            for (auto v : p[x].m.data()) {
                keys[x].push_back(std::round(v.real() * 1e12) / 1e12);
                keys[x].push_back(std::round(v.imag() * 1e12) / 1e12);
            }
    std::vector<std::size_t> keep;
    std::vector<double> w;
    for (std::size_t x = 0; x < n; ++x) {
        if (e.seed[x] <= 0) continue;
        bool merged = false;
        for (std::size_t k = 0; k < keep.size(); ++k)
            if (keys[keep[k]] == keys[x]) {
                w[k] += e.seed[x];
                merged = true;
                break;
            }
        if (!merged) {
            keep.push_back(x);
            w.push_back(e.seed[x]);
        }
    }
    std::vector<std::size_t> ord(keep.size());
    std::iota(ord.begin(), ord.end(), 0);
    std::stable_sort(ord.begin(), ord.end(), [&](auto a, auto b) {
        if (std::abs(w[a] - w[b]) > 1e-12) return w[a] > w[b];
        return keys[keep[a]] < keys[keep[b]];
    });
    MarkovExtension out;
    out.classicalFlag = e.classicalFlag;
    out.partyConditionals.assign(e.partyCount(), {});
    for (auto o : ord) {
        out.seed.push_back(w[o]);
        for (std::size_t i = 0; i < e.partyCount(); ++i) out.partyConditionals[i].push_back(e.partyConditionals[i][keep[o]]);
    }
    return out;
}

inline CommonInfoResult linearResult(LinearKind kind, const CommonInfoTarget& target, const CommonInfoConfig& cfg) {
    auto pr = prepare(target, cfg.tolerance);
    auto sol = solveLinear(kind, pr, cfg);
    CommonInfoResult r;
    r.extension = canonicalOrder(assemble(sol.atoms, sol.weights, pr.dims, pr.classical));
    r.valueBits = linearValueBits(kind, sol.lpObjective, pr);
    r.residualMarginalError = traceDistance(r.extension.reconstruct(), pr.rho);
    if (r.residualMarginalError > cfg.tolerance)
        fail(ErrorCode::InfeasibleTarget, "reconstruction error above tolerance", {{"traceDistance", r.residualMarginalError}});
    double lbBits = -kInf;
    if (std::isfinite(sol.lowerBound)) {
        if (kind == LinearKind::CMax) lbBits = sol.lowerBound > 0 ? std::log2(sol.lowerBound) : -kInf;
        else if (kind == LinearKind::CZero) lbBits = sol.lowerBound < 0 ? -std::log2(-sol.lowerBound) : kInf;
        else lbBits = linearValueBits(kind, sol.lowerBound, pr);
    }
    if (kind == LinearKind::Wyner) {
        // C >= I(A_i : A_j) for every pair
        for (std::size_t i = 0; i < pr.dims.size(); ++i)
            for (std::size_t j = i + 1; j < pr.dims.size(); ++j) {
                auto ij = partialTrace(pr.rho, {i, j});
                lbBits = std::max(lbBits, mi(ij, MIFlavor::VonNeumann, {0}));
            }
    }
    if (r.valueBits - lbBits <= 1e-3) r.certified = Certification::Exact;
    return r;
}

// ---------------------------------------------------------------- classical extension searches

struct ClassicalExt {
    std::vector<double> w;
    std::vector<std::vector<std::vector<double>>> parts; // [x][party]

    std::vector<double> joint() const {
        std::vector<double> q;
        for (std::size_t x = 0; x < w.size(); ++x) {
            auto v = kronVec(parts[x]);
            if (q.empty()) q.assign(v.size(), 0.0);
            for (std::size_t i = 0; i < v.size(); ++i) q[i] += w[x] * v[i];
        }
        return q;
    }
};

inline ClassicalExt toClassical(const MarkovExtension& e) {
    ClassicalExt c;
    c.w = e.seed;
    for (std::size_t x = 0; x < e.size(); ++x) {
        std::vector<std::vector<double>> ps;
        for (auto& p : e.partyConditionals) ps.push_back(p[x].diagonal());
        c.parts.push_back(ps);
    }
    return c;
}

inline MarkovExtension fromClassical(const ClassicalExt& c, const Dims& dims) {
    std::vector<Atom> atoms;
    std::vector<double> w;
    for (std::size_t x = 0; x < c.w.size(); ++x) {
        if (c.w[x] <= 1e-14) continue;
        atoms.push_back(diagAtom(c.parts[x]));
        w.push_back(c.w[x]);
    }
    double s = std::accumulate(w.begin(), w.end(), 0.0);
    for (auto& v : w) v /= s;
    return assemble(atoms, w, dims, true);
}

// K symbols; layout [w (K)] then per symbol the party distributions. Uniform seeds omit w.
struct ExtLayout {
    std::size_t K;
    Dims dims;
    bool freeWeights = true;

    std::size_t size() const {
        std::size_t per = 0;
        for (auto d : dims) per += d;
        return (freeWeights ? K : 0) + K * per;
    }

    ClassicalExt decode(const std::vector<double>& v) const {
        ClassicalExt c;
        std::size_t off = 0;
        if (freeWeights) {
            c.w.assign(v.begin(), v.begin() + long(K));
            off = K;
        } else {
            c.w.assign(K, 1.0 / double(K));
        }
        for (std::size_t x = 0; x < K; ++x) {
            std::vector<std::vector<double>> ps;
            for (auto d : dims) {
                ps.emplace_back(v.begin() + long(off), v.begin() + long(off + d));
                off += d;
            }
            c.parts.push_back(ps);
        }
        return c;
    }

    std::vector<double> encode(const ClassicalExt& c) const {
        std::vector<double> v;
        if (freeWeights) {
            for (std::size_t x = 0; x < K; ++x) v.push_back(x < c.w.size() ? c.w[x] : 0.0);
        }
        for (std::size_t x = 0; x < K; ++x)
            for (std::size_t i = 0; i < dims.size(); ++i) {
                if (x < c.parts.size()) v.insert(v.end(), c.parts[x][i].begin(), c.parts[x][i].end());
                else
                    for (std::size_t k = 0; k < dims[i]; ++k) v.push_back(1.0 / double(dims[i]));
            }
        return v;
    }

    void project(std::vector<double>& v) const {
        std::size_t off = 0;
        if (freeWeights) {
            projectSimplex(v.data(), K);
            off = K;
        }
        for (std::size_t x = 0; x < K; ++x)
            for (auto d : dims) {
                projectSimplex(v.data() + off, d);
                off += d;
            }
    }

    std::vector<double> random(Rng& rng) const {
        std::vector<double> v(size());
        for (auto& x : v) x = rng.uniform();
        project(v);
        return v;
    }
};

// I↑_max(AC:X) of a classical extension relative to its own marginal: log2 Σ_x p(x) max ratio.
inline double extUpBits(const ClassicalExt& c, const std::vector<double>& q) {
    double s = 0;
    for (std::size_t x = 0; x < c.w.size(); ++x) {
        if (c.w[x] <= 0) continue;
        auto v = kronVec(c.parts[x]);
        double best = 0;
        for (std::size_t i = 0; i < v.size(); ++i)
            if (v[i] > 0) best = std::max(best, q[i] > 0 ? v[i] / q[i] : kInf);
        s += c.w[x] * best;
    }
    return std::log2(s);
}

inline double extHypoBits(const ClassicalExt& c, const std::vector<double>& q, double eps) {
    std::vector<double> pj, qj;
    for (std::size_t x = 0; x < c.w.size(); ++x) {
        auto v = kronVec(c.parts[x]);
        for (std::size_t i = 0; i < v.size(); ++i) {
            pj.push_back(c.w[x] * v[i]);
            qj.push_back(c.w[x] * q[i]);
        }
    }
    double beta = neymanPearson(pj, qj, eps).first;
    return beta > 0 ? -std::log2(beta) : kInf;
}

inline ClassicalExt canonicalClassical(const std::vector<double>& p, const Dims& dims, double mass = 1.0) {
    ClassicalExt c;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] <= 1e-15) continue;
        c.w.push_back(mass * p[i]);
        c.parts.push_back(atomDiagonals(pointAtom(i, dims)));
    }
    return c;
}

// Exact reconstruction: keep the largest multiple t of the extension fitting under p, point masses for the rest.
inline ClassicalExt repairToTarget(const ClassicalExt& c, const std::vector<double>& p, const Dims& dims) {
    auto q = c.joint();
    double t = 1;
    for (std::size_t i = 0; i < q.size(); ++i)
        if (q[i] > 1e-300) t = std::min(t, p[i] / q[i]);
    t = std::max(0.0, t);
    ClassicalExt out;
    for (std::size_t x = 0; x < c.w.size(); ++x)
        if (t * c.w[x] > 0) {
            out.w.push_back(t * c.w[x]);
            out.parts.push_back(c.parts[x]);
        }
    std::vector<double> r(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) r[i] = std::max(0.0, p[i] - t * q[i]);
    auto rest = canonicalClassical(r, dims);
    for (std::size_t x = 0; x < rest.w.size(); ++x) {
        out.w.push_back(rest.w[x]);
        out.parts.push_back(rest.parts[x]);
    }
    double s = std::accumulate(out.w.begin(), out.w.end(), 0.0);
    for (auto& v : out.w) v /= s;
    return out;
}

inline double sqDist(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return s;
}

inline double classicalFidelity(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += std::sqrt(std::max(0.0, a[i]) * std::max(0.0, b[i]));
    return s;
}

inline std::size_t classicalCap(const Dims& dims) { return dimProduct(dims) + 4; }

inline void requireClassicalTarget(const CommonInfoTarget& t) {
    if (!t.state.isClassical(1e-12)) fail(ErrorCode::ClassicalOnly, "this search handles classical targets only");
}

} // namespace detail

// ---------------------------------------------------------------- public operations

struct MarkovCheck {
    bool markov = false;
    double cmiBits = 0;          // I(A:C|X)
    double maxConditionalMI = 0; // max_x I(A:C)_{ρ^x}
};

// ρ on A ⊗ X ⊗ C with X classical.
inline MarkovCheck checkMarkov(const DensityMatrix& rhoAXC) {
    if (rhoAXC.dims.size() != 3) fail(ErrorCode::BadCut, "expected subsystems A, X, C");
    const std::size_t dA = rhoAXC.dims[0], dX = rhoAXC.dims[1], dC = rhoAXC.dims[2];
    auto xac = permuteSubsystems(rhoAXC, {1, 0, 2});
    const std::size_t d = dA * dC;
    MarkovCheck r;
    r.markov = true;
    for (std::size_t x = 0; x < dX; ++x) {
        Mat blk(d);
        for (std::size_t i = 0; i < d; ++i)
            for (std::size_t j = 0; j < d; ++j) blk(i, j) = xac.m(x * d + i, x * d + j);
        double px = blk.trace().real();
        if (px <= 1e-15) continue;
        auto cond = unchecked(blk * cplx(1.0 / px), {dA, dC});
        auto prod = tensor(partialTrace(cond, {0}), partialTrace(cond, {1}));
        double td = traceDistance(cond, prod);
        double i = mi(cond, MIFlavor::VonNeumann, {0});
        r.cmiBits += px * i;
        r.maxConditionalMI = std::max(r.maxConditionalMI, i);
        if (td > 1e-8) r.markov = false;
    }
    return r;
}

inline CommonInfoResult wynerCI(const CommonInfoTarget& target, const CommonInfoConfig& cfg = {}) {
    return detail::linearResult(detail::LinearKind::Wyner, target, cfg);
}

inline CommonInfoResult cMax(const CommonInfoTarget& target, const CommonInfoConfig& cfg = {}) {
    return detail::linearResult(detail::LinearKind::CMax, target, cfg);
}

inline CommonInfoResult cTildeZero(const CommonInfoTarget& target, const CommonInfoConfig& cfg = {}) {
    return detail::linearResult(detail::LinearKind::CZero, target, cfg);
}

// Objectives evaluated on a fixed extension, X first.
inline double extensionMutualInfo(const MarkovExtension& e) {
    auto cq = e.withSeed().assemble();
    std::vector<std::size_t> inner(e.partyCount());
    std::iota(inner.begin(), inner.end(), 1);
    return mi(cq, MIFlavor::VonNeumann, inner);
}

inline double extensionUpBits(const MarkovExtension& e) {
    auto rho = e.reconstruct();
    double s = 0;
    for (std::size_t x = 0; x < e.size(); ++x) {
        if (e.seed[x] <= 0) continue;
        s += e.seed[x] * std::exp2(dMax(unchecked(e.component(x), e.dims()), rho).valueBits);
    }
    return std::log2(s);
}

inline double extensionHypoBits(const MarkovExtension& e, double eps) {
    auto cq = e.withSeed();
    auto joint = cq.assemble();
    auto rho = e.reconstruct();
    Mat pX = Mat::diag(e.seed);
    auto prod = unchecked(kron(pX, rho.m), joint.dims);
    return dHypo(joint, prod, eps).valueBits;
}

inline double extensionZeroBits(const MarkovExtension& e) {
    auto rho = e.reconstruct();
    double s = 0;
    for (std::size_t x = 0; x < e.size(); ++x)
        if (e.seed[x] > 0) s += e.seed[x] * traceProductRe(supportProjector(e.component(x)), rho.m);
    return -std::log2(s);
}

inline CommonInfoResult cTildeH(const CommonInfoTarget& target, double eps, const CommonInfoConfig& cfg = {}) {
    detail::checkEpsilon(eps, false);
    auto pr = detail::prepare(target, cfg.tolerance);
    std::vector<MarkovExtension> pool;
    for (auto k : {detail::LinearKind::Wyner, detail::LinearKind::CMax, detail::LinearKind::CZero})
        pool.push_back(detail::linearResult(k, target, cfg).extension);
    pool.push_back(detail::assemble(pr.seedAtoms, pr.seedWeights, pr.dims, pr.classical));
    if (pr.classical) {
        // penalty search on the marginal constraint, then an exact repair
        detail::ExtLayout lay{detail::classicalCap(pr.dims), pr.dims, true};
        auto f0 = [&](const std::vector<double>& v, double mu) {
            auto c = lay.decode(v);
            auto q = c.joint();
            return detail::extHypoBits(c, q, eps) + mu * detail::sqDist(q, pr.p);
        };
        std::vector<double> best = lay.encode(detail::toClassical(pool.front()));
        for (double mu : {1e1, 1e2, 1e3, 1e4, 1e5}) {
            SearchConfig sc = cfg.search;
            if (mu > 1e1) sc.restarts = 1;
            auto warm = best;
            auto res = localSearch([&](const std::vector<double>& v) { return f0(v, mu); },
                                   [&](std::vector<double>& v) { lay.project(v); },
                                   [&](Rng& rng, int k) { return k == 0 ? warm : lay.random(rng); }, sc);
            best = res.params;
        }
        auto fixed = detail::repairToTarget(lay.decode(best), pr.p, pr.dims);
        pool.push_back(detail::fromClassical(fixed, pr.dims));
    }
    CommonInfoResult r;
    r.valueBits = kInf;
    for (auto& e : pool) {
        auto ce = detail::canonicalOrder(e);
        double v = extensionHypoBits(ce, eps);
        if (v < r.valueBits - 1e-12 || (std::abs(v - r.valueBits) <= 1e-12 && ce.size() < r.extension.size())) {
            r.valueBits = v;
            r.extension = ce;
        }
    }
    r.residualMarginalError = traceDistance(r.extension.reconstruct(), pr.rho);
    return r;
}

namespace detail {

// Stage schedule j/40 below eps, then eps; shared prefixes make values comparable across eps.
inline std::vector<double> epsSchedule(double eps) {
    std::vector<double> s;
    for (int j = 1; double(j) / 40.0 < eps; ++j) s.push_back(double(j) / 40.0);
    s.push_back(eps);
    return s;
}

inline CommonInfoResult ballFirst(const Prepared& pr, const CommonInfoResult& base, double eps,
                                  const CommonInfoConfig& cfg) {
    ExtLayout lay{classicalCap(pr.dims), pr.dims, true};
    ClassicalExt bestExt = toClassical(base.extension);
    double bestVal = base.valueBits;
    std::vector<double> bestQ = pr.p;
    for (double e : epsSchedule(eps)) {
        const double c = std::sqrt(1 - e * e);
        auto f = [&](const std::vector<double>& v, double mu) {
            auto x = lay.decode(v);
            auto q = x.joint();
            double gap = std::max(0.0, c - classicalFidelity(q, pr.p));
            return extUpBits(x, q) + mu * gap * gap;
        };
        // mixtures of the target with its product of marginals or the uniform state, pushed to the ball edge
        for (int dir = 0; dir < 2; ++dir) {
            std::vector<double> r(pr.p.size(), 1.0 / double(pr.p.size()));
            if (dir == 0) {
                std::vector<std::vector<double>> marg(pr.dims.size());
                std::vector<std::size_t> dg;
                for (std::size_t i = 0; i < pr.dims.size(); ++i) marg[i].assign(pr.dims[i], 0.0);
                for (std::size_t k = 0; k < pr.p.size(); ++k) {
                    unravel(k, pr.dims, dg);
                    for (std::size_t i = 0; i < pr.dims.size(); ++i) marg[i][dg[i]] += pr.p[k];
                }
                r = kronVec(marg);
            }
            auto mix = [&](double t) {
                std::vector<double> q(pr.p.size());
                for (std::size_t k = 0; k < q.size(); ++k) q[k] = (1 - t) * pr.p[k] + t * r[k];
                return q;
            };
            double lo = 0, hi = 1;
            if (classicalFidelity(mix(1), pr.p) >= c) lo = 1;
            for (int it = 0; it < 60 && hi - lo > 1e-12; ++it) {
                double mid = 0.5 * (lo + hi);
                (classicalFidelity(mix(mid), pr.p) >= c ? lo : hi) = mid;
            }
            if (lo <= 0) continue;
            auto q = mix(lo);
            Prepared pq = prepare(classicalTarget(unchecked(Mat::diag(q), pr.dims)), 1.0);
            auto sol = solveLinear(LinearKind::CMax, pq, cfg, false);
            ClassicalExt ce;
            ce.w = sol.weights;
            for (auto& a : sol.atoms) ce.parts.push_back(atomDiagonals(a));
            auto cq = ce.joint();
            double val = extUpBits(ce, cq);
            if (classicalFidelity(cq, pr.p) >= c - 1e-12 && val < bestVal) {
                bestVal = val;
                bestExt = ce;
                bestQ = cq;
            }
        }
        std::vector<double> cur = lay.encode(bestExt);
        for (double mu : {1e1, 1e2, 1e3, 1e4, 1e5}) {
            SearchConfig sc = cfg.search;
            if (mu > 1e1) sc.restarts = 1;
            auto warm = cur;
            auto res = localSearch([&](const std::vector<double>& v) { return f(v, mu); },
                                   [&](std::vector<double>& v) { lay.project(v); },
                                   [&](Rng& rng, int k) { return k == 0 ? warm : lay.random(rng); }, sc);
            cur = res.params;
        }
        // mixing with the target's own extension restores the ball (root fidelity is concave)
        auto x = lay.decode(cur);
        auto q = x.joint();
        double fq = classicalFidelity(q, pr.p);
        double t = fq >= c ? 1.0 : (1 - c) / (1 - fq);
        ClassicalExt mixed;
        for (std::size_t s = 0; s < x.w.size(); ++s)
            if (t * x.w[s] > 0) {
                mixed.w.push_back(t * x.w[s]);
                mixed.parts.push_back(x.parts[s]);
            }
        auto canon = canonicalClassical(pr.p, pr.dims, 1 - t);
        for (std::size_t s = 0; s < canon.w.size(); ++s)
            if (canon.w[s] > 0) {
                mixed.w.push_back(canon.w[s]);
                mixed.parts.push_back(canon.parts[s]);
            }
        auto mq = mixed.joint();
        double val = extUpBits(mixed, mq);
        if (classicalFidelity(mq, pr.p) >= c - 1e-12 && val < bestVal) {
            bestVal = val;
            bestExt = mixed;
            bestQ = mq;
        }
    }
    CommonInfoResult r;
    r.extension = canonicalOrder(fromClassical(bestExt, pr.dims));
    r.valueBits = std::max(0.0, bestVal);
    auto q = r.extension.reconstruct();
    r.residualMarginalError = 0;
    r.ballDistance = purifiedDistance(q, pr.rho);
    return r;
}

inline CommonInfoResult extensionFirst(const Prepared& pr, const CommonInfoTarget& target, const CommonInfoResult& base,
                                       double eps, const CommonInfoConfig& cfg) {
    std::vector<MarkovExtension> pool{base.extension};
    pool.push_back(linearResult(LinearKind::Wyner, target, cfg).extension);
    pool.push_back(linearResult(LinearKind::CZero, target, cfg).extension);
    pool.push_back(canonicalOrder(assemble(pr.seedAtoms, pr.seedWeights, pr.dims, true)));
    CommonInfoResult r = base;
    for (auto& ext : pool) {
        // joint table: rows AC, columns X
        auto c = toClassical(ext);
        const std::size_t D = dimProduct(pr.dims);
        std::vector<std::vector<double>> table(D, std::vector<double>(c.w.size()));
        for (std::size_t x = 0; x < c.w.size(); ++x) {
            auto v = kronVec(c.parts[x]);
            for (std::size_t i = 0; i < D; ++i) table[i][x] = c.w[x] * v[i];
        }
        double val = classicalUpFromTable(table);
        std::vector<double> warm;
        for (double e : epsSchedule(eps)) {
            auto s = smoothedUpTable(table, e, cfg.search, warm.empty() ? nullptr : &warm);
            if (s.value <= val) {
                val = s.value;
                warm = s.u;
            }
        }
        if (val < r.valueBits - 1e-12) {
            r.valueBits = std::max(0.0, val);
            r.extension = ext;
        }
    }
    r.ballDistance = eps;
    return r;
}

} // namespace detail

inline CommonInfoResult cMaxSmoothed(const CommonInfoTarget& target, double eps, SmoothingVariant variant,
                                     const CommonInfoConfig& cfg = {}) {
    detail::requireClassicalTarget(target);
    if (!(eps >= 0 && eps < 1)) fail(ErrorCode::EpsilonOutOfRange, "epsilon outside [0,1)", {{"epsilon", eps}});
    auto base = cMax(target, cfg);
    base.ballDistance = 0;
    if (eps == 0 || base.valueBits <= 1e-12) return base; // C_max is already 0
    base.certified = Certification::LocalSearchUpperBound;
    auto pr = detail::prepare(target, cfg.tolerance);
    auto r = variant == SmoothingVariant::BallFirst ? detail::ballFirst(pr, base, eps, cfg)
                                                    : detail::extensionFirst(pr, target, base, eps, cfg);
    r.certified = Certification::LocalSearchUpperBound;
    return r;
}

// Carathéodory reduction preserving the marginal, conditional entropies and the exponential D_max average.
inline MarkovExtension reduceCardinality(const MarkovExtension& ext, const CommonInfoTarget& target) {
    auto rho = target.state;
    const bool classical = ext.classicalFlag && rho.isClassical(1e-12);
    const std::size_t m = ext.partyCount();
    std::vector<std::vector<double>> pts;
    for (std::size_t x = 0; x < ext.size(); ++x) {
        Mat comp = ext.component(x);
        std::vector<double> pt;
        const std::size_t D = comp.rows();
        if (classical) {
            for (std::size_t i = 0; i + 1 < D; ++i) pt.push_back(comp(i, i).real());
        } else {
            for (std::size_t i = 0; i + 1 < D; ++i) pt.push_back(comp(i, i).real());
            for (std::size_t i = 0; i < D; ++i)
                for (std::size_t j = i + 1; j < D; ++j) {
                    pt.push_back(comp(i, j).real());
                    pt.push_back(comp(i, j).imag());
                }
        }
        // H(joint|x) then H(party i|x)
        std::vector<double> hs;
        for (std::size_t i = 0; i < m; ++i) hs.push_back(vonNeumann(ext.partyConditionals[i][x]));
        pt.push_back(std::accumulate(hs.begin(), hs.end(), 0.0));
        pt.insert(pt.end(), hs.begin(), hs.end());
        pt.push_back(std::exp2(dMax(unchecked(comp, ext.dims()), rho).valueBits));
        for (double v : pt)
            if (!std::isfinite(v)) fail(ErrorCode::DegenerateNullspace, "tracked functional is not finite");
        pts.push_back(std::move(pt));
    }
    WeightedPointSet s{ext.seed, pts};
    auto red = caratheodoryPrune(s);
    MarkovExtension out;
    out.classicalFlag = ext.classicalFlag;
    out.partyConditionals.assign(m, {});
    for (std::size_t k = 0; k < red.points.size(); ++k) {
        std::size_t src = ext.size();
        for (std::size_t x = 0; x < ext.size(); ++x)
            if (pts[x] == red.points[k]) {
                src = x;
                break;
            }
        if (src == ext.size()) fail(ErrorCode::DegenerateNullspace, "reduced point has no source symbol");
        out.seed.push_back(red.weights[k]);
        for (std::size_t i = 0; i < m; ++i) out.partyConditionals[i].push_back(ext.partyConditionals[i][src]);
    }
    return out;
}

struct FormationResult {
    double bits = 0;
    std::size_t k = 0;
    MarkovExtension extension;
    double traceDistance = 0;
};

// Smallest k such that a k-symbol extension lands within trace distance eps of the target.
inline FormationResult formationSearch(const CommonInfoTarget& target, double eps, bool uniform,
                                       const CommonInfoConfig& cfg = {}) {
    detail::requireClassicalTarget(target);
    detail::checkEpsilon(eps, false);
    auto pr = detail::prepare(target, cfg.tolerance);
    const std::size_t D = dimProduct(pr.dims);
    const std::size_t cap = D + 3 + 4;
    std::vector<std::size_t> order(D);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return pr.p[a] > pr.p[b]; });
    for (std::size_t k = 1; k <= cap; ++k) {
        detail::ExtLayout lay{k, pr.dims, !uniform};
        // restart 0: point masses on the heaviest entries, counts by largest remainder when uniform
        detail::ClassicalExt start;
        if (uniform) {
            std::vector<double> share(D);
            std::vector<std::size_t> cnt(D);
            std::size_t used = 0;
            for (std::size_t i = 0; i < D; ++i) {
                share[i] = pr.p[i] * double(k);
                cnt[i] = std::size_t(std::floor(share[i]));
                used += cnt[i];
            }
            std::vector<std::size_t> byRem(order);
            std::stable_sort(byRem.begin(), byRem.end(),
                             [&](auto a, auto b) { return share[a] - double(cnt[a]) > share[b] - double(cnt[b]); });
            for (std::size_t j = 0; used < k; ++j, ++used) ++cnt[byRem[j % D]];
            for (auto i : order)
                for (std::size_t c = 0; c < cnt[i]; ++c) {
                    start.w.push_back(1.0 / double(k));
                    start.parts.push_back(detail::atomDiagonals(detail::pointAtom(i, pr.dims)));
                }
        } else {
            double tot = 0;
            for (std::size_t j = 0; j < std::min(k, D); ++j) tot += pr.p[order[j]];
            for (std::size_t j = 0; j < std::min(k, D); ++j) {
                start.w.push_back(tot > 0 ? pr.p[order[j]] / tot : 1.0 / double(k));
                start.parts.push_back(detail::atomDiagonals(detail::pointAtom(order[j], pr.dims)));
            }
        }
        auto td = [&](const std::vector<double>& v) {
            auto q = lay.decode(v).joint();
            double s = 0;
            for (std::size_t i = 0; i < D; ++i) s += std::abs(q[i] - pr.p[i]);
            return 0.5 * s;
        };
        SearchConfig sc = cfg.search;
        sc.restarts = 16;
        auto warm = lay.encode(start);
        auto res = localSearch(td, [&](std::vector<double>& v) { lay.project(v); },
                               [&](Rng& rng, int r) { return r == 0 ? warm : lay.random(rng); }, sc);
        if (res.value <= eps + 1e-12) {
            FormationResult fr;
            fr.k = k;
            fr.bits = std::log2(double(k));
            auto c = lay.decode(res.params);
            MarkovExtension e;
            e.classicalFlag = true;
            e.seed = c.w;
            e.partyConditionals.assign(pr.dims.size(), {});
            for (std::size_t x = 0; x < k; ++x)
                for (std::size_t i = 0; i < pr.dims.size(); ++i)
                    e.partyConditionals[i].push_back(unchecked(Mat::diag(c.parts[x][i]), {pr.dims[i]}));
            fr.extension = e;
            fr.traceDistance = res.value;
            return fr;
        }
    }
    fail(ErrorCode::NoFeasibleK, "no extension within the cardinality cap reaches the target", {{"cap", double(cap)}});
}

struct MonotonicityReport {
    double fullValue = 0;
    double reducedValue = 0;
    bool holds = false;
};

// Wyner CI of all m parties against the first k parties.
inline MonotonicityReport multiPartyMonotonicity(const CommonInfoTarget& target, std::size_t k,
                                                 const CommonInfoConfig& cfg = {}) {
    const std::size_t m = target.state.dims.size();
    if (k == 0 || k >= m) fail(ErrorCode::BadSubsystemIndex, "need 0 < k < m", {{"k", double(k)}, {"m", double(m)}});
    std::vector<std::size_t> keep(k);
    std::iota(keep.begin(), keep.end(), 0);
    CommonInfoTarget reduced{partialTrace(target.state, keep), std::nullopt};
    if (target.decomposition) {
        auto d = *target.decomposition;
        d.parties.resize(k);
        reduced.decomposition = d;
    }
    MonotonicityReport r;
    r.fullValue = wynerCI(target, cfg).valueBits;
    r.reducedValue = wynerCI(reduced, cfg).valueBits;
    r.holds = r.fullValue >= r.reducedValue - 2e-3;
    return r;
}

struct TypicalExtension {
    MarkovExtension extension;
    double traceDistance = 0; // joint X^n A^n C^n state against the n-fold original
    double seedMass = 0;      // typical-set probability before renormalization
};

namespace detail {

inline bool typicalType(const std::vector<std::size_t>& counts, const std::vector<double>& p, std::size_t n, double delta) {
    for (std::size_t a = 0; a < p.size(); ++a) {
        double f = double(counts[a]) / double(n);
        if (p[a] <= 0 && counts[a] > 0) return false;
        if (std::abs(f - p[a]) > delta) return false;
    }
    return true;
}

} // namespace detail

// Seed restricted to δ-typical x^n, each party restricted to sequences conditionally typical given x^n.
inline TypicalExtension typicalExtension(const MarkovExtension& ext, std::size_t n, double delta) {
    if (!ext.classicalFlag) fail(ErrorCode::ClassicalOnly, "typical restriction needs a classical extension");
    const std::size_t nx = ext.size(), m = ext.partyCount();
    const double seqs = std::pow(double(nx), double(n));
    if (seqs > 1e6) fail(ErrorCode::TooLarge, "more than 1e6 seed sequences", {{"sequences", seqs}});
    Dims pd = ext.dims();
    std::vector<std::size_t> pdn(m);
    for (std::size_t i = 0; i < m; ++i) {
        double s = std::pow(double(pd[i]), double(n));
        if (s > double(kMaxDim)) fail(ErrorCode::TooLarge, "party dimension exceeds 64 after n copies", {{"dim", s}});
        pdn[i] = std::size_t(s);
    }
    Dims xdims(n, nx);
    std::vector<std::vector<std::vector<double>>> cond(m); // [party][x] distributions
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t x = 0; x < nx; ++x) cond[i].push_back(ext.partyConditionals[i][x].diagonal());

    TypicalExtension out;
    out.extension.classicalFlag = true;
    out.extension.partyConditionals.assign(m, {});
    std::vector<std::size_t> xs, as;
    double keptMass = 0;
    std::vector<double> origW, newW;
    std::vector<std::vector<std::vector<double>>> origParts, newParts; // [xn][party]
    for (std::size_t xi = 0; xi < std::size_t(seqs); ++xi) {
        detail::unravel(xi, xdims, xs);
        double w = 1;
        std::vector<std::size_t> cnt(nx, 0);
        for (auto x : xs) {
            w *= ext.seed[x];
            ++cnt[x];
        }
        std::vector<std::vector<double>> op, np;
        for (std::size_t i = 0; i < m; ++i) {
            Dims adims(n, pd[i]);
            std::vector<double> full(pdn[i]), kept(pdn[i], 0.0);
            double km = 0;
            for (std::size_t ai = 0; ai < pdn[i]; ++ai) {
                detail::unravel(ai, adims, as);
                double pr = 1;
                for (std::size_t t = 0; t < n; ++t) pr *= cond[i][xs[t]][as[t]];
                full[ai] = pr;
                // joint type N(x,a)/n against N(x)/n · p(a|x)
                bool typ = pr > 0;
                for (std::size_t x = 0; x < nx && typ; ++x)
                    for (std::size_t a = 0; a < pd[i] && typ; ++a) {
                        std::size_t nxa = 0;
                        for (std::size_t t = 0; t < n; ++t) nxa += xs[t] == x && as[t] == a;
                        double expect = double(cnt[x]) * cond[i][x][a] / double(n);
                        if (std::abs(double(nxa) / double(n) - expect) > delta) typ = false;
                    }
                if (typ) {
                    kept[ai] = pr;
                    km += pr;
                }
            }
            if (km <= 0) kept = full; // nothing typical: keep the product conditional
            else
                for (auto& v : kept) v /= km;
            op.push_back(full);
            np.push_back(kept);
        }
        origW.push_back(w);
        origParts.push_back(op);
        bool typicalSeed = detail::typicalType(cnt, ext.seed, n, delta);
        newW.push_back(typicalSeed ? w : 0.0);
        newParts.push_back(np);
        if (typicalSeed) keptMass += w;
    }
    if (keptMass <= 0) {
        // empty typical set: fall back to the n-fold original
        newW = origW;
        newParts = origParts;
        keptMass = 1;
    }
    for (auto& v : newW) v /= keptMass;
    out.seedMass = keptMass;
    double td = 0;
    for (std::size_t s = 0; s < origW.size(); ++s) {
        auto a = detail::kronVec(origParts[s]);
        auto b = detail::kronVec(newParts[s]);
        for (std::size_t k = 0; k < a.size(); ++k) td += std::abs(origW[s] * a[k] - newW[s] * b[k]);
        if (newW[s] <= 0) continue;
        out.extension.seed.push_back(newW[s]);
        for (std::size_t i = 0; i < m; ++i)
            out.extension.partyConditionals[i].push_back(unchecked(Mat::diag(newParts[s][i]), {pdn[i]}));
    }
    out.traceDistance = 0.5 * td;
    return out;
}

} // namespace oneshot
