#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>
#include <openssl/evp.h>

#include "embezzle.hpp"
#include "state.hpp"

namespace oneshot {

using Json = nlohmann::json; // std::map objects, so keys come out sorted

// A classical joint distribution, kept apart from a diagonal density matrix so the kind survives a round trip.
struct ClassicalJoint {
    DensityMatrix state;
};

using Loaded = std::variant<DensityMatrix, ClassicalJoint, CQState, SeparableDecomposition, SchmidtSpectrum, PureEnsemble>;

namespace io {

[[noreturn]] inline void parseFail(const std::string& field, const std::string& msg) {
    fail(ErrorCode::ParseError, field + ": " + msg);
}

inline const Json& need(const Json& j, const char* key, const std::string& ctx) {
    if (!j.is_object() || !j.contains(key)) parseFail(ctx, std::string("missing field '") + key + "'");
    return j.at(key);
}

inline double num(const Json& j, const std::string& ctx) {
    if (!j.is_number()) parseFail(ctx, "expected a number");
    return j.get<double>();
}

inline std::vector<double> numVec(const Json& j, const std::string& ctx) {
    if (!j.is_array()) parseFail(ctx, "expected an array");
    std::vector<double> v;
    for (std::size_t i = 0; i < j.size(); ++i) v.push_back(num(j[i], ctx + "[" + std::to_string(i) + "]"));
    return v;
}

inline Dims dimsOf(const Json& j, const std::string& ctx) {
    Dims d;
    for (double x : numVec(j, ctx)) {
        if (x < 1 || x != std::floor(x)) parseFail(ctx, "dimensions must be positive integers");
        d.push_back(std::size_t(x));
    }
    if (d.empty()) parseFail(ctx, "at least one dimension required");
    return d;
}

inline Mat matrixOf(const Json& re, const Json* im, const std::string& ctx) {
    if (!re.is_array() || re.empty()) parseFail(ctx + ".re", "expected a nonempty matrix");
    const std::size_t r = re.size(), c = re[0].is_array() ? re[0].size() : 0;
    Mat m(r, c);
    for (std::size_t i = 0; i < r; ++i) {
        auto row = numVec(re[i], ctx + ".re[" + std::to_string(i) + "]");
        if (row.size() != c) parseFail(ctx + ".re", "ragged matrix");
        for (std::size_t k = 0; k < c; ++k) m(i, k) = row[k];
    }
    if (im) {
        if (!im->is_array() || im->size() != r) parseFail(ctx + ".im", "shape differs from re");
        for (std::size_t i = 0; i < r; ++i) {
            auto row = numVec((*im)[i], ctx + ".im[" + std::to_string(i) + "]");
            if (row.size() != c) parseFail(ctx + ".im", "shape differs from re");
            for (std::size_t k = 0; k < c; ++k) m(i, k) = cplx(m(i, k).real(), row[k]);
        }
    }
    return m;
}

inline DensityMatrix densityOf(const Json& j, const std::string& ctx) {
    auto dims = dimsOf(need(j, "dims", ctx), ctx + ".dims");
    const Json* im = j.contains("im") ? &j.at("im") : nullptr;
    return makeState(matrixOf(need(j, "re", ctx), im, ctx), dims);
}

inline ClassicalJoint classicalOf(const Json& j, const std::string& ctx) {
    auto dims = dimsOf(need(j, "dims", ctx), ctx + ".dims");
    const Json& pj = need(j, "probs", ctx);
    std::vector<double> p;
    if (pj.is_array() && !pj.empty() && pj[0].is_array()) {
        for (std::size_t i = 0; i < pj.size(); ++i) {
            auto row = numVec(pj[i], ctx + ".probs[" + std::to_string(i) + "]");
            p.insert(p.end(), row.begin(), row.end());
        }
    } else {
        p = numVec(pj, ctx + ".probs");
    }
    if (p.size() != dimProduct(dims))
        fail(ErrorCode::DimMismatch, ctx + ": probability count does not match dims",
             {{"count", double(p.size())}, {"expected", double(dimProduct(dims))}});
    return {classicalState(p, dims)};
}

inline PureState pureOf(const Json& j, const Dims& dims, const std::string& ctx) {
    auto re = numVec(need(j, "re", ctx), ctx + ".re");
    std::vector<double> im(re.size(), 0.0);
    if (j.contains("im")) im = numVec(j.at("im"), ctx + ".im");
    if (im.size() != re.size()) parseFail(ctx + ".im", "length differs from re");
    std::vector<cplx> a(re.size());
    for (std::size_t i = 0; i < a.size(); ++i) a[i] = cplx(re[i], im[i]);
    return makePure(a, dims);
}

inline Loaded fromJson(const Json& j) {
    const std::string kind = need(j, "kind", "$").is_string() ? j.at("kind").get<std::string>() : "";
    if (kind == "density") return densityOf(j, "$");
    if (kind == "classical") return classicalOf(j, "$");
    if (kind == "cq") {
        std::vector<DensityMatrix> conds;
        const Json& cj = need(j, "conditionals", "$");
        if (!cj.is_array()) parseFail("$.conditionals", "expected an array");
        for (std::size_t i = 0; i < cj.size(); ++i) conds.push_back(densityOf(cj[i], "$.conditionals[" + std::to_string(i) + "]"));
        return makeCQ(numVec(need(j, "probs", "$"), "$.probs"), conds);
    }
    if (kind == "separable") {
        const Json& pj = need(j, "parties", "$");
        if (!pj.is_array()) parseFail("$.parties", "expected an array");
        std::vector<std::vector<DensityMatrix>> parties(pj.size());
        for (std::size_t i = 0; i < pj.size(); ++i) {
            if (!pj[i].is_array()) parseFail("$.parties[" + std::to_string(i) + "]", "expected an array");
            for (std::size_t x = 0; x < pj[i].size(); ++x)
                parties[i].push_back(densityOf(pj[i][x], "$.parties[" + std::to_string(i) + "][" + std::to_string(x) + "]"));
        }
        return makeSeparable(numVec(need(j, "probs", "$"), "$.probs"), parties);
    }
    if (kind == "schmidt") return makeSchmidt(numVec(need(j, "amplitudes", "$"), "$.amplitudes"));
    if (kind == "ensemble") {
        auto dims = dimsOf(need(j, "dims", "$"), "$.dims");
        PureEnsemble e;
        e.probs = numVec(need(j, "probs", "$"), "$.probs");
        const Json& sj = need(j, "states", "$");
        if (!sj.is_array()) parseFail("$.states", "expected an array");
        for (std::size_t i = 0; i < sj.size(); ++i) e.states.push_back(pureOf(sj[i], dims, "$.states[" + std::to_string(i) + "]"));
        if (e.states.size() != e.probs.size()) fail(ErrorCode::DimMismatch, "one state per probability required");
        return e;
    }
    parseFail("$.kind", "unknown kind '" + kind + "'");
}

inline Json matrixJson(const Mat& m, bool imag) {
    Json rows = Json::array();
    for (std::size_t i = 0; i < m.rows(); ++i) {
        Json row = Json::array();
        for (std::size_t k = 0; k < m.cols(); ++k) row.push_back(imag ? m(i, k).imag() : m(i, k).real());
        rows.push_back(row);
    }
    return rows;
}

inline Json densityJson(const DensityMatrix& d) {
    return {{"kind", "density"}, {"dims", d.dims}, {"re", matrixJson(d.m, false)}, {"im", matrixJson(d.m, true)}};
}

inline Json toJson(const Loaded& v) {
    struct Visitor {
        Json operator()(const DensityMatrix& d) const { return densityJson(d); }
        Json operator()(const ClassicalJoint& c) const {
            auto p = c.state.diagonal();
            Json probs = p;
            if (c.state.dims.size() == 2) {
                probs = Json::array();
                const std::size_t cols = c.state.dims[1];
                for (std::size_t i = 0; i < c.state.dims[0]; ++i)
                    probs.push_back(std::vector<double>(p.begin() + long(i * cols), p.begin() + long((i + 1) * cols)));
            }
            return {{"kind", "classical"}, {"dims", c.state.dims}, {"probs", probs}};
        }
        Json operator()(const CQState& cq) const {
            Json conds = Json::array();
            for (auto& c : cq.conditionals) conds.push_back(densityJson(c));
            return {{"kind", "cq"}, {"probs", cq.probs}, {"conditionals", conds}};
        }
        Json operator()(const SeparableDecomposition& s) const {
            Json parties = Json::array();
            for (auto& p : s.parties) {
                Json list = Json::array();
                for (auto& c : p) list.push_back(densityJson(c));
                parties.push_back(list);
            }
            return {{"kind", "separable"}, {"probs", s.probs}, {"parties", parties}};
        }
        Json operator()(const SchmidtSpectrum& s) const { return {{"kind", "schmidt"}, {"amplitudes", s.amplitudes}}; }
        Json operator()(const PureEnsemble& e) const {
            Json states = Json::array();
            for (auto& s : e.states) {
                std::vector<double> re, im;
                for (auto a : s.amplitudes) {
                    re.push_back(a.real());
                    im.push_back(a.imag());
                }
                states.push_back({{"re", re}, {"im", im}});
            }
            return {{"kind", "ensemble"}, {"dims", e.states.front().dims}, {"probs", e.probs}, {"states", states}};
        }
    };
    return std::visit(Visitor{}, v);
}

// Sorted keys, no whitespace, shortest round-trip floats.
inline std::string canonical(const Json& j) { return j.dump(); }

inline std::string sha256Hex(const std::string& data) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr);
    std::ostringstream os;
    for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << int(md[i]);
    return os.str();
}

inline Json parseText(const std::string& text) {
    try {
        return Json::parse(text);
    } catch (const Json::parse_error& e) {
        fail(ErrorCode::ParseError, e.what(), {{"byte", double(e.byte)}});
    }
}

inline std::string readFile(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::IOError, "cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void writeFile(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorCode::IOError, "cannot write '" + path + "'");
    out << text;
    if (!out) fail(ErrorCode::IOError, "write failed for '" + path + "'");
}

// Reported values: bits to 12 significant digits, round-off dust below 1e-13 printed as 0; infinities as strings.
inline Json bits(double v) {
    if (std::isinf(v)) return v > 0 ? "Infinity" : "-Infinity";
    if (std::isnan(v)) return "NaN";
    if (std::abs(v) < 1e-13) return 0.0;
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    double r = std::strtod(buf, nullptr);
    return r == 0 ? 0.0 : r; // drop negative zero
}

} // namespace io

inline Loaded loadState(const std::string& path) { return io::fromJson(io::parseText(io::readFile(path))); }

inline void saveState(const std::string& path, const Loaded& v) { io::writeFile(path, io::canonical(io::toJson(v)) + "\n"); }

} // namespace oneshot
