#include "catch_amalgamated.hpp"

#include <filesystem>

#include <oneshot/io.hpp>

using namespace oneshot;
namespace fs = std::filesystem;

namespace {

const fs::path kData = FIXTURE_DIR;

const Error& caught(const std::function<void()>& f) {
    static thread_local Error last(ErrorCode::IOError, "none");
    try {
        f();
    } catch (const Error& e) {
        last = e;
        return last;
    }
    FAIL("expected an error");
    return last;
}

std::optional<double> field(const Error& e, const std::string& name) {
    for (auto& [k, v] : e.fields())
        if (k == name) return v;
    return std::nullopt;
}

fs::path scratch(const std::string& name) { return fs::temp_directory_path() / ("oneshot_io_" + name); }

} // namespace

TEST_CASE("save of load is the identity on every fixture", "[io]") {
    std::size_t seen = 0;
    for (auto& entry : fs::directory_iterator(kData)) {
        if (entry.path().extension() != ".json") continue;
        ++seen;
        INFO(entry.path().filename().string());
        auto first = loadState(entry.path().string());
        auto tmp = scratch(entry.path().filename().string());
        saveState(tmp.string(), first);
        auto second = loadState(tmp.string());
        auto a = io::canonical(io::toJson(first)), b = io::canonical(io::toJson(second));
        CHECK(a == b);
        CHECK(io::readFile(tmp.string()) == a + "\n");
        CHECK(first.index() == second.index());
        // values survive exactly: the serialized form equals the input wherever the input spelled a field
        auto original = io::parseText(io::readFile(entry.path().string()));
        auto back = io::toJson(first);
        for (auto& [k, v] : original.items()) {
            if (k == "conditionals" || k == "parties" || k == "states") continue; // nested densities gain an explicit im
            CHECK(back.at(k) == v);
        }
        fs::remove(tmp);
    }
    CHECK(seen >= 10);
}

TEST_CASE("classical 2x2 loads as a classical joint", "[io]") {
    auto v = loadState((kData / "correlated_bit.json").string());
    REQUIRE(std::holds_alternative<ClassicalJoint>(v));
    const auto& c = std::get<ClassicalJoint>(v).state;
    CHECK(c.dims == Dims{2, 2});
    CHECK(c.diagonal() == std::vector<double>{0.5, 0, 0, 0.5});
    CHECK(c.isClassical());

    auto flat = io::fromJson(io::parseText(R"({"kind":"classical","dims":[2,2],"probs":[0.5,0,0,0.5]})"));
    CHECK(std::get<ClassicalJoint>(flat).state.diagonal() == c.diagonal());
}

TEST_CASE("kinds dispatch to their types", "[io]") {
    CHECK(std::holds_alternative<CQState>(loadState((kData / "qubit_cq.json").string())));
    CHECK(std::holds_alternative<SeparableDecomposition>(loadState((kData / "separable_bit.json").string())));
    CHECK(std::holds_alternative<SchmidtSpectrum>(loadState((kData / "bell_schmidt.json").string())));
    CHECK(std::holds_alternative<PureEnsemble>(loadState((kData / "flagged_ensemble.json").string())));
    auto rho = std::get<DensityMatrix>(loadState((kData / "rho_p.json").string()));
    CHECK(rho.m(0, 1) == cplx(0.1, 0.05));
    CHECK(rho.m(1, 0) == cplx(0.1, -0.05));
}

TEST_CASE("validation failures carry codes and fields", "[io]") {
    auto& dims = caught([] { loadState((kData / "invalid" / "bad_dims.json").string()); });
    CHECK(dims.code() == ErrorCode::DimMismatch);

    auto& psd = caught([] { loadState((kData / "invalid" / "not_psd.json").string()); });
    CHECK(psd.code() == ErrorCode::NotPSD);
    REQUIRE(field(psd, "eigenvalue"));
    CHECK(*field(psd, "eigenvalue") == Catch::Approx(-0.2).margin(1e-12));

    auto& trunc = caught([] { loadState((kData / "invalid" / "truncated.json").string()); });
    CHECK(trunc.code() == ErrorCode::ParseError);
    CHECK(field(trunc, "byte"));

    auto& missing = caught([] { loadState((kData / "invalid" / "missing_field.json").string()); });
    CHECK(missing.code() == ErrorCode::ParseError);
    CHECK(std::string(missing.what()).find("conditionals") != std::string::npos);

    CHECK(caught([] { io::fromJson(io::parseText(R"({"kind":"tensor"})")); }).code() == ErrorCode::ParseError);
    CHECK(caught([] { io::fromJson(io::parseText(R"({"kind":"classical","dims":[2,2],"probs":[0.5,0.5]})")); }).code() ==
          ErrorCode::DimMismatch);
    CHECK(caught([] { io::fromJson(io::parseText(R"({"kind":"density","dims":[2],"re":[[1,"a"],[0,0]]})")); }).code() ==
          ErrorCode::ParseError);
    CHECK(caught([] { loadState("/nonexistent/file.json"); }).code() == ErrorCode::IOError);
}

TEST_CASE("canonical form and digest", "[io]") {
    auto a = io::parseText(R"({"b":1,"a":[0.1,2.5e-3],"c":{"z":true,"y":null}})");
    auto b = io::parseText("{ \"c\": {\"y\": null, \"z\": true},\n \"a\": [0.1, 0.0025], \"b\": 1 }");
    CHECK(io::canonical(a) == R"({"a":[0.1,0.0025],"b":1,"c":{"y":null,"z":true}})");
    CHECK(io::canonical(a) == io::canonical(b));
    CHECK(io::sha256Hex(io::canonical(a)) == io::sha256Hex(io::canonical(b)));
    // FIPS 180-2 test vector
    CHECK(io::sha256Hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    CHECK(io::sha256Hex("").size() == 64);
}

TEST_CASE("reported numbers", "[io]") {
    CHECK(io::bits(1.0 / 3).get<double>() == 0.333333333333);
    CHECK(io::bits(-0.0).dump() == "0.0");
    CHECK(io::bits(6e-33).dump() == "0.0");
    CHECK(io::bits(2e-13).get<double>() == 2e-13);
    CHECK(io::bits(std::numeric_limits<double>::infinity()) == "Infinity");
    CHECK(io::bits(-std::numeric_limits<double>::infinity()) == "-Infinity");
    CHECK(io::bits(std::log2(3.0)).dump() == "1.58496250072");
}
