#include <CLI11.hpp>

#include <chrono>
#include <cstdlib>
#include <functional>
#include <iostream>

#include <oneshot/oneshot.hpp>

using namespace oneshot;

namespace {

constexpr const char* kToolVersion = "0.1.0";

struct RunConfig {
    std::uint64_t seed = 0;
    int workers = 1;
    std::optional<double> tolSearch;
    std::string out;
    std::string format = "json";
    bool timing = false;
};

// What a subcommand hands back to the emitter.
struct Outcome {
    Json result;
    std::string certified = "exact";
    std::vector<Json> rows;          // tabular commands only
    std::vector<std::string> columns;
};

class UsageError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

RunConfig cfg;
std::vector<Json> inputDocs;

Loaded loadInput(const std::string& path) {
    auto doc = io::parseText(io::readFile(path));
    inputDocs.push_back(doc);
    return io::fromJson(doc);
}

const char* kindName(const Loaded& v) {
    static const char* names[] = {"density", "classical", "cq", "separable", "schmidt", "ensemble"};
    return names[v.index()];
}

DensityMatrix asDensity(const Loaded& v) {
    if (auto* d = std::get_if<DensityMatrix>(&v)) return *d;
    if (auto* c = std::get_if<ClassicalJoint>(&v)) return c->state;
    if (auto* q = std::get_if<CQState>(&v)) return q->assemble();
    if (auto* s = std::get_if<SeparableDecomposition>(&v)) return s->reconstruct();
    if (auto* e = std::get_if<PureEnsemble>(&v)) {
        Mat m(dimProduct(e->states.front().dims));
        for (std::size_t x = 0; x < e->states.size(); ++x) m += Mat::outer(e->states[x].amplitudes) * cplx(e->probs[x]);
        return unchecked(m, e->states.front().dims);
    }
    fail(ErrorCode::ParseError, std::string("a '") + kindName(v) + "' input has no density matrix");
}

template <class T>
const T& expect(const Loaded& v, const char* want) {
    if (auto* p = std::get_if<T>(&v)) return *p;
    fail(ErrorCode::ParseError, std::string("expected a '") + want + "' input, got '" + kindName(v) + "'");
}

CommonInfoTarget asTarget(const Loaded& v) {
    if (auto* s = std::get_if<SeparableDecomposition>(&v)) return separableTarget(*s);
    auto rho = asDensity(v);
    if (!rho.isClassical(1e-12)) fail(ErrorCode::ClassicalOnly, "need a classical joint or a separable decomposition");
    return classicalTarget(rho);
}

SearchConfig searchConfig(int restarts = 8) {
    SearchConfig s;
    s.restarts = restarts;
    s.seed = cfg.seed;
    s.workers = cfg.workers;
    if (cfg.tolSearch) s.tolerance = *cfg.tolSearch;
    return s;
}

CommonInfoConfig commonConfig(int restarts = 8) {
    CommonInfoConfig c;
    c.search = searchConfig(restarts);
    return c;
}

Json nums(const std::vector<double>& v) {
    Json a = Json::array();
    for (double x : v) a.push_back(io::bits(x));
    return a;
}

Json matrix(const Mat& m) {
    Json re = Json::array(), im = Json::array();
    for (std::size_t i = 0; i < m.rows(); ++i) {
        Json r = Json::array(), c = Json::array();
        for (std::size_t k = 0; k < m.cols(); ++k) {
            r.push_back(io::bits(m(i, k).real()));
            c.push_back(io::bits(m(i, k).imag()));
        }
        re.push_back(r);
        im.push_back(c);
    }
    return {{"re", re}, {"im", im}};
}

Json density(const DensityMatrix& d) {
    Json j = matrix(d.m);
    j["dims"] = d.dims;
    return j;
}

Json extensionJson(const MarkovExtension& e) {
    Json parties = Json::array();
    for (auto& p : e.partyConditionals) {
        Json list = Json::array();
        for (auto& c : p) list.push_back(e.classicalFlag ? nums(c.diagonal()) : density(c));
        parties.push_back(list);
    }
    return {{"seed", nums(e.seed)}, {"classical", e.classicalFlag}, {"parties", parties}};
}

Json commonJson(const CommonInfoResult& r) {
    Json j{{"valueBits", io::bits(r.valueBits)},
           {"extension", extensionJson(r.extension)},
           {"residualMarginalError", io::bits(r.residualMarginalError)}};
    if (r.ballDistance) j["ballDistance"] = io::bits(*r.ballDistance);
    return j;
}

std::vector<double> parseList(const std::string& s, const char* what) {
    std::vector<double> v;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        char* end = nullptr;
        double x = std::strtod(tok.c_str(), &end);
        if (tok.empty() || *end != '\0') throw UsageError(std::string("bad number in ") + what + ": '" + tok + "'");
        v.push_back(x);
    }
    if (v.empty()) throw UsageError(std::string(what) + " is empty");
    return v;
}

// ------------------------------------------------------------------ commands

Outcome cmdState(const std::string& in, const std::vector<std::size_t>& keep) {
    auto v = loadInput(in);
    Outcome o;
    if (auto* s = std::get_if<SchmidtSpectrum>(&v)) {
        std::vector<double> sq;
        for (double a : s->amplitudes) sq.push_back(a * a);
        o.result = {{"kind", "schmidt"}, {"schmidtRank", schmidtRank(*s)}, {"entanglementBits", io::bits(shannon(sq))}};
        return o;
    }
    auto rho = asDensity(v);
    auto w = eigvalsh(rho.m);
    std::reverse(w.begin(), w.end());
    o.result = {{"kind", kindName(v)},
                {"dims", rho.dims},
                {"trace", io::bits(rho.trace())},
                {"normalized", rho.normalized},
                {"classical", rho.isClassical(1e-12)},
                {"rank", numericalRank(rho)},
                {"eigenvalues", nums(w)},
                {"entropyBits", io::bits(vonNeumann(rho))},
                {"h0Bits", io::bits(h0(rho))},
                {"hRBits", io::bits(hR(rho))}};
    if (rho.dims.size() == 2 && rho.normalized) {
        auto r = purificationSchmidtRanks(rho);
        o.result["purificationRanks"] = {{"AR:B", r.srAR_B}, {"A:BR", r.srA_BR}};
    }
    if (!keep.empty()) o.result["reduced"] = density(partialTrace(rho, keep));
    return o;
}

Outcome cmdDivergence(const std::string& kind, const std::string& p, const std::string& q, std::optional<double> eps,
                      std::optional<double> alpha) {
    auto P = asDensity(loadInput(p)), Q = asDensity(loadInput(q));
    auto needEps = [&] {
        if (!eps) fail(ErrorCode::EpsilonRequired, "--eps is required for kind " + kind);
        return *eps;
    };
    Outcome o;
    DivergenceResult r;
    if (kind == "kl") r.valueBits = relEntropy(P, Q);
    else if (kind == "dmax") r = dMax(P, Q);
    else if (kind == "dh") r = dHypo(P, Q, needEps());
    else if (kind == "ds") r.valueBits = dInfoSpectrum(P, Q, needEps());
    else if (kind == "d0") r.valueBits = dBarZero(P, Q);
    else {
        if (!alpha) throw UsageError("--alpha is required for kind " + kind);
        r.valueBits = renyi(P, Q, *alpha, kind == "renyi-sandwiched" ? RenyiFlavor::Sandwiched : RenyiFlavor::Petz);
        r.method = "functionalCalculus";
    }
    o.result = {{"kind", kind}, {"valueBits", io::bits(r.valueBits)}, {"method", r.method}};
    if (eps) o.result["eps"] = *eps;
    if (alpha) o.result["alpha"] = *alpha;
    if (r.witness) o.result["witness"] = matrix(*r.witness);
    return o;
}

Outcome cmdMutualInfo(const std::string& in, const std::string& flavor, const std::vector<std::size_t>& cut,
                      std::optional<double> eps, int restarts) {
    auto rho = asDensity(loadInput(in));
    Outcome o;
    o.result = {{"flavor", flavor}, {"cut", cut}};
    if (eps) o.result["eps"] = *eps;
    if (flavor == "down") {
        auto d = miDown(rho, cut, searchConfig(restarts));
        o.result["valueBits"] = io::bits(d.valueBits);
        o.result["witness"] = {{"tauA", matrix(d.tauA)}, {"sigmaB", matrix(d.sigmaB)}};
        o.certified = d.certified ? "exact" : "localSearchUpperBound";
        return o;
    }
    static const std::map<std::string, MIFlavor> flavors{
        {"vn", MIFlavor::VonNeumann}, {"upup", MIFlavor::UpUp}, {"up", MIFlavor::Up}, {"hypo", MIFlavor::Hypo}};
    MIRequest req{rho, cut, flavors.at(flavor), eps, searchConfig(restarts)};
    o.result["valueBits"] = io::bits(mi(req));
    if (flavor == "up" && eps && *eps > 0) o.certified = "localSearchUpperBound";
    return o;
}

Outcome cmdCommonInfo(const std::string& in, const std::string& measure, std::optional<std::size_t> parties,
                      std::optional<double> eps, const std::string& variant, int restarts) {
    auto target = asTarget(loadInput(in));
    if (parties && *parties != target.state.dims.size())
        fail(ErrorCode::DimMismatch, "--parties does not match the input",
             {{"parties", double(*parties)}, {"inputParties", double(target.state.dims.size())}});
    auto c = commonConfig(restarts);
    auto needEps = [&] {
        if (!eps) fail(ErrorCode::EpsilonRequired, "--eps is required for measure " + measure);
        return *eps;
    };
    CommonInfoResult r;
    if (measure == "wyner") r = wynerCI(target, c);
    else if (measure == "cmax") r = cMax(target, c);
    else if (measure == "c0") r = cTildeZero(target, c);
    else if (measure == "ch") r = cTildeH(target, needEps(), c);
    else r = cMaxSmoothed(target, needEps(), variant == "ball" ? SmoothingVariant::BallFirst : SmoothingVariant::ExtensionFirst, c);
    Outcome o;
    o.result = commonJson(r);
    o.result["measure"] = measure;
    if (eps) o.result["eps"] = *eps;
    if (measure == "cmax-smooth") o.result["variant"] = variant;
    o.certified = certificationName(r.certified);
    return o;
}

Json estimateJson(std::size_t M, const CoveringEstimate& e) {
    return {{"M", M}, {"mean", io::bits(e.mean)}, {"stderr", io::bits(e.stdErr)}};
}

Outcome cmdSoftcover(const std::string& in, double eps, std::size_t trials, bool exact, std::optional<double> eta,
                     const std::string& bound, std::size_t sweep, std::size_t maxM) {
    CoveringExperiment exp;
    exp.cq = expect<CQState>(loadInput(in), "cq");
    exp.epsilon = eps;
    exp.trials = trials;
    exp.seed = cfg.seed;
    exp.workers = cfg.workers;
    exp.sizeSchedule.maxM = maxM;
    const auto path = exact ? EvalPath::Exact : EvalPath::Auto;
    Outcome o;
    if (sweep > 0) {
        bool allExact = true;
        for (std::size_t M = 1; M <= sweep; ++M) {
            auto e = expectedCoveringError(exp, M, path);
            allExact = allExact && e.exact;
            o.rows.push_back(estimateJson(M, e));
        }
        o.columns = {"M", "mean", "stderr"};
        o.result = {{"rows", o.rows}};
        o.certified = allExact ? "exact" : "monteCarlo";
        return o;
    }
    auto m = minCodebookSize(exp, path);
    auto b = softCoverBounds(exp.cq, eps, eta.value_or(defaultEta(eps)), bound == "ihypo" ? BoundKind::Ihypo : BoundKind::Imax,
                             searchConfig());
    const auto& k = b.constants;
    o.result = {{"M", m.M},
                {"log2M", io::bits(std::log2(double(m.M)))},
                {"estimate", estimateJson(m.M, m.estimate)},
                {"eps", eps},
                {"bound",
                 {{"kind", bound},
                  {"rhsBits", io::bits(b.rhsBits)},
                  {"miBits", io::bits(b.miBits)},
                  {"outsideProofRange", b.outsideProofRange},
                  {"constants",
                   {{"nu", k.nu},
                    {"nuPrime", k.nuPrime},
                    {"g", io::bits(k.gValue)},
                    {"kappa", io::bits(k.kappaValue)},
                    {"eta", io::bits(k.etaChoice)},
                    {"epsTilde", io::bits(k.epsTilde)},
                    {"epsBar", io::bits(k.epsBar)},
                    {"smoothing", io::bits(k.smoothing)}}}}}};
    o.result["withinBound"] = std::log2(double(m.M)) <= b.rhsBits;
    o.certified = m.estimate.exact ? "exact" : "monteCarlo";
    return o;
}

std::pair<double, double> split(const std::string& s) {
    auto v = parseList(s, "--split");
    if (v.size() != 2) throw UsageError("--split takes two values e1,e2");
    return {v[0], v[1]};
}

DSSConfig dssConfig(std::size_t trials, std::size_t maxM, int restarts) {
    DSSConfig d;
    d.trials = trials;
    d.maxM = maxM;
    d.seed = cfg.seed;
    d.workers = cfg.workers;
    d.commonInfo = commonConfig(restarts);
    return d;
}

Json protocolJson(const DSSProtocol& p) {
    return {{"M", p.codebook.size()},
            {"bits", io::bits(p.bits)},
            {"achievedTD", io::bits(p.achievedTD)},
            {"codebook", {{"symbols", p.codebook.symbols}, {"sourceSeed", p.codebook.sourceSeed}}},
            {"extension", extensionJson(p.extension)}};
}

Outcome cmdDssBuild(const std::string& in, double eps, const std::string& sp, std::size_t trials, std::size_t maxM) {
    auto [e1, e2] = split(sp);
    auto p = buildDSSProtocol(expect<SeparableDecomposition>(loadInput(in), "separable"), eps, e1, e2, dssConfig(trials, maxM, 8));
    Outcome o;
    o.result = protocolJson(p);
    o.result["eps"] = eps;
    o.result["split"] = {e1, e2};
    o.certified = "constructive";
    return o;
}

Outcome cmdDssBounds(const std::string& in, double eps, const std::string& sp, std::size_t trials, std::size_t maxM, int restarts) {
    auto [e1, e2] = split(sp);
    auto r = oneShotBoundsReport(asDensity(loadInput(in)), eps, e1, e2, dssConfig(trials, maxM, restarts));
    Outcome o;
    o.result = {{"lowerBits", io::bits(r.lowerBits)},
                {"achievedBits", io::bits(r.achievedBits)},
                {"upperBits", io::bits(r.upperBits)},
                {"kappaBits", io::bits(r.kappaValue)},
                {"achievedTD", io::bits(r.achievedTD)},
                {"lowerBelowAchieved", r.lowerBelowAchieved},
                {"achievedBelowUpper", r.achievedBelowUpper},
                {"protocol", protocolJson(r.protocol)},
                {"eps", eps},
                {"split", {e1, e2}}};
    o.certified = "localSearchUpperBound";
    return o;
}

Json embezzleJson(const EmbezzleReport& r) {
    return {{"targetSchmidtRank", r.targetSchmidtRank},
            {"n", r.nUsed},
            {"fidelity", io::bits(r.fidelity)},
            {"eps", r.epsilon},
            {"sizeThreshold", io::bits(r.sizeThreshold)},
            {"satisfied", r.satisfied}};
}

Outcome cmdEmbezzleFidelity(const std::string& target, std::size_t n, double eps) {
    Outcome o;
    o.result = embezzleJson(embezzleFidelity(expect<SchmidtSpectrum>(loadInput(target), "schmidt"), n, eps));
    return o;
}

Outcome cmdEmbezzleMinsize(const std::string& target, double eps) {
    auto s = expect<SchmidtSpectrum>(loadInput(target), "schmidt");
    Outcome o;
    o.result = embezzleJson(embezzleFidelity(s, minCatalystSize(s, eps), eps));
    return o;
}

Outcome cmdEmbezzleBounds(const std::string& ens, double eps) {
    auto b = flaggedEmbezzleBounds(expect<PureEnsemble>(loadInput(ens), "ensemble"), eps);
    Outcome o;
    o.result = {{"lowerBits", io::bits(b.lowerBits)},
                {"upperBits", io::bits(b.upperBits)},
                {"lowerRank", b.lowerRank},
                {"catalystN", b.catalystN},
                {"catalystBits", io::bits(b.catalystBits)},
                {"achievedFidelity", io::bits(b.achievedFidelity)},
                {"perFlagFidelity", nums(b.perFlagFidelity)},
                {"ordered", b.ordered},
                {"eps", eps}};
    o.certified = "bound";
    return o;
}

Outcome cmdAepScan(const std::string& in, std::size_t nmax, const std::string& eps, int restarts) {
    AEPScan s;
    s.target = asDensity(loadInput(in));
    s.nMax = nmax;
    s.eps = parseList(eps, "--eps");
    s.cfg = commonConfig(restarts);
    s.workers = cfg.workers;
    auto t = runAEPScan(s);
    Outcome o;
    for (auto& r : t.rows)
        o.rows.push_back({{"n", r.n},
                          {"eps", r.eps},
                          {"measure", measureName(r.measure)},
                          {"valuePerCopy", io::bits(r.valuePerCopy)},
                          {"envelope", io::bits(r.envelope)},
                          {"aboveEnvelope", r.aboveEnvelope}});
    o.columns = {"n", "eps", "measure", "valuePerCopy", "envelope", "aboveEnvelope"};
    o.result = {{"wynerBits", io::bits(t.wynerBits)}, {"rows", o.rows}};
    o.certified = "localSearchUpperBound";
    return o;
}

Outcome cmdAepConverse(const std::string& in, std::size_t n, double eps, int restarts) {
    auto r = checkConverseEnvelope(asDensity(loadInput(in)), n, eps, commonConfig(restarts));
    Outcome o;
    o.result = {{"n", n},
                {"eps", eps},
                {"perCopyUpper", io::bits(r.perCopyUpper)},
                {"wynerBits", io::bits(r.wynerBits)},
                {"h2", io::bits(r.h2)},
                {"envelope", io::bits(r.envelope)},
                {"holds", r.holds}};
    o.certified = "localSearchUpperBound";
    return o;
}

// ------------------------------------------------------------------ output

std::string csvCell(const Json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); }

std::string render(const std::string& command, const Outcome& o, double wallMs) {
    if (cfg.format == "json" || o.columns.empty()) {
        if (cfg.format == "csv") throw UsageError("csv output is only available for tabular commands");
        Json env{{"command", command},
                 {"inputsDigest", io::sha256Hex(io::canonical(Json(inputDocs)))},
                 {"result", o.result},
                 {"certified", o.certified},
                 {"toolVersion", kToolVersion},
                 {"seed", cfg.seed}};
        if (cfg.timing) env["wallTimeMs"] = std::round(wallMs);
        return io::canonical(env) + "\n";
    }
    std::string text;
    if (cfg.format == "jsonl") {
        for (auto& r : o.rows) text += io::canonical(r) + "\n";
        return text;
    }
    for (std::size_t i = 0; i < o.columns.size(); ++i) text += (i ? "," : "") + o.columns[i];
    text += "\n";
    for (auto& r : o.rows) {
        for (std::size_t i = 0; i < o.columns.size(); ++i) text += (i ? "," : "") + csvCell(r.at(o.columns[i]));
        text += "\n";
    }
    return text;
}

void applyEnvironment() {
    if (const char* s = std::getenv("ONESHOT_SEED")) {
        char* end = nullptr;
        errno = 0;
        auto v = std::strtoull(s, &end, 10);
        if (*s == '\0' || *end != '\0' || errno) throw UsageError("ONESHOT_SEED is not a 64-bit unsigned integer");
        cfg.seed = v;
    }
    if (const char* s = std::getenv("ONESHOT_TOL_SEARCH")) {
        char* end = nullptr;
        double v = std::strtod(s, &end);
        if (*s == '\0' || *end != '\0' || !(v > 0)) throw UsageError("ONESHOT_TOL_SEARCH must be a positive number");
        cfg.tolSearch = v;
    }
}

void emitError(const std::string& code, const std::string& msg, const std::vector<std::pair<std::string, double>>& fields = {}) {
    Json j{{"error", code}, {"message", msg}};
    for (auto& [k, v] : fields) j[k] = io::bits(v);
    std::cerr << io::canonical(j) << "\n";
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"One-shot information measures, covering and embezzlement experiments"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kToolVersion);

    app.add_option("--seed", cfg.seed, "RNG seed (ONESHOT_SEED overrides)");
    app.add_option("--workers", cfg.workers, "worker threads")->check(CLI::PositiveNumber);
    app.add_option("--tol-search", cfg.tolSearch, "local search tolerance (ONESHOT_TOL_SEARCH overrides)")->check(CLI::PositiveNumber);
    app.add_option("--out", cfg.out, "output path (default stdout)");
    app.add_option("--format", cfg.format, "json | jsonl | csv")->check(CLI::IsMember({"json", "jsonl", "csv"}));
    app.add_flag("--timing", cfg.timing, "include wallTimeMs in the result envelope");

    std::string command;
    std::function<Outcome()> run;
    auto sub = [&](CLI::App* parent, const char* name, const char* help) {
        auto* s = parent->add_subcommand(name, help);
        s->fallthrough();
        return s;
    };

    std::string in, p, q, kind, flavor, measure, variant = "ext", bound = "imax", splitArg, epsList = "0.05,0.1";
    std::optional<double> eps, alpha, eta;
    std::vector<std::size_t> keep, cut{0};
    std::optional<std::size_t> parties;
    std::size_t trials = 1000, sweep = 0, maxM = 1u << 14, n = 1, nmax = 2;
    int restarts = 8;
    bool exact = false;

    auto* st = sub(&app, "state", "summarize a state");
    st->add_option("--in", in)->required();
    st->add_option("--keep", keep, "subsystems kept by a partial trace");
    st->callback([&] { run = [&] { return cmdState(in, keep); }; command = "state"; });

    auto* dv = sub(&app, "divergence", "one-shot divergences");
    dv->add_option("--kind", kind)->required()->check(CLI::IsMember({"kl", "dmax", "dh", "ds", "d0", "renyi", "renyi-sandwiched"}));
    dv->add_option("--p", p)->required();
    dv->add_option("--q", q)->required();
    dv->add_option("--eps", eps);
    dv->add_option("--alpha", alpha);
    dv->callback([&] { run = [&] { return cmdDivergence(kind, p, q, eps, alpha); }; command = "divergence"; });

    auto* mu = sub(&app, "mutualinfo", "mutual-information flavors");
    mu->add_option("--in", in)->required();
    mu->add_option("--flavor", flavor)->required()->check(CLI::IsMember({"vn", "upup", "up", "down", "hypo"}));
    mu->add_option("--cut", cut, "subsystems forming A")->delimiter(',');
    mu->add_option("--eps", eps);
    mu->add_option("--restarts", restarts)->check(CLI::PositiveNumber);
    mu->callback([&] { run = [&] { return cmdMutualInfo(in, flavor, cut, eps, restarts); }; command = "mutualinfo"; });

    auto* ci = sub(&app, "commoninfo", "common informations over Markov extensions");
    ci->add_option("--in", in)->required();
    ci->add_option("--measure", measure)->required()->check(CLI::IsMember({"wyner", "cmax", "cmax-smooth", "ch", "c0"}));
    ci->add_option("--parties", parties);
    ci->add_option("--eps", eps);
    ci->add_option("--variant", variant, "cmax-smooth order: ball | ext")->check(CLI::IsMember({"ball", "ext"}));
    ci->add_option("--restarts", restarts)->check(CLI::PositiveNumber);
    ci->callback([&] {
        run = [&] { return cmdCommonInfo(in, measure, parties, eps, variant, restarts); };
        command = "commoninfo";
    });

    double epsReq = 0;
    auto* sc = sub(&app, "softcover", "covering error and minimal codebook size");
    sc->add_option("--in", in)->required();
    sc->add_option("--eps", epsReq)->required();
    sc->add_option("--trials", trials)->check(CLI::PositiveNumber);
    sc->add_flag("--exact", exact, "enumerate all codebooks");
    sc->add_option("--eta", eta);
    sc->add_option("--bound", bound)->check(CLI::IsMember({"imax", "ihypo"}));
    sc->add_option("--sweep", sweep, "emit rows for M = 1..N");
    sc->add_option("--max-m", maxM)->check(CLI::PositiveNumber);
    sc->callback([&] {
        run = [&] { return cmdSoftcover(in, epsReq, trials, exact, eta, bound, sweep, maxM); };
        command = "softcover";
    });

    auto* dss = sub(&app, "dss", "distributed source simulation");
    dss->require_subcommand(1);
    std::size_t dssTrials = 256, dssMaxM = 1u << 12;
    for (const char* name : {"build", "bounds"}) {
        bool isBuild = std::string(name) == "build";
        auto* d = sub(dss, name, isBuild ? "build a protocol from a separable decomposition" : "lower, achieved and upper bits");
        d->add_option("--in", in)->required();
        d->add_option("--eps", epsReq)->required();
        d->add_option("--split", splitArg, "e1,e2")->required();
        d->add_option("--trials", dssTrials)->check(CLI::PositiveNumber);
        d->add_option("--max-m", dssMaxM)->check(CLI::PositiveNumber);
        d->add_option("--restarts", restarts)->check(CLI::PositiveNumber);
        d->callback([&, isBuild] {
            command = isBuild ? "dss build" : "dss bounds";
            if (isBuild) run = [&] { return cmdDssBuild(in, epsReq, splitArg, dssTrials, dssMaxM); };
            else run = [&] { return cmdDssBounds(in, epsReq, splitArg, dssTrials, dssMaxM, restarts); };
        });
    }

    auto* em = sub(&app, "embezzle", "embezzling catalysts");
    em->require_subcommand(1);
    double embEps = 0;
    auto* ef = sub(em, "fidelity", "fidelity of the size-n catalyst");
    ef->add_option("--target", in)->required();
    ef->add_option("--n", n)->required()->check(CLI::PositiveNumber);
    ef->add_option("--eps", embEps);
    ef->callback([&] { run = [&] { return cmdEmbezzleFidelity(in, n, embEps); }; command = "embezzle fidelity"; });
    auto* ems = sub(em, "minsize", "smallest catalyst reaching 1 - eps");
    ems->add_option("--target", in)->required();
    ems->add_option("--eps", embEps)->required();
    ems->callback([&] { run = [&] { return cmdEmbezzleMinsize(in, embEps); }; command = "embezzle minsize"; });
    auto* eb = sub(em, "bounds", "flagged ensemble bounds");
    eb->add_option("--ensemble", in)->required();
    eb->add_option("--eps", embEps)->required();
    eb->callback([&] { run = [&] { return cmdEmbezzleBounds(in, embEps); }; command = "embezzle bounds"; });

    auto* ae = sub(&app, "aep", "n-copy scans");
    ae->require_subcommand(1);
    auto* as = sub(ae, "scan", "smoothed per-copy values against the converse envelopes");
    as->add_option("--in", in)->required();
    as->add_option("--nmax", nmax)->check(CLI::PositiveNumber);
    as->add_option("--eps", epsList, "comma separated");
    as->add_option("--restarts", restarts)->check(CLI::PositiveNumber);
    as->callback([&] { run = [&] { return cmdAepScan(in, nmax, epsList, restarts); }; command = "aep scan"; });
    auto* ac = sub(ae, "converse", "one converse envelope check");
    ac->add_option("--in", in)->required();
    ac->add_option("--n", n)->check(CLI::PositiveNumber);
    ac->add_option("--eps", epsReq)->required();
    ac->add_option("--restarts", restarts)->check(CLI::PositiveNumber);
    ac->callback([&] { run = [&] { return cmdAepConverse(in, n, epsReq, restarts); }; command = "aep converse"; });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        applyEnvironment();
        if (!run) throw UsageError("no command given");
        auto t0 = std::chrono::steady_clock::now();
        Outcome o = run();
        double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
        auto text = render(command, o, ms);
        if (cfg.out.empty()) std::cout << text;
        else io::writeFile(cfg.out, text);
        return 0;
    } catch (const UsageError& e) {
        emitError("Usage", e.what());
        std::cerr << app.help();
        return 2;
    } catch (const Error& e) {
        emitError(codeName(e.code()), e.what(), e.fields());
        return isNumericFailure(e.code()) ? 3 : 4;
    } catch (const std::exception& e) {
        emitError("InvalidInput", e.what());
        return 4;
    }
}
