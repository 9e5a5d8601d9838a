#include "kgspec/cli_io.hpp"

#include <gtest/gtest.h>

#include <cstdlib>

using namespace kgspec;
using namespace kgspec::cli_io;
namespace fs = std::filesystem;

namespace {

json interval_config() {
    return json::parse(R"({
        "name": "t",
        "manifold": {"kind": "interval", "length": 1.0},
        "extension": {"kind": "interval_dirichlet"},
        "data": {"phi0": [{"type": "bump", "center": 0.5, "halfwidth": 0.2}],
                 "phidot0": [{"type": "bump", "center": 0.6, "halfwidth": 0.15, "amplitude": [0.3, -0.5]}]},
        "time": {"t_end": 1.0, "steps": 4},
        "grid": {"points": 11}
    })");
}

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("kgspec_test_" + name);
    fs::remove_all(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

std::vector<std::vector<double>> read_csv(const fs::path& p, std::string* header = nullptr) {
    std::ifstream in(p);
    std::string line;
    std::getline(in, line);
    if (header) *header = line;
    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
        std::vector<double> r;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) r.push_back(std::strtod(cell.c_str(), nullptr));
        rows.push_back(r);
    }
    return rows;
}

std::string error_path(const json& j) {
    try {
        parse_config(j);
    } catch (const ConfigError& e) {
        return e.path();
    }
    return "<none>";
}

}  // namespace

TEST(Config, DefaultsAndRoundTrip) {
    const auto c = parse_config(interval_config());
    EXPECT_EQ(c.solver, "spectral");
    EXPECT_EQ(c.steps, 4);
    EXPECT_EQ(c.times().size(), 5u);
    EXPECT_DOUBLE_EQ(c.times().back(), 1.0);
    EXPECT_EQ(c.phidot0.front().amplitude, cplx(0.3, -0.5));
    const json resolved = to_json(c);
    EXPECT_EQ(to_json(parse_config(resolved)), resolved);
}

TEST(Config, EveryExtensionKindRoundTrips) {
    const char* exts[] = {
        R"({"kind": "circle_closure"})",
        R"({"kind": "half_line_robin", "alpha": -0.7})",
        R"({"kind": "first_kind", "theta11": 1, "theta22": -2, "theta12": [0.5, 0.25]})",
        R"({"kind": "second_kind", "w1": 0.6, "w2": [0, 0.8], "theta": -1.5})",
        R"({"kind": "mass_shift", "mu": 2, "inner": {"kind": "interval_dirichlet"}})",
        R"({"kind": "direct_sum", "components": [{"kind": "half_line_robin", "alpha": 0.1},
                                                 {"kind": "half_line_robin", "alpha": 0.2}]})",
    };
    const char* mans[] = {R"({"kind": "circle", "length": 2})", R"({"kind": "half_line"})",
                          R"({"kind": "interval", "length": 1})", R"({"kind": "interval", "length": 1})",
                          R"({"kind": "interval", "length": 1})", R"({"kind": "disjoint_half_lines", "count": 2})"};
    for (int i = 0; i < 6; ++i) {
        json j = {{"manifold", json::parse(mans[i])}, {"extension", json::parse(exts[i])}};
        const auto c = parse_config(j);
        EXPECT_EQ(canonicalize(parse_config(to_json(c)).extension), canonicalize(c.extension)) << exts[i];
    }
}

TEST(Config, ErrorsNameTheField) {
    json j = interval_config();
    j["extension"] = {{"kind", "half_line_robin"}, {"alpha", 3.0}};
    EXPECT_EQ(error_path(j), "extension.alpha");
    j["extension"] = {{"kind", "first_kind"}, {"theta12", {1, "x"}}};
    EXPECT_EQ(error_path(j), "extension.theta12");
    j["extension"] = {{"kind", "nonsense"}};
    EXPECT_EQ(error_path(j), "extension.kind");
    j["extension"] = {{"kind", "half_line_robin"}, {"alpha", 0.2}};  // wrong manifold
    EXPECT_EQ(error_path(j), "extension");

    j = interval_config();
    j["data"]["phi0"][0]["halfwidth"] = -1.0;
    EXPECT_EQ(error_path(j), "data.phi0[0].halfwidth");
    j = interval_config();
    j["time"]["steps"] = 0;
    EXPECT_EQ(error_path(j), "time.steps");
    j = interval_config();
    j["solver"] = "magic";
    EXPECT_EQ(error_path(j), "solver");
    j = interval_config();
    j.erase("manifold");
    EXPECT_EQ(error_path(j), "$.manifold");
    j = interval_config();
    j["extension"] = {{"kind", "direct_sum"}, {"components", {{{"kind", "half_line_robin"}}}}};
    j["manifold"] = {{"kind", "disjoint_half_lines"}, {"count", 1}};
    EXPECT_EQ(error_path(j), "extension.components[0].alpha");
}

TEST(Config, DataOutsideTheManifoldIsRejected) {
    json j = interval_config();
    j["data"]["phi0"][0]["center"] = 0.95;  // support crosses x = 1
    const auto c = parse_config(j);
    EXPECT_THROW(make_data(c, make_operator(c)), ConfigError);
}

TEST(Hash, MatchesGitBlobHash) {
    EXPECT_EQ(git_blob_hash(""), "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391");
    EXPECT_EQ(git_blob_hash("hello\n"), "ce013625030ba8dba906f756967f9e9ca394464a");
    EXPECT_EQ(git_blob_hash(R"({"a":1})"), "daa5053ecf5f9a37b2de733d0751cc1ab53ac010");
}

TEST(Simulate, WritesSchemasAndHashes) {
    const auto dir = scratch("simulate");
    const auto c = parse_config(interval_config());
    const json meta = run_simulate(c, dir);
    for (const char* f : {"meta.json", "spectrum.csv", "snapshots.csv", "conserved.csv"})
        EXPECT_TRUE(fs::exists(dir / f)) << f;
    for (const auto& [name, hash] : meta["files"].items()) EXPECT_EQ(hash, git_blob_hash(slurp(dir / name))) << name;
    EXPECT_EQ(meta["hash"], git_blob_hash(to_json(c).dump()));
    EXPECT_DOUBLE_EQ(meta["t_infinity"].get<double>(), 0.25);  // K = [0.3, 0.75], endpoint 1 is nearer
    EXPECT_EQ(meta["ladder"].size(), 6u);
    EXPECT_EQ(meta["classification"], "positive");
    EXPECT_LT(meta["truncation"]["parseval_defect"].get<double>(), 1e-8);

    std::string header;
    const auto snaps = read_csv(dir / "snapshots.csv", &header);
    EXPECT_EQ(header, "t,x,re_phi,im_phi,re_phidot,im_phidot");
    ASSERT_EQ(snaps.size(), 5u * 10u);  // interior nodes j/11
    const auto cons = read_csv(dir / "conserved.csv", &header);
    EXPECT_EQ(header, "t,E,sigma,leakage,phi_norm");
    ASSERT_EQ(cons.size(), 5u);
    for (const auto& r : cons) {
        EXPECT_NEAR(r[1], cons[0][1], 1e-10 * cons[0][1]);
        EXPECT_NEAR(r[2], cons[0][2], 1e-10 * cons[0][2]);
    }
    read_csv(dir / "spectrum.csv", &header);
    EXPECT_EQ(header, "index,lambda,multiplicity,mode_tag,component,k,re_A,im_A,re_B,im_B");
}

TEST(Simulate, SnapshotsMatchDirectEvolution) {
    const auto dir = scratch("direct");
    const auto c = parse_config(interval_config());
    run_simulate(c, dir);
    const auto op = make_operator(c);
    const auto psi = evolution::solve(op, make_data(c, op), run_options(c, make_data(c, op).support()));
    for (const auto& r : read_csv(dir / "snapshots.csv")) {
        const cplx phi = psi.phi(r[0], geometry::Point{r[1], 0});
        EXPECT_DOUBLE_EQ(r[2], phi.real());
        EXPECT_DOUBLE_EQ(r[3], phi.imag());
    }
}

TEST(Simulate, SigmaColumnEqualsDataNorms) {
    const auto dir = scratch("sigma");
    const auto c = parse_config(interval_config());
    run_simulate(c, dir);
    const auto op = make_operator(c);
    const auto data = make_data(c, op);
    // sigma(psi, psi*) = ||phi0||^2 + ||phidot0||^2, integrated here by Simpson's rule
    auto norm2 = [](const evolution::Profile& f) {
        const int n = 4000;
        double s = 0.0;
        for (int i = 0; i <= n; ++i) {
            const double w = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
            s += w * std::norm(f(geometry::Point{static_cast<double>(i) / n, 0}));
        }
        return s / (3.0 * n);
    };
    const double expected = norm2(data.phi0) + norm2(data.phidot0);
    for (const auto& r : read_csv(dir / "conserved.csv")) EXPECT_NEAR(r[2], expected, 1e-8 * expected);
}

TEST(Simulate, IsDeterministic) {
    const auto c = parse_config(interval_config());
    const json a = run_simulate(c, scratch("det_a"));
    const json b = run_simulate(c, scratch("det_b"));
    EXPECT_EQ(a["files"], b["files"]);
}

TEST(Simulate, BothSolversWriteComparison) {
    json j = interval_config();
    j["solver"] = "both";
    const auto dir = scratch("both");
    run_simulate(parse_config(j), dir);
    ASSERT_TRUE(fs::exists(dir / "snapshots_fd.csv"));
    const json cmp = json::parse(slurp(dir / "comparison.json"));
    EXPECT_EQ(cmp["snapshots"].size(), 5u);
    EXPECT_LT(cmp["max_l2_relative"].get<double>(), 1e-3);
    EXPECT_GT(cmp["max_l2_relative"].get<double>(), 0.0);
}

TEST(Simulate, FDOnlyConservesDiscreteEnergy) {
    json j = interval_config();
    j["solver"] = "fd";
    const auto dir = scratch("fd");
    run_simulate(parse_config(j), dir);
    const auto cons = read_csv(dir / "conserved.csv");
    ASSERT_EQ(cons.size(), 5u);
    for (const auto& r : cons) {
        EXPECT_NEAR(r[1], cons[0][1], 1e-3 * cons[0][1]);
        EXPECT_NEAR(r[2], cons[0][2], 1e-3 * cons[0][2]);
    }
    j["time"]["t_start"] = 0.5;
    EXPECT_THROW(run_simulate(parse_config(j), scratch("fd2")), ConfigError);
}

TEST(Simulate, DirectSumWritesOneTablePerComponent) {
    const json j = json::parse(R"({
        "manifold": {"kind": "disjoint_half_lines", "count": 2},
        "extension": {"kind": "direct_sum", "components": [{"kind": "half_line_robin", "alpha": -0.5},
                                                           {"kind": "half_line_robin", "alpha": 0.0}]},
        "data": {"phi0": [{"type": "bump", "center": 1.0, "halfwidth": 0.3},
                          {"type": "bump", "center": 0.8, "halfwidth": 0.2, "component": 1}]},
        "time": {"t_end": 0.5, "steps": 2},
        "grid": {"points": 21, "extent": 3.0}
    })");
    const auto dir = scratch("sum");
    const json meta = run_simulate(parse_config(j), dir);
    EXPECT_EQ(read_csv(dir / "snapshots.csv").size(), 3u * 21u);
    EXPECT_EQ(read_csv(dir / "snapshots_c1.csv").size(), 3u * 21u);
    EXPECT_EQ(meta["truncation"]["modes"].size(), 2u);
}

TEST(Spectrum, DirichletEigenvaluesAndZeroCriterion) {
    json j = interval_config();
    j["spectrum"] = {{"count", 5}};
    const auto dir = scratch("spectrum");
    const json s = run_spectrum(parse_config(j), dir);
    const auto rows = read_csv(dir / "spectrum.csv");
    ASSERT_EQ(rows.size(), 5u);
    for (int n = 0; n < 5; ++n) EXPECT_NEAR(rows[n][1], std::pow((n + 1) * pi, 2), 1e-9 * rows[n][1]);
    EXPECT_EQ(s["classification"], "positive");
    EXPECT_FALSE(s["zero_criterion"][0]["zero_is_eigenvalue"].get<bool>());

    j["extension"] = {{"kind", "first_kind"}};  // Neumann: zero is an eigenvalue
    EXPECT_TRUE(run_spectrum(parse_config(j), scratch("spectrum2"))["zero_criterion"][0]["zero_is_eigenvalue"]);
}

TEST(Greens, CircleKernelIsSymmetric) {
    json j = interval_config();
    j["manifold"] = {{"kind", "circle"}, {"length", 1.0}};
    j["extension"] = {{"kind", "circle_closure"}};
    j["greens"] = {{"lambda", {-2.0, 0.5}}, {"points", 9}};
    const auto dir = scratch("greens");
    run_greens(parse_config(j), dir);
    const auto rows = read_csv(dir / "greens.csv");
    ASSERT_EQ(rows.size(), 81u);
    for (int a = 0; a < 9; ++a)
        for (int b = 0; b < 9; ++b) {
            EXPECT_NEAR(rows[a * 9 + b][3], rows[b * 9 + a][3], 1e-12);
            EXPECT_NEAR(rows[a * 9 + b][4], rows[b * 9 + a][4], 1e-12);
        }
}

TEST(Verify, CleanRunPassesAndFaultIsCaught) {
    const auto c = parse_config(interval_config());
    const json ok = run_verify(c, scratch("verify"));
    EXPECT_TRUE(ok["pass"].get<bool>()) << ok.dump(2);

    auto faulty = c;
    faulty.fault = "eigenvalue";
    const json bad = run_verify(faulty, scratch("verify_fault"));
    EXPECT_FALSE(bad["pass"].get<bool>());
    for (const auto& ch : bad["checks"]) {
        if (ch["name"] == "eigenvalue_consistency") {
            EXPECT_FALSE(ch["pass"].get<bool>());
        }
    }
}

TEST(Verify, ZeroDataPassesVacuously) {
    json j = interval_config();
    j.erase("data");
    const json rep = run_verify(parse_config(j), scratch("verify_zero"));
    EXPECT_TRUE(rep["pass"].get<bool>()) << rep.dump(2);
}

TEST(Scenarios, AllPresetsParse) {
    const char* env = std::getenv("KGSPEC_SCENARIOS");
    if (!env) GTEST_SKIP() << "KGSPEC_SCENARIOS not set";
    int n = 0;
    for (const auto& e : fs::directory_iterator(env)) {
        if (e.path().extension() != ".json") continue;
        const auto c = load_config(e.path());
        const auto op = make_operator(c);
        EXPECT_NO_THROW(make_data(c, op)) << e.path();
        ++n;
    }
    EXPECT_GE(n, 9);
}
