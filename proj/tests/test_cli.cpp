#include "tocol/commands.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

using namespace tocol;
using namespace tocol::cli;
namespace fs = std::filesystem;

namespace {

const fs::path kScenarios = TOCOL_SCENARIO_DIR;

struct TempDir {
    fs::path path;
    TempDir() {
        static int counter = 0;
        path = fs::temp_directory_path() /
               ("tocol_test_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) + "_" +
                ::testing::UnitTest::GetInstance()->current_test_info()->name() + "_" + std::to_string(counter++));
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
    std::vector<std::vector<std::string>> rows;
    std::istringstream in(slurp(p));
    std::string line;
    while (std::getline(in, line)) {
        std::vector<std::string> cells;
        std::stringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        rows.push_back(cells);
    }
    return rows;
}

fs::path write_file(const fs::path& dir, const std::string& name, const std::string& text) {
    const fs::path p = dir / name;
    std::ofstream(p) << text;
    return p;
}

Options quiet_in(const fs::path& dir) {
    Options o;
    o.out_dir = dir;
    o.quiet = true;
    return o;
}

bool has_tmp_files(const fs::path& dir) {
    for (const auto& e : fs::recursive_directory_iterator(dir)) {
        if (e.path().extension() == ".tmp") return true;
    }
    return false;
}

const char* kMinimal = R"({
  "system": "double_integrator",
  "x_start": [0, 0],
  "target": [1, 0],
  "u_bounds": {"lower": [-1], "upper": [1]},
  "N": 20
})";

}  // namespace

TEST(Scenario, ShippedFilesParse) {
    int count = 0;
    for (const auto& e : fs::directory_iterator(kScenarios)) {
        if (e.path().extension() != ".json") continue;
        ++count;
        SCOPED_TRACE(e.path().filename().string());
        const Scenario sc = load_scenario(e.path());
        EXPECT_NO_THROW(sc.build_spec());
    }
    EXPECT_GE(count, 5);
}

TEST(Scenario, DefaultsAndRoundTrip) {
    const Scenario sc = parse_scenario_text(kMinimal);
    EXPECT_EQ(sc.param, ControlParam::constant);
    EXPECT_EQ(sc.form, CollocationForm::compressed);
    EXPECT_EQ(sc.dt_min, 0.0);
    EXPECT_TRUE(std::isinf(sc.dt_max));
    const Json once = to_json(sc);
    const Json twice = to_json(parse_scenario(once));
    EXPECT_EQ(once, twice);
    for (const auto& e : fs::directory_iterator(kScenarios)) {
        const Json j = to_json(load_scenario(e.path()));
        EXPECT_EQ(j, to_json(parse_scenario(j))) << e.path();
    }
}

TEST(Scenario, FreeTargetAndLinearSystem) {
    const Scenario rocket = load_scenario(kScenarios / "rocket.json");
    ASSERT_EQ(rocket.target.size(), 3u);
    EXPECT_FALSE(rocket.target[2].has_value());
    const OcpSpec spec = rocket.build_spec();
    EXPECT_EQ(assemble_nlp(spec).m_eq, spec.N * 3 + 2);

    const Scenario lin = load_scenario(kScenarios / "linear_oscillator.json");
    const SystemModel m = lin.build_model();
    EXPECT_EQ(m.p, 2);
    EXPECT_EQ(m.q, 1);
    EXPECT_EQ(eval_dynamics(m, Vector::Ones(2), Vector::Zero(1)), (Vector(2) << 1, -1).finished());
}

TEST(Scenario, UnknownKeyIsNamed) {
    std::string text = kMinimal;
    text.insert(text.find("\"N\""), "\"dtmin\": 0.1,\n  ");
    try {
        parse_scenario_text(text);
        FAIL() << "expected ScenarioError";
    } catch (const ScenarioError& e) {
        EXPECT_NE(std::string(e.what()).find("dtmin"), std::string::npos) << e.what();
    }
}

TEST(Scenario, SyntaxErrorReportsLine) {
    try {
        parse_scenario_text("{\n  \"system\": \"vdp\",\n  \"N\": 15,,\n}");
        FAIL() << "expected ScenarioError";
    } catch (const ScenarioError& e) {
        EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
    }
}

TEST(Scenario, SemanticErrors) {
    auto broken = [](const std::string& from, const std::string& to) {
        std::string text = kMinimal;
        text.replace(text.find(from), from.size(), to);
        return text;
    };
    EXPECT_THROW(parse_scenario_text(broken("\"N\": 20", "\"N\": 0")), ScenarioError);
    EXPECT_THROW(parse_scenario_text(broken("[1, 0]", "[1, 0, 0]")), ScenarioError);
    EXPECT_THROW(parse_scenario_text(broken("double_integrator", "lorenz")), ScenarioError);
    EXPECT_THROW(parse_scenario_text(broken("\"N\": 20", "\"N\": 20, \"param\": \"cubic\"")), ScenarioError);
    EXPECT_THROW(parse_scenario_text(broken("\"N\": 20", "\"N\": 20, \"dt_min\": 2, \"dt_max\": 1")), ScenarioError);
    EXPECT_THROW(parse_scenario_text(broken("\"N\": 20", "\"N\": 20, \"mpc\": {\"N0\": 3, \"N_min\": 4}")),
                 ScenarioError);
}

TEST(Scenario, PlantMismatchScalesParameters) {
    const Scenario sc = load_scenario(kScenarios / "vdp_mpc_mismatch.json");
    ASSERT_TRUE(sc.mpc.has_value());
    const SystemModel nominal = sc.build_model();
    const SystemModel plant = sc.build_plant();
    const Vector x = (Vector(2) << 0.3, 0.5).finished();
    const Vector u = Vector::Zero(1);
    EXPECT_NE(eval_dynamics(nominal, x, u), eval_dynamics(plant, x, u));
    EXPECT_EQ(eval_dynamics(make_vdp(1.1), x, u), eval_dynamics(plant, x, u));
}

TEST(Io, NumberFormatting) {
    EXPECT_EQ(io::format_number(0.5), "0.5");
    EXPECT_EQ(io::format_number(-2), "-2");
    EXPECT_EQ(io::format_number(1e-20), "1e-20");
    EXPECT_EQ(io::format_number(std::nan("")), "nan");
    EXPECT_EQ(io::format_number(-kInf), "-inf");
    EXPECT_EQ(std::stod(io::format_number(0.1 + 0.2)), 0.1 + 0.2);
}

TEST(Io, CsvWriterChecksWidthAndWritesAtomically) {
    TempDir dir;
    io::CsvWriter csv({"a", "b"});
    csv.row({"1", "2"});
    EXPECT_THROW(csv.row({"1"}), std::invalid_argument);
    csv.save(dir.path / "sub" / "x.csv");
    EXPECT_EQ(slurp(dir.path / "sub" / "x.csv"), "a,b\n1,2\n");
    EXPECT_FALSE(has_tmp_files(dir.path));
}

TEST(Commands, SolveWritesAllFiles) {
    TempDir dir;
    std::ostringstream log;
    const int rc = cmd_solve(kScenarios / "double_integrator.json", quiet_in(dir.path), log);
    EXPECT_EQ(rc, kExitOk) << log.str();
    for (const char* f : {"grid.csv", "solution.csv", "violations.csv", "dynamics_error.csv", "summary.json"}) {
        EXPECT_TRUE(fs::exists(dir.path / f)) << f;
    }
    EXPECT_FALSE(has_tmp_files(dir.path));

    const auto sol = read_csv(dir.path / "solution.csv");
    const std::vector<std::string> header{"t", "x1", "x2", "u1", "viol_u1_lower", "viol_u1_upper"};
    EXPECT_EQ(sol.front(), header);
    for (const auto& row : sol) EXPECT_EQ(row.size(), header.size());

    const Json summary = Json::parse(slurp(dir.path / "summary.json"));
    EXPECT_NEAR(summary["t_f_star"].get<double>(), 2.0, 0.04);
    EXPECT_EQ(summary["solver"]["status"], "optimal");
    EXPECT_EQ(summary["scenario"]["N"], 50);
}

TEST(Commands, SolveReportsNonOptimalOutcome) {
    TempDir dir;
    std::string text = kMinimal;
    text.replace(text.find("\"N\": 20"), 7, "\"N\": 20, \"dt_max\": 0.01");
    const fs::path scenario = write_file(dir.path, "tight.json", text);
    std::ostringstream log;
    EXPECT_EQ(cmd_solve(scenario, quiet_in(dir.path), log), kExitNotOptimal);
    EXPECT_TRUE(fs::exists(dir.path / "summary.json"));
    EXPECT_FALSE(fs::exists(dir.path / "solution.csv"));
}

TEST(Commands, BadScenarioIsInputError) {
    TempDir dir;
    const fs::path scenario = write_file(dir.path, "bad.json", "{\"system\": \"vdp\", \"dtmin\": 1}");
    std::ostringstream log;
    EXPECT_EQ(cmd_solve(scenario, quiet_in(dir.path), log), kExitInputError);
    EXPECT_NE(log.str().find("dtmin"), std::string::npos);
    EXPECT_EQ(cmd_mpc(kScenarios / "vdp_unconstrained.json", quiet_in(dir.path), log), kExitInputError);
}

TEST(Commands, MpcLogsClosedLoop) {
    TempDir dir;
    std::ostringstream log;
    EXPECT_EQ(cmd_mpc(kScenarios / "vdp_mpc.json", quiet_in(dir.path), log), kExitOk) << log.str();
    const auto rows = read_csv(dir.path / "closed_loop.csv");
    const std::vector<std::string> header{"n",      "t_n",         "x1",           "x2",           "N_n",
                                          "dt_star", "t_f_star",   "status",       "wall_time_s", "x_pred_next1",
                                          "x_pred_next2"};
    EXPECT_EQ(rows.front(), header);
    EXPECT_GT(rows.size(), 10u);
    EXPECT_EQ(rows[1][4], "15");
    const Json summary = Json::parse(slurp(dir.path / "summary.json"));
    EXPECT_EQ(summary["status"], "converged");
    EXPECT_TRUE(summary["optimality_principle"]["all_pass"].get<bool>());
    EXPECT_TRUE(fs::exists(dir.path / "lyapunov.csv"));
    EXPECT_FALSE(has_tmp_files(dir.path));
}

TEST(Commands, MpcInfeasibleExitsNonZero) {
    TempDir dir;
    std::ostringstream log;
    EXPECT_EQ(cmd_mpc(kScenarios / "vdp_mpc_infeasible.json", quiet_in(dir.path), log), kExitNotOptimal);
    const Json summary = Json::parse(slurp(dir.path / "summary.json"));
    EXPECT_EQ(summary["status"], "infeasible");
}

TEST(Commands, CompareCoversEveryVariant) {
    TempDir dir;
    std::ostringstream log;
    EXPECT_EQ(cmd_compare(kScenarios / "double_integrator.json", quiet_in(dir.path), log), kExitOk);
    const auto rows = read_csv(dir.path / "compare.csv");
    ASSERT_EQ(rows.size(), 9u);
    EXPECT_EQ(rows[0][4], "n_z");
    const int p = 2, N = 50;
    for (std::size_t i = 1; i < rows.size(); i += 2) {
        EXPECT_EQ(rows[i][1], "compressed");
        EXPECT_EQ(rows[i + 1][1], "uncompressed");
        EXPECT_EQ(std::stoi(rows[i + 1][4]) - std::stoi(rows[i][4]), p * N);
        EXPECT_NEAR(std::stod(rows[i][3]), std::stod(rows[i + 1][3]), 1e-4 * std::stod(rows[i][3]));
    }
}

TEST(Commands, BoundsIsSeedDeterministic) {
    TempDir a, b;
    std::ostringstream log;
    Options oa = quiet_in(a.path), ob = quiet_in(b.path);
    oa.seed = ob.seed = 11;
    EXPECT_EQ(cmd_bounds(kScenarios / "vdp_bounds.json", oa, log), kExitOk);
    EXPECT_EQ(cmd_bounds(kScenarios / "vdp_bounds.json", ob, log), kExitOk);
    EXPECT_EQ(slurp(a.path / "bounds.csv"), slurp(b.path / "bounds.csv"));
    const auto rows = read_csv(a.path / "bounds.csv");
    EXPECT_EQ(rows.size(), 22u);
    EXPECT_EQ(std::stod(rows[1][2]), 0.0);
}

#ifdef TOCOL_CLI_PATH
namespace {
int run_cli(const std::string& args) {
    const int raw = std::system((std::string(TOCOL_CLI_PATH) + " " + args + " >/dev/null 2>&1").c_str());
    return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
}
}  // namespace

TEST(Binary, ExitCodes) {
    TempDir dir;
    const std::string out = " --quiet --out " + dir.path.string();
    EXPECT_EQ(run_cli("solve " + (kScenarios / "vdp_unconstrained.json").string() + out), 0);
    EXPECT_TRUE(fs::exists(dir.path / "summary.json"));
    EXPECT_EQ(run_cli("mpc " + (kScenarios / "vdp_mpc_infeasible.json").string() + out), 2);
    EXPECT_EQ(run_cli("solve " + (dir.path / "missing.json").string()), 1);
    EXPECT_EQ(run_cli("frobnicate"), 1);
    EXPECT_EQ(run_cli(""), 1);
}

TEST(Binary, OutDirFromEnvironment) {
    TempDir dir;
    const std::string cmd = "TOCOL_OUT=" + dir.path.string() + " " + TOCOL_CLI_PATH + " solve --quiet " +
                            (kScenarios / "double_integrator.json").string() + " >/dev/null 2>&1";
    EXPECT_EQ(std::system(cmd.c_str()), 0);
    EXPECT_TRUE(fs::exists(dir.path / "grid.csv"));
}
#endif
