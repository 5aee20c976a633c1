// End-to-end checks of the installed CLI binary (path in $SYNTHKIT_CLI).
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>
#include <unistd.h>

#include <json.hpp>

#include "helpers.hpp"
#include "synthkit/tabular.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string cli_path() {
    const char* env = std::getenv("SYNTHKIT_CLI");
    REQUIRE_MESSAGE(env != nullptr, "SYNTHKIT_CLI must point at the synthkit binary");
    return env;
}

int run_cli(const std::string& args) {
    const std::string command = cli_path() + " " + args + " > /dev/null 2>&1";
    const int status = std::system(command.c_str());
    REQUIRE(status != -1);
    return WEXITSTATUS(status);
}

struct Workspace {
    fs::path dir;

    Workspace() {
        dir = fs::temp_directory_path() / ("synthkit_cli_" + std::to_string(::getpid()) + "_" +
                                           std::to_string(counter()++));
        fs::create_directories(dir);
    }
    ~Workspace() {
        std::error_code ec;
        fs::remove_all(dir, ec);
    }

    static int& counter() {
        static int c = 0;
        return c;
    }

    std::string path(const std::string& name) const { return (dir / name).string(); }

    void write(const std::string& name, const std::string& contents) const {
        std::ofstream out(dir / name);
        out << contents;
    }
};

// Small mixed-type dataset: income depends on hours; city/job quasi-ids.
void write_dataset(const Workspace& ws, bool drop_rare_level) {
    synthkit::Rng rng(2024);
    std::ostringstream real;
    real << "hours,age,city,job,income\n";
    for (int i = 0; i < 240; ++i) {
        const double hours = 20.0 + 30.0 * rng.uniform();
        const double age = 18.0 + 50.0 * rng.uniform();
        const char* city = i % 3 == 0 ? "north" : (i % 3 == 1 ? "south" : "east");
        const char* job = i % 2 ? "trade" : "office";
        const char* income = hours > 35.0 ? "high" : "low";
        real << hours << ',' << age << ',' << city << ',' << job << ',' << income << '\n';
    }
    // A rare city level carried by two rows.
    real << "30,40,westend,trade,low\n";
    real << "31,41,westend,office,low\n";
    ws.write("real.csv", real.str());

    std::ostringstream synth;
    synth << "hours,age,city,job,income\n";
    synthkit::Rng rng2(77);
    for (int i = 0; i < 200; ++i) {
        const double hours = 20.0 + 30.0 * rng2.uniform();
        const double age = 18.0 + 50.0 * rng2.uniform();
        const char* city = drop_rare_level ? (i % 3 == 0 ? "north" : (i % 3 == 1 ? "south" : "east"))
                                           : (i % 4 == 0 ? "westend"
                                                         : (i % 3 == 0 ? "north" : (i % 3 == 1 ? "south" : "east")));
        const char* job = i % 2 ? "trade" : "office";
        const char* income = hours > 35.0 ? "high" : "low";
        synth << hours << ',' << age << ',' << city << ',' << job << ',' << income << '\n';
    }
    ws.write("synth.csv", synth.str());

    ws.write("schema.cfg",
             "column = hours numeric\n"
             "column = age numeric\n"
             "column = city categorical quasi_identifier\n"
             "column = job categorical quasi_identifier\n"
             "column = income categorical target\n");

    std::ostringstream cfg;
    cfg << "[paths]\n"
        << "real = " << ws.path("real.csv") << "\n"
        << "synthetic = " << ws.path("synth.csv") << "\n"
        << "schema = " << ws.path("schema.cfg") << "\n"
        << "output = " << ws.path("out") << "\n"
        << "[columns]\n"
        << "sensitive = job\n"
        << "[filter]\n"
        << "taus = 0.4, 0.15\n"
        << "sample_size = 60\n"
        << "[patch]\n"
        << "batch = 120\n"
        << "[protocol]\n"
        << "seed = 31\n"
        << "pfi_permutations = 2\n"
        << "density_k = 10\n";
    ws.write("config.ini", cfg.str());
}

json read_json(const std::string& path) {
    std::ifstream in(path);
    REQUIRE_MESSAGE(in.good(), path);
    return json::parse(in);
}

}  // namespace

TEST_CASE("detect exits 1 when a level is missing and 0 when covered") {
    Workspace ws;
    write_dataset(ws, true);
    CHECK(run_cli("detect --config " + ws.path("config.ini")) == 1);
    const json report = read_json(ws.path("out") + "/detect.json");
    CHECK(report["results"]["missing_level_count"].get<int>() == 1);
    CHECK(report["results"]["missing_modes"]["city"][0].get<std::string>() == "westend");

    Workspace ws2;
    write_dataset(ws2, false);
    CHECK(run_cli("detect --config " + ws2.path("config.ini")) == 0);
}

TEST_CASE("detect exits 2 on a broken config") {
    Workspace ws;
    write_dataset(ws, true);
    CHECK(run_cli("detect --config " + ws.path("does_not_exist.ini")) == 2);
    CHECK(run_cli("detect --config " + ws.path("config.ini") + " --schema " + ws.path("nope.cfg")) == 2);
}

TEST_CASE("patch repairs the dropped level end to end") {
    Workspace ws;
    write_dataset(ws, true);
    // Fit the generator on the synthetic support (which lacks the rare level).
    const int code = run_cli("patch --config " + ws.path("config.ini") + " --generator-fit " +
                             ws.path("synth.csv"));
    CHECK(code == 0);
    const json report = read_json(ws.path("out") + "/patch_report.json");
    CHECK(report["results"]["converged"].get<bool>());
    CHECK(report["results"]["mode_repair"]["srr"].get<double>() == 1.0);
    CHECK(report["results"]["mode_repair"]["patched_levels"].get<int>() ==
          report["results"]["mode_repair"]["missing_pre"].get<int>());

    // The patched CSV really covers the level.
    const auto schema = synthkit::load_schema(ws.path("schema.cfg"));
    const auto patched = synthkit::load_csv(ws.path("out") + "/patched.csv", schema);
    bool found = false;
    for (std::size_t r = 0; r < patched.rows(); ++r) {
        found |= patched.categorical("city").label(r) == "westend";
    }
    CHECK(found);
}

TEST_CASE("patch with nothing missing emits the initial sample and no srr") {
    Workspace ws;
    write_dataset(ws, false);
    // Fit on the full real table and draw a large batch so every level
    // (including the rare one) appears in the initial sample.
    const int code = run_cli("patch --config " + ws.path("config.ini") + " --generator-fit " +
                             ws.path("real.csv") + " --batch 2000");
    CHECK(code == 0);
    const json report = read_json(ws.path("out") + "/patch_report.json");
    CHECK_FALSE(report["results"]["mode_repair"].contains("srr"));
    CHECK(report["results"]["mode_repair"]["missing_pre"].get<int>() == 0);
}

TEST_CASE("filter command writes the filtered table and report") {
    Workspace ws;
    write_dataset(ws, false);
    const int code = run_cli("filter --config " + ws.path("config.ini") + " --tau 0.4");
    CHECK(code == 0);
    const json report = read_json(ws.path("out") + "/filter_report.json");
    CHECK(report["results"]["filter"]["tau"].get<double>() == 0.4);
    CHECK(report["results"]["filter"]["final_eps"].get<double>() < 0.4);
    const auto schema = synthkit::load_schema(ws.path("schema.cfg"));
    const auto filtered = synthkit::load_csv(ws.path("out") + "/filtered.csv", schema);
    CHECK(filtered.rows() == 60);
}

TEST_CASE("infeasible filter exits 3") {
    Workspace ws;
    write_dataset(ws, false);
    const int code = run_cli("filter --config " + ws.path("config.ini") +
                             " --generator bootstrap_jitter --sigma 0 --tau 0.05 --max-proposals 50");
    CHECK(code == 3);
    const json report = read_json(ws.path("out") + "/filter_report.json");
    CHECK(report["results"]["filter"]["feasibility"].get<std::string>() == "budget_exhausted");
}

TEST_CASE("eval produces a byte-identical results block across reruns") {
    Workspace ws;
    write_dataset(ws, false);
    REQUIRE(run_cli("eval --config " + ws.path("config.ini")) == 0);
    const std::string first = read_json(ws.path("out") + "/report.json")["results"].dump();
    REQUIRE(run_cli("eval --config " + ws.path("config.ini")) == 0);
    const std::string second = read_json(ws.path("out") + "/report.json")["results"].dump();
    CHECK(first == second);
}

TEST_CASE("eval toggles drop whole sections") {
    Workspace ws;
    write_dataset(ws, false);
    REQUIRE(run_cli("eval --config " + ws.path("config.ini") + " --utility false --privacy false") == 0);
    const json report = read_json(ws.path("out") + "/report.json");
    const auto& cell = report["results"]["cells"][0];
    CHECK(cell.contains("fidelity"));
    CHECK_FALSE(cell.contains("utility"));
    CHECK_FALSE(cell.contains("privacy"));
}

TEST_CASE("sweep emits per-tau tables, summaries, and bit-exact CSV numbers") {
    Workspace ws;
    write_dataset(ws, false);
    REQUIRE(run_cli("sweep --config " + ws.path("config.ini")) == 0);
    const json report = read_json(ws.path("out") + "/report.json");
    const auto& cells = report["results"]["cells"];
    REQUIRE(cells.size() == 3);  // baseline + two taus
    CHECK(cells[0]["tau"].is_null());
    CHECK(cells[1]["tau"].get<double>() == 0.4);
    CHECK(cells[2]["tau"].get<double>() == 0.15);
    CHECK(fs::exists(ws.path("out") + "/filtered_tau0.4.csv"));
    CHECK(fs::exists(ws.path("out") + "/filtered_tau0.15.csv"));

    // Every summary.csv value reparses to the exact JSON byte representation.
    std::ifstream summary(ws.path("out") + "/summary.csv");
    REQUIRE(summary.good());
    std::string line;
    std::getline(summary, line);
    CHECK(line == "variant,tau,metric,value");
    std::size_t rows = 0;
    while (std::getline(summary, line)) {
        ++rows;
        const auto last_comma = line.rfind(',');
        const std::string value = line.substr(last_comma + 1);
        const json parsed = json::parse(value);
        CHECK(parsed.dump() == value);
    }
    CHECK(rows > 10);

    // Spot-check one value against the JSON report.
    const double baseline_js = cells[0]["fidelity"]["total_js_bits"].get<double>();
    std::ifstream totals(ws.path("out") + "/total_js_vs_tau.csv");
    std::getline(totals, line);  // header
    std::getline(totals, line);  // baseline row
    std::istringstream row(line);
    std::string field;
    std::getline(row, field, ',');  // variant
    std::getline(row, field, ',');  // tau label
    CHECK(field == "baseline");
    std::getline(row, field, ',');
    CHECK(json::parse(field).get<double>() == baseline_js);
}

TEST_CASE("report subcommand rebuilds summaries from an existing report") {
    Workspace ws;
    write_dataset(ws, false);
    REQUIRE(run_cli("sweep --config " + ws.path("config.ini")) == 0);
    const auto before = [&] {
        std::ifstream in(ws.path("out") + "/summary.csv");
        std::stringstream ss;
        ss << in.rdbuf();
        return ss.str();
    }();
    fs::remove(ws.path("out") + "/summary.csv");
    REQUIRE(run_cli("report --config " + ws.path("config.ini")) == 0);
    const auto after = [&] {
        std::ifstream in(ws.path("out") + "/summary.csv");
        std::stringstream ss;
        ss << in.rdbuf();
        return ss.str();
    }();
    CHECK(before == after);
}

TEST_CASE("config flags override file settings") {
    Workspace ws;
    write_dataset(ws, false);
    REQUIRE(run_cli("filter --config " + ws.path("config.ini") + " --tau 0.9 --sample-size 25") == 0);
    const json report = read_json(ws.path("out") + "/filter_report.json");
    CHECK(report["results"]["filter"]["tau"].get<double>() == 0.9);
    const auto schema = synthkit::load_schema(ws.path("schema.cfg"));
    CHECK(synthkit::load_csv(ws.path("out") + "/filtered.csv", schema).rows() == 25);
}

TEST_CASE("eval surfaces module worked values end to end") {
    Workspace ws;
    ws.write("real.csv", "x,c\n0,a\n2,b\n");
    ws.write("synth.csv", "x,c\n1,a\n3,a\n");
    ws.write("schema.cfg", "column = x numeric\ncolumn = c categorical\n");
    ws.write("config.ini",
             "[paths]\nreal = " + ws.path("real.csv") + "\nsynthetic = " + ws.path("synth.csv") +
                 "\nschema = " + ws.path("schema.cfg") + "\noutput = " + ws.path("out") +
                 "\n[metrics]\nutility = false\nprivacy = false\n");
    REQUIRE(run_cli("eval --config " + ws.path("config.ini")) == 0);
    const json report = read_json(ws.path("out") + "/report.json");
    const auto& fidelity = report["results"]["cells"][0]["fidelity"];
    // JS of (0.5,0.5) vs (1,0): 0.311278... bits; Cohen's d of {0,2} vs {1,3}: 1/sqrt(2).
    CHECK(fidelity["total_js_bits"].get<double>() == doctest::Approx(0.3112781244591328).epsilon(1e-12));
    CHECK(fidelity["numeric"]["x"]["cohens_d"].get<double>() ==
          doctest::Approx(0.7071067811865476).epsilon(1e-12));
}

TEST_CASE("sweep reruns are byte-identical in the results block") {
    Workspace ws;
    write_dataset(ws, false);
    REQUIRE(run_cli("sweep --config " + ws.path("config.ini")) == 0);
    const std::string first = read_json(ws.path("out") + "/report.json")["results"].dump();
    REQUIRE(run_cli("sweep --config " + ws.path("config.ini")) == 0);
    const std::string second = read_json(ws.path("out") + "/report.json")["results"].dump();
    CHECK(first == second);
}

TEST_CASE("patch non-convergence exits 3 and still emits partial metrics") {
    Workspace ws;
    write_dataset(ws, true);
    const int code = run_cli("patch --config " + ws.path("config.ini") + " --generator-fit " +
                             ws.path("synth.csv") + " --max-rounds 0");
    CHECK(code == 3);
    const json report = read_json(ws.path("out") + "/patch_report.json");
    CHECK_FALSE(report["results"]["converged"].get<bool>());
    CHECK(report["results"]["mode_repair"]["missing_post"].get<int>() > 0);
    CHECK(fs::exists(ws.path("out") + "/patched.csv"));
}

TEST_CASE("columns referenced by the config must exist in the schema") {
    Workspace ws;
    write_dataset(ws, false);
    CHECK(run_cli("eval --config " + ws.path("config.ini") + " --sensitive no_such_column") == 2);
}
