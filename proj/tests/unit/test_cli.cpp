#include "doctest.h"

#include <cstdlib>
#include <sys/wait.h>

#include "helpers.hpp"
#include "hjm3/cli.hpp"
#include "hjm3/sim.hpp"
#include "json_schema.hpp"

namespace fs = std::filesystem;
using testutil::data;

namespace {

// Runs the installed executable; stdout and stderr go to `log`.
int run(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(HJM3_CLI) + " " + args + " > '" + log.string() + "' 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::vector<std::string> schema_errors(const std::string& schema, const fs::path& doc) {
  const auto s = nlohmann::json::parse(testutil::slurp(std::string(HJM3_SCHEMA_DIR) + "/" + schema));
  return testutil::SchemaValidator(s).validate(nlohmann::json::parse(testutil::slurp(doc.string())));
}

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

}  // namespace

TEST_CASE("help and usage errors") {
  const auto dir = testutil::scratch("cli_usage");
  const auto log = dir / "log.txt";
  CHECK(run("--help", log) == hjm3::kExitOk);
  CHECK(testutil::slurp(log.string()).find("simulate") != std::string::npos);
  CHECK(run("simulate --help", log) == hjm3::kExitOk);
  CHECK(run("", log) == hjm3::kExitValidation);
  CHECK(run("frobnicate", log) == hjm3::kExitValidation);
  CHECK(run("simulate --spec " + q(dir / "none.json") + " --init x --out y", log) == hjm3::kExitValidation);
  CHECK(testutil::slurp(log.string()).find("none.json") != std::string::npos);
  CHECK(run("--kernel sse9 simulate --spec " + data("model_a_spec.json") + " --init " + data("model_a_init.csv") +
                " --out " + q(dir / "s.csv"),
            log) == hjm3::kExitValidation);
  CHECK(run("wedge --issuer-stats " + data("wedge_issuers.csv") + " --scheme closest --out " + q(dir / "w.json"), log) ==
        hjm3::kExitValidation);
}

TEST_CASE("in-process dispatch matches the executable") {
  CHECK(hjm3::dispatch({"hjm3", "--help"}) == hjm3::kExitOk);
  CHECK(hjm3::dispatch({"hjm3", "wedge"}) == hjm3::kExitValidation);
}

TEST_CASE("synth, calibrate and simulate pipeline") {
  const auto dir = testutil::scratch("cli_pipeline");
  const auto log = dir / "log.txt";
  const std::string spec = data("model_a_spec.json"), init = data("model_a_init.csv");
  REQUIRE(run("synth --spec " + spec + " --init " + init + " --weeks 400 --seed 5 --out-dir " + q(dir / "syn"), log) == 0);
  for (const char* f : {"nominal.csv", "real.csv", "cdi.csv", "ipca.csv"}) CHECK(fs::exists(dir / "syn" / f));

  {
    std::ofstream c(dir / "calib.json");
    c << R"({"model": "A", "chi": {"basis": "poly", "degree": 0}, "ipca_lag_days": 0,
            "inputs": {"nominal": "syn/nominal.csv", "real": "syn/real.csv", "cdi": "syn/cdi.csv",
                       "ipca": "syn/ipca.csv"}})";
  }
  const std::string ipca_index = data("ipca_index_synthetic.csv");
  REQUIRE(run("calibrate --config " + q(dir / "calib.json") + " --ipca-index " + ipca_index + " --out-dir " +
                  q(dir / "cal"),
              log) == 0);
  CHECK(schema_errors("spec.schema.json", dir / "cal" / "spec.json").empty());
  CHECK(schema_errors("calibration_report.schema.json", dir / "cal" / "report.json").empty());
  CHECK_NOTHROW(hjm3::load_spec((dir / "cal" / "spec.json").string()));
  CHECK(fs::exists(dir / "cal" / "init_curves.csv"));

  // same inputs give the same bytes
  REQUIRE(run("calibrate --config " + q(dir / "calib.json") + " --ipca-index " + ipca_index + " --out-dir " +
                  q(dir / "cal2"),
              log) == 0);
  CHECK(testutil::slurp((dir / "cal" / "spec.json").string()) == testutil::slurp((dir / "cal2" / "spec.json").string()));
  CHECK(testutil::slurp((dir / "cal" / "report.json").string()) ==
        testutil::slurp((dir / "cal2" / "report.json").string()));

  // calibrated spec simulates
  const std::string simargs = " simulate --spec " + q(dir / "cal" / "spec.json") + " --init " +
                              q(dir / "cal" / "init_curves.csv") + " --paths 50 --horizon 1 --seed 3 --out ";
  CHECK(run(simargs + q(dir / "s1.csv"), log) == 0);
  CHECK(run("--threads 3 --kernel scalar" + simargs + q(dir / "s2.csv"), log) == 0);
  CHECK(testutil::slurp((dir / "s1.csv").string()) == testutil::slurp((dir / "s2.csv").string()));

  // missing input in the config is a validation failure
  {
    std::ofstream c(dir / "broken.json");
    c << R"({"model": "A", "inputs": {"nominal": "nowhere.csv"}})";
  }
  CHECK(run("calibrate --config " + q(dir / "broken.json") + " --out-dir " + q(dir / "cal3"), log) == 1);
  {
    std::ofstream c(dir / "garbage.json");
    c << "{not json";
  }
  CHECK(run("calibrate --config " + q(dir / "garbage.json") + " --out-dir " + q(dir / "cal3"), log) == 1);
}

TEST_CASE("simulation config file and record pillars off the initial grid") {
  const auto dir = testutil::scratch("cli_simcfg");
  const auto log = dir / "log.txt";
  {
    std::ofstream c(dir / "sim.json");
    c << R"({"dt": 0.0192307692307692307, "horizon": 0.5, "n_paths": 20, "seed": 11,
            "record_pillars": [0.25, 1, 4, 10], "record_every": 13})";
  }
  REQUIRE(run("simulate --config " + q(dir / "sim.json") + " --spec " + data("model_a_spec.json") + " --init " +
                  data("model_a_init.csv") + " --out " + q(dir / "s.csv"),
              log) == 0);
  const auto s = hjm3::read_sim_csv((dir / "s.csv").string());
  CHECK(s.n_paths == 20);
  CHECK(s.pillars == std::vector<double>{0.25, 1, 4, 10});
  CHECK(s.records() == 3);
}

TEST_CASE("diagnose gate and schema") {
  const auto dir = testutil::scratch("cli_diag");
  const auto log = dir / "log.txt";
  REQUIRE(run("simulate --spec " + data("model_a_spec.json") + " --init " + data("model_a_init.csv") +
                  " --paths 200 --horizon 1 --seed 2 --record-every 13 --out " + q(dir / "s.csv"),
              log) == 0);
  REQUIRE(run("diagnose --sim " + q(dir / "s.csv") + " --horizons 0.25,0.5,1 --out " + q(dir / "d.json"), log) == 0);
  CHECK(schema_errors("diagnostics.schema.json", dir / "d.json").empty());
  const auto d = nlohmann::json::parse(testutil::slurp((dir / "d.json").string()));
  CHECK(d["triangle"]["pass"].get<bool>());
  CHECK(d["martingale"]["rows"].size() == 6);

  // OOS sections
  REQUIRE(run("synth --spec " + data("model_a_spec.json") + " --init " + data("model_a_init.csv") +
                  " --weeks 111 --seed 8 --out-dir " + q(dir / "oos"),
              log) == 0);
  REQUIRE(run("diagnose --sim " + q(dir / "s.csv") + " --spec " + data("model_a_spec.json") + " --oos-nominal " +
                  q(dir / "oos" / "nominal.csv") + " --oos-real " + q(dir / "oos" / "real.csv") + " --oos-cdi " +
                  q(dir / "oos" / "cdi.csv") + " --out " + q(dir / "d2.json"),
              log) == 0);
  CHECK(schema_errors("diagnostics.schema.json", dir / "d2.json").empty());
  const auto d2 = nlohmann::json::parse(testutil::slurp((dir / "d2.json").string()));
  CHECK(d2.contains("coverage"));
  CHECK(d2.contains("oos_vol"));

  // a broken triangle trips the gate
  auto sim = hjm3::read_sim_csv((dir / "s.csv").string());
  sim.curve_row(3, 1, hjm3::CurveField::sIPCA)[2] += 1e-6;
  hjm3::write_sim_csv(sim, (dir / "bad.csv").string());
  CHECK(run("diagnose --gate --sim " + q(dir / "bad.csv") + " --out " + q(dir / "d3.json"), log) == hjm3::kExitGate);
  CHECK(run("diagnose --sim " + q(dir / "bad.csv") + " --out " + q(dir / "d3.json"), log) == hjm3::kExitOk);
  CHECK(run("diagnose --sim " + q(dir / "s.csv") + " --horizons 0.3 --out " + q(dir / "d4.json"), log) == 1);
}

TEST_CASE("wedge report and schema") {
  const auto dir = testutil::scratch("cli_wedge");
  const auto log = dir / "log.txt";
  REQUIRE(run("wedge --issuer-stats " + data("wedge_issuers.csv") + " --duration-diff --out " + q(dir / "w.json"), log) ==
          0);
  CHECK(schema_errors("wedge.schema.json", dir / "w.json").empty());
  const auto w = nlohmann::json::parse(testutil::slurp((dir / "w.json").string()));
  CHECK(w["decomposition"]["summary"]["mean_eta_bp"].get<double>() == doctest::Approx(92.8).epsilon(1e-3));
  CHECK(w.contains("regression_m2"));
  REQUIRE(run("wedge --mode exact --issuer-stats " + data("wedge_issuers.csv") + " --out " + q(dir / "w2.json"), log) ==
          0);
  CHECK(schema_errors("wedge.schema.json", dir / "w2.json").empty());
  CHECK(testutil::slurp((dir / "w.json").string()) != testutil::slurp((dir / "w2.json").string()));
}
