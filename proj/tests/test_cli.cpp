#include <doctest.h>

#include <cstdlib>

#include "helpers.hpp"
#include "riskmc/model.hpp"
#include "riskmc/parser.hpp"

// Exercises the installed binary end to end: exit-code contract, output
// determinism, and the export formats.

namespace {

using namespace riskmc;

std::string bin() {
#ifdef RISKMC_BIN
    return RISKMC_BIN;
#else
    return "./riskmc";
#endif
}

std::string cell() { return testutil::models_dir() + "/cell.riskm"; }

int run(const std::string& args, const std::string& out_file) {
    std::string cmd = bin() + " " + args + " >" + out_file + " 2>&1";
    int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path);
    out << content;
}

} // namespace

TEST_CASE("validate exit codes") {
    CHECK(run("validate " + cell(), "/tmp/riskmc_v1.txt") == 0);

    write_file("/tmp/riskmc_bad.riskm",
               "Mode normal;\nActivity off { }\n"
               "Factor F { desc \"f\"; guard false; detectedBy false; faultProb 2; }\n");
    CHECK(run("validate /tmp/riskmc_bad.riskm", "/tmp/riskmc_v2.txt") == 1);
    std::string diag = testutil::read_file("/tmp/riskmc_v2.txt");
    CHECK(diag.find("probability") != std::string::npos);

    CHECK(run("validate /tmp/riskmc_does_not_exist.riskm", "/tmp/riskmc_v3.txt") == 2);
}

TEST_CASE("build output and determinism") {
    CHECK(run("build " + cell(), "/tmp/riskmc_b1.txt") == 0);
    CHECK(run("build " + cell(), "/tmp/riskmc_b2.txt") == 0);
    std::string a = testutil::read_file("/tmp/riskmc_b1.txt");
    CHECK(a == testutil::read_file("/tmp/riskmc_b2.txt"));
    CHECK(a.rfind("states=", 0) == 0);
    CHECK(a.find("transitions=") != std::string::npos);
    CHECK(a.find("risk_space=") != std::string::npos);

    CHECK(run("--cap 10 build " + cell(), "/tmp/riskmc_b3.txt") == 3);

    // one-factor model spans three risk states
    RiskModel one = restricted_to_factors(testutil::load_cell(), {"HC"});
    write_file("/tmp/riskmc_cell1.riskm", pretty_print(one));
    CHECK(run("build /tmp/riskmc_cell1.riskm", "/tmp/riskmc_b4.txt") == 0);
    CHECK(testutil::read_file("/tmp/riskmc_b4.txt").find("risk_space=3") !=
          std::string::npos);

    // emitted artefacts are byte-identical across runs
    CHECK(run("build " + cell() + " --emit-mdp /tmp/riskmc_m1.json --emit-pgcl "
              "/tmp/riskmc_p1.txt", "/tmp/riskmc_b5.txt") == 0);
    CHECK(run("build " + cell() + " --emit-mdp /tmp/riskmc_m2.json --emit-pgcl "
              "/tmp/riskmc_p2.txt", "/tmp/riskmc_b6.txt") == 0);
    CHECK(testutil::read_file("/tmp/riskmc_m1.json") ==
          testutil::read_file("/tmp/riskmc_m2.json"));
    CHECK(testutil::read_file("/tmp/riskmc_p1.txt") ==
          testutil::read_file("/tmp/riskmc_p2.txt"));
}

TEST_CASE("check exit codes") {
    std::string props = testutil::models_dir() + "/cell_wf.props";
    CHECK(run("check " + cell() + " " + props, "/tmp/riskmc_c1.txt") == 0);

    write_file("/tmp/riskmc_bad.props", "E [ F \"nosuchlabel\" ]\n");
    CHECK(run("check " + cell() + " /tmp/riskmc_bad.props", "/tmp/riskmc_c2.txt") == 1);

    write_file("/tmp/riskmc_empty.props", "// nothing here\n");
    CHECK(run("check " + cell() + " /tmp/riskmc_empty.props", "/tmp/riskmc_c3.txt") == 0);
    CHECK(testutil::read_file("/tmp/riskmc_c3.txt").find("warning") != std::string::npos);
}

TEST_CASE("synth prints values and the accident-freedom triple") {
    CHECK(run("synth " + cell() + " --query c --out-policy /tmp/riskmc_pc.json",
              "/tmp/riskmc_s1.txt") == 0);
    std::string out = testutil::read_file("/tmp/riskmc_s1.txt");
    CHECK(out.find("value=") != std::string::npos);
    CHECK(out.find("accident_freedom=[1,1,1]") != std::string::npos);
    std::string policy = testutil::read_file("/tmp/riskmc_pc.json");
    CHECK(policy.find("\"policy\":[") != std::string::npos);

    // a reward structure with a positive self-loop trap aborts with code 4
    write_file("/tmp/riskmc_trap.riskm",
               "Mode normal;\nVar x : bool init false;\n"
               "Activity work {\n"
               "  action flip by robot { guard true; update x := !x; cost value = 1; }\n"
               "}\n");
    CHECK(run("synth /tmp/riskmc_trap.riskm --objective \"Rmax{\\\"prod\\\"} [ C ]\"",
              "/tmp/riskmc_s2.txt") == 4);
    CHECK(testutil::read_file("/tmp/riskmc_s2.txt").find("end-component") !=
          std::string::npos);
}

TEST_CASE("pareto sweep flag writes the frontier CSV") {
    CHECK(run("synth " + cell() + " --query c --pareto 5 --out-csv /tmp/riskmc_f.csv"
              " --out-policy /tmp/riskmc_fw", "/tmp/riskmc_s3.txt") == 0);
    std::string csv = testutil::read_file("/tmp/riskmc_f.csv");
    CHECK(csv.rfind("w,valueA,valueB,policyFile\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') >= 2);
}

TEST_CASE("export writes policy graphs with the colour scheme") {
    CHECK(run("synth /tmp/riskmc_cell1.riskm --query b --out-policy /tmp/riskmc_pb.json"
              " --dot /tmp/riskmc_g1.dot", "/tmp/riskmc_s4.txt") == 0);
    std::string dot = testutil::read_file("/tmp/riskmc_g1.dot");
    CHECK(dot.rfind("digraph policy", 0) == 0);
    CHECK(dot.find("fillcolor=green") != std::string::npos);
    CHECK(dot.find("fillcolor=orange") != std::string::npos);
    CHECK(dot.find("fillcolor=red") != std::string::npos);   // mishap states
    CHECK(dot.find("color=red") != std::string::npos);       // machine actions
    CHECK(dot.find("color=blue") != std::string::npos);      // cycle progression

    // re-import the policy through the export subcommand
    CHECK(run("export /tmp/riskmc_cell1.riskm --policy /tmp/riskmc_pb.json --dot "
              "/tmp/riskmc_g2.dot", "/tmp/riskmc_s5.txt") == 0);
    CHECK(testutil::read_file("/tmp/riskmc_g2.dot") == dot);

    // controller edges are green under the effort/nuisance policy
    CHECK(run("synth /tmp/riskmc_cell1.riskm --query c --dot /tmp/riskmc_g3.dot",
              "/tmp/riskmc_s6.txt") == 0);
    CHECK(testutil::read_file("/tmp/riskmc_g3.dot").find("color=green") !=
          std::string::npos);
}
