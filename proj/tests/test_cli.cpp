#include <catch_amalgamated.hpp>

#include <fstream>
#include <sstream>

#include "lpvembed/cli.hpp"
#include "support.hpp"

using namespace lpvembed;
namespace cli = lpvembed::cli;

namespace {

const std::string kModels = std::string(LPVEMBED_SOURCE_DIR) + "/models/";

struct Run {
    int code;
    std::string out, err;
};

template <class Args, class Fn>
Run run(Fn fn, const Args& args) {
    std::ostringstream out, err;
    const int code = fn(args, out, err);
    return {code, out.str(), err.str()};
}

cli::ScenarioArgs disk_scenario() {
    cli::ScenarioArgs sc;
    sc.input = "2*sin(0.2*pi*t)";
    sc.t_end = 15.0;
    return sc;
}

std::string write_file(const std::string& name, const std::string& text) {
    const auto path = testing::temp_dir("cli") / name;
    std::ofstream(path) << text;
    return path.string();
}

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("bundled model files match the built-in texts") {
    for (const auto& b : corpus::kBundled) {
        NlssModel file = load_model(kModels + std::string(b.name) + ".nlss");
        NlssModel builtin = corpus::bundled_model(b.name);
        REQUIRE(file.name == builtin.name);
        for (std::size_t i = 0; i < file.f.size(); ++i) REQUIRE(structurally_equal(file.f[i], builtin.f[i]));
    }
}

TEST_CASE("convert the disk in factor mode") {
    cli::ConvertArgs a;
    a.model = kModels + "unbalanced_disk.nlss";
    a.output = (testing::temp_dir("cli") / "disk_factor.json").string();
    Run r = run(cli::cmd_convert, a);
    INFO(r.err);
    REQUIRE(r.code == cli::kOk);
    REQUIRE(r.out.find("np = 1") != std::string::npos);
    REQUIRE(r.out.find("p1 = sinc(x1)") != std::string::npos);
    REQUIRE(r.out.find("1000 samples") != std::string::npos);
    LpvEmbedding e = load_embedding(a.output);
    REQUIRE(e.model.np == 1);
    REQUIRE(structurally_equal(e.map.entries[0], sinc(variable("x1"))));
    REQUIRE(e.model.range);
    REQUIRE(e.model.range->raw[0].lo == Catch::Approx(-0.2172).margin(1e-4));
}

TEST_CASE("convert the disk in element mode") {
    cli::ConvertArgs a;
    a.model = "builtin:unbalanced_disk";
    a.conv.extract = "element";
    Run r = run(cli::cmd_convert, a);
    REQUIRE(r.code == cli::kOk);
    REQUIRE(r.out.find("p1 = 130.9636") != std::string::npos);
    REQUIRE(r.out.find("*sinc(x1)") != std::string::npos);
}

TEST_CASE("convert the tanh example") {
    cli::ConvertArgs a;
    a.model = "tanh_example";
    a.json = true;
    Run r = run(cli::cmd_convert, a);
    REQUIRE(r.code == cli::kOk);
    json j = json::parse(r.out);
    LpvEmbedding e = embedding_from_json(j);
    // A part is LTI, the only scheduling variable enters C.
    REQUIRE(e.model.np == 1);
    REQUIRE(e.model.A.coeffs[1].isZero(0.0));
    REQUIRE(e.model.C.coeffs[1](0, 0) == 1.0);
    REQUIRE(e.model.C.coeffs[0](0, 0) == 0.0);
    for (double x : {-3.0, -1.0, 0.5, 2.0}) {
        const double p = eval_sched(e.map, Eigen::VectorXd::Constant(1, x), Eigen::VectorXd::Zero(1))[0];
        REQUIRE(p == Catch::Approx(std::tanh(x) / x).margin(1e-9));
    }
    REQUIRE(j["provenance"]["warnings"].size() == 1);
}

TEST_CASE("every bundled example converts in all settings") {
    for (const auto& b : corpus::kBundled)
        for (const char* mode : {"analytic", "numeric"})
            for (const char* ex : {"element", "factor"}) {
                cli::ConvertArgs a;
                a.model = "builtin:" + std::string(b.name);
                a.conv.mode = mode;
                a.conv.extract = ex;
                Run r = run(cli::cmd_convert, a);
                INFO(b.name << " " << mode << " " << ex << ": " << r.err);
                REQUIRE(r.code == cli::kOk);
            }
}

TEST_CASE("convert exit codes") {
    cli::ConvertArgs a;
    a.model = "no_such_model.nlss";
    REQUIRE(run(cli::cmd_convert, a).code == cli::kInputError);

    a.model = write_file("broken.nlss", "format_version 1\nnx 1\nnu 1\nny 1\nf1 = sin(\nh1 = x1\n");
    Run r = run(cli::cmd_convert, a);
    REQUIRE(r.code == cli::kInputError);
    REQUIRE(r.err.find("line 5") != std::string::npos);

    // ln(x1) has no finite value at the origin anchor.
    a.model = write_file("singular.nlss", "format_version 1\nnx 1\nnu 1\nny 1\nf1 = ln(2 + x1) + u1\nh1 = x1\n");
    REQUIRE(run(cli::cmd_convert, a).code == cli::kOk);
    a.model = write_file("domain.nlss", "format_version 1\nnx 1\nnu 1\nny 1\nf1 = sqrt(1 + x1) + u1\nh1 = x1\nbox x1 = -4, 0\nbox u1 = 0, 1\n");
    REQUIRE(run(cli::cmd_convert, a).code == cli::kConversionFailed);

    a.model = "builtin:unbalanced_disk";
    a.conv.mode = "symbolic";
    REQUIRE(run(cli::cmd_convert, a).code == cli::kUsage);
    a.conv.mode = "numeric";
    a.threshold = 1e-20;
    REQUIRE(run(cli::cmd_convert, a).code == cli::kCheckFailed);
}

TEST_CASE("convert with an anchor") {
    cli::ConvertArgs a;
    a.model = "builtin:unbalanced_disk";
    a.conv.anchor = "x=0.5,0;u=1";
    a.json = true;
    Run r = run(cli::cmd_convert, a);
    REQUIRE(r.code == cli::kOk);
    json j = json::parse(r.out);
    REQUIRE(j["anchor"]["x"][0] == 0.5);
    REQUIRE(j["verification"]["state_residual"].get<double>() <= 1e-10);
    a.conv.anchor = "x=1";
    REQUIRE(run(cli::cmd_convert, a).code == cli::kUsage);
}

TEST_CASE("range command") {
    cli::ConvertArgs c;
    c.model = "builtin:unbalanced_disk";
    c.output = (testing::temp_dir("cli") / "disk_range.json").string();
    REQUIRE(run(cli::cmd_convert, c).code == cli::kOk);

    cli::RangeArgs a;
    a.input = c.output;
    a.json = true;
    Run r = run(cli::cmd_range, a);
    REQUIRE(r.code == cli::kOk);
    json j = json::parse(r.out);
    REQUIRE(j["raw"][0][0].get<double>() == Catch::Approx(-0.2172).margin(1e-4));
    REQUIRE(j["raw"][0][1].get<double>() == 1.0);
    REQUIRE(j["widened"][0][0].get<double>() == Catch::Approx(-0.2183).margin(1e-4));
    REQUIRE(j["widened"][0][1].get<double>() == Catch::Approx(1.005).margin(1e-12));

    a.box = "x1=0:0";
    j = json::parse(run(cli::cmd_range, a).out);
    REQUIRE(j["raw"][0][0] == 1.0);
    REQUIRE(j["raw"][0][1] == 1.0);

    a.input = "builtin:unbalanced_disk";
    a.box = "";
    a.conv.extract = "element";
    j = json::parse(run(cli::cmd_range, a).out);
    REQUIRE(j["raw"][0][0].get<double>() == Catch::Approx(-28.45).epsilon(0.005));
    REQUIRE(j["raw"][0][1].get<double>() == Catch::Approx(130.96).epsilon(0.005));

    a.box = "x7=0:1";
    REQUIRE(run(cli::cmd_range, a).code == cli::kUsage);
    a.box = "x1=1:0";
    REQUIRE(run(cli::cmd_range, a).code == cli::kUsage);
}

TEST_CASE("simulate command") {
    cli::SimulateArgs a;
    a.input = "builtin:unbalanced_disk";
    a.scenario = disk_scenario();
    Run r = run(cli::cmd_simulate, a);
    REQUIRE(r.code == cli::kOk);
    std::istringstream is(r.out);
    std::string line;
    std::getline(is, line);
    REQUIRE(line == "# format_version: 1");
    std::getline(is, line);
    REQUIRE(line == "t,x1,x2,y1,u1");
    int rows = 0;
    std::string last;
    while (std::getline(is, line)) {
        ++rows;
        last = line;
    }
    REQUIRE(rows == 1501);
    REQUIRE(last.rfind("15,", 0) == 0);

    // Zero input from the origin gives a zero trajectory.
    a.scenario = {};
    a.scenario.t_end = 1.0;
    a.lpv = true;
    a.json = true;
    json j = json::parse(run(cli::cmd_simulate, a).out);
    for (const auto& row : j["x"])
        for (const auto& v : row) REQUIRE(v.get<double>() == 0.0);
    REQUIRE(j["p"][0].size() == 1);

    a.scenario.x0 = "1,2,3";
    REQUIRE(run(cli::cmd_simulate, a).code == cli::kUsage);
    a.scenario.x0 = "";
    a.scenario.solver = "discrete";
    REQUIRE(run(cli::cmd_simulate, a).code == cli::kUsage);
}

TEST_CASE("simulate an artifact records the scheduling column") {
    cli::ConvertArgs c;
    c.model = "builtin:unbalanced_disk";
    c.output = (testing::temp_dir("cli") / "disk_sim.json").string();
    REQUIRE(run(cli::cmd_convert, c).code == cli::kOk);
    cli::SimulateArgs a;
    a.input = c.output;
    a.scenario = disk_scenario();
    a.scenario.t_end = 1.0;
    a.output = (testing::temp_dir("cli") / "disk_sim.csv").string();
    REQUIRE(run(cli::cmd_simulate, a).code == cli::kOk);
    std::istringstream is(read_file(a.output));
    std::string line;
    std::getline(is, line);
    std::getline(is, line);
    REQUIRE(line == "t,x1,x2,y1,u1,p1");
    std::getline(is, line);
    REQUIRE(std::count(line.begin(), line.end(), ',') + 1 == 1 + 2 + 1 + 1 + 1);
}

TEST_CASE("simulate with a ZOH input table") {
    cli::SimulateArgs a;
    a.input = "builtin:unbalanced_disk";
    a.scenario.input_csv = write_file("u.csv", "t,u1\n0,1\n0.5,0\n");
    a.scenario.t_end = 1.0;
    REQUIRE(run(cli::cmd_simulate, a).code == cli::kOk);
    a.scenario.input = "1";
    REQUIRE(run(cli::cmd_simulate, a).code == cli::kUsage);
}

TEST_CASE("compare command") {
    cli::ConvertArgs c;
    c.model = "builtin:unbalanced_disk";
    c.output = (testing::temp_dir("cli") / "disk_cmp.json").string();
    REQUIRE(run(cli::cmd_convert, c).code == cli::kOk);

    cli::CompareArgs a;
    a.model = "builtin:unbalanced_disk";
    a.artifact = c.output;
    a.scenario = disk_scenario();
    a.threshold = 1e-8;
    Run r = run(cli::cmd_compare, a);
    REQUIRE(r.code == cli::kOk);
    REQUIRE(r.out.find("e-") != std::string::npos);
    a.json = true;
    json j = json::parse(run(cli::cmd_compare, a).out);
    for (const auto& v : j["rmse_x"]) REQUIRE(v.get<double>() <= 1e-8);
    REQUIRE(j["samples"] == 1501);
}

TEST_CASE("compare a model with itself") {
    cli::CompareArgs a;
    a.model = "builtin:tanh_example";
    a.scenario.input = "sin(t)";
    a.scenario.t_end = 10;
    a.json = true;
    Run r = run(cli::cmd_compare, a);
    REQUIRE(r.code == cli::kOk);
    json j = json::parse(r.out);
    REQUIRE(j["rmse_x"][0] == 0.0);
    REQUIRE(j["solver"] == "discrete");

    // A linear model is its own embedding.
    cli::CompareArgs b;
    b.model = write_file("lin.nlss", "format_version 1\nnx 1\nnu 1\nny 1\nf1 = -x1 + u1\nh1 = x1\n");
    b.scenario.input = "1";
    b.scenario.t_end = 2;
    b.json = true;
    j = json::parse(run(cli::cmd_compare, b).out);
    REQUIRE(j["max_rmse"] == 0.0);
}

TEST_CASE("compare catches a corrupted artifact") {
    cli::ConvertArgs c;
    c.model = "builtin:unbalanced_disk";
    c.output = (testing::temp_dir("cli") / "disk_bad.json").string();
    REQUIRE(run(cli::cmd_convert, c).code == cli::kOk);
    json j = json::parse(read_file(c.output));
    // A coefficient of p1 at (2,1), row-major in a 2x2 matrix.
    j["A"][1]["data"][2] = j["A"][1]["data"][2].get<double>() + 0.1;
    const std::string bad = write_file("disk_corrupt.json", j.dump());

    cli::CompareArgs a;
    a.model = "builtin:unbalanced_disk";
    a.artifact = bad;
    a.scenario = disk_scenario();
    a.threshold = 1e-6;
    a.json = true;
    Run r = run(cli::cmd_compare, a);
    REQUIRE(r.code == cli::kCheckFailed);
    REQUIRE(json::parse(r.out)["max_rmse"].get<double>() > 1e-3);
}

TEST_CASE("convert output round-trips deterministically") {
    cli::ConvertArgs a;
    a.model = "builtin:unbalanced_disk";
    a.conv.mode = "numeric";
    a.output = (testing::temp_dir("cli") / "rt1.json").string();
    REQUIRE(run(cli::cmd_convert, a).code == cli::kOk);
    const std::string first = read_file(a.output);
    a.output = (testing::temp_dir("cli") / "rt2.json").string();
    REQUIRE(run(cli::cmd_convert, a).code == cli::kOk);
    REQUIRE(read_file(a.output) == first);

    // Reload and re-verify: the same residual report.
    const json j = json::parse(first);
    LpvEmbedding e = load_embedding(a.output);
    NlssModel m = corpus::bundled_model("unbalanced_disk");
    EmbeddingReport rep = verify_embedding(m, e.model, e.map, 1000, box_from_json(j["verification"]["box"]));
    REQUIRE(rep.state_residual == j["verification"]["state_residual"].get<double>());
    REQUIRE(rep.output_residual == j["verification"]["output_residual"].get<double>());
}

TEST_CASE("info command") {
    cli::InfoArgs a;
    a.list = true;
    Run r = run(cli::cmd_info, a);
    REQUIRE(r.out.find("builtin:unbalanced_disk") != std::string::npos);
    REQUIRE(r.out.find("builtin:tanh_example") != std::string::npos);
    a.list = false;
    a.input = "builtin:tanh_example";
    r = run(cli::cmd_info, a);
    REQUIRE(r.code == cli::kOk);
    REQUIRE(r.out.find("discrete") != std::string::npos);
    a.input = write_file("garbage.json", "{ not json");
    REQUIRE(run(cli::cmd_info, a).code == cli::kInputError);
}
