// lpvembed: convert nonlinear state-space models into LPV embeddings.

#include <CLI11.hpp>

#include <iostream>

#include "lpvembed/cli.hpp"

namespace cli = lpvembed::cli;

namespace {

void add_conversion(CLI::App* app, cli::ConversionArgs& conv) {
    app->add_option("--mode", conv.mode, "integration of the factor integrals")
        ->check(CLI::IsMember({"analytic", "numeric"}));
    app->add_option("--extract", conv.extract, "scheduling extraction")->check(CLI::IsMember({"factor", "element"}));
    app->add_option("--anchor", conv.anchor, "anchor point, e.g. \"x=0.1,0;u=0\"");
}

void add_scenario(CLI::App* app, cli::ScenarioArgs& sc) {
    app->add_option("--x0", sc.x0, "initial state, comma separated");
    app->add_option("--input", sc.input, "input expressions in t, ';' separated");
    app->add_option("--input-csv", sc.input_csv, "zero-order-hold input table t,u1,...");
    app->add_option("--t-end", sc.t_end, "final time (steps for discrete models)");
    app->add_option("--dt", sc.dt, "output grid spacing");
    app->add_option("--solver", sc.solver, "rk45, rk4 or discrete")->check(CLI::IsMember({"rk45", "rk4", "discrete"}));
    app->add_option("--rtol", sc.rtol, "relative tolerance");
    app->add_option("--atol", sc.atol, "absolute tolerance");
    app->add_option("--step", sc.step, "fixed RK4 step");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Convert nonlinear state-space models into LPV embeddings"};
    app.require_subcommand(1);

    cli::ConvertArgs convert;
    auto* c = app.add_subcommand("convert", "factorize a model and write the LPV artifact");
    c->add_option("model", convert.model, "model file or builtin:NAME")->required();
    add_conversion(c, convert.conv);
    c->add_option("-o,--output", convert.output, "artifact path (.json)");
    c->add_option("--samples", convert.samples, "verification samples");
    c->add_option("--threshold", convert.threshold, "maximum accepted embedding residual");
    c->add_option("--box", convert.box, "box override, e.g. x1=-1:1,u1=-2:2");
    c->add_option("--grid", convert.grid, "range grid points per dimension (0 = automatic)");
    c->add_flag("--json", convert.json, "print the artifact as JSON");

    cli::RangeArgs range;
    auto* r = app.add_subcommand("range", "estimate scheduling ranges over a box");
    r->add_option("source", range.input, "model or artifact")->required();
    add_conversion(r, range.conv);
    r->add_option("--box", range.box, "box, e.g. x1=-1:1,u1=-2:2");
    r->add_option("--grid", range.grid, "grid points per dimension");
    r->add_option("--widening", range.widening, "relative safety margin");
    r->add_flag("--json", range.json, "JSON output");

    cli::SimulateArgs simulate;
    auto* s = app.add_subcommand("simulate", "simulate a model or an artifact");
    s->add_option("source", simulate.input, "model or artifact")->required();
    add_conversion(s, simulate.conv);
    s->add_flag("--lpv", simulate.lpv, "simulate the LPV embedding of a model");
    add_scenario(s, simulate.scenario);
    s->add_option("-o,--output", simulate.output, "trajectory file");
    s->add_flag("--json", simulate.json, "JSON instead of CSV");

    cli::CompareArgs compare;
    auto* k = app.add_subcommand("compare", "simulate a model and its embedding and report RMSE");
    k->add_option("model", compare.model, "model file or builtin:NAME")->required();
    k->add_option("artifact", compare.artifact, "artifact (default: convert the model)");
    add_conversion(k, compare.conv);
    add_scenario(k, compare.scenario);
    k->add_option("--threshold", compare.threshold, "fail when an RMSE exceeds this");
    k->add_flag("--json", compare.json, "JSON output");

    cli::InfoArgs info;
    auto* i = app.add_subcommand("info", "describe a model or artifact");
    i->add_option("source", info.input, "model or artifact");
    i->add_flag("--list", info.list, "list bundled models");
    i->add_flag("--json", info.json, "JSON output");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? cli::kOk : cli::kUsage;
    }

    if (c->parsed()) return cli::cmd_convert(convert, std::cout, std::cerr);
    if (r->parsed()) return cli::cmd_range(range, std::cout, std::cerr);
    if (s->parsed()) return cli::cmd_simulate(simulate, std::cout, std::cerr);
    if (k->parsed()) return cli::cmd_compare(compare, std::cout, std::cerr);
    return cli::cmd_info(info, std::cout, std::cerr);
}
