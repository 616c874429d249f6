#include <CLI11.hpp>

#include "scatterhom/cli.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Rank-based and pseudo-Gaussian tests for the homogeneity of scatter "
                 "matrices across elliptical samples"};
    app.require_subcommand(1);

    scatterhom::cli::TestOptions test_opt;
    auto* test = app.add_subcommand("test", "Run homogeneity tests on a delimited data file");
    test->add_option("input", test_opt.input, "Data file (header row, one group-label column)")
        ->required();
    test->add_option("--test", test_opt.tests,
                     "Tests: vdw, wilcoxon, spearman, student:<nu>, power:<a>, powerexp:<eta>, "
                     "pseudo-gaussian, gaussian, box-m")
        ->delimiter(',');
    test->add_option("--group-col", test_opt.group_column,
                     "Group label column (default: first column)");
    test->add_option("--alpha", test_opt.alpha, "Test level");
    test->add_option("--critval", test_opt.critval, "asymptotic or calibrated:<q>");
    test->add_option("--output", test_opt.output, "table or json")
        ->check(CLI::IsMember({"table", "json"}));

    scatterhom::cli::AreOptions are_opt;
    auto* are = app.add_subcommand("are", "Asymptotic relative efficiency tables (CSV)");
    are->add_option("--k", are_opt.ks, "Dimensions")->delimiter(',');
    are->add_option("--scores", are_opt.scores, "Score functions")->delimiter(',');
    are->add_option("--densities", are_opt.densities,
                    "Radial densities: gaussian, student:<nu> (nu > 4), powerexp:<eta>")
        ->delimiter(',');
    are->add_option("--out", are_opt.out, "Output CSV path (default: stdout)");

    scatterhom::cli::SimulateOptions sim_opt;
    auto* sim = app.add_subcommand("simulate", "Monte Carlo rejection-frequency campaign");
    sim->add_option("plan", sim_opt.plan,
                    "Plan JSON file or preset (table2_gaussian, table2_t5, table2_t2, "
                    "table2_t05, table3_gaussian, table3_t5, table3_t2, table3_t05)")
        ->required();
    std::int64_t seed_flag = -1;
    sim->add_option("--seed", seed_flag, "Override the plan seed");
    sim->add_option("--jobs", sim_opt.jobs, "Worker threads (default: SCATTERHOM_JOBS or all)");
    sim->add_option("--out", sim_opt.out, "Output CSV path (default: stdout)");

    scatterhom::cli::CalibrateOptions cal_opt;
    auto* cal = app.add_subcommand("calibrate",
                                   "Empirical 95% null quantile of a rank statistic");
    cal->add_option("--score", cal_opt.score, "Score function");
    cal->add_option("--k", cal_opt.k, "Dimension");
    cal->add_option("--n1", cal_opt.n1, "First group size");
    cal->add_option("--n2", cal_opt.n2, "Second group size");
    cal->add_option("--ncal", cal_opt.ncal, "Number of null samples (>= 10000)");
    cal->add_option("--seed", cal_opt.seed, "Base seed");
    cal->add_option("--jobs", cal_opt.jobs, "Worker threads");

    CLI11_PARSE(app, argc, argv);

    if (test->parsed()) return scatterhom::cli::cmd_test(test_opt);
    if (are->parsed()) return scatterhom::cli::cmd_are(are_opt);
    if (sim->parsed()) {
        if (seed_flag >= 0) sim_opt.seed = static_cast<std::uint64_t>(seed_flag);
        return scatterhom::cli::cmd_simulate(sim_opt);
    }
    if (cal->parsed()) return scatterhom::cli::cmd_calibrate(cal_opt);
    return 1;
}
