#pragma once

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "scatterhom/data_io.hpp"
#include "scatterhom/efficiency.hpp"
#include "scatterhom/errors.hpp"
#include "scatterhom/simulation.hpp"

namespace scatterhom {
namespace cli {

struct TestOptions {
    std::string input;
    std::vector<std::string> tests = {"vdw"};
    std::string group_column; // empty: first column
    double alpha = 0.05;
    std::string critval = "asymptotic"; // or calibrated:<q> for the rank tests
    std::string output = "table";       // table | json
};

struct AreOptions {
    std::vector<int> ks = {1, 2, 3, 4, 6, 10};
    std::vector<std::string> scores = {"vdw", "wilcoxon", "spearman"};
    std::vector<std::string> densities = {"student:5", "student:8", "student:12",
                                          "gaussian",  "powerexp:2", "powerexp:3",
                                          "powerexp:5"};
    std::string out; // empty: stdout
};

struct SimulateOptions {
    std::string plan; // file path or preset name
    std::optional<std::uint64_t> seed;
    int jobs = 0;
    std::string out; // empty: stdout (CSV); text table goes to stderr
};

struct CalibrateOptions {
    std::string score = "vdw";
    int k = 2;
    int n1 = 100;
    int n2 = 100;
    int ncal = 100000;
    std::uint64_t seed = 20080301;
    int jobs = 0;
};

namespace detail {

inline std::function<EllipticalFamily(int)> density_factory(const std::string& name) {
    if (name == "gaussian") return [](int k) { return EllipticalFamily::gaussian(k); };
    const auto parse = [&](std::size_t prefix) {
        const std::string tail = name.substr(prefix);
        std::size_t pos = 0;
        double v = 0.0;
        try {
            v = std::stod(tail, &pos);
        } catch (const std::exception&) {
            pos = 0;
        }
        if (pos != tail.size() || !(v > 0.0))
            throw InvalidParameterError("invalid density parameter in '" + name + "'");
        return v;
    };
    if (name.rfind("student:", 0) == 0) {
        const double nu = parse(8);
        return [nu](int k) { return EllipticalFamily::student(k, nu); };
    }
    if (name.rfind("powerexp:", 0) == 0) {
        const double eta = parse(9);
        return [eta](int k) { return EllipticalFamily::power_exponential(k, eta); };
    }
    throw InvalidParameterError("unknown density '" + name + "'");
}

inline void print_report_table(std::ostream& os, const TestReport& r,
                               const std::vector<std::string>& labels) {
    char buf[256];
    std::snprintf(buf, sizeof buf, "%-16s Q=%-12.6g df=%-3d p=%-10.4g %s\n", r.name.c_str(),
                  r.statistic, r.df, r.p_value, r.reject ? "reject" : "accept");
    os << buf;
    if (r.scale_part && r.shape_part) {
        std::snprintf(buf, sizeof buf, "%-16s scale=%-10.6g shape=%-10.6g critical=%.4f (%s)\n",
                      "", *r.scale_part, *r.shape_part, r.critical_value,
                      r.mode == CriticalValueMode::asymptotic ? "asymptotic" : "calibrated");
        os << buf;
    }
    if (r.pairwise.rows() > 2) {
        os << "  pairwise statistics:\n";
        for (Eigen::Index i = 0; i < r.pairwise.rows(); ++i)
            for (Eigen::Index j = i + 1; j < r.pairwise.cols(); ++j) {
                std::snprintf(buf, sizeof buf, "    %s vs %s: %.6g\n", labels[i].c_str(),
                              labels[j].c_str(), r.pairwise(i, j));
                os << buf;
            }
    }
}

}  // namespace detail

inline int cmd_test(const TestOptions& opt, std::ostream& os = std::cout,
                    std::ostream& err = std::cerr) {
    try {
        const DataFile data = read_data_file(opt.input, opt.group_column);
        const int k = data.sample.dim();

        CriticalValueMode mode = CriticalValueMode::asymptotic;
        std::optional<double> q;
        if (opt.critval.rfind("calibrated:", 0) == 0) {
            mode = CriticalValueMode::calibrated;
            q = std::stod(opt.critval.substr(11));
        } else if (opt.critval != "asymptotic") {
            throw ConfigError("--critval: expected 'asymptotic' or 'calibrated:<q>'");
        }

        std::optional<AlignedFrame> frame; // shared by all rank tests
        std::vector<TestReport> reports;
        for (const auto& name : opt.tests) {
            const TestRunner runner = make_test_runner(name, k);
            if (runner.needs_frame && !frame) frame = align(data.sample);
            reports.push_back(runner.run(data.sample, frame ? &*frame : nullptr, opt.alpha,
                                         mode, q));
            if (reports.back().had_ties)
                err << "warning: tied distances; midranks were used\n";
        }

        if (opt.output == "json") {
            os << reports_to_json(reports, data.group_labels).dump(2) << '\n';
        } else {
            for (const auto& r : reports) detail::print_report_table(os, r, data.group_labels);
        }
        return 0;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
}

inline int cmd_are(const AreOptions& opt, std::ostream& os = std::cout,
                   std::ostream& err = std::cerr) {
    try {
        std::vector<std::function<EllipticalFamily(int)>> densities;
        for (const auto& name : opt.densities) {
            if (name.rfind("student:", 0) == 0) {
                const double nu = std::stod(name.substr(8));
                if (nu <= 4.0)
                    throw InvalidParameterError(
                        "density '" + name +
                        "': Student densities need nu > 4 for finite fourth moments; the "
                        "relative efficiencies diverge otherwise");
            }
            densities.push_back(detail::density_factory(name));
        }
        std::vector<std::function<ScoreFunction(int)>> scores;
        for (const auto& name : opt.scores)
            scores.push_back([name](int k) { return score_from_name(name, k); });

        const auto rows = table1(opt.ks, densities, scores);
        if (opt.out.empty()) {
            write_are_csv(os, rows);
        } else {
            std::ofstream f(opt.out);
            if (!f) throw Error("cannot write '" + opt.out + "'");
            write_are_csv(f, rows);
        }
        return 0;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
}

inline int cmd_simulate(const SimulateOptions& opt, std::ostream& os = std::cout,
                        std::ostream& err = std::cerr) {
    try {
        SimulationPlan plan;
        std::ifstream f(opt.plan);
        if (f) {
            nlohmann::json j;
            try {
                f >> j;
            } catch (const nlohmann::json::exception& e) {
                throw ConfigError("plan '" + opt.plan + "': " + e.what());
            }
            plan = plan_from_json(j);
        } else {
            plan = preset_plan(opt.plan);
        }
        if (opt.seed) plan.seed = *opt.seed;
        if (opt.jobs > 0) plan.jobs = opt.jobs;

        const FrequencyTable table = run_plan(plan);
        if (opt.out.empty()) {
            write_frequency_csv(os, table);
        } else {
            std::ofstream out(opt.out);
            if (!out) throw Error("cannot write '" + opt.out + "'");
            write_frequency_csv(out, table);
        }
        write_frequency_text(err, table);
        return 0;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
}

inline int cmd_calibrate(const CalibrateOptions& opt, std::ostream& os = std::cout,
                         std::ostream& err = std::cerr) {
    try {
        const ScoreFunction score = score_from_name(opt.score, opt.k);
        const double q = calibrate_critical_value(score, {opt.n1, opt.n2}, opt.ncal, opt.seed,
                                                  opt.jobs);
        char buf[128];
        std::snprintf(buf, sizeof buf, "score=%s k=%d n1=%d n2=%d ncal=%d q95=%.4f\n",
                      score.name().c_str(), opt.k, opt.n1, opt.n2, opt.ncal, q);
        os << buf;
        return 0;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
}

}  // namespace cli
}  // namespace scatterhom
