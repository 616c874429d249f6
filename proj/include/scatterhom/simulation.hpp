#pragma once

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "scatterhom/elliptical.hpp"
#include "scatterhom/errors.hpp"
#include "scatterhom/estimators.hpp"
#include "scatterhom/homogeneity_tests.hpp"
#include "scatterhom/matrix_core.hpp"
#include "scatterhom/rng.hpp"
#include "scatterhom/scores.hpp"

namespace scatterhom {

enum class AlternativeKind { scale, shape };

/// One Monte Carlo campaign: m groups of spherical noise, group one with
/// identity scatter and the others with scatter (1 + l s^2)(I + l v) on a
/// grid of heterogeneity levels l, a roster of tests, and a replication
/// budget. Results are deterministic in (seed, plan) and independent of the
/// worker count.
struct SimulationPlan {
    int dim = 2;
    std::vector<int> group_sizes = {100, 100};
    std::string density = "gaussian"; // gaussian | student:<nu>, textbook-scaled noise
    AlternativeKind kind = AlternativeKind::scale;
    double s2 = 0.0;
    Matrix v; // symmetric, trace-free; shape alternatives only
    std::vector<int> ell_grid = {0, 1, 2, 3};
    int replications = 2500;
    std::uint64_t seed = 20080301;
    std::vector<std::string> tests;
    CriticalValueMode mode = CriticalValueMode::asymptotic;
    std::map<std::string, double> critical_values;
    double alpha = 0.05;
    int jobs = 0; // 0: SCATTERHOM_JOBS env var, then hardware concurrency
};

inline int resolve_jobs(int requested) {
    if (requested > 0) return requested;
    if (const char* env = std::getenv("SCATTERHOM_JOBS")) {
        const int j = std::atoi(env);
        if (j > 0) return j;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? static_cast<int>(hw) : 1;
}

/// Rejection frequencies per (test, l) with exclusion counts for replications
/// whose estimation step failed. A run is flagged when any failure rate
/// reaches 0.1%.
struct FrequencyTable {
    std::vector<std::string> tests;
    std::vector<int> ell_grid;
    std::vector<std::vector<int>> rejects; // [test][ell]
    std::vector<std::vector<int>> valid;   // [test][ell]
    int replications = 0;

    double frequency(int t, int e) const {
        return valid[t][e] > 0 ? static_cast<double>(rejects[t][e]) / valid[t][e] : 0.0;
    }
    double half_width(int t, int e) const {
        if (valid[t][e] == 0) return 0.0;
        const double f = frequency(t, e);
        return 1.96 * std::sqrt(f * (1.0 - f) / valid[t][e]);
    }
    int failures(int t, int e) const { return replications - valid[t][e]; }
    bool flagged() const {
        for (std::size_t t = 0; t < tests.size(); ++t)
            for (std::size_t e = 0; e < ell_grid.size(); ++e)
                if (failures(static_cast<int>(t), static_cast<int>(e)) >=
                    0.001 * replications)
                    return true;
        return false;
    }
};

namespace detail {

struct NoiseModel {
    bool student = false;
    double nu = 0.0;
};

inline NoiseModel parse_density(const std::string& density) {
    if (density == "gaussian") return {};
    if (density.rfind("student:", 0) == 0) {
        const double nu = std::atof(density.c_str() + 8);
        if (!(nu > 0.0)) throw ConfigError("density: invalid Student parameter in '" + density + "'");
        return {true, nu};
    }
    throw ConfigError("density: unknown noise density '" + density + "'");
}

/// Spherical noise rows: standard normal, or textbook multivariate Student
/// z / sqrt(w/nu) with one chi-square(nu) draw per observation.
inline void fill_spherical(Matrix& out, const NoiseModel& model, std::mt19937_64& rng) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::gamma_distribution<double> chi(model.nu / 2.0, 2.0);
    for (Eigen::Index i = 0; i < out.rows(); ++i) {
        for (Eigen::Index j = 0; j < out.cols(); ++j) out(i, j) = gauss(rng);
        if (model.student) {
            double w;
            do {
                w = chi(rng);
            } while (!(w > 0.0));
            out.row(i) /= std::sqrt(w / model.nu);
        }
    }
}

}  // namespace detail

/// Group scatter matrices at heterogeneity level l: identity for group one,
/// (1 + l s^2)(I + l v) for the others.
inline std::vector<Matrix> build_alternative(const SimulationPlan& plan, int ell) {
    const int k = plan.dim;
    Matrix base = Matrix::Identity(k, k);
    if (plan.kind == AlternativeKind::shape && plan.v.size() > 0) base += ell * plan.v;
    const double scale = 1.0 + (plan.kind == AlternativeKind::scale ? ell * plan.s2 : 0.0);
    Matrix alt = SpdMatrix(scale * base).mat();
    std::vector<Matrix> scatters(plan.group_sizes.size(), alt);
    scatters[0] = Matrix::Identity(k, k);
    return scatters;
}

/// A roster entry: either a rank test (consumes the shared aligned frame) or
/// a covariance-based test run directly on the sample.
struct TestRunner {
    std::string name;
    bool needs_frame = false;
    std::function<TestReport(const GroupedSample&, const AlignedFrame*, double,
                             CriticalValueMode, std::optional<double>)>
        run;
};

inline TestRunner make_test_runner(const std::string& name, int k) {
    auto rank_runner = [name](const ScoreFunction& score) {
        TestRunner r;
        r.name = name;
        r.needs_frame = true;
        r.run = [score](const GroupedSample&, const AlignedFrame* frame, double alpha,
                        CriticalValueMode mode, std::optional<double> q) {
            return rank_test(*frame, score, alpha, mode, q);
        };
        return r;
    };
    TestRunner r;
    r.name = name;
    if (name == "pseudo-gaussian") {
        r.run = [](const GroupedSample& s, const AlignedFrame*, double alpha, CriticalValueMode,
                   std::optional<double>) { return pseudo_gaussian_test(s, alpha); };
        return r;
    }
    if (name == "gaussian") {
        r.run = [](const GroupedSample& s, const AlignedFrame*, double alpha, CriticalValueMode,
                   std::optional<double>) { return pseudo_gaussian_test(s, alpha, 0.0); };
        return r;
    }
    if (name == "box-m") {
        r.run = [](const GroupedSample& s, const AlignedFrame*, double alpha, CriticalValueMode,
                   std::optional<double>) { return box_m_test(s, alpha); };
        return r;
    }
    try {
        return rank_runner(score_from_name(name, k));
    } catch (const InvalidParameterError& e) {
        throw ConfigError(std::string("tests: ") + e.what());
    }
}

/// Runs the campaign. Each replication owns the stream (seed, replication):
/// the noise is drawn once and reused across the l grid, and every roster
/// test is evaluated on the same samples, as in a paired design.
inline FrequencyTable run_plan(const SimulationPlan& plan) {
    const int k = plan.dim;
    const int m = static_cast<int>(plan.group_sizes.size());
    if (m < 2) throw ConfigError("group_sizes: need at least two groups");
    if (plan.replications < 1) throw ConfigError("replications: must be >= 1");
    if (plan.kind == AlternativeKind::shape && plan.v.size() == 0)
        throw ConfigError("v: shape alternatives need a shift matrix");
    if (plan.kind == AlternativeKind::scale && plan.v.size() > 0 && plan.v.norm() > 0)
        throw ConfigError("v: must be zero for scale alternatives");
    if (plan.kind == AlternativeKind::shape && plan.s2 != 0.0)
        throw ConfigError("s2: must be zero for shape alternatives");
    const auto noise = detail::parse_density(plan.density);

    std::vector<TestRunner> runners;
    bool any_frame = false;
    for (const auto& name : plan.tests) {
        runners.push_back(make_test_runner(name, k));
        any_frame = any_frame || runners.back().needs_frame;
    }
    if (runners.empty()) throw ConfigError("tests: roster is empty");

    std::vector<std::optional<double>> calibrated(runners.size());
    if (plan.mode == CriticalValueMode::calibrated) {
        for (std::size_t t = 0; t < runners.size(); ++t) {
            if (!runners[t].needs_frame) continue; // only rank tests are calibrated
            const auto it = plan.critical_values.find(runners[t].name);
            if (it == plan.critical_values.end())
                throw ConfigError("critical_values: missing entry for '" + runners[t].name + "'");
            calibrated[t] = it->second;
        }
    }

    const int nell = static_cast<int>(plan.ell_grid.size());
    std::vector<Matrix> roots; // sym_sqrt of the alternative scatter per ell
    for (int e = 0; e < nell; ++e)
        roots.push_back(sym_sqrt(build_alternative(plan, plan.ell_grid[e])[m - 1]));

    const int jobs = resolve_jobs(plan.jobs);
    std::mutex merge_mutex;
    FrequencyTable table;
    table.tests = plan.tests;
    table.ell_grid = plan.ell_grid;
    table.replications = plan.replications;
    table.rejects.assign(runners.size(), std::vector<int>(nell, 0));
    table.valid.assign(runners.size(), std::vector<int>(nell, 0));

    auto worker = [&](int lo, int hi) {
        std::vector<std::vector<int>> rejects(runners.size(), std::vector<int>(nell, 0));
        std::vector<std::vector<int>> valid(runners.size(), std::vector<int>(nell, 0));
        std::vector<Matrix> eps(m);
        for (int rep = lo; rep < hi; ++rep) {
            auto rng = make_stream(plan.seed, static_cast<std::uint64_t>(rep));
            for (int i = 0; i < m; ++i) {
                eps[i].resize(plan.group_sizes[i], k);
                detail::fill_spherical(eps[i], noise, rng);
            }
            for (int e = 0; e < nell; ++e) {
                std::vector<Matrix> groups(m);
                groups[0] = eps[0];
                for (int i = 1; i < m; ++i) groups[i] = eps[i] * roots[e].transpose();
                const GroupedSample sample = make_grouped_sample(std::move(groups));

                std::optional<AlignedFrame> frame;
                if (any_frame) {
                    try {
                        frame = align(sample);
                    } catch (const Error&) {
                        try {
                            frame = align(sample, 1);
                        } catch (const Error&) {
                            frame.reset();
                        }
                    }
                }
                for (std::size_t t = 0; t < runners.size(); ++t) {
                    if (runners[t].needs_frame && !frame) continue;
                    try {
                        const TestReport rep_t =
                            runners[t].run(sample, frame ? &*frame : nullptr, plan.alpha,
                                           plan.mode, calibrated[t]);
                        ++valid[t][e];
                        if (rep_t.reject) ++rejects[t][e];
                    } catch (const Error&) {
                        // excluded and counted through the valid totals
                    }
                }
            }
        }
        std::lock_guard<std::mutex> lock(merge_mutex);
        for (std::size_t t = 0; t < runners.size(); ++t)
            for (int e = 0; e < nell; ++e) {
                table.rejects[t][e] += rejects[t][e];
                table.valid[t][e] += valid[t][e];
            }
    };

    std::vector<std::thread> threads;
    const int chunk = (plan.replications + jobs - 1) / jobs;
    for (int j = 0; j < jobs; ++j) {
        const int lo = j * chunk;
        const int hi = std::min(plan.replications, lo + chunk);
        if (lo >= hi) break;
        threads.emplace_back(worker, lo, hi);
    }
    for (auto& th : threads) th.join();
    return table;
}

/// Empirical upper quantile: the ceil(p n)-th order statistic.
inline double empirical_upper_quantile(std::vector<double> values, double p) {
    if (values.empty()) throw DomainError("empirical quantile of empty sample");
    const auto idx = static_cast<std::size_t>(
        std::ceil(p * static_cast<double>(values.size()))) - 1;
    std::nth_element(values.begin(), values.begin() + idx, values.end());
    return values[idx];
}

/// Calibrated critical values for several rank statistics from one shared
/// collection of multinormal null samples (location 0, scatter I), run
/// through the full estimation pipeline.
inline std::vector<double> calibrate_critical_values(const std::vector<ScoreFunction>& scores,
                                                     const std::vector<int>& group_sizes,
                                                     int n_cal, std::uint64_t seed,
                                                     int jobs = 0) {
    if (scores.empty()) throw InvalidParameterError("calibrate: no scores");
    if (n_cal < 10000) throw InvalidParameterError("calibrate: need at least 10^4 samples");
    const int k = scores.front().dim();
    for (const auto& s : scores)
        if (s.dim() != k) throw DimensionMismatchError("calibrate: score dimensions disagree");
    const int m = static_cast<int>(group_sizes.size());
    if (m < 2) throw InvalidParameterError("calibrate: need at least two groups");

    std::vector<std::vector<double>> stats(scores.size(),
                                           std::vector<double>(n_cal, -1.0));
    const int n_jobs = resolve_jobs(jobs);
    auto worker = [&](int lo, int hi) {
        std::normal_distribution<double> gauss(0.0, 1.0);
        for (int rep = lo; rep < hi; ++rep) {
            auto rng = make_stream(seed, static_cast<std::uint64_t>(rep));
            std::vector<Matrix> groups(m);
            for (int i = 0; i < m; ++i) {
                groups[i].resize(group_sizes[i], k);
                for (Eigen::Index a = 0; a < groups[i].rows(); ++a)
                    for (int b = 0; b < k; ++b) groups[i](a, b) = gauss(rng);
            }
            const GroupedSample sample = make_grouped_sample(std::move(groups));
            std::optional<AlignedFrame> frame;
            try {
                frame = align(sample);
            } catch (const Error&) {
                try {
                    frame = align(sample, 1);
                } catch (const Error&) {
                    continue; // left at -1, dropped below
                }
            }
            for (std::size_t s = 0; s < scores.size(); ++s)
                stats[s][rep] = rank_test(*frame, scores[s]).statistic;
        }
    };
    std::vector<std::thread> threads;
    const int chunk = (n_cal + n_jobs - 1) / n_jobs;
    for (int j = 0; j < n_jobs; ++j) {
        const int lo = j * chunk;
        const int hi = std::min(n_cal, lo + chunk);
        if (lo >= hi) break;
        threads.emplace_back(worker, lo, hi);
    }
    for (auto& th : threads) th.join();

    std::vector<double> out;
    for (auto& values : stats) {
        values.erase(std::remove(values.begin(), values.end(), -1.0), values.end());
        out.push_back(empirical_upper_quantile(std::move(values), 0.95));
    }
    return out;
}

inline double calibrate_critical_value(const ScoreFunction& score,
                                       const std::vector<int>& group_sizes, int n_cal,
                                       std::uint64_t seed, int jobs = 0) {
    return calibrate_critical_values({score}, group_sizes, n_cal, seed, jobs).front();
}

// ---------------------------------------------------------------------------
// Plan files, presets, and table output
// ---------------------------------------------------------------------------

inline SimulationPlan plan_from_json(const nlohmann::json& j) {
    static const std::vector<std::string> known = {
        "k",     "group_sizes",  "density",             "alternative",
        "s2",    "v",            "ell_grid",            "replications",
        "seed",  "tests",        "critical_value_mode", "critical_values",
        "alpha", "jobs"};
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (std::find(known.begin(), known.end(), it.key()) == known.end())
            throw ConfigError("plan: unknown key '" + it.key() + "'");
    }
    SimulationPlan plan;
    try {
        plan.dim = j.value("k", plan.dim);
        if (j.contains("group_sizes"))
            plan.group_sizes = j.at("group_sizes").get<std::vector<int>>();
        plan.density = j.value("density", plan.density);
        if (j.contains("alternative")) {
            const std::string kind = j.at("alternative").get<std::string>();
            if (kind == "scale")
                plan.kind = AlternativeKind::scale;
            else if (kind == "shape")
                plan.kind = AlternativeKind::shape;
            else
                throw ConfigError("alternative: expected 'scale' or 'shape', got '" + kind + "'");
        }
        plan.s2 = j.value("s2", plan.s2);
        if (j.contains("v")) {
            const auto rows = j.at("v").get<std::vector<std::vector<double>>>();
            plan.v.resize(rows.size(), rows.size());
            for (std::size_t r = 0; r < rows.size(); ++r) {
                if (rows[r].size() != rows.size()) throw ConfigError("v: must be square");
                for (std::size_t c = 0; c < rows.size(); ++c) plan.v(r, c) = rows[r][c];
            }
        }
        if (j.contains("ell_grid")) plan.ell_grid = j.at("ell_grid").get<std::vector<int>>();
        plan.replications = j.value("replications", plan.replications);
        plan.seed = j.value("seed", plan.seed);
        if (j.contains("tests")) plan.tests = j.at("tests").get<std::vector<std::string>>();
        if (j.contains("critical_value_mode")) {
            const std::string mode = j.at("critical_value_mode").get<std::string>();
            if (mode == "asymptotic")
                plan.mode = CriticalValueMode::asymptotic;
            else if (mode == "calibrated")
                plan.mode = CriticalValueMode::calibrated;
            else
                throw ConfigError("critical_value_mode: expected 'asymptotic' or 'calibrated'");
        }
        if (j.contains("critical_values"))
            plan.critical_values =
                j.at("critical_values").get<std::map<std::string, double>>();
        plan.alpha = j.value("alpha", plan.alpha);
        plan.jobs = j.value("jobs", plan.jobs);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("plan: ") + e.what());
    }
    return plan;
}

inline const std::vector<std::string>& default_roster() {
    static const std::vector<std::string> roster = {
        "box-m",     "gaussian",    "pseudo-gaussian", "vdw",
        "student:5", "student:2",   "student:0.5",     "spearman"};
    return roster;
}

inline const std::map<std::string, double>& reference_critical_values() {
    static const std::map<std::string, double> q = {{"vdw", 7.2117},
                                                    {"student:5", 7.6351},
                                                    {"student:2", 7.7473},
                                                    {"student:0.5", 7.7636},
                                                    {"spearman", 7.6773}};
    return q;
}

/// Bundled two-sample campaigns (k = 2, n_i = 100, N = 2500): scale
/// alternatives (table2_*) and shape alternatives (table3_*) under Gaussian
/// and Student t_5 / t_2 / t_0.5 noise.
inline SimulationPlan preset_plan(const std::string& name) {
    SimulationPlan plan;
    plan.tests = default_roster();
    plan.critical_values = reference_critical_values();
    struct Preset {
        const char* density;
        double s2;
        double v22;
    };
    static const std::map<std::string, Preset> scale_presets = {
        {"table2_gaussian", {"gaussian", 0.30, 0.0}},
        {"table2_t5", {"student:5", 0.44, 0.0}},
        {"table2_t2", {"student:2", 0.56, 0.0}},
        {"table2_t05", {"student:0.5", 1.50, 0.0}}};
    static const std::map<std::string, Preset> shape_presets = {
        {"table3_gaussian", {"gaussian", 0.0, 0.18}},
        {"table3_t5", {"student:5", 0.0, 0.20}},
        {"table3_t2", {"student:2", 0.0, 0.21}},
        {"table3_t05", {"student:0.5", 0.0, 0.22}}};
    if (auto it = scale_presets.find(name); it != scale_presets.end()) {
        plan.density = it->second.density;
        plan.kind = AlternativeKind::scale;
        plan.s2 = it->second.s2;
        return plan;
    }
    if (auto it = shape_presets.find(name); it != shape_presets.end()) {
        plan.density = it->second.density;
        plan.kind = AlternativeKind::shape;
        plan.v = Matrix::Zero(2, 2);
        plan.v(0, 0) = -it->second.v22;
        plan.v(1, 1) = it->second.v22;
        return plan;
    }
    throw ConfigError("unknown plan preset '" + name + "'");
}

inline void write_frequency_csv(std::ostream& os, const FrequencyTable& table) {
    os << "test,ell,frequency,half_width,valid,failures\n";
    char buf[96];
    for (std::size_t t = 0; t < table.tests.size(); ++t)
        for (std::size_t e = 0; e < table.ell_grid.size(); ++e) {
            const int ti = static_cast<int>(t), ei = static_cast<int>(e);
            std::snprintf(buf, sizeof buf, "%s,%d,%.6f,%.6f,%d,%d\n", table.tests[t].c_str(),
                          table.ell_grid[e], table.frequency(ti, ei), table.half_width(ti, ei),
                          table.valid[t][e], table.failures(ti, ei));
            os << buf;
        }
}

inline void write_frequency_text(std::ostream& os, const FrequencyTable& table) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%-16s", "test");
    os << buf;
    for (int ell : table.ell_grid) {
        std::snprintf(buf, sizeof buf, "  ell=%-7d", ell);
        os << buf;
    }
    os << '\n';
    for (std::size_t t = 0; t < table.tests.size(); ++t) {
        std::snprintf(buf, sizeof buf, "%-16s", table.tests[t].c_str());
        os << buf;
        for (std::size_t e = 0; e < table.ell_grid.size(); ++e) {
            std::snprintf(buf, sizeof buf, "  %.4f     ",
                          table.frequency(static_cast<int>(t), static_cast<int>(e)));
            os << buf;
        }
        os << '\n';
    }
    if (table.flagged())
        os << "WARNING: estimator failure rate reached 0.1%; results are flagged\n";
}

}  // namespace scatterhom
