#pragma once

#include <algorithm>
#include <fstream>
#include <istream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "scatterhom/errors.hpp"
#include "scatterhom/estimators.hpp"
#include "scatterhom/homogeneity_tests.hpp"

namespace scatterhom {

/// A parsed delimited data file: one group-label column plus k numeric
/// feature columns. Group order follows first appearance of the labels.
struct DataFile {
    std::vector<std::string> feature_names;
    std::vector<std::string> group_labels; // one per group
    GroupedSample sample;
};

namespace csv {

/// One CSV record with RFC-style quoting ("" escapes a quote inside quotes).
inline std::vector<std::string> split_record(const std::string& line, int row,
                                             char delim = ',') {
    std::vector<std::string> fields;
    std::string field;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field += c;
            }
        } else if (c == '"' && field.empty()) {
            quoted = true;
        } else if (c == delim) {
            fields.push_back(std::move(field));
            field.clear();
        } else if (c != '\r') {
            field += c;
        }
    }
    if (quoted) throw ParseError("row " + std::to_string(row) + ": unterminated quote");
    fields.push_back(std::move(field));
    return fields;
}

inline std::string quote(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

}  // namespace csv

/// Reads a delimited file with a header row. The group column defaults to the
/// first column; all other columns must be numeric features.
inline DataFile read_data_file(std::istream& in, const std::string& group_column = "") {
    std::string line;
    if (!std::getline(in, line)) throw ParseError("empty input");
    const auto header = csv::split_record(line, 1);
    if (header.size() < 2) throw ParseError("header: need a group column and features");

    std::size_t group_idx = 0;
    if (!group_column.empty()) {
        const auto it = std::find(header.begin(), header.end(), group_column);
        if (it == header.end())
            throw ParseError("header: no column named '" + group_column + "'");
        group_idx = static_cast<std::size_t>(it - header.begin());
    }

    DataFile out;
    for (std::size_t i = 0; i < header.size(); ++i)
        if (i != group_idx) out.feature_names.push_back(header[i]);
    const int k = static_cast<int>(out.feature_names.size());

    std::map<std::string, int> group_index;
    std::vector<std::vector<double>> rows; // flattened per group
    int row_no = 1;
    while (std::getline(in, line)) {
        ++row_no;
        if (line.empty()) continue;
        const auto fields = csv::split_record(line, row_no);
        if (fields.size() != header.size())
            throw ParseError("row " + std::to_string(row_no) + ": expected " +
                             std::to_string(header.size()) + " fields, got " +
                             std::to_string(fields.size()));
        const std::string& label = fields[group_idx];
        auto it = group_index.find(label);
        if (it == group_index.end()) {
            it = group_index.emplace(label, static_cast<int>(out.group_labels.size())).first;
            out.group_labels.push_back(label);
            rows.emplace_back();
        }
        for (std::size_t i = 0; i < fields.size(); ++i) {
            if (i == group_idx) continue;
            std::size_t pos = 0;
            double value = 0.0;
            try {
                value = std::stod(fields[i], &pos);
            } catch (const std::exception&) {
                pos = 0;
            }
            if (pos != fields[i].size() || fields[i].empty())
                throw ParseError("row " + std::to_string(row_no) + ": column '" +
                                 header[i] + "' is not numeric: '" + fields[i] + "'");
            rows[it->second].push_back(value);
        }
    }
    if (out.group_labels.size() < 2) throw ParseError("need at least two distinct group labels");

    std::vector<Matrix> groups;
    for (const auto& flat : rows) {
        const int ni = static_cast<int>(flat.size()) / k;
        Matrix g(ni, k);
        for (int r = 0; r < ni; ++r)
            for (int c = 0; c < k; ++c) g(r, c) = flat[r * k + c];
        groups.push_back(std::move(g));
    }
    out.sample = make_grouped_sample(std::move(groups));
    return out;
}

inline DataFile read_data_file(const std::string& path, const std::string& group_column = "") {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open '" + path + "'");
    return read_data_file(in, group_column);
}

// ---------------------------------------------------------------------------
// TestReport <-> JSON (schema_version 1)
// ---------------------------------------------------------------------------

inline nlohmann::json report_to_json(const TestReport& r) {
    nlohmann::json j;
    j["name"] = r.name;
    j["statistic"] = r.statistic;
    if (r.scale_part) j["scale_part"] = *r.scale_part;
    if (r.shape_part) j["shape_part"] = *r.shape_part;
    j["df"] = r.df;
    j["p_value"] = r.p_value;
    j["alpha"] = r.alpha;
    j["critical_value_mode"] =
        r.mode == CriticalValueMode::asymptotic ? "asymptotic" : "calibrated";
    j["critical_value"] = r.critical_value;
    j["reject"] = r.reject;
    if (r.sigma_hat) j["sigma_hat"] = *r.sigma_hat;
    if (r.had_ties) j["had_ties"] = true;
    if (r.pairwise.size() > 0) {
        auto pw = nlohmann::json::array();
        for (Eigen::Index i = 0; i < r.pairwise.rows(); ++i) {
            auto row = nlohmann::json::array();
            for (Eigen::Index j2 = 0; j2 < r.pairwise.cols(); ++j2)
                row.push_back(r.pairwise(i, j2));
            pw.push_back(row);
        }
        j["pairwise"] = pw;
    }
    return j;
}

inline TestReport report_from_json(const nlohmann::json& j) {
    TestReport r;
    r.name = j.at("name").get<std::string>();
    r.statistic = j.at("statistic").get<double>();
    if (j.contains("scale_part")) r.scale_part = j.at("scale_part").get<double>();
    if (j.contains("shape_part")) r.shape_part = j.at("shape_part").get<double>();
    r.df = j.at("df").get<int>();
    r.p_value = j.at("p_value").get<double>();
    r.alpha = j.at("alpha").get<double>();
    r.mode = j.at("critical_value_mode").get<std::string>() == "calibrated"
                 ? CriticalValueMode::calibrated
                 : CriticalValueMode::asymptotic;
    r.critical_value = j.at("critical_value").get<double>();
    r.reject = j.at("reject").get<bool>();
    if (j.contains("sigma_hat")) r.sigma_hat = j.at("sigma_hat").get<double>();
    r.had_ties = j.value("had_ties", false);
    if (j.contains("pairwise")) {
        const auto pw = j.at("pairwise").get<std::vector<std::vector<double>>>();
        r.pairwise.resize(pw.size(), pw.size());
        for (std::size_t i = 0; i < pw.size(); ++i)
            for (std::size_t c = 0; c < pw[i].size(); ++c)
                r.pairwise(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) =
                    pw[i][c];
    }
    return r;
}

inline nlohmann::json reports_to_json(const std::vector<TestReport>& reports,
                                      const std::vector<std::string>& group_labels) {
    nlohmann::json j;
    j["schema_version"] = 1;
    j["groups"] = group_labels;
    auto arr = nlohmann::json::array();
    for (const auto& r : reports) arr.push_back(report_to_json(r));
    j["tests"] = arr;
    return j;
}

}  // namespace scatterhom
