/*
 * Copyright 2026 The catelab Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// One experiment's units, optionally with the response surfaces that
// generated them, plus the columnar text format used to store them.

#ifndef CATELAB_DATA_HPP
#define CATELAB_DATA_HPP

#include <algorithm>
#include <fstream>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "catelab/common.hpp"

namespace catelab {

using Treatment = Eigen::VectorXi;

/// mu0, mu1 and tau = mu1 - mu0 evaluated at each unit's covariates.
struct GroundTruth {
    Vector mu0;
    Vector mu1;
    Vector tau;
};

struct ExperimentData {
    Matrix x;  // N x d
    Treatment w;  // N, values in {0, 1}
    Vector y;  // observed outcomes
    std::optional<GroundTruth> truth;
    std::vector<int> labels;  // optional per-unit group label (e.g. digit class)
    std::vector<std::string> feature_names;  // optional, size d when present

    Eigen::Index size() const { return x.rows(); }
    Eigen::Index width() const { return x.cols(); }

    Eigen::Index treated_count() const { return w.sum(); }

    double treated_fraction() const {
        return size() == 0 ? 0.0 : static_cast<double>(treated_count()) / static_cast<double>(size());
    }

    std::vector<Eigen::Index> arm_rows(int arm) const {
        std::vector<Eigen::Index> rows;
        for (Eigen::Index i = 0; i < w.size(); ++i) {
            if (w(i) == arm) rows.push_back(i);
        }
        return rows;
    }

    void validate() const {
        require(w.size() == x.rows() && y.size() == x.rows(), "experiment: X, W and Y_obs lengths differ");
        require(x.allFinite(), "experiment: non-finite covariates");
        require(y.allFinite(), "experiment: non-finite outcomes");
        for (Eigen::Index i = 0; i < w.size(); ++i) require(w(i) == 0 || w(i) == 1, "experiment: W must be 0 or 1");
        if (truth) {
            require(truth->mu0.size() == x.rows() && truth->mu1.size() == x.rows() && truth->tau.size() == x.rows(),
                    "experiment: ground truth length mismatch");
        }
        require(labels.empty() || static_cast<Eigen::Index>(labels.size()) == x.rows(),
                "experiment: label length mismatch");
        require(feature_names.empty() || static_cast<Eigen::Index>(feature_names.size()) == x.cols(),
                "experiment: feature name count mismatch");
    }

    /// Both arms present; needed by every learner.
    void require_both_arms() const {
        const auto treated = treated_count();
        require(treated > 0, "experiment has no treated units");
        require(treated < size(), "experiment has no control units");
    }

    ExperimentData subset(std::span<const Eigen::Index> rows) const {
        ExperimentData out;
        const auto n = static_cast<Eigen::Index>(rows.size());
        out.x.resize(n, x.cols());
        out.w.resize(n);
        out.y.resize(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            const auto r = rows[static_cast<std::size_t>(i)];
            out.x.row(i) = x.row(r);
            out.w(i) = w(r);
            out.y(i) = y(r);
        }
        if (truth) {
            GroundTruth t{Vector(n), Vector(n), Vector(n)};
            for (Eigen::Index i = 0; i < n; ++i) {
                const auto r = rows[static_cast<std::size_t>(i)];
                t.mu0(i) = truth->mu0(r);
                t.mu1(i) = truth->mu1(r);
                t.tau(i) = truth->tau(r);
            }
            out.truth = std::move(t);
        }
        if (!labels.empty()) {
            for (auto r : rows) out.labels.push_back(labels[static_cast<std::size_t>(r)]);
        }
        out.feature_names = feature_names;
        return out;
    }

    /// First `count` units (units are stored in random order by every DGP).
    ExperimentData head(Eigen::Index count) const {
        require(count >= 0 && count <= size(), "experiment head: count out of range");
        std::vector<Eigen::Index> rows(static_cast<std::size_t>(count));
        std::iota(rows.begin(), rows.end(), Eigen::Index{0});
        return subset(rows);
    }

    ExperimentData rows_between(Eigen::Index begin, Eigen::Index end) const {
        require(0 <= begin && begin <= end && end <= size(), "experiment slice out of range");
        std::vector<Eigen::Index> rows(static_cast<std::size_t>(end - begin));
        std::iota(rows.begin(), rows.end(), begin);
        return subset(rows);
    }
};

/// Rows of `x` picked by `rows`, in that order.
inline Matrix gather_rows(const Matrix& x, std::span<const Eigen::Index> rows) {
    Matrix out(static_cast<Eigen::Index>(rows.size()), x.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = x.row(rows[i]);
    return out;
}

inline Vector gather(const Vector& v, std::span<const Eigen::Index> rows) {
    Vector out(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) out(static_cast<Eigen::Index>(i)) = v(rows[i]);
    return out;
}

/// [X | w] with the treatment indicator as the last column.
inline Matrix append_column(const Matrix& x, const Vector& column) {
    Matrix out(x.rows(), x.cols() + 1);
    out.leftCols(x.cols()) = x;
    out.col(x.cols()) = column;
    return out;
}

inline Matrix append_constant_column(const Matrix& x, double value) {
    return append_column(x, Vector::Constant(x.rows(), value));
}

// Columnar text format
// --------------------
// Comma-separated, one header row, then one unit per line:
//   <feature columns...>,W,Y_obs[,mu0,mu1,tau]
// Feature columns are named by feature_names when available, x0..x{d-1}
// otherwise. The three truth columns are present iff the experiment carries
// ground truth. Numbers use the shortest representation that round-trips.

inline std::string feature_name(const ExperimentData& data, Eigen::Index j) {
    return data.feature_names.empty() ? "x" + std::to_string(j) : data.feature_names[static_cast<std::size_t>(j)];
}

inline void write_columnar(std::ostream& out, const ExperimentData& data) {
    data.validate();
    for (Eigen::Index j = 0; j < data.width(); ++j) out << feature_name(data, j) << ',';
    out << "W,Y_obs";
    if (data.truth) out << ",mu0,mu1,tau";
    out << '\n';
    for (Eigen::Index i = 0; i < data.size(); ++i) {
        for (Eigen::Index j = 0; j < data.width(); ++j) out << format_double(data.x(i, j)) << ',';
        out << data.w(i) << ',' << format_double(data.y(i));
        if (data.truth) {
            out << ',' << format_double(data.truth->mu0(i)) << ',' << format_double(data.truth->mu1(i)) << ','
                << format_double(data.truth->tau(i));
        }
        out << '\n';
    }
}

inline void write_columnar_file(const std::string& path, const ExperimentData& data) {
    std::ofstream out(path, std::ios::binary);
    require(static_cast<bool>(out), "cannot open '" + path + "' for writing");
    write_columnar(out, data);
    require(static_cast<bool>(out), "write failed for '" + path + "'");
}

namespace detail {
inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream in(line);
    while (std::getline(in, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}
}  // namespace detail

inline ExperimentData read_columnar(std::istream& in) {
    std::string line;
    require(static_cast<bool>(std::getline(in, line)), "columnar file: missing header");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto header = detail::split_csv_line(line);
    const auto w_col = std::find(header.begin(), header.end(), "W");
    require(w_col != header.end(), "columnar file: no W column");
    const auto d = static_cast<std::size_t>(w_col - header.begin());
    require(d + 1 < header.size() && header[d + 1] == "Y_obs", "columnar file: Y_obs must follow W");
    const std::size_t rest = header.size() - d - 2;
    require(rest == 0 || rest == 3, "columnar file: unexpected trailing columns");
    if (rest == 3) {
        require(header[d + 2] == "mu0" && header[d + 3] == "mu1" && header[d + 4] == "tau",
                "columnar file: truth columns must be mu0,mu1,tau");
    }

    std::vector<std::vector<double>> rows;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto cells = detail::split_csv_line(line);
        require(cells.size() == header.size(), "columnar file: line " + std::to_string(line_no) + " has " +
                                                   std::to_string(cells.size()) + " cells, expected " +
                                                   std::to_string(header.size()));
        std::vector<double> values;
        values.reserve(cells.size());
        for (const auto& c : cells) values.push_back(parse_double(c));
        rows.push_back(std::move(values));
    }

    ExperimentData data;
    const auto n = static_cast<Eigen::Index>(rows.size());
    data.x.resize(n, static_cast<Eigen::Index>(d));
    data.w.resize(n);
    data.y.resize(n);
    if (rest == 3) data.truth = GroundTruth{Vector(n), Vector(n), Vector(n)};
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& r = rows[static_cast<std::size_t>(i)];
        for (std::size_t j = 0; j < d; ++j) data.x(i, static_cast<Eigen::Index>(j)) = r[j];
        require(r[d] == 0.0 || r[d] == 1.0, "columnar file: W must be 0 or 1");
        data.w(i) = static_cast<int>(r[d]);
        data.y(i) = r[d + 1];
        if (data.truth) {
            data.truth->mu0(i) = r[d + 2];
            data.truth->mu1(i) = r[d + 3];
            data.truth->tau(i) = r[d + 4];
        }
    }
    data.feature_names.assign(header.begin(), header.begin() + static_cast<std::ptrdiff_t>(d));
    data.validate();
    return data;
}

inline ExperimentData read_columnar_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    require(static_cast<bool>(in), "cannot open '" + path + "'");
    return read_columnar(in);
}

}  // namespace catelab

#endif  // CATELAB_DATA_HPP
