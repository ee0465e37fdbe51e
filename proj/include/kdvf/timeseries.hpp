#pragma once
#include <algorithm>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <optional>
#include <string>
#include <vector>

#include "errors.hpp"
#include "grid.hpp"

namespace kdvf {

inline std::string fmt17(double v);

inline std::string fmt17(const std::optional<double>& v) { return v ? fmt17(*v) : std::string("none"); }

inline std::string fmt17(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

struct TimeSeries {
    std::vector<std::string> meta;
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;
    std::vector<Vec> snapshots;
    bool blew_up = false;
    double blowup_time = 0.0;

    int col(const std::string& name) const
    {
        auto it = std::find(columns.begin(), columns.end(), name);
        if (it == columns.end())
            throw PreconditionError("time series has no column '" + name + "'");
        return static_cast<int>(it - columns.begin());
    }

    std::vector<double> column(const std::string& name) const
    {
        int c = col(name);
        std::vector<double> out;
        out.reserve(rows.size());
        for (auto& r : rows)
            out.push_back(r[c]);
        return out;
    }

    bool has_snapshots() const { return !rows.empty() && snapshots.size() == rows.size(); }
    std::size_t size() const { return rows.size(); }
};

inline void write_csv(std::ostream& os, const TimeSeries& ts)
{
    for (auto& m : ts.meta)
        os << "# " << m << '\n';
    for (std::size_t c = 0; c < ts.columns.size(); ++c)
        os << (c ? "," : "") << ts.columns[c];
    os << '\n';
    for (auto& r : ts.rows) {
        for (std::size_t c = 0; c < r.size(); ++c)
            os << (c ? "," : "") << fmt17(r[c]);
        os << '\n';
    }
}

inline void write_csv(const std::string& path, const TimeSeries& ts)
{
    std::ofstream f(path);
    if (!f)
        throw ConfigError("cannot write " + path);
    write_csv(f, ts);
}

} // namespace kdvf
