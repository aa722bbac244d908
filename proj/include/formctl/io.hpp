#ifndef FORMCTL_IO_HPP
#define FORMCTL_IO_HPP

#include <cstdio>
#include <string>
#include <utility>
#include <vector>

#include "formctl/sim.hpp"

namespace formctl {

/// 17 significant digits: enough to round-trip an IEEE double, and stable
/// across runs so emitted files are byte-identical.
inline std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

/// Minimal insertion-ordered JSON writers; field order is part of the format.
class JsonArray;

class JsonObject {
  public:
    JsonObject& add(const std::string& key, double v) { return raw(key, format_double(v)); }
    JsonObject& add(const std::string& key, int v) { return raw(key, std::to_string(v)); }
    JsonObject& add(const std::string& key, long v) { return raw(key, std::to_string(v)); }
    JsonObject& add(const std::string& key, bool v) { return raw(key, v ? "true" : "false"); }
    JsonObject& add(const std::string& key, const std::string& v) {
        return raw(key, quote(v));
    }
    JsonObject& add(const std::string& key, const char* v) { return add(key, std::string(v)); }
    JsonObject& raw(const std::string& key, std::string serialized) {
        fields_.emplace_back(key, std::move(serialized));
        return *this;
    }

    std::string str() const {
        std::string out = "{";
        for (size_t i = 0; i < fields_.size(); ++i) {
            if (i) out += ",";
            out += quote(fields_[i].first) + ":" + fields_[i].second;
        }
        return out + "}";
    }

    static std::string quote(const std::string& s) {
        std::string out = "\"";
        for (char c : s) {
            switch (c) {
                case '"': out += "\\\""; break;
                case '\\': out += "\\\\"; break;
                case '\n': out += "\\n"; break;
                case '\t': out += "\\t"; break;
                default: out += c;
            }
        }
        return out + "\"";
    }

  private:
    std::vector<std::pair<std::string, std::string>> fields_;
};

class JsonArray {
  public:
    JsonArray& add(double v) { return raw(format_double(v)); }
    JsonArray& add(int v) { return raw(std::to_string(v)); }
    JsonArray& add(const std::string& v) { return raw(JsonObject::quote(v)); }
    JsonArray& raw(std::string serialized) {
        items_.push_back(std::move(serialized));
        return *this;
    }

    std::string str() const {
        std::string out = "[";
        for (size_t i = 0; i < items_.size(); ++i) {
            if (i) out += ",";
            out += items_[i];
        }
        return out + "]";
    }

  private:
    std::vector<std::string> items_;
};

inline std::string json_matrix(const MatrixXd& m) {
    JsonArray rows;
    for (int r = 0; r < m.rows(); ++r) {
        JsonArray row;
        for (int c = 0; c < m.cols(); ++c) row.add(m(r, c));
        rows.raw(row.str());
    }
    return rows.str();
}

inline std::string json_vector(const VectorXd& v) {
    JsonArray arr;
    for (int i = 0; i < v.size(); ++i) arr.add(v(i));
    return arr.str();
}

/// Columns: t, x_{1,1..k}, ..., x_{n,1..k}, orbit_distance, potential,
/// drift_fit_residual. Diagnostics that were not computed stay empty.
inline std::string trajectory_csv(const Trajectory& traj) {
    if (traj.samples.empty()) return "";
    const int k = traj.samples.front().state.dimension();
    const int n = traj.samples.front().state.count();
    std::string out = "t";
    for (int i = 1; i <= n; ++i)
        for (int d = 1; d <= k; ++d)
            out += ",x" + std::to_string(i) + "_" + std::to_string(d);
    out += ",orbit_distance,potential,drift_fit_residual\n";
    for (const auto& s : traj.samples) {
        out += format_double(s.t);
        for (int i = 0; i < n; ++i)
            for (int d = 0; d < k; ++d) out += "," + format_double(s.state.point(i)(d));
        out += ",";
        if (s.orbit_dist) out += format_double(*s.orbit_dist);
        out += ",";
        if (s.potential) out += format_double(*s.potential);
        out += ",";
        if (s.fit_residual) out += format_double(*s.fit_residual);
        out += "\n";
    }
    return out;
}

}  // namespace formctl

#endif  // FORMCTL_IO_HPP
