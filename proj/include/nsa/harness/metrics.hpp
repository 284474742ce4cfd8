#pragma once

#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "nsa/harness/config.hpp"
#include "nsa/rl/evaluation.hpp"

namespace nsa::harness {

inline std::string fmt_fixed(double v, int digits = 4) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

inline std::string fmt_g(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

/// 71000 -> "71K", 3000000 -> "3M", 11748 -> "11748".
inline std::string budget_label(std::size_t n) {
    if (n >= 1000000 && n % 1000000 == 0) return std::to_string(n / 1000000) + "M";
    if (n >= 1000 && n % 1000 == 0) return std::to_string(n / 1000) + "K";
    return std::to_string(n);
}

/// Results table: one column per policy, one row per metric. Rover rows are
/// FSCs / Timeouts / Targets; the other plants use Unrec Trajs / Comp Trajs.
class MetricsTable {
public:
    explicit MetricsTable(PlantKind plant) : plant_(plant) {}

    void add(std::string label, const rl::EvalReport& r) {
        if (r.unrecoverable + r.complete + r.targets != r.n_trajs) {
            throw std::logic_error("evaluation outcomes do not partition the trajectory set for " + label);
        }
        labels_.push_back(std::move(label));
        reports_.push_back(r);
    }

    const std::vector<std::string>& labels() const { return labels_; }
    const std::vector<rl::EvalReport>& reports() const { return reports_; }
    const rl::EvalReport& at(const std::string& label) const {
        for (std::size_t i = 0; i < labels_.size(); ++i)
            if (labels_[i] == label) return reports_[i];
        throw InvalidInput("no column " + label);
    }

    std::string csv() const {
        std::string out = "metric";
        for (const auto& l : labels_) out += "," + l;
        out += "\n";
        auto row = [&](const std::string& name, auto value) {
            out += name;
            for (const auto& r : reports_) out += "," + value(r);
            out += "\n";
        };
        auto count = [](std::size_t n) { return std::to_string(n); };
        if (plant_ == PlantKind::rover) {
            row("FSCs", [&](const rl::EvalReport& r) { return count(r.unrecoverable); });
            row("Timeouts", [&](const rl::EvalReport& r) { return count(r.complete); });
            row("Targets", [&](const rl::EvalReport& r) { return count(r.targets); });
        } else {
            row("Unrec Trajs", [&](const rl::EvalReport& r) { return count(r.unrecoverable); });
            row("Comp Trajs", [&](const rl::EvalReport& r) { return count(r.complete); });
        }
        row("Avg Return", [](const rl::EvalReport& r) { return fmt_fixed(r.avg_return); });
        row("Avg Discounted Return", [](const rl::EvalReport& r) { return fmt_fixed(r.avg_discounted_return); });
        row("Avg Length", [](const rl::EvalReport& r) { return fmt_fixed(r.avg_length); });
        row("Trajectories", [&](const rl::EvalReport& r) { return count(r.n_trajs); });
        return out;
    }

    void write(const std::string& path) const { write_text(path, csv()); }

    static void write_text(const std::string& path, const std::string& text) {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw InvalidInput("cannot write " + path);
        out << text;
        if (!out) throw InvalidInput("failed writing " + path);
    }

private:
    PlantKind plant_;
    std::vector<std::string> labels_;
    std::vector<rl::EvalReport> reports_;
};

}  // namespace nsa::harness
