#pragma once

// Long-format annual panel: one row per (unit, year) with forest cover and
// the unit's traditional-belief adherence share.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "canopy/errors.hpp"

namespace canopy {

struct PanelRow {
    std::string unit_id;
    int year = 0;
    double tree_area_km2 = 0.0;
    double atr_share = 0.0;
};

struct Panel {
    std::vector<PanelRow> rows;

    // canonical ordering (unit, year); estimators sort before resampling so
    // results do not depend on input row order
    void sort_canonical() {
        std::sort(rows.begin(), rows.end(), [](const PanelRow& a, const PanelRow& b) {
            if (a.unit_id != b.unit_id) return a.unit_id < b.unit_id;
            return a.year < b.year;
        });
    }

    void validate() const {
        for (const auto& r : rows) {
            if (r.unit_id.empty())
                throw validation_error("unit_id", "must be non-empty");
            if (!(r.tree_area_km2 > 0.0))
                throw validation_error("tree_area_km2", "must be > 0 (unit " + r.unit_id +
                                                            ", year " + std::to_string(r.year) + ")");
            if (!(r.atr_share >= 0.0 && r.atr_share <= 1.0))
                throw validation_error("atr_share", "must lie in [0,1] (unit " + r.unit_id +
                                                        ", year " + std::to_string(r.year) + ")");
        }
        auto sorted = rows;
        std::sort(sorted.begin(), sorted.end(), [](const PanelRow& a, const PanelRow& b) {
            if (a.unit_id != b.unit_id) return a.unit_id < b.unit_id;
            return a.year < b.year;
        });
        for (size_t i = 1; i < sorted.size(); ++i) {
            if (sorted[i].unit_id == sorted[i - 1].unit_id && sorted[i].year == sorted[i - 1].year)
                throw validation_error("unit_id",
                                       "duplicate (unit, year): " + sorted[i].unit_id + ", " +
                                           std::to_string(sorted[i].year));
        }
    }
};

// One consecutive-year observation pair inside a unit.
struct Transition {
    std::string unit_id;
    int year_from = 0;
    double x_from = 0.0;
    double x_to = 0.0;
    double a_from = 0.0;

    double rel_change() const { return (x_to - x_from) / x_from; }
    double log_return() const { return std::log(x_to / x_from); }
};

inline std::vector<Transition> consecutive_transitions(const Panel& panel) {
    Panel p = panel;
    p.sort_canonical();
    std::vector<Transition> out;
    for (size_t i = 1; i < p.rows.size(); ++i) {
        const auto& a = p.rows[i - 1];
        const auto& b = p.rows[i];
        if (a.unit_id == b.unit_id && b.year == a.year + 1)
            out.push_back({a.unit_id, a.year, a.tree_area_km2, b.tree_area_km2, a.atr_share});
    }
    return out;
}

}  // namespace canopy
