#pragma once

// Minimal CSV layer. Parse errors always carry the file path, the 1-based
// line number, and the offending column so the CLI can report them directly.

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "canopy/errors.hpp"

namespace canopy {

struct CsvTable {
    std::string path;
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;
    std::vector<long> line_numbers;

    int col(const std::string& name) const {
        for (size_t i = 0; i < columns.size(); ++i)
            if (columns[i] == name) return static_cast<int>(i);
        throw validation_error(name, "missing column in " + path);
    }
};

inline CsvTable read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw validation_error("path", "cannot open " + path);
    CsvTable t;
    t.path = path;
    std::string line;
    long lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::string cell;
        std::stringstream ss(line);
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (!line.empty() && line.back() == ',') cells.push_back("");
        if (t.columns.empty()) {
            t.columns = cells;
            continue;
        }
        if (cells.size() != t.columns.size())
            throw validation_error("row", path + ":" + std::to_string(lineno) + ": expected " +
                                              std::to_string(t.columns.size()) + " fields, got " +
                                              std::to_string(cells.size()));
        t.rows.push_back(std::move(cells));
        t.line_numbers.push_back(lineno);
    }
    if (t.columns.empty()) throw validation_error("path", path + " is empty");
    return t;
}

inline double csv_double(const CsvTable& t, size_t row, int col) {
    const std::string& s = t.rows[row][col];
    try {
        size_t pos = 0;
        double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw validation_error(t.columns[col], t.path + ":" + std::to_string(t.line_numbers[row]) +
                                                   ": bad numeric value '" + s + "'");
    }
}

inline int csv_int(const CsvTable& t, size_t row, int col) {
    const std::string& s = t.rows[row][col];
    try {
        size_t pos = 0;
        int v = std::stoi(s, &pos);
        if (pos != s.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw validation_error(t.columns[col], t.path + ":" + std::to_string(t.line_numbers[row]) +
                                                   ": bad integer value '" + s + "'");
    }
}

// 12 significant digits, locale-independent
inline std::string csv_num(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

class CsvWriter {
  public:
    explicit CsvWriter(const std::string& path) : out_(path), path_(path) {
        if (!out_) throw validation_error("path", "cannot write " + path);
    }

    void row(const std::vector<std::string>& cells) {
        for (size_t i = 0; i < cells.size(); ++i) {
            if (i) out_ << ',';
            out_ << cells[i];
        }
        out_ << '\n';
        if (!out_) throw validation_error("path", "write failed: " + path_);
    }

  private:
    std::ofstream out_;
    std::string path_;
};

}  // namespace canopy
