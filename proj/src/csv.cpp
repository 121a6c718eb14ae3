#include "faf/csv.hpp"

#include <array>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace faf {

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            cells.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    cells.push_back(cur);
    for (auto& s : cells) {
        std::size_t a = s.find_first_not_of(" \t");
        std::size_t b = s.find_last_not_of(" \t");
        s = (a == std::string::npos) ? std::string() : s.substr(a, b - a + 1);
    }
    return cells;
}

double parse_number(const std::string& cell, std::size_t line_no, const std::string& col) {
    if (cell.empty())
        throw input_error("line " + std::to_string(line_no) + ": missing value in column " + col);
    char* end = nullptr;
    double v = std::strtod(cell.c_str(), &end);
    if (end == cell.c_str() || *end != '\0' || !std::isfinite(v))
        throw input_error("line " + std::to_string(line_no) + ": non-numeric value '" + cell +
                          "' in column " + col);
    return v;
}

}  // namespace

Dataset read_dataset_csv(const std::string& path, std::optional<std::string> group_r,
                         std::optional<std::string> group_b) {
    std::ifstream in(path);
    if (!in) throw input_error("cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw input_error(path + ": empty file");
    auto header = split_line(line);
    long y_col = -1, g_col = -1;
    std::vector<std::size_t> x_cols;
    std::vector<std::string> x_names;
    for (std::size_t j = 0; j < header.size(); ++j) {
        if (header[j] == "y") {
            if (y_col >= 0) throw input_error(path + ": duplicate column y");
            y_col = static_cast<long>(j);
        } else if (header[j] == "g") {
            if (g_col >= 0) throw input_error(path + ": duplicate column g");
            g_col = static_cast<long>(j);
        } else {
            x_cols.push_back(j);
            x_names.push_back(header[j]);
        }
    }
    if (y_col < 0 || g_col < 0) throw input_error(path + ": required columns y and g not found");

    std::vector<double> y;
    std::vector<std::uint8_t> g;
    std::vector<double> x;
    std::array<std::string, 2> labels;
    int labels_seen = 0;
    if (group_r) {
        labels[0] = *group_r;
        ++labels_seen;
    }
    if (group_b) {
        if (!group_r) throw input_error("group_b pinned without group_r");
        labels[1] = *group_b;
        ++labels_seen;
    }
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        auto cells = split_line(line);
        if (cells.size() != header.size())
            throw input_error("line " + std::to_string(line_no) + ": expected " +
                              std::to_string(header.size()) + " cells, got " +
                              std::to_string(cells.size()));
        y.push_back(parse_number(cells[y_col], line_no, "y"));
        const std::string& glab = cells[g_col];
        if (glab.empty()) throw input_error("line " + std::to_string(line_no) + ": missing value in column g");
        int gi = -1;
        for (int k = 0; k < labels_seen; ++k)
            if (labels[k] == glab) gi = k;
        if (gi < 0) {
            if (labels_seen >= 2)
                throw input_error("line " + std::to_string(line_no) + ": more than two group labels ('" +
                                  glab + "')");
            labels[labels_seen] = glab;
            gi = labels_seen++;
        }
        g.push_back(static_cast<std::uint8_t>(gi));
        for (std::size_t k = 0; k < x_cols.size(); ++k)
            x.push_back(parse_number(cells[x_cols[k]], line_no, x_names[k]));
    }
    if (labels_seen < 2) throw input_error(path + ": group absent");
    return Dataset(std::move(y), std::move(g), std::move(x), x_cols.size(), labels);
}

std::vector<double> read_column_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw input_error("cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw input_error(path + ": empty file");
    std::vector<double> out;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        auto cells = split_line(line);
        if (cells.size() != 1)
            throw input_error("line " + std::to_string(line_no) + ": expected 1 cell");
        out.push_back(parse_number(cells[0], line_no, "1"));
    }
    return out;
}

std::vector<std::array<double, 2>> read_two_column_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw input_error("cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw input_error(path + ": empty file");
    std::vector<std::array<double, 2>> out;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        auto cells = split_line(line);
        if (cells.size() != 2)
            throw input_error("line " + std::to_string(line_no) + ": expected 2 cells");
        out.push_back({parse_number(cells[0], line_no, "1"), parse_number(cells[1], line_no, "2")});
    }
    return out;
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows) {
    std::ofstream out(path);
    if (!out) throw input_error("cannot write " + path);
    for (std::size_t j = 0; j < header.size(); ++j)
        out << header[j] << (j + 1 < header.size() ? "," : "\n");
    for (const auto& row : rows) {
        for (std::size_t j = 0; j < row.size(); ++j)
            out << format_double(row[j]) << (j + 1 < row.size() ? "," : "\n");
    }
}

std::string file_digest(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw input_error("cannot open " + path);
    std::uint64_t h = 0xcbf29ce484222325ULL;
    char buf[8192];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
        std::streamsize got = in.gcount();
        for (std::streamsize i = 0; i < got; ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 0x100000001b3ULL;
        }
        if (got < static_cast<std::streamsize>(sizeof(buf))) break;
    }
    char hex[17];
    std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(h));
    return hex;
}

}  // namespace faf
