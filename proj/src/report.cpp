#include "drgd/report.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace drgd {

namespace {

std::string csv_cell(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
    std::string out = "\"";
    for (char ch : s) {
        if (ch == '"') out += '"';
        out += ch;
    }
    out += '"';
    return out;
}

std::string md_cell(const std::string& s) {
    std::string out;
    for (char ch : s) {
        if (ch == '|') out += '\\';
        out += ch == '\n' ? ' ' : ch;
    }
    return out;
}

void append_csv_row(std::ostringstream& os, const std::vector<std::string>& row) {
    for (std::size_t i = 0; i < row.size(); ++i) {
        if (i) os << ',';
        os << csv_cell(row[i]);
    }
    os << '\n';
}

std::vector<std::string> split_md_row(const std::string& line) {
    std::vector<std::string> cells;
    std::string cur;
    std::size_t i = 0;
    while (i < line.size() && line[i] == ' ') ++i;
    if (i < line.size() && line[i] == '|') ++i;
    for (; i < line.size(); ++i) {
        const char ch = line[i];
        if (ch == '\\' && i + 1 < line.size() && line[i + 1] == '|') {
            cur += '|';
            ++i;
        } else if (ch == '|') {
            cells.push_back(cur);
            cur.clear();
        } else {
            cur += ch;
        }
    }
    for (auto& c : cells) {
        const auto b = c.find_first_not_of(' ');
        const auto e = c.find_last_not_of(' ');
        c = b == std::string::npos ? std::string() : c.substr(b, e - b + 1);
    }
    return cells;
}

}  // namespace

void Table::add_row(std::vector<std::string> row) {
    if (row.size() != columns.size()) {
        throw std::invalid_argument("Table '" + title + "': row has " + std::to_string(row.size()) +
                                    " cells, expected " + std::to_string(columns.size()));
    }
    rows.push_back(std::move(row));
}

ReportFormat parse_format(const std::string& name) {
    if (name == "csv") return ReportFormat::csv;
    if (name == "markdown" || name == "md") return ReportFormat::markdown;
    throw std::invalid_argument("unknown report format '" + name + "' (expected csv or markdown)");
}

const char* file_extension(ReportFormat f) {
    return f == ReportFormat::csv ? ".csv" : ".md";
}

std::string to_csv(const Table& t) {
    std::ostringstream os;
    for (const auto& n : t.notes) os << "# " << n << '\n';
    append_csv_row(os, t.columns);
    for (const auto& r : t.rows) append_csv_row(os, r);
    return os.str();
}

std::string to_markdown(const Table& t) {
    std::ostringstream os;
    if (!t.title.empty()) os << "## " << t.title << "\n\n";
    for (const auto& n : t.notes) os << "> " << n << "\n";
    if (!t.notes.empty()) os << '\n';
    auto row_out = [&](const std::vector<std::string>& r) {
        os << '|';
        for (const auto& c : r) os << ' ' << md_cell(c) << " |";
        os << '\n';
    };
    row_out(t.columns);
    os << '|';
    for (std::size_t i = 0; i < t.columns.size(); ++i) os << " --- |";
    os << '\n';
    for (const auto& r : t.rows) row_out(r);
    return os.str();
}

std::string render(const Table& t, ReportFormat f) {
    return f == ReportFormat::csv ? to_csv(t) : to_markdown(t);
}

Table parse_csv(const std::string& text) {
    Table t;
    std::vector<std::vector<std::string>> records;
    std::vector<std::string> rec;
    std::string cell;
    bool quoted = false;
    bool at_line_start = true;
    bool any = false;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char ch = text[i];
        if (at_line_start && !quoted && ch == '#') {
            const auto nl = text.find('\n', i);
            std::string note = text.substr(i, nl == std::string::npos ? std::string::npos : nl - i);
            if (note.rfind("# ", 0) == 0) note = note.substr(2);
            t.notes.push_back(note);
            if (nl == std::string::npos) break;
            i = nl;
            continue;
        }
        at_line_start = false;
        if (quoted) {
            if (ch == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    cell += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cell += ch;
            }
            continue;
        }
        if (ch == '"') {
            quoted = true;
            any = true;
        } else if (ch == ',') {
            rec.push_back(cell);
            cell.clear();
            any = true;
        } else if (ch == '\n') {
            rec.push_back(cell);
            cell.clear();
            records.push_back(std::move(rec));
            rec.clear();
            any = false;
            at_line_start = true;
        } else if (ch != '\r') {
            cell += ch;
            any = true;
        }
    }
    if (quoted) throw std::invalid_argument("parse_csv: unterminated quoted cell");
    if (any) {
        rec.push_back(cell);
        records.push_back(std::move(rec));
    }
    if (records.empty()) throw std::invalid_argument("parse_csv: missing header line");
    t.columns = std::move(records.front());
    for (std::size_t r = 1; r < records.size(); ++r) t.add_row(std::move(records[r]));
    return t;
}

Table parse_markdown(const std::string& text) {
    Table t;
    std::istringstream in(text);
    std::string line;
    int stage = 0;  // 0: before header, 1: expect separator, 2: body
    while (std::getline(in, line)) {
        const auto first = line.find_first_not_of(' ');
        if (first == std::string::npos || line[first] != '|') {
            if (stage == 2) break;
            continue;
        }
        auto cells = split_md_row(line);
        if (stage == 0) {
            t.columns = std::move(cells);
            stage = 1;
        } else if (stage == 1) {
            stage = 2;
        } else {
            t.add_row(std::move(cells));
        }
    }
    if (stage == 0) throw std::invalid_argument("parse_markdown: no table found");
    return t;
}

void emit_report(const Table& t, ReportFormat f, const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out << render(t, f);
    if (!out) throw std::runtime_error("failed writing " + path.string());
}

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

std::string format_sci(double v, int digits) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*e", digits, v);
    return buf;
}

Table residual_history_table(
    const std::vector<std::pair<std::string, std::vector<double>>>& runs) {
    Table t;
    t.title = "Fixed-point residual history";
    t.columns = {"instance_id", "iter", "residual"};
    for (const auto& [id, hist] : runs) {
        for (std::size_t k = 0; k < hist.size(); ++k) {
            t.add_row({id, std::to_string(k + 1), format_double(hist[k])});
        }
    }
    return t;
}

}  // namespace drgd
