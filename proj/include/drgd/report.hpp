#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace drgd {

/// A rectangular table of preformatted cells. Column order is fixed by the
/// producer and preserved by every renderer.
struct Table {
    std::string title;
    std::vector<std::string> notes;  ///< rendered above the table
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;

    void add_row(std::vector<std::string> row);
};

enum class ReportFormat { csv, markdown };

/// "csv" or "markdown" / "md"; throws std::invalid_argument otherwise.
ReportFormat parse_format(const std::string& name);
const char* file_extension(ReportFormat f);

/// RFC 4180 style: cells containing ',', '"' or newlines are quoted. Notes
/// become leading "# " comment lines. An empty table is a header line only.
std::string to_csv(const Table& t);
/// GitHub-style pipe table; '|' inside cells is escaped as "\|".
std::string to_markdown(const Table& t);
std::string render(const Table& t, ReportFormat f);

/// Inverse of to_csv; comment lines are returned as notes.
Table parse_csv(const std::string& text);
/// Inverse of to_markdown for the table body (title and notes skipped).
Table parse_markdown(const std::string& text);

void emit_report(const Table& t, ReportFormat f, const std::filesystem::path& path);

/// Shortest decimal form that parses back to the same double.
std::string format_double(double v);
/// Fixed-width scientific form for human-facing columns.
std::string format_sci(double v, int digits = 3);

/// Long format (instance_id, iter, residual) for plotting residual curves.
Table residual_history_table(const std::vector<std::pair<std::string, std::vector<double>>>& runs);

}  // namespace drgd
