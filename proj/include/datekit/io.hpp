#pragma once

#include <filesystem>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "datekit/core.hpp"
#include "datekit/dlm.hpp"
#include "datekit/eval.hpp"

namespace datekit {

/// Shortest decimal text that round-trips the double.
std::string format_double(double v);

/// Panel CSV: header `unit_id,treated,y_0,...,y_T`, treated in {0,1}.
void write_panel_csv(std::ostream& os, const SeriesPanel& panel);
SeriesPanel read_panel_csv(std::istream& is, int t_c);

/// DatePath CSV: `h,estimate,lower,upper` plus `spot,persistent,trend` when
/// components are present. Bounds are blank for interval-free methods.
void write_date_csv(std::ostream& os, const DatePath& path);
DatePath read_date_csv(std::istream& is);

/// `h` and estimate/lower/upper for each of spot, persistent and trend.
void write_decomposition_csv(std::ostream& os, const Decomposition& d);

struct IngestOptions {
    int t_c = 0;
    /// Column names (column format) or unit ids (panel format) of treated units.
    /// When empty the first series is treated.
    std::vector<std::string> treated;
};

/// Reads either the panel CSV format or a column format with one series per
/// column and an optional leading date/time column. Throws ParseError for
/// malformed text and ValidationError for missing or non-finite values.
SeriesPanel ingest_csv(std::istream& is, const IngestOptions& options);
SeriesPanel ingest_csv(const std::filesystem::path& path, const IngestOptions& options);

/// Per-replication result rows: one row per (method, h), with central bounds
/// at every calibration level; failed fits produce a single row with the error.
void write_result_header(std::ostream& os);
void write_result_rows(std::ostream& os, const ReplicationResult& r);
std::vector<ReplicationResult> read_result_csv(std::istream& is);

/// Writes to a temporary sibling and renames it into place.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);
std::string read_file(const std::filesystem::path& path);

/// Lower-case hex SHA-256.
std::string sha256_hex(const std::string& data);

}  // namespace datekit
