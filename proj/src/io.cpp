#include "datekit/io.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include <openssl/evp.h>

namespace datekit {

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    std::array<char, 32> buf{};
    auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    (void)ec;
    return {buf.data(), end};
}

namespace {

std::string trim(std::string s) {
    auto not_space = [](unsigned char c) { return !std::isspace(c); };
    s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
    s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
    if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
    return s;
}

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (char c : line) {
        if (c == '"') quoted = !quoted;
        if (c == ',' && !quoted) {
            out.push_back(trim(cur));
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    out.push_back(trim(cur));
    return out;
}

// Non-blank lines with their 1-based line numbers.
std::vector<std::pair<int, std::string>> read_lines(std::istream& is) {
    std::vector<std::pair<int, std::string>> out;
    std::string line;
    int n = 0;
    while (std::getline(is, line)) {
        ++n;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;
        out.emplace_back(n, line);
    }
    return out;
}

std::string lower(std::string s) {
    for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

bool is_missing(const std::string& cell) {
    const std::string l = lower(cell);
    return l.empty() || l == "na" || l == "nan" || l == "null" || l == "-nan";
}

std::string where(int line, const std::string& column) { return "line " + std::to_string(line) + ", column '" + column + "'"; }

std::optional<double> parse_number(const std::string& cell) {
    double v = 0.0;
    const char* first = cell.data();
    const char* last = cell.data() + cell.size();
    if (first != last && *first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last) return std::nullopt;
    return v;
}

// Numeric cell or a typed error naming the cell.
double parse_cell(const std::string& cell, int line, const std::string& column) {
    if (is_missing(cell)) fail(ErrorKind::ValidationError, "missing or NaN value at " + where(line, column));
    auto v = parse_number(cell);
    if (!v) fail(ErrorKind::ParseError, "non-numeric value '" + cell + "' at " + where(line, column));
    if (!std::isfinite(*v)) fail(ErrorKind::ValidationError, "non-finite value at " + where(line, column));
    return *v;
}

std::string sanitize(std::string s) {
    for (char& c : s)
        if (c == ',' || c == '\n' || c == '\r' || c == '"') c = ' ';
    return s;
}

std::string level_tag(double q) {
    char buf[8];
    std::snprintf(buf, sizeof buf, "%02d", static_cast<int>(std::lround(q * 100)));
    return buf;
}

}  // namespace

// ---------------------------------------------------------------------------

void write_panel_csv(std::ostream& os, const SeriesPanel& panel) {
    os << "unit_id,treated";
    for (int t = 0; t <= panel.horizon(); ++t) os << ",y_" << t;
    os << '\n';
    for (std::size_t i = 0; i < panel.size(); ++i) {
        const auto& u = panel.unit(i);
        os << i << ',' << (u.treated ? 1 : 0);
        for (double y : u.path) os << ',' << format_double(y);
        os << '\n';
    }
}

SeriesPanel read_panel_csv(std::istream& is, int t_c) {
    IngestOptions opt;
    opt.t_c = t_c;
    return ingest_csv(is, opt);
}

SeriesPanel ingest_csv(const std::filesystem::path& path, const IngestOptions& options) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::ParseError, "cannot open " + path.string());
    return ingest_csv(in, options);
}

SeriesPanel ingest_csv(std::istream& is, const IngestOptions& options) {
    const auto lines = read_lines(is);
    if (lines.empty()) fail(ErrorKind::ParseError, "input is empty");
    const auto header = split(lines.front().second);
    if (lines.size() < 2) fail(ErrorKind::ParseError, "input has a header but no data rows");

    std::vector<std::vector<std::string>> rows;
    for (std::size_t r = 1; r < lines.size(); ++r) {
        auto cells = split(lines[r].second);
        if (cells.size() != header.size())
            fail(ErrorKind::ParseError, "line " + std::to_string(lines[r].first) + " has " +
                                            std::to_string(cells.size()) + " fields, header has " +
                                            std::to_string(header.size()));
        rows.push_back(std::move(cells));
    }

    std::vector<UnitSeries> units;
    const bool panel_format = header.size() >= 2 && lower(header[0]) == "unit_id" && lower(header[1]) == "treated";
    if (panel_format) {
        if (header.size() < 5) fail(ErrorKind::ParseError, "panel header needs y_0 .. y_T columns");
        for (std::size_t c = 2; c < header.size(); ++c)
            if (header[c] != "y_" + std::to_string(c - 2))
                fail(ErrorKind::ParseError, "expected column 'y_" + std::to_string(c - 2) + "', found '" + header[c] + "'");
        for (std::size_t r = 0; r < rows.size(); ++r) {
            const int line = lines[r + 1].first;
            const auto& cells = rows[r];
            UnitSeries u;
            if (!options.treated.empty()) {
                u.treated = std::find(options.treated.begin(), options.treated.end(), cells[0]) != options.treated.end();
            } else if (cells[1] == "1" || cells[1] == "0") {
                u.treated = cells[1] == "1";
            } else {
                fail(ErrorKind::ParseError, "treated flag must be 0 or 1 at " + where(line, "treated"));
            }
            for (std::size_t c = 2; c < cells.size(); ++c) u.path.push_back(parse_cell(cells[c], line, header[c]));
            units.push_back(std::move(u));
        }
    } else {
        // Column format: one series per column, optional leading time label.
        static const std::array<std::string, 7> time_names{"date", "time", "month", "period", "t", "index", "year"};
        std::size_t first = 0;
        const std::string h0 = lower(header[0]);
        if (std::find(time_names.begin(), time_names.end(), h0) != time_names.end() || !parse_number(rows[0][0]))
            first = 1;
        if (first >= header.size()) fail(ErrorKind::ParseError, "no series columns found");
        for (std::size_t c = first; c < header.size(); ++c) {
            UnitSeries u;
            if (options.treated.empty())
                u.treated = c == first;
            else
                u.treated = std::find(options.treated.begin(), options.treated.end(), header[c]) != options.treated.end();
            for (std::size_t r = 0; r < rows.size(); ++r)
                u.path.push_back(parse_cell(rows[r][c], lines[r + 1].first, header[c]));
            units.push_back(std::move(u));
        }
    }
    if (!options.treated.empty() &&
        std::none_of(units.begin(), units.end(), [](const UnitSeries& u) { return u.treated; }))
        fail(ErrorKind::ValidationError, "none of the requested treated units was found");
    return SeriesPanel(std::move(units), options.t_c);
}

// ---------------------------------------------------------------------------

void write_date_csv(std::ostream& os, const DatePath& path) {
    const bool comps = path.components.has_value();
    os << "h,estimate,lower,upper";
    if (comps) os << ",spot,persistent,trend";
    os << '\n';
    for (std::size_t h = 0; h < path.size(); ++h) {
        os << h << ',' << format_double(path.estimate[h]) << ',';
        if (path.has_bounds()) os << format_double(path.lower[h]) << ',' << format_double(path.upper[h]);
        else os << ',';
        if (comps)
            os << ',' << format_double(path.components->spot[h]) << ',' << format_double(path.components->persistent[h])
               << ',' << format_double(path.components->trend[h]);
        os << '\n';
    }
}

DatePath read_date_csv(std::istream& is) {
    const auto lines = read_lines(is);
    if (lines.empty()) fail(ErrorKind::ParseError, "DatePath CSV is empty");
    const auto header = split(lines.front().second);
    if (header.size() < 4 || header[0] != "h" || header[1] != "estimate" || header[2] != "lower" || header[3] != "upper")
        fail(ErrorKind::ParseError, "DatePath header must start with h,estimate,lower,upper");
    const bool comps = header.size() >= 7;
    DatePath p;
    bool bounds = true;
    ComponentPaths cp;
    for (std::size_t r = 1; r < lines.size(); ++r) {
        const auto cells = split(lines[r].second);
        const int line = lines[r].first;
        if (cells.size() != header.size()) fail(ErrorKind::ParseError, "ragged row at line " + std::to_string(line));
        p.horizon_index.push_back(static_cast<int>(parse_cell(cells[0], line, "h")));
        p.estimate.push_back(parse_cell(cells[1], line, "estimate"));
        if (cells[2].empty() || cells[3].empty()) {
            bounds = false;
        } else {
            p.lower.push_back(parse_cell(cells[2], line, "lower"));
            p.upper.push_back(parse_cell(cells[3], line, "upper"));
        }
        if (comps) {
            cp.spot.push_back(parse_cell(cells[4], line, "spot"));
            cp.persistent.push_back(parse_cell(cells[5], line, "persistent"));
            cp.trend.push_back(parse_cell(cells[6], line, "trend"));
        }
    }
    if (!bounds) {
        p.lower.clear();
        p.upper.clear();
    }
    if (comps) p.components = std::move(cp);
    return p;
}

void write_decomposition_csv(std::ostream& os, const Decomposition& d) {
    os << "h,spot,spot_lower,spot_upper,persistent,persistent_lower,persistent_upper,trend,trend_lower,trend_upper\n";
    for (std::size_t h = 0; h < d.spot.size(); ++h) {
        os << h;
        for (const DatePath* p : {&d.spot, &d.persistent, &d.trend}) {
            os << ',' << format_double(p->estimate[h]) << ',';
            if (p->has_bounds()) os << format_double(p->lower[h]) << ',' << format_double(p->upper[h]);
            else os << ',';
        }
        os << '\n';
    }
}

// ---------------------------------------------------------------------------

void write_result_header(std::ostream& os) {
    os << "scenario,T,rep,method,status,error,h,truth,estimate,level,lower,upper";
    for (double q : quantile_levels()) os << ",lo_" << level_tag(q) << ",hi_" << level_tag(q);
    os << '\n';
}

void write_result_rows(std::ostream& os, const ReplicationResult& r) {
    const std::string prefix = to_string(r.kind) + "," + std::to_string(r.horizon) + "," + std::to_string(r.rep) + "," +
                               r.method + ",";
    const std::size_t n_bands = quantile_levels().size();
    if (r.failed) {
        os << prefix << "failed," << sanitize(r.error) << ",,,,,,";
        for (std::size_t k = 0; k < n_bands; ++k) os << ",,";
        os << '\n';
        return;
    }
    const auto& e = r.estimate;
    for (std::size_t h = 0; h < e.size(); ++h) {
        os << prefix << "ok,," << h << ',' << format_double(r.truth.estimate.at(h)) << ','
           << format_double(e.estimate[h]) << ',';
        if (e.has_bounds())
            os << format_double(e.level) << ',' << format_double(e.lower[h]) << ',' << format_double(e.upper[h]);
        else
            os << ",,";
        for (double q : quantile_levels()) {
            const Band* b = e.band(q);
            if (b) os << ',' << format_double(b->lower[h]) << ',' << format_double(b->upper[h]);
            else os << ",,";
        }
        os << '\n';
    }
}

std::vector<ReplicationResult> read_result_csv(std::istream& is) {
    const auto lines = read_lines(is);
    if (lines.empty()) fail(ErrorKind::ParseError, "result file is empty");
    const auto header = split(lines.front().second);
    const auto levels = quantile_levels();
    if (header.size() != 12 + 2 * levels.size() || header[0] != "scenario")
        fail(ErrorKind::ParseError, "unrecognised result header");

    std::vector<ReplicationResult> out;
    std::map<std::tuple<std::string, int, int, std::string>, std::size_t> index;
    for (std::size_t r = 1; r < lines.size(); ++r) {
        const int line = lines[r].first;
        const auto c = split(lines[r].second);
        if (c.size() != header.size()) fail(ErrorKind::ParseError, "ragged row at line " + std::to_string(line));
        const int T = static_cast<int>(parse_cell(c[1], line, "T"));
        const int rep = static_cast<int>(parse_cell(c[2], line, "rep"));
        const auto key = std::make_tuple(c[0], T, rep, c[3]);
        auto it = index.find(key);
        if (it == index.end()) {
            ReplicationResult res;
            res.kind = parse_scenario_kind(c[0]);
            res.horizon = T;
            res.rep = rep;
            res.method = c[3];
            res.failed = c[4] == "failed";
            res.error = c[5];
            it = index.emplace(key, out.size()).first;
            out.push_back(std::move(res));
        }
        auto& res = out[it->second];
        if (res.failed) continue;
        res.truth.horizon_index.push_back(static_cast<int>(res.truth.size()));
        res.truth.estimate.push_back(parse_cell(c[7], line, "truth"));
        auto& e = res.estimate;
        e.horizon_index.push_back(static_cast<int>(e.size()));
        e.estimate.push_back(parse_cell(c[8], line, "estimate"));
        if (!c[9].empty()) {
            e.level = parse_cell(c[9], line, "level");
            e.lower.push_back(parse_cell(c[10], line, "lower"));
            e.upper.push_back(parse_cell(c[11], line, "upper"));
        }
        for (std::size_t k = 0; k < levels.size(); ++k) {
            const auto& lo = c[12 + 2 * k];
            if (lo.empty()) continue;
            if (e.bands.size() <= k) e.bands.resize(levels.size());
            e.bands[k].level = levels[k];
            e.bands[k].lower.push_back(parse_cell(lo, line, header[12 + 2 * k]));
            e.bands[k].upper.push_back(parse_cell(c[13 + 2 * k], line, header[13 + 2 * k]));
        }
    }
    for (auto& res : out) {
        auto& b = res.estimate.bands;
        b.erase(std::remove_if(b.begin(), b.end(), [&](const Band& x) { return x.lower.size() != res.estimate.size(); }),
                b.end());
    }
    return out;
}

// ---------------------------------------------------------------------------

void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) fail(ErrorKind::InvalidArgument, "cannot write " + tmp.string());
        out << content;
        out.flush();
        if (!out) fail(ErrorKind::InvalidArgument, "write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::ParseError, "cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string sha256_hex(const std::string& data) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr);
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[md[i] >> 4]);
        out.push_back(hex[md[i] & 15]);
    }
    return out;
}

}  // namespace datekit
