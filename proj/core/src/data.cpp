#include "flowcast/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "flowcast/errors.hpp"

namespace flowcast {

namespace {

const std::vector<std::string> kNwpNames{"ws10", "wd10", "ws100", "wd100"};

std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r' || s[b] == '\n')) ++b;
    while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r' || s[e - 1] == '\n')) --e;
    return std::string(s.substr(b, e - b));
}

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        out.push_back(trim(std::string_view(line).substr(start, comma == std::string::npos ? std::string::npos
                                                                                            : comma - start)));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return out;
}

bool parse_double(const std::string& s, double& out) {
    const char* first = s.data();
    const char* last = s.data() + s.size();
    if (first != last && *first == '+') ++first;
    const auto [ptr, ec] = std::from_chars(first, last, out);
    return ec == std::errc() && ptr == last && std::isfinite(out);
}

bool parse_int(std::string_view s, std::int64_t& out) {
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc() && ptr == s.data() + s.size();
}

// Days since 1970-01-01 of a proleptic Gregorian date.
std::int64_t days_from_civil(std::int64_t y, std::int64_t m, std::int64_t d) {
    y -= m <= 2 ? 1 : 0;
    const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
    const std::int64_t yoe = y - era * 400;
    const std::int64_t doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    const std::int64_t doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + doe - 719468;
}

[[noreturn]] void bad_timestamp(const std::string& text) {
    throw DataError("unrecognized timestamp '" + text + "'");
}

std::int64_t parse_clock(std::string_view clock, const std::string& text) {
    // H:MM or HH:MM[:SS]
    std::int64_t parts[3] = {0, 0, 0};
    int n = 0;
    std::size_t start = 0;
    while (n < 3) {
        const std::size_t colon = clock.find(':', start);
        const std::string_view piece = clock.substr(start, colon == std::string_view::npos ? colon : colon - start);
        if (piece.empty() || !parse_int(piece, parts[n])) bad_timestamp(text);
        ++n;
        if (colon == std::string_view::npos) break;
        start = colon + 1;
    }
    if (n < 2 || parts[0] < 0 || parts[0] > 24 || parts[1] < 0 || parts[1] > 59 || parts[2] < 0 || parts[2] > 60)
        bad_timestamp(text);
    return parts[0] * 3600 + parts[1] * 60 + parts[2];
}

std::int64_t date_seconds(std::int64_t y, std::int64_t m, std::int64_t d, const std::string& text) {
    if (m < 1 || m > 12 || d < 1 || d > 31) bad_timestamp(text);
    return days_from_civil(y, m, d) * 86400;
}

}  // namespace

std::vector<std::string> SeriesSchema::header() const {
    std::vector<std::string> cols{"timestamp"};
    cols.insert(cols.end(), power_columns.begin(), power_columns.end());
    cols.insert(cols.end(), nwp_columns.begin(), nwp_columns.end());
    return cols;
}

SeriesSchema SeriesSchema::infer(const std::vector<std::string>& header) {
    if (header.empty() || header[0] != "timestamp") throw DataError("header must start with 'timestamp'");
    if (header.size() < 2 || header[1] != "power") throw DataError("header must have 'power' as its second column");
    SeriesSchema schema;
    schema.power_columns = {"power"};
    std::size_t i = 2;
    for (; i < header.size() && header[i].rfind("power_site", 0) == 0; ++i) {
        const std::string expected = "power_site" + std::to_string(schema.power_columns.size() + 1);
        if (header[i] != expected || schema.power_columns.size() >= 5) {
            throw DataError("unexpected power column '" + header[i] + "' (expected " + expected + ")");
        }
        schema.power_columns.push_back(header[i]);
    }
    for (; i < header.size(); ++i) {
        if (std::find(kNwpNames.begin(), kNwpNames.end(), header[i]) == kNwpNames.end() ||
            std::find(schema.nwp_columns.begin(), schema.nwp_columns.end(), header[i]) != schema.nwp_columns.end()) {
            throw DataError("unknown or repeated column '" + header[i] + "'");
        }
        schema.nwp_columns.push_back(header[i]);
    }
    return schema;
}

std::int64_t parse_timestamp(const std::string& raw) {
    const std::string text = trim(raw);
    std::int64_t value = 0;
    if (parse_int(text, value)) return value;
    // ISO: YYYY-MM-DD[ T]HH:MM[:SS]
    if (text.size() >= 10 && text[4] == '-' && text[7] == '-') {
        std::int64_t y, m, d;
        if (!parse_int(std::string_view(text).substr(0, 4), y) || !parse_int(std::string_view(text).substr(5, 2), m) ||
            !parse_int(std::string_view(text).substr(8, 2), d)) {
            bad_timestamp(text);
        }
        std::int64_t secs = date_seconds(y, m, d, text);
        if (text.size() > 10) {
            if (text[10] != ' ' && text[10] != 'T') bad_timestamp(text);
            std::string_view clock = std::string_view(text).substr(11);
            if (!clock.empty() && clock.back() == 'Z') clock.remove_suffix(1);
            secs += parse_clock(clock, text);
        }
        return secs;
    }
    // GEFCom style: YYYYMMDD H:MM
    const std::size_t space = text.find(' ');
    if (space == 8) {
        std::int64_t y, m, d;
        if (!parse_int(std::string_view(text).substr(0, 4), y) || !parse_int(std::string_view(text).substr(4, 2), m) ||
            !parse_int(std::string_view(text).substr(6, 2), d)) {
            bad_timestamp(text);
        }
        return date_seconds(y, m, d, text) + parse_clock(std::string_view(text).substr(9), text);
    }
    bad_timestamp(text);
}

double normalize_power(double raw, double capacity) {
    if (!(capacity > 0.0)) throw DomainError("capacity must be positive");
    return raw / capacity;
}

double denormalize_power(double normalized, double capacity) {
    if (!(capacity > 0.0)) throw DomainError("capacity must be positive");
    return normalized * capacity;
}

SeriesFrame read_csv(std::istream& is, const SeriesSchema& schema, const std::string& source) {
    if (schema.capacity && !(*schema.capacity > 0.0)) throw ConfigError("capacity must be positive");
    std::string line;
    if (!std::getline(is, line)) throw DataError(source + ": missing header row");
    if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
    const std::vector<std::string> expected = schema.header();
    const std::vector<std::string> header = split_fields(line);
    if (header != expected) {
        std::string want;
        for (const auto& c : expected) want += (want.empty() ? "" : ",") + c;
        throw DataError(source + ": header does not match schema (expected '" + want + "')");
    }

    SeriesFrame frame;
    frame.power_columns = schema.power_columns;
    frame.nwp_columns = schema.nwp_columns;
    const std::size_t np = schema.power_columns.size();
    const std::size_t nn = schema.nwp_columns.size();
    std::vector<double> power, nwp;

    // Every timestamped row (kept or dropped) must sit on one grid; rows whose
    // timestamp cell is empty occupy one slot each.
    bool have_prev = false;
    std::int64_t prev_ts = 0;
    std::size_t pending_slots = 0;
    std::size_t line_no = 1;
    auto fail = [&](const std::string& what) {
        throw DataError(source + ":" + std::to_string(line_no) + ": " + what);
    };

    while (std::getline(is, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const std::vector<std::string> fields = split_fields(line);
        if (fields.size() != expected.size()) {
            fail("expected " + std::to_string(expected.size()) + " fields, found " + std::to_string(fields.size()));
        }
        if (fields[0].empty()) {
            ++pending_slots;
            ++frame.dropped_rows;
            continue;
        }
        std::int64_t ts = 0;
        try {
            ts = parse_timestamp(fields[0]);
        } catch (const DataError& e) {
            fail(e.what());
        }
        if (have_prev) {
            const std::int64_t diff = ts - prev_ts;
            if (diff <= 0) fail("timestamps must be strictly increasing");
            const auto slots = static_cast<std::int64_t>(pending_slots + 1);
            if (frame.step == 0) {
                if (diff % slots != 0) fail("nonuniform timestamp spacing");
                frame.step = diff / slots;
            } else if (diff != frame.step * slots) {
                fail("nonuniform timestamp spacing (step " + std::to_string(frame.step) + ", found " +
                     std::to_string(diff) + ")");
            }
        }
        have_prev = true;
        prev_ts = ts;
        pending_slots = 0;

        bool missing = false;
        std::vector<double> values(fields.size() - 1);
        for (std::size_t c = 1; c < fields.size(); ++c) {
            if (fields[c].empty()) {
                missing = true;
                continue;
            }
            if (!parse_double(fields[c], values[c - 1])) fail("malformed value '" + fields[c] + "' in " + expected[c]);
        }
        if (missing) {
            ++frame.dropped_rows;
            continue;
        }
        for (std::size_t c = 0; c < np; ++c) {
            double v = values[c];
            if (schema.capacity) v = normalize_power(v, *schema.capacity);
            if (v < 0.0 || v > 1.0) {
                if (v < -schema.clamp_tolerance || v > 1.0 + schema.clamp_tolerance) {
                    std::ostringstream os;
                    os << expected[c + 1] << " = " << v << " outside [0, 1] beyond tolerance " << schema.clamp_tolerance;
                    fail(os.str());
                }
                v = std::clamp(v, 0.0, 1.0);
                ++frame.clamped_values;
            }
            power.push_back(v);
        }
        for (std::size_t c = 0; c < nn; ++c) nwp.push_back(values[np + c]);
        frame.timestamps.push_back(ts);
    }
    const std::size_t t = frame.timestamps.size();
    frame.power = Matrix(t, np, std::move(power));
    frame.nwp = Matrix(t, nn, std::move(nwp));
    return frame;
}

SeriesFrame load_csv(const std::string& path, const SeriesSchema& schema) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open data file '" + path + "'");
    return read_csv(in, schema, path);
}

SeriesFrame load_csv(const std::string& path, std::optional<double> capacity) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open data file '" + path + "'");
    std::string line;
    if (!std::getline(in, line)) throw DataError(path + ": missing header row");
    if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
    SeriesSchema schema = SeriesSchema::infer(split_fields(line));
    schema.capacity = capacity;
    in.clear();
    in.seekg(0);
    return read_csv(in, schema, path);
}

SupervisedSet SupervisedSet::slice(std::size_t begin, std::size_t end) const {
    SupervisedSet out;
    out.case_id = case_id;
    out.x = x.slice_rows(begin, end);
    out.y = y.slice_rows(begin, end);
    auto cut = [&](const std::vector<std::int64_t>& v) {
        return std::vector<std::int64_t>(v.begin() + static_cast<std::ptrdiff_t>(begin),
                                         v.begin() + static_cast<std::ptrdiff_t>(end));
    };
    out.issue_times = cut(issue_times);
    out.feature_end_times = cut(feature_end_times);
    out.target_start_times = cut(target_start_times);
    return out;
}

std::size_t default_horizon(int case_id) {
    switch (case_id) {
        case 1: return 24;
        case 3: return 6;
        case 2:
        case 4: return 1;
        default: throw ConfigError("case must be 1, 2, 3 or 4 (got " + std::to_string(case_id) + ")");
    }
}

SupervisedSet make_case(const SeriesFrame& frame, int case_id, std::size_t lag, std::size_t horizon) {
    if (horizon == 0) horizon = default_horizon(case_id);
    else default_horizon(case_id);
    if (lag == 0) throw ConfigError("lag must be positive");
    const std::size_t n = frame.size();
    const std::int64_t step = frame.step;

    SupervisedSet out;
    out.case_id = case_id;
    std::vector<double> xs, ys;
    std::size_t ctx = 0, dim = 0;

    if (case_id == 1) {
        if (frame.nwp.cols == 0) throw DataError("case 1 needs NWP feature columns");
        ctx = frame.nwp.cols;
        dim = 1;
        const auto lead = static_cast<std::int64_t>(horizon) * step;
        // One row per target time whose issue time lies within the record.
        for (std::size_t i = 0; i < n; ++i) {
            const std::int64_t target = frame.timestamps[i];
            const std::int64_t issue = target - lead;
            if (n == 0 || issue < frame.timestamps.front()) continue;
            const auto row = frame.nwp.row(i);
            xs.insert(xs.end(), row.begin(), row.end());
            ys.push_back(frame.power(i, 0));
            out.issue_times.push_back(issue);
            // NWP values valid at the target time, issued at the issue time.
            out.feature_end_times.push_back(issue);
            out.target_start_times.push_back(target);
        }
    } else {
        const bool multisite = case_id == 4;
        if (multisite && frame.sites() < 2) throw DataError("case 4 needs several power_site columns");
        const std::size_t sites = multisite ? frame.sites() : 1;
        const std::size_t span_len = case_id == 3 ? horizon : 1;
        ctx = lag * sites;
        dim = case_id == 3 ? horizon : sites;
        const std::size_t window = lag + horizon;
        if (n < window) {
            throw DataError("series of " + std::to_string(n) + " rows is too short for lag " + std::to_string(lag) +
                            " and horizon " + std::to_string(horizon));
        }
        for (std::size_t s = 0; s + window <= n; ++s) {
            const std::size_t t = s + lag - 1;  // issue index
            const std::size_t last = s + window - 1;
            if (frame.timestamps[last] - frame.timestamps[s] != static_cast<std::int64_t>(window - 1) * step) continue;
            for (std::size_t k = 0; k < sites; ++k)
                for (std::size_t l = 0; l < lag; ++l) xs.push_back(frame.power(s + l, k));
            if (case_id == 3) {
                for (std::size_t h = 1; h <= span_len; ++h) ys.push_back(frame.power(t + h, 0));
            } else {
                for (std::size_t k = 0; k < sites; ++k) ys.push_back(frame.power(t + horizon, k));
            }
            out.issue_times.push_back(frame.timestamps[t]);
            out.feature_end_times.push_back(frame.timestamps[t]);
            out.target_start_times.push_back(frame.timestamps[case_id == 3 ? t + 1 : t + horizon]);
        }
    }
    const std::size_t rows = out.issue_times.size();
    if (rows == 0) throw DataError("case " + std::to_string(case_id) + " produced no supervised rows");
    out.x = Matrix(rows, ctx, std::move(xs));
    out.y = Matrix(rows, dim, std::move(ys));
    return out;
}

SplitSets split(const SupervisedSet& set, double train, double val, double test) {
    if (train < 0.0 || val < 0.0 || test < 0.0 || std::abs(train + val + test - 1.0) > 1e-9) {
        throw ConfigError("split ratios must be non-negative and sum to 1");
    }
    const std::size_t n = set.size();
    const auto n_train = static_cast<std::size_t>(std::floor(train * static_cast<double>(n) + 1e-9));
    const auto n_val = static_cast<std::size_t>(std::floor(val * static_cast<double>(n) + 1e-9));
    if (n_train == 0 || n_val == 0 || n_train + n_val >= n) {
        throw DataError("split of " + std::to_string(n) + " rows leaves an empty partition");
    }
    return {set.slice(0, n_train), set.slice(n_train, n_train + n_val), set.slice(n_train + n_val, n)};
}

}  // namespace flowcast
