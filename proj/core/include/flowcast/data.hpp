#pragma once

// Dataset ingestion and case construction for wind-power series.
//
// Input CSV: header `timestamp,power[,power_site2..5][,ws10,wd10,ws100,wd100]`,
// comma-separated decimals, one row per uniformly spaced timestamp.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "flowcast/matrix.hpp"

namespace flowcast {

struct SeriesSchema {
    std::vector<std::string> power_columns{"power"};
    std::vector<std::string> nwp_columns;
    /// When set, raw power is divided by this nominal capacity.
    std::optional<double> capacity;
    /// Normalized power within this distance outside [0,1] is clamped; further out is an error.
    double clamp_tolerance = 0.05;

    /// Column list expected in the header, including the leading timestamp.
    std::vector<std::string> header() const;
    /// Schema implied by a header line; throws DataError on unknown or misplaced columns.
    static SeriesSchema infer(const std::vector<std::string>& header);
};

struct SeriesFrame {
    std::vector<std::int64_t> timestamps;  // seconds; strictly increasing on a constant grid
    std::int64_t step = 0;
    Matrix power;  // T x sites, normalized to [0,1]
    Matrix nwp;    // T x features (0 columns when absent)
    std::vector<std::string> power_columns;
    std::vector<std::string> nwp_columns;
    std::size_t dropped_rows = 0;
    std::size_t clamped_values = 0;

    std::size_t size() const { return timestamps.size(); }
    std::size_t sites() const { return power.cols; }
};

/// Accepts integer seconds, `YYYY-MM-DD[ T]HH:MM[:SS]`, or `YYYYMMDD H:MM`.
std::int64_t parse_timestamp(const std::string& text);

/// Throws DataError (with line numbers) on malformed rows, header mismatch, or a nonuniform time grid.
SeriesFrame load_csv(const std::string& path, const SeriesSchema& schema);
SeriesFrame read_csv(std::istream& is, const SeriesSchema& schema, const std::string& source = "<stream>");
/// Reads the header to infer a schema, then loads.
SeriesFrame load_csv(const std::string& path, std::optional<double> capacity = std::nullopt);

double normalize_power(double raw, double capacity);
double denormalize_power(double normalized, double capacity);

struct SupervisedSet {
    int case_id = 0;
    Matrix x;  // N x ctx
    Matrix y;  // N x d
    std::vector<std::int64_t> issue_times;
    std::vector<std::int64_t> feature_end_times;    // latest timestamp any feature refers to
    std::vector<std::int64_t> target_start_times;   // earliest target timestamp

    std::size_t size() const { return y.rows; }
    SupervisedSet slice(std::size_t begin, std::size_t end) const;
};

inline constexpr std::size_t kDefaultLag = 6;
/// 24 for case 1, 6 for case 3, 1 otherwise.
std::size_t default_horizon(int case_id);

/// Builds the supervised layout of one of the four cases. Windows that would
/// span a dropped row are skipped. Throws DataError when the frame is too short.
SupervisedSet make_case(const SeriesFrame& frame, int case_id, std::size_t lag = kDefaultLag,
                        std::size_t horizon = 0);

struct SplitSets {
    SupervisedSet train;
    SupervisedSet val;
    SupervisedSet test;
};

/// Contiguous chronological split; sizes floor(r_train N), floor(r_val N), remainder.
SplitSets split(const SupervisedSet& set, double train = 0.7, double val = 0.1, double test = 0.2);

}  // namespace flowcast
