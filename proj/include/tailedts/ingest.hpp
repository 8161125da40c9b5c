#pragma once

#include "tailedts/series.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace tailedts::ingest {

/// One well-formed dump line: `<domain_code> <page_title> <count_views> <total_response_size>`.
struct HourRecord {
    PageKey key;
    std::uint64_t count_views = 0;
    std::uint64_t total_response_size = 0;
};

/// Records of one hourly file, grouped by key (counts summed) and sorted by key.
struct HourParse {
    std::vector<HourRecord> records;
    std::uint64_t lines_read = 0;
    std::uint64_t lines_skipped = 0;

    bool no_records() const { return records.empty(); }
};

/// Parses the decompressed text of one `pageviews-YYYYMMDD-HH0000.gz` file. Lines that do not have
/// exactly four space-separated fields, or whose count fields are not unsigned integers, are
/// skipped and counted.
HourParse parse_hour_text(std::string_view text);
HourParse parse_hour_stream(std::istream& in);
/// Reads and inflates one hourly dump file.
HourParse parse_hour_file(const std::filesystem::path& path);

std::string hour_file_name(std::chrono::sys_days date, int hour);

struct DayRow {
    PageKey key;
    std::array<Count, 24> hours{};
    Total total = 0;

    friend bool operator==(const DayRow&, const DayRow&) = default;
};

struct DayStats {
    std::string date;  // YYYY-MM-DD
    std::vector<std::string> files;
    std::uint64_t lines_read = 0;
    std::uint64_t lines_skipped = 0;
    std::uint64_t pages_seen = 0;
    std::uint64_t pages_retained = 0;

    friend bool operator==(const DayStats&, const DayStats&) = default;
};

/// Pages of one day with their 24 hourly counts, sorted by key, filtered to totals >= threshold.
struct DayTable {
    std::chrono::sys_days date{};
    std::vector<DayRow> rows;
    DayStats stats;

    const DayRow* find(const PageKey& key) const;
};

inline constexpr Total kDefaultDailyThreshold = 10;

/// Error raised when an input file required by the pipeline is absent.
class MissingInput : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Full outer join of 24 hourly parses (index = hour). Cells absent from an hour are 0.
DayTable build_day(std::chrono::sys_days date, const std::vector<std::optional<HourParse>>& hours,
                   Total threshold = kDefaultDailyThreshold);

/// Loads the 24 files of `date` from `source` and builds the day. Throws MissingInput naming the
/// date and hour of the first absent file.
DayTable build_day_from_directory(const std::filesystem::path& source, std::chrono::sys_days date,
                                  Total threshold = kDefaultDailyThreshold);

/// Keys present in every day table, sorted by (domain_code, page_title).
std::vector<PageKey> intersect_month(const std::vector<DayTable>& days);

/// Concatenates each indexed page's hourly counts across `days` (chronological).
MonthTable assemble_month(const std::vector<PageKey>& index, const std::vector<DayTable>& days,
                          YearMonth month);

struct IngestManifest {
    YearMonth month;
    int days = 0;
    Total threshold = kDefaultDailyThreshold;
    std::vector<DayStats> per_day;
    std::uint64_t pages = 0;
    std::uint64_t data_points = 0;
    double zero_fraction = 0.0;
    std::uint64_t lines_read = 0;
    std::uint64_t skipped_lines = 0;
    std::vector<std::string> warnings;

    friend bool operator==(const IngestManifest&, const IngestManifest&) = default;
};

nlohmann::json to_json(const IngestManifest& manifest);
IngestManifest manifest_from_json(const nlohmann::json& j);

struct IngestOptions {
    Total threshold = kDefaultDailyThreshold;
    /// Number of leading days to ingest; 0 means the whole month. Anything else is a miniature run.
    int days = 0;
    std::size_t workers = 1;
};

struct IngestResult {
    MonthTable table;
    IngestManifest manifest;
};

IngestResult ingest_month(const std::filesystem::path& source, int year, int month,
                          const IngestOptions& options = {});

// Storage: gzip-compressed CSV plus a JSON sidecar at `<path>.manifest.json`.

inline constexpr int kStorageFormatVersion = 1;

class StorageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

std::filesystem::path manifest_path(const std::filesystem::path& table_path);

/// Writes the table as CSV.gz and its sidecar. When `ingest` is given its statistics are embedded.
void write_month(const MonthTable& table, const std::filesystem::path& path,
                 const IngestManifest* ingest = nullptr);

/// Reads a table written by write_month, verifying format version, size and CRC-32 first.
MonthTable read_month(const std::filesystem::path& path);

}  // namespace tailedts::ingest
