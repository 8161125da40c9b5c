#include "tailedts/ingest.hpp"

#include "tailedts/io.hpp"
#include "tailedts/parallel.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <charconv>
#include <limits>
#include <sstream>
#include <unordered_map>

namespace tailedts::ingest {

namespace chr = std::chrono;
namespace fs = std::filesystem;

namespace {

bool parse_u64(std::string_view text, std::uint64_t& out) {
    if (text.empty()) return false;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
    return ec == std::errc{} && ptr == text.data() + text.size();
}

std::string date_string(chr::sys_days date) {
    const chr::year_month_day ymd{date};
    return fmt::format("{:04d}-{:02d}-{:02d}", static_cast<int>(ymd.year()),
                       static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
}

Count to_count(std::uint64_t value, const PageKey& key) {
    if (value > std::numeric_limits<Count>::max()) {
        throw std::overflow_error(fmt::format("hourly count {} for {} {} exceeds 32 bits", value,
                                              key.domain_code, key.page_title));
    }
    return static_cast<Count>(value);
}

class HourAccumulator {
public:
    void add_line(std::string_view line) {
        if (line.empty()) return;
        ++lines_read_;
        std::array<std::string_view, 4> fields;
        std::size_t n = 0;
        std::size_t begin = 0;
        while (true) {
            const std::size_t space = line.find(' ', begin);
            const std::string_view field =
                line.substr(begin, space == std::string_view::npos ? std::string_view::npos
                                                                   : space - begin);
            if (n == fields.size()) {
                ++skipped_;
                return;
            }
            fields[n++] = field;
            if (space == std::string_view::npos) break;
            begin = space + 1;
        }
        std::uint64_t views = 0;
        std::uint64_t bytes = 0;
        if (n != 4 || !parse_u64(fields[2], views) || !parse_u64(fields[3], bytes)) {
            ++skipped_;
            return;
        }
        PageKey key = PageKey::normalized(fields[0], fields[1]);
        auto [it, inserted] = index_.try_emplace(std::move(key), records_.size());
        if (inserted) {
            records_.push_back(HourRecord{it->first, views, bytes});
        } else {
            records_[it->second].count_views += views;
            records_[it->second].total_response_size += bytes;
        }
    }

    HourParse finish() && {
        HourParse out;
        out.lines_read = lines_read_;
        out.lines_skipped = skipped_;
        out.records = std::move(records_);
        std::sort(out.records.begin(), out.records.end(),
                  [](const HourRecord& a, const HourRecord& b) { return a.key < b.key; });
        return out;
    }

private:
    std::unordered_map<PageKey, std::size_t, PageKeyHash> index_;
    std::vector<HourRecord> records_;
    std::uint64_t lines_read_ = 0;
    std::uint64_t skipped_ = 0;
};

fs::path locate_hour_file(const fs::path& source, chr::sys_days date, int hour) {
    const std::string name = hour_file_name(date, hour);
    const fs::path flat = source / name;
    if (fs::exists(flat)) return flat;
    const chr::year_month_day ymd{date};
    const fs::path nested = source / fmt::format("{:04d}", static_cast<int>(ymd.year())) /
                            fmt::format("{:04d}-{:02d}", static_cast<int>(ymd.year()),
                                        static_cast<unsigned>(ymd.month())) /
                            name;
    if (fs::exists(nested)) return nested;
    return {};
}

}  // namespace

HourParse parse_hour_text(std::string_view text) {
    HourAccumulator acc;
    io::for_each_line(text, [&](std::string_view line) { acc.add_line(line); });
    return std::move(acc).finish();
}

HourParse parse_hour_stream(std::istream& in) {
    HourAccumulator acc;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        acc.add_line(line);
    }
    if (in.bad()) throw std::runtime_error("I/O error while reading hourly dump stream");
    return std::move(acc).finish();
}

HourParse parse_hour_file(const fs::path& path) {
    const std::string bytes = io::read_file(path);
    HourAccumulator acc;
    auto on_line = [&](std::string_view line) { acc.add_line(line); };
    try {
        if (bytes.size() >= 2 && static_cast<unsigned char>(bytes[0]) == 0x1f &&
            static_cast<unsigned char>(bytes[1]) == 0x8b) {
            io::for_each_gzip_line(bytes, on_line);
        } else {
            io::for_each_line(bytes, on_line);
        }
    } catch (const std::runtime_error& e) {
        throw std::runtime_error(fmt::format("{}: {}", path.string(), e.what()));
    }
    return std::move(acc).finish();
}

std::string hour_file_name(chr::sys_days date, int hour) {
    const chr::year_month_day ymd{date};
    return fmt::format("pageviews-{:04d}{:02d}{:02d}-{:02d}0000.gz", static_cast<int>(ymd.year()),
                       static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()), hour);
}

const DayRow* DayTable::find(const PageKey& key) const {
    auto it = std::lower_bound(rows.begin(), rows.end(), key,
                               [](const DayRow& row, const PageKey& k) { return row.key < k; });
    return (it != rows.end() && it->key == key) ? &*it : nullptr;
}

DayTable build_day(chr::sys_days date, const std::vector<std::optional<HourParse>>& hours,
                   Total threshold) {
    const std::string day = date_string(date);
    if (hours.size() != 24) {
        throw std::invalid_argument(
            fmt::format("day {} needs 24 hourly inputs, got {}", day, hours.size()));
    }
    for (int h = 0; h < 24; ++h) {
        if (!hours[static_cast<std::size_t>(h)]) {
            throw MissingInput(fmt::format("missing hour file for {} hour {:02d}", day, h));
        }
    }

    DayTable table;
    table.date = date;
    table.stats.date = day;

    std::unordered_map<PageKey, std::size_t, PageKeyHash> index;
    std::vector<std::array<std::uint64_t, 24>> cells;
    std::vector<PageKey> keys;
    for (std::size_t h = 0; h < 24; ++h) {
        const HourParse& parse = *hours[h];
        table.stats.lines_read += parse.lines_read;
        table.stats.lines_skipped += parse.lines_skipped;
        for (const HourRecord& rec : parse.records) {
            auto [it, inserted] = index.try_emplace(rec.key, keys.size());
            if (inserted) {
                keys.push_back(rec.key);
                cells.emplace_back();
                cells.back().fill(0);
            }
            cells[it->second][h] += rec.count_views;
        }
    }
    table.stats.pages_seen = keys.size();

    for (std::size_t i = 0; i < keys.size(); ++i) {
        DayRow row;
        row.key = std::move(keys[i]);
        for (std::size_t h = 0; h < 24; ++h) {
            row.hours[h] = to_count(cells[i][h], row.key);
            row.total += row.hours[h];
        }
        if (row.total >= threshold) table.rows.push_back(std::move(row));
    }
    std::sort(table.rows.begin(), table.rows.end(),
              [](const DayRow& a, const DayRow& b) { return a.key < b.key; });
    table.stats.pages_retained = table.rows.size();
    return table;
}

DayTable build_day_from_directory(const fs::path& source, chr::sys_days date, Total threshold) {
    std::vector<fs::path> paths(24);
    for (int h = 0; h < 24; ++h) {
        paths[static_cast<std::size_t>(h)] = locate_hour_file(source, date, h);
        if (paths[static_cast<std::size_t>(h)].empty()) {
            throw MissingInput(fmt::format("missing hour file for {} hour {:02d}: {}",
                                           date_string(date), h,
                                           (source / hour_file_name(date, h)).string()));
        }
    }
    std::vector<std::optional<HourParse>> hours(24);
    for (std::size_t h = 0; h < 24; ++h) hours[h] = parse_hour_file(paths[h]);
    DayTable table = build_day(date, hours, threshold);
    for (const auto& p : paths) table.stats.files.push_back(p.filename().string());
    return table;
}

std::vector<PageKey> intersect_month(const std::vector<DayTable>& days) {
    if (days.empty()) throw std::invalid_argument("intersect_month needs at least one day");
    std::vector<PageKey> current;
    current.reserve(days.front().rows.size());
    for (const auto& row : days.front().rows) current.push_back(row.key);
    for (std::size_t d = 1; d < days.size() && !current.empty(); ++d) {
        std::vector<PageKey> next;
        const auto& rows = days[d].rows;
        auto it = rows.begin();
        for (auto& key : current) {
            while (it != rows.end() && it->key < key) ++it;
            if (it == rows.end()) break;
            if (it->key == key) next.push_back(std::move(key));
        }
        current = std::move(next);
    }
    return current;
}

MonthTable assemble_month(const std::vector<PageKey>& index, const std::vector<DayTable>& days,
                          YearMonth month) {
    const std::size_t hours = days.size() * 24;
    const UtcHour start = month.first_hour();
    std::vector<TimeSeries> series(index.size());
    for (std::size_t i = 0; i < index.size(); ++i) {
        series[i].key = index[i];
        series[i].start = start;
        series[i].values.reserve(hours);
    }
    for (const DayTable& day : days) {
        auto it = day.rows.begin();
        for (std::size_t i = 0; i < index.size(); ++i) {
            while (it != day.rows.end() && it->key < index[i]) ++it;
            if (it == day.rows.end() || it->key != index[i]) {
                throw std::logic_error(fmt::format("page {} {} absent from day {}",
                                                   index[i].domain_code, index[i].page_title,
                                                   day.stats.date));
            }
            series[i].values.insert(series[i].values.end(), it->hours.begin(), it->hours.end());
        }
    }
    return MonthTable(month, start, hours, std::move(series));
}

nlohmann::json to_json(const IngestManifest& m) {
    nlohmann::json per_day = nlohmann::json::array();
    for (const auto& d : m.per_day) {
        per_day.push_back({{"date", d.date},
                           {"files", d.files},
                           {"lines_read", d.lines_read},
                           {"lines_skipped", d.lines_skipped},
                           {"pages_seen", d.pages_seen},
                           {"pages_retained", d.pages_retained}});
    }
    return {{"month", m.month.to_string()},
            {"days", m.days},
            {"threshold", m.threshold},
            {"pages", m.pages},
            {"data_points", m.data_points},
            {"zero_fraction", m.zero_fraction},
            {"lines_read", m.lines_read},
            {"skipped_lines", m.skipped_lines},
            {"per_day", per_day},
            {"warnings", m.warnings}};
}

IngestManifest manifest_from_json(const nlohmann::json& j) {
    IngestManifest m;
    m.month = YearMonth::parse(j.at("month").get<std::string>());
    m.days = j.at("days").get<int>();
    m.threshold = j.at("threshold").get<Total>();
    m.pages = j.at("pages").get<std::uint64_t>();
    m.data_points = j.at("data_points").get<std::uint64_t>();
    m.zero_fraction = j.at("zero_fraction").get<double>();
    m.lines_read = j.at("lines_read").get<std::uint64_t>();
    m.skipped_lines = j.at("skipped_lines").get<std::uint64_t>();
    for (const auto& d : j.at("per_day")) {
        DayStats s;
        s.date = d.at("date").get<std::string>();
        s.files = d.at("files").get<std::vector<std::string>>();
        s.lines_read = d.at("lines_read").get<std::uint64_t>();
        s.lines_skipped = d.at("lines_skipped").get<std::uint64_t>();
        s.pages_seen = d.at("pages_seen").get<std::uint64_t>();
        s.pages_retained = d.at("pages_retained").get<std::uint64_t>();
        m.per_day.push_back(std::move(s));
    }
    m.warnings = j.at("warnings").get<std::vector<std::string>>();
    return m;
}

IngestResult ingest_month(const fs::path& source, int year, int month,
                          const IngestOptions& options) {
    const YearMonth ym{year, month};
    if (month < 1 || month > 12) throw std::invalid_argument(fmt::format("invalid month {}", month));
    const int month_days = ym.days();
    const int days = options.days == 0 ? month_days : options.days;
    if (days < 1 || days > month_days) {
        throw std::invalid_argument(
            fmt::format("day count {} outside 1..{} for {}", days, month_days, ym.to_string()));
    }
    if (!fs::is_directory(source)) {
        throw MissingInput(fmt::format("source directory '{}' does not exist", source.string()));
    }

    // Reject partial inputs before doing any parsing work.
    const chr::sys_days first = chr::floor<chr::days>(ym.first_hour());
    for (int d = 0; d < days; ++d) {
        for (int h = 0; h < 24; ++h) {
            if (locate_hour_file(source, first + chr::days{d}, h).empty()) {
                throw MissingInput(fmt::format(
                    "missing hour file for {} hour {:02d}: {}", date_string(first + chr::days{d}),
                    h, (source / hour_file_name(first + chr::days{d}, h)).string()));
            }
        }
    }

    std::vector<DayTable> tables(static_cast<std::size_t>(days));
    parallel_for(tables.size(), options.workers, [&](std::size_t d) {
        tables[d] = build_day_from_directory(source, first + chr::days{static_cast<int>(d)},
                                             options.threshold);
    });

    IngestManifest manifest;
    manifest.month = ym;
    manifest.days = days;
    manifest.threshold = options.threshold;
    for (const auto& t : tables) {
        manifest.per_day.push_back(t.stats);
        manifest.lines_read += t.stats.lines_read;
        manifest.skipped_lines += t.stats.lines_skipped;
        if (t.stats.pages_retained == 0) {
            manifest.warnings.push_back(
                fmt::format("day {} retained no pages", t.stats.date));
        }
    }

    const std::vector<PageKey> index = intersect_month(tables);
    if (index.empty()) manifest.warnings.push_back("monthly page intersection is empty");
    MonthTable table = assemble_month(index, tables, ym);

    manifest.pages = table.rows();
    manifest.data_points = table.data_points();
    manifest.zero_fraction = table.zero_fraction();
    return IngestResult{std::move(table), std::move(manifest)};
}

fs::path manifest_path(const fs::path& table_path) {
    return fs::path(table_path.string() + ".manifest.json");
}

void write_month(const MonthTable& table, const fs::path& path, const IngestManifest* ingest) {
    io::GzipFileWriter writer(path);
    std::string buffer;
    buffer.reserve(1 << 20);
    buffer += "domain_code,page_title";
    for (std::size_t t = 0; t < table.hours(); ++t) buffer += fmt::format(",v{:04d}", t);
    buffer += '\n';
    char digits[16];
    for (const auto& s : table.series()) {
        io::append_csv_field(buffer, s.key.domain_code);
        buffer += ',';
        io::append_csv_field(buffer, s.key.page_title);
        for (Count v : s.values) {
            buffer += ',';
            auto [end, ec] = std::to_chars(digits, digits + sizeof digits, v);
            buffer.append(digits, end);
        }
        buffer += '\n';
        if (buffer.size() >= (1 << 20)) {
            writer.write(buffer);
            buffer.clear();
        }
    }
    writer.write(buffer);
    const std::uint32_t crc = writer.finish();

    nlohmann::json sidecar = ingest ? to_json(*ingest) : nlohmann::json::object();
    sidecar["format"] = "tailedts-month-csv";
    sidecar["format_version"] = kStorageFormatVersion;
    sidecar["month"] = table.month().to_string();
    sidecar["start"] = format_utc_hour(table.start());
    sidecar["hours"] = table.hours();
    sidecar["days"] = table.days();
    sidecar["pages"] = table.rows();
    sidecar["data_points"] = table.data_points();
    sidecar["zero_fraction"] = table.zero_fraction();
    if (!sidecar.contains("skipped_lines")) sidecar["skipped_lines"] = 0;
    sidecar["file"] = {{"name", path.filename().string()},
                       {"bytes", writer.compressed_bytes()},
                       {"crc32", fmt::format("{:08x}", crc)}};
    io::write_file(manifest_path(path), sidecar.dump(2) + "\n");
}

MonthTable read_month(const fs::path& path) {
    if (!fs::exists(manifest_path(path)) || !fs::exists(path)) {
        throw StorageError(fmt::format("'{}': table or manifest is missing", path.string()));
    }
    nlohmann::json sidecar;
    try {
        sidecar = nlohmann::json::parse(io::read_file(manifest_path(path)));
    } catch (const nlohmann::json::exception& e) {
        throw StorageError(fmt::format("unreadable manifest for '{}': {}", path.string(), e.what()));
    }
    if (sidecar.value("format", "") != "tailedts-month-csv" ||
        sidecar.value("format_version", -1) != kStorageFormatVersion) {
        throw StorageError(fmt::format("'{}': unsupported format or version mismatch (expected "
                                       "tailedts-month-csv v{})",
                                       path.string(), kStorageFormatVersion));
    }
    const std::string bytes = io::read_file(path);
    const auto& file = sidecar.at("file");
    const std::string expected_crc = file.at("crc32").get<std::string>();
    if (bytes.size() != file.at("bytes").get<std::uint64_t>() ||
        io::crc32_hex(bytes) != expected_crc) {
        throw StorageError(fmt::format("'{}': checksum mismatch (file truncated or corrupted)",
                                       path.string()));
    }

    const YearMonth month = YearMonth::parse(sidecar.at("month").get<std::string>());
    const UtcHour start = parse_utc_hour(sidecar.at("start").get<std::string>());
    const std::size_t hours = sidecar.at("hours").get<std::size_t>();

    std::vector<TimeSeries> series;
    bool header_seen = false;
    io::for_each_gzip_line(bytes, [&](std::string_view line) {
        if (!header_seen) {
            auto header = io::split_csv_record(line);
            if (header.size() != hours + 2 || header[0] != "domain_code" ||
                header[1] != "page_title") {
                throw StorageError(fmt::format("'{}': header does not match {} hours",
                                               path.string(), hours));
            }
            header_seen = true;
            return;
        }
        if (line.empty()) return;
        auto fields = io::split_csv_record(line);
        if (fields.size() != hours + 2) {
            throw StorageError(fmt::format("'{}': row {} has {} fields, expected {}", path.string(),
                                           series.size() + 1, fields.size(), hours + 2));
        }
        TimeSeries s;
        s.key = PageKey{std::move(fields[0]), std::move(fields[1])};
        s.start = start;
        s.values.resize(hours);
        for (std::size_t t = 0; t < hours; ++t) {
            const std::string& f = fields[t + 2];
            auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), s.values[t]);
            if (ec != std::errc{} || ptr != f.data() + f.size()) {
                throw StorageError(
                    fmt::format("'{}': bad count '{}' in row {}", path.string(), f, series.size() + 1));
            }
        }
        series.push_back(std::move(s));
    });
    if (!header_seen) throw StorageError(fmt::format("'{}': missing header", path.string()));
    if (series.size() != sidecar.at("pages").get<std::size_t>()) {
        throw StorageError(fmt::format("'{}': row count does not match manifest", path.string()));
    }
    return MonthTable(month, start, hours, std::move(series));
}

}  // namespace tailedts::ingest
