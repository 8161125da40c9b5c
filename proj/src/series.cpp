#include "tailedts/series.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <charconv>
#include <functional>
#include <numeric>
#include <stdexcept>

namespace tailedts {

namespace chr = std::chrono;

PageKey PageKey::normalized(std::string_view domain, std::string_view title) {
    return PageKey{domain.empty() ? std::string("NA") : std::string(domain),
                   title.empty() ? std::string("NA") : std::string(title)};
}

std::size_t PageKeyHash::operator()(const PageKey& key) const noexcept {
    std::size_t h = std::hash<std::string>{}(key.domain_code);
    h ^= std::hash<std::string>{}(key.page_title) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    return h;
}

int YearMonth::days() const {
    const chr::year_month_day_last last{chr::year{year} / chr::month{static_cast<unsigned>(month)} /
                                        chr::last};
    return static_cast<int>(static_cast<unsigned>(last.day()));
}

UtcHour YearMonth::first_hour() const {
    const chr::year_month_day ymd{chr::year{year}, chr::month{static_cast<unsigned>(month)},
                                  chr::day{1}};
    return chr::sys_days{ymd};
}

std::string YearMonth::to_string() const { return fmt::format("{:04d}-{:02d}", year, month); }

namespace {

int parse_int(std::string_view text, std::string_view what) {
    int value = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size()) {
        throw std::invalid_argument(fmt::format("invalid {}: '{}'", what, text));
    }
    return value;
}

}  // namespace

YearMonth YearMonth::parse(std::string_view text) {
    if (text.size() != 7 || text[4] != '-') {
        throw std::invalid_argument(fmt::format("invalid month '{}', expected YYYY-MM", text));
    }
    YearMonth ym{parse_int(text.substr(0, 4), "year"), parse_int(text.substr(5, 2), "month")};
    if (ym.month < 1 || ym.month > 12) {
        throw std::invalid_argument(fmt::format("invalid month '{}'", text));
    }
    return ym;
}

std::string format_utc_hour(UtcHour t) {
    const auto day = chr::floor<chr::days>(t);
    const chr::year_month_day ymd{day};
    const auto hour = chr::duration_cast<chr::hours>(t - day).count();
    return fmt::format("{:04d}-{:02d}-{:02d}T{:02d}:00:00Z", static_cast<int>(ymd.year()),
                       static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()), hour);
}

UtcHour parse_utc_hour(std::string_view text) {
    if (text.size() != 20 || text.substr(13) != ":00:00Z" || text[4] != '-' || text[7] != '-' ||
        text[10] != 'T') {
        throw std::invalid_argument(fmt::format("invalid timestamp '{}'", text));
    }
    const chr::year_month_day ymd{
        chr::year{parse_int(text.substr(0, 4), "year")},
        chr::month{static_cast<unsigned>(parse_int(text.substr(5, 2), "month"))},
        chr::day{static_cast<unsigned>(parse_int(text.substr(8, 2), "day"))}};
    if (!ymd.ok()) throw std::invalid_argument(fmt::format("invalid date in '{}'", text));
    return chr::sys_days{ymd} + chr::hours{parse_int(text.substr(11, 2), "hour")};
}

std::vector<double> TimeSeries::as_doubles() const {
    return std::vector<double>(values.begin(), values.end());
}

Total total_views(std::span<const Count> values) {
    return std::accumulate(values.begin(), values.end(), Total{0});
}

Total total_views(const TimeSeries& series) { return total_views(series.values); }

MonthTable::MonthTable(YearMonth month, UtcHour start, std::size_t hours,
                       std::vector<TimeSeries> series)
    : month_(month), start_(start), hours_(hours), series_(std::move(series)) {
    if (hours_ % 24 != 0) throw std::invalid_argument("month table hours must be whole days");
    for (const auto& s : series_) {
        if (s.values.size() != hours_ || s.start != start_) {
            throw std::invalid_argument(fmt::format(
                "series {}/{} does not share the table's time grid", s.key.domain_code,
                s.key.page_title));
        }
    }
}

double MonthTable::zero_fraction() const {
    if (series_.empty() || hours_ == 0) return 0.0;
    std::uint64_t zeros = 0;
    for (const auto& s : series_) {
        zeros += static_cast<std::uint64_t>(std::count(s.values.begin(), s.values.end(), 0u));
    }
    return static_cast<double>(zeros) / static_cast<double>(data_points());
}

std::string_view category_name(Category c) {
    switch (c) {
        case Category::O2: return "O2";
        case Category::O3: return "O3";
        case Category::O4: return "O4";
    }
    return "?";
}

std::string_view category_label(Category c) {
    switch (c) {
        case Category::O2: return "O(10^2)";
        case Category::O3: return "O(10^3)";
        case Category::O4: return "O(10^4)";
    }
    return "?";
}

Category parse_category(std::string_view text) {
    for (Category c : kAllCategories) {
        if (text == category_name(c) || text == category_label(c)) return c;
    }
    throw std::invalid_argument(fmt::format("unknown category '{}' (expected O2, O3 or O4)", text));
}

std::optional<Category> bucket_of(Total total) {
    if (total >= 100 && total < 1000) return Category::O2;
    if (total >= 1000 && total < 10000) return Category::O3;
    if (total >= 10000 && total < 100000) return Category::O4;
    return std::nullopt;
}

const std::vector<std::size_t>& CategoryPartition::of(Category c) const {
    static const std::vector<std::size_t> kEmpty;
    auto it = members.find(c);
    return it == members.end() ? kEmpty : it->second;
}

CategoryPartition categorize(const MonthTable& table) {
    CategoryPartition partition;
    for (Category c : kAllCategories) partition.members[c];
    for (std::size_t i = 0; i < table.rows(); ++i) {
        if (auto bucket = bucket_of(total_views(table[i]))) partition.members[*bucket].push_back(i);
    }
    return partition;
}

MonthTable slice_days(const MonthTable& table, int first_day, int last_day) {
    const int days = static_cast<int>(table.days());
    if (first_day < 1 || first_day > last_day || last_day > days) {
        throw std::out_of_range(
            fmt::format("day range [{}, {}] outside 1..{}", first_day, last_day, days));
    }
    const std::size_t begin = static_cast<std::size_t>(first_day - 1) * 24;
    const std::size_t end = static_cast<std::size_t>(last_day) * 24;
    const UtcHour start = table.start() + chr::hours{static_cast<long>(begin)};

    std::vector<TimeSeries> sliced;
    sliced.reserve(table.rows());
    for (const auto& s : table.series()) {
        sliced.push_back(TimeSeries{s.key, start,
                                    std::vector<Count>(s.values.begin() + static_cast<long>(begin),
                                                       s.values.begin() + static_cast<long>(end))});
    }
    return MonthTable(table.month(), start, end - begin, std::move(sliced));
}

}  // namespace tailedts
