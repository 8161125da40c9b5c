#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace tailedts {

using Count = std::uint32_t;
using Total = std::uint64_t;
using UtcHour = std::chrono::sys_seconds;

/// Identity of one wiki page: project/platform code plus raw title bytes.
struct PageKey {
    std::string domain_code;
    std::string page_title;

    /// Builds a key, replacing empty fields with "NA".
    static PageKey normalized(std::string_view domain, std::string_view title);

    friend auto operator<=>(const PageKey&, const PageKey&) = default;
    friend bool operator==(const PageKey&, const PageKey&) = default;
};

struct PageKeyHash {
    std::size_t operator()(const PageKey& key) const noexcept;
};

struct YearMonth {
    int year = 1970;
    int month = 1;

    int days() const;
    UtcHour first_hour() const;
    std::string to_string() const;  // "YYYY-MM"
    static YearMonth parse(std::string_view text);

    friend auto operator<=>(const YearMonth&, const YearMonth&) = default;
};

std::string format_utc_hour(UtcHour t);  // "YYYY-MM-DDTHH:00:00Z"
UtcHour parse_utc_hour(std::string_view text);

/// One page's hourly view counts on a fixed UTC grid.
struct TimeSeries {
    PageKey key;
    UtcHour start{};
    std::vector<Count> values;

    std::size_t length() const { return values.size(); }
    std::vector<double> as_doubles() const;

    friend bool operator==(const TimeSeries&, const TimeSeries&) = default;
};

Total total_views(const TimeSeries& series);
Total total_views(std::span<const Count> values);

/// All pages retained for one month, sharing one time grid.
class MonthTable {
public:
    MonthTable() = default;
    MonthTable(YearMonth month, UtcHour start, std::size_t hours, std::vector<TimeSeries> series);

    const YearMonth& month() const { return month_; }
    UtcHour start() const { return start_; }
    std::size_t hours() const { return hours_; }
    std::size_t days() const { return hours_ / 24; }
    std::size_t rows() const { return series_.size(); }
    bool empty() const { return series_.empty(); }

    const TimeSeries& operator[](std::size_t i) const { return series_[i]; }
    const std::vector<TimeSeries>& series() const { return series_; }

    /// Fraction of zero cells over rows × hours; 0 for an empty table.
    double zero_fraction() const;
    std::uint64_t data_points() const { return static_cast<std::uint64_t>(rows()) * hours_; }

    friend bool operator==(const MonthTable&, const MonthTable&) = default;

private:
    YearMonth month_{};
    UtcHour start_{};
    std::size_t hours_ = 0;
    std::vector<TimeSeries> series_;
};

/// Decade buckets of monthly totals: O2 = [1e2,1e3), O3 = [1e3,1e4), O4 = [1e4,1e5).
enum class Category { O2, O3, O4 };

inline constexpr Category kAllCategories[] = {Category::O2, Category::O3, Category::O4};

std::string_view category_name(Category c);   // "O2"
std::string_view category_label(Category c);  // "O(10^2)"
Category parse_category(std::string_view text);
std::optional<Category> bucket_of(Total total);

struct CategoryPartition {
    std::map<Category, std::vector<std::size_t>> members;

    const std::vector<std::size_t>& of(Category c) const;
};

CategoryPartition categorize(const MonthTable& table);

/// Restricts every series to hours [(first_day-1)*24, last_day*24). Days are 1-based.
MonthTable slice_days(const MonthTable& table, int first_day, int last_day);

}  // namespace tailedts
