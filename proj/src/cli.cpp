#include "tailedts/cli.hpp"

#include "tailedts/bench.hpp"
#include "tailedts/ingest.hpp"
#include "tailedts/io.hpp"
#include "tailedts/losses.hpp"
#include "tailedts/solvers.hpp"
#include "tailedts/sparsear.hpp"

#include <httplib.h>

#include <CLI11.hpp>
#include <fmt/format.h>

#include <charconv>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#ifndef TAILEDTS_VERSION
#define TAILEDTS_VERSION "0.0.0"
#endif

namespace tailedts::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

enum class Kind { Int, Double, String, Bool, StringList, DoubleList };

struct OptionDef {
    std::string name;
    Kind kind;
    json fallback;  // null: required
    std::string help;
};

struct VerbDef {
    std::string path;
    std::string help;
    std::vector<OptionDef> options;
};

std::string data_dir_or_empty() {
    const char* env = std::getenv("TAILEDTS_DATA_DIR");
    return env ? std::string(env) : std::string();
}

json env_default() {
    const std::string dir = data_dir_or_empty();
    return dir.empty() ? json(nullptr) : json(dir);
}

OptionDef workers_option() {
    return {"workers", Kind::Int, 0, "Worker threads (0 = all logical cores)"};
}

std::vector<OptionDef> grid_options() {
    return {{"grid-huber", Kind::DoubleList, json::array({0.5, 1.0, 2.0}), "Huber delta candidates"},
            {"grid-quantile", Kind::DoubleList, json::array({0.3, 0.5, 0.7}), "Quantile tau candidates"},
            {"grid-lp", Kind::DoubleList, json::array({1.0 / 3.0, 0.5, 2.0 / 3.0}), "Lp power candidates"}};
}

std::vector<VerbDef> verb_table() {
    const json all_losses = json::array({"l2", "l1", "huber", "quantile", "lp"});
    const json all_categories = json::array({"O2", "O3", "O4"});
    std::vector<VerbDef> verbs;
    verbs.push_back({"download", "Fetch hourly pageview dumps for one month",
                     {{"year", Kind::Int, nullptr, "Year"},
                      {"month", Kind::Int, nullptr, "Month (1-12)"},
                      {"out", Kind::String, env_default(), "Destination directory (default $TAILEDTS_DATA_DIR)"},
                      {"days", Kind::Int, 0, "Only the first N days (0 = whole month)"},
                      {"base-url", Kind::String, "https://dumps.wikimedia.org/other/pageviews", "Dump root URL"}}});
    verbs.push_back({"ingest", "Align hourly dumps into a monthly table",
                     {{"source", Kind::String, env_default(), "Directory of hourly dumps (default $TAILEDTS_DATA_DIR)"},
                      {"year", Kind::Int, nullptr, "Year"},
                      {"month", Kind::Int, nullptr, "Month (1-12)"},
                      {"out", Kind::String, nullptr, "Output table (.csv.gz)"},
                      {"threshold", Kind::Int, 10, "Minimum views per page per day"},
                      {"days", Kind::Int, 0, "Only the first N days (0 = whole month)"},
                      workers_option()}});
    verbs.push_back({"quantify", "Sparse autoregression with a shared support across categories",
                     {{"input", Kind::String, nullptr, "Monthly table (.csv.gz)"},
                      {"order", Kind::Int, 168, "AR order d"},
                      {"sparsity", Kind::Int, 8, "Maximum support size"},
                      {"categories", Kind::StringList, all_categories, "Categories to pool"},
                      {"report", Kind::String, nullptr, "Report JSON path"},
                      {"node-limit", Kind::Int, 1000000, "Branch-and-bound node limit"},
                      {"time-limit", Kind::Double, 0.0, "Branch-and-bound seconds (0 = none)"},
                      {"big-m", Kind::Double, 5.0, "Big-M constant of the exported model"},
                      {"max-series", Kind::Int, 0, "Series per category (0 = all)"},
                      {"seed", Kind::Int, 1, "Subsampling seed"},
                      {"export-lp", Kind::String, "", "Also write the MIQP in LP format"},
                      workers_option()}});
    verbs.push_back({"fit", "Fit one pooled AR model under a loss",
                     {{"input", Kind::String, nullptr, "Monthly table (.csv.gz)"},
                      {"loss", Kind::String, nullptr, "l2, l1, huber:DELTA, quantile:TAU or lp:P"},
                      {"order", Kind::Int, 168, "AR order d"},
                      {"categories", Kind::StringList, json::array({"all"}), "Categories, or all"},
                      {"max-series", Kind::Int, 0, "Series per category (0 = all)"},
                      {"seed", Kind::Int, 1, "Subsampling seed"},
                      {"first-day", Kind::Int, 1, "First day of the fitting window"},
                      {"last-day", Kind::Int, 0, "Last day of the fitting window (0 = month end)"},
                      {"lp-row-limit", Kind::Int, 20000, "Largest LP solved exactly"},
                      {"out", Kind::String, nullptr, "Model JSON path"}}});
    verbs.push_back({"predict", "Rolling one-step predictions from a fitted model",
                     {{"input", Kind::String, nullptr, "Monthly table (.csv.gz)"},
                      {"model", Kind::String, nullptr, "Model JSON written by fit"},
                      {"categories", Kind::StringList, json::array({"all"}), "Categories, or all"},
                      {"max-series", Kind::Int, 0, "Series per category (0 = all)"},
                      {"seed", Kind::Int, 1, "Subsampling seed"},
                      {"first-day", Kind::Int, 25, "First predicted day"},
                      {"last-day", Kind::Int, 0, "Last predicted day (0 = month end)"},
                      {"out", Kind::String, nullptr, "Predictions CSV path"}}});
    std::vector<OptionDef> predict_opts = {
        {"input", Kind::String, nullptr, "Monthly table (.csv.gz)"},
        {"losses", Kind::StringList, all_losses, "Losses; bare huber/quantile/lp are tuned"},
        {"order", Kind::Int, 168, "AR order d"},
        {"categories", Kind::StringList, all_categories, "Categories"},
        {"max-series", Kind::Int, 10000, "Series per category (0 = all)"},
        {"seed", Kind::Int, 1, "Subsampling seed"},
        {"split", Kind::String, "1-17,18-24,25-31", "Train, validation and test day ranges"},
        {"lp-row-limit", Kind::Int, 20000, "Largest LP solved exactly"},
        {"dump-pages", Kind::Int, 5, "Pages per category in the prediction dump"},
        {"report", Kind::String, nullptr, "Report JSON path"},
        workers_option()};
    for (auto& g : grid_options()) predict_opts.push_back(g);
    verbs.push_back({"bench predict", "Loss-by-category prediction benchmark on a monthly table", predict_opts});
    std::vector<OptionDef> external_opts = {
        {"input", Kind::String, nullptr, "Series CSV (one column per series)"},
        {"losses", Kind::StringList, all_losses, "Losses; bare huber/quantile/lp are tuned"},
        {"order", Kind::Int, 168, "AR order d"},
        {"lp-row-limit", Kind::Int, 20000, "Largest LP solved exactly"},
        {"dump-pages", Kind::Int, 5, "Series in the prediction dump"},
        {"report", Kind::String, nullptr, "Report JSON path"},
        workers_option()};
    for (auto& g : grid_options()) external_opts.push_back(g);
    verbs.push_back({"bench external", "Prediction benchmark on an external series CSV", external_opts});
    verbs.push_back({"bench histogram", "Log-log histogram of view counts or Pareto draws",
                     {{"input", Kind::String, "", "Monthly table; empty samples a Pareto law instead"},
                      {"hour", Kind::Int, -1, "Hour index to histogram (-1 = all hours)"},
                      {"bins-per-decade", Kind::Int, 10, "Logarithmic bins per power of ten"},
                      {"min-count", Kind::Int, 10, "Minimum bin count used by the slope fit"},
                      {"samples", Kind::Int, 100000, "Pareto draws when no input is given"},
                      {"alpha", Kind::Double, 1.5, "Pareto tail index"},
                      {"scale", Kind::Double, 1.0, "Pareto scale"},
                      {"seed", Kind::Int, 1, "Sampling seed"},
                      {"out", Kind::String, nullptr, "Histogram CSV path"}}});
    verbs.push_back({"bench synth", "Simulate non-negative AR series",
                     {{"weights", Kind::String, nullptr, "Lag weights, e.g. 24:0.5,168:0.3"},
                      {"noise", Kind::String, "gaussian:1", "gaussian:SIGMA, student:NU:SCALE or pareto:ALPHA:SCALE"},
                      {"level", Kind::Double, 0.0, "Constant added to every innovation"},
                      {"length", Kind::Int, 744, "Steps per series"},
                      {"count", Kind::Int, 10, "Number of series"},
                      {"seed", Kind::Int, 1, "Random seed"},
                      {"count-mode", Kind::Bool, false, "Clip at zero and round to counts"},
                      {"month", Kind::String, "", "YYYY-MM: write a monthly table (needs count mode)"},
                      {"out", Kind::String, nullptr, "Output path (.csv, .csv.gz)"}}});
    verbs.push_back({"replay", "Re-run a job from its .run.json manifest",
                     {{"manifest", Kind::String, nullptr, "Run manifest written by an earlier invocation"}}});
    return verbs;
}

const VerbDef& find_verb(const std::vector<VerbDef>& verbs, std::string_view path) {
    for (const auto& v : verbs) {
        if (v.path == path) return v;
    }
    throw std::logic_error(fmt::format("unknown verb {}", path));
}

const char* type_name(Kind k) {
    switch (k) {
        case Kind::Int: return "INT";
        case Kind::Double: return "FLOAT";
        case Kind::String: return "TEXT";
        case Kind::Bool: return "";
        case Kind::StringList: return "A,B,...";
        case Kind::DoubleList: return "X,Y,...";
    }
    return "";
}

std::vector<std::string> split_list(std::string_view text) {
    std::vector<std::string> out;
    std::size_t from = 0;
    while (from <= text.size()) {
        const auto at = text.find(',', from);
        const std::string_view part = text.substr(from, at == std::string_view::npos ? at : at - from);
        if (!part.empty()) out.emplace_back(part);
        if (at == std::string_view::npos) break;
        from = at + 1;
    }
    return out;
}

long long parse_int(std::string_view text, const std::string& flag) {
    long long v = 0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc{} || ptr != text.data() + text.size()) {
        throw ValidationError(fmt::format("--{} expects an integer, got '{}'", flag, text));
    }
    return v;
}

double parse_real(std::string_view text, const std::string& flag) {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc{} || ptr != text.data() + text.size()) {
        throw ValidationError(fmt::format("--{} expects a number, got '{}'", flag, text));
    }
    return v;
}

json from_flag(const OptionDef& def, const std::string& text) {
    switch (def.kind) {
        case Kind::Int: return parse_int(text, def.name);
        case Kind::Double: return parse_real(text, def.name);
        case Kind::String: return text;
        case Kind::Bool: return true;
        case Kind::StringList: return split_list(text);
        case Kind::DoubleList: {
            json arr = json::array();
            for (const auto& part : split_list(text)) arr.push_back(parse_real(part, def.name));
            return arr;
        }
    }
    return nullptr;
}

json from_config(const OptionDef& def, const json& v) {
    const auto mismatch = [&](std::string_view expected) {
        return ValidationError(
            fmt::format("config key '{}' expects {}, got {}", def.name, expected, v.dump()));
    };
    switch (def.kind) {
        case Kind::Int:
            if (!v.is_number_integer()) throw mismatch("an integer");
            return v;
        case Kind::Double:
            if (!v.is_number()) throw mismatch("a number");
            return v.get<double>();
        case Kind::String:
            if (!v.is_string()) throw mismatch("a string");
            return v;
        case Kind::Bool:
            if (!v.is_boolean()) throw mismatch("a boolean");
            return v;
        case Kind::StringList:
            if (v.is_string()) return split_list(v.get<std::string>());
            if (!v.is_array()) throw mismatch("a list of strings");
            for (const auto& e : v) {
                if (!e.is_string()) throw mismatch("a list of strings");
            }
            return v;
        case Kind::DoubleList: {
            if (!v.is_array()) throw mismatch("a list of numbers");
            json arr = json::array();
            for (const auto& e : v) {
                if (!e.is_number()) throw mismatch("a list of numbers");
                arr.push_back(e.get<double>());
            }
            return arr;
        }
    }
    return nullptr;
}

json read_config_file(const std::string& path) {
    std::string text;
    try {
        text = io::read_file(path);
    } catch (const std::exception& e) {
        throw ValidationError(fmt::format("--config: cannot read '{}': {}", path, e.what()));
    }
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
        throw ValidationError(fmt::format("--config: '{}' is not a JSON object", path));
    }
    return j;
}

// ---- validation ---------------------------------------------------------------------------

void require(bool ok, const std::string& message) {
    if (!ok) throw ValidationError(message);
}

std::vector<Category> categories_of(const json& list, bool allow_all) {
    std::vector<Category> out;
    for (const auto& item : list) {
        const std::string name = item.get<std::string>();
        if (allow_all && name == "all") return {Category::O2, Category::O3, Category::O4};
        try {
            const Category c = parse_category(name);
            if (std::find(out.begin(), out.end(), c) == out.end()) out.push_back(c);
        } catch (const std::exception&) {
            throw ValidationError(fmt::format("--categories: unknown category '{}'", name));
        }
    }
    require(!out.empty(), "--categories: at least one category is required");
    return out;
}

std::vector<bench::LossRequest> losses_of(const json& list) {
    std::vector<bench::LossRequest> out;
    for (const auto& item : list) {
        try {
            out.push_back(bench::LossRequest::parse(item.get<std::string>()));
        } catch (const std::exception& e) {
            throw ValidationError(fmt::format("--losses: {}", e.what()));
        }
    }
    require(!out.empty(), "--losses: at least one loss is required");
    return out;
}

bench::SplitSpec split_of(const std::string& text) {
    const auto parts = split_list(text);
    require(parts.size() == 3, fmt::format("--split expects three day ranges a-b,c-d,e-f, got '{}'", text));
    int v[6];
    for (int i = 0; i < 3; ++i) {
        const auto dash = parts[static_cast<std::size_t>(i)].find('-');
        require(dash != std::string::npos, fmt::format("--split: '{}' is not a day range", parts[static_cast<std::size_t>(i)]));
        v[2 * i] = static_cast<int>(parse_int(parts[static_cast<std::size_t>(i)].substr(0, dash), "split"));
        v[2 * i + 1] = static_cast<int>(parse_int(parts[static_cast<std::size_t>(i)].substr(dash + 1), "split"));
    }
    bench::SplitSpec s{v[0], v[1], v[2], v[3], v[4], v[5]};
    try {
        s.validate(31);
    } catch (const std::exception& e) {
        throw ValidationError(fmt::format("--split: {}", e.what()));
    }
    return s;
}

bench::HyperGrid grid_of(const json& o) {
    bench::HyperGrid g;
    g.huber_delta = o.at("grid-huber").get<std::vector<double>>();
    g.quantile_tau = o.at("grid-quantile").get<std::vector<double>>();
    g.lp_p = o.at("grid-lp").get<std::vector<double>>();
    try {
        g.validate();
    } catch (const std::exception& e) {
        throw ValidationError(fmt::format("--grid-*: {}", e.what()));
    }
    return g;
}

std::vector<double> synth_weights_of(const std::string& text) {
    std::map<std::size_t, double> by_lag;
    for (const auto& part : split_list(text)) {
        const auto colon = part.find(':');
        require(colon != std::string::npos, fmt::format("--weights: '{}' is not LAG:VALUE", part));
        const long long lag = parse_int(part.substr(0, colon), "weights");
        require(lag >= 1 && lag <= 100000, fmt::format("--weights: lag {} out of range", lag));
        by_lag[static_cast<std::size_t>(lag)] = parse_real(part.substr(colon + 1), "weights");
    }
    require(!by_lag.empty(), "--weights: at least one LAG:VALUE pair is required");
    std::vector<double> w(by_lag.rbegin()->first, 0.0);
    for (const auto& [lag, value] : by_lag) w[lag - 1] = value;
    return w;
}

void validate(const RunConfig& c) {
    const json& o = c.options;
    auto positive = [&](const char* key) {
        require(o.at(key).get<long long>() >= 1, fmt::format("--{} must be at least 1", key));
    };
    auto non_negative = [&](const char* key) {
        require(o.at(key).get<long long>() >= 0, fmt::format("--{} must be non-negative", key));
    };
    auto month_ok = [&] {
        const auto m = o.at("month").get<long long>();
        const auto y = o.at("year").get<long long>();
        require(m >= 1 && m <= 12, fmt::format("--month must lie in 1..12, got {}", m));
        require(y >= 1970 && y <= 9999, fmt::format("--year out of range: {}", y));
    };
    if (o.contains("workers")) non_negative("workers");
    if (c.verb == "download") {
        month_ok();
        non_negative("days");
    } else if (c.verb == "ingest") {
        month_ok();
        non_negative("days");
        non_negative("threshold");
    } else if (c.verb == "quantify") {
        positive("order");
        positive("sparsity");
        require(o["sparsity"].get<long long>() <= o["order"].get<long long>(),
                "--sparsity must not exceed --order");
        categories_of(o["categories"], false);
        positive("node-limit");
        require(o["time-limit"].get<double>() >= 0.0, "--time-limit must be non-negative");
        require(o["big-m"].get<double>() > 0.0, "--big-m must be positive");
        non_negative("max-series");
    } else if (c.verb == "fit") {
        try {
            (void)LossSpec::parse(o["loss"].get<std::string>());
        } catch (const std::exception& e) {
            throw ValidationError(fmt::format("--loss: {}", e.what()));
        }
        positive("order");
        categories_of(o["categories"], true);
        non_negative("max-series");
        positive("first-day");
        non_negative("last-day");
        positive("lp-row-limit");
    } else if (c.verb == "predict") {
        categories_of(o["categories"], true);
        non_negative("max-series");
        positive("first-day");
        non_negative("last-day");
    } else if (c.verb == "bench predict" || c.verb == "bench external") {
        losses_of(o["losses"]);
        positive("order");
        grid_of(o);
        positive("lp-row-limit");
        non_negative("dump-pages");
        if (c.verb == "bench predict") {
            categories_of(o["categories"], false);
            non_negative("max-series");
            split_of(o["split"].get<std::string>());
        }
    } else if (c.verb == "bench histogram") {
        positive("bins-per-decade");
        non_negative("min-count");
        positive("samples");
        require(o["alpha"].get<double>() > 0.0 && o["scale"].get<double>() > 0.0,
                "--alpha and --scale must be positive");
    } else if (c.verb == "bench synth") {
        bench::SynthSpec s;
        s.weights = synth_weights_of(o["weights"].get<std::string>());
        try {
            s.noise = bench::NoiseSpec::parse(o["noise"].get<std::string>());
        } catch (const std::exception& e) {
            throw ValidationError(fmt::format("--noise: {}", e.what()));
        }
        positive("length");
        positive("count");
        try {
            s.validate();
        } catch (const std::exception& e) {
            throw ValidationError(fmt::format("--weights: {}", e.what()));
        }
        const std::string month = o["month"].get<std::string>();
        if (!month.empty()) {
            require(o["count-mode"].get<bool>(), "--month requires --count-mode");
            try {
                (void)YearMonth::parse(month);
            } catch (const std::exception& e) {
                throw ValidationError(fmt::format("--month: {}", e.what()));
            }
            require(o["length"].get<long long>() % 24 == 0, "--month requires --length to be whole days");
        }
    }
}

// ---- execution ----------------------------------------------------------------------------

struct Context {
    Context(const RunConfig& c, std::ostream& o, std::ostream& e) : config(c), out(o), err(e) {}

    const RunConfig& config;
    std::ostream& out;
    std::ostream& err;
    std::chrono::steady_clock::time_point started = std::chrono::steady_clock::now();
    json timings = json::object();
    std::vector<std::string> outputs;

    void log(std::string_view level, std::string_view event, json fields = json::object()) {
        json line = {{"level", level}, {"verb", config.verb}, {"event", event}};
        for (auto& [k, v] : fields.items()) line[k] = v;
        err << line.dump() << '\n';
    }
    double elapsed() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    }
    void stage(const std::string& name, double since) { timings[name] = elapsed() - since; }
    void wrote(const fs::path& path) {
        outputs.push_back(path.string());
        log("info", "wrote", {{"path", path.string()}});
    }
};

std::size_t as_size(const json& v) { return static_cast<std::size_t>(v.get<long long>()); }

MonthTable load_table(Context& ctx, const std::string& path) {
    const double t0 = ctx.elapsed();
    MonthTable table = ingest::read_month(path);
    ctx.stage("read_input", t0);
    ctx.log("info", "loaded", {{"path", path}, {"rows", table.rows()}, {"hours", table.hours()}});
    return table;
}

/// Rows of the requested categories ("all" = every row), each category capped by a seeded sample.
std::vector<std::size_t> select_rows(const MonthTable& table, const json& categories,
                                     std::size_t max_series, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    for (const auto& item : categories) {
        if (item.get<std::string>() == "all") {
            std::vector<std::size_t> all(table.rows());
            std::iota(all.begin(), all.end(), 0);
            return bench::sample_members(std::move(all), max_series, rng);
        }
    }
    const CategoryPartition partition = categorize(table);
    std::vector<std::size_t> rows;
    for (Category c : categories_of(categories, false)) {
        const auto picked = bench::sample_members(partition.of(c), max_series, rng);
        rows.insert(rows.end(), picked.begin(), picked.end());
    }
    std::sort(rows.begin(), rows.end());
    return rows;
}

void write_json_file(Context& ctx, const fs::path& path, const json& j) {
    io::write_file(path, j.dump(2) + "\n");
    ctx.wrote(path);
}

void do_download(Context& ctx) {
    const json& o = ctx.config.options;
    const int year = o["year"].get<int>();
    const int month = o["month"].get<int>();
    const YearMonth ym{year, month};
    const int days = o["days"].get<int>() > 0 ? std::min(o["days"].get<int>(), ym.days()) : ym.days();
    std::string base = o["base-url"].get<std::string>();
    while (!base.empty() && base.back() == '/') base.pop_back();
    const auto scheme_end = base.find("://");
    if (scheme_end == std::string::npos) throw ValidationError("--base-url must include a scheme");
    const auto path_start = base.find('/', scheme_end + 3);
    const std::string host = base.substr(0, path_start);
    const std::string prefix = path_start == std::string::npos ? "" : base.substr(path_start);

    httplib::Client client(host);
    client.set_follow_location(true);
    client.set_connection_timeout(30);
    client.set_read_timeout(300);
    const fs::path dir = fs::path(o["out"].get<std::string>()) / fmt::format("{:04}", year) / ym.to_string();
    fs::create_directories(dir);
    std::size_t fetched = 0;
    std::size_t skipped = 0;
    const auto first = std::chrono::sys_days{std::chrono::year{year} / std::chrono::month{static_cast<unsigned>(month)} / 1};
    for (int day = 0; day < days; ++day) {
        const auto date = first + std::chrono::days{day};
        for (int hour = 0; hour < 24; ++hour) {
            const std::string name = ingest::hour_file_name(date, hour);
            const fs::path target = dir / name;
            if (fs::exists(target) && fs::file_size(target) > 0) {
                ++skipped;
                continue;
            }
            const std::string url = fmt::format("{}/{:04}/{}/{}", prefix, year, ym.to_string(), name);
            httplib::Result res;
            for (int attempt = 0; attempt < 3; ++attempt) {
                res = client.Get(url);
                if (res && res->status == 200) break;
                ctx.log("warn", "retry", {{"url", host + url}, {"attempt", attempt + 1}});
            }
            if (!res || res->status != 200) {
                throw std::runtime_error(fmt::format("download failed for {}{} (status {})", host, url,
                                                     res ? res->status : -1));
            }
            const fs::path partial = target.string() + ".part";
            io::write_file(partial, res->body);
            fs::rename(partial, target);
            ++fetched;
            ctx.log("info", "fetched", {{"file", name}, {"bytes", res->body.size()}});
        }
    }
    ctx.outputs.push_back(dir.string());
    ctx.out << fmt::format("{}: {} files fetched, {} already present in {}\n", ym.to_string(), fetched,
                           skipped, dir.string());
}

void do_ingest(Context& ctx) {
    const json& o = ctx.config.options;
    ingest::IngestOptions options;
    options.threshold = static_cast<Total>(o["threshold"].get<long long>());
    options.days = o["days"].get<int>();
    options.workers = as_size(o["workers"]);
    const double t0 = ctx.elapsed();
    const ingest::IngestResult result =
        ingest::ingest_month(o["source"].get<std::string>(), o["year"].get<int>(), o["month"].get<int>(), options);
    ctx.stage("ingest", t0);
    for (const auto& w : result.manifest.warnings) ctx.log("warn", "ingest", {{"message", w}});
    const double t1 = ctx.elapsed();
    const fs::path out = o["out"].get<std::string>();
    ingest::write_month(result.table, out, &result.manifest);
    ctx.stage("write", t1);
    ctx.wrote(out);
    ctx.wrote(ingest::manifest_path(out));
    ctx.out << fmt::format("{}: {} pages, {} data points, zero fraction {:.4f}%, {} lines read, {} skipped\n",
                           result.manifest.month.to_string(), result.manifest.pages,
                           result.manifest.data_points, 100.0 * result.manifest.zero_fraction,
                           result.manifest.lines_read, result.manifest.skipped_lines);
}

void do_quantify(Context& ctx) {
    const json& o = ctx.config.options;
    const MonthTable table = load_table(ctx, o["input"].get<std::string>());
    const CategoryPartition partition = categorize(table);
    sparsear::SparseArProblem problem;
    problem.order = as_size(o["order"]);
    problem.sparsity = as_size(o["sparsity"]);
    problem.big_m = o["big-m"].get<double>();
    if (table.hours() <= problem.order) {
        throw ValidationError(fmt::format("--order {} needs series longer than the table's {} hours",
                                          problem.order, table.hours()));
    }
    std::mt19937_64 rng(o["seed"].get<std::uint64_t>());
    json series_used = json::object();
    const double t0 = ctx.elapsed();
    for (Category c : categories_of(o["categories"], false)) {
        const auto rows = bench::sample_members(partition.of(c), as_size(o["max-series"]), rng);
        series_used[std::string(category_label(c))] = rows.size();
        if (rows.empty()) ctx.log("warn", "empty-category", {{"category", category_label(c)}});
        problem.grams.push_back(sparsear::accumulate_gram(table, rows, problem.order,
                                                          std::string(category_label(c)),
                                                          as_size(o["workers"])));
    }
    ctx.stage("gram", t0);
    const double t1 = ctx.elapsed();
    sparsear::BranchAndBoundOptions bb;
    bb.node_limit = o["node-limit"].get<std::uint64_t>();
    bb.time_limit_seconds = o["time-limit"].get<double>();
    const sparsear::SparseArResult result = sparsear::solve_branch_and_bound(problem, bb);
    ctx.stage("branch_and_bound", t1);
    for (const auto& w : result.warnings) ctx.log("warn", "weights", {{"message", w}});

    json report = sparsear::to_json(problem, result);
    const auto seasonal = sparsear::seasonality_report(problem, result);
    json rows = json::array();
    for (const auto& r : seasonal) rows.push_back({{"category", r.category}, {"lag", r.lag}, {"coefficient", r.coefficient}});
    report["seasonality"] = rows;
    report["series"] = series_used;
    report["month"] = table.month().to_string();
    write_json_file(ctx, o["report"].get<std::string>(), report);
    if (!o["export-lp"].get<std::string>().empty()) {
        sparsear::export_miqp_lp(problem, o["export-lp"].get<std::string>());
        ctx.wrote(o["export-lp"].get<std::string>());
    }
    std::string support;
    for (std::size_t lag : result.support) support += (support.empty() ? "" : ",") + std::to_string(lag);
    ctx.out << fmt::format("support {{{}}}  objective {:.10g}  {}  nodes {}\n", support, result.objective,
                           sparsear::optimality_name(result.optimality), result.nodes);
    ctx.out << sparsear::render_seasonality(seasonal);
}

/// Hours [first, last) of the day window, validated against the table.
std::pair<std::size_t, std::size_t> day_window(const MonthTable& table, const json& o) {
    const int days = static_cast<int>(table.days());
    const int first = o["first-day"].get<int>();
    const int last = o["last-day"].get<int>() == 0 ? days : o["last-day"].get<int>();
    if (first > last || last > days) {
        throw ValidationError(fmt::format("day window {}-{} is outside the table's {} days", first, last, days));
    }
    return {static_cast<std::size_t>(first - 1) * 24, static_cast<std::size_t>(last) * 24};
}

void do_fit(Context& ctx) {
    const json& o = ctx.config.options;
    const MonthTable table = load_table(ctx, o["input"].get<std::string>());
    const LossSpec spec = LossSpec::parse(o["loss"].get<std::string>());
    const std::size_t order = as_size(o["order"]);
    const auto [begin, end] = day_window(table, o);
    if (end - begin <= order) {
        throw ValidationError(fmt::format("--order {} needs a window longer than {} hours", order, end - begin));
    }
    const auto rows = select_rows(table, o["categories"], as_size(o["max-series"]), o["seed"].get<std::uint64_t>());
    if (rows.empty()) throw std::runtime_error("no series selected");
    const double t0 = ctx.elapsed();
    solvers::DesignPair pair;
    for (std::size_t r : rows) {
        const std::vector<double> values = table[r].as_doubles();
        solvers::append_design(pair, solvers::build_design_range(
                                         std::span<const double>(values).subspan(begin, end - begin), order, order,
                                         end - begin));
    }
    const solvers::FitResult fit = solvers::fit(pair, spec, as_size(o["lp-row-limit"]));
    ctx.stage("fit", t0);
    json model = {
        {"loss", spec.to_string()},
        {"order", order},
        {"weights", std::vector<double>(fit.weights.data(), fit.weights.data() + fit.weights.size())},
        {"method", fit.method},
        {"iterations", fit.iterations},
        {"converged", fit.converged},
        {"objective", fit.objective},
        {"residual_summary",
         {{"min", fit.residual_summary.min}, {"median", fit.residual_summary.median}, {"max", fit.residual_summary.max}}},
        {"objective_trace", fit.objective_trace},
        {"certificate_gap", std::isnan(fit.certificate_gap) ? json(nullptr) : json(fit.certificate_gap)},
        {"rows", pair.rows()},
        {"series", rows.size()},
        {"month", table.month().to_string()},
    };
    write_json_file(ctx, o["out"].get<std::string>(), model);
    ctx.out << fmt::format("{} on {} rows from {} series: {} in {} iterations, objective {:.10g}{}\n",
                           spec.display_name(), pair.rows(), rows.size(), fit.method, fit.iterations,
                           fit.objective, fit.converged ? "" : " (not converged)");
}

void do_predict(Context& ctx) {
    const json& o = ctx.config.options;
    const MonthTable table = load_table(ctx, o["input"].get<std::string>());
    json model;
    try {
        model = json::parse(io::read_file(o["model"].get<std::string>()));
    } catch (const std::exception& e) {
        throw std::runtime_error(fmt::format("--model: cannot read '{}': {}", o["model"].get<std::string>(), e.what()));
    }
    if (!model.contains("weights") || !model["weights"].is_array() || model["weights"].empty()) {
        throw std::runtime_error("--model: file has no weights");
    }
    const std::vector<double> weights = model["weights"].get<std::vector<double>>();
    const auto [begin, end] = day_window(table, o);
    if (begin < weights.size()) {
        throw ValidationError(fmt::format("--first-day: predictions need {} hours of history before the window",
                                          weights.size()));
    }
    const auto rows = select_rows(table, o["categories"], as_size(o["max-series"]), o["seed"].get<std::uint64_t>());
    if (rows.empty()) throw std::runtime_error("no series selected");
    std::string csv = "page,index,truth,prediction\n";
    std::vector<double> all_pred;
    std::vector<double> all_truth;
    for (std::size_t r : rows) {
        const std::vector<double> values = table[r].as_doubles();
        const std::vector<double> pred = solvers::rolling_forecast(weights, values, begin, end);
        const std::string page = fmt::format("{} {}", table[r].key.domain_code, table[r].key.page_title);
        for (std::size_t k = 0; k < pred.size(); ++k) {
            io::append_csv_field(csv, page);
            csv += fmt::format(",{},{},{}\n", begin + k, values[begin + k], pred[k]);
            all_pred.push_back(pred[k]);
            all_truth.push_back(values[begin + k]);
        }
    }
    const bench::Metrics m = bench::compute_metrics(all_pred, all_truth);
    const fs::path out = o["out"].get<std::string>();
    io::write_file(out, csv);
    ctx.wrote(out);
    ctx.out << fmt::format("{} predictions for {} series: MAPE {:.4f}, RMSE {:.4f}\n", all_pred.size(), rows.size(),
                           m.mape, m.rmse);
}

fs::path sibling(const fs::path& report, std::string_view suffix) {
    fs::path p = report;
    p.replace_extension(suffix);
    return p;
}

void emit_bench(Context& ctx, const bench::BenchReport& report, const fs::path& path) {
    for (const auto& w : report.warnings) ctx.log("warn", "bench", {{"message", w}});
    for (const auto& c : report.cells) {
        if (!c.error.empty()) ctx.log("warn", "cell-failed", {{"loss", c.loss}, {"group", c.group}, {"error", c.error}});
    }
    write_json_file(ctx, path, report.to_json());
    const std::string table = report.render_table();
    io::write_file(sibling(path, ".txt"), table);
    ctx.wrote(sibling(path, ".txt"));
    io::write_file(sibling(path, ".predictions.csv"), report.dumps_csv());
    ctx.wrote(sibling(path, ".predictions.csv"));
    ctx.out << table;
}

bench::BenchOptions bench_options(const json& o) {
    bench::BenchOptions b;
    b.order = as_size(o["order"]);
    b.grid = grid_of(o);
    b.workers = as_size(o["workers"]);
    b.lp_row_limit = as_size(o["lp-row-limit"]);
    b.dump_pages = as_size(o["dump-pages"]);
    return b;
}

void do_bench_predict(Context& ctx) {
    const json& o = ctx.config.options;
    const MonthTable table = load_table(ctx, o["input"].get<std::string>());
    bench::PredictOptions p;
    static_cast<bench::BenchOptions&>(p) = bench_options(o);
    p.split = split_of(o["split"].get<std::string>());
    p.categories = categories_of(o["categories"], false);
    p.max_series = as_size(o["max-series"]);
    p.seed = o["seed"].get<std::uint64_t>();
    const double t0 = ctx.elapsed();
    const bench::BenchReport report =
        bench::run_prediction_benchmark(table, categorize(table), losses_of(o["losses"]), p);
    ctx.stage("benchmark", t0);
    emit_bench(ctx, report, o["report"].get<std::string>());
}

void do_bench_external(Context& ctx) {
    const json& o = ctx.config.options;
    const bench::SeriesPool pool = bench::read_series_csv(o["input"].get<std::string>());
    const double t0 = ctx.elapsed();
    const bench::BenchReport report = bench::run_external_benchmark(pool, losses_of(o["losses"]), bench_options(o));
    ctx.stage("benchmark", t0);
    emit_bench(ctx, report, o["report"].get<std::string>());
}

void do_histogram(Context& ctx) {
    const json& o = ctx.config.options;
    std::vector<double> values;
    const std::string input = o["input"].get<std::string>();
    if (input.empty()) {
        values = bench::pareto_sample(as_size(o["samples"]), o["alpha"].get<double>(), o["scale"].get<double>(),
                                      o["seed"].get<std::uint64_t>());
    } else {
        const MonthTable table = load_table(ctx, input);
        const long long hour = o["hour"].get<long long>();
        if (hour >= static_cast<long long>(table.hours())) {
            throw ValidationError(fmt::format("--hour {} is outside the table's {} hours", hour, table.hours()));
        }
        for (const auto& s : table.series()) {
            if (hour >= 0) {
                values.push_back(s.values[static_cast<std::size_t>(hour)]);
            } else {
                values.insert(values.end(), s.values.begin(), s.values.end());
            }
        }
    }
    const bench::Histogram h = bench::loglog_histogram(values, o["bins-per-decade"].get<int>());
    const fs::path out = o["out"].get<std::string>();
    io::write_file(out, h.to_csv());
    ctx.wrote(out);
    std::string slope = "n/a";
    try {
        slope = fmt::format("{:.4f}", bench::loglog_slope(h, o["min-count"].get<std::uint64_t>()));
    } catch (const std::exception& e) {
        ctx.log("warn", "slope", {{"message", e.what()}});
    }
    ctx.out << fmt::format("{} values: {} zeros, {} bins, log-log slope {}\n", values.size(), h.zeros, h.bins.size(),
                           slope);
}

void do_synth(Context& ctx) {
    const json& o = ctx.config.options;
    bench::SynthSpec s;
    s.weights = synth_weights_of(o["weights"].get<std::string>());
    s.noise = bench::NoiseSpec::parse(o["noise"].get<std::string>());
    s.level = o["level"].get<double>();
    s.length = as_size(o["length"]);
    s.count = as_size(o["count"]);
    s.seed = o["seed"].get<std::uint64_t>();
    s.count_mode = o["count-mode"].get<bool>();
    const auto series = bench::generate_synthetic(s);
    const fs::path out = o["out"].get<std::string>();
    const std::string month = o["month"].get<std::string>();
    if (!month.empty()) {
        const MonthTable table = bench::synthetic_month(series, YearMonth::parse(month));
        ingest::write_month(table, out);
        ctx.wrote(out);
        ctx.wrote(ingest::manifest_path(out));
    } else {
        std::string csv;
        for (std::size_t i = 0; i < series.size(); ++i) csv += fmt::format("{}series_{:06}", i ? "," : "", i);
        csv += '\n';
        for (std::size_t t = 0; t < s.length; ++t) {
            for (std::size_t i = 0; i < series.size(); ++i) csv += fmt::format("{}{}", i ? "," : "", series[i][t]);
            csv += '\n';
        }
        const std::string ext = out.extension().string();
        io::write_file(out, ext == ".gz" ? io::gzip(csv) : csv);
        ctx.wrote(out);
    }
    ctx.out << fmt::format("{} series of length {} ({} noise, seed {})\n", s.count, s.length, s.noise.to_string(),
                           s.seed);
}

fs::path run_manifest_path(const RunConfig& c) {
    const json& o = c.options;
    if (c.verb == "download") return fs::path(o["out"].get<std::string>()) / "download.run.json";
    const std::string primary = o.contains("report") ? o["report"].get<std::string>() : o["out"].get<std::string>();
    return primary + ".run.json";
}

RunConfig replayed(const std::vector<VerbDef>& verbs, const std::string& path) {
    const json manifest = read_config_file(path);
    if (!manifest.contains("verb") || !manifest["verb"].is_string() || !manifest.contains("config") ||
        !manifest["config"].is_object()) {
        throw ValidationError(fmt::format("--manifest: '{}' has no verb and config", path));
    }
    const std::string verb = manifest["verb"].get<std::string>();
    if (verb == "replay" || std::none_of(verbs.begin(), verbs.end(), [&](const VerbDef& v) { return v.path == verb; })) {
        throw ValidationError(fmt::format("--manifest: cannot replay verb '{}'", verb));
    }
    const VerbDef& def = find_verb(verbs, verb);
    RunConfig config{verb, json::object()};
    const json& stored = manifest["config"];
    for (auto it = stored.begin(); it != stored.end(); ++it) {
        if (std::none_of(def.options.begin(), def.options.end(), [&](const OptionDef& d) { return d.name == it.key(); })) {
            throw ValidationError(fmt::format("--manifest: unknown key '{}' for verb '{}'", it.key(), verb));
        }
    }
    for (const auto& opt : def.options) {
        if (!stored.contains(opt.name)) {
            throw ValidationError(fmt::format("--manifest: missing key '{}'", opt.name));
        }
        config.options[opt.name] = from_config(opt, stored[opt.name]);
    }
    return config;
}

}  // namespace

ParsedArgs load_config(const std::vector<std::string>& args) {
    const std::vector<VerbDef> verbs = verb_table();
    CLI::App app{"Robust autoregression, sparse periodicity quantification and pageview ingestion", "tailedts"};
    app.require_subcommand(1);
    app.set_version_flag("--version", TAILEDTS_VERSION);
    std::string config_path;
    app.add_option("--config", config_path, "JSON file with option values; flags take precedence");
    app.fallthrough();

    CLI::App* bench = nullptr;
    std::map<std::string, CLI::App*> commands;
    std::map<const CLI::App*, std::map<std::string, CLI::Option*>> handles;
    std::map<std::string, std::map<std::string, std::string>> raw;
    std::map<std::string, std::map<std::string, bool>> flags;

    auto attach = [&](CLI::App* sub, const VerbDef& def) {
        sub->fallthrough();
        for (const auto& opt : def.options) {
            std::string help = opt.help;
            if (!opt.fallback.is_null()) help += fmt::format(" [{}]", opt.fallback.dump());
            else help += " (required)";
            if (opt.kind == Kind::Bool) {
                handles[sub][opt.name] =
                    sub->add_flag("--" + opt.name, flags[def.path][opt.name], help);
            } else {
                handles[sub][opt.name] =
                    sub->add_option("--" + opt.name, raw[def.path][opt.name], help)->type_name(type_name(opt.kind));
            }
        }
    };
    for (const auto& def : verbs) {
        if (def.path.rfind("bench ", 0) == 0) {
            if (!bench) {
                bench = app.add_subcommand("bench", "Experiment harness");
                bench->require_subcommand(1);
                bench->fallthrough();
            }
            const std::string leaf = def.path.substr(6);
            CLI::App* sub = bench->add_subcommand(leaf, def.help);
            commands[def.path] = sub;
            attach(sub, def);
            if (leaf == "histogram" || leaf == "synth") {
                CLI::App* alias = app.add_subcommand(leaf, def.help + " (same as bench " + leaf + ")");
                commands["alias " + leaf] = alias;
                attach(alias, def);
            }
        } else {
            CLI::App* sub = app.add_subcommand(def.path, def.help);
            commands[def.path] = sub;
            attach(sub, def);
        }
    }

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    ParsedArgs parsed;
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        std::ostringstream out;
        std::ostringstream err;
        parsed.exit_code = app.exit(e, out, err) == 0 ? 0 : 1;
        parsed.message = out.str() + err.str();
        return parsed;
    }

    std::string verb;
    CLI::App* chosen = nullptr;
    for (const auto& [key, sub] : commands) {
        if (sub->parsed()) {
            verb = key.rfind("alias ", 0) == 0 ? "bench " + key.substr(6) : key;
            chosen = sub;
        }
    }
    if (!chosen) throw ValidationError("a verb is required (see --help)");
    const VerbDef& def = find_verb(verbs, verb);

    json file = json::object();
    if (!config_path.empty()) file = read_config_file(config_path);
    for (auto it = file.begin(); it != file.end(); ++it) {
        const bool known = std::any_of(def.options.begin(), def.options.end(),
                                       [&](const OptionDef& d) { return d.name == it.key(); });
        if (!known) {
            throw ValidationError(fmt::format("unknown config key '{}' for verb '{}'", it.key(), verb));
        }
    }

    RunConfig config{verb, json::object()};
    for (const auto& opt : def.options) {
        CLI::Option* handle = handles[chosen][opt.name];
        json value;
        if (handle->count() > 0) {
            value = opt.kind == Kind::Bool ? json(true) : from_flag(opt, raw[def.path][opt.name]);
        } else if (file.contains(opt.name)) {
            value = from_config(opt, file[opt.name]);
        } else if (!opt.fallback.is_null()) {
            value = opt.fallback;
        } else {
            throw ValidationError(fmt::format("missing required option --{} for '{}'", opt.name, verb));
        }
        config.options[opt.name] = value;
    }
    if (verb == "replay") config = replayed(verbs, config.options["manifest"].get<std::string>());
    validate(config);
    parsed.config = std::move(config);
    return parsed;
}

void execute(const RunConfig& config, std::ostream& out, std::ostream& err) {
    Context ctx{config, out, err};
    ctx.log("info", "start");
    const std::string& v = config.verb;
    if (v == "download") do_download(ctx);
    else if (v == "ingest") do_ingest(ctx);
    else if (v == "quantify") do_quantify(ctx);
    else if (v == "fit") do_fit(ctx);
    else if (v == "predict") do_predict(ctx);
    else if (v == "bench predict") do_bench_predict(ctx);
    else if (v == "bench external") do_bench_external(ctx);
    else if (v == "bench histogram") do_histogram(ctx);
    else if (v == "bench synth") do_synth(ctx);
    else throw std::logic_error(fmt::format("no handler for verb {}", v));

    ctx.timings["total"] = ctx.elapsed();
    const json manifest = {{"tool", "tailedts"},      {"version", TAILEDTS_VERSION}, {"verb", v},
                           {"config", config.options}, {"outputs", ctx.outputs},      {"timings_seconds", ctx.timings}};
    const fs::path path = run_manifest_path(config);
    io::write_file(path, manifest.dump(2) + "\n");
    ctx.log("info", "done", {{"seconds", ctx.timings["total"]}, {"manifest", path.string()}});
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    ParsedArgs parsed;
    try {
        parsed = load_config(args);
    } catch (const ValidationError& e) {
        err << json{{"level", "error"}, {"event", "invalid"}, {"message", e.what()}}.dump() << '\n';
        return 1;
    }
    if (!parsed.config) {
        (parsed.exit_code == 0 ? out : err) << parsed.message;
        return parsed.exit_code;
    }
    try {
        execute(*parsed.config, out, err);
    } catch (const ValidationError& e) {
        err << json{{"level", "error"}, {"verb", parsed.config->verb}, {"event", "invalid"}, {"message", e.what()}}.dump()
            << '\n';
        return 1;
    } catch (const std::exception& e) {
        err << json{{"level", "error"}, {"verb", parsed.config->verb}, {"event", "failed"}, {"message", e.what()}}.dump()
            << '\n';
        return 2;
    }
    return 0;
}

}  // namespace tailedts::cli
