#include "tailedts/bench.hpp"

#include "tailedts/io.hpp"
#include "tailedts/parallel.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace tailedts::bench {

namespace {

double parse_number(std::string_view text, std::string_view context) {
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size()) {
        throw std::invalid_argument(fmt::format("invalid number '{}' in {}", text, context));
    }
    return value;
}

std::vector<std::string_view> split_colon(std::string_view text) {
    std::vector<std::string_view> parts;
    std::size_t from = 0;
    while (true) {
        const auto at = text.find(':', from);
        parts.push_back(text.substr(from, at == std::string_view::npos ? at : at - from));
        if (at == std::string_view::npos) break;
        from = at + 1;
    }
    return parts;
}

std::string family_display(const LossRequest& request) {
    if (request.fixed) return request.fixed->display_name();
    if (request.family == "huber") return "Huber loss";
    if (request.family == "quantile") return "Quantile loss";
    if (request.family == "lp") return "lp-norm loss";
    return LossSpec::parse(request.family).display_name();
}

nlohmann::json metrics_json(const std::optional<Metrics>& m) {
    if (!m) return nullptr;
    return {{"mape", m->mape}, {"rmse", m->rmse}};
}

/// Rolling one-step predictions and truths for targets [begin, end) of every series.
void collect_predictions(const Eigen::VectorXd& weights, const std::vector<std::span<const double>>& series,
                         std::size_t begin, std::size_t end, std::vector<double>& predictions,
                         std::vector<double>& truth) {
    const std::span<const double> w(weights.data(), static_cast<std::size_t>(weights.size()));
    for (const auto& s : series) {
        const std::vector<double> p = solvers::rolling_forecast(w, s, begin, end);
        predictions.insert(predictions.end(), p.begin(), p.end());
        truth.insert(truth.end(), s.begin() + static_cast<std::ptrdiff_t>(begin),
                     s.begin() + static_cast<std::ptrdiff_t>(end));
    }
}

}  // namespace

void SplitSpec::validate(int days) const {
    const bool ok = train_first >= 1 && train_first <= train_last &&
                    validation_first == train_last + 1 && validation_first <= validation_last &&
                    test_first == validation_last + 1 && test_first <= test_last && test_last <= days;
    if (!ok) {
        throw std::invalid_argument(fmt::format(
            "split train {}-{}, validation {}-{}, test {}-{} is not contiguous within {} days",
            train_first, train_last, validation_first, validation_last, test_first, test_last, days));
    }
}

nlohmann::json SplitSpec::to_json() const {
    return {{"train", {train_first, train_last}},
            {"validation", {validation_first, validation_last}},
            {"test", {test_first, test_last}}};
}

void HyperGrid::validate() const {
    if (huber_delta.empty() || quantile_tau.empty() || lp_p.empty()) {
        throw std::invalid_argument("hyperparameter grid lists must be non-empty");
    }
    for (double d : huber_delta) (void)LossSpec::huber(d);
    for (double t : quantile_tau) (void)LossSpec::quantile(t);
    for (double p : lp_p) (void)LossSpec::lp(p);
}

std::vector<LossSpec> HyperGrid::candidates(std::string_view family) const {
    std::vector<LossSpec> out;
    if (family == "huber") {
        for (double d : huber_delta) out.push_back(LossSpec::huber(d));
    } else if (family == "quantile") {
        for (double t : quantile_tau) out.push_back(LossSpec::quantile(t));
    } else if (family == "lp") {
        for (double p : lp_p) out.push_back(LossSpec::lp(p));
    } else {
        out.push_back(LossSpec::parse(family));
    }
    return out;
}

nlohmann::json HyperGrid::to_json() const {
    return {{"huber_delta", huber_delta}, {"quantile_tau", quantile_tau}, {"lp_p", lp_p}};
}

Metrics compute_metrics(std::span<const double> predictions, std::span<const double> truth) {
    if (predictions.size() != truth.size()) {
        throw std::invalid_argument(fmt::format("{} predictions for {} observations",
                                                predictions.size(), truth.size()));
    }
    if (truth.empty()) throw std::invalid_argument("metrics need at least one observation");
    double abs_ratio = 0.0;
    double sq = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const double e = predictions[i] - truth[i];
        abs_ratio += std::abs(e) / std::max(truth[i], 1.0);
        sq += e * e;
    }
    const auto n = static_cast<double>(truth.size());
    return {abs_ratio / n, std::sqrt(sq / n)};
}

LossRequest LossRequest::parse(std::string_view text) {
    if (text.find(':') == std::string_view::npos &&
        (text == "huber" || text == "quantile" || text == "lp")) {
        return {std::string(text), std::nullopt};
    }
    const LossSpec spec = LossSpec::parse(text);
    return {spec.family(), spec};
}

std::string LossRequest::to_string() const { return fixed ? fixed->to_string() : family; }

TuneOutcome tune(const std::vector<LossSpec>& candidates, const solvers::DesignPair& train,
                 const std::vector<std::span<const double>>& series, std::size_t validation_begin,
                 std::size_t validation_end, std::size_t lp_row_limit) {
    if (candidates.empty()) throw std::invalid_argument("tuning grid is empty");
    TuneOutcome outcome;
    std::optional<std::size_t> best;
    for (const LossSpec& spec : candidates) {
        TuneCandidate c{spec, std::nullopt, {}};
        try {
            solvers::FitResult fit = solvers::fit(train, spec, lp_row_limit);
            std::vector<double> predictions;
            std::vector<double> truth;
            collect_predictions(fit.weights, series, validation_begin, validation_end, predictions, truth);
            c.validation = compute_metrics(predictions, truth);
            if (!std::isfinite(c.validation->mape)) throw solvers::SolverError("non-finite validation MAPE");
            if (!best || c.validation->mape < outcome.candidates[*best].validation->mape) {
                best = outcome.candidates.size();
                outcome.chosen = spec;
                outcome.fit = std::move(fit);
            }
        } catch (const std::exception& e) {
            c.validation.reset();
            c.error = e.what();
            outcome.warnings.push_back(fmt::format("candidate {} failed: {}", spec.to_string(), e.what()));
        }
        outcome.candidates.push_back(std::move(c));
    }
    if (!best) {
        throw solvers::SolverError(fmt::format("all {} tuning candidates failed", candidates.size()));
    }
    return outcome;
}

BenchReport run_protocol(const SeriesPool& pool, const IndexSplit& split,
                         const std::vector<LossRequest>& losses, const BenchOptions& options) {
    if (losses.empty()) throw std::invalid_argument("no losses requested");
    options.grid.validate();
    if (options.order < 1) throw std::invalid_argument("AR order must be at least 1");
    if (!(options.order < split.train_end && split.train_end < split.validation_end &&
          split.validation_end < split.end)) {
        throw std::invalid_argument(fmt::format(
            "split [{}, {}, {}) is too short for AR order {}", split.train_end,
            split.validation_end, split.end, options.order));
    }
    for (std::size_t i = 0; i < pool.values.size(); ++i) {
        if (pool.values[i].size() < split.end) {
            throw std::invalid_argument(fmt::format("series '{}' has {} steps, split needs {}",
                                                    pool.names[i], pool.values[i].size(), split.end));
        }
    }

    BenchReport report;
    for (const auto& l : losses) report.losses.push_back(l.to_string());
    for (const auto& [label, members] : pool.groups) report.groups.push_back(label);

    const std::size_t G = pool.groups.size();
    std::vector<solvers::DesignPair> designs(G);
    std::vector<std::string> design_errors(G);
    parallel_for(G, options.workers, [&](std::size_t g) {
        const auto& members = pool.groups[g].second;
        if (members.empty()) {
            design_errors[g] = "group has no series";
            return;
        }
        std::size_t rows = 0;
        for (std::size_t i = 0; i < members.size(); ++i) rows += split.train_end - options.order;
        solvers::DesignPair pair{Eigen::MatrixXd(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(options.order)),
                                 Eigen::VectorXd(static_cast<Eigen::Index>(rows))};
        Eigen::Index offset = 0;
        for (std::size_t idx : members) {
            const solvers::DesignPair block =
                solvers::build_design_range(pool.values[idx], options.order, options.order, split.train_end);
            pair.A.middleRows(offset, block.A.rows()) = block.A;
            pair.y.segment(offset, block.y.size()) = block.y;
            offset += block.A.rows();
        }
        designs[g] = std::move(pair);
    });

    const std::size_t L = losses.size();
    report.cells.resize(L * G);
    std::vector<std::vector<PredictionDumpRow>> dumps(L * G);
    std::vector<std::vector<std::string>> warnings(L * G);
    parallel_for(L * G, options.workers, [&](std::size_t job) {
        const std::size_t li = job / G;
        const std::size_t g = job % G;
        BenchCell& cell = report.cells[job];
        cell.loss = losses[li].to_string();
        cell.group = pool.groups[g].first;
        if (!design_errors[g].empty()) {
            cell.error = design_errors[g];
            return;
        }
        const auto& members = pool.groups[g].second;
        std::vector<std::span<const double>> series;
        series.reserve(members.size());
        for (std::size_t idx : members) series.emplace_back(pool.values[idx]);
        try {
            const std::vector<LossSpec> candidates =
                losses[li].fixed ? std::vector<LossSpec>{*losses[li].fixed}
                                 : options.grid.candidates(losses[li].family);
            TuneOutcome tuned = tune(candidates, designs[g], series, split.train_end,
                                     split.validation_end, options.lp_row_limit);
            cell.chosen = tuned.chosen.to_string();
            cell.tuning = std::move(tuned.candidates);
            warnings[job] = std::move(tuned.warnings);
            const solvers::FitResult& fit = tuned.fit;
            cell.weights.assign(fit.weights.data(), fit.weights.data() + fit.weights.size());
            cell.method = fit.method;
            cell.iterations = fit.iterations;
            cell.converged = fit.converged;
            std::vector<double> predictions;
            std::vector<double> truth;
            collect_predictions(fit.weights, series, split.validation_end, split.end, predictions, truth);
            cell.test = compute_metrics(predictions, truth);
            const std::size_t per_series = split.end - split.validation_end;
            for (std::size_t s = 0; s < std::min(options.dump_pages, members.size()); ++s) {
                for (std::size_t k = 0; k < per_series; ++k) {
                    dumps[job].push_back({cell.group, cell.loss, pool.names[members[s]],
                                          split.validation_end + k, truth[s * per_series + k],
                                          predictions[s * per_series + k]});
                }
            }
        } catch (const std::exception& e) {
            cell.error = e.what();
        }
    });
    for (std::size_t job = 0; job < L * G; ++job) {
        report.dumps.insert(report.dumps.end(), dumps[job].begin(), dumps[job].end());
        for (auto& w : warnings[job]) {
            report.warnings.push_back(fmt::format("{} / {}: {}", report.cells[job].loss,
                                                  report.cells[job].group, w));
        }
    }
    report.protocol = {{"order", options.order},
                       {"train_targets", {options.order, split.train_end}},
                       {"validation_targets", {split.train_end, split.validation_end}},
                       {"test_targets", {split.validation_end, split.end}},
                       {"grid", options.grid.to_json()},
                       {"lp_row_limit", options.lp_row_limit},
                       {"mape", "mean(|prediction - truth| / max(truth, 1))"},
                       {"forecast", "rolling one-step, observed history"}};
    return report;
}

nlohmann::json BenchReport::to_json() const {
    nlohmann::json cells_json = nlohmann::json::array();
    for (const auto& c : cells) {
        nlohmann::json tuning = nlohmann::json::array();
        for (const auto& t : c.tuning) {
            nlohmann::json entry = {{"spec", t.spec.to_string()}, {"validation", metrics_json(t.validation)}};
            if (!t.error.empty()) entry["error"] = t.error;
            tuning.push_back(entry);
        }
        nlohmann::json cell = {{"loss", c.loss},
                               {"group", c.group},
                               {"chosen", c.chosen},
                               {"test", metrics_json(c.test)},
                               {"method", c.method},
                               {"iterations", c.iterations},
                               {"converged", c.converged},
                               {"weights", c.weights},
                               {"tuning", tuning}};
        if (!c.error.empty()) cell["error"] = c.error;
        cells_json.push_back(cell);
    }
    return {{"kind", kind},     {"protocol", protocol}, {"losses", losses},
            {"groups", groups}, {"cells", cells_json},  {"warnings", warnings}};
}

std::string BenchReport::render_table() const {
    std::vector<std::string> labels;
    std::size_t label_width = 4;
    for (const auto& l : losses) {
        labels.push_back(family_display(LossRequest::parse(l)));
        label_width = std::max(label_width, labels.back().size());
    }
    std::string out = fmt::format("{:<{}}", "Loss", label_width);
    for (const auto& g : groups) out += fmt::format("  {:>18}", g);
    out += '\n';
    for (std::size_t li = 0; li < losses.size(); ++li) {
        out += fmt::format("{:<{}}", labels[li], label_width);
        for (std::size_t g = 0; g < groups.size(); ++g) {
            const BenchCell& c = cells[li * groups.size() + g];
            const std::string text =
                c.test ? fmt::format("{:.3f}/{:.2f}", c.test->mape, c.test->rmse) : std::string("-/-");
            out += fmt::format("  {:>18}", text);
        }
        out += '\n';
    }
    return out;
}

std::string BenchReport::dumps_csv() const {
    std::string out = "group,loss,page,index,truth,prediction\n";
    for (const auto& r : dumps) {
        io::append_csv_field(out, r.group);
        out += ',';
        io::append_csv_field(out, r.loss);
        out += ',';
        io::append_csv_field(out, r.page);
        out += fmt::format(",{},{},{}\n", r.index, r.truth, r.prediction);
    }
    return out;
}

std::vector<std::size_t> sample_members(std::vector<std::size_t> members, std::size_t max_series,
                                        std::mt19937_64& rng) {
    if (max_series > 0 && members.size() > max_series) {
        for (std::size_t i = 0; i < max_series; ++i) {
            std::uniform_int_distribution<std::size_t> pick(i, members.size() - 1);
            std::swap(members[i], members[pick(rng)]);
        }
        members.resize(max_series);
    }
    std::sort(members.begin(), members.end());
    return members;
}

BenchReport run_prediction_benchmark(const MonthTable& table, const CategoryPartition& partition,
                                     const std::vector<LossRequest>& losses,
                                     const PredictOptions& options) {
    options.split.validate(static_cast<int>(table.days()));
    const SplitSpec& sp = options.split;
    const std::size_t first_hour = static_cast<std::size_t>(sp.train_first - 1) * 24;
    const std::size_t last_hour = static_cast<std::size_t>(sp.test_last) * 24;

    SeriesPool pool;
    std::vector<std::size_t> row_of;  // table row -> pool index
    std::vector<std::pair<std::string, std::vector<std::size_t>>> groups;
    std::mt19937_64 rng(options.seed);
    for (Category c : options.categories) {
        const std::vector<std::size_t> members = sample_members(partition.of(c), options.max_series, rng);
        std::vector<std::size_t> indices;
        for (std::size_t row : members) {
            const TimeSeries& s = table[row];
            pool.names.push_back(fmt::format("{} {}", s.key.domain_code, s.key.page_title));
            pool.values.emplace_back(s.values.begin() + static_cast<std::ptrdiff_t>(first_hour),
                                     s.values.begin() + static_cast<std::ptrdiff_t>(last_hour));
            indices.push_back(pool.values.size() - 1);
        }
        pool.groups.emplace_back(std::string(category_label(c)), std::move(indices));
    }
    const IndexSplit split{static_cast<std::size_t>(sp.train_last - sp.train_first + 1) * 24,
                           static_cast<std::size_t>(sp.validation_last - sp.train_first + 1) * 24,
                           last_hour - first_hour};
    BenchReport report = run_protocol(pool, split, losses, options);
    report.kind = "predict";
    report.protocol["month"] = table.month().to_string();
    report.protocol["split_days"] = sp.to_json();
    report.protocol["max_series"] = options.max_series;
    report.protocol["seed"] = options.seed;
    nlohmann::json sizes = nlohmann::json::object();
    for (const auto& [label, members] : pool.groups) sizes[label] = members.size();
    report.protocol["series_per_group"] = sizes;
    return report;
}

SeriesPool read_series_csv(const std::filesystem::path& path) {
    const std::string text = io::read_maybe_gzip(path);
    const std::vector<std::string_view> records = io::csv_records(text);
    if (records.empty()) throw std::runtime_error(fmt::format("{}: empty series file", path.string()));
    SeriesPool pool;
    pool.names = io::split_csv_record(records.front());
    const std::size_t columns = pool.names.size();
    pool.values.assign(columns, {});
    for (std::size_t r = 1; r < records.size(); ++r) {
        if (records[r].empty()) continue;
        const std::vector<std::string> fields = io::split_csv_record(records[r]);
        if (fields.size() != columns) {
            throw std::runtime_error(fmt::format("{}: row {} has {} fields, header has {}",
                                                 path.string(), r + 1, fields.size(), columns));
        }
        for (std::size_t c = 0; c < columns; ++c) {
            pool.values[c].push_back(parse_number(fields[c], fmt::format("{} row {}", path.string(), r + 1)));
        }
    }
    std::vector<std::size_t> all(columns);
    std::iota(all.begin(), all.end(), 0);
    pool.groups.emplace_back("all", std::move(all));
    return pool;
}

IndexSplit chronological_split(std::size_t length) {
    return {length * 8 / 10, length * 9 / 10, length};
}

BenchReport run_external_benchmark(const SeriesPool& dataset, const std::vector<LossRequest>& losses,
                                   const BenchOptions& options) {
    if (dataset.values.empty()) throw std::invalid_argument("external dataset has no series");
    std::size_t length = dataset.values.front().size();
    for (const auto& s : dataset.values) length = std::min(length, s.size());
    const IndexSplit split = chronological_split(length);
    BenchReport report = run_protocol(dataset, split, losses, options);
    report.kind = "external";
    report.protocol["split"] = "80/10/10 chronological";
    report.protocol["length"] = length;
    report.protocol["series"] = dataset.values.size();
    return report;
}

Histogram loglog_histogram(std::span<const double> values, int bins_per_decade) {
    if (bins_per_decade < 1) throw std::invalid_argument("bins per decade must be at least 1");
    Histogram h;
    double lo = std::numeric_limits<double>::infinity();
    double hi = 0.0;
    for (double v : values) {
        if (!(v >= 0.0) || !std::isfinite(v)) {
            throw std::invalid_argument("histogram values must be finite and non-negative");
        }
        if (v == 0.0) {
            ++h.zeros;
            continue;
        }
        ++h.positives;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    if (h.positives == 0) throw std::invalid_argument("histogram needs at least one positive value");
    const double b = bins_per_decade;
    const auto k0 = static_cast<long>(std::floor(std::log10(lo) * b));
    const auto k1 = std::max(k0 + 1, static_cast<long>(std::floor(std::log10(hi) * b)) + 1);
    auto edge = [&](long k) { return std::pow(10.0, static_cast<double>(k) / b); };
    for (long k = k0; k < k1; ++k) {
        HistogramBin bin;
        bin.lower = edge(k);
        bin.upper = edge(k + 1);
        bin.center = std::sqrt(bin.lower * bin.upper);
        h.bins.push_back(bin);
    }
    for (double v : values) {
        if (v == 0.0) continue;
        auto i = static_cast<long>(std::floor(std::log10(v) * b)) - k0;
        i = std::clamp(i, 0L, static_cast<long>(h.bins.size()) - 1);
        if (v < h.bins[static_cast<std::size_t>(i)].lower && i > 0) --i;
        if (v >= h.bins[static_cast<std::size_t>(i)].upper && i + 1 < static_cast<long>(h.bins.size())) ++i;
        ++h.bins[static_cast<std::size_t>(i)].count;
    }
    for (auto& bin : h.bins) {
        bin.density = static_cast<double>(bin.count) /
                      (static_cast<double>(h.positives) * (bin.upper - bin.lower));
    }
    return h;
}

std::string Histogram::to_csv() const {
    std::string out = fmt::format("# zeros={} positives={}\nlower,upper,center,count,density\n", zeros, positives);
    for (const auto& b : bins) {
        out += fmt::format("{},{},{},{},{}\n", b.lower, b.upper, b.center, b.count, b.density);
    }
    return out;
}

double loglog_slope(const Histogram& histogram, std::uint64_t min_count) {
    std::vector<std::size_t> occupied;
    for (std::size_t i = 0; i < histogram.bins.size(); ++i) {
        if (histogram.bins[i].count > 0) occupied.push_back(i);
    }
    std::vector<double> xs;
    std::vector<double> ys;
    for (std::size_t j = 1; j + 1 < occupied.size(); ++j) {
        const HistogramBin& bin = histogram.bins[occupied[j]];
        if (bin.count < min_count) continue;
        xs.push_back(std::log10(bin.center));
        ys.push_back(std::log10(bin.density));
    }
    if (xs.size() < 2) throw std::invalid_argument("fewer than two bins qualify for the slope fit");
    const auto n = static_cast<double>(xs.size());
    const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
    const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
    double sxy = 0.0;
    double sxx = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxy += (xs[i] - mx) * (ys[i] - my);
        sxx += (xs[i] - mx) * (xs[i] - mx);
    }
    return sxy / sxx;
}

NoiseSpec NoiseSpec::parse(std::string_view text) {
    const auto parts = split_colon(text);
    NoiseSpec n;
    const auto arg = [&](std::size_t i, double fallback) {
        return parts.size() > i ? parse_number(parts[i], fmt::format("noise '{}'", text)) : fallback;
    };
    if (parts[0] == "gaussian") {
        if (parts.size() > 2) throw std::invalid_argument("gaussian noise takes one parameter");
        n.family = NoiseFamily::Gaussian;
        n.sigma = arg(1, 1.0);
    } else if (parts[0] == "student") {
        if (parts.size() > 3) throw std::invalid_argument("student noise takes two parameters");
        n.family = NoiseFamily::StudentT;
        n.nu = arg(1, 3.0);
        n.sigma = arg(2, 1.0);
    } else if (parts[0] == "pareto") {
        if (parts.size() > 3) throw std::invalid_argument("pareto noise takes two parameters");
        n.family = NoiseFamily::Pareto;
        n.alpha = arg(1, 1.5);
        n.sigma = arg(2, 1.0);
    } else {
        throw std::invalid_argument(
            fmt::format("unknown noise '{}' (expected gaussian, student or pareto)", text));
    }
    if (!(n.sigma >= 0.0) || !(n.nu > 0.0) || !(n.alpha > 0.0)) {
        throw std::invalid_argument(fmt::format("invalid noise parameters in '{}'", text));
    }
    return n;
}

std::string NoiseSpec::to_string() const {
    switch (family) {
        case NoiseFamily::Gaussian: return fmt::format("gaussian:{}", sigma);
        case NoiseFamily::StudentT: return fmt::format("student:{}:{}", nu, sigma);
        case NoiseFamily::Pareto: return fmt::format("pareto:{}:{}", alpha, sigma);
    }
    return "gaussian";
}

void SynthSpec::validate() const {
    if (weights.empty()) throw std::invalid_argument("synthetic model needs at least one lag");
    double sum = 0.0;
    for (double w : weights) {
        if (!(w >= 0.0) || !std::isfinite(w)) {
            throw std::invalid_argument("synthetic weights must be finite and non-negative");
        }
        sum += w;
    }
    if (sum > 1.0 + 1e-12) {
        throw std::invalid_argument(fmt::format("synthetic weights sum to {} > 1: unstable", sum));
    }
    if (length < 1 || count < 1) throw std::invalid_argument("synthetic length and count must be positive");
    if (!(noise.sigma >= 0.0) || !(noise.nu > 0.0) || !(noise.alpha > 0.0)) {
        throw std::invalid_argument("invalid noise parameters");
    }
}

double draw_noise(const NoiseSpec& noise, std::mt19937_64& rng) {
    switch (noise.family) {
        case NoiseFamily::Gaussian: return noise.sigma * std::normal_distribution<double>(0.0, 1.0)(rng);
        case NoiseFamily::StudentT: return noise.sigma * std::student_t_distribution<double>(noise.nu)(rng);
        case NoiseFamily::Pareto: {
            const double u = 1.0 - std::uniform_real_distribution<double>(0.0, 1.0)(rng);  // (0, 1]
            const double sign = (rng() >> 63) ? 1.0 : -1.0;
            return sign * noise.sigma * (std::pow(u, -1.0 / noise.alpha) - 1.0);
        }
    }
    return 0.0;
}

std::vector<std::vector<double>> generate_synthetic(const SynthSpec& spec) {
    spec.validate();
    const std::size_t d = spec.weights.size();
    const std::size_t burn = 10 * d;
    std::mt19937_64 rng(spec.seed);
    std::vector<std::vector<double>> out;
    out.reserve(spec.count);
    std::vector<double> x(burn + spec.length);
    for (std::size_t s = 0; s < spec.count; ++s) {
        for (std::size_t t = 0; t < x.size(); ++t) {
            double v;
            if (!spec.initial.empty() && t < d) {
                v = spec.initial[t % spec.initial.size()];
            } else {
                v = spec.level + draw_noise(spec.noise, rng);
                for (std::size_t k = 1; k <= std::min(d, t); ++k) v += spec.weights[k - 1] * x[t - k];
            }
            if (spec.count_mode) v = std::max(0.0, std::round(v));
            x[t] = v;
        }
        out.emplace_back(x.begin() + static_cast<std::ptrdiff_t>(burn), x.end());
    }
    return out;
}

MonthTable synthetic_month(const std::vector<std::vector<double>>& series, YearMonth month,
                           std::string_view domain) {
    std::vector<TimeSeries> rows;
    std::size_t hours = series.empty() ? static_cast<std::size_t>(month.days()) * 24 : series.front().size();
    for (std::size_t i = 0; i < series.size(); ++i) {
        TimeSeries ts{PageKey::normalized(domain, fmt::format("series_{:06}", i)), month.first_hour(), {}};
        ts.values.reserve(series[i].size());
        for (double v : series[i]) {
            if (!(v >= 0.0) || v != std::round(v) || v > 4294967295.0) {
                throw std::invalid_argument("month tables need non-negative integer counts (use count mode)");
            }
            ts.values.push_back(static_cast<Count>(v));
        }
        rows.push_back(std::move(ts));
    }
    return MonthTable(month, month.first_hour(), hours, std::move(rows));
}

std::vector<double> pareto_sample(std::size_t n, double alpha, double scale, std::uint64_t seed) {
    if (!(alpha > 0.0) || !(scale > 0.0)) throw std::invalid_argument("Pareto needs alpha > 0 and scale > 0");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::vector<double> out(n);
    for (double& v : out) v = scale * std::pow(1.0 - unif(rng), -1.0 / alpha);
    return out;
}

}  // namespace tailedts::bench
