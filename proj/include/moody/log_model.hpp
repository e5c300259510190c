#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <istream>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <variant>
#include <vector>

namespace moody {

/// Raised for malformed or inconsistent input data.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Token used for missing categorical values.
inline constexpr std::string_view kMissingToken = "\xE2\x8A\xA5";  // ⊥

inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();
inline bool is_missing(double x) { return std::isnan(x); }

enum class VariableKind { categorical, numerical };

inline std::string_view to_string(VariableKind k) {
    return k == VariableKind::categorical ? "categorical" : "numerical";
}

/// Shortest round-trip decimal representation of a double.
inline std::string format_number(double x) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, res.ptr);
}

inline std::optional<double> parse_number(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
    if (s.empty()) return std::nullopt;
    if (s.front() == '+') s.remove_prefix(1);
    double v = 0.0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size() || !std::isfinite(v))
        return std::nullopt;
    return v;
}

// ─── Histogram ────────────────────────────────────────────────
// Variable-width bins from nearest-rank percentiles. Bins are
// closed-left/open-right: bin k covers [cuts[k-1], cuts[k]), with the
// first and last bins extended to -inf and +inf.

struct Histogram {
    std::vector<double> cuts;
    std::vector<std::int64_t> counts;
    std::vector<double> representatives;
    double min = 0.0;  // observed range
    double max = 0.0;
    int target_bins = 50;

    std::size_t bin_count() const { return counts.size(); }

    std::size_t bin_of(double x) const {
        return static_cast<std::size_t>(std::upper_bound(cuts.begin(), cuts.end(), x) - cuts.begin());
    }

    double lower(std::size_t k) const {
        return k == 0 ? -std::numeric_limits<double>::infinity() : cuts[k - 1];
    }
    double upper(std::size_t k) const {
        return k >= cuts.size() ? std::numeric_limits<double>::infinity() : cuts[k];
    }
};

inline Histogram build_histogram(std::vector<double> values, int bins) {
    if (values.empty()) throw DataError("build_histogram: empty values");
    if (bins < 1) throw DataError("build_histogram: bins must be positive");
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();

    Histogram h;
    h.target_bins = bins;
    h.min = values.front();
    h.max = values.back();
    for (int i = 1; i < bins; ++i) {
        // nearest rank of quantile i/bins (1-based)
        auto rank = static_cast<std::size_t>(
            std::ceil(static_cast<double>(i) * static_cast<double>(n) / bins - 1e-9));
        if (rank < 1) rank = 1;
        if (rank >= n) continue;
        const double lo = values[rank - 1];
        auto next = std::upper_bound(values.begin() + static_cast<std::ptrdiff_t>(rank - 1), values.end(), lo);
        if (next == values.end()) continue;
        const double cut = lo + (*next - lo) / 2.0;
        if (h.cuts.empty() || cut > h.cuts.back()) h.cuts.push_back(cut);
    }

    h.counts.assign(h.cuts.size() + 1, 0);
    std::vector<double> sums(h.cuts.size() + 1, 0.0);
    for (double v : values) {
        auto k = h.bin_of(v);
        ++h.counts[k];
        sums[k] += v;
    }
    h.representatives.resize(h.counts.size());
    for (std::size_t k = 0; k < h.counts.size(); ++k) {
        double rep = sums[k] / static_cast<double>(h.counts[k]);
        // keep the mean inside the bin despite rounding
        rep = std::clamp(rep, values.front(), values.back());
        if (k > 0) rep = std::max(rep, h.cuts[k - 1]);
        if (k < h.cuts.size() && rep >= h.cuts[k]) rep = std::nextafter(h.cuts[k], -INFINITY);
        h.representatives[k] = rep;
    }
    return h;
}

/// Bin index for x; values outside the fitted range clamp to the end bins.
inline std::size_t discretize(double x, const Histogram& h) { return h.bin_of(x); }

// ─── Schema ───────────────────────────────────────────────────

struct VariableSchema {
    std::string name;
    VariableKind kind = VariableKind::categorical;
    std::vector<std::string> categories;  // categorical domain, sorted
    Histogram histogram;                  // numerical domain

    bool categorical() const { return kind == VariableKind::categorical; }

    std::size_t domain_size() const {
        return categorical() ? categories.size() : histogram.bin_count();
    }

    std::optional<int> category_code(std::string_view token) const {
        auto it = std::lower_bound(categories.begin(), categories.end(), token);
        if (it == categories.end() || *it != token) return std::nullopt;
        return static_cast<int>(it - categories.begin());
    }

    /// Code of a stored cell: category index or bin index, -1 when missing.
    int code_of(double value) const {
        if (is_missing(value)) return -1;
        return categorical() ? static_cast<int>(value) : static_cast<int>(histogram.bin_of(value));
    }
};

class Schema {
public:
    Schema() = default;
    explicit Schema(std::vector<VariableSchema> vars) : vars_(std::move(vars)) {
        for (std::size_t i = 0; i < vars_.size(); ++i) {
            if (!index_.emplace(vars_[i].name, i).second)
                throw DataError("duplicate variable name: " + vars_[i].name);
            if (vars_[i].categorical() && vars_[i].categories.empty())
                throw DataError("empty categorical domain: " + vars_[i].name);
        }
    }

    std::size_t size() const { return vars_.size(); }
    const VariableSchema& operator[](std::size_t i) const { return vars_[i]; }
    const std::vector<VariableSchema>& variables() const { return vars_; }

    std::optional<std::size_t> index_of(std::string_view name) const {
        auto it = index_.find(std::string(name));
        if (it == index_.end()) return std::nullopt;
        return it->second;
    }

    std::size_t require(std::string_view name) const {
        if (auto i = index_of(name)) return *i;
        throw DataError("unknown variable: " + std::string(name));
    }

private:
    std::vector<VariableSchema> vars_;
    std::unordered_map<std::string, std::size_t> index_;
};

// ─── Log ──────────────────────────────────────────────────────
// Cells are stored per schema variable: a category index for categorical
// variables, the raw value for numerical ones (NaN when missing).

struct Event {
    std::vector<double> values;
};

struct Trace {
    std::string id;
    std::vector<Event> events;
};

struct EventLog {
    Schema schema;
    std::vector<Trace> traces;

    std::size_t trace_count() const { return traces.size(); }
    std::size_t event_count() const {
        std::size_t n = 0;
        for (const auto& t : traces) n += t.events.size();
        return n;
    }
};

/// Replace every numerical value by the representative of its bin.
inline EventLog discretized(EventLog log) {
    for (auto& trace : log.traces)
        for (auto& ev : trace.events)
            for (std::size_t v = 0; v < log.schema.size(); ++v) {
                const auto& var = log.schema[v];
                if (var.categorical() || is_missing(ev.values[v])) continue;
                ev.values[v] = var.histogram.representatives[var.histogram.bin_of(ev.values[v])];
            }
    return log;
}

// ─── Frequencies ──────────────────────────────────────────────

struct FrequencyTable {
    std::vector<std::vector<std::int64_t>> counts;  // [variable][code]
    std::vector<std::int64_t> totals;

    std::int64_t count(std::size_t var, int code) const {
        const auto& c = counts[var];
        return code >= 0 && static_cast<std::size_t>(code) < c.size() ? c[static_cast<std::size_t>(code)] : 0;
    }
    std::int64_t total(std::size_t var) const { return totals[var]; }
};

inline FrequencyTable frequencies(const EventLog& log) {
    FrequencyTable ft;
    ft.counts.resize(log.schema.size());
    ft.totals.assign(log.schema.size(), 0);
    for (std::size_t v = 0; v < log.schema.size(); ++v) ft.counts[v].assign(log.schema[v].domain_size(), 0);
    for (const auto& trace : log.traces)
        for (const auto& ev : trace.events)
            for (std::size_t v = 0; v < log.schema.size(); ++v) {
                int code = log.schema[v].code_of(ev.values[v]);
                if (code < 0) continue;
                ++ft.counts[v][static_cast<std::size_t>(code)];
                ++ft.totals[v];
            }
    return ft;
}

// ─── Building logs from raw cells ─────────────────────────────

using RawCell = std::variant<std::monostate, std::string, double>;

struct RawTrace {
    std::string id;
    std::vector<std::vector<RawCell>> events;  // one cell per variable column
};

struct RawLog {
    std::vector<std::string> variables;
    std::vector<RawTrace> traces;
};

struct LogOptions {
    int bins = 50;
    /// Declared kinds; undeclared columns are inferred (activity is always categorical).
    std::map<std::string, VariableKind> kinds;
    /// Declared categorical values, merged into the observed domain.
    std::map<std::string, std::vector<std::string>> categories;
    /// When set, reuse this schema's kinds, histograms and categories
    /// (unseen categories are appended).
    const Schema* base = nullptr;
};

namespace detail {

inline bool cell_missing(const RawCell& c) {
    if (std::holds_alternative<std::monostate>(c)) return true;
    if (auto* s = std::get_if<std::string>(&c)) return s->empty() || *s == kMissingToken;
    return false;
}

inline std::string cell_token(const RawCell& c) {
    if (auto* s = std::get_if<std::string>(&c)) return *s;
    if (auto* d = std::get_if<double>(&c)) return format_number(*d);
    return std::string(kMissingToken);
}

}  // namespace detail

inline EventLog build_log(const RawLog& raw, const LogOptions& opts = {}) {
    if (raw.traces.empty()) throw DataError("no traces");
    const std::size_t nv = raw.variables.size();

    std::vector<VariableSchema> vars(nv);
    for (std::size_t v = 0; v < nv; ++v) {
        auto& var = vars[v];
        var.name = raw.variables[v];
        const VariableSchema* base_var = nullptr;
        if (opts.base) {
            if (auto i = opts.base->index_of(var.name)) base_var = &(*opts.base)[*i];
        }
        if (base_var) {
            var.kind = base_var->kind;
        } else if (auto it = opts.kinds.find(var.name); it != opts.kinds.end()) {
            var.kind = it->second;
        } else if (var.name == "activity") {
            var.kind = VariableKind::categorical;
        } else {
            bool numeric = true;
            bool any = false;
            for (const auto& t : raw.traces)
                for (const auto& e : t.events) {
                    const auto& c = e[v];
                    if (detail::cell_missing(c)) continue;
                    any = true;
                    if (auto* s = std::get_if<std::string>(&c); s && !parse_number(*s)) numeric = false;
                }
            var.kind = numeric && any ? VariableKind::numerical : VariableKind::categorical;
        }
    }

    std::vector<std::vector<double>> numeric_values(nv);
    std::vector<std::vector<std::string>> tokens(nv);
    auto numeric_cell = [&](const RawCell& c, std::size_t v) -> double {
        if (detail::cell_missing(c)) return kMissing;
        if (auto* d = std::get_if<double>(&c)) return *d;
        const auto& s = std::get<std::string>(c);
        auto parsed = parse_number(s);
        if (!parsed) throw DataError("bad cell: '" + s + "' in numerical column " + raw.variables[v]);
        return *parsed;
    };

    for (const auto& t : raw.traces) {
        if (t.events.empty()) throw DataError("empty trace: " + t.id);
        for (const auto& e : t.events) {
            if (e.size() != nv) throw DataError("row width mismatch in trace " + t.id);
            for (std::size_t v = 0; v < nv; ++v) {
                if (vars[v].categorical()) {
                    tokens[v].push_back(detail::cell_missing(e[v]) ? std::string(kMissingToken)
                                                                   : detail::cell_token(e[v]));
                } else {
                    double x = numeric_cell(e[v], v);
                    if (!is_missing(x)) numeric_values[v].push_back(x);
                }
            }
        }
    }

    for (std::size_t v = 0; v < nv; ++v) {
        auto& var = vars[v];
        const VariableSchema* base_var = nullptr;
        if (opts.base) {
            if (auto i = opts.base->index_of(var.name)) base_var = &(*opts.base)[*i];
        }
        if (var.categorical()) {
            std::vector<std::string> dom = base_var ? base_var->categories : std::vector<std::string>{};
            auto seen = tokens[v];
            if (auto it = opts.categories.find(var.name); it != opts.categories.end())
                seen.insert(seen.end(), it->second.begin(), it->second.end());
            std::sort(seen.begin(), seen.end());
            seen.erase(std::unique(seen.begin(), seen.end()), seen.end());
            for (auto& s : seen)
                if (!std::binary_search(dom.begin(), dom.end(), s)) dom.push_back(s);
            std::sort(dom.begin(), dom.end());
            dom.erase(std::unique(dom.begin(), dom.end()), dom.end());
            var.categories = std::move(dom);
        } else if (base_var) {
            var.histogram = base_var->histogram;
        } else if (!numeric_values[v].empty()) {
            var.histogram = build_histogram(numeric_values[v], opts.bins);
        } else {
            var.histogram = build_histogram({0.0}, opts.bins);
            var.histogram.counts = {0};
        }
    }

    EventLog log;
    log.schema = Schema(std::move(vars));
    std::unordered_map<std::string, bool> ids;
    for (const auto& t : raw.traces) {
        if (!ids.emplace(t.id, true).second) throw DataError("duplicate trace id: " + t.id);
        Trace trace;
        trace.id = t.id;
        for (const auto& e : t.events) {
            Event ev;
            ev.values.resize(nv);
            for (std::size_t v = 0; v < nv; ++v) {
                const auto& var = log.schema[v];
                if (var.categorical()) {
                    auto tok = detail::cell_missing(e[v]) ? std::string(kMissingToken) : detail::cell_token(e[v]);
                    ev.values[v] = static_cast<double>(*var.category_code(tok));
                } else {
                    ev.values[v] = numeric_cell(e[v], v);
                }
            }
            trace.events.push_back(std::move(ev));
        }
        log.traces.push_back(std::move(trace));
    }
    return log;
}

// ─── CSV ──────────────────────────────────────────────────────
// trace_id,event_index,<variables...>; empty cells are missing values.

namespace detail {

inline std::vector<std::string> split_csv_record(std::istream& in, bool& ok) {
    std::vector<std::string> fields;
    std::string field;
    bool quoted = false;
    bool any = false;
    char ch;
    while (in.get(ch)) {
        any = true;
        if (quoted) {
            if (ch == '"') {
                if (in.peek() == '"') {
                    in.get(ch);
                    field.push_back('"');
                } else {
                    quoted = false;
                }
            } else {
                field.push_back(ch);
            }
        } else if (ch == '"') {
            quoted = true;
        } else if (ch == ',') {
            fields.push_back(std::move(field));
            field.clear();
        } else if (ch == '\n') {
            break;
        } else if (ch != '\r') {
            field.push_back(ch);
        }
    }
    ok = any;
    if (any) fields.push_back(std::move(field));
    return fields;
}

inline std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

}  // namespace detail

inline EventLog parse_csv(std::istream& in, const LogOptions& opts = {}) {
    bool ok = false;
    auto header = detail::split_csv_record(in, ok);
    if (!ok || (header.size() == 1 && header[0].empty())) throw DataError("empty input");
    if (header.size() < 2 || header[0] != "trace_id" || header[1] != "event_index")
        throw DataError("CSV header must start with trace_id,event_index");

    RawLog raw;
    raw.variables.assign(header.begin() + 2, header.end());
    std::unordered_map<std::string, std::size_t> trace_pos;
    std::vector<std::map<long long, std::vector<RawCell>>> rows;

    std::size_t line = 1;
    while (true) {
        auto rec = detail::split_csv_record(in, ok);
        if (!ok) break;
        ++line;
        if (rec.size() == 1 && rec[0].empty()) continue;
        if (rec.size() != header.size())
            throw DataError("line " + std::to_string(line) + ": expected " + std::to_string(header.size()) +
                            " fields, got " + std::to_string(rec.size()));
        auto idx = parse_number(rec[1]);
        if (!idx || *idx != std::floor(*idx)) throw DataError("line " + std::to_string(line) + ": bad event_index");
        auto [it, inserted] = trace_pos.emplace(rec[0], rows.size());
        if (inserted) {
            rows.emplace_back();
            raw.traces.push_back(RawTrace{rec[0], {}});
        }
        std::vector<RawCell> cells;
        for (std::size_t i = 2; i < rec.size(); ++i) {
            if (rec[i].empty()) cells.emplace_back(std::monostate{});
            else cells.emplace_back(std::move(rec[i]));
        }
        if (!rows[it->second].emplace(static_cast<long long>(*idx), std::move(cells)).second)
            throw DataError("duplicate (trace_id, event_index): (" + rec[0] + ", " + rec[1] + ")");
    }
    if (raw.traces.empty()) throw DataError("empty input");
    for (std::size_t t = 0; t < rows.size(); ++t)
        for (auto& [_, cells] : rows[t]) raw.traces[t].events.push_back(std::move(cells));
    return build_log(raw, opts);
}

inline EventLog parse_csv(std::string_view text, const LogOptions& opts = {}) {
    std::istringstream in{std::string(text)};
    return parse_csv(in, opts);
}

inline std::string serialize_csv(const EventLog& log) {
    std::string out = "trace_id,event_index";
    for (const auto& var : log.schema.variables()) out += "," + detail::csv_escape(var.name);
    out += "\n";
    for (const auto& trace : log.traces) {
        for (std::size_t i = 0; i < trace.events.size(); ++i) {
            out += detail::csv_escape(trace.id) + "," + std::to_string(i);
            for (std::size_t v = 0; v < log.schema.size(); ++v) {
                const auto& var = log.schema[v];
                double x = trace.events[i].values[v];
                out += ",";
                if (var.categorical()) {
                    const auto& tok = var.categories[static_cast<std::size_t>(x)];
                    if (tok != kMissingToken) out += detail::csv_escape(tok);
                } else if (!is_missing(x)) {
                    out += format_number(x);
                }
            }
            out += "\n";
        }
    }
    return out;
}

/// Human-readable token for a stored cell.
inline std::string cell_to_string(const VariableSchema& var, double x) {
    if (var.categorical()) return var.categories[static_cast<std::size_t>(x)];
    return is_missing(x) ? std::string(kMissingToken) : format_number(x);
}

/// Raw cells of a log, e.g. for re-encoding it against another schema.
inline RawLog to_raw(const EventLog& log) {
    RawLog raw;
    for (const auto& var : log.schema.variables()) raw.variables.push_back(var.name);
    for (const auto& trace : log.traces) {
        RawTrace rt;
        rt.id = trace.id;
        for (const auto& ev : trace.events) {
            std::vector<RawCell> cells;
            for (std::size_t v = 0; v < log.schema.size(); ++v) {
                const auto& var = log.schema[v];
                const double x = ev.values[v];
                if (var.categorical()) cells.emplace_back(var.categories[static_cast<std::size_t>(x)]);
                else if (is_missing(x)) cells.emplace_back(std::monostate{});
                else cells.emplace_back(x);
            }
            rt.events.push_back(std::move(cells));
        }
        raw.traces.push_back(std::move(rt));
    }
    return raw;
}

/// The same log encoded with another log's kinds, categories and histograms.
inline EventLog rebase(const EventLog& log, const Schema& base) {
    LogOptions opts;
    opts.base = &base;
    return build_log(to_raw(log), opts);
}

}  // namespace moody
