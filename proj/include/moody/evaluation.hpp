#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "moody/log_model.hpp"
#include "moody/rule_model.hpp"

namespace moody {

struct PredictionRecord {
    std::string trace_id;
    std::size_t event_index = 0;
    std::size_t variable = 0;
    double actual = 0.0;     // category code or raw value
    double predicted = 0.0;
    std::optional<std::size_t> rule;  // index into the model's canonical rules; empty for fallback
};

/// Training statistics behind predictions and fallbacks. Variables and
/// categories are matched by name, so the predicted log may use a schema
/// with more categories than the training log.
class Predictor {
public:
    explicit Predictor(const EventLog& train) : schema_(train.schema), freq_(frequencies(train)) {
        const std::size_t nv = schema_.size();
        majority_.assign(nv, 0);
        mean_.assign(nv, 0.0);
        for (std::size_t v = 0; v < nv; ++v) {
            if (schema_[v].categorical()) {
                const auto& c = freq_.counts[v];
                majority_[v] = static_cast<int>(std::max_element(c.begin(), c.end()) - c.begin());
                continue;
            }
            double sum = 0.0;
            std::size_t n = 0;
            for (const auto& t : train.traces)
                for (const auto& ev : t.events)
                    if (!is_missing(ev.values[v])) {
                        sum += ev.values[v];
                        ++n;
                    }
            mean_[v] = n ? sum / static_cast<double>(n) : 0.0;
        }
    }

    const Schema& schema() const { return schema_; }

    /// Majority category (as a code of `var`, -1 if unknown there) or training mean.
    double fallback(const VariableSchema& var) const {
        const auto i = schema_.index_of(var.name);
        if (!i) return var.categorical() ? -1.0 : 0.0;
        if (!var.categorical()) return mean_[*i];
        auto code = var.category_code(schema_[*i].categories[static_cast<std::size_t>(majority_[*i])]);
        return code ? static_cast<double>(*code) : -1.0;
    }

    /// Training frequency of a stored value of `var` (category code or raw number).
    std::int64_t weight(const VariableSchema& var, double value) const {
        const auto i = schema_.index_of(var.name);
        if (!i || is_missing(value)) return 0;
        const auto& tv = schema_[*i];
        if (!var.categorical()) return freq_.count(*i, tv.code_of(value));
        if (value < 0) return 0;
        auto code = tv.category_code(var.categories[static_cast<std::size_t>(value)]);
        return code ? freq_.count(*i, *code) : 0;
    }

    /// Concrete value predicted by one firing rule, bound against `schema`.
    std::optional<double> rule_value(const BoundRule& br, const Schema& schema, const Event* prev) const {
        const auto& bu = br.update;
        const auto set = bu.predict(prev);
        if (set.empty()) return std::nullopt;
        const auto& var = schema[bu.var];
        if (var.categorical()) {
            int best = -1;
            for (int c : set.to_vector())
                if (best < 0 || weight(var, c) > weight(var, best)) best = c;
            return static_cast<double>(best);
        }
        if (auto p = bu.point_value(prev)) return p;
        if (bu.type == UpdateType::set_member) {
            std::optional<double> best;
            std::int64_t best_weight = -1;
            for (const auto& c : br.rule->update.constants) {
                const double x = std::get<double>(c);
                if (const auto w = weight(var, x); w > best_weight) {
                    best = x;
                    best_weight = w;
                }
            }
            return best;
        }
        // ranges resolve to the frequency-weighted representative of their bins
        const auto& h = var.histogram;
        double num = 0.0, den = 0.0;
        for (int k : set.to_vector()) {
            const double rep = h.representatives[static_cast<std::size_t>(k)];
            const auto n = static_cast<double>(weight(var, rep));
            num += n * rep;
            den += n;
        }
        if (den > 0.0) return num / den;
        return 0.5 * (h.representatives[static_cast<std::size_t>(set.lo)] +
                      h.representatives[static_cast<std::size_t>(set.hi)]);
    }

private:
    Schema schema_;
    FrequencyTable freq_;
    std::vector<int> majority_;
    std::vector<double> mean_;
};

/// Predict every non-missing cell of a log from the observed values of
/// the same event and its predecessor. Among firing rules the value with
/// the highest training frequency wins, earlier canonical rules on ties.
inline std::vector<PredictionRecord> predict(const Model& model, const EventLog& log, const Predictor& stats) {
    const auto& schema = log.schema;
    auto bound = bind(model, schema);
    std::vector<PredictionRecord> out;
    for (const auto& trace : log.traces)
        for (std::size_t i = 0; i < trace.events.size(); ++i) {
            const Event& ev = trace.events[i];
            const Event* prev = i ? &trace.events[i - 1] : nullptr;
            for (std::size_t v = 0; v < schema.size(); ++v) {
                const double actual = ev.values[v];
                if (is_missing(actual)) continue;
                PredictionRecord rec{trace.id, i, v, actual, stats.fallback(schema[v]), std::nullopt};
                std::int64_t best_count = -1;
                for (std::size_t r = 0; r < bound.size(); ++r) {
                    const auto& br = bound[r];
                    if (br.update.var != v || !br.condition.fires(prev, ev)) continue;
                    auto value = stats.rule_value(br, schema, prev);
                    if (!value) continue;
                    const auto n = stats.weight(schema[v], *value);
                    if (n > best_count) {
                        best_count = n;
                        rec.predicted = *value;
                        rec.rule = r;
                    }
                }
                out.push_back(std::move(rec));
            }
        }
    return out;
}

inline std::vector<PredictionRecord> predict(const Model& model, const EventLog& log) {
    return predict(model, log, Predictor(log));
}

// ─── Metrics ──────────────────────────────────────────────────

/// Macro-averaged F1 over the classes that occur as actual or predicted values.
inline double macro_f1(const std::vector<std::pair<double, double>>& actual_predicted) {
    std::map<double, std::int64_t> tp, fp, fn;
    std::set<double> classes;
    for (const auto& [a, p] : actual_predicted) {
        classes.insert(a);
        classes.insert(p);
        if (a == p) {
            ++tp[a];
        } else {
            ++fp[p];
            ++fn[a];
        }
    }
    if (classes.empty()) return 0.0;
    double sum = 0.0;
    for (double c : classes) {
        const double denom = static_cast<double>(2 * tp[c] + fp[c] + fn[c]);
        sum += denom > 0.0 ? 2.0 * static_cast<double>(tp[c]) / denom : 0.0;
    }
    return sum / static_cast<double>(classes.size());
}

inline double rmse(const std::vector<std::pair<double, double>>& actual_predicted) {
    if (actual_predicted.empty()) return 0.0;
    double ss = 0.0;
    for (const auto& [a, p] : actual_predicted) ss += (a - p) * (a - p);
    return std::sqrt(ss / static_cast<double>(actual_predicted.size()));
}

inline std::optional<double> median(std::vector<double> xs) {
    if (xs.empty()) return std::nullopt;
    std::sort(xs.begin(), xs.end());
    const std::size_t n = xs.size();
    return n % 2 ? xs[n / 2] : 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

struct MetricsReport {
    std::map<std::string, double> f1;    // macro F1 per categorical variable
    std::map<std::string, double> rmse;  // RMSE per numerical variable
    std::optional<double> median_f1;
    std::optional<double> median_rmse;
    std::size_t rule_terms = 0;
    std::optional<double> runtime_seconds;
};

inline MetricsReport metrics(const std::vector<PredictionRecord>& records, const Schema& schema,
                             std::size_t rule_terms = 0) {
    std::vector<std::vector<std::pair<double, double>>> pairs(schema.size());
    for (const auto& r : records) pairs[r.variable].emplace_back(r.actual, r.predicted);
    MetricsReport rep;
    rep.rule_terms = rule_terms;
    std::vector<double> f1s, rmses;
    for (std::size_t v = 0; v < schema.size(); ++v) {
        if (pairs[v].empty()) continue;
        if (schema[v].categorical()) {
            f1s.push_back(rep.f1[schema[v].name] = macro_f1(pairs[v]));
        } else {
            rmses.push_back(rep.rmse[schema[v].name] = rmse(pairs[v]));
        }
    }
    rep.median_f1 = median(f1s);
    rep.median_rmse = median(rmses);
    return rep;
}

inline MetricsReport evaluate(const Model& model, const EventLog& test, const Predictor& stats) {
    return metrics(predict(model, test, stats), test.schema, rule_term_count(model));
}

// ─── Splits and per-rule generalization ───────────────────────

/// Partition traces at random: `fraction` of them (rounded) go to the
/// second part, the rest to the first. Trace order is kept in both.
inline std::pair<EventLog, EventLog> split_by_traces(const EventLog& log, double fraction, std::uint64_t seed) {
    if (!(fraction >= 0.0 && fraction <= 1.0)) throw std::invalid_argument("split fraction must lie in [0, 1]");
    std::vector<std::size_t> idx(log.traces.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::mt19937_64 gen(seed);
    std::shuffle(idx.begin(), idx.end(), gen);
    const auto n_test = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(idx.size())));
    std::vector<bool> in_test(idx.size(), false);
    for (std::size_t k = 0; k < n_test; ++k) in_test[idx[k]] = true;
    EventLog train{log.schema, {}}, test{log.schema, {}};
    for (std::size_t i = 0; i < log.traces.size(); ++i) (in_test[i] ? test : train).traces.push_back(log.traces[i]);
    return {std::move(train), std::move(test)};
}

struct RuleGeneralization {
    Rule rule;
    bool categorical = true;  // metric is macro F1 when true, RMSE otherwise
    std::size_t train_support = 0;
    std::size_t test_support = 0;
    std::optional<double> train_metric;  // absent when the rule never fires
    std::optional<double> test_metric;
};

/// Metrics of each rule on its own, restricted to the events where it fires.
inline std::vector<RuleGeneralization> per_rule_generalization(const Model& model, const EventLog& train,
                                                                const EventLog& test) {
    const Predictor stats(train);
    std::vector<RuleGeneralization> out;
    for (const auto& rule : model.rules()) {
        RuleGeneralization g;
        g.rule = rule;
        auto run = [&](const EventLog& log, std::size_t& support) -> std::optional<double> {
            auto br = bind(rule, log.schema);
            std::vector<std::pair<double, double>> pairs;
            for (const auto& trace : log.traces)
                for (std::size_t i = 0; i < trace.events.size(); ++i) {
                    const Event& ev = trace.events[i];
                    const Event* prev = i ? &trace.events[i - 1] : nullptr;
                    const double actual = ev.values[br.update.var];
                    if (is_missing(actual) || !br.condition.fires(prev, ev)) continue;
                    if (auto value = stats.rule_value(br, log.schema, prev)) pairs.emplace_back(actual, *value);
                }
            support = pairs.size();
            if (pairs.empty()) return std::nullopt;
            return g.categorical ? macro_f1(pairs) : rmse(pairs);
        };
        g.categorical = train.schema[train.schema.require(rule.update.variable)].categorical();
        g.train_metric = run(train, g.train_support);
        g.test_metric = run(test, g.test_support);
        out.push_back(std::move(g));
    }
    return out;
}

}  // namespace moody
