#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <future>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <tuple>
#include <vector>

#include "moody/log_model.hpp"
#include "moody/mdl_codec.hpp"
#include "moody/rule_model.hpp"
#include "moody/scorer.hpp"

namespace moody {

struct SearchConfig {
    int n_c = 50;  // conditions per operator
    int n_u = 1;   // update rules per type and target
    std::optional<int> max_iterations;  // cap on outer passes
    std::uint64_t seed = 0;             // the search itself is deterministic
    int workers = 1;
    /// Stop evaluating a variable's queue once the head's estimate is no
    /// better than the best exact score seen. Disable for exhaustive search.
    bool prune = true;
    CodecConfig codec;
};

struct Candidate {
    Rule rule;
    std::int64_t support = 0;
    double gain = 0.0;      // optimistic gain; estimate = L(D, M) - gain
    double length = 0.0;    // L(c) + L(u)

    double estimate(double current) const { return current - gain; }
};

struct MiningResult {
    Model model;
    std::vector<double> score_trace;  // L(D, M) after each accepted rule, starting at the empty model
    std::size_t evaluated = 0;        // exact score evaluations
};

// ─── Candidate conditions ─────────────────────────────────────

namespace detail {

struct Ranked {
    Condition condition;
    std::int64_t rank = 0;
};

inline bool condition_less(const Condition& a, const Condition& b) {
    return std::tie(a.variable, a.op, a.constants) < std::tie(b.variable, b.op, b.constants);
}

inline void keep_top(std::vector<Ranked>& pool, int n, std::vector<Condition>& out) {
    std::sort(pool.begin(), pool.end(), [](const Ranked& a, const Ranked& b) {
        if (a.rank != b.rank) return a.rank > b.rank;
        return condition_less(a.condition, b.condition);
    });
    for (std::size_t i = 0; i < pool.size() && static_cast<int>(i) < n; ++i) out.push_back(pool[i].condition);
}

inline Constant constant_for(const VariableSchema& var, double x) {
    if (var.categorical()) return var.categories[static_cast<std::size_t>(x)];
    return x;
}

inline bool representable(double x, int precision) { return round_significant(x, precision) == x; }

}  // namespace detail

/// The n_c most frequent (variable, value) combinations for each operator.
inline std::vector<Condition> generate_conditions(const EventLog& log, int n_c, int precision = 3) {
    const auto& schema = log.schema;
    std::vector<std::map<double, std::int64_t>> values(schema.size());
    std::vector<std::map<std::pair<double, double>, std::int64_t>> transitions(schema.size());
    std::vector<std::vector<double>> numeric(schema.size());

    for (const auto& trace : log.traces)
        for (std::size_t i = 0; i < trace.events.size(); ++i) {
            const auto& ev = trace.events[i];
            for (std::size_t v = 0; v < schema.size(); ++v) {
                const auto& var = schema[v];
                const double x = ev.values[v];
                if (is_missing(x)) continue;
                if (!var.categorical()) numeric[v].push_back(x);
                const bool usable = var.categorical() ? var.categories[static_cast<std::size_t>(x)] != kMissingToken
                                                      : detail::representable(x, precision);
                if (!usable) continue;
                ++values[v][x];
                if (i > 0) {
                    const double p = trace.events[i - 1].values[v];
                    if (is_missing(p)) continue;
                    if (var.categorical() ? var.categories[static_cast<std::size_t>(p)] == kMissingToken
                                          : !detail::representable(p, precision))
                        continue;
                    ++transitions[v][{p, x}];
                }
            }
        }

    std::vector<Condition> out;
    for (auto op : {ConditionOp::eq, ConditionOp::ne}) {
        std::vector<detail::Ranked> pool;
        for (std::size_t v = 0; v < schema.size(); ++v)
            for (const auto& [x, n] : values[v])
                pool.push_back({make_condition(schema[v].name, op, {detail::constant_for(schema[v], x)}, precision), n});
        detail::keep_top(pool, n_c, out);
    }
    for (auto op : {ConditionOp::le, ConditionOp::ge}) {
        std::vector<detail::Ranked> pool;
        for (std::size_t v = 0; v < schema.size(); ++v) {
            if (schema[v].categorical() || numeric[v].empty()) continue;
            auto sorted = numeric[v];
            std::sort(sorted.begin(), sorted.end());
            const auto n = static_cast<std::int64_t>(sorted.size());
            std::vector<double> thresholds;
            for (double cut : schema[v].histogram.cuts) thresholds.push_back(round_significant(cut, precision));
            std::sort(thresholds.begin(), thresholds.end());
            thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
            for (double t : thresholds) {
                std::int64_t s = op == ConditionOp::le
                                     ? std::upper_bound(sorted.begin(), sorted.end(), t) - sorted.begin()
                                     : sorted.end() - std::lower_bound(sorted.begin(), sorted.end(), t);
                pool.push_back({make_condition(schema[v].name, op, {t}, precision), std::min(s, n - s)});
            }
        }
        detail::keep_top(pool, n_c, out);
    }
    {
        std::vector<detail::Ranked> pool;
        for (std::size_t v = 0; v < schema.size(); ++v)
            for (const auto& [pc, n] : transitions[v])
                pool.push_back({make_condition(schema[v].name, ConditionOp::transition,
                                               {detail::constant_for(schema[v], pc.first),
                                                detail::constant_for(schema[v], pc.second)},
                                               precision),
                                n});
        detail::keep_top(pool, n_c, out);
    }
    return out;
}

// ─── Estimates ────────────────────────────────────────────────

/// Estimated value-stream length of a rule covering `support` events whose
/// prediction allows values with the given frequencies: codes are handed
/// out to values by increasing frequency.
inline double estimate_value_stream(std::vector<std::int64_t> predicted_freqs, std::int64_t support) {
    std::int64_t total = 0;
    for (auto f : predicted_freqs) total += f;
    if (total <= 0) return 0.0;
    std::sort(predicted_freqs.begin(), predicted_freqs.end());
    double bits = 0.0;
    std::int64_t b = support;
    for (auto f : predicted_freqs) {
        if (b <= 0) break;
        if (f == 0) continue;
        const std::int64_t db = std::min(b, f);
        bits -= static_cast<double>(db) * std::log2(static_cast<double>(f) / static_cast<double>(total));
        b -= db;
    }
    return bits;
}

namespace detail {

inline std::vector<std::int64_t> set_freqs(const ScoringContext& ctx, std::size_t var, const ValueSet& s) {
    std::vector<std::int64_t> out;
    if (s.list) {
        for (int c : *s.list) out.push_back(ctx.freq().count(var, c));
    } else {
        for (int c = s.lo; c <= s.hi; ++c) out.push_back(ctx.freq().count(var, c));
    }
    return out;
}

inline std::vector<std::size_t> covered_events(const ScoringContext& ctx, const BoundCondition& bc) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < ctx.event_count(); ++i)
        if (bc.fires(ctx.prev(i), ctx.event(i))) out.push_back(i);
    return out;
}

/// Value-stream estimate for a bound rule over its covered events.
inline double estimate_cv(const ScoringContext& ctx, const BoundRule& br, std::span<const std::size_t> covered) {
    if (!br.update.relative())
        return estimate_value_stream(set_freqs(ctx, br.update.var, br.update.predict(nullptr)),
                                     static_cast<std::int64_t>(covered.size()));
    double bits = 0.0;
    for (auto i : covered) {
        auto p = br.update.predict(ctx.prev(i));
        if (!p.empty()) bits += estimate_value_stream(set_freqs(ctx, br.update.var, p), 1);
    }
    return bits;
}

/// Optimistic gain of adding a rule that alone predicts its target.
inline double optimistic_gain(const ScoringContext& ctx, const BoundRule& br, std::span<const std::size_t> covered,
                              double length) {
    const double fallback = static_cast<double>(covered.size()) * ctx.mean_fallback_bits(br.update.var);
    return fallback - estimate_cv(ctx, br, covered) - length;
}

}  // namespace detail

/// Estimated L(D, M + {r}) given the current exact score L(D, M).
inline double estimate_total(const ScoringContext& ctx, double current_score, const Rule& r,
                             const CodecConfig& cfg = {}) {
    auto br = bind(r, ctx.schema());
    auto covered = detail::covered_events(ctx, br.condition);
    return current_score - detail::optimistic_gain(ctx, br, covered, rule_length(r, ctx.schema(), cfg));
}

// ─── Candidate updates ────────────────────────────────────────

namespace detail {

/// Exact stand-alone compression of an update at the covered events,
/// relative to fallback coding, minus the update's own length.
inline double local_gain(const ScoringContext& ctx, const UpdateRule& u, std::span<const std::size_t> covered,
                         const CodecConfig& cfg) {
    auto bu = bind(u, ctx.schema());
    double saved = 0.0;
    std::int64_t checks = 0, crosses = 0;
    for (auto i : covered) {
        const int x = ctx.code(bu.var, i);
        if (x < 0) continue;
        auto p = bu.predict(ctx.prev(i));
        if (p.empty()) continue;
        if (p.contains(x)) {
            saved += ctx.fallback_bits(bu.var, x) - ctx.set_value_bits(bu.var, x, p);
            ++checks;
        } else {
            ++crosses;
        }
    }
    return saved - prequential_length(checks, crosses, cfg.epsilon) - update_length(u, ctx.schema(), cfg);
}

template <typename T>
std::vector<T> most_frequent(const std::map<T, std::int64_t>& counts, std::size_t n) {
    std::vector<std::pair<T, std::int64_t>> items(counts.begin(), counts.end());
    std::stable_sort(items.begin(), items.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
    std::vector<T> out;
    for (std::size_t i = 0; i < items.size() && i < n; ++i) out.push_back(items[i].first);
    return out;
}

inline double percentile(std::vector<double> xs, double q) {
    std::sort(xs.begin(), xs.end());
    auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(xs.size())));
    rank = std::clamp<std::size_t>(rank, 1, xs.size());
    return xs[rank - 1];
}

inline std::vector<UpdateRule> updates_for_target(const ScoringContext& ctx, std::size_t t,
                                                  std::span<const std::size_t> covered, int n_u,
                                                  const CodecConfig& cfg) {
    const auto& var = ctx.schema()[t];
    const int p = cfg.precision;
    std::map<double, std::int64_t> value_counts;
    std::map<double, std::int64_t> delta_counts, ratio_counts;
    std::vector<double> covered_values, deltas;
    for (auto i : covered) {
        const double x = ctx.event(i).values[t];
        if (is_missing(x)) continue;
        if (var.categorical()) {
            ++value_counts[x];
            continue;
        }
        const double rx = round_significant(x, p);
        ++value_counts[rx];
        covered_values.push_back(x);
        if (const Event* prev = ctx.prev(i); prev && !is_missing(prev->values[t])) {
            const double px = prev->values[t];
            deltas.push_back(x - px);
            ++delta_counts[round_significant(x - px, p)];
            if (px != 0.0) ++ratio_counts[round_significant(x / px, p)];
        }
    }
    if (value_counts.empty()) return {};

    std::vector<std::pair<UpdateType, std::vector<UpdateRule>>> pools;
    auto constant = [&](double x) -> Constant { return detail::constant_for(var, x); };
    const std::size_t pool_size = static_cast<std::size_t>(std::max(n_u, 3));

    auto ordered = most_frequent(value_counts, 8);
    {
        std::vector<UpdateRule> pool;
        for (std::size_t k = 0; k < std::min(pool_size, ordered.size()); ++k)
            pool.push_back(make_update(var.name, UpdateType::point_assign, {constant(ordered[k])}, p));
        pools.emplace_back(UpdateType::point_assign, std::move(pool));
    }
    {
        std::vector<UpdateRule> pool;
        std::vector<Constant> prefix;
        for (std::size_t k = 0; k < ordered.size(); ++k) {
            prefix.push_back(constant(ordered[k]));
            if (prefix.size() >= 2) pool.push_back(make_update(var.name, UpdateType::set_member, prefix, p));
        }
        pools.emplace_back(UpdateType::set_member, std::move(pool));
    }
    if (!var.categorical()) {
        auto interval_pool = [&](UpdateType type, const std::vector<double>& xs) {
            std::vector<UpdateRule> pool;
            if (xs.empty()) return pool;
            for (auto [lo_q, hi_q] : {std::pair{0.0, 1.0}, std::pair{0.05, 0.95}}) {
                double lo = round_significant(percentile(xs, lo_q), p);
                double hi = round_significant(percentile(xs, hi_q), p);
                if (lo_q == 0.0) {
                    lo = round_significant(*std::min_element(xs.begin(), xs.end()), p);
                    hi = round_significant(*std::max_element(xs.begin(), xs.end()), p);
                }
                if (lo > hi) std::swap(lo, hi);
                auto u = make_update(var.name, type, {lo, hi}, p);
                if (std::find(pool.begin(), pool.end(), u) == pool.end()) pool.push_back(std::move(u));
            }
            return pool;
        };
        pools.emplace_back(UpdateType::interval_assign, interval_pool(UpdateType::interval_assign, covered_values));
        pools.emplace_back(UpdateType::relative_interval, interval_pool(UpdateType::relative_interval, deltas));
        std::vector<UpdateRule> rel, mul;
        for (double d : most_frequent(delta_counts, pool_size))
            rel.push_back(make_update(var.name, UpdateType::relative_point, {d}, p));
        for (double r : most_frequent(ratio_counts, pool_size))
            if (r != 0.0) mul.push_back(make_update(var.name, UpdateType::multiplicative, {r}, p));
        pools.emplace_back(UpdateType::relative_point, std::move(rel));
        pools.emplace_back(UpdateType::multiplicative, std::move(mul));
    }

    std::vector<UpdateRule> out;
    for (auto& [type, pool] : pools) {
        std::vector<std::pair<double, std::size_t>> scored;
        for (std::size_t k = 0; k < pool.size(); ++k) scored.emplace_back(local_gain(ctx, pool[k], covered, cfg), k);
        std::stable_sort(scored.begin(), scored.end(), [&](const auto& a, const auto& b) {
            if (a.first != b.first) return a.first > b.first;
            return pool[a.second].constants < pool[b.second].constants;
        });
        for (std::size_t k = 0; k < scored.size() && static_cast<int>(k) < n_u; ++k)
            out.push_back(pool[scored[k].second]);
    }
    return out;
}

}  // namespace detail

/// The n_u most compressing update rules per type and target variable,
/// restricted to the events where c fires.
inline std::vector<UpdateRule> generate_updates(const ScoringContext& ctx, const Condition& c, int n_u,
                                                const CodecConfig& cfg = {}) {
    auto bc = bind(c, ctx.schema());
    auto covered = detail::covered_events(ctx, bc);
    if (covered.empty()) throw std::invalid_argument("generate_updates: condition has zero support");
    std::vector<UpdateRule> out;
    for (std::size_t t = 0; t < ctx.schema().size(); ++t) {
        if (t == bc.var) continue;
        auto us = detail::updates_for_target(ctx, t, covered, n_u, cfg);
        out.insert(out.end(), std::make_move_iterator(us.begin()), std::make_move_iterator(us.end()));
    }
    return out;
}

inline std::vector<UpdateRule> generate_updates(const EventLog& log, const Condition& c, int n_u,
                                                const CodecConfig& cfg = {}) {
    ScoringContext ctx(log);
    return generate_updates(ctx, c, n_u, cfg);
}

/// All candidate rules for a log, grouped by target variable and ordered
/// by decreasing optimistic gain (rule key breaks ties).
inline std::vector<std::vector<Candidate>> generate_candidates(const ScoringContext& ctx, const SearchConfig& cfg) {
    const auto& schema = ctx.schema();
    std::vector<std::vector<Candidate>> by_target(schema.size());
    for (const auto& c : generate_conditions(ctx.log(), cfg.n_c, cfg.codec.precision)) {
        auto bc = bind(c, schema);
        auto covered = detail::covered_events(ctx, bc);
        if (covered.empty()) continue;
        const double cond_len = condition_length(c, schema, cfg.codec);
        for (std::size_t t = 0; t < schema.size(); ++t) {
            if (t == bc.var) continue;
            for (auto& u : detail::updates_for_target(ctx, t, covered, cfg.n_u, cfg.codec)) {
                Candidate cand;
                cand.length = cond_len + update_length(u, schema, cfg.codec);
                cand.rule = make_rule(c, std::move(u));
                cand.support = static_cast<std::int64_t>(covered.size());
                auto br = bind(cand.rule, schema);
                cand.gain = detail::optimistic_gain(ctx, br, covered, cand.length);
                by_target[t].push_back(std::move(cand));
            }
        }
    }
    for (auto& group : by_target)
        std::sort(group.begin(), group.end(), [](const Candidate& a, const Candidate& b) {
            if (a.gain != b.gain) return a.gain > b.gain;
            return rule_less(a.rule, b.rule);
        });
    return by_target;
}

// ─── Greedy search ────────────────────────────────────────────

namespace detail {

class SearchState {
public:
    SearchState(const ScoringContext& ctx, const CodecConfig& codec) : ctx_(ctx), codec_(codec) {
        costs_.resize(ctx.schema().size());
        for (std::size_t v = 0; v < costs_.size(); ++v) costs_[v] = variable_cost(ctx, v, {});
        score_ = score_with(costs_, rule_lengths_, model_.size());
    }

    const Model& model() const { return model_; }
    double score() const { return score_; }

    /// Exact L(D, M + {r}) computed from per-variable costs.
    double score_with_rule(const Rule& r, double length) const {
        const auto& schema = ctx_.schema();
        const std::size_t v = schema.require(r.update.variable);
        std::vector<Rule> rules;
        for (const auto& m : model_.rules())
            if (m.update.variable == r.update.variable) rules.push_back(m);
        rules.insert(std::upper_bound(rules.begin(), rules.end(), r, rule_less), r);
        std::vector<BoundRule> bound;
        for (const auto& x : rules) bound.push_back(bind(x, schema));
        std::vector<const BoundRule*> ptrs;
        for (const auto& b : bound) ptrs.push_back(&b);
        auto costs = costs_;
        costs[v] = variable_cost(ctx_, v, ptrs);
        return score_with(costs, rule_lengths_ + length, model_.size() + 1);
    }

    void add(const Rule& r, double length) {
        model_ = model_.with(r);
        rule_lengths_ += length;
        const auto& schema = ctx_.schema();
        const std::size_t v = schema.require(r.update.variable);
        std::vector<BoundRule> bound;
        for (const auto& x : model_.rules())
            if (x.update.variable == r.update.variable) bound.push_back(bind(x, schema));
        std::vector<const BoundRule*> ptrs;
        for (const auto& b : bound) ptrs.push_back(&b);
        costs_[v] = variable_cost(ctx_, v, ptrs);
        score_ = score_with(costs_, rule_lengths_, model_.size());
    }

private:
    double score_with(const std::vector<VariableCost>& costs, double rule_lengths, std::size_t n_rules) const {
        return universal_int(n_rules + 1) + rule_lengths + data_cost(costs, codec_);
    }

    const ScoringContext& ctx_;
    CodecConfig codec_;
    Model model_;
    std::vector<VariableCost> costs_;
    double rule_lengths_ = 0.0;
    double score_ = 0.0;
};

}  // namespace detail

/// Greedy MDL rule search. Candidates for each target variable are
/// visited in estimate order; exact scores are computed until the next
/// estimate cannot beat the best exact score, and the best rule is kept
/// only if it lowers L(D, M). Passes repeat until no variable improves.
///
/// With workers > 1 the exact scores of the next `workers` candidates
/// are computed concurrently, then replayed in queue order, so the
/// result does not depend on the worker count.
inline MiningResult mine(const EventLog& log, const SearchConfig& cfg = {}) {
    MiningResult result;
    if (log.traces.empty() || log.event_count() == 0) {
        result.score_trace.push_back(0.0);
        return result;
    }
    if (!cfg.codec.prequential_neg_log)
        throw std::invalid_argument("search needs the -log prequential model-stream code");

    ScoringContext ctx(log);
    const auto candidates = generate_candidates(ctx, cfg);
    detail::SearchState state(ctx, cfg.codec);
    result.score_trace.push_back(state.score());
    const std::size_t workers = static_cast<std::size_t>(std::max(cfg.workers, 1));

    int passes = 0;
    bool extended = true;
    while (extended && (!cfg.max_iterations || passes < *cfg.max_iterations)) {
        extended = false;
        ++passes;
        for (std::size_t v = 0; v < log.schema.size(); ++v) {
            const auto& queue = candidates[v];
            const double current = state.score();
            const Candidate* best = nullptr;
            double best_score = current;
            std::vector<std::optional<double>> exact(queue.size());

            std::size_t pos = 0;
            bool stop = false;
            while (pos < queue.size() && !stop) {
                // speculative batch of the next addable candidates
                std::vector<std::size_t> batch;
                for (std::size_t k = pos; k < queue.size() && batch.size() < workers; ++k) {
                    if (cfg.prune && !(queue[k].estimate(current) < best_score)) break;
                    if (state.model().can_add(queue[k].rule)) batch.push_back(k);
                }
                if (batch.empty()) break;
                if (batch.size() == 1) {
                    exact[batch[0]] = state.score_with_rule(queue[batch[0]].rule, queue[batch[0]].length);
                } else {
                    std::vector<std::future<double>> futures;
                    for (auto k : batch)
                        futures.push_back(std::async(std::launch::async, [&state, &queue, k] {
                            return state.score_with_rule(queue[k].rule, queue[k].length);
                        }));
                    for (std::size_t b = 0; b < batch.size(); ++b) exact[batch[b]] = futures[b].get();
                }
                result.evaluated += batch.size();

                // replay in queue order with the sequential stopping rule
                for (std::size_t k = pos; k <= batch.back(); ++k) {
                    pos = k + 1;
                    if (!exact[k]) continue;
                    if (cfg.prune && !(queue[k].estimate(current) < best_score)) {
                        stop = true;
                        break;
                    }
                    const double s = *exact[k];
                    if (s < best_score || (best && s == best_score && rule_less(queue[k].rule, best->rule))) {
                        best = &queue[k];
                        best_score = s;
                    }
                }
            }

            if (best && best_score < current - 1e-9) {
                state.add(best->rule, best->length);
                result.score_trace.push_back(state.score());
                extended = true;
            }
        }
    }
    result.model = state.model();
    return result;
}

inline Model moody(const EventLog& log, const SearchConfig& cfg = {}) { return mine(log, cfg).model; }

}  // namespace moody
