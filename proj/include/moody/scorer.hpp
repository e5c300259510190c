#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "moody/log_model.hpp"
#include "moody/mdl_codec.hpp"
#include "moody/rule_model.hpp"

namespace moody {

// ─── Streams ──────────────────────────────────────────────────

struct RuleChoice {
    std::size_t firing = 0;  // |R_i|
    std::size_t rule = 0;    // index into Model::rules()

    friend bool operator==(const RuleChoice&, const RuleChoice&) = default;
};

struct ValueEntry {
    std::size_t variable = 0;
    std::vector<int> allowed;  // codes the value was chosen among
    int value = -1;
    bool fallback = false;     // coded over the full domain

    friend bool operator==(const ValueEntry&, const ValueEntry&) = default;
};

struct CodeStreams {
    std::vector<RuleChoice> rule_selection;  // C_r
    std::vector<bool> model_stream;          // C_m, true = correct
    std::vector<ValueEntry> value_stream;    // C_v
};

struct ScoreBreakdown {
    double l_model = 0.0;
    double l_cr = 0.0;
    double l_cm = 0.0;
    double l_cv = 0.0;
    double total = 0.0;
};

struct EncodeResult {
    CodeStreams streams;
    ScoreBreakdown score;
};

// ─── Scoring context ──────────────────────────────────────────
// Flattened, per-variable view of a log: value codes, fallback code
// lengths and frequency prefix sums for O(1) range normalisers.

class ScoringContext {
public:
    ScoringContext(const EventLog& log, FrequencyTable freq) : log_(&log), freq_(std::move(freq)) {
        const std::size_t nv = log.schema.size();
        for (const auto& trace : log.traces)
            for (std::size_t i = 0; i < trace.events.size(); ++i) {
                events_.push_back(&trace.events[i]);
                prevs_.push_back(i == 0 ? nullptr : &trace.events[i - 1]);
            }
        codes_.resize(nv);
        fallback_.resize(nv);
        prefix_.resize(nv);
        for (std::size_t v = 0; v < nv; ++v) {
            const auto& var = log.schema[v];
            auto& codes = codes_[v];
            codes.reserve(events_.size());
            for (const Event* e : events_) codes.push_back(var.code_of(e->values[v]));
            const auto& counts = freq_.counts[v];
            const double total = static_cast<double>(freq_.totals[v]);
            fallback_[v].resize(counts.size());
            prefix_[v].assign(counts.size() + 1, 0);
            for (std::size_t k = 0; k < counts.size(); ++k) {
                fallback_[v][k] = counts[k] > 0 ? -std::log2(static_cast<double>(counts[k]) / total)
                                                : std::numeric_limits<double>::infinity();
                prefix_[v][k + 1] = prefix_[v][k] + counts[k];
            }
        }
    }

    explicit ScoringContext(const EventLog& log) : ScoringContext(log, frequencies(log)) {}

    const EventLog& log() const { return *log_; }
    const Schema& schema() const { return log_->schema; }
    const FrequencyTable& freq() const { return freq_; }
    std::size_t event_count() const { return events_.size(); }
    const Event& event(std::size_t i) const { return *events_[i]; }
    const Event* prev(std::size_t i) const { return prevs_[i]; }
    int code(std::size_t var, std::size_t i) const { return codes_[var][i]; }
    double fallback_bits(std::size_t var, int code) const { return fallback_[var][static_cast<std::size_t>(code)]; }

    std::int64_t set_frequency(std::size_t var, const ValueSet& s) const {
        if (s.list) {
            std::int64_t t = 0;
            for (int c : *s.list) t += freq_.counts[var][static_cast<std::size_t>(c)];
            return t;
        }
        if (s.hi < s.lo) return 0;
        return prefix_[var][static_cast<std::size_t>(s.hi) + 1] - prefix_[var][static_cast<std::size_t>(s.lo)];
    }

    /// -log2(freq(code) / freq(s)); 0 for singletons.
    double set_value_bits(std::size_t var, int code, const ValueSet& s) const {
        if (s.size() <= 1) return 0.0;
        return -std::log2(static_cast<double>(freq_.counts[var][static_cast<std::size_t>(code)]) /
                          static_cast<double>(set_frequency(var, s)));
    }

    /// Mean fallback code length of a variable over the log.
    double mean_fallback_bits(std::size_t var) const {
        const auto& counts = freq_.counts[var];
        const double total = static_cast<double>(freq_.totals[var]);
        if (total <= 0) return 0.0;
        double h = 0.0;
        for (auto c : counts)
            if (c > 0) h -= static_cast<double>(c) / total * std::log2(static_cast<double>(c) / total);
        return h;
    }

private:
    const EventLog* log_;
    FrequencyTable freq_;
    std::vector<const Event*> events_;
    std::vector<const Event*> prevs_;
    std::vector<std::vector<int>> codes_;
    std::vector<std::vector<double>> fallback_;
    std::vector<std::vector<std::int64_t>> prefix_;
};

// ─── Per-cell coding decision ─────────────────────────────────

struct CellCode {
    std::size_t firing = 0;
    std::size_t chosen = 0;  // position in the candidate rule span
    bool correct = false;
    ValueSet allowed;        // prediction of the chosen rule
    double cr_bits = 0.0;
    double cv_bits = 0.0;
    bool emits_value = false;
};

namespace detail {

struct Firing {
    std::size_t index;
    ValueSet prediction;
};

/// Decide how the cell (event i, variable v) with value code x is coded
/// using rules (all targeting v, in canonical order).
inline CellCode code_cell(const ScoringContext& ctx, std::size_t v, const Event* prev, const Event& cur, int x,
                          std::span<const BoundRule* const> rules, std::vector<Firing>& scratch) {
    scratch.clear();
    for (std::size_t r = 0; r < rules.size(); ++r) {
        if (!rules[r]->condition.fires(prev, cur)) continue;
        auto p = rules[r]->update.predict(prev);
        if (!p.empty()) scratch.push_back({r, p});
    }
    CellCode cc;
    cc.firing = scratch.size();
    if (scratch.empty()) {
        cc.cv_bits = ctx.fallback_bits(v, x);
        cc.emits_value = true;
        return cc;
    }
    std::size_t pick = 0;
    if (scratch.size() >= 2) {
        double best = std::numeric_limits<double>::infinity();
        bool any = false;
        for (std::size_t k = 0; k < scratch.size(); ++k) {
            if (!scratch[k].prediction.contains(x)) continue;
            double bits = ctx.set_value_bits(v, x, scratch[k].prediction);
            if (!any || bits < best) {
                best = bits;
                pick = k;
                any = true;
            }
        }
        cc.cr_bits = std::log2(static_cast<double>(scratch.size()));
    }
    cc.chosen = scratch[pick].index;
    cc.allowed = scratch[pick].prediction;
    cc.correct = cc.allowed.contains(x);
    if (cc.correct) {
        cc.emits_value = cc.allowed.size() > 1;
        cc.cv_bits = ctx.set_value_bits(v, x, cc.allowed);
    } else {
        cc.emits_value = true;
        cc.cv_bits = ctx.fallback_bits(v, x);
    }
    return cc;
}

inline std::vector<std::vector<const BoundRule*>> rules_by_target(const std::vector<BoundRule>& bound,
                                                                  std::size_t nv) {
    std::vector<std::vector<const BoundRule*>> by(nv);
    for (const auto& br : bound) by[br.update.var].push_back(&br);
    return by;
}

}  // namespace detail

// ─── Encode / decode ──────────────────────────────────────────

/// Encode the log with the model: traces in order, events in order,
/// variables in topological order of the dependency graph.
inline EncodeResult encode(const ScoringContext& ctx, const Model& model, const CodecConfig& cfg = {}) {
    const auto& schema = ctx.schema();
    const auto order = variable_order(schema, model);
    const auto bound = bind(model, schema);
    const auto by_target = detail::rules_by_target(bound, schema.size());

    EncodeResult res;
    auto& st = res.streams;
    auto& sc = res.score;
    std::vector<PrequentialCounter> counters(cfg.counter_scope == CounterScope::global ? 1 : schema.size(),
                                             PrequentialCounter{0, 0, cfg.epsilon});
    std::vector<detail::Firing> scratch;

    for (std::size_t i = 0; i < ctx.event_count(); ++i) {
        const Event& cur = ctx.event(i);
        const Event* prev = ctx.prev(i);
        for (std::size_t v : order) {
            const int x = ctx.code(v, i);
            if (x < 0) continue;
            const auto& rules = by_target[v];
            auto cc = detail::code_cell(ctx, v, prev, cur, x, rules, scratch);
            if (cc.firing >= 2) {
                st.rule_selection.push_back({cc.firing, static_cast<std::size_t>(rules[cc.chosen]->rule - model.rules().data())});
                sc.l_cr += cc.cr_bits;
            }
            if (cc.firing >= 1) {
                auto& counter = counters[cfg.counter_scope == CounterScope::global ? 0 : v];
                auto [bits, next] = prequential_code(counter, cc.correct, cfg.prequential_neg_log);
                counter = next;
                st.model_stream.push_back(cc.correct);
                sc.l_cm += bits;
            }
            if (cc.emits_value) {
                ValueEntry ve;
                ve.variable = v;
                ve.value = x;
                ve.fallback = cc.firing == 0 || !cc.correct;
                if (ve.fallback) {
                    ve.allowed.resize(schema[v].domain_size());
                    for (std::size_t k = 0; k < ve.allowed.size(); ++k) ve.allowed[k] = static_cast<int>(k);
                } else {
                    ve.allowed = cc.allowed.to_vector();
                }
                st.value_stream.push_back(std::move(ve));
                sc.l_cv += cc.cv_bits;
            }
        }
    }
    sc.l_model = model_length(model, schema, cfg);
    sc.total = sc.l_model + sc.l_cr + sc.l_cm + sc.l_cv;
    return res;
}

inline EncodeResult encode(const EventLog& log, const Model& model, const CodecConfig& cfg = {}) {
    ScoringContext ctx(log);
    return encode(ctx, model, cfg);
}

/// L(D, M) = L(M) + L(C_r) + L(C_m) + L(C_v).
inline ScoreBreakdown total_score(const EventLog& log, const Model& model, const CodecConfig& cfg = {}) {
    return encode(log, model, cfg).score;
}

/// Reconstruct the values of skeleton (same schema and trace/event
/// structure as the encoded log; numerical cells that were missing must
/// be NaN) from the code streams. Numerical values come back as bin
/// representatives.
inline EventLog decode(const CodeStreams& streams, const Model& model, EventLog skeleton) {
    const auto& schema = skeleton.schema;
    const auto order = variable_order(schema, model);
    const auto bound = bind(model, schema);
    const auto by_target = detail::rules_by_target(bound, schema.size());
    std::size_t pos_r = 0, pos_m = 0, pos_v = 0;

    for (auto& trace : skeleton.traces) {
        for (std::size_t i = 0; i < trace.events.size(); ++i) {
            Event& cur = trace.events[i];
            const Event* prev = i == 0 ? nullptr : &trace.events[i - 1];
            for (std::size_t v : order) {
                const auto& var = schema[v];
                if (!var.categorical() && is_missing(cur.values[v])) continue;
                const auto& rules = by_target[v];

                std::vector<std::pair<std::size_t, ValueSet>> firing;
                for (std::size_t r = 0; r < rules.size(); ++r) {
                    if (!rules[r]->condition.fires(prev, cur)) continue;
                    auto p = rules[r]->update.predict(prev);
                    if (!p.empty()) firing.emplace_back(r, p);
                }

                std::optional<ValueSet> allowed;
                if (!firing.empty()) {
                    std::size_t pick = 0;
                    if (firing.size() >= 2) {
                        if (pos_r >= streams.rule_selection.size()) throw DataError("stream underrun: C_r");
                        const auto& rc = streams.rule_selection[pos_r++];
                        if (rc.firing != firing.size()) throw DataError("stream mismatch: C_r firing set size");
                        bool found = false;
                        for (std::size_t k = 0; k < firing.size(); ++k)
                            if (static_cast<std::size_t>(rules[firing[k].first]->rule - model.rules().data()) == rc.rule) {
                                pick = k;
                                found = true;
                            }
                        if (!found) throw DataError("stream mismatch: C_r selects a rule that does not fire");
                    }
                    if (pos_m >= streams.model_stream.size()) throw DataError("stream underrun: C_m");
                    if (streams.model_stream[pos_m++]) allowed = firing[pick].second;
                }

                int code;
                if (allowed && allowed->size() == 1) {
                    code = allowed->single();
                } else {
                    if (pos_v >= streams.value_stream.size()) throw DataError("stream underrun: C_v");
                    const auto& ve = streams.value_stream[pos_v++];
                    code = ve.value;
                    bool ok = ve.variable == v &&
                              (allowed ? allowed->contains(code)
                                       : code >= 0 && static_cast<std::size_t>(code) < var.domain_size());
                    if (!ok) throw DataError("stream mismatch: C_v value outside the allowed set");
                }
                cur.values[v] = var.categorical() ? static_cast<double>(code)
                                                  : var.histogram.representatives[static_cast<std::size_t>(code)];
            }
        }
    }
    if (pos_r != streams.rule_selection.size() || pos_m != streams.model_stream.size() ||
        pos_v != streams.value_stream.size())
        throw DataError("stream overrun: unread codes remain");
    return skeleton;
}

// ─── Incremental scoring ──────────────────────────────────────
// The data cost splits per target variable except for the model stream,
// whose prequential length depends only on the symbol counts.

struct VariableCost {
    double l_cr = 0.0;
    double l_cv = 0.0;
    std::int64_t checks = 0;
    std::int64_t crosses = 0;
};

inline VariableCost variable_cost(const ScoringContext& ctx, std::size_t v, std::span<const BoundRule* const> rules) {
    VariableCost vc;
    std::vector<detail::Firing> scratch;
    for (std::size_t i = 0; i < ctx.event_count(); ++i) {
        const int x = ctx.code(v, i);
        if (x < 0) continue;
        if (rules.empty()) {
            vc.l_cv += ctx.fallback_bits(v, x);
            continue;
        }
        auto cc = detail::code_cell(ctx, v, ctx.prev(i), ctx.event(i), x, rules, scratch);
        vc.l_cr += cc.cr_bits;
        vc.l_cv += cc.cv_bits;
        if (cc.firing >= 1) ++(cc.correct ? vc.checks : vc.crosses);
    }
    return vc;
}

/// Data cost L(D|M) assembled from per-variable costs.
inline double data_cost(std::span<const VariableCost> costs, const CodecConfig& cfg) {
    double bits = 0.0;
    std::int64_t checks = 0, crosses = 0;
    for (const auto& c : costs) {
        bits += c.l_cr + c.l_cv;
        if (cfg.counter_scope == CounterScope::per_variable) {
            bits += prequential_length(c.checks, c.crosses, cfg.epsilon);
        } else {
            checks += c.checks;
            crosses += c.crosses;
        }
    }
    if (cfg.counter_scope == CounterScope::global) bits += prequential_length(checks, crosses, cfg.epsilon);
    return bits;
}

}  // namespace moody
