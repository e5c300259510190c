#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "moody/log_model.hpp"
#include "moody/rule_model.hpp"

namespace moody {

enum class TargetKind { categorical_only, numerical_only, mixed };

struct SynthConfig {
    std::uint64_t seed = 0;
    int n_rules = 5;
    int n_cat = 2;  // the first categorical variable is the activity
    int n_num = 2;
    int n_events = 2000;
    std::vector<ConditionOp> condition_ops{ConditionOp::eq, ConditionOp::le, ConditionOp::ge};
    std::pair<int, int> trace_len{5, 15};
    int cat_domain_size = 5;
    TargetKind target_kind = TargetKind::mixed;
    /// Numerical base values are uniform integers in [num_min, num_max].
    int num_min = 0;
    int num_max = 100;
    int bins = 50;
    /// Sampling attempts before sample_ground_truth gives up.
    int max_attempts = 10000;
};

namespace detail {

inline void validate(const SynthConfig& cfg) {
    if (cfg.n_rules < 0) throw std::invalid_argument("n_rules must be non-negative");
    if (cfg.n_cat < 0 || cfg.n_num < 0 || cfg.n_cat + cfg.n_num < 2)
        throw std::invalid_argument("need at least two variables");
    if (cfg.trace_len.first < 2 || cfg.trace_len.second < cfg.trace_len.first)
        throw std::invalid_argument("trace lengths must satisfy 2 <= min <= max");
    if (cfg.cat_domain_size < 2) throw std::invalid_argument("categorical domains need at least two values");
    if (cfg.num_max <= cfg.num_min) throw std::invalid_argument("empty numerical range");
    if (cfg.n_events < 1) throw std::invalid_argument("n_events must be positive");
}

inline std::string synth_variable(const SynthConfig& cfg, int v) {
    if (v == 0 && cfg.n_cat > 0) return "activity";
    if (v < cfg.n_cat) return "cat" + std::to_string(v);
    return "num" + std::to_string(v - cfg.n_cat);
}

inline std::string synth_category(int v, int k) {
    return std::string(1, static_cast<char>(v == 0 ? 'a' : 'c')) + std::to_string(k);
}

class SynthRng {
public:
    explicit SynthRng(std::uint64_t seed) : gen_(seed) {}

    int uniform(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(gen_); }
    double uniform01() { return std::uniform_real_distribution<double>(0.0, 1.0)(gen_); }
    double gamma1() { return std::gamma_distribution<double>(1.0, 1.0)(gen_); }
    std::mt19937_64& engine() { return gen_; }

    template <typename T>
    const T& pick(const std::vector<T>& xs) {
        return xs[static_cast<std::size_t>(uniform(0, static_cast<int>(xs.size()) - 1))];
    }

private:
    std::mt19937_64 gen_;
};

struct SynthSpace {
    std::vector<std::string> names;
    std::vector<bool> categorical;
    std::vector<std::vector<std::string>> domains;
    std::vector<std::vector<double>> weights;  // base multinomials of categorical variables
};

inline SynthSpace synth_space(const SynthConfig& cfg) {
    SynthSpace s;
    SynthRng rng(cfg.seed ^ 0x5eedba5eULL);
    for (int v = 0; v < cfg.n_cat + cfg.n_num; ++v) {
        s.names.push_back(synth_variable(cfg, v));
        const bool cat = v < cfg.n_cat;
        s.categorical.push_back(cat);
        std::vector<std::string> dom;
        std::vector<double> w;
        if (cat) {
            for (int k = 0; k < cfg.cat_domain_size; ++k) {
                dom.push_back(synth_category(v, k));
                w.push_back(rng.gamma1());
            }
        }
        s.domains.push_back(std::move(dom));
        s.weights.push_back(std::move(w));
    }
    return s;
}

inline Constant random_constant(const SynthConfig& cfg, const SynthSpace& s, int v, SynthRng& rng) {
    if (s.categorical[static_cast<std::size_t>(v)]) return rng.pick(s.domains[static_cast<std::size_t>(v)]);
    return static_cast<double>(rng.uniform(cfg.num_min, cfg.num_max));
}

inline Condition random_condition(const SynthConfig& cfg, const SynthSpace& s, int v, SynthRng& rng) {
    const auto& var = s.names[static_cast<std::size_t>(v)];
    std::vector<ConditionOp> ops;
    for (auto op : cfg.condition_ops)
        if (!s.categorical[static_cast<std::size_t>(v)] || (op != ConditionOp::le && op != ConditionOp::ge))
            ops.push_back(op);
    if (ops.empty()) throw std::invalid_argument("no condition operator applies to " + var);
    const auto op = rng.pick(ops);
    if (op == ConditionOp::le || op == ConditionOp::ge) {
        // thresholds in the central part of the range keep rules from firing almost never or always
        const int span = cfg.num_max - cfg.num_min;
        return make_condition(var, op, {static_cast<double>(rng.uniform(cfg.num_min + span / 5, cfg.num_max - span / 5))});
    }
    if (op == ConditionOp::transition)
        return make_condition(var, op, {random_constant(cfg, s, v, rng), random_constant(cfg, s, v, rng)});
    return make_condition(var, op, {random_constant(cfg, s, v, rng)});
}

inline UpdateRule random_update(const SynthConfig& cfg, const SynthSpace& s, int v, SynthRng& rng) {
    const auto& var = s.names[static_cast<std::size_t>(v)];
    const bool cat = s.categorical[static_cast<std::size_t>(v)];
    std::vector<UpdateType> types{UpdateType::set_member, UpdateType::point_assign};
    if (!cat)
        types.insert(types.end(), {UpdateType::interval_assign, UpdateType::relative_point,
                                   UpdateType::relative_interval, UpdateType::multiplicative});
    const auto type = rng.pick(types);
    switch (type) {
        case UpdateType::set_member: {
            std::vector<Constant> members;
            const int size = rng.uniform(2, 3);
            while (static_cast<int>(members.size()) < size) {
                auto c = random_constant(cfg, s, v, rng);
                if (std::find(members.begin(), members.end(), c) == members.end()) members.push_back(std::move(c));
            }
            return make_update(var, type, std::move(members));
        }
        case UpdateType::point_assign: return make_update(var, type, {random_constant(cfg, s, v, rng)});
        case UpdateType::interval_assign: {
            int a = rng.uniform(cfg.num_min, cfg.num_max), b = rng.uniform(cfg.num_min, cfg.num_max);
            if (a > b) std::swap(a, b);
            return make_update(var, type, {static_cast<double>(a), static_cast<double>(b)});
        }
        case UpdateType::relative_point: {
            int d = rng.uniform(1, 20) * (rng.uniform(0, 1) ? 1 : -1);
            return make_update(var, type, {static_cast<double>(d)});
        }
        case UpdateType::relative_interval: {
            int a = rng.uniform(-20, 20), b = rng.uniform(-20, 20);
            if (a > b) std::swap(a, b);
            return make_update(var, type, {static_cast<double>(a), static_cast<double>(b)});
        }
        case UpdateType::multiplicative: {
            static const std::vector<double> factors{0.5, 0.8, 1.2, 1.5, 2.0};
            return make_update(var, type, {rng.pick(factors)});
        }
    }
    throw std::logic_error("unknown update type");
}

}  // namespace detail

/// Sample a random acyclic model over the synthetic variables.
inline Model sample_ground_truth(const SynthConfig& cfg) {
    detail::validate(cfg);
    if (cfg.target_kind == TargetKind::numerical_only && cfg.n_num == 0)
        throw std::invalid_argument("numerical-only targets need a numerical variable");
    if (cfg.target_kind == TargetKind::categorical_only && cfg.n_cat == 0)
        throw std::invalid_argument("categorical-only targets need a categorical variable");
    if (cfg.n_cat + cfg.n_num < 2) throw std::invalid_argument("need at least two variables");

    const auto space = detail::synth_space(cfg);
    detail::SynthRng rng(cfg.seed);
    const int nv = cfg.n_cat + cfg.n_num;
    std::vector<int> targets;
    for (int v = 0; v < nv; ++v) {
        const bool cat = space.categorical[static_cast<std::size_t>(v)];
        if (cfg.target_kind == TargetKind::mixed || (cat == (cfg.target_kind == TargetKind::categorical_only)))
            targets.push_back(v);
    }

    Model model;
    int attempts = 0;
    while (static_cast<int>(model.size()) < cfg.n_rules) {
        if (++attempts > cfg.max_attempts)
            throw std::runtime_error("sample_ground_truth: no acyclic model found within the attempt limit");
        const int t = rng.pick(targets);
        int c = rng.uniform(0, nv - 2);
        if (c >= t) ++c;
        auto rule = make_rule(detail::random_condition(cfg, space, c, rng), detail::random_update(cfg, space, t, rng));
        if (model.can_add(rule)) model = model.with(std::move(rule));
    }
    return model;
}

/// Generate a log from a ground-truth model. Variables without a firing
/// rule are drawn from their base distributions; a firing rule's target is
/// drawn from its prediction, the canonically first firing rule winning.
inline EventLog generate_log(const Model& gt, const SynthConfig& cfg) {
    detail::validate(cfg);
    const auto space = detail::synth_space(cfg);
    detail::SynthRng rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
    const std::size_t nv = space.names.size();

    // A throwaway schema lets the rules be bound against category codes;
    // without histograms, numerical conditions compare raw values.
    std::vector<VariableSchema> vars;
    for (std::size_t v = 0; v < nv; ++v) {
        VariableSchema var;
        var.name = space.names[v];
        var.kind = space.categorical[v] ? VariableKind::categorical : VariableKind::numerical;
        if (space.categorical[v]) {
            var.categories = space.domains[v];
            std::sort(var.categories.begin(), var.categories.end());
        }
        vars.push_back(std::move(var));
    }
    const Schema schema(std::move(vars));
    for (const auto& r : gt.rules()) {
        schema.require(r.condition.variable);
        schema.require(r.update.variable);
    }
    auto bound = bind(gt, schema);
    const auto order = variable_order(schema, gt);

    std::vector<std::discrete_distribution<int>> base(nv);
    for (std::size_t v = 0; v < nv; ++v)
        if (space.categorical[v]) base[v] = std::discrete_distribution<int>(space.weights[v].begin(), space.weights[v].end());
    auto category_code = [&](std::size_t v, int k) {
        return static_cast<double>(*schema[v].category_code(space.domains[v][static_cast<std::size_t>(k)]));
    };

    auto draw_from_rule = [&](const BoundRule& br, const Event* prev) -> std::optional<double> {
        const auto& u = br.rule->update;
        const std::size_t v = br.update.var;
        const double p = prev ? prev->values[v] : kMissing;
        switch (u.type) {
            case UpdateType::set_member: {
                const auto& c = u.constants[static_cast<std::size_t>(rng.uniform(0, static_cast<int>(u.constants.size()) - 1))];
                if (space.categorical[v]) return static_cast<double>(*schema[v].category_code(std::get<std::string>(c)));
                return std::get<double>(c);
            }
            case UpdateType::point_assign:
                if (space.categorical[v]) return static_cast<double>(*schema[v].category_code(std::get<std::string>(u.constants[0])));
                return std::get<double>(u.constants[0]);
            case UpdateType::interval_assign: {
                const double a = std::get<double>(u.constants[0]), b = std::get<double>(u.constants[1]);
                return static_cast<double>(rng.uniform(static_cast<int>(std::ceil(a)), static_cast<int>(std::floor(b))));
            }
            case UpdateType::relative_point:
                if (is_missing(p)) return std::nullopt;
                return p + std::get<double>(u.constants[0]);
            case UpdateType::relative_interval: {
                if (is_missing(p)) return std::nullopt;
                const double a = std::get<double>(u.constants[0]), b = std::get<double>(u.constants[1]);
                return p + static_cast<double>(rng.uniform(static_cast<int>(std::ceil(a)), static_cast<int>(std::floor(b))));
            }
            case UpdateType::multiplicative:
                if (is_missing(p)) return std::nullopt;
                return std::get<double>(u.constants[0]) * p;
        }
        return std::nullopt;
    };

    RawLog raw;
    raw.variables = space.names;
    int total = 0;
    for (int t = 0; total < cfg.n_events; ++t) {
        const int len = rng.uniform(cfg.trace_len.first, cfg.trace_len.second);
        std::vector<Event> events;
        for (int i = 0; i < len; ++i) {
            Event ev;
            ev.values.assign(nv, kMissing);
            const Event* prev = events.empty() ? nullptr : &events.back();
            for (auto v : order) {
                std::optional<double> value;
                for (const auto& br : bound) {
                    if (br.update.var != v || !br.condition.fires(prev, ev)) continue;
                    value = draw_from_rule(br, prev);
                    if (value) break;
                }
                if (!value) {
                    value = space.categorical[v] ? category_code(v, base[v](rng.engine()))
                                                 : static_cast<double>(rng.uniform(cfg.num_min, cfg.num_max));
                }
                ev.values[v] = *value;
            }
            events.push_back(std::move(ev));
        }
        RawTrace rt;
        rt.id = std::to_string(t);
        for (const auto& ev : events) {
            std::vector<RawCell> cells;
            for (std::size_t v = 0; v < nv; ++v) {
                if (space.categorical[v]) cells.emplace_back(schema[v].categories[static_cast<std::size_t>(ev.values[v])]);
                else cells.emplace_back(ev.values[v]);
            }
            rt.events.push_back(std::move(cells));
        }
        raw.traces.push_back(std::move(rt));
        total += len;
    }

    LogOptions opts;
    opts.bins = cfg.bins;
    for (std::size_t v = 0; v < nv; ++v) {
        opts.kinds[space.names[v]] = space.categorical[v] ? VariableKind::categorical : VariableKind::numerical;
        if (space.categorical[v]) opts.categories[space.names[v]] = space.domains[v];
    }
    return build_log(raw, opts);
}

/// Per variable, pick ceil(q * n) event positions uniformly without
/// replacement and rotate their values by one position in a random order.
inline EventLog add_swap_noise(EventLog log, double q, std::uint64_t seed) {
    if (!(q >= 0.0 && q <= 1.0)) throw std::invalid_argument("noise fraction must lie in [0, 1]");
    std::vector<double*> cells;
    std::mt19937_64 gen(seed);
    const std::size_t n = log.event_count();
    const auto k = static_cast<std::size_t>(std::ceil(q * static_cast<double>(n) - 1e-9));
    if (k < 2) return log;
    for (std::size_t v = 0; v < log.schema.size(); ++v) {
        cells.clear();
        for (auto& trace : log.traces)
            for (auto& ev : trace.events) cells.push_back(&ev.values[v]);
        std::vector<std::size_t> positions(n);
        std::iota(positions.begin(), positions.end(), 0);
        std::shuffle(positions.begin(), positions.end(), gen);
        positions.resize(k);
        const double first = *cells[positions[0]];
        for (std::size_t i = 0; i + 1 < k; ++i) *cells[positions[i]] = *cells[positions[i + 1]];
        *cells[positions[k - 1]] = first;
    }
    return log;
}

}  // namespace moody
