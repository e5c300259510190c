#pragma once

#include <random>
#include <string>
#include <vector>

#include "moody/log_model.hpp"
#include "moody/rule_model.hpp"

namespace moody::testing {

/// Four-event trace (product, amount, vendor) with two overlapping vendor rules.
inline EventLog vendor_log() {
    LogOptions opts;
    opts.categories["vendor"] = {"A", "B", "C"};
    return parse_csv(
        "trace_id,event_index,product,amount,vendor\n"
        "t,0,bag,20,C\nt,1,bag,10,C\nt,2,pants,10,A\nt,3,pants,20,A\n",
        opts);
}

inline Model vendor_model() {
    return Model({make_rule(make_condition("amount", ConditionOp::eq, {10.0}),
                            make_update("vendor", UpdateType::point_assign, {std::string("C")})),
                  make_rule(make_condition("product", ConditionOp::eq, {std::string("bag")}),
                            make_update("vendor", UpdateType::set_member, {std::string("B"), std::string("C")}))});
}

/// Four-event (product, vendor) trace repeated `copies` times; its two rules
/// show the score is neither monotone nor submodular.
inline EventLog witness_log(int copies) {
    std::string csv = "trace_id,event_index,product,vendor\n";
    for (int k = 0; k < copies; ++k) {
        const auto t = std::to_string(k);
        csv += t + ",0,bag,A\n" + t + ",1,shirt,C\n" + t + ",2,shirt,B\n" + t + ",3,pants,C\n";
    }
    return parse_csv(csv);
}

inline Rule witness_r1() {
    return make_rule(make_condition("product", ConditionOp::eq, {std::string("shirt")}),
                     make_update("vendor", UpdateType::point_assign, {std::string("C")}));
}

inline Rule witness_r2() {
    return make_rule(make_condition("product", ConditionOp::eq, {std::string("bag")}),
                     make_update("vendor", UpdateType::set_member, {std::string("A"), std::string("B")}));
}

/// Small random log with two categorical and two numerical variables,
/// including missing cells.
inline EventLog random_log(std::mt19937_64& gen) {
    auto pick = [&](int n) { return static_cast<int>(gen() % static_cast<unsigned>(n)); };
    const int traces = 1 + pick(6);
    const int dom_a = 2 + pick(3), dom_b = 2 + pick(4);
    std::string csv = "trace_id,event_index,activity,kind,x,y\n";
    for (int t = 0; t < traces; ++t) {
        const int len = 1 + pick(8);
        for (int i = 0; i < len; ++i) {
            csv += "t" + std::to_string(t) + "," + std::to_string(i) + ",";
            csv += pick(12) ? "a" + std::to_string(pick(dom_a)) : "";
            csv += ",";
            csv += pick(12) ? "k" + std::to_string(pick(dom_b)) : "";
            csv += ",";
            csv += pick(10) ? std::to_string(pick(20)) : "";
            csv += ",";
            csv += pick(10) ? format_number(pick(50) * 0.25 - 3) : "";
            csv += "\n";
        }
    }
    LogOptions opts;
    opts.bins = 2 + pick(8);
    opts.kinds["x"] = VariableKind::numerical;
    opts.kinds["y"] = VariableKind::numerical;
    return parse_csv(csv, opts);
}

/// Random constant taken from the variable's domain.
inline Constant random_constant(std::mt19937_64& gen, const VariableSchema& var) {
    if (var.categorical()) return var.categories[gen() % var.categories.size()];
    const auto& reps = var.histogram.representatives;
    double x = reps[gen() % reps.size()];
    if (gen() % 2) x = std::round(x);
    return x;
}

/// Random acyclic model over the log's schema, covering every operator and update type.
inline Model random_model(std::mt19937_64& gen, const Schema& schema, int max_rules = 6) {
    Model m;
    const int want = static_cast<int>(gen() % static_cast<unsigned>(max_rules + 1));
    for (int attempt = 0; attempt < 50 && static_cast<int>(m.size()) < want; ++attempt) {
        const auto cv = gen() % schema.size();
        auto uv = gen() % schema.size();
        if (uv == cv) continue;
        const auto& cvar = schema[cv];
        const auto& uvar = schema[uv];
        try {
            auto op = static_cast<ConditionOp>(gen() % 5);
            if (cvar.categorical() && (op == ConditionOp::le || op == ConditionOp::ge)) op = ConditionOp::ne;
            std::vector<Constant> cc{random_constant(gen, cvar)};
            if (op == ConditionOp::transition) cc.push_back(random_constant(gen, cvar));
            auto type = static_cast<UpdateType>(gen() % 6);
            if (uvar.categorical() && numeric_only(type)) type = UpdateType::set_member;
            std::vector<Constant> uc;
            switch (type) {
                case UpdateType::set_member:
                    for (int k = 0; k < 3; ++k) {
                        auto c = random_constant(gen, uvar);
                        if (std::find(uc.begin(), uc.end(), c) == uc.end()) uc.push_back(c);
                    }
                    break;
                case UpdateType::point_assign: uc.push_back(random_constant(gen, uvar)); break;
                case UpdateType::interval_assign: {
                    double a = std::get<double>(random_constant(gen, uvar)), b = std::get<double>(random_constant(gen, uvar));
                    uc = {std::min(a, b), std::max(a, b)};
                    break;
                }
                case UpdateType::relative_point: uc.push_back(static_cast<double>(static_cast<int>(gen() % 7) - 3)); break;
                case UpdateType::relative_interval: {
                    double a = static_cast<double>(static_cast<int>(gen() % 9) - 4), b = a + static_cast<double>(gen() % 5);
                    uc = {a, b};
                    break;
                }
                case UpdateType::multiplicative: uc.push_back(gen() % 2 ? 2.0 : 0.5); break;
            }
            auto r = make_rule(make_condition(cvar.name, op, cc), make_update(uvar.name, type, uc));
            if (m.can_add(r)) m = m.with(r);
        } catch (const ModelError&) {
        }
    }
    return m;
}

/// Values equal, treating two missing cells as equal.
inline bool same_values(const EventLog& a, const EventLog& b) {
    if (a.traces.size() != b.traces.size()) return false;
    for (std::size_t t = 0; t < a.traces.size(); ++t) {
        if (a.traces[t].events.size() != b.traces[t].events.size()) return false;
        for (std::size_t i = 0; i < a.traces[t].events.size(); ++i)
            for (std::size_t v = 0; v < a.schema.size(); ++v) {
                const double x = a.traces[t].events[i].values[v], y = b.traces[t].events[i].values[v];
                if (!(x == y || (is_missing(x) && is_missing(y)))) return false;
            }
    }
    return true;
}

/// A copy with every value wiped except numerical missing markers.
inline EventLog skeleton_of(const EventLog& log) {
    EventLog s = log;
    for (auto& t : s.traces)
        for (auto& e : t.events)
            for (std::size_t v = 0; v < s.schema.size(); ++v)
                if (s.schema[v].categorical() || !is_missing(e.values[v])) e.values[v] = 0.0;
    return s;
}

}  // namespace moody::testing
