#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <optional>
#include <queue>
#include <set>
#include <stdexcept>
#include <string>
#include <tuple>
#include <utility>
#include <variant>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "moody/log_model.hpp"

namespace moody {

/// Raised when a rule or model violates the rule language's invariants.
class ModelError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A rule constant: a real number or a category token.
using Constant = std::variant<double, std::string>;

enum class ConditionOp : std::uint8_t { eq, ne, le, ge, transition };

enum class UpdateType : std::uint8_t {
    set_member,
    point_assign,
    interval_assign,
    relative_point,
    relative_interval,
    multiplicative,
};

inline constexpr int kConditionOpCount = 5;
inline constexpr int kUpdateTypeCount = 6;

inline std::string_view op_symbol(ConditionOp op) {
    switch (op) {
        case ConditionOp::eq: return "=";
        case ConditionOp::ne: return "!=";
        case ConditionOp::le: return "<=";
        case ConditionOp::ge: return ">=";
        case ConditionOp::transition: return "->";
    }
    return "?";
}

inline std::optional<ConditionOp> parse_op(std::string_view s) {
    for (int i = 0; i < kConditionOpCount; ++i) {
        auto op = static_cast<ConditionOp>(i);
        if (op_symbol(op) == s) return op;
    }
    if (s == "==") return ConditionOp::eq;
    return std::nullopt;
}

inline std::string_view type_tag(UpdateType t) {
    switch (t) {
        case UpdateType::set_member: return "set";
        case UpdateType::point_assign: return "point";
        case UpdateType::interval_assign: return "interval";
        case UpdateType::relative_point: return "rel_point";
        case UpdateType::relative_interval: return "rel_interval";
        case UpdateType::multiplicative: return "mul";
    }
    return "?";
}

inline std::optional<UpdateType> parse_type(std::string_view s) {
    for (int i = 0; i < kUpdateTypeCount; ++i) {
        auto t = static_cast<UpdateType>(i);
        if (type_tag(t) == s) return t;
    }
    return std::nullopt;
}

inline bool numeric_only(UpdateType t) {
    return t == UpdateType::interval_assign || t == UpdateType::relative_point ||
           t == UpdateType::relative_interval || t == UpdateType::multiplicative;
}

/// Round to p significant decimal digits.
inline double round_significant(double x, int p) {
    if (x == 0.0 || !std::isfinite(x) || p <= 0) return x;
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*e", p - 1, x);
    return std::strtod(buf, nullptr);
}

inline std::string constant_to_string(const Constant& c) {
    if (auto* s = std::get_if<std::string>(&c)) return *s;
    return format_number(std::get<double>(c));
}

// ─── Rules ────────────────────────────────────────────────────

struct Condition {
    std::string variable;
    ConditionOp op = ConditionOp::eq;
    std::vector<Constant> constants;  // (α) or (α, β) for transitions

    friend bool operator==(const Condition&, const Condition&) = default;
};

struct UpdateRule {
    std::string variable;
    UpdateType type = UpdateType::point_assign;
    std::vector<Constant> constants;

    friend bool operator==(const UpdateRule&, const UpdateRule&) = default;
};

struct Rule {
    Condition condition;
    UpdateRule update;

    friend bool operator==(const Rule&, const Rule&) = default;
};

namespace detail {

inline Constant rounded(Constant c, int precision) {
    if (auto* d = std::get_if<double>(&c)) {
        if (!std::isfinite(*d)) throw ModelError("non-finite rule constant");
        return round_significant(*d, precision);
    }
    return c;
}

}  // namespace detail

inline Condition make_condition(std::string variable, ConditionOp op, std::vector<Constant> constants,
                                int precision = 3) {
    const std::size_t want = op == ConditionOp::transition ? 2 : 1;
    if (constants.size() != want)
        throw ModelError("condition '" + std::string(op_symbol(op)) + "' expects " + std::to_string(want) +
                         " constant(s)");
    for (auto& c : constants) c = detail::rounded(std::move(c), precision);
    if ((op == ConditionOp::le || op == ConditionOp::ge) && !std::holds_alternative<double>(constants[0]))
        throw ModelError("<= and >= need a numerical constant");
    if (op == ConditionOp::transition && constants[0].index() != constants[1].index())
        throw ModelError("transition constants must have the same kind");
    return Condition{std::move(variable), op, std::move(constants)};
}

inline UpdateRule make_update(std::string variable, UpdateType type, std::vector<Constant> constants,
                              int precision = 3) {
    for (auto& c : constants) c = detail::rounded(std::move(c), precision);
    switch (type) {
        case UpdateType::set_member: {
            if (constants.empty()) throw ModelError("set update needs at least one value");
            for (const auto& c : constants)
                if (c.index() != constants[0].index()) throw ModelError("set update mixes constant kinds");
            std::sort(constants.begin(), constants.end());
            if (std::adjacent_find(constants.begin(), constants.end()) != constants.end())
                throw ModelError("set update has duplicate values");
            break;
        }
        case UpdateType::point_assign:
        case UpdateType::relative_point:
        case UpdateType::multiplicative:
            if (constants.size() != 1) throw ModelError("update '" + std::string(type_tag(type)) + "' expects 1 constant");
            break;
        case UpdateType::interval_assign:
        case UpdateType::relative_interval:
            if (constants.size() != 2) throw ModelError("interval update expects 2 constants");
            break;
    }
    if (numeric_only(type)) {
        for (const auto& c : constants)
            if (!std::holds_alternative<double>(c)) throw ModelError("numerical update needs real constants");
        if ((type == UpdateType::interval_assign || type == UpdateType::relative_interval) &&
            std::get<double>(constants[0]) > std::get<double>(constants[1]))
            throw ModelError("interval update needs lower <= upper");
    }
    return UpdateRule{std::move(variable), type, std::move(constants)};
}

inline Rule make_rule(Condition c, UpdateRule u) {
    if (c.variable == u.variable) throw ModelError("rule conditions on its own target variable: " + c.variable);
    return Rule{std::move(c), std::move(u)};
}

/// Canonical order: (update var, condition var, operator, update type, constants).
inline bool rule_less(const Rule& a, const Rule& b) {
    return std::tie(a.update.variable, a.condition.variable, a.condition.op, a.update.type, a.condition.constants,
                    a.update.constants) < std::tie(b.update.variable, b.condition.variable, b.condition.op,
                                                   b.update.type, b.condition.constants, b.update.constants);
}

// ─── Pretty printing ──────────────────────────────────────────

inline std::string to_string(const Condition& c) {
    if (c.op == ConditionOp::transition)
        return c.variable + ": " + constant_to_string(c.constants[0]) + " -> " + constant_to_string(c.constants[1]);
    std::string sym = c.op == ConditionOp::ne ? "\xE2\x89\xA0" : c.op == ConditionOp::le ? "\xE2\x89\xA4"
                    : c.op == ConditionOp::ge ? "\xE2\x89\xA5" : "=";
    return c.variable + " " + sym + " " + constant_to_string(c.constants[0]);
}

inline std::string to_string(const UpdateRule& u) {
    const auto& v = u.variable;
    auto k = [&](std::size_t i) { return constant_to_string(u.constants[i]); };
    switch (u.type) {
        case UpdateType::set_member: {
            std::string s = v + " \xE2\x88\x88 {";
            for (std::size_t i = 0; i < u.constants.size(); ++i) s += (i ? ", " : "") + k(i);
            return s + "}";
        }
        case UpdateType::point_assign: return v + " = " + k(0);
        case UpdateType::interval_assign: return v + " \xE2\x88\x88 [" + k(0) + ", " + k(1) + "]";
        case UpdateType::relative_point: return v + " = " + v + " + " + k(0);
        case UpdateType::relative_interval: return v + " = " + v + " + [" + k(0) + ", " + k(1) + "]";
        case UpdateType::multiplicative: return v + " = " + k(0) + " \xC2\xB7 " + v;
    }
    return v;
}

inline std::string to_string(const Rule& r) {
    return "IF " + to_string(r.condition) + " THEN " + to_string(r.update);
}

// ─── Dependency graph ─────────────────────────────────────────

struct DependencyGraph {
    std::vector<std::string> nodes;                          // sorted
    std::vector<std::pair<std::string, std::string>> edges;  // sorted, unique

    friend bool operator==(const DependencyGraph&, const DependencyGraph&) = default;
};

template <typename Rules>
DependencyGraph dependency_graph_of(const Rules& rules) {
    std::set<std::string> nodes;
    std::set<std::pair<std::string, std::string>> edges;
    for (const Rule& r : rules) {
        nodes.insert(r.condition.variable);
        nodes.insert(r.update.variable);
        edges.emplace(r.condition.variable, r.update.variable);
    }
    return DependencyGraph{{nodes.begin(), nodes.end()}, {edges.begin(), edges.end()}};
}

/// Topological order of the graph's nodes (smallest name first among ready
/// nodes), or nullopt when the graph has a cycle.
inline std::optional<std::vector<std::string>> topological_order(const DependencyGraph& g) {
    std::map<std::string, int> indeg;
    std::map<std::string, std::vector<std::string>> out;
    for (const auto& n : g.nodes) indeg[n] = 0;
    for (const auto& [a, b] : g.edges) {
        indeg[a];
        ++indeg[b];
        out[a].push_back(b);
    }
    std::priority_queue<std::string, std::vector<std::string>, std::greater<>> ready;
    for (const auto& [n, d] : indeg)
        if (d == 0) ready.push(n);
    std::vector<std::string> order;
    while (!ready.empty()) {
        auto n = ready.top();
        ready.pop();
        order.push_back(n);
        for (const auto& m : out[n])
            if (--indeg[m] == 0) ready.push(m);
    }
    if (order.size() != indeg.size()) return std::nullopt;
    return order;
}

inline bool is_acyclic(const DependencyGraph& g) { return topological_order(g).has_value(); }

// ─── Model ────────────────────────────────────────────────────
// Unordered acyclic rule set, stored in canonical rule order.

class Model {
public:
    Model() = default;

    explicit Model(std::vector<Rule> rules) : rules_(std::move(rules)) {
        std::sort(rules_.begin(), rules_.end(), rule_less);
        for (std::size_t i = 0; i < rules_.size(); ++i) {
            if (rules_[i].condition.variable == rules_[i].update.variable)
                throw ModelError("rule conditions on its own target: " + to_string(rules_[i]));
            if (i > 0 && rules_[i] == rules_[i - 1]) throw ModelError("duplicate rule: " + to_string(rules_[i]));
        }
        if (!is_acyclic(dependency_graph_of(rules_))) throw ModelError("model dependency graph has a cycle");
    }

    const std::vector<Rule>& rules() const { return rules_; }
    std::size_t size() const { return rules_.size(); }
    bool empty() const { return rules_.empty(); }

    bool contains(const Rule& r) const {
        auto it = std::lower_bound(rules_.begin(), rules_.end(), r, rule_less);
        return it != rules_.end() && *it == r;
    }

    /// Whether r could be added without duplicating a rule or closing a cycle.
    bool can_add(const Rule& r) const {
        if (r.condition.variable == r.update.variable || contains(r)) return false;
        auto g = dependency_graph_of(rules_);
        auto edge = std::make_pair(r.condition.variable, r.update.variable);
        if (std::binary_search(g.edges.begin(), g.edges.end(), edge)) return true;
        // adding a->b closes a cycle iff b already reaches a
        std::map<std::string, std::vector<std::string>> out;
        for (const auto& [a, b] : g.edges) out[a].push_back(b);
        std::vector<std::string> stack{r.update.variable};
        std::set<std::string> seen;
        while (!stack.empty()) {
            auto n = stack.back();
            stack.pop_back();
            if (n == r.condition.variable) return false;
            if (!seen.insert(n).second) continue;
            for (const auto& m : out[n]) stack.push_back(m);
        }
        return true;
    }

    Model with(Rule r) const {
        if (!can_add(r)) throw ModelError("cannot add rule: " + to_string(r));
        Model m = *this;
        m.rules_.insert(std::upper_bound(m.rules_.begin(), m.rules_.end(), r, rule_less), std::move(r));
        return m;
    }

    friend bool operator==(const Model&, const Model&) = default;

private:
    std::vector<Rule> rules_;
};

inline DependencyGraph dependency_graph(const Model& m) { return dependency_graph_of(m.rules()); }

/// Each rule is one condition literal plus one update literal.
inline std::size_t rule_term_count(const Model& m) { return 2 * m.size(); }

/// Number of labeled DAGs on n nodes with at most m edges (Rodionov recurrence).
inline boost::multiprecision::cpp_int count_dags(int n, int m) {
    using boost::multiprecision::cpp_int;
    if (n < 1 || m < 0) throw std::invalid_argument("count_dags needs n >= 1 and m >= 0");
    auto binom = [](long long a, long long b) -> cpp_int {
        if (b < 0 || b > a) return 0;
        cpp_int r = 1;
        for (long long i = 1; i <= b; ++i) r = r * (a - b + i) / i;
        return r;
    };
    // memo[k][j] = A(k, j); A(0, .) = A(1, .) = 1
    std::vector<std::vector<cpp_int>> memo(static_cast<std::size_t>(n) + 1,
                                           std::vector<cpp_int>(static_cast<std::size_t>(m) + 1, 0));
    for (int j = 0; j <= m; ++j) memo[0][static_cast<std::size_t>(j)] = memo[1][static_cast<std::size_t>(j)] = 1;
    for (int k = 2; k <= n; ++k)
        for (int mm = 0; mm <= m; ++mm) {
            cpp_int total = 0;
            for (int i = 1; i <= k; ++i) {
                cpp_int inner = 0;
                for (int j = 0; j <= mm; ++j)
                    inner += binom(static_cast<long long>(i) * (k - i), mm - j) *
                             memo[static_cast<std::size_t>(k - i)][static_cast<std::size_t>(j)];
                inner *= binom(k, i);
                if (i % 2 == 1) total += inner;
                else total -= inner;
            }
            memo[static_cast<std::size_t>(k)][static_cast<std::size_t>(mm)] = total;
        }
    return memo[static_cast<std::size_t>(n)][static_cast<std::size_t>(m)];
}

// ─── Binding rules to a schema ────────────────────────────────
// Resolves variable names and category tokens once so rules can be
// evaluated per event without lookups.

/// A set of value codes: either the contiguous range [lo, hi] or an
/// explicit sorted list.
struct ValueSet {
    int lo = 0;
    int hi = -1;
    const std::vector<int>* list = nullptr;

    bool empty() const { return list ? list->empty() : hi < lo; }
    std::size_t size() const { return list ? list->size() : (hi < lo ? 0 : static_cast<std::size_t>(hi - lo + 1)); }
    bool contains(int code) const {
        if (list) return std::binary_search(list->begin(), list->end(), code);
        return code >= lo && code <= hi;
    }
    int single() const { return list ? list->front() : lo; }
    std::vector<int> to_vector() const {
        if (list) return *list;
        std::vector<int> out;
        for (int c = lo; c <= hi; ++c) out.push_back(c);
        return out;
    }
};

struct BoundCondition {
    std::size_t var = 0;
    ConditionOp op = ConditionOp::eq;
    double a = 0.0;
    double b = 0.0;
    bool valid = true;  // false when a category constant is outside the domain
    /// Set for numerical variables with a histogram: values are compared
    /// after discretization, bins for = and ->, representatives for <= and >=.
    const Histogram* hist = nullptr;

    bool fires(const Event* prev, const Event& cur) const {
        if (!valid) return false;
        const double x = cur.values[var];
        if (is_missing(x)) return false;
        switch (op) {
            case ConditionOp::eq: return same(x, a);
            case ConditionOp::ne: return !same(x, a);
            case ConditionOp::le: return level(x) <= a;
            case ConditionOp::ge: return level(x) >= a;
            case ConditionOp::transition: {
                if (!prev) return false;
                const double p = prev->values[var];
                return !is_missing(p) && same(p, a) && same(x, b);
            }
        }
        return false;
    }

private:
    bool same(double x, double y) const { return hist ? hist->bin_of(x) == hist->bin_of(y) : x == y; }
    double level(double x) const { return hist ? hist->representatives[hist->bin_of(x)] : x; }
};

struct BoundUpdate {
    std::size_t var = 0;
    UpdateType type = UpdateType::point_assign;
    bool categorical = true;
    double a = 0.0;
    double b = 0.0;
    std::vector<int> fixed;  // codes for set/point/interval updates
    const Histogram* hist = nullptr;

    /// Whether the predicted set depends on the previous event.
    bool relative() const {
        return type == UpdateType::relative_point || type == UpdateType::relative_interval ||
               type == UpdateType::multiplicative;
    }

    ValueSet predict(const Event* prev) const {
        if (type == UpdateType::interval_assign)
            return fixed.empty() ? ValueSet{} : ValueSet{fixed.front(), fixed.back(), nullptr};
        if (!relative()) return ValueSet{0, -1, &fixed};
        if (!prev || is_missing(prev->values[var])) return {};
        // start from the previous value as a decoder sees it
        const double p = hist->representatives[hist->bin_of(prev->values[var])];
        switch (type) {
            case UpdateType::relative_point: {
                int k = static_cast<int>(hist->bin_of(p + a));
                return ValueSet{k, k, nullptr};
            }
            case UpdateType::relative_interval:
                return ValueSet{static_cast<int>(hist->bin_of(p + a)), static_cast<int>(hist->bin_of(p + b)), nullptr};
            default: {
                int k = static_cast<int>(hist->bin_of(a * p));
                return ValueSet{k, k, nullptr};
            }
        }
    }

    /// Exact numerical prediction for point-like updates.
    std::optional<double> point_value(const Event* prev) const {
        switch (type) {
            case UpdateType::point_assign:
                if (!categorical) return a;
                return std::nullopt;
            case UpdateType::relative_point:
                if (prev && !is_missing(prev->values[var])) return prev->values[var] + a;
                return std::nullopt;
            case UpdateType::multiplicative:
                if (prev && !is_missing(prev->values[var])) return a * prev->values[var];
                return std::nullopt;
            default: return std::nullopt;
        }
    }
};

struct BoundRule {
    const Rule* rule = nullptr;
    BoundCondition condition;
    BoundUpdate update;
};

namespace detail {

inline double bind_constant(const VariableSchema& var, const Constant& c, bool& valid) {
    if (var.categorical()) {
        auto* s = std::get_if<std::string>(&c);
        if (!s) throw DataError("kind mismatch: numerical constant for categorical variable " + var.name);
        auto code = var.category_code(*s);
        if (!code) {
            valid = false;
            return -1.0;
        }
        return static_cast<double>(*code);
    }
    auto* d = std::get_if<double>(&c);
    if (!d) throw DataError("kind mismatch: category constant for numerical variable " + var.name);
    return *d;
}

}  // namespace detail

inline BoundCondition bind(const Condition& c, const Schema& schema) {
    BoundCondition bc;
    bc.var = schema.require(c.variable);
    bc.op = c.op;
    const auto& var = schema[bc.var];
    if ((c.op == ConditionOp::le || c.op == ConditionOp::ge) && var.categorical())
        throw DataError("kind mismatch: " + std::string(op_symbol(c.op)) + " on categorical variable " + var.name);
    if (!var.categorical() && !var.histogram.representatives.empty()) bc.hist = &var.histogram;
    bc.a = detail::bind_constant(var, c.constants.at(0), bc.valid);
    if (c.op == ConditionOp::transition) bc.b = detail::bind_constant(var, c.constants.at(1), bc.valid);
    // like an unknown category, a value outside the observed range never matches
    if (bc.hist && c.op != ConditionOp::le && c.op != ConditionOp::ge) {
        auto outside = [&](double x) { return x < bc.hist->min || x > bc.hist->max; };
        if (outside(bc.a) || (c.op == ConditionOp::transition && outside(bc.b))) bc.valid = false;
    }
    return bc;
}

inline BoundUpdate bind(const UpdateRule& u, const Schema& schema) {
    BoundUpdate bu;
    bu.var = schema.require(u.variable);
    bu.type = u.type;
    const auto& var = schema[bu.var];
    bu.categorical = var.categorical();
    if (var.categorical() && numeric_only(u.type))
        throw DataError("kind mismatch: update '" + std::string(type_tag(u.type)) + "' on categorical variable " +
                        var.name);
    if (!var.categorical()) bu.hist = &var.histogram;
    switch (u.type) {
        case UpdateType::set_member:
        case UpdateType::point_assign: {
            for (const auto& c : u.constants) {
                bool valid = true;
                double x = detail::bind_constant(var, c, valid);
                if (!valid) continue;
                bu.fixed.push_back(var.categorical() ? static_cast<int>(x) : static_cast<int>(var.histogram.bin_of(x)));
            }
            std::sort(bu.fixed.begin(), bu.fixed.end());
            bu.fixed.erase(std::unique(bu.fixed.begin(), bu.fixed.end()), bu.fixed.end());
            bool valid = true;
            bu.a = detail::bind_constant(var, u.constants[0], valid);
            break;
        }
        case UpdateType::interval_assign:
            bu.a = std::get<double>(u.constants[0]);
            bu.b = std::get<double>(u.constants[1]);
            for (auto k = var.histogram.bin_of(bu.a); k <= var.histogram.bin_of(bu.b); ++k)
                bu.fixed.push_back(static_cast<int>(k));
            break;
        case UpdateType::relative_point:
        case UpdateType::multiplicative:
            bu.a = std::get<double>(u.constants[0]);
            break;
        case UpdateType::relative_interval:
            bu.a = std::get<double>(u.constants[0]);
            bu.b = std::get<double>(u.constants[1]);
            break;
    }
    return bu;
}

inline BoundRule bind(const Rule& r, const Schema& schema) { return BoundRule{&r, bind(r.condition, schema), bind(r.update, schema)}; }

inline std::vector<BoundRule> bind(const Model& m, const Schema& schema) {
    std::vector<BoundRule> out;
    out.reserve(m.size());
    for (const auto& r : m.rules()) out.push_back(bind(r, schema));
    return out;
}

/// Whether condition c holds at cur, given the previous event of the trace (or none).
inline bool condition_fires(const Condition& c, const Schema& schema, const Event* prev, const Event& cur) {
    return bind(c, schema).fires(prev, cur);
}

/// Concrete values (category or bin codes) an update rule allows at an event.
inline std::vector<int> predicted_values(const UpdateRule& u, const Schema& schema, const Event* prev) {
    auto bu = bind(u, schema);
    return bu.predict(prev).to_vector();
}

/// Schema variable indices in decode order: topological with respect to
/// the model's dependency graph, ties broken by schema position.
inline std::vector<std::size_t> variable_order(const Schema& schema, const Model& m) {
    const std::size_t n = schema.size();
    std::vector<int> indeg(n, 0);
    std::vector<std::vector<std::size_t>> out(n);
    for (const auto& [a, b] : dependency_graph(m).edges) {
        auto ia = schema.require(a), ib = schema.require(b);
        out[ia].push_back(ib);
        ++indeg[ib];
    }
    std::priority_queue<std::size_t, std::vector<std::size_t>, std::greater<>> ready;
    for (std::size_t i = 0; i < n; ++i)
        if (indeg[i] == 0) ready.push(i);
    std::vector<std::size_t> order;
    while (!ready.empty()) {
        auto i = ready.top();
        ready.pop();
        order.push_back(i);
        for (auto j : out[i])
            if (--indeg[j] == 0) ready.push(j);
    }
    if (order.size() != n) throw ModelError("model dependency graph has a cycle");
    return order;
}

}  // namespace moody
