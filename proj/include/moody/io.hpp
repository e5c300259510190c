#pragma once

#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"

#include "moody/evaluation.hpp"
#include "moody/log_model.hpp"
#include "moody/rule_model.hpp"
#include "moody/xes.hpp"

namespace moody {

using nlohmann::json;

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot read " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path);
    out << content;
}

/// Load a CSV or XES log, chosen by file extension.
inline EventLog read_log(const std::string& path, const LogOptions& opts = {}) {
    const auto text = read_file(path);
    const bool xes = path.size() >= 4 && path.compare(path.size() - 4, 4, ".xes") == 0;
    return xes ? parse_xes(text, opts) : parse_csv(text, opts);
}

// ─── Models ───────────────────────────────────────────────────

inline json constants_to_json(const std::vector<Constant>& cs) {
    json arr = json::array();
    for (const auto& c : cs) {
        if (auto* d = std::get_if<double>(&c)) arr.push_back(*d);
        else arr.push_back(std::get<std::string>(c));
    }
    return arr;
}

inline std::vector<Constant> constants_from_json(const json& arr) {
    if (!arr.is_array()) throw ModelError("constants must be an array");
    std::vector<Constant> out;
    for (const auto& c : arr) {
        if (c.is_number()) out.emplace_back(c.get<double>());
        else if (c.is_string()) out.emplace_back(c.get<std::string>());
        else throw ModelError("constant must be a number or a string");
    }
    return out;
}

inline json model_to_json(const Model& m) {
    json rules = json::array();
    for (const auto& r : m.rules()) {
        rules.push_back({
            {"condition",
             {{"variable", r.condition.variable},
              {"op", std::string(op_symbol(r.condition.op))},
              {"constants", constants_to_json(r.condition.constants)}}},
            {"update",
             {{"variable", r.update.variable},
              {"type", std::string(type_tag(r.update.type))},
              {"constants", constants_to_json(r.update.constants)}}},
        });
    }
    return {{"rules", rules}};
}

inline Model model_from_json(const json& j, int precision = 3) {
    try {
        std::vector<Rule> rules;
        for (const auto& r : j.at("rules")) {
            const auto& c = r.at("condition");
            const auto& u = r.at("update");
            auto op = parse_op(c.at("op").get<std::string>());
            if (!op) throw ModelError("unknown operator: " + c.at("op").get<std::string>());
            auto type = parse_type(u.at("type").get<std::string>());
            if (!type) throw ModelError("unknown update type: " + u.at("type").get<std::string>());
            rules.push_back(make_rule(
                make_condition(c.at("variable").get<std::string>(), *op, constants_from_json(c.at("constants")), precision),
                make_update(u.at("variable").get<std::string>(), *type, constants_from_json(u.at("constants")), precision)));
        }
        return Model(std::move(rules));
    } catch (const json::exception& e) {
        throw ModelError(std::string("malformed model JSON: ") + e.what());
    }
}

inline Model read_model(const std::string& path, int precision = 3) {
    try {
        return model_from_json(json::parse(read_file(path)), precision);
    } catch (const json::parse_error& e) {
        throw ModelError("malformed model JSON in " + path + ": " + e.what());
    }
}

// ─── Schema sidecar ───────────────────────────────────────────
// {"kinds": {"amount": "numerical"}, "categories": {"vendor": ["A", "B", "C"]}}

inline void apply_schema_json(const json& j, LogOptions& opts) {
    try {
        if (j.contains("kinds"))
            for (const auto& [name, kind] : j.at("kinds").items()) {
                const auto k = kind.get<std::string>();
                if (k == "categorical") opts.kinds[name] = VariableKind::categorical;
                else if (k == "numerical") opts.kinds[name] = VariableKind::numerical;
                else throw DataError("unknown variable kind: " + k);
            }
        if (j.contains("categories"))
            for (const auto& [name, values] : j.at("categories").items())
                opts.categories[name] = values.get<std::vector<std::string>>();
    } catch (const json::exception& e) {
        throw DataError(std::string("malformed schema JSON: ") + e.what());
    }
}

inline json schema_to_json(const Schema& schema) {
    json kinds = json::object(), categories = json::object();
    for (const auto& var : schema.variables()) {
        kinds[var.name] = std::string(to_string(var.kind));
        if (var.categorical()) categories[var.name] = var.categories;
    }
    return {{"kinds", kinds}, {"categories", categories}};
}

// ─── Reports ──────────────────────────────────────────────────

inline json report_to_json(const MetricsReport& r) {
    auto opt = [](const std::optional<double>& x) { return x ? json(*x) : json(nullptr); };
    json j = {
        {"f1_averaging", "macro"},
        {"f1", r.f1},
        {"rmse", r.rmse},
        {"median_f1", opt(r.median_f1)},
        {"median_rmse", opt(r.median_rmse)},
        {"rule_terms", r.rule_terms},
    };
    if (r.runtime_seconds) j["runtime_seconds"] = *r.runtime_seconds;
    return j;
}

}  // namespace moody
