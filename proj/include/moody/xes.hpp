#pragma once

#include <cctype>
#include <cstdio>
#include <ctime>
#include <istream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>

#include "moody/log_model.hpp"

namespace moody {

/// Seconds since the Unix epoch for an ISO-8601 timestamp such as
/// 2023-04-01T12:30:00.000+02:00. Throws DataError on malformed input.
inline double parse_xes_date(const std::string& s) {
    std::tm tm{};
    int consumed = 0;
    if (std::sscanf(s.c_str(), "%4d-%2d-%2dT%2d:%2d:%2d%n", &tm.tm_year, &tm.tm_mon, &tm.tm_mday, &tm.tm_hour,
                    &tm.tm_min, &tm.tm_sec, &consumed) != 6)
        throw DataError("bad XES date: " + s);
    tm.tm_year -= 1900;
    tm.tm_mon -= 1;
    double seconds = static_cast<double>(timegm(&tm));
    std::size_t pos = static_cast<std::size_t>(consumed);
    if (pos < s.size() && s[pos] == '.') {
        std::size_t end = pos + 1;
        while (end < s.size() && std::isdigit(static_cast<unsigned char>(s[end]))) ++end;
        seconds += std::stod("0" + s.substr(pos, end - pos));
        pos = end;
    }
    if (pos < s.size() && (s[pos] == '+' || s[pos] == '-')) {
        int hh = 0, mm = 0;
        if (std::sscanf(s.c_str() + pos + 1, "%2d:%2d", &hh, &mm) < 1) throw DataError("bad XES date: " + s);
        const double offset = hh * 3600.0 + mm * 60.0;
        seconds += s[pos] == '+' ? -offset : offset;
    }
    return seconds;
}

namespace detail {

using XesAttributes = std::map<std::string, RawCell>;

inline XesAttributes xes_attributes(const boost::property_tree::ptree& node) {
    XesAttributes out;
    for (const auto& [tag, child] : node) {
        if (tag == "<xmlattr>" || tag == "event" || tag == "trace") continue;
        const auto key = child.get<std::string>("<xmlattr>.key", "");
        const auto value = child.get<std::string>("<xmlattr>.value", "");
        if (key.empty()) continue;
        if (tag == "int" || tag == "float") {
            auto x = parse_number(value);
            if (!x) throw DataError("bad XES " + tag + " value for " + key + ": " + value);
            out[key] = *x;
        } else if (tag == "date") {
            out[key] = parse_xes_date(value);
        } else if (tag == "string" || tag == "boolean" || tag == "id") {
            out[key] = value;
        }
    }
    return out;
}

}  // namespace detail

/// Import an XES log. Event attributes become variables (concept:name is
/// renamed to activity); int, float and date attributes are numerical,
/// dates as epoch seconds.
inline EventLog parse_xes(std::istream& in, const LogOptions& opts = {}) {
    namespace pt = boost::property_tree;
    pt::ptree tree;
    try {
        pt::read_xml(in, tree);
    } catch (const pt::xml_parser_error& e) {
        throw DataError(std::string("malformed XES: ") + e.what());
    }
    const auto root = tree.get_child_optional("log");
    if (!root) throw DataError("malformed XES: no <log> element");

    std::vector<std::pair<std::string, std::vector<detail::XesAttributes>>> traces;
    std::vector<std::string> variables;
    std::map<std::string, bool> seen;
    std::size_t index = 0;
    for (const auto& [tag, trace] : *root) {
        if (tag != "trace") continue;
        auto trace_attrs = detail::xes_attributes(trace);
        std::string id = std::to_string(index++);
        if (auto it = trace_attrs.find("concept:name"); it != trace_attrs.end())
            id = detail::cell_token(it->second);
        std::vector<detail::XesAttributes> events;
        for (const auto& [etag, event] : trace) {
            if (etag != "event") continue;
            auto attrs = detail::xes_attributes(event);
            if (auto it = attrs.find("concept:name"); it != attrs.end()) {
                attrs["activity"] = it->second;
                attrs.erase(it);
            }
            for (const auto& [key, value] : attrs)
                if (seen.emplace(key, true).second) variables.push_back(key);
            events.push_back(std::move(attrs));
        }
        traces.emplace_back(std::move(id), std::move(events));
    }

    RawLog raw;
    raw.variables = variables;
    for (auto& [id, events] : traces) {
        RawTrace rt;
        rt.id = id;
        for (auto& attrs : events) {
            std::vector<RawCell> cells;
            for (const auto& var : variables) {
                auto it = attrs.find(var);
                cells.push_back(it == attrs.end() ? RawCell{} : it->second);
            }
            rt.events.push_back(std::move(cells));
        }
        raw.traces.push_back(std::move(rt));
    }
    return build_log(raw, opts);
}

inline EventLog parse_xes(const std::string& text, const LogOptions& opts = {}) {
    std::istringstream in(text);
    return parse_xes(in, opts);
}

}  // namespace moody
