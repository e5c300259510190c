#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>

#include "moody/log_model.hpp"
#include "moody/rule_model.hpp"

namespace moody {

/// Leading constant of Rissanen's universal code for the integers.
inline constexpr double kUniversalConstant = 2.865064;

/// How the significand of a real constant is encoded.
enum class RealCodeReading {
    significand,  // L_N(|k| + 1) with k the integer significand at p digits
    printed,      // L_N(ceil(|k| * 10^s) + 1), i.e. L_N(ceil|alpha| + 1)
};

enum class CounterScope { global, per_variable };

/// Encoding parameters. Defaults are the ones the acceptance anchors are checked under.
struct CodecConfig {
    double epsilon = 0.5;
    int precision = 3;
    RealCodeReading real_code_reading = RealCodeReading::significand;
    /// Prefix every value set with L_N(set size) so its end is decodable.
    bool set_delimiter = true;
    CounterScope counter_scope = CounterScope::global;
    /// Charge -log2 of the smoothed plug-in probability for each model-stream
    /// symbol. When false, the plain probability is summed instead.
    bool prequential_neg_log = true;
};

/// L_N(x) = log2(c) + log2 x + log2 log2 x + ..., positive terms only.
inline double universal_int(std::uint64_t x) {
    if (x < 1) throw std::domain_error("universal_int needs x >= 1");
    double bits = std::log2(kUniversalConstant);
    double term = std::log2(static_cast<double>(x));
    while (term > 0.0) {
        bits += term;
        term = std::log2(term);
    }
    return bits;
}

/// Decimal scientific decomposition alpha ~ k * 10^s with |k| minimal at p digits.
struct Scientific {
    long long significand = 0;
    int exponent = 0;
};

inline Scientific scientific(double alpha, int p) {
    if (alpha == 0.0) return {};
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*e", p - 1, alpha);
    // buf looks like "-d.ddde+XX"
    std::string digits;
    const char* c = buf;
    bool negative = *c == '-';
    if (negative) ++c;
    for (; *c && *c != 'e'; ++c)
        if (*c >= '0' && *c <= '9') digits.push_back(*c);
    int exp10 = std::atoi(c + 1);
    int s = exp10 - static_cast<int>(digits.size() - 1);
    while (digits.size() > 1 && digits.back() == '0') {
        digits.pop_back();
        ++s;
    }
    long long k = std::stoll(digits);
    return {negative ? -k : k, s};
}

/// Code length of a real constant: sign bits, exponent, significand.
inline double real_code(double alpha, int precision = 3,
                        RealCodeReading reading = RealCodeReading::significand) {
    if (!std::isfinite(alpha)) throw std::domain_error("real_code needs a finite value");
    if (alpha == 0.0) return 2.0 + 2.0 * universal_int(1);
    auto sci = scientific(alpha, precision);
    const auto abs_s = static_cast<std::uint64_t>(std::llabs(sci.exponent));
    std::uint64_t mantissa;
    if (reading == RealCodeReading::significand) {
        mantissa = static_cast<std::uint64_t>(std::llabs(sci.significand));
    } else {
        mantissa = static_cast<std::uint64_t>(std::ceil(std::fabs(round_significant(alpha, precision))));
    }
    return 2.0 + universal_int(abs_s + 1) + universal_int(mantissa + 1);
}

// ─── Prequential plug-in code ─────────────────────────────────

struct PrequentialCounter {
    std::int64_t check_count = 0;
    std::int64_t cross_count = 0;
    double epsilon = 0.5;

    double probability(bool check) const {
        const double usg = static_cast<double>(check ? check_count : cross_count);
        return (usg + epsilon) / (static_cast<double>(check_count + cross_count) + 2.0 * epsilon);
    }

    PrequentialCounter updated(bool check) const {
        auto c = *this;
        ++(check ? c.check_count : c.cross_count);
        return c;
    }
};

/// Bits for one model-stream symbol and the counter after seeing it.
inline std::pair<double, PrequentialCounter> prequential_code(const PrequentialCounter& counter, bool check,
                                                              bool neg_log = true) {
    const double p = counter.probability(check);
    return {neg_log ? -std::log2(p) : p, counter.updated(check)};
}

/// Total prequential length of any sequence with the given symbol counts.
/// The plug-in code is exchangeable, so the order of symbols does not matter.
inline double prequential_length(std::int64_t checks, std::int64_t crosses, double epsilon = 0.5) {
    if (checks == 0 && crosses == 0) return 0.0;
    const double a = static_cast<double>(checks), b = static_cast<double>(crosses);
    const double ln = std::lgamma(a + b + 2.0 * epsilon) - std::lgamma(2.0 * epsilon) -
                      (std::lgamma(a + epsilon) - std::lgamma(epsilon)) -
                      (std::lgamma(b + epsilon) - std::lgamma(epsilon));
    return ln / std::log(2.0);
}

// ─── Value codes ──────────────────────────────────────────────

/// -log2(freq(value) / sum of freq over the allowed values).
inline double value_code(int value, std::span<const int> allowed, std::span<const std::int64_t> freq) {
    std::int64_t total = 0;
    bool found = false;
    for (int j : allowed) {
        total += freq[static_cast<std::size_t>(j)];
        found = found || j == value;
    }
    if (!found) throw std::invalid_argument("value_code: value not in allowed set");
    if (total <= 0) throw std::invalid_argument("value_code: zero total frequency");
    return -std::log2(static_cast<double>(freq[static_cast<std::size_t>(value)]) / static_cast<double>(total));
}

// ─── Model lengths ────────────────────────────────────────────

inline double constant_length(const VariableSchema& var, const Constant& c, const CodecConfig& cfg) {
    if (var.categorical()) return std::log2(static_cast<double>(var.categories.size()));
    return real_code(std::get<double>(c), cfg.precision, cfg.real_code_reading);
}

inline double condition_length(const Condition& c, const Schema& schema, const CodecConfig& cfg = {}) {
    const auto& var = schema[schema.require(c.variable)];
    double bits = std::log2(static_cast<double>(kConditionOpCount)) + std::log2(static_cast<double>(schema.size()));
    for (const auto& k : c.constants) bits += constant_length(var, k, cfg);
    return bits;
}

inline double update_length(const UpdateRule& u, const Schema& schema, const CodecConfig& cfg = {}) {
    const auto& var = schema[schema.require(u.variable)];
    double bits = std::log2(static_cast<double>(kUpdateTypeCount)) + std::log2(static_cast<double>(schema.size()));
    if (u.type == UpdateType::set_member && cfg.set_delimiter) bits += universal_int(u.constants.size());
    for (const auto& k : u.constants) bits += constant_length(var, k, cfg);
    return bits;
}

inline double rule_length(const Rule& r, const Schema& schema, const CodecConfig& cfg = {}) {
    return condition_length(r.condition, schema, cfg) + update_length(r.update, schema, cfg);
}

/// L(M) = L_N(|M| + 1) + sum of condition and update lengths.
inline double model_length(const Model& m, const Schema& schema, const CodecConfig& cfg = {}) {
    double bits = universal_int(m.size() + 1);
    for (const auto& r : m.rules()) bits += rule_length(r, schema, cfg);
    return bits;
}

}  // namespace moody
