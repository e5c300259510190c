#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>

#include "moody/scorer.hpp"
#include "moody/synthgen.hpp"

using namespace moody;

TEST(GroundTruth, DefaultModelIsAcyclicWithFiveRules) {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        SynthConfig cfg;
        cfg.seed = seed;
        auto m = sample_ground_truth(cfg);
        EXPECT_EQ(m.size(), 5u);
        EXPECT_TRUE(is_acyclic(dependency_graph(m)));
        for (const auto& r : m.rules()) {
            EXPECT_NE(r.condition.op, ConditionOp::transition);
            EXPECT_NE(r.condition.op, ConditionOp::ne);
        }
    }
}

TEST(GroundTruth, TargetKinds) {
    SynthConfig cfg;
    cfg.seed = 3;
    cfg.target_kind = TargetKind::categorical_only;
    for (const auto& r : sample_ground_truth(cfg).rules()) EXPECT_TRUE(r.update.variable == "activity" || r.update.variable.rfind("cat", 0) == 0);
    cfg.target_kind = TargetKind::numerical_only;
    for (const auto& r : sample_ground_truth(cfg).rules()) EXPECT_EQ(r.update.variable.rfind("num", 0), 0u);
    cfg.n_num = 0;
    cfg.n_cat = 3;
    EXPECT_THROW(sample_ground_truth(cfg), std::invalid_argument);
}

TEST(GroundTruth, AttemptCapRaises) {
    SynthConfig cfg;
    cfg.n_rules = 200;
    cfg.max_attempts = 100;
    EXPECT_THROW(sample_ground_truth(cfg), std::runtime_error);
}

TEST(Generate, EventCountAndDeterminism) {
    SynthConfig cfg;
    cfg.seed = 4;
    auto gt = sample_ground_truth(cfg);
    auto a = generate_log(gt, cfg), b = generate_log(gt, cfg);
    EXPECT_GE(a.event_count(), 2000u);
    EXPECT_LE(a.event_count(), 2000u + 15u - 1u);
    EXPECT_EQ(serialize_csv(a), serialize_csv(b));
    for (const auto& t : a.traces) {
        EXPECT_GE(t.events.size(), 5u);
        EXPECT_LE(t.events.size(), 15u);
    }
}

TEST(Generate, GroundTruthRulesHoldOnNoiselessLogs) {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        SynthConfig cfg;
        cfg.seed = seed;
        auto gt = sample_ground_truth(cfg);
        auto log = generate_log(gt, cfg);
        auto bound = bind(gt, log.schema);
        // the generator decides firing on raw values, so conditions are bound without histograms
        auto raw_vars = log.schema.variables();
        for (auto& var : raw_vars) var.histogram = Histogram{};
        const Schema raw_schema(raw_vars);
        for (auto& br : bound) br.condition = bind(br.rule->condition, raw_schema);
        for (const auto& trace : log.traces)
            for (std::size_t i = 0; i < trace.events.size(); ++i) {
                const Event* prev = i ? &trace.events[i - 1] : nullptr;
                const Event& ev = trace.events[i];
                // the canonically first rule that fires with a prediction decides the value
                for (std::size_t v = 0; v < log.schema.size(); ++v)
                    for (const auto& br : bound) {
                        if (br.update.var != v || !br.condition.fires(prev, ev) || br.update.predict(prev).empty()) continue;
                        const auto& u = br.rule->update;
                        const double x = ev.values[v];
                        if (auto p = br.update.point_value(prev)) {
                            EXPECT_DOUBLE_EQ(x, *p);
                        } else if (u.type == UpdateType::interval_assign) {
                            EXPECT_GE(x, std::get<double>(u.constants[0]));
                            EXPECT_LE(x, std::get<double>(u.constants[1]));
                        } else if (u.type == UpdateType::relative_interval) {
                            const double d = x - prev->values[v];
                            EXPECT_GE(d, std::get<double>(u.constants[0]) - 1e-9);
                            EXPECT_LE(d, std::get<double>(u.constants[1]) + 1e-9);
                        } else {
                            EXPECT_TRUE(br.update.predict(prev).contains(log.schema[v].code_of(x)));
                        }
                        break;
                    }
            }
    }
}

TEST(Generate, EmptyModelLooksIndependent) {
    SynthConfig cfg;
    cfg.seed = 8;
    cfg.n_events = 20000;
    auto log = generate_log(Model(), cfg);
    // chi-square test of independence between activity and cat1
    const std::size_t a = log.schema.require("activity"), c = log.schema.require("cat1");
    const std::size_t na = log.schema[a].domain_size(), nc = log.schema[c].domain_size();
    std::vector<std::vector<double>> table(na, std::vector<double>(nc, 0.0));
    for (const auto& t : log.traces)
        for (const auto& e : t.events) table[static_cast<std::size_t>(e.values[a])][static_cast<std::size_t>(e.values[c])] += 1;
    const double n = static_cast<double>(log.event_count());
    double chi2 = 0.0;
    for (std::size_t i = 0; i < na; ++i)
        for (std::size_t j = 0; j < nc; ++j) {
            double ri = 0, cj = 0;
            for (std::size_t k = 0; k < nc; ++k) ri += table[i][k];
            for (std::size_t k = 0; k < na; ++k) cj += table[k][j];
            const double expected = ri * cj / n;
            if (expected > 0) chi2 += (table[i][j] - expected) * (table[i][j] - expected) / expected;
        }
    // 16 degrees of freedom; 0.999 quantile is about 39.25
    EXPECT_LT(chi2, 39.25);
}

TEST(Noise, ZeroIsIdentity) {
    SynthConfig cfg;
    auto log = generate_log(sample_ground_truth(cfg), cfg);
    EXPECT_EQ(serialize_csv(add_swap_noise(log, 0.0, 1)), serialize_csv(log));
}

TEST(Noise, PreservesMultisetsAndTouchesAtMostTheSelection) {
    SynthConfig cfg;
    cfg.n_events = 1000;
    cfg.trace_len = {10, 10};
    auto log = generate_log(sample_ground_truth(cfg), cfg);
    ASSERT_EQ(log.event_count(), 1000u);
    auto noisy = add_swap_noise(log, 0.1, 7);
    for (std::size_t v = 0; v < log.schema.size(); ++v) {
        std::vector<double> before, after;
        std::size_t changed = 0;
        for (std::size_t t = 0; t < log.traces.size(); ++t)
            for (std::size_t i = 0; i < log.traces[t].events.size(); ++i) {
                const double x = log.traces[t].events[i].values[v], y = noisy.traces[t].events[i].values[v];
                before.push_back(x);
                after.push_back(y);
                changed += x != y;
            }
        std::sort(before.begin(), before.end());
        std::sort(after.begin(), after.end());
        EXPECT_EQ(before, after);
        EXPECT_LE(changed, 100u);
        EXPECT_GT(changed, 50u);
    }
    EXPECT_THROW(add_swap_noise(log, 1.5, 1), std::invalid_argument);
}

TEST(Noise, Deterministic) {
    SynthConfig cfg;
    auto log = generate_log(sample_ground_truth(cfg), cfg);
    EXPECT_EQ(serialize_csv(add_swap_noise(log, 0.2, 3)), serialize_csv(add_swap_noise(log, 0.2, 3)));
}
