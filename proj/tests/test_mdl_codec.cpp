#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "moody/mdl_codec.hpp"
#include "support.hpp"

using namespace moody;

namespace {

const double kLog2C = std::log2(2.865064);

Schema three_categorical() {
    return parse_csv("trace_id,event_index,a,b,c\nt,0,x,p,u\nt,1,y,q,v\nt,2,z,r,w\n").schema;
}

}  // namespace

TEST(UniversalInt, FirstValues) {
    EXPECT_NEAR(universal_int(1), 1.5186, 1e-4);
    EXPECT_NEAR(universal_int(2), 2.5186, 1e-4);
    EXPECT_NEAR(universal_int(3), kLog2C + std::log2(3.0) + std::log2(std::log2(3.0)), 1e-12);
    // log2 16 = 4, log2 4 = 2, log2 2 = 1, then 0
    EXPECT_NEAR(universal_int(16), kLog2C + 7.0, 1e-12);
    EXPECT_THROW(universal_int(0), std::domain_error);
}

TEST(UniversalInt, KraftInequality) {
    double sum = 0.0;
    for (std::uint64_t x = 1; x <= 1000000; ++x) sum += std::exp2(-universal_int(x));
    EXPECT_LE(sum, 1.0);
}

TEST(RealCode, Decomposition) {
    auto s = scientific(0.125, 3);
    EXPECT_EQ(s.significand, 125);
    EXPECT_EQ(s.exponent, -3);
    s = scientific(1200.0, 3);
    EXPECT_EQ(s.significand, 12);
    EXPECT_EQ(s.exponent, 2);
    s = scientific(-0.5, 3);
    EXPECT_EQ(s.significand, -5);
    EXPECT_EQ(s.exponent, -1);
    s = scientific(123456.0, 3);
    EXPECT_EQ(s.significand, 123);
    EXPECT_EQ(s.exponent, 3);
}

TEST(RealCode, Lengths) {
    EXPECT_NEAR(real_code(0.5), 10.447, 1e-3);
    EXPECT_NEAR(real_code(0.0), 5.037, 1e-3);
    EXPECT_NEAR(real_code(3.0), 2.0 + universal_int(1) + universal_int(4), 1e-12);
    EXPECT_DOUBLE_EQ(real_code(-3.0), real_code(3.0));
    EXPECT_THROW(real_code(INFINITY), std::domain_error);
}

TEST(Prequential, StepLengths) {
    PrequentialCounter c;
    auto [b1, c1] = prequential_code(c, true);
    EXPECT_DOUBLE_EQ(b1, 1.0);
    auto [b2, c2] = prequential_code(c1, true);
    EXPECT_NEAR(b2, -std::log2(0.75), 1e-12);
    EXPECT_DOUBLE_EQ(prequential_code(c, false).first, 1.0);
    EXPECT_EQ(c2.check_count, 2);
}

TEST(Prequential, ProbabilitiesSumToOneAndClosedFormMatches) {
    std::mt19937_64 gen(5);
    PrequentialCounter c;
    double sequential = 0.0;
    std::int64_t checks = 0, crosses = 0;
    for (int i = 0; i < 10000; ++i) {
        const double total = std::exp2(-prequential_code(c, true).first) + std::exp2(-prequential_code(c, false).first);
        ASSERT_NEAR(total, 1.0, 1e-12);
        const bool sym = gen() % 3 != 0;
        auto [bits, next] = prequential_code(c, sym);
        sequential += bits;
        c = next;
        ++(sym ? checks : crosses);
    }
    EXPECT_NEAR(prequential_length(checks, crosses), sequential, 1e-6);
    EXPECT_EQ(prequential_length(0, 0), 0.0);
}

TEST(ValueCode, Examples) {
    std::vector<std::int64_t> freq{6, 4, 1};
    std::vector<int> ab{0, 1};
    EXPECT_NEAR(value_code(1, ab, freq), 1.3219, 1e-4);
    std::vector<int> single{2};
    EXPECT_EQ(value_code(2, single, freq), 0.0);
    std::vector<std::int64_t> even{0, 1, 1};
    std::vector<int> bc{1, 2};
    EXPECT_DOUBLE_EQ(value_code(2, bc, even), 1.0);
    EXPECT_THROW(value_code(2, ab, freq), std::invalid_argument);
    std::vector<std::int64_t> zero{0, 0};
    EXPECT_THROW(value_code(0, ab, zero), std::invalid_argument);
}

TEST(ModelLength, ConditionLengths) {
    auto schema = three_categorical();
    auto eq = make_condition("a", ConditionOp::eq, {std::string("x")});
    EXPECT_NEAR(condition_length(eq, schema), 5.492, 1e-3);
    auto tr = make_condition("a", ConditionOp::transition, {std::string("x"), std::string("y")});
    EXPECT_NEAR(condition_length(tr, schema), 7.077, 1e-3);
    auto single = parse_csv("trace_id,event_index,a\nt,0,x\n").schema;
    EXPECT_NEAR(condition_length(eq, single), std::log2(5.0), 1e-12);
}

TEST(ModelLength, UpdateLengths) {
    auto schema = three_categorical();
    auto point = make_update("b", UpdateType::point_assign, {std::string("p")});
    EXPECT_NEAR(update_length(point, schema), 5.755, 1e-3);
    auto set = make_update("b", UpdateType::set_member, {std::string("p"), std::string("q")});
    // log2 6 + log2 3 + L_N(2) + 2 log2 3
    EXPECT_NEAR(update_length(set, schema), 9.858, 1e-3);
    CodecConfig no_delim;
    no_delim.set_delimiter = false;
    EXPECT_NEAR(update_length(set, schema) - update_length(set, schema, no_delim), universal_int(2), 1e-12);

    auto nums = parse_csv("trace_id,event_index,a,x\nt,0,u,1\nt,1,v,2\n").schema;
    auto interval = make_update("x", UpdateType::interval_assign, {0.5, 3.0});
    EXPECT_NEAR(update_length(interval, nums), std::log2(6.0) + 1.0 + real_code(0.5) + real_code(3.0), 1e-12);
}

TEST(ModelLength, ComposesRuleLengths) {
    auto schema = three_categorical();
    EXPECT_NEAR(model_length(Model(), schema), 1.5186, 1e-4);
    auto r1 = make_rule(make_condition("a", ConditionOp::eq, {std::string("x")}),
                        make_update("b", UpdateType::point_assign, {std::string("p")}));
    auto r2 = make_rule(make_condition("b", ConditionOp::ne, {std::string("q")}),
                        make_update("c", UpdateType::set_member, {std::string("u"), std::string("w")}));
    Model one({r1}), two({r1, r2});
    EXPECT_NEAR(model_length(one, schema), universal_int(2) + 5.492 + 5.755, 1e-3);
    EXPECT_NEAR(model_length(two, schema),
                universal_int(3) + rule_length(r1, schema) + rule_length(r2, schema), 1e-12);
    EXPECT_GT(model_length(two, schema), model_length(one, schema));
}
