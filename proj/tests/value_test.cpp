#include <gtest/gtest.h>

#include "kc/value.hpp"

namespace kc {
namespace {

TEST(Timestamp, ParsesUtcAndOffsets) {
  auto a = parse_timestamp("2017-08-15T14:33:02Z");
  auto b = parse_timestamp("2017-08-15T16:33:02+02:00");
  auto c = parse_timestamp("2017-08-15T14:33:02.5Z");
  ASSERT_TRUE(a && b && c);
  EXPECT_EQ(*a, *b);
  EXPECT_EQ(c->micros - a->micros, 500000);
  // 2017-08-15T14:33:02Z is 1502807582 seconds after the epoch.
  EXPECT_EQ(a->seconds(), 1502807582);
}

TEST(Timestamp, RejectsMissingZoneAndBadFields) {
  EXPECT_FALSE(parse_timestamp("2017-08-15T14:33:02"));
  EXPECT_FALSE(parse_timestamp("2017-13-15T14:33:02Z"));
  EXPECT_FALSE(parse_timestamp("2017-02-30T14:33:02Z"));
  EXPECT_FALSE(parse_timestamp("2017-08-15 14:33:02Z"));
  EXPECT_FALSE(parse_timestamp(""));
}

TEST(Timestamp, FormatRoundTrips) {
  for (const char* s : {"1970-01-01T00:00:00Z", "2016-02-29T23:59:59.999999Z", "2017-08-15T14:31:00.104211Z",
                        "1969-12-31T23:59:59Z"}) {
    auto ts = parse_timestamp(s);
    ASSERT_TRUE(ts) << s;
    EXPECT_EQ(format_timestamp(*ts), s);
  }
  EXPECT_EQ(timestamp_year(*parse_timestamp("2017-08-15T14:31:00Z")), 2017);
}

TEST(Value, TypedEqualityAndNumericComparison) {
  EXPECT_EQ(Value::decimal(93.50), Value::decimal(93.5));
  EXPECT_NE(Value::integer(1), Value::decimal(1.0));
  EXPECT_NE(Value::string("host:a"), Value::entity("host:a"));
  auto cmp = compare_values(Value::integer(93), Value::decimal(93.5));
  ASSERT_TRUE(cmp);
  EXPECT_TRUE(*cmp < 0);
  EXPECT_FALSE(compare_values(Value::string("a"), Value::integer(1)));
}

TEST(Value, TokenRoundTrip) {
  const std::vector<Value> values = {Value::entity("host:victim"),        Value::string("say \"hi\"\n"),
                                     Value::integer(-42),                 Value::decimal(93.5),
                                     Value::decimal(3.0),                 Value::timestamp(Timestamp{1502807582000001}),
                                     Value::entity("technique:a.b-c/d:e")};
  for (const auto& v : values) {
    const std::string tok = format_value(v);
    auto back = parse_value_token(tok);
    ASSERT_TRUE(back) << tok;
    EXPECT_EQ(*back, v) << tok;
    EXPECT_EQ(back->kind(), v.kind()) << tok;
  }
  EXPECT_EQ(format_value(Value::decimal(3.0)), "3.0");
}

TEST(Value, EntityIdShape) {
  EXPECT_TRUE(is_entity_id("host:192.168.56.102"));
  EXPECT_TRUE(is_entity_id("event:e0004"));
  EXPECT_FALSE(is_entity_id("victim"));
  EXPECT_FALSE(is_entity_id(":x"));
  EXPECT_FALSE(is_entity_id("host:"));
  EXPECT_FALSE(is_entity_id("host:a b"));
}

}  // namespace
}  // namespace kc
