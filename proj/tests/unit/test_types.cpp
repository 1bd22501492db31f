#include "iotfx/types.hpp"

#include <doctest.h>

using namespace iotfx;

TEST_CASE("timestamp nanosecond conversions")
{
    auto t = Timestamp::from_nanos(1'650'000'000'123'456'789LL);
    CHECK(t.sec == 1'650'000'000);
    CHECK(t.nsec == 123'456'789u);
    CHECK(t.to_nanos() == 1'650'000'000'123'456'789LL);

    auto neg = Timestamp::from_nanos(-1);
    CHECK(neg.sec == -1);
    CHECK(neg.nsec == 999'999'999u);

    CHECK(Timestamp::from_seconds(1000.5) == Timestamp{1000, 500'000'000});
    CHECK(nanos_between(Timestamp{10, 0}, Timestamp{9, 999'999'999}) == 1);
    CHECK(Timestamp{1, 2} < Timestamp{1, 3});
}

TEST_CASE("timestamp rendering trims trailing zeros")
{
    CHECK(format_timestamp(Timestamp{1650000000, 500'000'000}) == "1650000000.5");
    CHECK(format_timestamp(Timestamp{1650000000, 0}) == "1650000000");
    CHECK(format_timestamp(Timestamp{0, 1}) == "0.000000001");
    CHECK(format_nanos(0) == "0");
    CHECK(format_nanos(2'000'000'000) == "2");
    CHECK(format_nanos(-1'500'000'000) == "-1.5");
}

TEST_CASE("mac parsing and rendering")
{
    auto m = MacAddress::parse("AA:bb:0C:dd:EE:0f");
    REQUIRE(m);
    CHECK(m->to_string() == "aa:bb:0c:dd:ee:0f");
    CHECK(m->to_file_token() == "aa-bb-0c-dd-ee-0f");
    CHECK(MacAddress::parse("aa-bb-0c-dd-ee-0f") == m);

    CHECK_FALSE(MacAddress::parse("aa:bb:cc:dd:ee"));
    CHECK_FALSE(MacAddress::parse("aa:bb:cc:dd:ee:ff:00"));
    CHECK_FALSE(MacAddress::parse("aa:bb:cc:dd:ee:gg"));
    CHECK_FALSE(MacAddress::parse("a:bb:cc:dd:ee:ff"));
    CHECK_FALSE(MacAddress::parse("aa:bb-cc:dd:ee:ff"));
    CHECK_FALSE(MacAddress::parse(""));

    CHECK(MacAddress::parse("ff:ff:ff:ff:ff:ff")->is_group());
    CHECK(MacAddress::parse("01:00:5e:00:00:fb")->is_group());
    CHECK_FALSE(m->is_group());
}

TEST_CASE("ip parsing and rendering")
{
    auto v4 = IpAddress::parse("192.168.1.20");
    REQUIRE(v4);
    CHECK(v4->kind() == IpAddress::family::v4);
    CHECK(v4->to_string() == "192.168.1.20");

    auto v6 = IpAddress::parse("2001:DB8:0:0::1");
    REQUIRE(v6);
    CHECK(v6->kind() == IpAddress::family::v6);
    CHECK(v6->to_string() == "2001:db8::1");

    CHECK_FALSE(IpAddress::parse("256.1.1.1"));
    CHECK_FALSE(IpAddress::parse("1.2.3"));
    CHECK_FALSE(IpAddress::parse("hello"));
    CHECK(*IpAddress::parse("10.0.0.1") != *IpAddress::parse("::ffff:10.0.0.1"));
}
