#include "filter_vectors.hpp"
#include "iotfx/filter.hpp"

#include <doctest.h>

#include <random>

using namespace iotfx;
using namespace iotfx::filter;
using iotfx::testing::filter_probe_packets;
using iotfx::testing::filter_vectors;

TEST_CASE("conformance vectors")
{
    const auto probes = filter_probe_packets();
    CHECK(filter_vectors().size() >= 50);
    for (const auto& v : filter_vectors()) {
        CAPTURE(v.text);
        if (v.error) {
            try {
                parse_filter(v.text);
                FAIL("accepted invalid filter");
            } catch (const FilterError& e) {
                CHECK(e.error_kind() == *v.error);
                CHECK(e.offset() == v.offset);
            }
            continue;
        }
        FilterExpr e;
        REQUIRE_NOTHROW(e = parse_filter(v.text));
        for (std::size_t i = 0; i < probes.size(); ++i) {
            CAPTURE(i);
            CHECK(eval_filter(e, probes[i]) == (v.verdicts[i] == '1'));
        }
        if (v.rendered) CHECK(render_filter(e) == *v.rendered);
    }
}

TEST_CASE("AST shapes")
{
    auto e = parse_filter("udp and dst port 53");
    CHECK(same_tree(e.root(), make_and(make_proto(Transport::udp), make_port(Dir::dst, 53))));

    auto p = parse_filter("tcp or udp and port 1");
    CHECK(same_tree(p.root(), make_or(make_proto(Transport::tcp),
                                      make_and(make_proto(Transport::udp), make_port(Dir::any, 1)))));

    CHECK(parse_filter("").matches_all());
    CHECK(render_filter(FilterExpr{}).empty());
}

TEST_CASE("syntax errors name the expected tokens")
{
    try {
        parse_filter("tcp or");
        FAIL("expected throw");
    } catch (const FilterError& e) {
        CHECK(e.offset() == 6);
        CHECK_FALSE(e.expected().empty());
    }
}

TEST_CASE("round trip and De Morgan over random trees")
{
    std::mt19937_64 rng(99);
    for (int i = 0; i < 10000; ++i) {
        auto tree = testing::random_filter_tree(rng, 4);
        FilterExpr e(tree);
        const auto text = render_filter(e);
        CAPTURE(text);
        FilterExpr back;
        REQUIRE_NOTHROW(back = parse_filter(text));
        CHECK(render_filter(back) == text);
        auto b = testing::random_filter_tree(rng, 2);
        FilterExpr lhs(make_not(make_and(tree, b)));
        FilterExpr rhs(make_or(make_not(tree), make_not(b)));
        for (int k = 0; k < 8; ++k) {
            auto pkt = testing::random_probe_packet(rng);
            REQUIRE(eval_filter(back, pkt) == eval_filter(e, pkt));
            REQUIRE(eval_filter(lhs, pkt) == eval_filter(rhs, pkt));
        }
    }
}
