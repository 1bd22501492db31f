#pragma once

// Capture filters in a subset of pcap-filter syntax.
//
//   expr  := term (("and" | "or") term)*      "and" binds tighter than "or"
//   term  := ["not"] atom
//   atom  := primitive | "(" expr ")"
//   primitive := tcp | udp
//              | [src | dst] host <ipv4 | ipv6>
//              | [src | dst] port <0..65535>
//              | ether [src | dst] host <mac>   ("host" optional after src/dst)
//
// "&&", "||" and "!" are accepted as aliases. Empty text matches everything.

#include "iotfx/packet_decode.hpp"

#include <cstddef>
#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace iotfx::filter {

enum class Dir : std::uint8_t { any, src, dst };

struct ProtoTest
{
    Transport proto;
    friend bool operator==(const ProtoTest&, const ProtoTest&) = default;
};

struct HostTest
{
    Dir dir;
    IpAddress addr;
    friend bool operator==(const HostTest&, const HostTest&) = default;
};

struct PortTest
{
    Dir dir;
    std::uint16_t port;
    friend bool operator==(const PortTest&, const PortTest&) = default;
};

struct EtherTest
{
    Dir dir;
    MacAddress addr;
    friend bool operator==(const EtherTest&, const EtherTest&) = default;
};

struct Node;
using NodePtr = std::shared_ptr<const Node>;

struct Not
{
    NodePtr child;
};

struct And
{
    NodePtr lhs, rhs;
};

struct Or
{
    NodePtr lhs, rhs;
};

struct Node
{
    std::variant<ProtoTest, HostTest, PortTest, EtherTest, Not, And, Or> v;
};

NodePtr make_proto(Transport t);
NodePtr make_host(Dir d, IpAddress a);
NodePtr make_port(Dir d, std::uint16_t p);
NodePtr make_ether(Dir d, MacAddress m);
NodePtr make_not(NodePtr c);
NodePtr make_and(NodePtr a, NodePtr b);
NodePtr make_or(NodePtr a, NodePtr b);

/// Structural equality of two trees.
bool same_tree(const NodePtr& a, const NodePtr& b);

/// An immutable parsed filter. A null root means match-all.
class FilterExpr
{
public:
    FilterExpr() = default;
    explicit FilterExpr(NodePtr root) : root_(std::move(root)) {}

    bool matches_all() const { return root_ == nullptr; }
    const NodePtr& root() const { return root_; }

    friend bool operator==(const FilterExpr& a, const FilterExpr& b) { return same_tree(a.root_, b.root_); }

private:
    NodePtr root_;
};

class FilterError : public std::runtime_error
{
public:
    enum class kind { syntax, value };

    FilterError(kind k, std::size_t offset, std::vector<std::string> expected, const std::string& what)
        : std::runtime_error(what), kind_(k), offset_(offset), expected_(std::move(expected))
    {
    }

    kind error_kind() const noexcept { return kind_; }
    std::size_t offset() const noexcept { return offset_; }
    const std::vector<std::string>& expected() const noexcept { return expected_; }

private:
    kind kind_;
    std::size_t offset_;
    std::vector<std::string> expected_;
};

FilterExpr parse_filter(std::string_view text);
bool eval_filter(const FilterExpr& expr, const DecodedPacket& packet);
std::string render_filter(const FilterExpr& expr);

} // namespace iotfx::filter
