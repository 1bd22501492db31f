#include "iotfx/filter.hpp"

#include <charconv>
#include <optional>

namespace iotfx::filter {

NodePtr make_proto(Transport t) { return std::make_shared<Node>(Node{ProtoTest{t}}); }
NodePtr make_host(Dir d, IpAddress a) { return std::make_shared<Node>(Node{HostTest{d, a}}); }
NodePtr make_port(Dir d, std::uint16_t p) { return std::make_shared<Node>(Node{PortTest{d, p}}); }
NodePtr make_ether(Dir d, MacAddress m) { return std::make_shared<Node>(Node{EtherTest{d, m}}); }
NodePtr make_not(NodePtr c) { return std::make_shared<Node>(Node{Not{std::move(c)}}); }
NodePtr make_and(NodePtr a, NodePtr b) { return std::make_shared<Node>(Node{And{std::move(a), std::move(b)}}); }
NodePtr make_or(NodePtr a, NodePtr b) { return std::make_shared<Node>(Node{Or{std::move(a), std::move(b)}}); }

bool same_tree(const NodePtr& a, const NodePtr& b)
{
    if (!a || !b) return a == b;
    if (a->v.index() != b->v.index()) return false;
    return std::visit(
        [&](const auto& x) -> bool {
            using T = std::decay_t<decltype(x)>;
            const auto& y = std::get<T>(b->v);
            if constexpr (std::is_same_v<T, Not>)
                return same_tree(x.child, y.child);
            else if constexpr (std::is_same_v<T, And> || std::is_same_v<T, Or>)
                return same_tree(x.lhs, y.lhs) && same_tree(x.rhs, y.rhs);
            else
                return x == y;
        },
        a->v);
}

namespace {

enum class Tok { word, lparen, rparen, op_and, op_or, op_not, end };

struct Token
{
    Tok type;
    std::string_view text;
    std::size_t offset;
};

bool is_word_char(char c)
{
    return !(c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '(' || c == ')' || c == '!'
             || c == '&' || c == '|');
}

std::vector<Token> tokenize(std::string_view s)
{
    std::vector<Token> out;
    std::size_t i = 0;
    while (i < s.size()) {
        char c = s[i];
        if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
            ++i;
            continue;
        }
        if (c == '(') {
            out.push_back({Tok::lparen, s.substr(i, 1), i});
            ++i;
        } else if (c == ')') {
            out.push_back({Tok::rparen, s.substr(i, 1), i});
            ++i;
        } else if (c == '!') {
            out.push_back({Tok::op_not, s.substr(i, 1), i});
            ++i;
        } else if (c == '&' || c == '|') {
            if (i + 1 >= s.size() || s[i + 1] != c)
                throw FilterError(FilterError::kind::syntax, i, {c == '&' ? "&&" : "||"},
                                  std::string("filter: stray '") + c + "' at offset " + std::to_string(i));
            out.push_back({c == '&' ? Tok::op_and : Tok::op_or, s.substr(i, 2), i});
            i += 2;
        } else {
            std::size_t j = i;
            while (j < s.size() && is_word_char(s[j])) ++j;
            auto w = s.substr(i, j - i);
            Tok t = Tok::word;
            if (w == "and")
                t = Tok::op_and;
            else if (w == "or")
                t = Tok::op_or;
            else if (w == "not")
                t = Tok::op_not;
            out.push_back({t, w, i});
            i = j;
        }
    }
    out.push_back({Tok::end, {}, s.size()});
    return out;
}

const std::vector<std::string> atom_starts = {"(", "not", "tcp", "udp", "host", "src", "dst", "port", "ether"};

class Parser
{
public:
    explicit Parser(std::string_view text) : toks_(tokenize(text)) {}

    NodePtr parse()
    {
        NodePtr e = parse_or();
        if (peek().type != Tok::end) syntax({"and", "or", "end of input"});
        return e;
    }

private:
    const Token& peek() const { return toks_[pos_]; }
    const Token& take() { return toks_[pos_++]; }

    [[noreturn]] void syntax(std::vector<std::string> expected) const
    {
        const Token& t = peek();
        std::string msg = "filter: syntax error at offset " + std::to_string(t.offset) + ": expected ";
        for (std::size_t i = 0; i < expected.size(); ++i) {
            if (i) msg += ", ";
            msg += expected[i];
        }
        msg += t.type == Tok::end ? " but reached end of input" : " but found '" + std::string(t.text) + "'";
        throw FilterError(FilterError::kind::syntax, t.offset, std::move(expected), msg);
    }

    [[noreturn]] void value_error(const Token& t, const std::string& what) const
    {
        throw FilterError(FilterError::kind::value, t.offset, {},
                          "filter: " + what + " '" + std::string(t.text) + "' at offset "
                              + std::to_string(t.offset));
    }

    NodePtr parse_or()
    {
        NodePtr lhs = parse_and();
        while (peek().type == Tok::op_or) {
            take();
            lhs = make_or(lhs, parse_and());
        }
        return lhs;
    }

    NodePtr parse_and()
    {
        NodePtr lhs = parse_term();
        while (peek().type == Tok::op_and) {
            take();
            lhs = make_and(lhs, parse_term());
        }
        return lhs;
    }

    NodePtr parse_term()
    {
        if (peek().type == Tok::op_not) {
            take();
            return make_not(parse_atom());
        }
        return parse_atom();
    }

    NodePtr parse_atom()
    {
        const Token& t = peek();
        if (t.type == Tok::lparen) {
            take();
            NodePtr e = parse_or();
            if (peek().type != Tok::rparen) syntax({")", "and", "or"});
            take();
            return e;
        }
        if (t.type != Tok::word) syntax(atom_starts);

        auto w = t.text;
        if (w == "tcp" || w == "udp") {
            take();
            return make_proto(w == "tcp" ? Transport::tcp : Transport::udp);
        }
        if (w == "ether") {
            take();
            Dir d = Dir::any;
            if (peek().type == Tok::word && (peek().text == "src" || peek().text == "dst")) {
                d = take().text == "src" ? Dir::src : Dir::dst;
                if (peek().type == Tok::word && peek().text == "host") take();
            } else if (peek().type == Tok::word && peek().text == "host") {
                take();
            } else {
                syntax({"host", "src", "dst"});
            }
            return make_ether(d, mac_value());
        }

        Dir d = Dir::any;
        if (w == "src" || w == "dst") {
            take();
            d = w == "src" ? Dir::src : Dir::dst;
            if (peek().type != Tok::word || (peek().text != "host" && peek().text != "port"))
                syntax({"host", "port"});
        }
        const Token& q = peek();
        if (q.type == Tok::word && q.text == "host") {
            take();
            return make_host(d, ip_value());
        }
        if (q.type == Tok::word && q.text == "port") {
            take();
            return make_port(d, port_value());
        }
        syntax(atom_starts);
    }

    const Token& value_token(const char* what)
    {
        if (peek().type != Tok::word) syntax({what});
        return take();
    }

    IpAddress ip_value()
    {
        const Token& t = value_token("ip address");
        auto a = IpAddress::parse(t.text);
        if (!a) value_error(t, "malformed ip address");
        return *a;
    }

    MacAddress mac_value()
    {
        const Token& t = value_token("mac address");
        // pcap-filter MAC literals are colon-separated.
        if (t.text.find('-') != std::string_view::npos) value_error(t, "malformed mac address");
        auto m = MacAddress::parse(t.text);
        if (!m) value_error(t, "malformed mac address");
        return *m;
    }

    std::uint16_t port_value()
    {
        const Token& t = value_token("port number");
        unsigned long v = 0;
        auto [p, ec] = std::from_chars(t.text.data(), t.text.data() + t.text.size(), v);
        if (ec == std::errc::result_out_of_range) value_error(t, "port out of range");
        if (ec != std::errc() || p != t.text.data() + t.text.size()) value_error(t, "malformed port");
        if (v > 65535) value_error(t, "port out of range");
        return static_cast<std::uint16_t>(v);
    }

    std::vector<Token> toks_;
    std::size_t pos_ = 0;
};

template <class T>
bool dir_match(Dir d, const std::optional<T>& src, const std::optional<T>& dst, const T& want)
{
    switch (d) {
    case Dir::src:
        return src && *src == want;
    case Dir::dst:
        return dst && *dst == want;
    case Dir::any:
        return (src && *src == want) || (dst && *dst == want);
    }
    return false;
}

bool eval_node(const Node& n, const DecodedPacket& p)
{
    return std::visit(
        [&](const auto& x) -> bool {
            using T = std::decay_t<decltype(x)>;
            if constexpr (std::is_same_v<T, ProtoTest>)
                return p.transport == x.proto;
            else if constexpr (std::is_same_v<T, HostTest>)
                return dir_match(x.dir, p.src_ip, p.dst_ip, x.addr);
            else if constexpr (std::is_same_v<T, PortTest>)
                return dir_match(x.dir, p.src_port, p.dst_port, x.port);
            else if constexpr (std::is_same_v<T, EtherTest>)
                return dir_match(x.dir, p.src_mac, p.dst_mac, x.addr);
            else if constexpr (std::is_same_v<T, Not>)
                return !eval_node(*x.child, p);
            else if constexpr (std::is_same_v<T, And>)
                return eval_node(*x.lhs, p) && eval_node(*x.rhs, p);
            else
                return eval_node(*x.lhs, p) || eval_node(*x.rhs, p);
        },
        n.v);
}

const char* dir_prefix(Dir d)
{
    switch (d) {
    case Dir::src:
        return "src ";
    case Dir::dst:
        return "dst ";
    case Dir::any:
        break;
    }
    return "";
}

bool is_binary(const Node& n)
{
    return std::holds_alternative<And>(n.v) || std::holds_alternative<Or>(n.v);
}

bool is_primitive(const Node& n)
{
    return !is_binary(n) && !std::holds_alternative<Not>(n.v);
}

void render_node(const Node& n, std::string& out);

void render_operand(const Node& n, std::string& out, bool allow_not)
{
    bool bare = is_primitive(n) || (allow_not && std::holds_alternative<Not>(n.v));
    if (!bare) out += '(';
    render_node(n, out);
    if (!bare) out += ')';
}

void render_node(const Node& n, std::string& out)
{
    std::visit(
        [&](const auto& x) {
            using T = std::decay_t<decltype(x)>;
            if constexpr (std::is_same_v<T, ProtoTest>) {
                out += x.proto == Transport::tcp ? "tcp" : "udp";
            } else if constexpr (std::is_same_v<T, HostTest>) {
                out += dir_prefix(x.dir);
                out += "host ";
                out += x.addr.to_string();
            } else if constexpr (std::is_same_v<T, PortTest>) {
                out += dir_prefix(x.dir);
                out += "port ";
                out += std::to_string(x.port);
            } else if constexpr (std::is_same_v<T, EtherTest>) {
                out += "ether ";
                out += x.dir == Dir::any ? "host " : dir_prefix(x.dir);
                out += x.addr.to_string();
            } else if constexpr (std::is_same_v<T, Not>) {
                out += "not ";
                render_operand(*x.child, out, false);
            } else {
                render_operand(*x.lhs, out, true);
                out += std::is_same_v<T, And> ? " and " : " or ";
                render_operand(*x.rhs, out, true);
            }
        },
        n.v);
}

} // namespace

FilterExpr parse_filter(std::string_view text)
{
    bool blank = true;
    for (char c : text)
        if (!(c == ' ' || c == '\t' || c == '\n' || c == '\r')) blank = false;
    if (blank) return FilterExpr{};
    return FilterExpr(Parser(text).parse());
}

bool eval_filter(const FilterExpr& expr, const DecodedPacket& packet)
{
    if (expr.matches_all()) return true;
    return eval_node(*expr.root(), packet);
}

std::string render_filter(const FilterExpr& expr)
{
    std::string out;
    if (!expr.matches_all()) render_node(*expr.root(), out);
    return out;
}

} // namespace iotfx::filter
