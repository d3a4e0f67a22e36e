#pragma once

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <numbers>
#include <string>
#include <string_view>
#include <vector>

#include "lbpfc/errors.hpp"

namespace lbpfc {

/// Sum of six plane waves at 60 degree spacing; equals 6 at the origin.
inline double hexcos(double x, double y) {
    double s = 0.0;
    for (int j = 0; j < 6; ++j) {
        const double a = j * std::numbers::pi / 3.0;
        s += std::cos(std::cos(a) * x + std::sin(a) * y);
    }
    return s;
}

/// Parsed initial-condition expression over the variables x and y.
///
///   expr    := term (('+' | '-') term)*
///   term    := unary (('*' | '/') unary)*
///   unary   := '-' unary | '+' unary | power
///   power   := primary ('^' unary)?
///   primary := number | 'x' | 'y' | 'pi' | 'inf' | '(' expr ')' | name '(' args ')'
///            | 'piecewise' '(' ('(' cond ',' expr ')' ',')* expr ')'
///   cond    := expr ('<' | '>' | '<=' | '>=') expr
///
/// Functions: sin, cos, exp, sqrt, abs, hexcos().
class Expression {
public:
    Expression() = default;

    double operator()(double x, double y = 0.0) const { return eval(root_, x, y); }
    const std::string& source() const { return source_; }
    /// True when the expression does not reference x or y.
    bool is_constant() const { return constant(root_); }

private:
    enum class Op { Num, X, Y, Neg, Add, Sub, Mul, Div, Pow, Sin, Cos, Exp, Sqrt, Abs, Hexcos, Piecewise, Lt, Gt, Le, Ge };
    struct Node {
        Op op = Op::Num;
        double value = 0.0;
        std::vector<int> kids;
    };

    double eval(int n, double x, double y) const {
        const Node& nd = nodes_[n];
        auto k = [&](int i) { return eval(nd.kids[i], x, y); };
        switch (nd.op) {
            case Op::Num: return nd.value;
            case Op::X: return x;
            case Op::Y: return y;
            case Op::Neg: return -k(0);
            case Op::Add: return k(0) + k(1);
            case Op::Sub: return k(0) - k(1);
            case Op::Mul: return k(0) * k(1);
            case Op::Div: return k(0) / k(1);
            case Op::Pow: return std::pow(k(0), k(1));
            case Op::Sin: return std::sin(k(0));
            case Op::Cos: return std::cos(k(0));
            case Op::Exp: return std::exp(k(0));
            case Op::Sqrt: return std::sqrt(k(0));
            case Op::Abs: return std::abs(k(0));
            case Op::Hexcos: return hexcos(x, y);
            case Op::Lt: return k(0) < k(1) ? 1.0 : 0.0;
            case Op::Gt: return k(0) > k(1) ? 1.0 : 0.0;
            case Op::Le: return k(0) <= k(1) ? 1.0 : 0.0;
            case Op::Ge: return k(0) >= k(1) ? 1.0 : 0.0;
            case Op::Piecewise: {
                const std::size_t pairs = (nd.kids.size() - 1) / 2;
                for (std::size_t i = 0; i < pairs; ++i) {
                    if (k(static_cast<int>(2 * i)) != 0.0) return k(static_cast<int>(2 * i + 1));
                }
                return k(static_cast<int>(nd.kids.size() - 1));
            }
        }
        return 0.0;
    }

    bool constant(int n) const {
        const Node& nd = nodes_[n];
        if (nd.op == Op::X || nd.op == Op::Y || nd.op == Op::Hexcos) return false;
        for (int c : nd.kids) {
            if (!constant(c)) return false;
        }
        return true;
    }

    std::vector<Node> nodes_{Node{}};
    int root_ = 0;
    std::string source_ = "0";

    friend class ExpressionParser;
};

class ExpressionParser {
public:
    explicit ExpressionParser(std::string_view src) : src_(src) {}

    Expression parse() {
        out_.nodes_.clear();
        out_.source_ = std::string(src_);
        out_.root_ = expr();
        skip();
        if (pos_ != src_.size()) fail("unexpected '" + std::string(1, src_[pos_]) + "'");
        return std::move(out_);
    }

private:
    using Op = Expression::Op;

    [[noreturn]] void fail(const std::string& msg) const { throw ParseError(msg, pos_); }

    void skip() {
        while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
    }

    bool accept(char c) {
        skip();
        if (pos_ < src_.size() && src_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    void expect(char c) {
        if (!accept(c)) {
            if (pos_ >= src_.size()) fail(std::string("expected '") + c + "' before end of input");
            fail(std::string("expected '") + c + "'");
        }
    }

    int add(Op op, std::vector<int> kids = {}, double value = 0.0) {
        out_.nodes_.push_back({op, value, std::move(kids)});
        return static_cast<int>(out_.nodes_.size()) - 1;
    }

    int expr() {
        int lhs = term();
        for (;;) {
            if (accept('+')) {
                lhs = add(Op::Add, {lhs, term()});
            } else if (accept('-')) {
                lhs = add(Op::Sub, {lhs, term()});
            } else {
                return lhs;
            }
        }
    }

    int term() {
        int lhs = unary();
        for (;;) {
            if (accept('*')) {
                lhs = add(Op::Mul, {lhs, unary()});
            } else if (accept('/')) {
                lhs = add(Op::Div, {lhs, unary()});
            } else {
                return lhs;
            }
        }
    }

    int unary() {
        if (accept('-')) return add(Op::Neg, {unary()});
        if (accept('+')) return unary();
        return power();
    }

    int power() {
        const int base = primary();
        if (accept('^')) return add(Op::Pow, {base, unary()});
        return base;
    }

    int comparison(int lhs) {
        Op op;
        if (accept('<')) {
            op = accept('=') ? Op::Le : Op::Lt;
        } else if (accept('>')) {
            op = accept('=') ? Op::Ge : Op::Gt;
        } else {
            fail("expected comparison '<' or '>'");
        }
        return add(op, {lhs, expr()});
    }

    bool at_comparison() {
        skip();
        return pos_ < src_.size() && (src_[pos_] == '<' || src_[pos_] == '>');
    }

    int piecewise() {
        expect('(');
        std::vector<int> kids;
        for (;;) {
            skip();
            const std::size_t save = pos_;
            const std::size_t nodes = out_.nodes_.size();
            if (accept('(')) {
                const int lhs = expr();
                if (at_comparison()) {
                    kids.push_back(comparison(lhs));
                    expect(',');
                    kids.push_back(expr());
                    expect(')');
                    expect(',');
                    continue;
                }
                // A parenthesised fallback value: reparse it as a whole expression.
                out_.nodes_.resize(nodes);
                pos_ = save;
            }
            kids.push_back(expr());
            expect(')');
            break;
        }
        if (kids.size() < 3) fail("piecewise needs at least one (condition, value) branch and a fallback");
        return add(Op::Piecewise, std::move(kids));
    }

    int primary() {
        skip();
        if (pos_ >= src_.size()) fail("unexpected end of input");
        const char c = src_[pos_];
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
        if (accept('(')) {
            const int e = expr();
            expect(')');
            return e;
        }
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            const std::size_t start = pos_;
            while (pos_ < src_.size() &&
                   (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_')) {
                ++pos_;
            }
            const std::string name(src_.substr(start, pos_ - start));
            if (name == "x") return add(Op::X);
            if (name == "y") return add(Op::Y);
            if (name == "pi") return add(Op::Num, {}, std::numbers::pi);
            if (name == "inf") return add(Op::Num, {}, std::numeric_limits<double>::infinity());
            if (name == "piecewise") return piecewise();
            if (name == "hexcos") {
                expect('(');
                expect(')');
                return add(Op::Hexcos);
            }
            Op op;
            if (name == "sin") {
                op = Op::Sin;
            } else if (name == "cos") {
                op = Op::Cos;
            } else if (name == "exp") {
                op = Op::Exp;
            } else if (name == "sqrt") {
                op = Op::Sqrt;
            } else if (name == "abs") {
                op = Op::Abs;
            } else {
                pos_ = start;
                fail("unknown identifier '" + name + "'");
            }
            expect('(');
            const int arg = expr();
            expect(')');
            return add(op, {arg});
        }
        fail("unexpected '" + std::string(1, c) + "'");
    }

    int number() {
        const std::string rest(src_.substr(pos_));
        char* end = nullptr;
        const double v = std::strtod(rest.c_str(), &end);
        if (end == rest.c_str()) fail("malformed number");
        pos_ += static_cast<std::size_t>(end - rest.c_str());
        return add(Op::Num, {}, v);
    }

    std::string_view src_;
    std::size_t pos_ = 0;
    Expression out_;
};

inline Expression parse_expression(std::string_view src) { return ExpressionParser(src).parse(); }

/// Evaluates a constant expression such as "2^-4" or "4*pi".
inline double eval_constant(std::string_view src) {
    const Expression e = parse_expression(src);
    if (!e.is_constant()) throw ParseError("expression must not depend on x or y", 0);
    return e(0.0, 0.0);
}

}  // namespace lbpfc
