#include <algorithm>
#include <set>
#include <sstream>

#include "tpf/psl.hpp"

namespace tpf {

const std::string* PslProgram::short_name(const std::string& full) const {
    for (const auto& [f, s] : registers)
        if (f == full) return &s;
    return nullptr;
}

const std::string* PslProgram::system_register(const std::string& role) const {
    for (const auto& [r, reg] : system)
        if (r == role) return &reg;
    return nullptr;
}

bool PslProgram::has_constant(const std::string& name) const {
    return std::any_of(constants.begin(), constants.end(),
                       [&](const auto& c) { return c.first == name; });
}

namespace {

const std::set<std::string> kSystemRoles = {"symbol", "position", "output", "parse", "eop"};

class Parser {
   public:
    explicit Parser(std::vector<Token> toks) : toks_(std::move(toks)) {}

    PslProgram run() {
        while (peek().kind != Token::Kind::End) {
            const Token& t = peek();
            if (t.kind == Token::Kind::Ident &&
                (t.text == "registers" || t.text == "constants" || t.text == "system" ||
                 t.text == "watch")) {
                declaration();
                comment_.clear();
            } else {
                prog_.blocks.push_back(statement());
            }
        }
        if (prog_.blocks.empty()) {
            const Token& e = toks_.back();
            throw PslError("program has no statements", e.line, e.column);
        }
        for (const auto& [role, reg] : prog_.system)
            if (!prog_.short_name(reg)) fail("system map names undeclared register '" + reg + "'", sys_tok_);
        for (const auto& w : prog_.watch)
            if (!prog_.short_name(w)) fail("watch list names undeclared register '" + w + "'", sys_tok_);
        return std::move(prog_);
    }

   private:
    std::vector<Token> toks_;
    size_t pos_ = 0;
    std::string comment_;
    PslProgram prog_;
    Token sys_tok_;

    [[noreturn]] void fail(const std::string& msg, const Token& t) {
        throw PslError(msg, t.line, t.column);
    }

    void skip_comments() {
        while (toks_[pos_].kind == Token::Kind::Comment) comment_ = toks_[pos_++].text;
    }

    // lookahead never consumes comments, so a statement's comment stays pending
    const Token& peek(int k = 0) {
        size_t p = pos_;
        for (;;) {
            if (toks_[p].kind == Token::Kind::End) return toks_[p];
            if (toks_[p].kind != Token::Kind::Comment) {
                if (k == 0) return toks_[p];
                --k;
            }
            ++p;
        }
    }

    Token next() {
        skip_comments();
        Token t = toks_[pos_];
        if (t.kind != Token::Kind::End) ++pos_;
        return t;
    }

    bool is(const Token& t, const char* text) const {
        return (t.kind == Token::Kind::Punct || t.kind == Token::Kind::Ident) && t.text == text;
    }

    Token expect(const char* text) {
        Token t = next();
        if (!is(t, text)) fail(std::string("expected '") + text + "' but found '" + t.text + "'", t);
        return t;
    }

    Token ident() {
        Token t = next();
        if (t.kind != Token::Kind::Ident) fail("expected a name but found '" + t.text + "'", t);
        return t;
    }

    void declaration() {
        Token kw = next();
        if (kw.text == "watch") {
            expect("[");
            while (!is(peek(), "]")) {
                prog_.watch.push_back(ident().text);
                if (is(peek(), ",")) next();
            }
            expect("]");
            sys_tok_ = kw;
            return;
        }
        expect("{");
        while (!is(peek(), "}")) {
            Token name = next();
            if (name.kind == Token::Kind::End) fail("unterminated declaration", name);
            if (kw.text == "registers") {
                if (name.kind != Token::Kind::Ident) fail("expected a register name", name);
                expect(":");
                Token s = next();
                if (s.kind != Token::Kind::String) fail("register short name must be quoted", s);
                if (prog_.short_name(name.text)) fail("register '" + name.text + "' declared twice", name);
                for (const auto& r : prog_.registers)
                    if (r.second == s.text) fail("short name '" + s.text + "' used twice", s);
                prog_.registers.emplace_back(name.text, s.text);
            } else if (kw.text == "constants") {
                if (name.kind != Token::Kind::Ident && name.kind != Token::Kind::Number)
                    fail("expected a constant name", name);
                std::optional<std::string> val;
                if (is(peek(), ":")) {
                    next();
                    Token s = next();
                    if (s.kind != Token::Kind::String) fail("constant value must be quoted", s);
                    val = s.text;
                }
                if (!prog_.has_constant(name.text)) prog_.constants.emplace_back(name.text, val);
            } else {
                if (!kSystemRoles.count(name.text)) fail("unknown system register '" + name.text + "'", name);
                expect(":");
                prog_.system.emplace_back(name.text, ident().text);
                sys_tok_ = name;
            }
            if (is(peek(), ",")) next();
        }
        expect("}");
    }

    Block statement() {
        skip_comments();
        std::string comment = comment_;
        Token kw = next();
        Block b;
        b.line = kw.line;
        if (is(kw, "causal_attn")) {
            expect(":");
            Token v = ident();
            if (v.text != "true" && v.text != "false") fail("causal_attn expects true or false", v);
            b.kind = Block::Kind::CausalAttn;
            b.causal = v.text == "true";
        } else if (is(kw, "where") || is(kw, "where_lm") || is(kw, "where_rm")) {
            b.kind = Block::Kind::Production;
            Production& p = b.production;
            p.comment = comment;
            p.line = kw.line;
            p.variant = kw.text == "where_rm"   ? MatchVariant::WhereRm
                        : kw.text == "where_lm" ? MatchVariant::WhereLm
                                                : MatchVariant::Where;
            conditions(p.conditions);
            expect(":");
            while (peek().kind == Token::Kind::Ident && is(peek(1), "[")) p.actions.push_back(assignment());
            if (p.actions.empty()) fail("production has no assignments", peek());
        } else if (is(kw, "repeat")) {
            b.kind = Block::Kind::Repeat;
            b.comment = comment;
            comment_.clear();
            while (!is(peek(), "until")) {
                if (peek().kind == Token::Kind::End) fail("repeat without until", kw);
                b.body.push_back(statement());
            }
            next();
            Token stop = next();
            if (stop.text != "NO_CHANGE") fail("unsupported until-condition '" + stop.text + "'", stop);
            if (std::none_of(b.body.begin(), b.body.end(),
                             [](const Block& x) { return x.kind != Block::Kind::CausalAttn; }))
                fail("repeat block has no productions", kw);
        } else {
            fail("expected a statement but found '" + kw.text + "'", kw);
        }
        comment_.clear();
        return b;
    }

    void conditions(std::vector<Condition>& out) {
        for (;;) {
            if (is(peek(), "(")) {
                next();
                conditions(out);
                expect(")");
            } else {
                out.push_back(condition());
            }
            if (!is(peek(), "and")) break;
            next();
        }
    }

    RegisterRef regref(bool allow_func) {
        Token name = ident();
        if (!prog_.short_name(name.text)) fail("undeclared register '" + name.text + "'", name);
        RegisterRef r;
        r.name = name.text;
        expect("[");
        Token idx = ident();
        if (idx.text == "N") r.index = Index::N;
        else if (idx.text == "n") r.index = Index::n;
        else fail("register index must be N or n", idx);
        expect("]");
        if (is(peek(), "@")) {
            Token at = next();
            if (!allow_func) fail("function not allowed here", at);
            Token f = ident();
            if (f.text != "pos_increment" && f.text != "pos_decrement")
                fail("unknown @function '" + f.text + "'", f);
            r.func = f.text;
        }
        return r;
    }

    std::string constant() {
        Token t = next();
        if (t.kind == Token::Kind::Number) return t.text;
        if (t.kind != Token::Kind::Ident) fail("expected a constant but found '" + t.text + "'", t);
        if (prog_.short_name(t.text)) fail("register '" + t.text + "' used without an index", t);
        if (!prog_.has_constant(t.text)) fail("undeclared constant '" + t.text + "'", t);
        return t.text;
    }

    Operand operand(bool allow_func) {
        Operand o;
        if (peek().kind == Token::Kind::Ident && is(peek(1), "[")) {
            o.is_register = true;
            o.reg = regref(allow_func);
        } else {
            o.constant = constant();
        }
        return o;
    }

    Condition condition() {
        Condition c;
        c.line = peek().line;
        c.lhs = regref(false);
        Token op = next();
        if (is(op, "==")) c.op = CompareOp::Eq;
        else if (is(op, "!=")) c.op = CompareOp::Ne;
        else if (is(op, "in")) c.op = CompareOp::In;
        else if (is(op, "not")) {
            expect("in");
            c.op = CompareOp::NotIn;
        } else fail("expected a comparison operator but found '" + op.text + "'", op);
        if (c.op == CompareOp::In || c.op == CompareOp::NotIn) {
            expect("[");
            do {
                c.list.push_back(constant());
            } while (is(peek(), ",") && (next(), true));
            expect("]");
        } else {
            c.rhs = operand(true);
        }
        return c;
    }

    Assignment assignment() {
        Assignment a;
        a.line = peek().line;
        Token start = peek();
        a.target = regref(false);
        if (a.target.index != Index::N) fail("assignment target must be indexed by N", start);
        expect("=");
        a.source = operand(false);
        return a;
    }
};

std::string ref_text(const RegisterRef& r) {
    std::string s = r.name + (r.index == Index::N ? "[N]" : "[n]");
    if (!r.func.empty()) s += "@" + r.func;
    return s;
}

std::string operand_text(const Operand& o) { return o.is_register ? ref_text(o.reg) : o.constant; }

void print_blocks(std::ostringstream& os, const std::vector<Block>& blocks, const std::string& ind) {
    for (const auto& b : blocks) {
        switch (b.kind) {
            case Block::Kind::CausalAttn:
                os << ind << "causal_attn: " << (b.causal ? "true" : "false") << "\n\n";
                break;
            case Block::Kind::Repeat:
                if (!b.comment.empty()) os << ind << b.comment << "\n";
                os << ind << "repeat\n";
                print_blocks(os, b.body, ind + "    ");
                os << ind << "until NO_CHANGE\n\n";
                break;
            case Block::Kind::Production: {
                const Production& p = b.production;
                if (!p.comment.empty()) os << ind << p.comment << "\n";
                os << ind
                   << (p.variant == MatchVariant::WhereRm   ? "where_rm "
                       : p.variant == MatchVariant::WhereLm ? "where_lm "
                                                            : "where ");
                for (size_t i = 0; i < p.conditions.size(); ++i) {
                    const Condition& c = p.conditions[i];
                    if (i) os << " and ";
                    os << ref_text(c.lhs);
                    switch (c.op) {
                        case CompareOp::Eq: os << " == " << operand_text(c.rhs); break;
                        case CompareOp::Ne: os << " != " << operand_text(c.rhs); break;
                        case CompareOp::In:
                        case CompareOp::NotIn: {
                            os << (c.op == CompareOp::In ? " in [" : " not in [");
                            for (size_t k = 0; k < c.list.size(); ++k) os << (k ? ", " : "") << c.list[k];
                            os << "]";
                        }
                    }
                }
                os << ":\n";
                for (const auto& a : p.actions)
                    os << ind << "    " << ref_text(a.target) << " = " << operand_text(a.source) << "\n";
                os << "\n";
            }
        }
    }
}

}  // namespace

PslProgram parse_psl(const std::string& source) { return Parser(lex_psl(source)).run(); }

std::string print_psl(const PslProgram& p) {
    std::ostringstream os;
    if (!p.registers.empty()) {
        os << "registers {\n";
        for (size_t i = 0; i < p.registers.size(); ++i)
            os << "    " << p.registers[i].first << ": \"" << p.registers[i].second << "\""
               << (i + 1 < p.registers.size() ? ",\n" : "\n");
        os << "}\n";
    }
    if (!p.constants.empty()) {
        os << "constants {\n";
        for (size_t i = 0; i < p.constants.size(); ++i) {
            os << "    " << p.constants[i].first;
            if (p.constants[i].second) os << ": \"" << *p.constants[i].second << "\"";
            os << (i + 1 < p.constants.size() ? ",\n" : "\n");
        }
        os << "}\n";
    }
    if (!p.system.empty()) {
        os << "system {";
        for (size_t i = 0; i < p.system.size(); ++i)
            os << (i ? ", " : " ") << p.system[i].first << ": " << p.system[i].second;
        os << " }\n";
    }
    if (!p.watch.empty()) {
        os << "watch [";
        for (size_t i = 0; i < p.watch.size(); ++i) os << (i ? ", " : " ") << p.watch[i];
        os << " ]\n";
    }
    os << "\n";
    print_blocks(os, p.blocks, "");
    return os.str();
}

}  // namespace tpf
