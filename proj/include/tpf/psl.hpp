#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace tpf {

struct PslError : std::runtime_error {
    int line;
    int column;
    PslError(const std::string& msg, int line_, int column_)
        : std::runtime_error(msg), line(line_), column(column_) {}
};

enum class Index { N, n };

struct RegisterRef {
    std::string name;  // full register name as declared
    Index index = Index::N;
    std::string func;  // "", "pos_increment" or "pos_decrement"
    bool operator==(const RegisterRef&) const = default;
};

struct Operand {
    bool is_register = false;
    std::string constant;  // constant name when !is_register
    RegisterRef reg;
    bool operator==(const Operand&) const = default;
};

enum class CompareOp { Eq, Ne, In, NotIn };

struct Condition {
    RegisterRef lhs;
    CompareOp op = CompareOp::Eq;
    Operand rhs;                    // Eq / Ne
    std::vector<std::string> list;  // In / NotIn
    int line = 0;
    bool operator==(const Condition& o) const {
        return lhs == o.lhs && op == o.op && rhs == o.rhs && list == o.list;
    }
};

struct Assignment {
    RegisterRef target;
    Operand source;
    int line = 0;
    bool operator==(const Assignment& o) const { return target == o.target && source == o.source; }
};

enum class MatchVariant { Where, WhereLm, WhereRm };

struct Production {
    std::string comment;
    MatchVariant variant = MatchVariant::Where;
    std::vector<Condition> conditions;
    std::vector<Assignment> actions;
    int line = 0;
    bool operator==(const Production& o) const {
        return comment == o.comment && variant == o.variant && conditions == o.conditions &&
               actions == o.actions;
    }
};

struct Block {
    enum class Kind { Production, Repeat, CausalAttn };
    Kind kind = Kind::Production;
    Production production;
    std::string comment;       // repeat blocks
    std::vector<Block> body;   // repeat blocks; until is always NO_CHANGE
    bool causal = false;       // causal_attn directive
    int line = 0;
    bool operator==(const Block& o) const {
        return kind == o.kind && production == o.production && comment == o.comment &&
               body == o.body && causal == o.causal;
    }
};

struct PslProgram {
    std::vector<std::pair<std::string, std::string>> registers;  // full -> short
    std::vector<std::pair<std::string, std::optional<std::string>>> constants;
    std::vector<std::pair<std::string, std::string>> system;  // role -> register
    std::vector<std::string> watch;
    std::vector<Block> blocks;
    bool operator==(const PslProgram&) const = default;

    const std::string* short_name(const std::string& full) const;
    const std::string* system_register(const std::string& role) const;
    bool has_constant(const std::string& name) const;
};

PslProgram parse_psl(const std::string& source);
std::string print_psl(const PslProgram& p);

struct Diagnostic {
    enum class Severity { Warning, Error };
    Severity severity = Severity::Warning;
    std::string message;
    int line = 0;
};

std::vector<Diagnostic> lint_program(const PslProgram& p);
bool has_errors(const std::vector<Diagnostic>& d);

// --- lexer (exposed for tests) ---
struct Token {
    enum class Kind { Ident, Number, String, Punct, Comment, End };
    Kind kind = Kind::End;
    std::string text;
    int line = 0;
    int column = 0;
};

std::vector<Token> lex_psl(const std::string& source);

}  // namespace tpf
