#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "tpf/psl.hpp"

namespace tpf {

struct CompileError : std::runtime_error {
    int line;
    CompileError(const std::string& msg, int line_ = 0) : std::runtime_error(msg), line(line_) {}
};

struct SourceSpec {
    enum class Kind { Value, NotEqual, In, NotIn };
    Kind kind = Kind::Value;
    // Value / NotEqual: one register-or-constant string ("p", "p@pos_decrement", "XQ");
    // In / NotIn: constant list
    std::vector<std::string> items;

    static SourceSpec value(std::string s) { return {Kind::Value, {std::move(s)}}; }
    static SourceSpec not_equal(std::string s) { return {Kind::NotEqual, {std::move(s)}}; }
    bool multi_hot() const { return kind != Kind::Value; }
    bool operator==(const SourceSpec&) const = default;
};

// ordered destination register -> source
using RegisterDict = std::vector<std::pair<std::string, SourceSpec>>;

struct LayerSpec {
    std::string comment;
    bool causal_attn = false;
    bool right_match = false;
    RegisterDict q, k, v;
    bool operator==(const LayerSpec&) const = default;
};

struct QkvlEntry {
    bool is_repeat = false;
    LayerSpec layer;               // !is_repeat
    std::string comment;           // is_repeat
    std::vector<QkvlEntry> body;   // is_repeat (until NO_CHANGE)
    bool operator==(const QkvlEntry&) const = default;
};

struct QkvlProgram {
    std::vector<std::pair<std::string, std::string>> registers;
    std::vector<std::pair<std::string, std::optional<std::string>>> constants;
    std::vector<std::pair<std::string, std::string>> system;
    std::vector<std::string> watch;
    std::vector<QkvlEntry> entries;
    bool operator==(const QkvlProgram&) const = default;

    // short name of the register playing a system role, or "" if undefined
    std::string system_short(const std::string& role) const;
    bool is_register(const std::string& short_name) const;
    size_t layer_count() const;  // LayerSpecs, counting those nested in repeats
};

// A source string split into register (+function) or constant.
struct SourceRef {
    bool is_register = false;
    std::string name;  // register short name or constant token
    std::string func;  // "" / pos_increment / pos_decrement
};
SourceRef resolve_source(const std::string& item, const QkvlProgram& prog);

QkvlProgram compile_psl(const PslProgram& p);

std::string serialize_qkvl(const QkvlProgram& q);
QkvlProgram deserialize_qkvl(const std::string& text);

}  // namespace tpf
