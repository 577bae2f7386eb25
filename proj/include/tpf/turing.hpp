#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "tpf/engine.hpp"
#include "tpf/psl.hpp"
#include "tpf/qkvl.hpp"

namespace tpf::tm {

struct TmError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// q0, s0 => q1, s1, dir
struct Rule {
    std::string q0, s0, q1, s1;
    char dir = 'R';
    bool operator==(const Rule&) const = default;
};

struct TmTable {
    std::vector<std::string> states;
    std::vector<std::string> alphabet;
    std::string start;
    std::vector<std::string> halts;
    std::vector<Rule> rules;
};

void validate_table(const TmTable& t);
TmTable parse_table_json(const std::string& text);
std::string table_to_json(const TmTable& t);

std::string state_token(const std::string& s);   // "tm_state:<s>"
std::string symbol_token(const std::string& s);  // "tm_sym:<s>"

std::string tm_psl_source(const TmTable& t);
PslProgram tm_to_psl(const TmTable& t);
std::string utm_psl_source();
PslProgram utm_program();

// fixed-machine input: s, p (1-based), c, q on every tape column
std::vector<StateStructure> encode_tape(const TmTable& t, const std::vector<std::string>& tape, int head);
// one prefix column per rule (qa, sa, qb, sb, m), then the tape columns
std::vector<StateStructure> encode_utm_prompt(const TmTable& t, const std::vector<std::string>& tape, int head);

struct TmOutcome {
    std::vector<std::string> tape;
    int head = -1;  // -1 when the head left the tape
    std::string state;
    bool fell_off = false;
    bool halted = false;  // reached a halt state (otherwise stopped for lack of a rule)
    int sweeps = 0;
    FixpointResult raw;
};

DatModel build_model(const QkvlProgram& prog, const TmTable& t, int columns);
TmOutcome run_fixed(const TmTable& t, const std::vector<std::string>& tape, int head, int max_sweeps = 1000,
                    TraceLevel trace = TraceLevel::None);
TmOutcome run_utm(const TmTable& t, const std::vector<std::string>& tape, int head, int max_sweeps = 1000,
                  TraceLevel trace = TraceLevel::None);

}  // namespace tpf::tm
