#include "tpf/turing.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include <json.hpp>

namespace tpf::tm {

std::string state_token(const std::string& s) { return "tm_state:" + s; }
std::string symbol_token(const std::string& s) { return "tm_sym:" + s; }

namespace {

void check_name(const std::string& n, const char* what) {
    if (n.empty()) throw TmError(std::string("empty ") + what + " name");
    for (char c : n)
        if (c == '"' || c == '\n' || c == '\t' || c == ' ')
            throw TmError(std::string(what) + " name '" + n + "' contains whitespace or quotes");
}

int index_of(const std::vector<std::string>& v, const std::string& x) {
    auto it = std::find(v.begin(), v.end(), x);
    return it == v.end() ? -1 : static_cast<int>(it - v.begin());
}

const char* kMoves = R"(    // move head left
    where head[n] == L and position[n] == position[N]@pos_increment:
        head[N] = 1
        state[N] = state[n]
    // move head right
    where head[n] == R and position[n] == position[N]@pos_decrement:
        head[N] = 1
        state[N] = state[n]
    // clear moved-head mark
    where head[N] in [L, R]:
        head[N] = 0
    // broadcast new state
    where head[n] == 1:
        state[N] = state[n]
until NO_CHANGE
)";

std::string strip(const std::string& tok, const std::string& prefix) {
    return tok.rfind(prefix, 0) == 0 ? tok.substr(prefix.size()) : tok;
}

}  // namespace

void validate_table(const TmTable& t) {
    std::set<std::string> st, al;
    for (const auto& s : t.states) {
        check_name(s, "state");
        if (!st.insert(s).second) throw TmError("duplicate state '" + s + "'");
    }
    for (const auto& s : t.alphabet) {
        check_name(s, "symbol");
        if (!al.insert(s).second) throw TmError("duplicate symbol '" + s + "'");
    }
    if (!st.count(t.start)) throw TmError("start state '" + t.start + "' is not a state");
    for (const auto& h : t.halts)
        if (!st.count(h)) throw TmError("halt state '" + h + "' is not a state");
    std::set<std::pair<std::string, std::string>> keys;
    for (const auto& r : t.rules) {
        if (!st.count(r.q0) || !st.count(r.q1)) throw TmError("rule uses an undeclared state");
        if (!al.count(r.s0) || !al.count(r.s1)) throw TmError("rule uses an undeclared symbol");
        if (r.dir != 'L' && r.dir != 'R') throw TmError("rule direction must be L or R");
        if (!keys.insert({r.q0, r.s0}).second) throw TmError("two rules for (" + r.q0 + ", " + r.s0 + ")");
    }
}

TmTable parse_table_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw TmError(std::string("malformed table: ") + e.what());
    }
    TmTable t;
    try {
        t.states = j.at("states").get<std::vector<std::string>>();
        t.alphabet = j.at("alphabet").get<std::vector<std::string>>();
        t.start = j.at("start").get<std::string>();
        if (j.contains("halts")) t.halts = j["halts"].get<std::vector<std::string>>();
        for (const auto& r : j.at("rules")) {
            auto v = r.get<std::vector<std::string>>();
            if (v.size() != 5 || v[4].size() != 1) throw TmError("rule must be [q0, s0, q1, s1, L|R]");
            t.rules.push_back({v[0], v[1], v[2], v[3], v[4][0]});
        }
    } catch (const nlohmann::json::exception& e) {
        throw TmError(std::string("malformed table: ") + e.what());
    }
    validate_table(t);
    return t;
}

std::string table_to_json(const TmTable& t) {
    nlohmann::ordered_json j;
    j["states"] = t.states;
    j["alphabet"] = t.alphabet;
    j["start"] = t.start;
    j["halts"] = t.halts;
    auto rules = nlohmann::ordered_json::array();
    for (const auto& r : t.rules) rules.push_back({r.q0, r.s0, r.q1, r.s1, std::string(1, r.dir)});
    j["rules"] = rules;
    return j.dump(2);
}

std::string tm_psl_source(const TmTable& t) {
    validate_table(t);
    std::ostringstream os;
    os << "registers { position: \"p\", symbol: \"s\", head: \"c\", state: \"q\" }\n";
    os << "constants { L, R";
    for (size_t i = 0; i < t.states.size(); ++i) os << ", ST_" << i << ": \"" << state_token(t.states[i]) << "\"";
    for (size_t i = 0; i < t.alphabet.size(); ++i) os << ", SY_" << i << ": \"" << symbol_token(t.alphabet[i]) << "\"";
    os << " }\n";
    os << "system { symbol: symbol, position: position }\n";
    os << "watch [ symbol, head, state ]\n\n";
    os << "causal_attn: false\n\n";
    os << "// one sweep per machine step\nrepeat\n";
    for (size_t i = 0; i < t.rules.size(); ++i) {
        const Rule& r = t.rules[i];
        os << "    // rule " << i + 1 << ". " << r.q0 << ", " << r.s0 << " => " << r.q1 << ", " << r.s1 << ", "
           << r.dir << "\n";
        os << "    where head[N] == 1 and state[N] == ST_" << index_of(t.states, r.q0) << " and symbol[N] == SY_"
           << index_of(t.alphabet, r.s0) << ":\n";
        os << "        head[N] = " << r.dir << "\n";
        os << "        state[N] = ST_" << index_of(t.states, r.q1) << "\n";
        os << "        symbol[N] = SY_" << index_of(t.alphabet, r.s1) << "\n";
    }
    os << kMoves;
    return os.str();
}

PslProgram tm_to_psl(const TmTable& t) { return parse_psl(tm_psl_source(t)); }

std::string utm_psl_source() {
    std::ostringstream os;
    os << "registers { position: \"p\", symbol: \"s\", head: \"c\", state: \"q\",\n"
          "            rule_state: \"qa\", rule_symbol: \"sa\", rule_next_state: \"qb\", rule_write: \"sb\", "
          "rule_move: \"m\" }\n";
    os << "constants { L, R }\n";
    os << "system { symbol: symbol, position: position }\n";
    os << "watch [ symbol, head, state ]\n\n";
    os << "causal_attn: false\n\n";
    os << "// one sweep per machine step, rules read from the prompt prefix\nrepeat\n";
    os << "    // look up the rule for the current state and symbol\n";
    os << "    where head[N] == 1 and rule_state[n] == state[N] and rule_symbol[n] == symbol[N]:\n";
    os << "        state[N] = rule_next_state[n]\n";
    os << "        symbol[N] = rule_write[n]\n";
    os << "        head[N] = rule_move[n]\n";
    os << kMoves;
    return os.str();
}

PslProgram utm_program() { return parse_psl(utm_psl_source()); }

std::vector<StateStructure> encode_tape(const TmTable& t, const std::vector<std::string>& tape, int head) {
    if (tape.empty()) throw TmError("empty tape");
    if (head < 0 || head >= static_cast<int>(tape.size())) throw TmError("head outside the tape");
    std::vector<StateStructure> out;
    for (size_t i = 0; i < tape.size(); ++i) {
        if (index_of(t.alphabet, tape[i]) < 0) throw TmError("tape symbol '" + tape[i] + "' is not in the alphabet");
        out.push_back({{"s", symbol_token(tape[i])},
                       {"p", std::to_string(i + 1)},
                       {"c", static_cast<int>(i) == head ? "1" : "0"},
                       {"q", state_token(t.start)}});
    }
    return out;
}

std::vector<StateStructure> encode_utm_prompt(const TmTable& t, const std::vector<std::string>& tape, int head) {
    validate_table(t);
    std::vector<StateStructure> out;
    for (const auto& r : t.rules)
        out.push_back({{"qa", state_token(r.q0)},
                       {"sa", symbol_token(r.s0)},
                       {"qb", state_token(r.q1)},
                       {"sb", symbol_token(r.s1)},
                       {"m", std::string(1, r.dir)}});
    auto data = encode_tape(t, tape, head);
    out.insert(out.end(), data.begin(), data.end());
    return out;
}

DatModel build_model(const QkvlProgram& prog, const TmTable& t, int columns) {
    Vocabulary v = Vocabulary::with_reserved(columns + 1);
    v.add("L");
    v.add("R");
    for (const auto& s : t.states) v.add(state_token(s));
    for (const auto& s : t.alphabet) v.add(symbol_token(s));
    return compile_model(prog, std::move(v));
}

namespace {

TmOutcome run(const QkvlProgram& prog, const TmTable& t, const std::vector<StateStructure>& init, int prefix,
              int max_sweeps, TraceLevel trace) {
    DatModel m = build_model(prog, t, static_cast<int>(init.size()));
    std::set<std::string> halts;
    for (const auto& h : t.halts) halts.insert(state_token(h));
    HaltPredicate halt;
    if (!halts.empty())
        halt = [&](const std::vector<StateStructure>& cols) {
            for (const auto& c : cols) {
                auto h = c.find("c");
                auto q = c.find("q");
                if (h != c.end() && h->second == "1" && q != c.end() && halts.count(q->second)) return true;
            }
            return false;
        };
    TmOutcome o;
    if (halts.count(state_token(t.start))) {
        o.raw.states = init;
        o.halted = true;
    } else {
        o.raw = run_parallel_fixpoint(m, init, halt, max_sweeps, trace);
        o.halted = o.raw.halted;
    }
    o.sweeps = o.raw.sweeps;
    for (size_t i = prefix; i < o.raw.states.size(); ++i) {
        const auto& c = o.raw.states[i];
        auto s = c.find("s");
        o.tape.push_back(s == c.end() ? "" : strip(s->second, "tm_sym:"));
        auto h = c.find("c");
        if (h != c.end() && h->second == "1") {
            o.head = static_cast<int>(i) - prefix;
            auto q = c.find("q");
            if (q != c.end()) o.state = strip(q->second, "tm_state:");
        }
    }
    o.fell_off = o.head < 0;
    return o;
}

}  // namespace

TmOutcome run_fixed(const TmTable& t, const std::vector<std::string>& tape, int head, int max_sweeps,
                    TraceLevel trace) {
    QkvlProgram prog = compile_psl(tm_to_psl(t));
    return run(prog, t, encode_tape(t, tape, head), 0, max_sweeps, trace);
}

TmOutcome run_utm(const TmTable& t, const std::vector<std::string>& tape, int head, int max_sweeps,
                  TraceLevel trace) {
    static const QkvlProgram prog = compile_psl(utm_program());
    return run(prog, t, encode_utm_prompt(t, tape, head), static_cast<int>(t.rules.size()), max_sweeps, trace);
}

}  // namespace tpf::tm
