#pragma once

// Textbook Turing machine on a bounded tape: one transition per step.

#include <algorithm>
#include <string>
#include <vector>

#include "tpf/turing.hpp"

namespace oracle {

struct TmRun {
    std::vector<std::string> tape;
    int head = -1;
    std::string state;
    bool fell_off = false;
    bool halted = false;
    bool stuck = false;  // no rule for (state, symbol)
    int steps = 0;
    bool finished = false;  // false when max_steps ran out
};

inline TmRun simulate(const tpf::tm::TmTable& t, std::vector<std::string> tape, int head, int max_steps = 10000) {
    TmRun r;
    r.tape = std::move(tape);
    r.head = head;
    r.state = t.start;
    auto halting = [&](const std::string& q) { return std::find(t.halts.begin(), t.halts.end(), q) != t.halts.end(); };
    for (;;) {
        if (halting(r.state)) {
            r.halted = r.finished = true;
            return r;
        }
        if (r.steps >= max_steps) return r;
        const tpf::tm::Rule* rule = nullptr;
        for (const auto& x : t.rules)
            if (x.q0 == r.state && x.s0 == r.tape[r.head]) rule = &x;
        if (!rule) {
            r.stuck = r.finished = true;
            return r;
        }
        r.tape[r.head] = rule->s1;
        r.state = rule->q1;
        r.head += rule->dir == 'R' ? 1 : -1;
        ++r.steps;
        if (r.head < 0 || r.head >= static_cast<int>(r.tape.size())) {
            r.head = -1;
            r.fell_off = r.finished = true;
            return r;
        }
    }
}

}  // namespace oracle
