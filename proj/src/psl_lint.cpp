#include <algorithm>
#include <map>
#include <set>

#include "tpf/psl.hpp"

namespace tpf {

namespace {

void collect(const std::vector<Block>& blocks, std::vector<const Production*>& out) {
    for (const auto& b : blocks) {
        if (b.kind == Block::Kind::Production) out.push_back(&b.production);
        if (b.kind == Block::Kind::Repeat) collect(b.body, out);
    }
}

bool reads(const Production& p, const std::string& reg) {
    for (const auto& c : p.conditions) {
        if (c.lhs.name == reg) return true;
        if (c.rhs.is_register && c.rhs.reg.name == reg) return true;
    }
    for (const auto& a : p.actions)
        if (a.source.is_register && a.source.reg.name == reg) return true;
    return false;
}

bool reads_any(const Block& b, const std::string& reg) {
    if (b.kind == Block::Kind::Production) return reads(b.production, reg);
    return std::any_of(b.body.begin(), b.body.end(), [&](const Block& x) { return reads_any(x, reg); });
}

// Later production fires whenever the earlier one does: its conditions are a subset.
bool implied_by(const Production& later, const Production& earlier) {
    return std::all_of(later.conditions.begin(), later.conditions.end(), [&](const Condition& c) {
        return std::find(earlier.conditions.begin(), earlier.conditions.end(), c) !=
               earlier.conditions.end();
    });
}

void dead_stores(const std::vector<Block>& blocks, std::vector<Diagnostic>& out) {
    for (size_t i = 0; i < blocks.size(); ++i) {
        if (blocks[i].kind == Block::Kind::Repeat) dead_stores(blocks[i].body, out);
        if (blocks[i].kind != Block::Kind::Production) continue;
        const Production& p = blocks[i].production;
        for (const auto& a : p.actions) {
            const std::string& reg = a.target.name;
            for (size_t j = i + 1; j < blocks.size(); ++j) {
                const Block& b = blocks[j];
                if (b.kind == Block::Kind::CausalAttn) continue;
                if (b.kind == Block::Kind::Repeat || reads(b.production, reg)) {
                    if (reads_any(b, reg)) break;
                    continue;
                }
                const Production& q = b.production;
                bool overwrites = std::any_of(q.actions.begin(), q.actions.end(), [&](const Assignment& x) {
                    return x.target.name == reg && !x.source.is_register;
                });
                if (overwrites && implied_by(q, p)) {
                    out.push_back({Diagnostic::Severity::Warning,
                                   "assignment to '" + reg + "' is overwritten by the production at line " +
                                       std::to_string(q.line) + " before it is used",
                                   a.line});
                    break;
                }
            }
        }
    }
}

}  // namespace

std::vector<Diagnostic> lint_program(const PslProgram& p) {
    std::vector<Diagnostic> out;
    using S = Diagnostic::Severity;
    for (const char* role : {"symbol", "position"})
        if (!p.system_register(role))
            out.push_back({S::Error, std::string("system map does not define '") + role + "'", 0});
    if (!p.system_register("parse"))
        out.push_back({S::Warning, "system map does not define 'parse'", 0});

    std::vector<const Production*> prods;
    collect(p.blocks, prods);

    std::set<std::string> used, assigned, tested;
    for (const auto* pr : prods) {
        for (const auto& c : pr->conditions) {
            used.insert(c.lhs.name);
            tested.insert(c.lhs.name);
            if (c.rhs.is_register) {
                used.insert(c.rhs.reg.name);
                tested.insert(c.rhs.reg.name);
            }
        }
        for (const auto& a : pr->actions) {
            used.insert(a.target.name);
            assigned.insert(a.target.name);
            if (a.source.is_register) used.insert(a.source.reg.name);
        }
    }
    std::set<std::string> inputs;
    for (const auto& [role, reg] : p.system) inputs.insert(reg);

    for (const auto& [full, shrt] : p.registers)
        if (!used.count(full))
            out.push_back({S::Warning, "register '" + full + "' is never used", 0});
    for (const auto& reg : tested)
        if (!assigned.count(reg) && !inputs.count(reg))
            out.push_back({S::Warning, "register '" + reg + "' is tested but never assigned", 0});

    dead_stores(p.blocks, out);
    return out;
}

bool has_errors(const std::vector<Diagnostic>& d) {
    return std::any_of(d.begin(), d.end(),
                       [](const Diagnostic& x) { return x.severity == Diagnostic::Severity::Error; });
}

}  // namespace tpf
