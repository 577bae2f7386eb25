#include <algorithm>

#include "tpf/qkvl.hpp"

namespace tpf {

std::string QkvlProgram::system_short(const std::string& role) const {
    for (const auto& [r, full] : system) {
        if (r != role) continue;
        for (const auto& [f, s] : registers)
            if (f == full) return s;
    }
    return "";
}

bool QkvlProgram::is_register(const std::string& short_name) const {
    return std::any_of(registers.begin(), registers.end(),
                       [&](const auto& r) { return r.second == short_name; });
}

namespace {
size_t count_layers(const std::vector<QkvlEntry>& es) {
    size_t n = 0;
    for (const auto& e : es) n += e.is_repeat ? count_layers(e.body) : 1;
    return n;
}
}  // namespace

size_t QkvlProgram::layer_count() const { return count_layers(entries); }

SourceRef resolve_source(const std::string& item, const QkvlProgram& prog) {
    SourceRef r;
    auto at = item.find('@');
    std::string base = at == std::string::npos ? item : item.substr(0, at);
    if (prog.is_register(base)) {
        r.is_register = true;
        r.name = base;
        if (at != std::string::npos) r.func = item.substr(at + 1);
    } else {
        r.name = item;
    }
    return r;
}

namespace {

class Compiler {
   public:
    explicit Compiler(const PslProgram& p) : p_(p) {}

    QkvlProgram run() {
        QkvlProgram q;
        q.registers = p_.registers;
        q.constants = p_.constants;
        q.system = p_.system;
        q.watch = p_.watch;
        for (const auto& [name, val] : p_.constants) {
            std::string tok = val ? *val : name;
            for (const auto& [f, s] : p_.registers)
                if (s == tok)
                    throw CompileError("constant '" + name + "' collides with register short name '" + s + "'");
        }
        q.entries = blocks(p_.blocks);
        return q;
    }

   private:
    const PslProgram& p_;
    bool causal_ = false;

    std::string reg(const std::string& full) const { return *p_.short_name(full); }

    std::string constant(const std::string& name) const {
        for (const auto& [n, v] : p_.constants)
            if (n == name) return v ? *v : n;
        return name;  // numeric literal
    }

    std::string operand(const Operand& o) const {
        if (!o.is_register) return constant(o.constant);
        std::string s = reg(o.reg.name);
        if (!o.reg.func.empty()) s += "@" + o.reg.func;
        return s;
    }

    static void put(RegisterDict& d, const std::string& key, SourceSpec s, int line) {
        for (const auto& [k, v] : d)
            if (k == key) throw CompileError("register '" + key + "' is constrained twice in one production", line);
        d.emplace_back(key, std::move(s));
    }

    std::vector<QkvlEntry> blocks(const std::vector<Block>& bs) {
        std::vector<QkvlEntry> out;
        for (const auto& b : bs) {
            if (b.kind == Block::Kind::CausalAttn) {
                causal_ = b.causal;
            } else if (b.kind == Block::Kind::Repeat) {
                QkvlEntry e;
                e.is_repeat = true;
                e.comment = b.comment;
                e.body = blocks(b.body);
                out.push_back(std::move(e));
            } else {
                QkvlEntry e;
                e.layer = production(b.production);
                out.push_back(std::move(e));
            }
        }
        return out;
    }

    LayerSpec production(const Production& pr) {
        LayerSpec L;
        L.comment = pr.comment;
        L.causal_attn = causal_;
        L.right_match = pr.variant == MatchVariant::WhereRm;
        for (Condition c : pr.conditions) {
            bool rhs_n = c.rhs.is_register && c.rhs.reg.index == Index::n;
            if (rhs_n && c.lhs.index == Index::n)
                throw CompileError("condition compares two n-indexed registers", c.line);
            if (rhs_n) {
                // x[N] op y[n]  ->  y[n] op x[N]
                if (!c.rhs.reg.func.empty())
                    throw CompileError("function applied to an n-indexed operand", c.line);
                RegisterRef l = c.lhs;
                c.lhs = c.rhs.reg;
                c.rhs.reg = l;
            }
            std::string x = reg(c.lhs.name);
            std::vector<std::string> list;
            for (const auto& k : c.list) list.push_back(constant(k));
            if (c.lhs.index == Index::N) {
                SourceSpec ks;
                switch (c.op) {
                    case CompareOp::Eq: ks = SourceSpec::value(operand(c.rhs)); break;
                    case CompareOp::Ne: ks = SourceSpec::not_equal(operand(c.rhs)); break;
                    case CompareOp::In: ks = {SourceSpec::Kind::In, list}; break;
                    case CompareOp::NotIn: ks = {SourceSpec::Kind::NotIn, list}; break;
                }
                put(L.q, x, SourceSpec::value(x), c.line);
                put(L.k, x, ks, c.line);
            } else {
                SourceSpec qs;
                switch (c.op) {
                    case CompareOp::Eq: qs = SourceSpec::value(operand(c.rhs)); break;
                    case CompareOp::Ne: qs = SourceSpec::not_equal(operand(c.rhs)); break;
                    case CompareOp::In: qs = {SourceSpec::Kind::In, list}; break;
                    case CompareOp::NotIn: qs = {SourceSpec::Kind::NotIn, list}; break;
                }
                put(L.q, x + "`", qs, c.line);
                put(L.k, x + "`", SourceSpec::value(x), c.line);
            }
        }
        for (const auto& a : pr.actions) {
            if (a.target.index != Index::N)
                throw CompileError("assignment target must be indexed by N", a.line);
            put(L.v, reg(a.target.name), SourceSpec::value(operand(a.source)), a.line);
        }
        return L;
    }
};

}  // namespace

QkvlProgram compile_psl(const PslProgram& p) { return Compiler(p).run(); }

}  // namespace tpf
