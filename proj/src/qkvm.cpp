#include "tpf/qkvm.hpp"

#include <algorithm>
#include <unordered_map>

#include "tpf/engine.hpp"

namespace tpf {

namespace {

struct Val {
    enum Kind { Null, Eq, Neq, In, NotIn } kind = Null;
    int a = -1;
    const std::vector<int>* set = nullptr;

    bool accepts(int x) const {
        switch (kind) {
            case Eq: return a == x;
            case Neq: return a != x;
            case In: return std::binary_search(set->begin(), set->end(), x);
            case NotIn: return !std::binary_search(set->begin(), set->end(), x);
            case Null: return false;
        }
        return false;
    }
};

bool match(const Val& q, const Val& k) {
    if (q.kind == Val::Null || k.kind == Val::Null) return false;
    if (q.kind == Val::Eq) return k.accepts(q.a);
    if (k.kind == Val::Eq) return q.accepts(k.a);
    return false;
}

struct Plan {
    enum Kind { Const, Reg, NeqConst, NeqReg, In, NotIn } kind = Const;
    int reg = -1;
    int shift = 0;
    int constant = -1;
    std::vector<int> set;
};

struct Cond {
    Plan q, k;
};

struct Assign {
    int target;
    Plan src;
};

struct Layer {
    const LayerSpec* spec;
    int id;
    bool causal, right;
    std::vector<Cond> conds;
    std::vector<Assign> assigns;
};

struct Node {
    bool repeat = false;
    std::string comment;
    Layer layer;
    std::vector<Node> body;
};

class Machine {
   public:
    Machine(const QkvlProgram& p, const QkvmOptions& o) : prog_(p), opts_(o) {
        for (const auto& [f, s] : p.registers) reg(s);
    }

    int reg(const std::string& name) {
        auto it = regs_.find(name);
        if (it != regs_.end()) return it->second;
        int i = static_cast<int>(reg_names_.size());
        regs_.emplace(name, i);
        reg_names_.push_back(name);
        return i;
    }
    int intern(const std::string& tok) {
        auto it = toks_.find(tok);
        if (it != toks_.end()) return it->second;
        int i = static_cast<int>(tok_names_.size());
        toks_.emplace(tok, i);
        tok_names_.push_back(tok);
        return i;
    }
    int n_regs() const { return static_cast<int>(reg_names_.size()); }

    Plan plan(const SourceSpec& s) {
        Plan p;
        if (s.kind == SourceSpec::Kind::In || s.kind == SourceSpec::Kind::NotIn) {
            p.kind = s.kind == SourceSpec::Kind::In ? Plan::In : Plan::NotIn;
            for (const auto& i : s.items) p.set.push_back(intern(i));
            std::sort(p.set.begin(), p.set.end());
            return p;
        }
        SourceRef r = resolve_source(s.items.at(0), prog_);
        bool ne = s.kind == SourceSpec::Kind::NotEqual;
        if (r.is_register) {
            p.kind = ne ? Plan::NeqReg : Plan::Reg;
            p.reg = reg(r.name);
            if (r.func == "pos_increment") p.shift = 1;
            else if (r.func == "pos_decrement") p.shift = -1;
            else if (!r.func.empty()) throw CompileError("unknown function '" + r.func + "'");
        } else {
            p.kind = ne ? Plan::NeqConst : Plan::Const;
            p.constant = intern(r.name);
        }
        return p;
    }

    Layer layer(const LayerSpec& L, int id) {
        Layer out{&L, id, L.causal_attn, L.right_match, {}, {}};
        for (const auto& [key, qs] : L.q) {
            auto it = std::find_if(L.k.begin(), L.k.end(), [&](const auto& e) { return e.first == key; });
            if (it == L.k.end()) throw CompileError("query register '" + key + "' has no key counterpart");
            out.conds.push_back({plan(qs), plan(it->second)});
        }
        if (out.conds.empty() || L.k.size() != L.q.size())
            throw CompileError("layer '" + L.comment + "' has mismatched or empty conditions");
        for (const auto& [key, vs] : L.v) out.assigns.push_back({reg(key), plan(vs)});
        return out;
    }

    std::vector<Node> nodes(const std::vector<QkvlEntry>& es, int& id) {
        std::vector<Node> out;
        for (const auto& e : es) {
            Node n;
            if (e.is_repeat) {
                n.repeat = true;
                n.comment = e.comment;
                n.body = nodes(e.body, id);
            } else {
                n.layer = layer(e.layer, id++);
            }
            out.push_back(std::move(n));
        }
        return out;
    }

    using Grid = std::vector<std::vector<int>>;  // column -> register -> token or -1

    Grid to_grid(const std::vector<StateStructure>& s) {
        for (const auto& col : s)
            for (const auto& [r, v] : col) reg(r);
        Grid g;
        for (const auto& col : s) {
            std::vector<int> row(n_regs(), -1);
            for (const auto& [r, v] : col) row[reg(r)] = intern(v);
            g.push_back(std::move(row));
        }
        return g;
    }

    std::vector<StateStructure> from_grid(const Grid& g) const {
        std::vector<StateStructure> out;
        for (const auto& row : g) {
            StateStructure s;
            for (size_t r = 0; r < row.size(); ++r)
                if (row[r] >= 0) s[reg_names_[r]] = tok_names_[row[r]];
            out.push_back(std::move(s));
        }
        return out;
    }

    int shifted(int tok, int by) {
        const std::string& t = tok_names_[tok];
        if (t.empty() || t.size() > 9 || !std::all_of(t.begin(), t.end(), [](char c) { return c >= '0' && c <= '9'; }))
            return -1;
        int v = std::stoi(t);
        if (t != std::to_string(v)) return -1;
        v += by;
        if (v < 0 || (opts_.max_position >= 0 && v > opts_.max_position)) return -1;
        if (opts_.max_position >= 0 && std::stoi(t) > opts_.max_position) return -1;
        return intern(std::to_string(v));
    }

    Val eval(const Plan& p, const std::vector<int>& row) {
        Val v;
        switch (p.kind) {
            case Plan::Const: v.kind = Val::Eq; v.a = p.constant; break;
            case Plan::NeqConst: v.kind = Val::Neq; v.a = p.constant; break;
            case Plan::In: v.kind = Val::In; v.set = &p.set; break;
            case Plan::NotIn: v.kind = Val::NotIn; v.set = &p.set; break;
            case Plan::Reg:
            case Plan::NeqReg: {
                int x = p.reg < static_cast<int>(row.size()) ? row[p.reg] : -1;
                if (x >= 0 && p.shift) x = shifted(x, p.shift);
                if (x < 0) return v;
                v.kind = p.kind == Plan::Reg ? Val::Eq : Val::Neq;
                v.a = x;
                break;
            }
        }
        return v;
    }

    void step(const Layer& L, Grid& g, std::vector<int>& alpha) {
        const int T = static_cast<int>(g.size()), m = static_cast<int>(L.conds.size());
        for (auto& row : g) row.resize(n_regs(), -1);
        std::vector<std::vector<Val>> qv(T, std::vector<Val>(m)), kv(T, std::vector<Val>(m));
        for (int c = 0; c < T; ++c)
            for (int i = 0; i < m; ++i) {
                qv[c][i] = eval(L.conds[i].q, g[c]);
                kv[c][i] = eval(L.conds[i].k, g[c]);
            }
        auto ok = [&](int N, int n) {
            for (int i = 0; i < m; ++i)
                if (!match(qv[N][i], kv[n][i])) return false;
            return true;
        };
        alpha.assign(T, -1);
        for (int N = 0; N < T; ++N) {
            int hi = L.causal ? N : T - 1;
            if (L.right) {
                for (int n = hi; n >= 0; --n)
                    if (ok(N, n)) { alpha[N] = n; break; }
            } else {
                for (int n = 0; n <= hi; ++n)
                    if (ok(N, n)) { alpha[N] = n; break; }
            }
        }
        Grid out = g;
        for (int N = 0; N < T; ++N) {
            if (alpha[N] < 0) continue;
            for (const auto& a : L.assigns) {
                Val v = eval(a.src, g[alpha[N]]);
                if (v.kind == Val::Eq) out[N][a.target] = v.a;  // null values never overwrite
            }
        }
        g = std::move(out);
    }

    void run(const std::vector<Node>& ns, Grid& g, int iter, std::vector<QkvmStep>* rec) {
        for (const auto& n : ns) {
            if (!n.repeat) {
                std::vector<int> alpha;
                step(n.layer, g, alpha);
                if (rec) rec->push_back({n.layer.id, n.layer.spec->comment, iter, alpha, from_grid(g)});
                continue;
            }
            int cap = opts_.repeat_cap > 0 ? opts_.repeat_cap : 4 * static_cast<int>(g.size());
            for (int it = 0;; ++it) {
                if (it >= cap) throw DivergenceError("repeat block '" + n.comment + "' did not settle");
                Grid before = g;
                run(n.body, g, it, rec);
                for (auto& row : before) row.resize(n_regs(), -1);
                if (g == before) break;
            }
        }
    }

   private:
    const QkvlProgram& prog_;
    QkvmOptions opts_;
    std::unordered_map<std::string, int> regs_, toks_;
    std::vector<std::string> reg_names_, tok_names_;
};

}  // namespace

std::vector<StateStructure> qkvm_layer_step(const LayerSpec& layer, const QkvlProgram& prog,
                                            const std::vector<StateStructure>& in, const QkvmOptions& opts,
                                            std::vector<int>* alpha) {
    Machine m(prog, opts);
    Layer L = m.layer(layer, 0);
    auto g = m.to_grid(in);
    std::vector<int> a;
    m.step(L, g, a);
    if (alpha) *alpha = a;
    return m.from_grid(g);
}

QkvmResult qkvm_interpret(const QkvlProgram& prog, const std::vector<StateStructure>& initial,
                          const QkvmOptions& opts, bool record) {
    Machine m(prog, opts);
    int id = 0;
    auto ns = m.nodes(prog.entries, id);
    auto g = m.to_grid(initial);
    QkvmResult r;
    m.run(ns, g, 0, record ? &r.steps : nullptr);
    r.states = m.from_grid(g);
    return r;
}

QkvmGeneration qkvm_generate(const QkvlProgram& prog, const std::vector<std::string>& prompt,
                             const std::string& stop_symbol, int max_new, QkvmOptions opts) {
    if (prompt.empty()) throw EngineError("empty prompt");
    std::string s = prog.system_short("symbol"), p = prog.system_short("position");
    std::string a = prog.system_short("parse"), z = prog.system_short("eop");
    if (s.empty() || p.empty()) throw EngineError("program lacks symbol/position system registers");
    std::vector<StateStructure> cols;
    for (size_t i = 0; i < prompt.size(); ++i) {
        StateStructure c{{s, prompt[i]}, {p, std::to_string(i + 1)}};
        if (!a.empty()) c[a] = "1";
        cols.push_back(std::move(c));
    }
    if (!z.empty()) cols.back()[z] = "EOP";
    const size_t P = cols.size();
    QkvmGeneration g;
    for (int t = 0; t < max_new; ++t) {
        auto out = qkvm_interpret(prog, cols, opts).states;
        StateStructure last = out.back();
        auto it = last.find(s);
        if (it == last.end()) throw EngineError("generation produced no symbol");
        g.tokens.push_back(it->second);
        last[p] = std::to_string(P + t + 1);
        cols.push_back(std::move(last));
        if (g.tokens.back() == stop_symbol) return g;
    }
    g.truncated = true;
    return g;
}

}  // namespace tpf
