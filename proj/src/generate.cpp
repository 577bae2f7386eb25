#include "tpf/engine.hpp"

namespace tpf {

namespace {

int token_index(const DatModel& model, const std::string& tok) {
    auto i = model.vocab.find(tok);
    if (!i) throw EngineError("token '" + tok + "' is not in the vocabulary");
    if (*i >= model.schema.d_register()) throw EngineError("token '" + tok + "' exceeds the register size");
    return *i;
}

int role_register(const DatModel& model, const std::string& role, bool required) {
    std::string s = model.system_short(role);
    if (s.empty()) {
        if (required) throw EngineError("program has no '" + role + "' system register");
        return -1;
    }
    return model.schema.index(s);
}

}  // namespace

Cells prompt_cells(const DatModel& model, const std::vector<std::string>& prompt) {
    if (prompt.empty()) throw EngineError("empty prompt");
    int s = role_register(model, "symbol", true), p = role_register(model, "position", true);
    int a = role_register(model, "parse", false), z = role_register(model, "eop", false);
    const int P = static_cast<int>(prompt.size());
    Cells c(P, static_cast<int>(model.schema.size()));
    for (int i = 0; i < P; ++i) {
        c.at(i, s) = token_index(model, prompt[i]);
        c.at(i, p) = token_index(model, std::to_string(i + 1));
        if (a >= 0) c.at(i, a) = token_index(model, "1");
    }
    if (z >= 0) c.at(P - 1, z) = token_index(model, "EOP");
    return c;
}

GenerateResult generate(const DatModel& model, const std::vector<std::string>& prompt, const GenerateOptions& opts) {
    GenerateResult res;
    Cells base = prompt_cells(model, prompt);
    const int P = base.columns, R = base.registers;
    const int s = role_register(model, "symbol", true), p = role_register(model, "position", true);
    RunOptions ro;
    ro.repeat_cap = opts.repeat_cap;
    ro.collect_stats = opts.collect_stats;
    std::vector<int> seeds;  // generated columns' layer-1 inputs, row-major
    auto assemble = [&] {
        Cells c = base;
        c.columns = P + static_cast<int>(seeds.size()) / R;
        c.hot.insert(c.hot.end(), seeds.begin(), seeds.end());
        return c;
    };
    auto absorb = [&](const RunStats& st) {
        res.stats.max_delta_hat = std::max(res.stats.max_delta_hat, st.max_delta_hat);
        res.stats.layer_evals += st.layer_evals;
        res.stats.causal_violations += st.causal_violations;
        res.stats.forwards += st.forwards;
    };
    bool stopped = false;
    for (int t = 0; t < opts.max_new; ++t) {
        auto fr = forward_cells(model, assemble(), ro);
        absorb(fr.stats);
        const int last = fr.cells.columns - 1;
        int sym = fr.cells.at(last, s);
        if (sym < 0) throw EngineError("generation step " + std::to_string(t + 1) + " produced no symbol");
        res.tokens.push_back(model.vocab.token(sym));
        std::vector<int> seed(fr.cells.hot.begin() + static_cast<long>(last) * R,
                              fr.cells.hot.begin() + static_cast<long>(last + 1) * R);
        seed[p] = token_index(model, std::to_string(P + t + 1));
        seeds.insert(seeds.end(), seed.begin(), seed.end());
        if (res.tokens.back() == opts.stop_symbol) {
            stopped = true;
            break;
        }
    }
    res.truncated = !stopped;
    if (opts.trace_level != TraceLevel::None) {
        // one more pass over prompt + generated columns, traced
        ro.trace_level = opts.trace_level;
        auto fr = forward_cells(model, assemble(), ro);
        absorb(fr.stats);
        res.trace = std::move(fr.trace);
        res.trace.prompt_columns = P;
    }
    return res;
}

}  // namespace tpf
