#include <json.hpp>

#include "tpf/engine.hpp"

namespace tpf {

std::optional<TraceLevel> parse_trace_level(const std::string& s) {
    if (s == "none") return TraceLevel::None;
    if (s == "registers") return TraceLevel::Registers;
    if (s == "full") return TraceLevel::Full;
    return std::nullopt;
}

const char* trace_level_name(TraceLevel l) {
    switch (l) {
        case TraceLevel::None: return "none";
        case TraceLevel::Registers: return "registers";
        case TraceLevel::Full: return "full";
    }
    return "none";
}

StateStructure Trace::column(const TraceStep& s, int c) const {
    StateStructure out;
    const size_t R = registers.size();
    for (size_t r = 0; r < R; ++r) {
        int h = s.cells.at(static_cast<size_t>(c) * R + r);
        if (h >= 0) out[registers[r]] = vocab.at(h);
    }
    return out;
}

std::string Trace::to_json() const {
    using ojson = nlohmann::ordered_json;
    ojson root = ojson::object();
    root["level"] = trace_level_name(level);
    root["columns"] = columns;
    root["prompt_columns"] = prompt_columns;
    root["registers"] = registers;
    root["watch"] = watch;
    auto sparse = [&](const std::vector<SparseEntry>& es) {
        ojson o = ojson::object();
        for (const auto& e : es)
            // dimensions past the vocabulary are padding; a != mask fills them too
            if (e.index < static_cast<int>(vocab.size())) o[registers.at(e.reg)][vocab.at(e.index)] = e.value;
        return o;
    };
    ojson jsteps = ojson::array();
    for (const auto& s : steps) {
        ojson st = ojson::object();
        st["layer_id"] = s.layer_id;
        st["comment"] = s.comment;
        st["repeat_iteration"] = s.repeat_iteration;
        ojson cols = ojson::array();
        for (int c = 0; c < columns; ++c) {
            ojson col = ojson::object();
            ojson regs = ojson::object();
            for (const auto& [k, v] : column(s, c)) regs[k] = v;
            // keep schema order rather than map order
            ojson ordered = ojson::object();
            for (const auto& r : registers)
                if (regs.contains(r)) ordered[r] = regs[r];
            col["registers"] = ordered;
            int a = s.alpha.at(c);
            col["alpha"] = a >= 0 ? ojson(a) : ojson(nullptr);
            col["matched"] = a >= 0;
            if (!s.q.empty()) {
                col["q"] = sparse(s.q.at(c));
                col["k"] = sparse(s.k.at(c));
                col["v"] = sparse(s.v.at(c));
            }
            cols.push_back(std::move(col));
        }
        st["columns"] = std::move(cols);
        jsteps.push_back(std::move(st));
    }
    root["steps"] = std::move(jsteps);
    return root.dump();
}

}  // namespace tpf
