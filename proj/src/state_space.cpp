#include "tpf/state_space.hpp"

#include <cmath>

namespace tpf {

const std::vector<std::string>& reserved_tokens() {
    static const std::vector<std::string> toks = {"Q",  "A",  ".",  "EOP", "R",  "T",  "D",
                                                  "C",  "XQ", "XA", "CQ",  "CA", "FQ", "FA"};
    return toks;
}

Vocabulary Vocabulary::with_reserved(int max_position) {
    Vocabulary v;
    for (const auto& t : reserved_tokens()) v.add(t);
    v.add_positions(max_position);
    v.n_reserved_ = v.entries_.size();
    return v;
}

int Vocabulary::add(const std::string& token) {
    auto it = index_.find(token);
    if (it != index_.end()) return it->second;
    int i = static_cast<int>(entries_.size());
    entries_.push_back(token);
    index_.emplace(token, i);
    return i;
}

void Vocabulary::add_positions(int max_position) {
    for (int p = 0; p <= max_position; ++p) add(std::to_string(p));
    if (max_position > max_position_) max_position_ = max_position;
}

std::optional<int> Vocabulary::find(const std::string& token) const {
    auto it = index_.find(token);
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

int Vocabulary::index(const std::string& token) const {
    auto it = index_.find(token);
    if (it == index_.end()) throw SchemaError("unknown value token '" + token + "'");
    return it->second;
}

bool Vocabulary::is_reserved(const std::string& token) const {
    auto i = find(token);
    return i && static_cast<size_t>(*i) < n_reserved_;
}

RegisterSchema::RegisterSchema(std::vector<std::pair<std::string, std::string>> registers,
                               int d_register)
    : registers_(std::move(registers)), d_(d_register) {
    for (size_t i = 0; i < registers_.size(); ++i) {
        if (!index_.emplace(registers_[i].second, static_cast<int>(i)).second)
            throw SchemaError("duplicate register short name '" + registers_[i].second + "'");
    }
}

std::optional<int> RegisterSchema::find(const std::string& short_name) const {
    auto it = index_.find(short_name);
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

int RegisterSchema::index(const std::string& short_name) const {
    auto it = index_.find(short_name);
    if (it == index_.end()) throw SchemaError("unknown register '" + short_name + "'");
    return it->second;
}

namespace {

int value_index(const std::string& tok, const RegisterSchema& schema, const Vocabulary& vocab) {
    int i = vocab.index(tok);
    if (i >= schema.d_register())
        throw SchemaError("value '" + tok + "' does not fit in register blocks of size " +
                          std::to_string(schema.d_register()));
    return i;
}

// -1 for a zero block, otherwise the hot index; throws on anything else
int block_hot(const StateVector& v, size_t b, int d, const std::string& reg) {
    int hot = -1;
    for (int j = 0; j < d; ++j) {
        float x = v[b + j];
        if (std::fabs(x) < 1e-6f) continue;
        if (hot >= 0 || std::fabs(x - 1.0f) > 1e-6f)
            throw SchemaError("register '" + reg + "' is not one-hot");
        hot = j;
    }
    return hot;
}

}  // namespace

StateVector embed(const StateStructure& s, const RegisterSchema& schema, const Vocabulary& vocab) {
    StateVector v = StateVector::Zero(static_cast<Eigen::Index>(schema.dim()));
    for (const auto& [reg, tok] : s) {
        int r = schema.index(reg);
        v[schema.offsets(r).first + value_index(tok, schema, vocab)] = 1.0f;
    }
    return v;
}

StateStructure decode(const StateVector& v, const RegisterSchema& schema, const Vocabulary& vocab) {
    if (static_cast<size_t>(v.size()) != schema.dim()) throw SchemaError("vector length mismatch");
    StateStructure s;
    for (size_t r = 0; r < schema.size(); ++r) {
        int hot = block_hot(v, schema.offsets(r).first, schema.d_register(), schema.short_name(r));
        if (hot < 0) continue;
        if (static_cast<size_t>(hot) >= vocab.size())
            throw SchemaError("hot index outside vocabulary in '" + schema.short_name(r) + "'");
        s[schema.short_name(r)] = vocab.token(hot);
    }
    return s;
}

std::map<std::string, std::vector<std::string>> decode_multi(const StateVector& v,
                                                             const RegisterSchema& schema,
                                                             const Vocabulary& vocab) {
    std::map<std::string, std::vector<std::string>> out;
    int d = schema.d_register();
    for (size_t r = 0; r < schema.size(); ++r) {
        size_t b = schema.offsets(r).first;
        std::vector<std::string> toks;
        for (int j = 0; j < d; ++j) {
            if (std::fabs(v[b + j]) < 1e-6f) continue;
            toks.push_back(static_cast<size_t>(j) < vocab.size() ? vocab.token(j)
                                                                  : "#" + std::to_string(j));
        }
        if (!toks.empty()) out[schema.short_name(r)] = std::move(toks);
    }
    return out;
}

Cells cells_from_structures(const std::vector<StateStructure>& s, const RegisterSchema& schema,
                            const Vocabulary& vocab) {
    Cells c(static_cast<int>(s.size()), static_cast<int>(schema.size()));
    for (size_t col = 0; col < s.size(); ++col)
        for (const auto& [reg, tok] : s[col])
            c.at(static_cast<int>(col), schema.index(reg)) = value_index(tok, schema, vocab);
    return c;
}

std::vector<StateStructure> cells_to_structures(const Cells& c, const RegisterSchema& schema,
                                                const Vocabulary& vocab) {
    std::vector<StateStructure> out(c.columns);
    for (int col = 0; col < c.columns; ++col)
        for (int r = 0; r < c.registers; ++r)
            if (int h = c.at(col, r); h >= 0) out[col][schema.short_name(r)] = vocab.token(h);
    return out;
}

Cells cells_from_vectors(const std::vector<StateVector>& v, const RegisterSchema& schema) {
    Cells c(static_cast<int>(v.size()), static_cast<int>(schema.size()));
    for (size_t col = 0; col < v.size(); ++col) {
        if (static_cast<size_t>(v[col].size()) != schema.dim())
            throw SchemaError("vector length mismatch");
        for (size_t r = 0; r < schema.size(); ++r)
            c.at(static_cast<int>(col), static_cast<int>(r)) =
                block_hot(v[col], schema.offsets(r).first, schema.d_register(), schema.short_name(r));
    }
    return c;
}

std::vector<StateVector> cells_to_vectors(const Cells& c, const RegisterSchema& schema) {
    std::vector<StateVector> out;
    out.reserve(c.columns);
    for (int col = 0; col < c.columns; ++col) {
        StateVector v = StateVector::Zero(static_cast<Eigen::Index>(schema.dim()));
        for (int r = 0; r < c.registers; ++r)
            if (int h = c.at(col, r); h >= 0) v[schema.offsets(r).first + h] = 1.0f;
        out.push_back(std::move(v));
    }
    return out;
}

}  // namespace tpf
