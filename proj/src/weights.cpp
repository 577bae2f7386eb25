#include "tpf/weights.hpp"

#include <bit>
#include <fstream>
#include <json.hpp>
#include <set>

namespace tpf {

Eigen::MatrixXf AffineMap::dense_matrix(int n_registers, int d) const {
    Eigen::MatrixXf W = Eigen::MatrixXf::Zero(n_registers * d, n_registers * d);
    for (const auto& b : blocks) {
        size_t r0 = static_cast<size_t>(b.source) * d, c0 = static_cast<size_t>(b.target) * d;
        for (int i = 0; i < b.m.outerSize(); ++i)
            for (BlockMatrix::InnerIterator it(b.m, i); it; ++it) W(r0 + i, c0 + it.col()) += it.value();
    }
    return W;
}

Eigen::VectorXf AffineMap::dense_bias(int n_registers, int d) const {
    Eigen::VectorXf v = Eigen::VectorXf::Zero(n_registers * d);
    for (const auto& b : biases) v.segment(static_cast<Eigen::Index>(b.target) * d, d) += b.b;
    return v;
}

StateVector AffineMap::apply(const StateVector& x, int n_registers, int d) const {
    StateVector out = StateVector::Zero(n_registers * d);
    for (const auto& b : blocks) {
        Eigen::VectorXf xs = x.segment(static_cast<Eigen::Index>(b.source) * d, d);
        out.segment(static_cast<Eigen::Index>(b.target) * d, d) += (xs.transpose() * b.m).transpose();
    }
    for (const auto& b : biases) out.segment(static_cast<Eigen::Index>(b.target) * d, d) += b.b;
    return out;
}

std::vector<int> AffineMap::targets() const {
    std::set<int> t;
    for (const auto& b : blocks) t.insert(b.target);
    for (const auto& b : biases) t.insert(b.target);
    return {t.begin(), t.end()};
}

namespace {

void flatten(const std::vector<ModelNode>& ns, std::vector<const LayerWeights*>& out) {
    for (const auto& n : ns) {
        if (n.is_repeat) flatten(n.body, out);
        else out.push_back(&n.layer);
    }
}

void collect_keys(const std::vector<QkvlEntry>& es, std::vector<std::string>& out) {
    for (const auto& e : es) {
        if (e.is_repeat) {
            collect_keys(e.body, out);
            continue;
        }
        for (const RegisterDict* d : {&e.layer.q, &e.layer.k, &e.layer.v})
            for (const auto& [k, s] : *d) out.push_back(k);
    }
}

void collect_constants(const std::vector<QkvlEntry>& es, const QkvlProgram& q, std::vector<std::string>& out) {
    for (const auto& e : es) {
        if (e.is_repeat) {
            collect_constants(e.body, q, out);
            continue;
        }
        for (const RegisterDict* d : {&e.layer.q, &e.layer.k, &e.layer.v})
            for (const auto& [k, s] : *d)
                for (const auto& item : s.items)
                    if (!resolve_source(item, q).is_register) out.push_back(item);
    }
}

BlockMatrix identity(int d) {
    BlockMatrix m(d, d);
    m.setIdentity();
    return m;
}

BlockMatrix ones_complement(int d) {
    std::vector<Eigen::Triplet<float>> t;
    t.reserve(static_cast<size_t>(d) * (d - 1));
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j)
            if (i != j) t.emplace_back(i, j, 1.0f);
    BlockMatrix m(d, d);
    m.setFromTriplets(t.begin(), t.end());
    return m;
}

BlockMatrix shift(const Vocabulary& vocab, int d, int step) {
    std::vector<Eigen::Triplet<float>> t;
    for (int p = 0; p <= vocab.max_position(); ++p) {
        int q = p + step;
        if (q < 0 || q > vocab.max_position()) continue;
        t.emplace_back(vocab.index(std::to_string(p)), vocab.index(std::to_string(q)), 1.0f);
    }
    BlockMatrix m(d, d);
    m.setFromTriplets(t.begin(), t.end());
    return m;
}

class LayerBuilder {
   public:
    LayerBuilder(const QkvlProgram& p, const RegisterSchema& s, const Vocabulary& v)
        : prog_(p), schema_(s), vocab_(v), d_(s.d_register()) {}

    AffineMap build(const RegisterDict& dict, bool allow_multi) {
        AffineMap m;
        for (const auto& [key, src] : dict) {
            auto t = schema_.find(key);
            if (!t) throw CompileError("unknown register '" + key + "'");
            if (src.multi_hot() && !allow_multi)
                throw CompileError("value register '" + key + "' cannot take a multi-hot source");
            switch (src.kind) {
                case SourceSpec::Kind::Value: {
                    SourceRef r = resolve_source(src.items.at(0), prog_);
                    if (r.is_register) m.blocks.push_back(block(*t, r));
                    else m.biases.push_back(bias(*t, {r.name}, false));
                    break;
                }
                case SourceSpec::Kind::NotEqual: {
                    SourceRef r = resolve_source(src.items.at(0), prog_);
                    if (r.is_register) {
                        if (!r.func.empty()) throw CompileError("function inside '!=' is not supported");
                        WeightBlock b;
                        b.target = *t;
                        b.source = schema_.index(r.name);
                        b.kind = WeightBlock::Kind::OnesComplement;
                        b.m = ones_complement(d_);
                        m.blocks.push_back(std::move(b));
                    } else {
                        m.biases.push_back(bias(*t, {r.name}, true));
                    }
                    break;
                }
                case SourceSpec::Kind::In:
                case SourceSpec::Kind::NotIn:
                    if (src.items.empty()) throw CompileError("empty 'in' list for '" + key + "'");
                    m.biases.push_back(bias(*t, src.items, src.kind == SourceSpec::Kind::NotIn));
                    break;
            }
        }
        return m;
    }

   private:
    const QkvlProgram& prog_;
    const RegisterSchema& schema_;
    const Vocabulary& vocab_;
    int d_;

    int value(const std::string& tok) const {
        auto i = vocab_.find(tok);
        if (!i) throw CompileError("constant '" + tok + "' is not in the vocabulary");
        if (*i >= d_) throw CompileError("constant '" + tok + "' exceeds the register size");
        return *i;
    }

    WeightBlock block(int target, const SourceRef& r) const {
        WeightBlock b;
        b.target = target;
        b.source = schema_.index(r.name);
        if (r.func.empty()) {
            b.kind = WeightBlock::Kind::Identity;
            b.m = identity(d_);
            return b;
        }
        if (b.source != schema_.position_register())
            throw CompileError("function '" + r.func + "' applied to non-position register '" + r.name + "'");
        if (r.func == "pos_increment") b.kind = WeightBlock::Kind::Increment;
        else if (r.func == "pos_decrement") b.kind = WeightBlock::Kind::Decrement;
        else throw CompileError("unknown function '" + r.func + "'");
        b.m = shift(vocab_, d_, b.kind == WeightBlock::Kind::Increment ? 1 : -1);
        return b;
    }

    BiasBlock bias(int target, const std::vector<std::string>& toks, bool complement) const {
        BiasBlock b;
        b.target = target;
        b.b = Eigen::VectorXf::Constant(d_, complement ? 1.0f : 0.0f);
        for (const auto& t : toks) b.b[value(t)] = complement ? 0.0f : 1.0f;
        for (int j = 0; j < d_; ++j)
            if (b.b[j] != 0.0f) b.support.push_back(j);
        return b;
    }
};

bool is_multi(const AffineMap& m, int reg) {
    for (const auto& b : m.blocks)
        if (b.target == reg && b.kind == WeightBlock::Kind::OnesComplement) return true;
    for (const auto& b : m.biases)
        if (b.target == reg && b.support.size() != 1) return true;
    return false;
}

void compile_nodes(const std::vector<QkvlEntry>& es, const QkvlProgram& q, const RegisterSchema& s,
                   const Vocabulary& v, std::vector<ModelNode>& out, int& next_id) {
    for (const auto& e : es) {
        ModelNode n;
        if (e.is_repeat) {
            n.is_repeat = true;
            n.comment = e.comment;
            compile_nodes(e.body, q, s, v, n.body, next_id);
        } else {
            n.layer = compile_layer(e.layer, q, s, v);
            n.layer.id = next_id++;
        }
        out.push_back(std::move(n));
    }
}

}  // namespace

size_t DatModel::layer_count() const { return flat_layers().size(); }

std::vector<const LayerWeights*> DatModel::flat_layers() const {
    std::vector<const LayerWeights*> out;
    flatten(layers, out);
    return out;
}

std::string DatModel::system_short(const std::string& role) const {
    for (const auto& [r, s] : system)
        if (r == role) return s;
    return "";
}

RegisterSchema derive_schema(const QkvlProgram& q, int d_register) {
    std::vector<std::pair<std::string, std::string>> regs = q.registers;
    std::set<std::string> have;
    for (const auto& r : regs) have.insert(r.second);
    for (const auto& [full, shrt] : q.registers) {
        if (shrt.find('*') != std::string::npos) continue;
        regs.emplace_back(full + "`", shrt + "`");
        have.insert(shrt + "`");
    }
    std::vector<std::string> keys;
    collect_keys(q.entries, keys);
    for (const auto& k : keys) {
        if (have.count(k)) continue;
        if (k.empty() || k.back() != '`' || !q.is_register(k.substr(0, k.size() - 1)))
            throw CompileError("unknown register '" + k + "'");
        std::string full;
        for (const auto& [f, s] : q.registers)
            if (s == k.substr(0, k.size() - 1)) full = f;
        regs.emplace_back(full + "`", k);
        have.insert(k);
    }
    RegisterSchema schema(std::move(regs), d_register);
    if (auto p = q.system_short("position"); !p.empty()) schema.set_position_register(schema.index(p));
    return schema;
}

void add_program_constants(const QkvlProgram& q, Vocabulary& vocab) {
    for (const auto& [n, v] : q.constants) vocab.add(v ? *v : n);
    std::vector<std::string> lits;
    collect_constants(q.entries, q, lits);
    for (const auto& l : lits) vocab.add(l);
}

LayerWeights compile_layer(const LayerSpec& spec, const QkvlProgram& prog, const RegisterSchema& schema,
                           const Vocabulary& vocab) {
    if (spec.q.size() != spec.k.size()) throw CompileError("query and key registers differ in '" + spec.comment + "'");
    for (size_t i = 0; i < spec.q.size(); ++i) {
        bool found = false;
        for (const auto& [k, s] : spec.k) found |= k == spec.q[i].first;
        if (!found) throw CompileError("query register '" + spec.q[i].first + "' has no key counterpart");
    }
    if (spec.q.empty()) throw CompileError("layer '" + spec.comment + "' has no conditions");
    LayerBuilder b(prog, schema, vocab);
    LayerWeights L;
    L.q = b.build(spec.q, true);
    L.k = b.build(spec.k, true);
    L.v = b.build(spec.v, false);
    for (const auto& [key, s] : spec.q) {
        int r = schema.index(key);
        if (is_multi(L.q, r) && is_multi(L.k, r))
            throw CompileError("register '" + key + "' is multi-hot in both query and key");
    }
    L.causal_attn = spec.causal_attn;
    L.right_match = spec.right_match;
    L.m_conditions = static_cast<int>(spec.q.size());
    L.comment = spec.comment;
    L.n_registers = static_cast<int>(schema.size());
    L.d_register = schema.d_register();
    return L;
}

DatModel compile_model(const QkvlProgram& q, Vocabulary vocab, const ModelOptions& opts) {
    add_program_constants(q, vocab);
    int d = std::max<int>(static_cast<int>(vocab.size()), opts.d_min);
    DatModel m;
    m.schema = derive_schema(q, d);
    if (m.schema.dim() > opts.max_dim)
        throw CompileError("model dimension " + std::to_string(m.schema.dim()) + " exceeds the limit of " +
                           std::to_string(opts.max_dim));
    m.vocab = std::move(vocab);
    for (const auto& [role, full] : q.system)
        for (const auto& [f, s] : q.registers)
            if (f == full) m.system.emplace_back(role, s);
    int id = 0;
    compile_nodes(q.entries, q, m.schema, m.vocab, m.layers, id);
    return m;
}

void dump_weights(const DatModel& m, const std::filesystem::path& prefix) {
    static_assert(std::endian::native == std::endian::little, "weight dumps assume a little-endian host");
    std::filesystem::path bin = prefix, side = prefix;
    bin += ".bin";
    side += ".json";
    std::ofstream out(bin, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + bin.string());
    const auto& s = m.schema;
    int d = s.d_register();
    nlohmann::ordered_json meta;
    meta["n_registers"] = s.size();
    meta["d_register"] = d;
    meta["dim"] = s.dim();
    meta["dtype"] = "float32";
    meta["layout"] = "row-major, little-endian";
    std::vector<std::string> regs;
    for (const auto& r : s.registers()) regs.push_back(r.second);
    meta["registers"] = regs;
    meta["vocab"] = m.vocab.entries();
    nlohmann::ordered_json entries = nlohmann::ordered_json::array();
    uint64_t offset = 0;
    auto write = [&](const float* p, size_t n) {
        out.write(reinterpret_cast<const char*>(p), static_cast<std::streamsize>(n * sizeof(float)));
        offset += n * sizeof(float);
    };
    static const char* kinds[] = {"identity", "pos_increment", "pos_decrement", "ones_complement"};
    for (const LayerWeights* L : m.flat_layers()) {
        for (auto [name, map] : {std::pair<const char*, const AffineMap*>{"q", &L->q}, {"k", &L->k}, {"v", &L->v}}) {
            for (const auto& b : map->blocks) {
                Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> dense = Eigen::MatrixXf(b.m);
                entries.push_back({{"layer", L->id}, {"map", name}, {"kind", "matrix"},
                                   {"type", kinds[static_cast<int>(b.kind)]},
                                   {"target", s.short_name(b.target)}, {"source", s.short_name(b.source)},
                                   {"shape", {d, d}}, {"offset", offset}});
                write(dense.data(), static_cast<size_t>(d) * d);
            }
            for (const auto& b : map->biases) {
                entries.push_back({{"layer", L->id}, {"map", name}, {"kind", "bias"},
                                   {"target", s.short_name(b.target)}, {"shape", {d}}, {"offset", offset}});
                write(b.b.data(), static_cast<size_t>(d));
            }
        }
    }
    meta["blocks"] = entries;
    nlohmann::ordered_json layers = nlohmann::ordered_json::array();
    for (const LayerWeights* L : m.flat_layers())
        layers.push_back({{"id", L->id}, {"comment", L->comment}, {"causal_attn", L->causal_attn},
                          {"right_match", L->right_match}, {"m_conditions", L->m_conditions}});
    meta["layers"] = layers;
    std::ofstream(side) << meta.dump(4) << "\n";
}

}  // namespace tpf
