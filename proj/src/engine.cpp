#include "tpf/engine.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace tpf {

bool delta_matches(double delta, int m) { return std::fabs(delta - m) < 1e-6; }

std::optional<int> datmax(const StateVector& qv, const std::vector<StateVector>& keys, int m, bool causal,
                          bool right_match, int self_pos) {
    if (m < 1) throw EngineError("datmax needs at least one condition");
    int hi = causal ? std::min<int>(self_pos, static_cast<int>(keys.size()) - 1) : static_cast<int>(keys.size()) - 1;
    std::optional<int> best;
    for (int n = 0; n <= hi; ++n) {
        if (!delta_matches(qv.dot(keys[n]), m)) continue;
        if (!right_match) return n;
        best = n;
    }
    return best;
}

StateVector datnorm(const StateVector& u, int n_registers, int d) {
    StateVector out = StateVector::Zero(u.size());
    for (int r = 0; r < n_registers; ++r) {
        auto blk = u.segment(static_cast<Eigen::Index>(r) * d, d);
        if ((blk.array() == 0.0f).all()) continue;
        Eigen::Index j;
        float mx = blk.maxCoeff(&j);
        if ((blk.array() == mx).count() > 1) throw TieError("DATnorm tie in register block " + std::to_string(r));
        out[static_cast<Eigen::Index>(r) * d + j] = 1.0f;
    }
    return out;
}

std::vector<StateVector> layer_step(const LayerWeights& L, const std::vector<StateVector>& inputs) {
    const int R = L.n_registers, d = L.d_register;
    std::vector<StateVector> q, k, v, out;
    for (const auto& i : inputs) {
        q.push_back(L.q.apply(i, R, d));
        k.push_back(L.k.apply(i, R, d));
        v.push_back(L.v.apply(i, R, d));
    }
    for (size_t N = 0; N < inputs.size(); ++N) {
        auto a = datmax(q[N], k, L.m_conditions, L.causal_attn, L.right_match, static_cast<int>(N));
        out.push_back(a ? datnorm(inputs[N] + 2.0f * v[*a], R, d) : inputs[N]);
    }
    return out;
}

namespace {

struct Entry {
    int key;  // slot * d + value index
    float val;
};

struct Posting {
    int n;
    float val;
};

void append_rows(const AffineMap& M, const Cells& in, int col, const std::vector<int>& slot_of, int d,
                 std::vector<Entry>& dst) {
    for (const auto& b : M.blocks) {
        int h = in.at(col, b.source);
        if (h < 0) continue;
        int base = slot_of[b.target] * d;
        for (BlockMatrix::InnerIterator it(b.m, h); it; ++it)
            dst.push_back({base + static_cast<int>(it.col()), it.value()});
    }
}

std::vector<SparseEntry> nonzeros(const AffineMap& M, const Cells& in, int col) {
    std::map<std::pair<int, int>, float> acc;
    for (const auto& b : M.blocks) {
        int h = in.at(col, b.source);
        if (h < 0) continue;
        for (BlockMatrix::InnerIterator it(b.m, h); it; ++it) acc[{b.target, static_cast<int>(it.col())}] += it.value();
    }
    for (const auto& b : M.biases)
        for (int j : b.support) acc[{b.target, j}] += b.b[j];
    std::vector<SparseEntry> out;
    for (const auto& [k, v] : acc)
        if (v != 0.0f) out.push_back({k.first, k.second, v});
    return out;
}

}  // namespace

void run_layer(const LayerWeights& L, const Cells& in, Cells& out, std::vector<int>& alpha, RunStats* stats) {
    const int T = in.columns, d = L.d_register, m = L.m_conditions;
    if (m < 1) throw EngineError("layer '" + L.comment + "' has no conditions");
    if (in.registers != L.n_registers) throw EngineError("residual width does not match the layer");

    std::vector<int> slot_of(L.n_registers, -1), slots;
    auto add_slot = [&](int r) {
        if (slot_of[r] < 0) {
            slot_of[r] = static_cast<int>(slots.size());
            slots.push_back(r);
        }
    };
    for (const AffineMap* M : {&L.q, &L.k}) {
        for (const auto& b : M->blocks) add_slot(b.target);
        for (const auto& b : M->biases) add_slot(b.target);
    }
    const int K = static_cast<int>(slots.size()) * d;
    std::vector<float> bq(K, 0.0f), bk(K, 0.0f);
    for (const auto& b : L.q.biases)
        for (int j : b.support) bq[slot_of[b.target] * d + j] += b.b[j];
    for (const auto& b : L.k.biases)
        for (int j : b.support) bk[slot_of[b.target] * d + j] += b.b[j];
    double c = 0;
    for (int i = 0; i < K; ++i) c += static_cast<double>(bq[i]) * bk[i];

    // bilinear split: (rq + bq).(rk + bk) = c + rq.bk + bq.rk + rq.rk
    std::vector<Entry> qe, ke;
    std::vector<int> qoff(T + 1, 0), koff(T + 1, 0);
    std::vector<double> sq(T, 0.0), sk(T, 0.0);
    for (int col = 0; col < T; ++col) {
        qoff[col] = static_cast<int>(qe.size());
        append_rows(L.q, in, col, slot_of, d, qe);
        for (size_t i = qoff[col]; i < qe.size(); ++i) sq[col] += static_cast<double>(qe[i].val) * bk[qe[i].key];
        koff[col] = static_cast<int>(ke.size());
        append_rows(L.k, in, col, slot_of, d, ke);
        for (size_t i = koff[col]; i < ke.size(); ++i) sk[col] += static_cast<double>(ke[i].val) * bq[ke[i].key];
    }
    qoff[T] = static_cast<int>(qe.size());
    koff[T] = static_cast<int>(ke.size());

    std::vector<int> pstart(K + 1, 0);
    for (const auto& e : ke) ++pstart[e.key + 1];
    for (int i = 0; i < K; ++i) pstart[i + 1] += pstart[i];
    std::vector<Posting> post(ke.size());
    {
        std::vector<int> fill(pstart.begin(), pstart.end() - 1);
        for (int n = 0; n < T; ++n)
            for (int i = koff[n]; i < koff[n + 1]; ++i) post[fill[ke[i].key]++] = {n, ke[i].val};
    }

    alpha.assign(T, -1);
    std::vector<double> acc(T);
    for (int N = 0; N < T; ++N) {
        std::fill(acc.begin(), acc.end(), 0.0);
        for (int i = qoff[N]; i < qoff[N + 1]; ++i) {
            const Entry& e = qe[i];
            for (int p = pstart[e.key]; p < pstart[e.key + 1]; ++p)
                acc[post[p].n] += static_cast<double>(e.val) * post[p].val;
        }
        const double base = c + sq[N];
        const int hi = L.causal_attn ? N : T - 1;
        if (L.right_match) {
            for (int n = hi; n >= 0; --n)
                if (delta_matches(base + sk[n] + acc[n], m)) {
                    alpha[N] = n;
                    break;
                }
        } else {
            for (int n = 0; n <= hi; ++n)
                if (delta_matches(base + sk[n] + acc[n], m)) {
                    alpha[N] = n;
                    break;
                }
        }
        if (stats) {
            for (int n = 0; n < T; ++n)
                stats->max_delta_hat = std::max(stats->max_delta_hat, (base + sk[n] + acc[n]) / m);
            if (alpha[N] > N && L.causal_attn) ++stats->causal_violations;
        }
    }
    if (stats) ++stats->layer_evals;

    out = in;
    std::vector<std::pair<int, float>> cand;
    for (int r : L.v.targets()) {
        for (int N = 0; N < T; ++N) {
            int a = alpha[N];
            if (a < 0) continue;
            cand.clear();
            int h = in.at(N, r);
            if (h >= 0) cand.emplace_back(h, 1.0f);
            for (const auto& b : L.v.blocks) {
                if (b.target != r) continue;
                int src = in.at(a, b.source);
                if (src < 0) continue;
                for (BlockMatrix::InnerIterator it(b.m, src); it; ++it)
                    cand.emplace_back(static_cast<int>(it.col()), 2.0f * it.value());
            }
            for (const auto& b : L.v.biases)
                if (b.target == r)
                    for (int j : b.support) cand.emplace_back(j, 2.0f * b.b[j]);
            std::sort(cand.begin(), cand.end());
            int best = -1, ties = 0;
            float mx = 0.0f;
            for (size_t i = 0; i < cand.size();) {
                int j = cand[i].first;
                float s = 0.0f;
                for (; i < cand.size() && cand[i].first == j; ++i) s += cand[i].second;
                if (s > mx) {
                    mx = s;
                    best = j;
                    ties = 1;
                } else if (s == mx && s > 0.0f) {
                    ++ties;
                }
            }
            if (ties > 1) throw TieError("DATnorm tie in layer '" + L.comment + "'");
            out.at(N, r) = best;
        }
    }
}

namespace {

class Runner {
   public:
    Runner(const DatModel& m, const RunOptions& o, Trace* t, RunStats& s) : model_(m), opts_(o), trace_(t), stats_(s) {}

    void nodes(const std::vector<ModelNode>& ns, Cells& cells, int iter) {
        for (const auto& n : ns) {
            if (!n.is_repeat) {
                layer(n.layer, cells, iter);
                continue;
            }
            int cap = opts_.repeat_cap > 0 ? opts_.repeat_cap : 4 * cells.columns;
            for (int it = 0;; ++it) {
                if (it >= cap)
                    throw DivergenceError("repeat block '" + n.comment + "' did not settle within " +
                                          std::to_string(cap) + " iterations");
                Cells before = cells;
                nodes(n.body, cells, it);
                if (cells == before) break;
            }
        }
    }

    void layer(const LayerWeights& L, Cells& cells, int iter) {
        run_layer(L, cells, scratch_, alpha_, opts_.collect_stats ? &stats_ : nullptr);
        if (trace_ && opts_.trace_level != TraceLevel::None) {
            TraceStep s;
            s.layer_id = L.id;
            s.comment = L.comment;
            s.repeat_iteration = iter;
            s.cells = scratch_.hot;
            s.alpha = alpha_;
            if (opts_.trace_level == TraceLevel::Full) {
                for (int c = 0; c < cells.columns; ++c) {
                    s.q.push_back(nonzeros(L.q, cells, c));
                    s.k.push_back(nonzeros(L.k, cells, c));
                    s.v.push_back(nonzeros(L.v, cells, c));
                }
            }
            trace_->steps.push_back(std::move(s));
        }
        std::swap(cells, scratch_);
    }

   private:
    const DatModel& model_;
    const RunOptions& opts_;
    Trace* trace_;
    RunStats& stats_;
    Cells scratch_;
    std::vector<int> alpha_;
};

Trace empty_trace(const DatModel& model, TraceLevel level, int columns) {
    Trace t;
    t.level = level;
    t.columns = columns;
    for (const auto& r : model.schema.registers()) t.registers.push_back(r.second);
    t.vocab = model.vocab.entries();
    return t;
}

}  // namespace

ForwardResult forward_cells(const DatModel& model, Cells input, const RunOptions& opts) {
    ForwardResult r;
    r.trace = empty_trace(model, opts.trace_level, input.columns);
    r.trace.prompt_columns = input.columns;
    Runner run(model, opts, &r.trace, r.stats);
    run.nodes(model.layers, input, 0);
    ++r.stats.forwards;
    r.cells = std::move(input);
    return r;
}

std::vector<StateVector> forward(const DatModel& model, const std::vector<StateVector>& inputs,
                                 const RunOptions& opts, Trace* trace) {
    if (inputs.empty()) throw EngineError("forward needs at least one column");
    auto r = forward_cells(model, cells_from_vectors(inputs, model.schema), opts);
    if (trace) *trace = std::move(r.trace);
    return cells_to_vectors(r.cells, model.schema);
}

FixpointResult run_parallel_fixpoint(const DatModel& model, const std::vector<StateStructure>& initial,
                                     const HaltPredicate& halt, int max_sweeps, TraceLevel trace_level) {
    FixpointResult res;
    Cells cells = cells_from_structures(initial, model.schema, model.vocab);
    const std::vector<ModelNode>* body = &model.layers;
    if (model.layers.size() == 1 && model.layers[0].is_repeat) body = &model.layers[0].body;
    RunOptions opts;
    opts.trace_level = trace_level;
    opts.repeat_cap = max_sweeps;
    res.trace = empty_trace(model, trace_level, cells.columns);
    res.trace.prompt_columns = cells.columns;
    RunStats stats;
    Runner run(model, opts, &res.trace, stats);
    for (;;) {
        if (res.sweeps >= max_sweeps)
            throw DivergenceError("no fixpoint within " + std::to_string(max_sweeps) + " sweeps");
        Cells before = cells;
        run.nodes(*body, cells, res.sweeps);
        ++res.sweeps;
        if (cells == before) {
            res.converged = true;
            break;
        }
        if (halt && halt(cells_to_structures(cells, model.schema, model.vocab))) {
            res.halted = true;
            break;
        }
    }
    res.states = cells_to_structures(cells, model.schema, model.vocab);
    return res;
}

}  // namespace tpf
