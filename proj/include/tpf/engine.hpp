#pragma once

#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "tpf/state_space.hpp"
#include "tpf/weights.hpp"

namespace tpf {

struct EngineError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct DivergenceError : EngineError {
    using EngineError::EngineError;
};
struct TieError : EngineError {
    using EngineError::EngineError;
};

bool delta_matches(double delta, int m);

// --- dense reference path ---
std::optional<int> datmax(const StateVector& qv, const std::vector<StateVector>& keys, int m, bool causal,
                          bool right_match, int self_pos);
StateVector datnorm(const StateVector& u, int n_registers, int d_register);
std::vector<StateVector> layer_step(const LayerWeights& layer, const std::vector<StateVector>& inputs);

// --- traces ---
enum class TraceLevel { None, Registers, Full };
std::optional<TraceLevel> parse_trace_level(const std::string& s);
const char* trace_level_name(TraceLevel l);

struct SparseEntry {
    int reg;
    int index;
    float value;
};

struct TraceStep {
    int layer_id = 0;
    std::string comment;
    int repeat_iteration = 0;
    std::vector<int> cells;  // columns x registers hot indices after the layer
    std::vector<int> alpha;  // per column, -1 when unmatched
    // Full level only: per column, nonzeros of q, k, v
    std::vector<std::vector<SparseEntry>> q, k, v;
};

struct Trace {
    TraceLevel level = TraceLevel::None;
    int columns = 0;
    int prompt_columns = 0;
    std::vector<std::string> registers;
    std::vector<std::string> vocab;
    std::vector<std::string> watch;
    std::vector<TraceStep> steps;

    StateStructure column(const TraceStep& s, int c) const;
    std::string to_json() const;
};

struct RunStats {
    double max_delta_hat = 0.0;  // over all (N, n) pairs of every executed layer
    long layer_evals = 0;
    long causal_violations = 0;  // should stay 0
    int forwards = 0;
};

struct RunOptions {
    TraceLevel trace_level = TraceLevel::None;
    int repeat_cap = 0;  // 0: 4 x columns
    bool collect_stats = false;
};

// Runs one layer on the compact residual. alpha is filled per column.
void run_layer(const LayerWeights& L, const Cells& in, Cells& out, std::vector<int>& alpha,
               RunStats* stats = nullptr);

struct ForwardResult {
    Cells cells;
    Trace trace;
    RunStats stats;
};

ForwardResult forward_cells(const DatModel& model, Cells input, const RunOptions& opts = {});
std::vector<StateVector> forward(const DatModel& model, const std::vector<StateVector>& inputs,
                                 const RunOptions& opts = {}, Trace* trace = nullptr);

struct GenerateOptions {
    std::string stop_symbol = ".";
    int max_new = 64;
    TraceLevel trace_level = TraceLevel::None;
    int repeat_cap = 0;
    bool collect_stats = false;
};

struct GenerateResult {
    std::vector<std::string> tokens;
    bool truncated = false;
    Trace trace;
    RunStats stats;
};

// Prompt columns get symbol, 1-based position, parse=1 and eop on the last one.
Cells prompt_cells(const DatModel& model, const std::vector<std::string>& prompt);
GenerateResult generate(const DatModel& model, const std::vector<std::string>& prompt,
                        const GenerateOptions& opts = {});

struct FixpointResult {
    std::vector<StateStructure> states;
    int sweeps = 0;
    bool halted = false;     // halt predicate fired
    bool converged = false;  // NO_CHANGE
    Trace trace;
};

using HaltPredicate = std::function<bool(const std::vector<StateStructure>&)>;

// Sweeps the whole model until NO_CHANGE or halt; one sweep = one pass over all top-level nodes,
// where a model consisting of a single repeat group is swept one body pass at a time.
FixpointResult run_parallel_fixpoint(const DatModel& model, const std::vector<StateStructure>& initial,
                                     const HaltPredicate& halt = {}, int max_sweeps = 1000,
                                     TraceLevel trace_level = TraceLevel::None);

}  // namespace tpf
