#pragma once

#include <string>
#include <vector>

#include "tpf/qkvl.hpp"
#include "tpf/state_space.hpp"

namespace tpf {

// Symbolic QKV machine: runs a QkvlProgram directly on state structures.
struct QkvmOptions {
    int max_position = -1;  // @pos_increment beyond this yields null; -1 = unbounded
    int repeat_cap = 0;     // 0: 4 x columns
};

struct QkvmStep {
    int layer_id = 0;  // flattened LayerSpec order
    std::string comment;
    int repeat_iteration = 0;
    std::vector<int> alpha;
    std::vector<StateStructure> states;
};

struct QkvmResult {
    std::vector<StateStructure> states;
    std::vector<QkvmStep> steps;
};

std::vector<StateStructure> qkvm_layer_step(const LayerSpec& layer, const QkvlProgram& prog,
                                            const std::vector<StateStructure>& in, const QkvmOptions& opts = {},
                                            std::vector<int>* alpha = nullptr);

QkvmResult qkvm_interpret(const QkvlProgram& prog, const std::vector<StateStructure>& initial,
                          const QkvmOptions& opts = {}, bool record = false);

struct QkvmGeneration {
    std::vector<std::string> tokens;
    bool truncated = false;
};

QkvmGeneration qkvm_generate(const QkvlProgram& prog, const std::vector<std::string>& prompt,
                             const std::string& stop_symbol = ".", int max_new = 64, QkvmOptions opts = {});

}  // namespace tpf
