#pragma once

#include <Eigen/Sparse>

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "tpf/qkvl.hpp"
#include "tpf/state_space.hpp"

namespace tpf {

using BlockMatrix = Eigen::SparseMatrix<float, Eigen::RowMajor>;

// One nonzero d x d block of a D x D weight matrix, row-vector convention:
// rows index the source register's values, columns the target register's.
struct WeightBlock {
    enum class Kind { Identity, Increment, Decrement, OnesComplement };
    int target = 0;
    int source = 0;
    Kind kind = Kind::Identity;
    BlockMatrix m;
};

struct BiasBlock {
    int target = 0;
    Eigen::VectorXf b;
    std::vector<int> support;  // nonzero indices of b
};

// x -> x W + b, stored block-sparse
struct AffineMap {
    std::vector<WeightBlock> blocks;
    std::vector<BiasBlock> biases;

    Eigen::MatrixXf dense_matrix(int n_registers, int d) const;
    Eigen::VectorXf dense_bias(int n_registers, int d) const;
    StateVector apply(const StateVector& x, int n_registers, int d) const;
    std::vector<int> targets() const;
};

struct LayerWeights {
    AffineMap q, k, v;
    bool causal_attn = false;
    bool right_match = false;
    int m_conditions = 0;
    std::string comment;
    int n_registers = 0;
    int d_register = 0;
    int id = 0;  // index in the flattened layer order

    // dense D x D views; only sensible for small models
    Eigen::MatrixXf Wq() const { return q.dense_matrix(n_registers, d_register); }
    Eigen::MatrixXf Wk() const { return k.dense_matrix(n_registers, d_register); }
    Eigen::MatrixXf Wv() const { return v.dense_matrix(n_registers, d_register); }
    Eigen::VectorXf bq() const { return q.dense_bias(n_registers, d_register); }
    Eigen::VectorXf bk() const { return k.dense_bias(n_registers, d_register); }
    Eigen::VectorXf bv() const { return v.dense_bias(n_registers, d_register); }
};

struct ModelNode {
    bool is_repeat = false;
    LayerWeights layer;
    std::string comment;
    std::vector<ModelNode> body;
};

struct DatModel {
    RegisterSchema schema;
    Vocabulary vocab;
    std::vector<ModelNode> layers;
    std::vector<std::pair<std::string, std::string>> system;  // role -> short name

    size_t layer_count() const;
    std::vector<const LayerWeights*> flat_layers() const;
    std::string system_short(const std::string& role) const;
};

struct ModelOptions {
    int d_min = 96;
    size_t max_dim = size_t(1) << 22;
};

RegisterSchema derive_schema(const QkvlProgram& q, int d_register);
void add_program_constants(const QkvlProgram& q, Vocabulary& vocab);

LayerWeights compile_layer(const LayerSpec& spec, const QkvlProgram& prog, const RegisterSchema& schema,
                           const Vocabulary& vocab);
DatModel compile_model(const QkvlProgram& q, Vocabulary vocab, const ModelOptions& opts = {});

// Writes <prefix>.bin (nonzero blocks, row-major little-endian float32) and
// <prefix>.json describing each block's layer, role, registers and offset.
void dump_weights(const DatModel& m, const std::filesystem::path& prefix);

}  // namespace tpf
