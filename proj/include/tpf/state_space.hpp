#pragma once

#include <Eigen/Dense>

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace tpf {

struct SchemaError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Register name (short form, e.g. "r", "p*", "s`") -> value token.
using StateStructure = std::map<std::string, std::string>;
using StateVector = Eigen::VectorXf;

// Control tokens that every ICL vocabulary starts with, in index order.
const std::vector<std::string>& reserved_tokens();

class Vocabulary {
   public:
    Vocabulary() = default;

    // reserved tokens followed by the position numerals "0".."max_position"
    static Vocabulary with_reserved(int max_position);

    int add(const std::string& token);
    void add_positions(int max_position);
    std::optional<int> find(const std::string& token) const;
    int index(const std::string& token) const;
    const std::string& token(int i) const { return entries_.at(i); }
    size_t size() const { return entries_.size(); }
    const std::vector<std::string>& entries() const { return entries_; }
    bool is_reserved(const std::string& token) const;
    int max_position() const { return max_position_; }

   private:
    std::vector<std::string> entries_;
    std::unordered_map<std::string, int> index_;
    size_t n_reserved_ = 0;
    int max_position_ = -1;
};

class RegisterSchema {
   public:
    RegisterSchema() = default;
    RegisterSchema(std::vector<std::pair<std::string, std::string>> registers, int d_register);

    size_t size() const { return registers_.size(); }
    int d_register() const { return d_; }
    size_t dim() const { return registers_.size() * static_cast<size_t>(d_); }

    std::optional<int> find(const std::string& short_name) const;
    int index(const std::string& short_name) const;
    const std::string& short_name(int r) const { return registers_.at(r).second; }
    const std::string& full_name(int r) const { return registers_.at(r).first; }
    std::pair<size_t, size_t> offsets(int r) const {
        return {static_cast<size_t>(r) * d_, static_cast<size_t>(r + 1) * d_};
    }
    const std::vector<std::pair<std::string, std::string>>& registers() const { return registers_; }

    // register holding position values; function matrices only act on it
    int position_register() const { return position_reg_; }
    void set_position_register(int r) { position_reg_ = r; }

   private:
    std::vector<std::pair<std::string, std::string>> registers_;
    std::unordered_map<std::string, int> index_;
    int d_ = 0;
    int position_reg_ = -1;
};

StateVector embed(const StateStructure& s, const RegisterSchema& schema, const Vocabulary& vocab);
StateStructure decode(const StateVector& v, const RegisterSchema& schema, const Vocabulary& vocab);

// Like decode, but a block may hold several nonzero entries (query/key vectors).
std::map<std::string, std::vector<std::string>> decode_multi(const StateVector& v,
                                                             const RegisterSchema& schema,
                                                             const Vocabulary& vocab);

// Compact residual: one hot index (or -1) per register per column. Exact for
// vectors whose blocks are zero or one-hot with value 1.
struct Cells {
    int columns = 0;
    int registers = 0;
    std::vector<int> hot;

    Cells() = default;
    Cells(int t, int r) : columns(t), registers(r), hot(static_cast<size_t>(t) * r, -1) {}
    int& at(int c, int r) { return hot[static_cast<size_t>(c) * registers + r]; }
    int at(int c, int r) const { return hot[static_cast<size_t>(c) * registers + r]; }
    bool operator==(const Cells&) const = default;
};

Cells cells_from_structures(const std::vector<StateStructure>& s, const RegisterSchema& schema,
                            const Vocabulary& vocab);
std::vector<StateStructure> cells_to_structures(const Cells& c, const RegisterSchema& schema,
                                                const Vocabulary& vocab);
Cells cells_from_vectors(const std::vector<StateVector>& v, const RegisterSchema& schema);
std::vector<StateVector> cells_to_vectors(const Cells& c, const RegisterSchema& schema);

}  // namespace tpf
