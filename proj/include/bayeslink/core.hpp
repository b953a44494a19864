#pragma once

// Domain types shared by every other module: the key-variable schema and its
// lexicographic cell index, observed record tables, sparse cell frequencies and
// one-to-one matching matrices.

#include <algorithm>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "bayeslink/errors.hpp"

namespace bayeslink {

// Category codes are 1-based: variable i takes values 1..k_i.
using Code = std::uint32_t;

// Position j of a cell v_j in the lexicographic order of (j_1, ..., j_h), 1-based.
struct CellIndex {
  std::uint64_t j = 1;

  constexpr auto operator<=>(const CellIndex&) const = default;
};

// One group of the independence pattern: the variables it covers and the
// strides that map their codes to a 0-based offset inside the group's table.
struct DirichletBlock {
  std::vector<std::size_t> vars;
  std::vector<std::uint64_t> strides;
  std::uint64_t size = 1;
};

class KeySchema {
 public:
  KeySchema() = default;

  // `pattern` lists groups of 0-based variable indices; an empty pattern means
  // every variable is its own group (full independence).
  explicit KeySchema(std::vector<Code> categories,
                     std::vector<std::vector<std::size_t>> pattern = {})
      : k_(std::move(categories)) {
    if (k_.empty()) throw SchemaError("schema needs at least one key variable");
    for (std::size_t i = 0; i < k_.size(); ++i) {
      if (k_[i] < 2) {
        throw SchemaError("variable " + std::to_string(i + 1) + " has " +
                          std::to_string(k_[i]) + " categories; at least 2 required");
      }
    }
    strides_.assign(k_.size(), 1);
    K_ = 1;
    for (std::size_t i = k_.size(); i-- > 0;) {
      strides_[i] = K_;
      if (K_ > std::numeric_limits<std::uint64_t>::max() / k_[i]) {
        throw SchemaError("cell count overflows 64 bits");
      }
      K_ *= k_[i];
    }

    if (pattern.empty()) {
      for (std::size_t i = 0; i < k_.size(); ++i) pattern.push_back({i});
    }
    std::vector<int> seen(k_.size(), 0);
    for (auto& group : pattern) {
      if (group.empty()) throw SchemaError("independence pattern has an empty group");
      std::sort(group.begin(), group.end());
      DirichletBlock block;
      block.vars = group;
      block.strides.assign(group.size(), 1);
      for (std::size_t g = group.size(); g-- > 0;) {
        const std::size_t v = group[g];
        if (v >= k_.size()) {
          throw SchemaError("independence pattern names variable " + std::to_string(v + 1) +
                            " but h = " + std::to_string(k_.size()));
        }
        ++seen[v];
        block.strides[g] = block.size;
        block.size *= k_[v];
      }
      blocks_.push_back(std::move(block));
    }
    for (std::size_t i = 0; i < k_.size(); ++i) {
      if (seen[i] != 1) {
        throw SchemaError("independence pattern must cover variable " + std::to_string(i + 1) +
                          " exactly once");
      }
    }
  }

  std::size_t h() const noexcept { return k_.size(); }
  Code k(std::size_t i) const { return k_.at(i); }
  std::span<const Code> categories() const noexcept { return k_; }
  std::uint64_t K() const noexcept { return K_; }
  const std::vector<DirichletBlock>& blocks() const noexcept { return blocks_; }

  void check_code(std::size_t i, Code c) const {
    if (c < 1 || c > k_.at(i)) {
      throw SchemaError("code " + std::to_string(c) + " out of range 1.." +
                        std::to_string(k_[i]) + " for variable " + std::to_string(i + 1));
    }
  }

  CellIndex cell_of(std::span<const Code> codes) const {
    if (codes.size() != k_.size()) {
      throw SchemaError("record has " + std::to_string(codes.size()) + " fields, schema has " +
                        std::to_string(k_.size()));
    }
    std::uint64_t off = 0;
    for (std::size_t i = 0; i < codes.size(); ++i) {
      check_code(i, codes[i]);
      off += static_cast<std::uint64_t>(codes[i] - 1) * strides_[i];
    }
    return CellIndex{off + 1};
  }

  Code code_at(CellIndex cell, std::size_t i) const {
    return static_cast<Code>(((cell.j - 1) / strides_[i]) % k_[i]) + 1;
  }

  std::vector<Code> tuple_of(CellIndex cell) const {
    if (cell.j < 1 || cell.j > K_) {
      throw SchemaError("cell index " + std::to_string(cell.j) + " out of range 1.." +
                        std::to_string(K_));
    }
    std::vector<Code> codes(k_.size());
    for (std::size_t i = 0; i < k_.size(); ++i) codes[i] = code_at(cell, i);
    return codes;
  }

  // 0-based offset of `cell` inside Dirichlet block `b`.
  std::uint64_t block_offset(CellIndex cell, std::size_t b) const {
    const auto& block = blocks_[b];
    std::uint64_t off = 0;
    for (std::size_t g = 0; g < block.vars.size(); ++g) {
      off += static_cast<std::uint64_t>(code_at(cell, block.vars[g]) - 1) * block.strides[g];
    }
    return off;
  }

  // Code of variable `var` (which must belong to block `b`) at block offset `off`.
  Code block_code(std::size_t b, std::uint64_t off, std::size_t var) const {
    const auto& block = blocks_[b];
    for (std::size_t g = 0; g < block.vars.size(); ++g) {
      if (block.vars[g] == var) return static_cast<Code>((off / block.strides[g]) % k_[var]) + 1;
    }
    throw SchemaError("variable " + std::to_string(var + 1) + " is not in block " +
                      std::to_string(b + 1));
  }

  std::size_t block_of(std::size_t var) const {
    for (std::size_t b = 0; b < blocks_.size(); ++b) {
      const auto& vars = blocks_[b].vars;
      if (std::find(vars.begin(), vars.end(), var) != vars.end()) return b;
    }
    throw SchemaError("variable " + std::to_string(var + 1) + " not in schema");
  }

  bool operator==(const KeySchema& other) const {
    if (k_ != other.k_ || blocks_.size() != other.blocks_.size()) return false;
    for (std::size_t b = 0; b < blocks_.size(); ++b) {
      if (blocks_[b].vars != other.blocks_[b].vars) return false;
    }
    return true;
  }

 private:
  std::vector<Code> k_;
  std::vector<std::uint64_t> strides_;
  std::uint64_t K_ = 0;
  std::vector<DirichletBlock> blocks_;
};

// An observed file: n rows of h category codes.
class RecordTable {
 public:
  RecordTable() = default;

  RecordTable(const KeySchema& schema, std::vector<Code> codes, char label = 'A')
      : h_(schema.h()), codes_(std::move(codes)), label_(label) {
    if (codes_.size() % h_ != 0) {
      throw SchemaError("code matrix size is not a multiple of h");
    }
    for (std::size_t s = 0; s < n(); ++s) {
      for (std::size_t i = 0; i < h_; ++i) schema.check_code(i, codes_[s * h_ + i]);
    }
  }

  static RecordTable from_rows(const KeySchema& schema,
                               const std::vector<std::vector<Code>>& rows, char label = 'A') {
    std::vector<Code> flat;
    flat.reserve(rows.size() * schema.h());
    for (const auto& r : rows) {
      if (r.size() != schema.h()) throw SchemaError("ragged record row");
      flat.insert(flat.end(), r.begin(), r.end());
    }
    return RecordTable(schema, std::move(flat), label);
  }

  std::size_t n() const noexcept { return h_ == 0 ? 0 : codes_.size() / h_; }
  std::size_t h() const noexcept { return h_; }
  char label() const noexcept { return label_; }
  std::span<const Code> row(std::size_t s) const {
    return std::span<const Code>(codes_).subspan(s * h_, h_);
  }
  Code at(std::size_t s, std::size_t i) const { return codes_[s * h_ + i]; }
  const std::vector<Code>& codes() const noexcept { return codes_; }

  std::vector<CellIndex> cells(const KeySchema& schema) const {
    std::vector<CellIndex> out(n());
    for (std::size_t s = 0; s < n(); ++s) out[s] = schema.cell_of(row(s));
    return out;
  }

 private:
  std::size_t h_ = 0;
  std::vector<Code> codes_;
  char label_ = 'A';
};

// Sparse nonnegative counts over cells. Absent cells are zero.
class FrequencyVector {
 public:
  using Map = std::map<CellIndex, std::int64_t>;

  void add(CellIndex cell, std::int64_t count = 1) {
    if (count < 0) return remove(cell, -count);
    if (count == 0) return;
    counts_[cell] += count;
    total_ += count;
  }

  void remove(CellIndex cell, std::int64_t count = 1) {
    if (count == 0) return;
    auto it = counts_.find(cell);
    if (it == counts_.end() || it->second < count) {
      throw InconsistentState("frequency of cell " + std::to_string(cell.j) + " would go negative");
    }
    it->second -= count;
    total_ -= count;
    if (it->second == 0) counts_.erase(it);
  }

  std::int64_t operator[](CellIndex cell) const {
    auto it = counts_.find(cell);
    return it == counts_.end() ? 0 : it->second;
  }

  std::int64_t total() const noexcept { return total_; }
  std::size_t occupied() const noexcept { return counts_.size(); }
  bool empty() const noexcept { return counts_.empty(); }
  Map::const_iterator begin() const { return counts_.begin(); }
  Map::const_iterator end() const { return counts_.end(); }
  void clear() {
    counts_.clear();
    total_ = 0;
  }

  bool operator==(const FrequencyVector& other) const { return counts_ == other.counts_; }

 private:
  Map counts_;
  std::int64_t total_ = 0;
};

inline FrequencyVector frequencies(std::span<const CellIndex> cells) {
  FrequencyVector f;
  for (auto c : cells) f.add(c);
  return f;
}

inline FrequencyVector frequencies(const RecordTable& table, const KeySchema& schema) {
  const auto cells = table.cells(schema);
  return frequencies(cells);
}

// Record pairs (a, b), 0-based, with at most one pair per row and per column.
class MatchingMatrix {
 public:
  static constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();

  MatchingMatrix() = default;
  MatchingMatrix(std::size_t nA, std::size_t nB) : row_(nA, npos), col_(nB, npos) {}

  std::size_t nA() const noexcept { return row_.size(); }
  std::size_t nB() const noexcept { return col_.size(); }
  std::size_t T() const noexcept { return T_; }
  bool empty() const noexcept { return T_ == 0; }

  bool contains(std::size_t a, std::size_t b) const {
    return a < nA() && b < nB() && row_[a] == b;
  }
  // Partner of row a in file B, or npos.
  std::size_t partner_of_a(std::size_t a) const { return row_.at(a); }
  std::size_t partner_of_b(std::size_t b) const { return col_.at(b); }

  void add(std::size_t a, std::size_t b) {
    check_bounds(a, b);
    if (row_[a] != npos || col_[b] != npos) {
      throw InconsistentState("pair (" + std::to_string(a + 1) + "," + std::to_string(b + 1) +
                              ") breaks the one-to-one constraint");
    }
    row_[a] = b;
    col_[b] = a;
    ++T_;
  }

  void remove(std::size_t a, std::size_t b) {
    check_bounds(a, b);
    if (row_[a] != b) {
      throw InconsistentState("pair (" + std::to_string(a + 1) + "," + std::to_string(b + 1) +
                              ") is not in the matching");
    }
    row_[a] = npos;
    col_[b] = npos;
    --T_;
  }

  // Pairs sorted by (a, b).
  std::vector<std::pair<std::size_t, std::size_t>> pairs() const {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    out.reserve(T_);
    for (std::size_t a = 0; a < row_.size(); ++a) {
      if (row_[a] != npos) out.emplace_back(a, row_[a]);
    }
    return out;
  }

  bool operator==(const MatchingMatrix& other) const {
    return row_ == other.row_ && col_ == other.col_;
  }

 private:
  void check_bounds(std::size_t a, std::size_t b) const {
    if (a >= nA() || b >= nB()) {
      throw DimensionMismatch("pair (" + std::to_string(a + 1) + "," + std::to_string(b + 1) +
                              ") outside a " + std::to_string(nA()) + "x" +
                              std::to_string(nB()) + " matching");
    }
  }

  std::vector<std::size_t> row_;
  std::vector<std::size_t> col_;
  std::size_t T_ = 0;
};

// Per-cell count of matched pairs; every matched pair must share its true value.
inline FrequencyVector t_from(std::span<const CellIndex> muA, std::span<const CellIndex> muB,
                              const MatchingMatrix& C) {
  if (C.nA() != muA.size() || C.nB() != muB.size()) {
    throw DimensionMismatch("matching matrix does not match the sample sizes");
  }
  FrequencyVector t;
  for (auto [a, b] : C.pairs()) {
    if (muA[a] != muB[b]) {
      throw InconsistentState("matched pair (" + std::to_string(a + 1) + "," +
                              std::to_string(b + 1) + ") has different true values");
    }
    t.add(muA[a]);
  }
  return t;
}

}  // namespace bayeslink
