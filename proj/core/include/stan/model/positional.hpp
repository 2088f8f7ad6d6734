#pragma once

#include <cstddef>

#include "stan/numerics/tensor.hpp"

namespace stan::model {

// Sinusoidal table of max_scenes + 1 rows; row 0 is the CLS position and row
// i the i-th scene. Entry (pos, 2i) = sin(pos / 10000^(2i/d_model)) and
// (pos, 2i + 1) = cos(pos / 10000^(2i/d_model)).
class PositionalTable {
 public:
  PositionalTable(std::size_t max_scenes, std::size_t d_model);
  // Replaces the sinusoid with explicit values, shape [max_scenes + 1, d_model].
  explicit PositionalTable(num::Tensor table);

  std::size_t max_scenes() const { return table_.dim(0) - 1; }
  std::size_t d_model() const { return table_.dim(1); }
  double entry(std::size_t pos, std::size_t dim) const { return table_.at(pos, dim); }

  // Rows 0..count-1 as a constant matrix.
  num::Tensor rows(std::size_t count) const;
  const num::Tensor& table() const { return table_; }

 private:
  num::Tensor table_;
};

PositionalTable positional_embedding(std::size_t max_scenes, std::size_t d_model);

}  // namespace stan::model
