#include "stan/model/positional.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "stan/errors.hpp"
#include "stan/numerics/ops.hpp"

namespace stan::model {

PositionalTable::PositionalTable(std::size_t max_scenes, std::size_t d_model) {
  if (d_model == 0 || d_model % 2 != 0) {
    throw ContractError("positional embedding needs an even d_model, got " + std::to_string(d_model));
  }
  if (max_scenes == 0) throw ContractError("positional embedding needs max_scenes >= 1");
  std::vector<double> v((max_scenes + 1) * d_model);
  for (std::size_t pos = 0; pos <= max_scenes; ++pos) {
    for (std::size_t i = 0; i < d_model / 2; ++i) {
      const double angle =
          static_cast<double>(pos) / std::pow(10000.0, static_cast<double>(2 * i) / static_cast<double>(d_model));
      v[pos * d_model + 2 * i] = std::sin(angle);
      v[pos * d_model + 2 * i + 1] = std::cos(angle);
    }
  }
  table_ = num::Tensor({max_scenes + 1, d_model}, std::move(v));
}

PositionalTable::PositionalTable(num::Tensor table) : table_(table.detach()) {
  if (table_.rank() != 2 || table_.dim(0) < 2) {
    throw DimensionError("positional table must be [max_scenes + 1, d_model], got " + num::shape_string(table_.shape()));
  }
}

num::Tensor PositionalTable::rows(std::size_t count) const {
  if (count > table_.dim(0)) {
    throw SequenceLengthError("sequence of " + std::to_string(count) + " positions exceeds positional table of " +
                              std::to_string(table_.dim(0)));
  }
  return num::slice_rows(table_, 0, count);
}

PositionalTable positional_embedding(std::size_t max_scenes, std::size_t d_model) {
  return PositionalTable(max_scenes, d_model);
}

}  // namespace stan::model
