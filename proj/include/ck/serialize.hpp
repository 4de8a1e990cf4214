#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "ck/tensor.hpp"

namespace ck {

// Flat binary tensor container: magic "CKT1", then rank and dims as 64-bit
// little-endian integers, then row-major IEEE-754 doubles. Checkpoints store
// several containers back to back in one file.

void write_tensor(std::ostream& os, const Tensor& t);
TensorPtr read_tensor(std::istream& is);

void save_tensors(const std::string& path, const std::vector<TensorPtr>& tensors);
std::vector<TensorPtr> load_tensors(const std::string& path);

}  // namespace ck
