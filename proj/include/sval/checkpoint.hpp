#pragma once

// Named-tensor checkpoint files.
//
// Layout (all integers little-endian):
//   magic      8 bytes  "SVALCKPT"
//   version    u32      currently 1
//   count      u64      number of tensors
//   per tensor:
//     name_len u32, name bytes (UTF-8)
//     rank     u32, dims u64 x rank
//     payload  f64 x product(dims)

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "sval/tensor.hpp"

namespace sval {

inline constexpr char kCheckpointMagic[8] = {'S', 'V', 'A', 'L', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedTensor {
  std::string name;
  Shape shape;
  std::vector<double> values;
};

void write_checkpoint(std::ostream& out, const std::vector<NamedTensor>& tensors);
std::vector<NamedTensor> read_checkpoint(std::istream& in);

void save_checkpoint(const std::filesystem::path& path,
                     const std::vector<NamedTensor>& tensors);
std::vector<NamedTensor> load_checkpoint(const std::filesystem::path& path);

/// Index by name; duplicate names raise ValidationError.
std::map<std::string, NamedTensor> index_by_name(std::vector<NamedTensor> tensors);

}  // namespace sval
