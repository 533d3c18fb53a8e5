#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "lightxml/optim.hpp"

namespace lightxml {

// Binary container layout (all integers and floats little-endian):
//   "LXML"  u32 version  u32 record_count
//   per record: u32 name_len, name (UTF-8), u32 rank, u32 dims[rank], f32 values[prod(dims)]
inline constexpr char kCheckpointMagic[4] = {'L', 'X', 'M', 'L'};
inline constexpr std::uint32_t kCheckpointVersion = 1;
inline constexpr const char* kSwaSuffix = ".swa";

struct NamedArray {
  std::string name;
  Shape shape;
  std::vector<float> values;
};

void write_checkpoint(const std::filesystem::path& path, const std::vector<NamedArray>& records);
std::vector<NamedArray> read_checkpoint(const std::filesystem::path& path);

const NamedArray* find_record(const std::vector<NamedArray>& records, const std::string& name);

/// Parameter values as records, names suffixed with `suffix`.
template <typename T>
std::vector<NamedArray> export_parameters(const ParameterSet<T>& params, const std::string& suffix = "");

/// Loads every parameter from the record named `param.name + suffix`. Throws
/// ConfigError when a record is missing or has the wrong shape.
template <typename T>
void import_parameters(ParameterSet<T>& params, const std::vector<NamedArray>& records,
                       const std::string& suffix = "");

}  // namespace lightxml
