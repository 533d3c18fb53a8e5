#include "lightxml/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "lightxml/errors.hpp"

namespace lightxml {

namespace {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& is, const std::filesystem::path& path) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) throw ParseError("truncated checkpoint " + path.string());
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace

void write_checkpoint(const std::filesystem::path& path, const std::vector<NamedArray>& records) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw ConfigError("cannot open checkpoint for writing: " + path.string());
  os.write(kCheckpointMagic, 4);
  put_u32(os, kCheckpointVersion);
  put_u32(os, static_cast<std::uint32_t>(records.size()));
  for (const auto& r : records) {
    if (shape_numel(r.shape) != r.values.size()) throw ContractError("record '" + r.name + "' shape/value mismatch");
    put_u32(os, static_cast<std::uint32_t>(r.name.size()));
    os.write(r.name.data(), static_cast<std::streamsize>(r.name.size()));
    put_u32(os, static_cast<std::uint32_t>(r.shape.size()));
    for (auto d : r.shape) put_u32(os, static_cast<std::uint32_t>(d));
    for (float v : r.values) put_u32(os, std::bit_cast<std::uint32_t>(v));
  }
  if (!os) throw ConfigError("failed writing checkpoint " + path.string());
}

std::vector<NamedArray> read_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("cannot open checkpoint: " + path.string());
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, kCheckpointMagic, 4) != 0) {
    throw ParseError("not a checkpoint (bad magic): " + path.string());
  }
  const auto version = get_u32(is, path);
  if (version != kCheckpointVersion) {
    throw ParseError("unsupported checkpoint version " + std::to_string(version) + " in " + path.string());
  }
  const auto count = get_u32(is, path);
  std::vector<NamedArray> records;
  records.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedArray r;
    r.name.resize(get_u32(is, path));
    if (!is.read(r.name.data(), static_cast<std::streamsize>(r.name.size()))) {
      throw ParseError("truncated checkpoint " + path.string());
    }
    const auto rank = get_u32(is, path);
    for (std::uint32_t d = 0; d < rank; ++d) r.shape.push_back(get_u32(is, path));
    r.values.resize(shape_numel(r.shape));
    for (auto& v : r.values) v = std::bit_cast<float>(get_u32(is, path));
    records.push_back(std::move(r));
  }
  return records;
}

const NamedArray* find_record(const std::vector<NamedArray>& records, const std::string& name) {
  for (const auto& r : records)
    if (r.name == name) return &r;
  return nullptr;
}

template <typename T>
std::vector<NamedArray> export_parameters(const ParameterSet<T>& params, const std::string& suffix) {
  std::vector<NamedArray> out;
  out.reserve(params.size());
  for (const auto& p : params.items()) {
    auto d = p.tensor.data();
    out.push_back({p.name + suffix, p.tensor.shape(), std::vector<float>(d.begin(), d.end())});
  }
  return out;
}

template <typename T>
void import_parameters(ParameterSet<T>& params, const std::vector<NamedArray>& records, const std::string& suffix) {
  for (auto& p : params.items()) {
    const auto* r = find_record(records, p.name + suffix);
    if (!r) throw ConfigError("checkpoint has no record '" + p.name + suffix + "'");
    if (r->shape != p.tensor.shape()) {
      throw ConfigError("checkpoint record '" + r->name + "' has shape " + shape_str(r->shape) + ", model expects " +
                        shape_str(p.tensor.shape()));
    }
    auto d = p.tensor.data();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = static_cast<T>(r->values[i]);
  }
}

template std::vector<NamedArray> export_parameters(const ParameterSet<float>&, const std::string&);
template std::vector<NamedArray> export_parameters(const ParameterSet<double>&, const std::string&);
template void import_parameters(ParameterSet<float>&, const std::vector<NamedArray>&, const std::string&);
template void import_parameters(ParameterSet<double>&, const std::vector<NamedArray>&, const std::string&);

}  // namespace lightxml
