#include "alzhinet/errors.hpp"
#include "alzhinet/model.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>

namespace alzhinet {

static_assert(std::endian::native == std::endian::little,
              "AZWT serialization assumes a little-endian host");

namespace {

constexpr char kMagic[4] = {'A', 'Z', 'W', 'T'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void write_pod(std::ofstream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& in, const std::string& what) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw CheckpointError("truncated checkpoint while reading " + what);
  return value;
}

}  // namespace

void save_weights(const std::vector<NamedTensor>& state, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("cannot write checkpoint " + path.string());
  out.write(kMagic, 4);
  write_pod(out, kVersion);
  write_pod(out, static_cast<std::uint32_t>(state.size()));
  for (const auto& [name, tensor] : state) {
    if (name.size() > 0xffff) throw CheckpointError("tensor name too long: " + name);
    write_pod(out, static_cast<std::uint16_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_pod(out, static_cast<std::uint8_t>(tensor.rank()));
    for (Index d : tensor.shape()) write_pod(out, static_cast<std::uint32_t>(d));
    out.write(reinterpret_cast<const char*>(tensor.data()),
              static_cast<std::streamsize>(tensor.size() * static_cast<Index>(sizeof(double))));
  }
  if (!out) throw CheckpointError("short write for checkpoint " + path.string());
}

namespace {

struct Record {
  std::vector<Index> shape;
  std::vector<double> values;
};

std::map<std::string, Record> read_records(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0)
    throw CheckpointError("not an AZWT checkpoint: " + path.string());
  const auto version = read_pod<std::uint32_t>(in, "version");
  if (version != kVersion)
    throw CheckpointError("unsupported AZWT version " + std::to_string(version));
  const auto count = read_pod<std::uint32_t>(in, "tensor count");

  std::map<std::string, Record> records;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name_len = read_pod<std::uint16_t>(in, "name length");
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    if (!in) throw CheckpointError("truncated checkpoint while reading a name");
    const auto rank = read_pod<std::uint8_t>(in, "rank of " + name);
    Record rec;
    Index size = 1;
    for (int d = 0; d < rank; ++d) {
      const auto ext = read_pod<std::uint32_t>(in, "dims of " + name);
      rec.shape.push_back(static_cast<Index>(ext));
      size *= static_cast<Index>(ext);
    }
    rec.values.resize(static_cast<std::size_t>(size));
    in.read(reinterpret_cast<char*>(rec.values.data()),
            static_cast<std::streamsize>(size * static_cast<Index>(sizeof(double))));
    if (!in) throw CheckpointError("truncated checkpoint while reading values of " + name);
    if (!records.emplace(std::move(name), std::move(rec)).second)
      throw CheckpointError("duplicate tensor name in checkpoint");
  }
  return records;
}

}  // namespace

void load_weights(std::vector<NamedTensor> state, const std::filesystem::path& path) {
  auto records = read_records(path);
  for (auto& [name, tensor] : state) {
    auto it = records.find(name);
    if (it == records.end())
      throw CheckpointError("checkpoint is missing tensor '" + name + "'");
    if (it->second.shape != tensor.shape())
      throw CheckpointError("shape mismatch for tensor '" + name + "': checkpoint has " +
                            shape_str(it->second.shape) + ", model expects " +
                            shape_str(tensor.shape()));
  }
  if (records.size() != state.size()) {
    for (const auto& [name, rec] : records) {
      const bool known = std::any_of(state.begin(), state.end(),
                                     [&](const NamedTensor& nt) { return nt.name == name; });
      if (!known) throw CheckpointError("checkpoint has unexpected tensor '" + name + "'");
    }
  }
  for (auto& [name, tensor] : state) {
    const auto& rec = records.at(name);
    for (Index i = 0; i < tensor.size(); ++i)
      tensor.array()[i] = rec.values[static_cast<std::size_t>(i)];
  }
}

std::vector<std::string> checkpoint_names(const std::filesystem::path& path) {
  auto records = read_records(path);
  std::vector<std::string> names;
  names.reserve(records.size());
  for (const auto& [name, rec] : records) names.push_back(name);
  return names;
}

}  // namespace alzhinet
