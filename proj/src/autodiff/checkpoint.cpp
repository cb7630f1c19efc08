#include "vfactor/autodiff/checkpoint.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <fstream>

namespace vfactor::ad {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

namespace {

constexpr std::array<char, 8> kMagic{'V', 'F', 'C', 'K', 'P', 'T', '\0', '\0'};

template <class T>
void put(std::ofstream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

void put_string(std::ofstream& out, const std::string& s) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

class Reader {
 public:
  Reader(std::ifstream& in, const std::filesystem::path& path) : in_(in), path_(path) {}

  template <class T>
  T get() {
    T value{};
    in_.read(reinterpret_cast<char*>(&value), sizeof(T));
    check();
    return value;
  }

  std::string get_string() {
    const auto n = get<std::uint32_t>();
    if (n > (1u << 20)) fail("string length " + std::to_string(n) + " is implausible");
    std::string s(n, '\0');
    in_.read(s.data(), n);
    check();
    return s;
  }

  void read_doubles(std::vector<double>& out) {
    in_.read(reinterpret_cast<char*>(out.data()),
             static_cast<std::streamsize>(out.size() * sizeof(double)));
    check();
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw CheckpointError(path_.string() + ": " + what);
  }

 private:
  void check() const {
    if (!in_) fail("truncated checkpoint");
  }
  std::ifstream& in_;
  const std::filesystem::path& path_;
};

}  // namespace

Checkpoint snapshot(const ParameterStore& params, std::map<std::string, std::string> metadata) {
  Checkpoint ck;
  ck.metadata = std::move(metadata);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const ParamId id{i};
    const auto& v = params[id];
    ck.tensors.push_back({params.name(id),
                          {v.shape().rows, v.shape().cols},
                          std::vector<double>(v.data().begin(), v.data().end())});
  }
  return ck;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError(path.string() + ": cannot open for writing");
  out.write(kMagic.data(), kMagic.size());
  put<std::uint32_t>(out, checkpoint.version);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(checkpoint.metadata.size()));
  for (const auto& [k, v] : checkpoint.metadata) {
    put_string(out, k);
    put_string(out, v);
  }
  put<std::uint32_t>(out, static_cast<std::uint32_t>(checkpoint.tensors.size()));
  for (const auto& t : checkpoint.tensors) {
    put_string(out, t.name);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.dims.size()));
    for (auto d : t.dims) put<std::uint64_t>(out, d);
    out.write(reinterpret_cast<const char*>(t.data.data()),
              static_cast<std::streamsize>(t.data.size() * sizeof(double)));
  }
  if (!out) throw CheckpointError(path.string() + ": write failed");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError(path.string() + ": cannot open for reading");
  Reader reader(in, path);
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kMagic) reader.fail("not a checkpoint file (bad magic)");

  Checkpoint ck;
  ck.version = reader.get<std::uint32_t>();
  if (ck.version != kCheckpointVersion) {
    reader.fail("unsupported checkpoint version " + std::to_string(ck.version));
  }
  const auto n_meta = reader.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < n_meta; ++i) {
    std::string key = reader.get_string();
    ck.metadata[key] = reader.get_string();
  }
  const auto n_tensors = reader.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < n_tensors; ++i) {
    CheckpointTensor t;
    t.name = reader.get_string();
    const auto rank = reader.get<std::uint32_t>();
    if (rank > 8) reader.fail("tensor " + t.name + " has implausible rank");
    std::uint64_t count = 1;
    for (std::uint32_t r = 0; r < rank; ++r) {
      t.dims.push_back(reader.get<std::uint64_t>());
      count *= t.dims.back();
    }
    if (count > (1ull << 28)) reader.fail("tensor " + t.name + " is implausibly large");
    t.data.resize(count);
    reader.read_doubles(t.data);
    ck.tensors.push_back(std::move(t));
  }
  return ck;
}

void restore(ParameterStore& params, const Checkpoint& checkpoint) {
  if (checkpoint.tensors.size() != params.size()) {
    throw CheckpointError("checkpoint holds " + std::to_string(checkpoint.tensors.size()) +
                          " tensors, model expects " + std::to_string(params.size()));
  }
  for (const auto& t : checkpoint.tensors) {
    if (!params.contains(t.name)) throw CheckpointError("unexpected tensor " + t.name);
    DiffValue& p = params[params.id(t.name)];
    if (t.dims.size() != 2 || t.dims[0] != p.rows() || t.dims[1] != p.cols()) {
      throw CheckpointError("shape mismatch for " + t.name + ", model has " +
                            p.shape().to_string());
    }
    std::copy(t.data.begin(), t.data.end(), p.mutable_data().begin());
  }
}

}  // namespace vfactor::ad
