#include "enspost/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <vector>

namespace enspost::nn {

static_assert(std::endian::native == std::endian::little,
              "checkpoint files assume a little-endian host");

namespace {

constexpr char kMagic[8] = {'E', 'N', 'S', 'P', 'O', 'S', 'T', '1'};

nlohmann::json read_header(std::ifstream& is, const std::filesystem::path& path) {
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, kMagic, 8) != 0)
    throw std::runtime_error("checkpoint: bad magic in " + path.string());
  std::uint32_t len = 0;
  is.read(reinterpret_cast<char*>(&len), 4);
  if (!is) throw std::runtime_error("checkpoint: truncated header in " + path.string());
  std::string text(len, '\0');
  is.read(text.data(), static_cast<std::streamsize>(len));
  if (!is) throw std::runtime_error("checkpoint: truncated header in " + path.string());
  return nlohmann::json::parse(text);
}

}  // namespace

template <typename T>
void save_checkpoint(const std::filesystem::path& path,
                     const ParamStore<T>& store,
                     const nlohmann::json& extra_meta) {
  nlohmann::json meta = extra_meta;
  meta["dtype"] = dtype_name<T>();
  nlohmann::json params = nlohmann::json::array();
  for (const auto& p : store.params()) {
    const Shape4& s = p.tensor.shape();
    params.push_back({{"name", p.name}, {"shape", {s.n, s.c, s.h, s.w}}});
  }
  meta["params"] = std::move(params);
  nlohmann::json buffers = nlohmann::json::array();
  for (const auto& b : store.buffers())
    buffers.push_back({{"name", b.name}, {"size", b.data->size()}});
  meta["buffers"] = std::move(buffers);

  const std::string text = meta.dump();
  std::ofstream os(path, std::ios::binary);
  if (!os)
    throw std::runtime_error("checkpoint: cannot open " + path.string());
  os.write(kMagic, 8);
  const auto len = static_cast<std::uint32_t>(text.size());
  os.write(reinterpret_cast<const char*>(&len), 4);
  os.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& p : store.params()) {
    auto vals = p.tensor.values();
    os.write(reinterpret_cast<const char*>(vals.data()),
             static_cast<std::streamsize>(vals.size() * sizeof(T)));
  }
  for (const auto& b : store.buffers())
    os.write(reinterpret_cast<const char*>(b.data->data()),
             static_cast<std::streamsize>(b.data->size() * sizeof(T)));
  if (!os)
    throw std::runtime_error("checkpoint: write failed for " + path.string());
}

template <typename T>
nlohmann::json load_checkpoint(const std::filesystem::path& path,
                               ParamStore<T>& store) {
  std::ifstream is(path, std::ios::binary);
  if (!is)
    throw std::runtime_error("checkpoint: cannot open " + path.string());
  nlohmann::json meta = read_header(is, path);
  const std::string dtype = meta.at("dtype").get<std::string>();
  if (dtype != dtype_name<T>())
    throw std::runtime_error("checkpoint: dtype " + dtype + " in " +
                             path.string() + ", store wants " +
                             dtype_name<T>());

  const auto& params = meta.at("params");
  if (params.size() != store.params().size())
    throw std::runtime_error(
        "checkpoint: " + path.string() + " has " +
        std::to_string(params.size()) + " parameters, store has " +
        std::to_string(store.params().size()));
  for (std::size_t i = 0; i < store.params().size(); ++i) {
    auto& p = store.params()[i];
    const auto& meta_p = params[i];
    if (meta_p.at("name").get<std::string>() != p.name)
      throw std::runtime_error("checkpoint: parameter " + std::to_string(i) +
                               " is " + meta_p.at("name").get<std::string>() +
                               " in file, " + p.name + " in store");
    const auto sh = meta_p.at("shape").get<std::array<std::int64_t, 4>>();
    const Shape4 want{sh[0], sh[1], sh[2], sh[3]};
    if (!(want == p.tensor.shape()))
      throw std::runtime_error("checkpoint: shape mismatch for " + p.name);
    auto vals = p.tensor.values();
    is.read(reinterpret_cast<char*>(vals.data()),
            static_cast<std::streamsize>(vals.size() * sizeof(T)));
    if (!is)
      throw std::runtime_error("checkpoint: truncated values in " +
                               path.string());
  }

  const auto& buffers = meta.at("buffers");
  if (buffers.size() != store.buffers().size())
    throw std::runtime_error("checkpoint: buffer count mismatch in " +
                             path.string());
  for (std::size_t i = 0; i < store.buffers().size(); ++i) {
    auto& b = store.buffers()[i];
    const auto& meta_b = buffers[i];
    if (meta_b.at("name").get<std::string>() != b.name ||
        meta_b.at("size").get<std::size_t>() != b.data->size())
      throw std::runtime_error("checkpoint: buffer mismatch for " + b.name);
    is.read(reinterpret_cast<char*>(b.data->data()),
            static_cast<std::streamsize>(b.data->size() * sizeof(T)));
    if (!is)
      throw std::runtime_error("checkpoint: truncated buffers in " +
                               path.string());
  }
  is.peek();
  if (!is.eof())
    throw std::runtime_error("checkpoint: trailing bytes in " + path.string());
  return meta;
}

nlohmann::json read_checkpoint_meta(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is)
    throw std::runtime_error("checkpoint: cannot open " + path.string());
  return read_header(is, path);
}

template void save_checkpoint<float>(const std::filesystem::path&,
                                     const ParamStore<float>&,
                                     const nlohmann::json&);
template void save_checkpoint<double>(const std::filesystem::path&,
                                      const ParamStore<double>&,
                                      const nlohmann::json&);
template nlohmann::json load_checkpoint<float>(const std::filesystem::path&,
                                               ParamStore<float>&);
template nlohmann::json load_checkpoint<double>(const std::filesystem::path&,
                                                ParamStore<double>&);

}  // namespace enspost::nn
