#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "enspost/models.hpp"

// Checkpoint container: magic "ENSPOST1", a u32 little-endian byte count, a
// JSON header of that size, then the raw little-endian values of every
// parameter in declaration order followed by every buffer (batch-norm
// running stats). The header lists names and shapes, so files are
// self-describing; loading requires an already-built store whose layout
// matches the file exactly.

namespace enspost::nn {

// extra_meta is merged into the header (it typically carries the model kind,
// its config JSON, the LAS fingerprint and training provenance). The keys
// "dtype", "params" and "buffers" are reserved.
template <typename T>
void save_checkpoint(const std::filesystem::path& path,
                     const ParamStore<T>& store,
                     const nlohmann::json& extra_meta);

// Fills the store's tensors and buffers from the file. Names, shapes and
// dtype must match; returns the full header.
template <typename T>
nlohmann::json load_checkpoint(const std::filesystem::path& path,
                               ParamStore<T>& store);

// Header only, e.g. to recover the config before constructing the model.
nlohmann::json read_checkpoint_meta(const std::filesystem::path& path);

template <typename T>
constexpr const char* dtype_name() {
  static_assert(sizeof(T) == 4 || sizeof(T) == 8);
  return sizeof(T) == 4 ? "f32" : "f64";
}

}  // namespace enspost::nn
