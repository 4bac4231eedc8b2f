#pragma once

#include <filesystem>
#include <string>

#include "drcn/io.hpp"
#include "drcn/model.hpp"
#include "drcn/random.hpp"

namespace drcn {

// Versioned binary container: header (magic "DRCN", format version,
// architecture metadata) followed by the named parameter tensors in
// declaration order, little-endian 64-bit floats. Round trips are bitwise.

inline constexpr std::uint32_t kCheckpointVersion = 1;

inline std::string serialize_checkpoint(const DrcnModel& model) {
  ByteWriter w;
  w.raw("DRCN", 4);
  w.u32_le(kCheckpointVersion);

  const ArchitectureSpec& a = model.arch;
  w.u32_le(static_cast<std::uint32_t>(a.in_channels));
  w.u32_le(static_cast<std::uint32_t>(a.in_height));
  w.u32_le(static_cast<std::uint32_t>(a.in_width));
  w.u32_le(static_cast<std::uint32_t>(a.classes));
  for (std::size_t c : a.conv_channels) w.u32_le(static_cast<std::uint32_t>(c));
  for (std::size_t k : a.conv_kernels) w.u32_le(static_cast<std::uint32_t>(k));
  w.u32_le(static_cast<std::uint32_t>(a.fc_width));
  w.u8(a.with_decoder ? 1 : 0);

  const auto refs = param_refs(model, ParamSet::all);
  w.u32_le(static_cast<std::uint32_t>(refs.size()));
  for (const auto& ref : refs) {
    w.u32_le(static_cast<std::uint32_t>(ref.name.size()));
    w.raw(ref.name.data(), ref.name.size());
    const Tensor& t = *ref.tensor;
    w.u32_le(static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d = 0; d < t.rank(); ++d) {
      w.u32_le(static_cast<std::uint32_t>(t.dim(d)));
    }
    for (double v : t.data()) w.f64_le(v);
  }
  return w.take();
}

inline void save_checkpoint(const DrcnModel& model, const std::filesystem::path& path) {
  write_file_atomic(path, serialize_checkpoint(model));
}

inline DrcnModel deserialize_checkpoint(const std::string& bytes, const std::string& origin) {
  ByteReader r(bytes, origin);
  char magic[4];
  r.raw(magic, 4);
  if (std::string(magic, 4) != "DRCN") {
    throw FormatError("'" + origin + "' is not a checkpoint: bad magic");
  }
  const std::uint32_t version = r.u32_le();
  if (version != kCheckpointVersion) {
    throw FormatError("'" + origin + "' has unsupported checkpoint version " +
                      std::to_string(version));
  }

  ArchitectureSpec a;
  a.in_channels = r.u32_le();
  a.in_height = r.u32_le();
  a.in_width = r.u32_le();
  a.classes = r.u32_le();
  for (auto& c : a.conv_channels) c = r.u32_le();
  for (auto& k : a.conv_kernels) k = r.u32_le();
  a.fc_width = r.u32_le();
  a.with_decoder = r.u8() != 0;

  DrcnModel model = build_model(a, Rng(0));
  auto refs = param_refs(model, ParamSet::all);
  const std::uint32_t n = r.u32_le();
  if (n != refs.size()) {
    throw FormatError("'" + origin + "' names " + std::to_string(n) +
                      " parameter tensors, expected " + std::to_string(refs.size()));
  }
  for (auto& ref : refs) {
    const std::uint32_t len = r.u32_le();
    std::string name(len, '\0');
    r.raw(name.data(), len);
    if (name != ref.name) {
      throw FormatError("'" + origin + "' parameter order mismatch: got '" + name +
                        "', expected '" + ref.name + "'");
    }
    const std::uint32_t rank = r.u32_le();
    if (rank != ref.tensor->rank()) {
      throw FormatError("'" + origin + "': '" + name + "' has rank " +
                        std::to_string(rank) + ", expected " +
                        std::to_string(ref.tensor->rank()));
    }
    for (std::size_t d = 0; d < rank; ++d) {
      const std::uint32_t dim = r.u32_le();
      if (dim != ref.tensor->dim(d)) {
        throw FormatError("'" + origin + "': '" + name + "' axis " + std::to_string(d) +
                          " is " + std::to_string(dim) + ", expected " +
                          std::to_string(ref.tensor->dim(d)));
      }
    }
    for (auto& v : ref.tensor->data()) v = r.f64_le();
  }
  if (r.remaining() != 0) {
    throw FormatError("'" + origin + "' has " + std::to_string(r.remaining()) +
                      " trailing bytes");
  }
  return model;
}

inline DrcnModel load_checkpoint(const std::filesystem::path& path) {
  return deserialize_checkpoint(read_file(path), path.string());
}

}  // namespace drcn
