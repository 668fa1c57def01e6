#include "spectradiff/nn/checkpoint.hpp"

#include "spectradiff/errors.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

namespace spectradiff::nn {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes little endian");

const Tensor& Checkpoint::tensor(const std::string& name) const {
  auto it = tensors.find(name);
  if (it == tensors.end()) throw FormatError("checkpoint: missing tensor " + name);
  return it->second;
}

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  nlohmann::json header;
  header["version"] = 1;
  header["kind"] = ckpt.kind;
  header["meta"] = ckpt.meta;
  header["tensors"] = nlohmann::json::array();
  std::uint64_t offset = 0;
  for (const auto& [name, t] : ckpt.tensors) {
    header["tensors"].push_back({{"name", name}, {"shape", t.shape()}, {"offset", offset}});
    offset += static_cast<std::uint64_t>(t.size()) * sizeof(Real);
  }
  const std::string text = header.dump();
  const std::uint64_t len = text.size();

  std::string out(kCheckpointMagic, 6);
  out.append(reinterpret_cast<const char*>(&len), sizeof(len));
  out += text;
  for (const auto& [_, t] : ckpt.tensors) {
    out.append(reinterpret_cast<const char*>(t.data()), static_cast<std::size_t>(t.size()) * sizeof(Real));
  }
  return out;
}

Checkpoint deserialize_checkpoint(const std::string& bytes) {
  if (bytes.size() < 14 || bytes.compare(0, 6, kCheckpointMagic) != 0) {
    throw FormatError("checkpoint: bad magic (expected SPDF1)");
  }
  std::uint64_t len = 0;
  std::memcpy(&len, bytes.data() + 6, sizeof(len));
  if (14 + len > bytes.size()) throw FormatError("checkpoint: truncated header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(14, len));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint: header is not valid JSON: ") + e.what());
  }
  if (header.value("version", 0) != 1) throw FormatError("checkpoint: unsupported version");
  Checkpoint ckpt;
  ckpt.kind = header.at("kind").get<std::string>();
  ckpt.meta = header.at("meta");
  const std::size_t payload = 14 + len;
  for (const auto& entry : header.at("tensors")) {
    auto shape = entry.at("shape").get<Tensor::Shape>();
    const auto offset = entry.at("offset").get<std::uint64_t>();
    Tensor t(shape);
    const std::size_t nbytes = static_cast<std::size_t>(t.size()) * sizeof(Real);
    if (payload + offset + nbytes > bytes.size()) {
      throw FormatError("checkpoint: truncated tensor " + entry.at("name").get<std::string>());
    }
    std::memcpy(t.data(), bytes.data() + payload + offset, nbytes);
    ckpt.tensors.emplace(entry.at("name").get<std::string>(), std::move(t));
  }
  return ckpt;
}

void write_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << serialize_checkpoint(ckpt);
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return deserialize_checkpoint(buf.str());
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

Checkpoint read_checkpoint(const std::filesystem::path& path, const std::string& expected_kind) {
  Checkpoint ckpt = read_checkpoint(path);
  if (ckpt.kind != expected_kind) {
    throw FormatError(path.string() + ": checkpoint kind '" + ckpt.kind + "', expected '" +
                      expected_kind + "'");
  }
  return ckpt;
}

void save_params(Checkpoint& ckpt, const ParamStore& params, const std::string& prefix) {
  for (const auto& [path, p] : params) ckpt.tensors[join_path(prefix, path)] = p->value;
}

void load_params(const Checkpoint& ckpt, const ParamStore& params, const std::string& prefix) {
  for (const auto& [path, p] : params) {
    const Tensor& t = ckpt.tensor(join_path(prefix, path));
    if (!t.same_shape(p->value)) {
      throw FormatError("checkpoint: tensor " + path + " has shape " + shape_string(t.shape()) +
                        ", model expects " + shape_string(p->value.shape()));
    }
    p->value = t;
  }
}

}  // namespace spectradiff::nn
