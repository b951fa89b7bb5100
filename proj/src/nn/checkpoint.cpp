#include "nn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>

#include "common/error.hpp"

namespace gdce::nn {

using nlohmann::json;

namespace {

constexpr std::string_view kMagic = "GDCECKPT";

std::size_t shape_count(const std::vector<int>& shape) {
  std::size_t n = 1;
  for (int d : shape) {
    if (d <= 0) throw DataError("checkpoint blob has non-positive extent");
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

void put_f32(std::string& out, float v) {
  std::uint32_t bits = std::bit_cast<std::uint32_t>(v);
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

float get_f32(const unsigned char* p) {
  std::uint32_t bits = 0;
  for (int i = 0; i < 4; ++i) bits |= static_cast<std::uint32_t>(p[i]) << (8 * i);
  return std::bit_cast<float>(bits);
}

}  // namespace

void write_checkpoint(const CheckpointFile& ckpt, const std::filesystem::path& path) {
  json header;
  header["format_version"] = kCheckpointVersion;
  header["architecture"] = ckpt.architecture;
  header["seed"] = ckpt.seed;
  header["frozen"] = ckpt.frozen;
  header["meta"] = ckpt.meta;
  header["blobs"] = json::array();
  std::size_t offset = 0;
  for (const auto& b : ckpt.blobs) {
    const auto count = shape_count(b.shape);
    if (count != b.data.size()) throw DataError("blob '" + b.name + "' length does not match its shape");
    header["blobs"].push_back({{"name", b.name}, {"shape", b.shape}, {"count", count}, {"offset", offset}});
    offset += count * 4;
  }
  const std::string head = header.dump();
  std::string out;
  out.reserve(head.size() + offset + 64);
  out += kMagic;
  out += " " + std::to_string(kCheckpointVersion) + "\n";
  out += std::to_string(head.size()) + "\n";
  out += head;
  for (const auto& b : ckpt.blobs) {
    for (float v : b.data) put_f32(out, v);
  }
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  // Write to a temporary and rename so an interrupted save never leaves a
  // truncated checkpoint behind.
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary);
    if (!f) throw DataError("cannot write checkpoint " + path.string());
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw DataError("checkpoint write failed: " + path.string());
  }
  std::filesystem::rename(tmp, path);
}

CheckpointFile read_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open checkpoint " + path.string());
  std::string magic_line, len_line;
  if (!std::getline(f, magic_line) || !std::getline(f, len_line)) {
    throw DataError("truncated checkpoint " + path.string());
  }
  std::istringstream ml(magic_line);
  std::string magic;
  int version = -1;
  ml >> magic >> version;
  if (magic != kMagic) throw DataError("not a checkpoint file: " + path.string());
  if (version != kCheckpointVersion) {
    throw DataError("unsupported checkpoint version " + std::to_string(version) + " in " + path.string());
  }
  std::size_t head_len = 0;
  try {
    head_len = static_cast<std::size_t>(std::stoull(len_line));
  } catch (const std::exception&) {
    throw DataError("malformed checkpoint header length in " + path.string());
  }
  std::string head(head_len, '\0');
  f.read(head.data(), static_cast<std::streamsize>(head_len));
  if (static_cast<std::size_t>(f.gcount()) != head_len) throw DataError("truncated checkpoint " + path.string());
  std::string body((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());

  CheckpointFile ckpt;
  try {
    const json header = json::parse(head);
    if (header.at("format_version").get<int>() != kCheckpointVersion) {
      throw DataError("checkpoint header version mismatch in " + path.string());
    }
    ckpt.architecture = header.at("architecture");
    ckpt.seed = header.at("seed").get<std::uint64_t>();
    ckpt.frozen = header.at("frozen").get<bool>();
    ckpt.meta = header.value("meta", json::object());
    for (const auto& b : header.at("blobs")) {
      Blob blob;
      blob.name = b.at("name").get<std::string>();
      blob.shape = b.at("shape").get<std::vector<int>>();
      const auto count = b.at("count").get<std::size_t>();
      const auto offset = b.at("offset").get<std::size_t>();
      if (count != shape_count(blob.shape)) {
        throw DataError("blob '" + blob.name + "' count does not match shape in " + path.string());
      }
      if (offset + count * 4 > body.size()) {
        throw DataError("checkpoint blob '" + blob.name + "' exceeds file length (truncated?) in " + path.string());
      }
      blob.data.resize(count);
      const auto* p = reinterpret_cast<const unsigned char*>(body.data()) + offset;
      for (std::size_t i = 0; i < count; ++i) blob.data[i] = get_f32(p + 4 * i);
      ckpt.blobs.push_back(std::move(blob));
    }
  } catch (const json::exception& e) {
    throw DataError("malformed checkpoint header in " + path.string() + ": " + e.what());
  }
  return ckpt;
}

void save_checkpoint(const Network<float>& net, const std::filesystem::path& path, const json& meta,
                     const std::vector<Blob>& extra) {
  CheckpointFile ckpt;
  ckpt.architecture = net.descriptor();
  ckpt.seed = net.seed();
  ckpt.frozen = net.frozen();
  ckpt.meta = meta.is_null() ? json::object() : meta;
  for (std::size_t i = 0; i < net.depth(); ++i) {
    for (const auto* p : net.layer(i).params()) {
      ckpt.blobs.push_back(
          {"layers." + std::to_string(i) + "." + p->name, p->shape, std::vector<float>(p->value.begin(), p->value.end())});
    }
  }
  for (const auto& b : extra) ckpt.blobs.push_back(b);
  write_checkpoint(ckpt, path);
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path, std::string_view expected_role) {
  CheckpointFile ckpt = read_checkpoint(path);
  const std::string role = ckpt.architecture.value("role", std::string{});
  if (!expected_role.empty() && role != expected_role) {
    throw DataError("architecture descriptor mismatch: checkpoint " + path.string() + " holds a '" +
                    role + "' network, expected '" + std::string(expected_role) + "'");
  }
  Network<float> net(ckpt.architecture, ckpt.seed);
  net.set_frozen(ckpt.frozen);
  std::size_t next = 0;
  for (std::size_t i = 0; i < net.depth(); ++i) {
    for (auto* p : net.layer(i).params()) {
      const std::string want = "layers." + std::to_string(i) + "." + p->name;
      if (next >= ckpt.blobs.size() || ckpt.blobs[next].name != want) {
        throw DataError("checkpoint " + path.string() + " is missing blob '" + want + "'");
      }
      const Blob& b = ckpt.blobs[next++];
      if (b.shape != p->shape) throw DataError("blob '" + want + "' shape mismatch in " + path.string());
      p->value.assign(b.data.begin(), b.data.end());
    }
  }
  LoadedCheckpoint out{std::move(net), ckpt.meta, {}};
  for (; next < ckpt.blobs.size(); ++next) out.extra.push_back(std::move(ckpt.blobs[next]));
  return out;
}

}  // namespace gdce::nn
