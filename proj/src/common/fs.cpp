#include "common/fs.hpp"

#include <fstream>
#include <sstream>

#include "common/error.hpp"
#include "common/hash.hpp"

namespace gdce {

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
  if (!out) throw DataError("write failed: " + path.string());
}

std::filesystem::path resolve_path(const std::filesystem::path& base,
                                   const std::filesystem::path& p) {
  if (p.is_absolute() || base.empty()) return p;
  return base / p;
}

std::string hash_file(const std::string& path) {
  Fnv1a h;
  h.update(read_text_file(path));
  return h.hex();
}

}  // namespace gdce
