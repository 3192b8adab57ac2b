#include "cgrl/container.hpp"

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include <openssl/evp.h>

#include "cgrl/core.hpp"

namespace cgrl {
namespace {

static_assert(sizeof(double) == 8);

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint64_t get_u64(const std::string& in, std::size_t& pos) {
  if (pos + 8 > in.size()) throw IoError("container: truncated integer");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  pos += 8;
  return v;
}

std::string magic8(std::string_view magic) {
  if (magic.size() > 8) throw std::invalid_argument("container: magic longer than 8 bytes");
  std::string m(magic);
  m.resize(8, '\0');
  return m;
}

}  // namespace

void write_container(const std::filesystem::path& path, std::string_view magic, const Json& header,
                     std::span<const double> payload) {
  std::string out = magic8(magic);
  const std::string text = header.dump();
  put_u64(out, text.size());
  out += text;
  put_u64(out, payload.size());
  out.reserve(out.size() + payload.size() * 8);
  for (double v : payload) put_u64(out, std::bit_cast<std::uint64_t>(v));
  write_text_file(path, out);
}

Container read_container(const std::filesystem::path& path, std::string_view magic) {
  const std::string in = read_text_file(path);
  const std::string expect = magic8(magic);
  if (in.size() < 8 || in.compare(0, 8, expect) != 0)
    throw IoError("container: bad magic in " + path.string());
  std::size_t pos = 8;
  const std::uint64_t header_len = get_u64(in, pos);
  if (pos + header_len > in.size()) throw IoError("container: truncated header in " + path.string());
  Container c;
  try {
    c.header = Json::parse(in.substr(pos, header_len));
  } catch (const nlohmann::json::exception& e) {
    throw IoError("container: malformed header in " + path.string() + ": " + e.what());
  }
  pos += header_len;
  const std::uint64_t count = get_u64(in, pos);
  if (pos + count * 8 != in.size()) throw IoError("container: payload size mismatch in " + path.string());
  c.payload.resize(count);
  for (std::uint64_t i = 0; i < count; ++i) c.payload[i] = std::bit_cast<double>(get_u64(in, pos));
  return c;
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open for writing: " + path.string());
  f.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!f) throw IoError("write failed: " + path.string());
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open for reading: " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::string sha256_hex(std::string_view bytes) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md.data(), &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("sha256 failed");
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[md[i] >> 4]);
    out.push_back(kHex[md[i] & 0xF]);
  }
  return out;
}

std::string sha256_file(const std::filesystem::path& path) { return sha256_hex(read_text_file(path)); }

}  // namespace cgrl
