#include "asr/io.h"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>

namespace asr {

static_assert(std::endian::native == std::endian::little,
              "file formats are written with the host byte order");

namespace {

constexpr std::array<char, 4> kMagic = {'A', 'S', 'R', 'M'};
constexpr uint32_t kVersion = 1;

template <typename T>
void put(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T get(std::istream& in, const std::string& path) {
  T value{};
  if (!in.read(reinterpret_cast<char*>(&value), sizeof(T))) {
    throw IoError("truncated matrix file: " + path);
  }
  return value;
}

}  // namespace

void write_matrix_file(const std::string& path, const MatrixFile& file) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out.write(kMagic.data(), kMagic.size());
  put<uint32_t>(out, kVersion);
  put<uint32_t>(out, static_cast<uint32_t>(file.values.rows()));
  put<uint32_t>(out, static_cast<uint32_t>(file.values.cols()));
  put<float>(out, file.stride_ms);
  out.write(reinterpret_cast<const char*>(file.values.data()),
            static_cast<std::streamsize>(file.values.size() * sizeof(float)));
  if (!out) throw IoError("write failed: " + path);
}

MatrixFile read_matrix_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::array<char, 4> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kMagic) {
    throw IoError("not a matrix file (bad magic): " + path);
  }
  const auto version = get<uint32_t>(in, path);
  if (version != kVersion) {
    throw IoError("unsupported matrix file version " + std::to_string(version) + ": " + path);
  }
  const auto rows = get<uint32_t>(in, path);
  const auto cols = get<uint32_t>(in, path);
  MatrixFile file;
  file.stride_ms = get<float>(in, path);
  file.values.resize(rows, cols);
  const auto bytes = static_cast<std::streamsize>(file.values.size() * sizeof(float));
  if (!in.read(reinterpret_cast<char*>(file.values.data()), bytes)) {
    throw IoError("truncated matrix file: " + path);
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw IoError("trailing bytes after matrix data: " + path);
  }
  return file;
}

}  // namespace asr
