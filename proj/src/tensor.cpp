#include "mlsnn/tensor.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "mlsnn/errors.hpp"

namespace mlsnn {

size_t shape_numel(const std::vector<size_t>& shape) {
  size_t n = 1;
  for (size_t d : shape) n *= d;
  return n;
}

std::string shape_to_string(const std::vector<size_t>& shape) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ",";
    os << shape[i];
  }
  os << "]";
  return os.str();
}

Tensor::Tensor(std::vector<size_t> s) : shape(std::move(s)), data(shape_numel(shape), 0.0f) {
  check_internal(shape.size() <= 8, "tensor rank exceeds 8");
}

Tensor::Tensor(std::vector<size_t> s, float fill_value)
    : shape(std::move(s)), data(shape_numel(shape), fill_value) {
  check_internal(shape.size() <= 8, "tensor rank exceeds 8");
}

Tensor::Tensor(std::vector<size_t> s, std::vector<float> values)
    : shape(std::move(s)), data(std::move(values)) {
  check_internal(shape.size() <= 8, "tensor rank exceeds 8");
  check_internal(data.size() == shape_numel(shape), "tensor payload does not match shape");
}

size_t Tensor::dim(size_t i) const {
  check_internal(i < shape.size(), "tensor dim index out of range");
  return shape[i];
}

namespace {
size_t flat_index(const std::vector<size_t>& shape, std::initializer_list<size_t> idx) {
  check_internal(idx.size() == shape.size(), "tensor index rank mismatch");
  size_t flat = 0;
  size_t i = 0;
  for (size_t v : idx) {
    check_internal(v < shape[i], "tensor index out of range");
    flat = flat * shape[i] + v;
    ++i;
  }
  return flat;
}
}  // namespace

float& Tensor::at(std::initializer_list<size_t> idx) { return data[flat_index(shape, idx)]; }

float Tensor::at(std::initializer_list<size_t> idx) const { return data[flat_index(shape, idx)]; }

void Tensor::fill(float v) {
  for (float& x : data) x = v;
}

bool Tensor::all_finite() const {
  for (float x : data) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

std::string Tensor::shape_str() const { return shape_to_string(shape); }

namespace {

constexpr char kMagic[4] = {'M', 'L', 'T', 'N'};

void put_u32_le(std::string& out, uint32_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
  out.push_back(static_cast<char>((v >> 16) & 0xff));
  out.push_back(static_cast<char>((v >> 24) & 0xff));
}

uint32_t get_u32_le(const unsigned char* p) {
  return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
         (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}

}  // namespace

void write_file_atomic(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  fs::path target(path);
  fs::path dir = target.parent_path();
  if (!dir.empty()) fs::create_directories(dir);
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open for writing: " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw DataError("write failed: " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp);
    throw DataError("atomic rename failed for " + path + ": " + ec.message());
  }
}

void save_tensor(const std::string& path, const Tensor& t) {
  check_data(t.rank() <= 8, "tensor rank exceeds format limit");
  std::string buf;
  buf.reserve(7 + 4 * t.rank() + 4 * t.numel());
  buf.append(kMagic, 4);
  buf.push_back(1);  // version
  buf.push_back(0);  // dtype float32
  buf.push_back(static_cast<char>(t.rank()));
  for (size_t d : t.shape) {
    check_data(d <= 0xffffffffu, "tensor dim exceeds u32");
    put_u32_le(buf, static_cast<uint32_t>(d));
  }
  static_assert(sizeof(float) == 4);
  // Little-endian payload; this build targets little-endian hosts.
  const char* raw = reinterpret_cast<const char*>(t.data.data());
  buf.append(raw, 4 * t.numel());
  write_file_atomic(path, buf);
}

Tensor load_tensor(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open tensor file: " + path);
  std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const unsigned char* p = reinterpret_cast<const unsigned char*>(buf.data());
  if (buf.size() < 7 || std::memcmp(p, kMagic, 4) != 0)
    throw DataError("not a tensor file (bad magic): " + path);
  if (p[4] != 1) throw DataError("unsupported tensor file version in " + path);
  if (p[5] != 0) throw DataError("unsupported tensor dtype in " + path);
  size_t rank = p[6];
  if (rank > 8) throw DataError("tensor rank exceeds 8 in " + path);
  if (buf.size() < 7 + 4 * rank) throw DataError("truncated tensor header in " + path);
  std::vector<size_t> shape(rank);
  for (size_t i = 0; i < rank; ++i) shape[i] = get_u32_le(p + 7 + 4 * i);
  size_t n = shape_numel(shape);
  size_t expect = 7 + 4 * rank + 4 * n;
  if (buf.size() != expect)
    throw DataError("tensor payload size mismatch in " + path + " (expected " +
                    std::to_string(expect) + " bytes, got " + std::to_string(buf.size()) + ")");
  Tensor t(shape);
  std::memcpy(t.data.data(), p + 7 + 4 * rank, 4 * n);
  return t;
}

}  // namespace mlsnn
