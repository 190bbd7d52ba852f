#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <string>
#include <vector>

namespace mlsnn {

// Dense row-major float32 tensor with value semantics. Rank up to 8.
struct Tensor {
  std::vector<size_t> shape;
  std::vector<float> data;

  Tensor() = default;
  explicit Tensor(std::vector<size_t> s);
  Tensor(std::vector<size_t> s, float fill);
  Tensor(std::vector<size_t> s, std::vector<float> values);

  static Tensor zeros(std::vector<size_t> s) { return Tensor(std::move(s)); }
  static Tensor full(std::vector<size_t> s, float v) { return Tensor(std::move(s), v); }
  static Tensor scalar(float v) { return Tensor({1}, {v}); }

  size_t numel() const { return data.size(); }
  size_t rank() const { return shape.size(); }
  size_t dim(size_t i) const;

  float& operator[](size_t i) { return data[i]; }
  float operator[](size_t i) const { return data[i]; }

  // Multi-index access (rank checked in debug via at4/at2 helpers below).
  float& at(std::initializer_list<size_t> idx);
  float at(std::initializer_list<size_t> idx) const;

  void fill(float v);
  bool same_shape(const Tensor& o) const { return shape == o.shape; }
  bool all_finite() const;
  std::string shape_str() const;
};

size_t shape_numel(const std::vector<size_t>& shape);
std::string shape_to_string(const std::vector<size_t>& shape);

// Binary tensor file format (little-endian):
//   magic "MLTN" | u8 version=1 | u8 dtype=0 (float32) | u8 rank |
//   rank x u32 dims | dims-product x f32 payload.
// Writes are atomic: payload goes to a temp file in the target directory,
// then is renamed over the destination.
void save_tensor(const std::string& path, const Tensor& t);
Tensor load_tensor(const std::string& path);

// Atomic text-file write used by every artifact emitter (CSV/JSON).
void write_file_atomic(const std::string& path, const std::string& content);

}  // namespace mlsnn
