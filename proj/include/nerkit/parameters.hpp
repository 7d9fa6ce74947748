// Copyright 2026 The nerkit Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef NERKIT_PARAMETERS_HPP_
#define NERKIT_PARAMETERS_HPP_

#include <zlib.h>

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "nerkit/errors.hpp"
#include "nerkit/tensor.hpp"

namespace nerkit {

struct Parameter {
  Tensor value;
  Tensor grad;
};

/// Named trainable tensors with matching gradient accumulators.
///
/// Names iterate in lexicographic order, which fixes the on-disk record
/// order and makes serialization byte-reproducible.
class ParameterSet {
 public:
  Parameter& add(const std::string& name, Shape shape) {
    auto [it, inserted] = params_.try_emplace(name);
    if (!inserted) throw ConfigError("duplicate parameter '" + name + "'");
    it->second.value = Tensor(shape);
    it->second.grad = Tensor(std::move(shape));
    return it->second;
  }

  Parameter& add(const std::string& name, Tensor value) {
    Parameter& p = add(name, value.shape());
    p.value = std::move(value);
    return p;
  }

  bool contains(const std::string& name) const {
    return params_.count(name) != 0;
  }

  Parameter& at(const std::string& name) {
    auto it = params_.find(name);
    if (it == params_.end()) throw ConfigError("no parameter '" + name + "'");
    return it->second;
  }
  const Parameter& at(const std::string& name) const {
    auto it = params_.find(name);
    if (it == params_.end()) throw ConfigError("no parameter '" + name + "'");
    return it->second;
  }

  Tensor& value(const std::string& name) { return at(name).value; }
  const Tensor& value(const std::string& name) const { return at(name).value; }
  Tensor& grad(const std::string& name) { return at(name).grad; }
  const Tensor& grad(const std::string& name) const { return at(name).grad; }

  std::size_t size() const { return params_.size(); }
  bool empty() const { return params_.empty(); }

  std::vector<std::string> names() const {
    std::vector<std::string> out;
    out.reserve(params_.size());
    for (const auto& [name, p] : params_) out.push_back(name);
    return out;
  }

  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& [name, p] : params_) n += p.value.size();
    return n;
  }

  void zero_grad() {
    for (auto& [name, p] : params_) p.grad.fill(0.0);
  }

  void scale_grad(double factor) {
    for (auto& [name, p] : params_) {
      for (double& g : p.grad.data()) g *= factor;
    }
  }

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  // Values only; gradient accumulators are not compared.
  bool same_values(const ParameterSet& other) const {
    if (params_.size() != other.params_.size()) return false;
    auto a = params_.begin();
    auto b = other.params_.begin();
    for (; a != params_.end(); ++a, ++b) {
      if (a->first != b->first || !(a->second.value == b->second.value))
        return false;
    }
    return true;
  }

 private:
  std::map<std::string, Parameter> params_;
};

/// Applies value -= lr * grad to every parameter, then zeroes gradients.
/// Throws TrainingDiverged if any gradient entry is non-finite, before
/// touching any value.
inline void sgd_update(ParameterSet& params, double lr) {
  for (const auto& [name, p] : params) {
    if (!p.grad.all_finite()) {
      throw TrainingDiverged("non-finite gradient in parameter '" + name + "'");
    }
  }
  for (auto& [name, p] : params) {
    auto v = p.value.data();
    auto g = p.grad.data();
    for (std::size_t i = 0; i < v.size(); ++i) v[i] -= lr * g[i];
    p.grad.fill(0.0);
  }
}

// ---------------------------------------------------------------------------
// Serialization: "NSTP1\n", then per parameter: u32 name length, name bytes,
// u32 rank, u32 dims, f64 values (all little-endian), then the CRC32 of the
// record bytes between the magic and the checksum.

inline constexpr std::string_view kParameterMagic = "NSTP1\n";

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

inline void put_f64(std::string& out, double d) {
  const auto v = std::bit_cast<std::uint64_t>(d);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

class ByteReader {
 public:
  ByteReader(std::string_view bytes, std::size_t begin, std::size_t end)
      : bytes_(bytes), pos_(begin), end_(end) {}

  std::size_t pos() const { return pos_; }
  bool done() const { return pos_ == end_; }

  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return v;
  }

  double f64(const char* what) {
    need(8, what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += 8;
    return std::bit_cast<double>(v);
  }

  std::string str(std::size_t n, const char* what) {
    need(n, what);
    std::string s(bytes_.substr(pos_, n));
    pos_ += n;
    return s;
  }

 private:
  void need(std::size_t n, const char* what) {
    if (end_ - pos_ < n) {
      throw FormatError(std::string("truncated ") + what, pos_);
    }
  }

  std::string_view bytes_;
  std::size_t pos_;
  std::size_t end_;
};

inline std::uint32_t crc32_of(std::string_view bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  crc = crc32(crc, reinterpret_cast<const Bytef*>(bytes.data()),
              static_cast<uInt>(bytes.size()));
  return static_cast<std::uint32_t>(crc);
}

}  // namespace detail

inline std::string serialize_parameters(const ParameterSet& params) {
  std::string out(kParameterMagic);
  for (const auto& [name, p] : params) {
    if (!p.value.all_finite()) {
      throw DataError("refusing to save non-finite parameter '" + name + "'");
    }
    detail::put_u32(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    detail::put_u32(out, static_cast<std::uint32_t>(p.value.rank()));
    for (std::size_t d : p.value.shape()) {
      detail::put_u32(out, static_cast<std::uint32_t>(d));
    }
    for (double v : p.value.data()) detail::put_f64(out, v);
  }
  const std::uint32_t crc = detail::crc32_of(
      std::string_view(out).substr(kParameterMagic.size()));
  detail::put_u32(out, crc);
  return out;
}

inline ParameterSet deserialize_parameters(std::string_view bytes) {
  const std::size_t magic = kParameterMagic.size();
  if (bytes.size() < magic || bytes.substr(0, magic) != kParameterMagic) {
    throw FormatError("bad magic, expected NSTP1", 0);
  }
  if (bytes.size() < magic + 4) throw FormatError("missing checksum", bytes.size());
  const std::size_t crc_pos = bytes.size() - 4;
  detail::ByteReader tail(bytes, crc_pos, bytes.size());
  const std::uint32_t stored = tail.u32("checksum");
  const std::uint32_t actual =
      detail::crc32_of(bytes.substr(magic, crc_pos - magic));
  if (stored != actual) throw FormatError("checksum mismatch", crc_pos);

  ParameterSet params;
  detail::ByteReader in(bytes, magic, crc_pos);
  while (!in.done()) {
    const std::size_t record_start = in.pos();
    const std::uint32_t name_len = in.u32("name length");
    std::string name = in.str(name_len, "name");
    const std::uint32_t rank = in.u32("rank");
    Shape shape;
    for (std::uint32_t i = 0; i < rank; ++i) shape.push_back(in.u32("dimension"));
    const std::size_t count = shape_size(shape);
    if (count > (crc_pos - in.pos()) / 8) throw FormatError("truncated values", in.pos());
    std::vector<double> values(count);
    for (double& v : values) v = in.f64("values");
    if (params.contains(name)) {
      throw FormatError("duplicate parameter '" + name + "'", record_start);
    }
    params.add(name, Tensor(std::move(shape), std::move(values)));
  }
  return params;
}

inline void write_file_bytes(const std::filesystem::path& path,
                             std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("failed writing '" + path.string() + "'");
}

inline std::string read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  return std::string(std::istreambuf_iterator<char>(in), {});
}

inline void save_parameters(const ParameterSet& params,
                            const std::filesystem::path& path) {
  write_file_bytes(path, serialize_parameters(params));
}

inline ParameterSet load_parameters(const std::filesystem::path& path) {
  return deserialize_parameters(read_file_bytes(path));
}

}  // namespace nerkit

#endif  // NERKIT_PARAMETERS_HPP_
