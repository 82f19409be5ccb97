// Copyright 2026 the ranklab authors.
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "ranklab/data.hpp"
#include "ranklab/tensor.hpp"

namespace ranklab {

namespace detail {

inline void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

inline std::uint64_t get_u64(const std::string& in, std::size_t& pos) {
  if (pos + 8 > in.size()) throw std::runtime_error("checkpoint: truncated header");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i)
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  pos += 8;
  return v;
}

inline void put_str(std::string& out, const std::string& s) {
  put_u64(out, s.size());
  out += s;
}

inline std::string get_str(const std::string& in, std::size_t& pos) {
  const std::uint64_t n = get_u64(in, pos);
  if (pos + n > in.size()) throw std::runtime_error("checkpoint: truncated string");
  std::string s = in.substr(pos, n);
  pos += n;
  return s;
}

inline void put_f64le(std::string& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  put_u64(out, bits);
}

inline double get_f64le(const std::string& in, std::size_t& pos) {
  const std::uint64_t bits = get_u64(in, pos);
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

}  // namespace detail

/// Checkpoint container shared by the encoder and ranking heads: a header
/// with format version, a key-value config document, and a named-parameter
/// index (shapes plus byte offsets), followed by raw little-endian 64-bit
/// float arrays. load(save(p)) == p bitwise.
class Checkpoint {
 public:
  static constexpr const char* kMagic = "RLCKPT01";

  std::map<std::string, std::string> config;

  void put(const std::string& name, const Tensor& t) {
    if (!tensors_.emplace(name, t).second) {
      throw std::invalid_argument("Checkpoint::put: duplicate tensor name '" + name + "'");
    }
  }

  bool has(const std::string& name) const { return tensors_.count(name) != 0; }

  const Tensor& tensor(const std::string& name) const {
    const auto it = tensors_.find(name);
    if (it == tensors_.end()) {
      throw std::runtime_error("Checkpoint::tensor: missing '" + name + "'");
    }
    return it->second;
  }

  const std::map<std::string, Tensor>& tensors() const { return tensors_; }

  std::string config_value(const std::string& key) const {
    const auto it = config.find(key);
    if (it == config.end()) {
      throw std::runtime_error("checkpoint config: missing key '" + key + "'");
    }
    return it->second;
  }

  std::string serialize() const {
    std::string out(kMagic);
    detail::put_u64(out, config.size());
    for (const auto& [k, v] : config) {
      detail::put_str(out, k);
      detail::put_str(out, v);
    }
    detail::put_u64(out, tensors_.size());
    std::uint64_t offset = 0;
    for (const auto& [name, t] : tensors_) {
      detail::put_str(out, name);
      detail::put_u64(out, t.shape().size());
      for (std::size_t d : t.shape()) detail::put_u64(out, d);
      detail::put_u64(out, offset);
      offset += t.size() * 8;
    }
    detail::put_u64(out, offset);
    for (const auto& [name, t] : tensors_) {
      for (double v : t.data()) detail::put_f64le(out, v);
    }
    return out;
  }

  static Checkpoint deserialize(const std::string& bytes) {
    Checkpoint cp;
    if (bytes.size() < 8 || bytes.compare(0, 8, kMagic) != 0) {
      throw std::runtime_error("checkpoint: bad magic (not a checkpoint file)");
    }
    std::size_t pos = 8;
    const std::uint64_t n_config = detail::get_u64(bytes, pos);
    for (std::uint64_t i = 0; i < n_config; ++i) {
      std::string k = detail::get_str(bytes, pos);
      std::string v = detail::get_str(bytes, pos);
      cp.config.emplace(std::move(k), std::move(v));
    }
    const std::uint64_t n_tensors = detail::get_u64(bytes, pos);
    struct Entry {
      std::string name;
      std::vector<std::size_t> shape;
      std::uint64_t offset;
    };
    std::vector<Entry> entries;
    for (std::uint64_t i = 0; i < n_tensors; ++i) {
      Entry e;
      e.name = detail::get_str(bytes, pos);
      const std::uint64_t ndim = detail::get_u64(bytes, pos);
      for (std::uint64_t d = 0; d < ndim; ++d) e.shape.push_back(detail::get_u64(bytes, pos));
      e.offset = detail::get_u64(bytes, pos);
      entries.push_back(std::move(e));
    }
    const std::uint64_t data_bytes = detail::get_u64(bytes, pos);
    const std::size_t data_start = pos;
    if (data_start + data_bytes > bytes.size()) {
      throw std::runtime_error("checkpoint: truncated data section");
    }
    for (const Entry& e : entries) {
      const std::size_t count = detail::shape_numel(e.shape);
      std::size_t p = data_start + e.offset;
      if (p + count * 8 > data_start + data_bytes) {
        throw std::runtime_error("checkpoint: tensor '" + e.name + "' out of bounds");
      }
      std::vector<double> data(count);
      for (std::size_t i = 0; i < count; ++i) data[i] = detail::get_f64le(bytes, p);
      cp.tensors_.emplace(e.name, Tensor::from(e.shape, std::move(data)));
    }
    return cp;
  }

  void save(const std::string& path) const {
    atomic_write(path, [this](std::ostream& os) { os << serialize(); });
  }

  static Checkpoint load(const std::string& path) { return deserialize(read_file(path)); }

 private:
  std::map<std::string, Tensor> tensors_;
};

}  // namespace ranklab
