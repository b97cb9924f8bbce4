/*
 * Copyright 2026 The Spyglass Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "spyglass/checkpoint.hpp"

#include <zlib.h>

#include <cstring>
#include <fstream>
#include <iterator>
#include <map>
#include <string>

namespace spyglass {

namespace {

struct Record {
  Shape shape;
  std::vector<float> data;
};

class Writer {
 public:
  template <typename T>
  void put(T v) {
    const auto* p = reinterpret_cast<const unsigned char*>(&v);
    bytes_.insert(bytes_.end(), p, p + sizeof(T));
  }

  void tensor(const std::string& name, const Shape& shape, const float* data, Index n) {
    put<std::uint32_t>(static_cast<std::uint32_t>(name.size()));
    bytes_.insert(bytes_.end(), name.begin(), name.end());
    put<std::uint32_t>(static_cast<std::uint32_t>(shape.size()));
    for (Index d : shape) put<std::uint64_t>(static_cast<std::uint64_t>(d));
    const auto* p = reinterpret_cast<const unsigned char*>(data);
    bytes_.insert(bytes_.end(), p, p + n * static_cast<Index>(sizeof(float)));
  }

  std::vector<unsigned char>& bytes() { return bytes_; }

 private:
  std::vector<unsigned char> bytes_;
};

class Reader {
 public:
  Reader(const unsigned char* data, std::size_t size, std::string path) : data_(data), size_(size), path_(std::move(path)) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, data_ + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }

  std::string string(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(data_ + pos_), n);
    pos_ += n;
    return s;
  }

  void floats(float* out, std::size_t n) {
    need(n * sizeof(float));
    std::memcpy(out, data_ + pos_, n * sizeof(float));
    pos_ += n * sizeof(float);
  }

  bool done() const { return pos_ == size_; }

 private:
  void need(std::size_t n) const {
    if (size_ - pos_ < n) throw FormatError(path_ + ": checkpoint is truncated");
  }

  const unsigned char* data_;
  std::size_t size_;
  std::size_t pos_ = 0;
  std::string path_;
};

std::uint32_t checksum(const unsigned char* data, std::size_t n) {
  return static_cast<std::uint32_t>(crc32(crc32(0L, Z_NULL, 0), data, static_cast<uInt>(n)));
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, DetectorModel<float>& model, const AdamState<float>* state) {
  Writer w;
  for (char c : kCheckpointMagic) w.put(c);
  for (const NamedTensor<float>& p : model.parameters()) {
    w.tensor(p.name, p.tensor->shape(), p.tensor->raw(), p.tensor->size());
  }
  if (state) {
    const auto trainable = model.trainable_parameters();
    if (state->m.size() == trainable.size()) {
      const float step = static_cast<float>(state->step);
      w.tensor("adam.step", {1}, &step, 1);
      for (std::size_t i = 0; i < trainable.size(); ++i) {
        const Shape& shape = trainable[i].tensor->shape();
        w.tensor("adam.m." + trainable[i].name, shape, state->m[i].data(), state->m[i].size());
        w.tensor("adam.v." + trainable[i].name, shape, state->v[i].data(), state->v[i].size());
      }
    }
  }
  const std::uint32_t crc = checksum(w.bytes().data(), w.bytes().size());
  w.put(crc);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write checkpoint '" + path.string() + "'");
  out.write(reinterpret_cast<const char*>(w.bytes().data()), static_cast<std::streamsize>(w.bytes().size()));
  if (!out) throw FormatError("failed writing checkpoint '" + path.string() + "'");
}

void load_checkpoint(const std::filesystem::path& path, DetectorModel<float>& model, AdamState<float>* state) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open checkpoint '" + path.string() + "'");
  const std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const std::string where = path.string();
  if (bytes.size() < sizeof(kCheckpointMagic) + 4 ||
      std::memcmp(bytes.data(), kCheckpointMagic, sizeof(kCheckpointMagic)) != 0) {
    throw FormatError(where + ": not a checkpoint (bad magic)");
  }
  const std::size_t body = bytes.size() - 4;
  std::uint32_t stored;
  std::memcpy(&stored, bytes.data() + body, 4);
  if (stored != checksum(bytes.data(), body)) throw FormatError(where + ": checkpoint CRC mismatch");

  Reader r(bytes.data() + sizeof(kCheckpointMagic), body - sizeof(kCheckpointMagic), where);
  std::map<std::string, Record> records;
  while (!r.done()) {
    const std::string name = r.string(r.get<std::uint32_t>());
    Record rec;
    const std::uint32_t rank = r.get<std::uint32_t>();
    if (rank == 0 || rank > 8) throw FormatError(where + ": tensor '" + name + "' has invalid rank");
    std::uint64_t count = 1;
    for (std::uint32_t i = 0; i < rank; ++i) {
      const std::uint64_t d = r.get<std::uint64_t>();
      if (d == 0 || d > (std::uint64_t{1} << 32)) throw FormatError(where + ": tensor '" + name + "' has invalid dims");
      rec.shape.push_back(static_cast<Index>(d));
      count *= d;
      if (count > body) throw FormatError(where + ": checkpoint is truncated");
    }
    rec.data.resize(count);
    r.floats(rec.data.data(), count);
    if (!records.emplace(name, std::move(rec)).second) {
      throw FormatError(where + ": duplicate tensor '" + name + "'");
    }
  }

  auto take = [&](const std::string& name, const Shape& expected) -> Record {
    auto it = records.find(name);
    if (it == records.end()) throw FormatError(where + ": missing tensor '" + name + "'");
    if (it->second.shape != expected) {
      throw ShapeError(where + ": tensor '" + name + "' has shape " + shape_string(it->second.shape) +
                       ", model expects " + shape_string(expected));
    }
    Record rec = std::move(it->second);
    records.erase(it);
    return rec;
  };

  // Stage everything first so a failure leaves the model untouched.
  std::vector<std::pair<Tensor<float>*, Record>> staged;
  for (const NamedTensor<float>& p : model.parameters()) staged.emplace_back(p.tensor, take(p.name, p.tensor->shape()));
  AdamState<float> loaded;
  const bool has_adam = records.count("adam.step") > 0;
  if (has_adam) {
    loaded.step = static_cast<std::int64_t>(take("adam.step", {1}).data[0]);
    for (const NamedTensor<float>& p : model.trainable_parameters()) {
      const Record m = take("adam.m." + p.name, p.tensor->shape());
      const Record v = take("adam.v." + p.name, p.tensor->shape());
      loaded.m.push_back(Eigen::Map<const Vector<float>>(m.data.data(), p.tensor->size()));
      loaded.v.push_back(Eigen::Map<const Vector<float>>(v.data.data(), p.tensor->size()));
    }
  }
  if (!records.empty()) throw FormatError(where + ": unknown tensor '" + records.begin()->first + "'");
  for (auto& [tensor, rec] : staged) {
    tensor->data() = Eigen::Map<const Vector<float>>(rec.data.data(), tensor->size());
  }
  if (state) *state = has_adam ? std::move(loaded) : AdamState<float>{};
}

}  // namespace spyglass
