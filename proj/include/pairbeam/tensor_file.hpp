/*
Copyright 2026 The pairbeam Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS-IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
*/

// Little-endian tensor container shared by weights, exported training
// samples and mask dumps. Layout (see docs/tensor_format.md):
//
//   "STRN" | u32 version | u32 n_meta | n_meta x (str key, str value)
//   | u32 n_tensors | n_tensors x (str name, u32 rank, rank x u64 dim,
//   prod(dim) x f32 row-major)
//
// where str is a u32 byte length followed by UTF-8 bytes.

#ifndef PAIRBEAM_TENSOR_FILE_HPP
#define PAIRBEAM_TENSOR_FILE_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "pairbeam/audio.hpp"
#include "pairbeam/error.hpp"

namespace pairbeam {

inline constexpr char kTensorMagic[4] = {'S', 'T', 'R', 'N'};
inline constexpr std::uint32_t kTensorFormatVersion = 1;

enum class FormatIssue {
  kBadMagic,
  kVersion,
  kTruncated,
  kMissingTensor,
  kShapeMismatch,
  kMetadata,
  kNonFinite,
};

class FormatError : public Error {
 public:
  FormatError(FormatIssue issue, const std::string& what)
      : Error(ErrorKind::kFormat, what), issue_(issue) {}
  FormatIssue issue() const noexcept { return issue_; }

 private:
  FormatIssue issue_;
};

struct Tensor {
  std::vector<std::uint64_t> dims;
  std::vector<float> data;

  std::size_t numel() const {
    std::size_t n = 1;
    for (auto d : dims) n *= static_cast<std::size_t>(d);
    return n;
  }
};

inline Tensor ToTensor(const Eigen::MatrixXd& m) {
  Tensor t;
  t.dims = {static_cast<std::uint64_t>(m.rows()), static_cast<std::uint64_t>(m.cols())};
  t.data.resize(static_cast<std::size_t>(m.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      t.data[static_cast<std::size_t>(r * m.cols() + c)] = static_cast<float>(m(r, c));
    }
  }
  return t;
}

inline Tensor ToTensor(const Eigen::VectorXd& v) {
  Tensor t;
  t.dims = {static_cast<std::uint64_t>(v.size())};
  t.data.resize(static_cast<std::size_t>(v.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) t.data[static_cast<std::size_t>(i)] = static_cast<float>(v(i));
  return t;
}

// Row-major tensor as a matrix; rank-1 tensors become a column.
inline Eigen::MatrixXd ToMatrix(const Tensor& t) {
  const auto rows = static_cast<Eigen::Index>(t.dims.empty() ? 0 : t.dims[0]);
  const auto cols = static_cast<Eigen::Index>(t.dims.size() > 1 ? t.dims[1] : 1);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = t.data[static_cast<std::size_t>(r * cols + c)];
  }
  return m;
}

struct TensorFile {
  std::uint32_t version = kTensorFormatVersion;
  std::map<std::string, std::string> metadata;
  std::vector<std::pair<std::string, Tensor>> tensors;

  void Put(const std::string& name, Tensor t) {
    for (auto& [n, existing] : tensors) {
      if (n == name) {
        existing = std::move(t);
        return;
      }
    }
    tensors.emplace_back(name, std::move(t));
  }

  const Tensor* Find(const std::string& name) const {
    for (const auto& [n, t] : tensors) {
      if (n == name) return &t;
    }
    return nullptr;
  }

  const Tensor& Get(const std::string& name) const {
    const Tensor* t = Find(name);
    if (t == nullptr) throw FormatError(FormatIssue::kMissingTensor, "missing tensor '" + name + "'");
    return *t;
  }

  std::optional<std::string> Meta(const std::string& key) const {
    auto it = metadata.find(key);
    if (it == metadata.end()) return std::nullopt;
    return it->second;
  }
};

namespace tensor_detail {

inline void PutU32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
inline void PutU64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
inline void PutStr(std::vector<std::uint8_t>& out, const std::string& s) {
  PutU32(out, static_cast<std::uint32_t>(s.size()));
  out.insert(out.end(), s.begin(), s.end());
}

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

  bool Has(std::size_t n) const { return bytes_.size() - pos_ >= n; }

  std::uint32_t U32(const std::string& what) {
    Need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::uint64_t U64(const std::string& what) {
    Need(8, what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 8;
    return v;
  }
  std::string Str(const std::string& what) {
    const std::uint32_t n = U32(what);
    Need(n, what);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  void Floats(std::vector<float>& out, std::size_t n, const std::string& what) {
    if (n > (bytes_.size() - pos_) / 4) {
      throw FormatError(FormatIssue::kTruncated, "truncated payload in " + what);
    }
    out.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      std::uint32_t raw = 0;
      for (int k = 0; k < 4; ++k) raw |= static_cast<std::uint32_t>(bytes_[pos_ + k]) << (8 * k);
      std::memcpy(&out[i], &raw, 4);
      pos_ += 4;
    }
  }
  void Need(std::size_t n, const std::string& what) {
    if (!Has(n)) throw FormatError(FormatIssue::kTruncated, "truncated data in " + what);
  }
  bool AtEnd() const { return pos_ == bytes_.size(); }

 private:
  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace tensor_detail

inline std::vector<std::uint8_t> EncodeTensorFile(const TensorFile& file) {
  using namespace tensor_detail;
  std::vector<std::uint8_t> out(kTensorMagic, kTensorMagic + 4);
  PutU32(out, file.version);
  PutU32(out, static_cast<std::uint32_t>(file.metadata.size()));
  for (const auto& [k, v] : file.metadata) {
    PutStr(out, k);
    PutStr(out, v);
  }
  PutU32(out, static_cast<std::uint32_t>(file.tensors.size()));
  for (const auto& [name, t] : file.tensors) {
    PAIRBEAM_CHECK(t.data.size() == t.numel(), ErrorKind::kShape,
                   "tensor '" + name + "' payload does not match its dims");
    PutStr(out, name);
    PutU32(out, static_cast<std::uint32_t>(t.dims.size()));
    for (auto d : t.dims) PutU64(out, d);
    for (float f : t.data) {
      std::uint32_t raw;
      std::memcpy(&raw, &f, 4);
      PutU32(out, raw);
    }
  }
  return out;
}

inline TensorFile DecodeTensorFile(const std::vector<std::uint8_t>& bytes) {
  using namespace tensor_detail;
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kTensorMagic, 4) != 0) {
    throw FormatError(FormatIssue::kBadMagic, "not a tensor container (bad magic)");
  }
  std::vector<std::uint8_t> body(bytes.begin() + 4, bytes.end());
  Reader in(body);
  TensorFile file;
  file.version = in.U32("header");
  if (file.version != kTensorFormatVersion) {
    throw FormatError(FormatIssue::kVersion,
                      "unsupported container version " + std::to_string(file.version));
  }
  const std::uint32_t n_meta = in.U32("metadata");
  for (std::uint32_t i = 0; i < n_meta; ++i) {
    std::string k = in.Str("metadata");
    file.metadata[k] = in.Str("metadata '" + k + "'");
  }
  const std::uint32_t n_tensors = in.U32("tensor table");
  for (std::uint32_t i = 0; i < n_tensors; ++i) {
    const std::string name = in.Str("tensor name");
    const std::string where = "tensor '" + name + "'";
    const std::uint32_t rank = in.U32(where);
    if (rank > 8) throw FormatError(FormatIssue::kShapeMismatch, where + " has rank " + std::to_string(rank));
    Tensor t;
    for (std::uint32_t r = 0; r < rank; ++r) t.dims.push_back(in.U64(where));
    const std::size_t n = t.numel();
    in.Floats(t.data, n, where);
    file.tensors.emplace_back(name, std::move(t));
  }
  return file;
}

inline TensorFile ReadTensorFile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  PAIRBEAM_CHECK(in.good(), ErrorKind::kIo, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return DecodeTensorFile(bytes);
}

inline void WriteTensorFile(const std::filesystem::path& path, const TensorFile& file) {
  WriteFileAtomic(path, EncodeTensorFile(file));
}

}  // namespace pairbeam

#endif  // PAIRBEAM_TENSOR_FILE_HPP
