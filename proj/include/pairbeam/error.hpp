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

#ifndef PAIRBEAM_ERROR_HPP
#define PAIRBEAM_ERROR_HPP

#include <stdexcept>
#include <string>

namespace pairbeam {

enum class ErrorKind {
  kLength,
  kFormat,
  kGeometry,
  kConfig,
  kSampling,
  kShape,
  kArgument,
  kNumeric,
  kIo,
  kContract,
  kMode,
};

inline const char* ToString(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kLength: return "length error";
    case ErrorKind::kFormat: return "format error";
    case ErrorKind::kGeometry: return "geometry error";
    case ErrorKind::kConfig: return "config error";
    case ErrorKind::kSampling: return "sampling error";
    case ErrorKind::kShape: return "shape error";
    case ErrorKind::kArgument: return "argument error";
    case ErrorKind::kNumeric: return "numeric error";
    case ErrorKind::kIo: return "I/O error";
    case ErrorKind::kContract: return "contract error";
    case ErrorKind::kMode: return "mode error";
  }
  return "error";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(ToString(kind)) + ": " + what),
        kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

// Process exit codes: 2 configuration/usage, 3 I/O and file format,
// 4 numeric and sampling failures.
inline int ExitCode(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kIo:
    case ErrorKind::kFormat:
      return 3;
    case ErrorKind::kNumeric:
    case ErrorKind::kSampling:
      return 4;
    default:
      return 2;
  }
}

#define PAIRBEAM_CHECK(cond, kind, msg)              \
  do {                                               \
    if (!(cond)) throw ::pairbeam::Error((kind), (msg)); \
  } while (0)

}  // namespace pairbeam

#endif  // PAIRBEAM_ERROR_HPP
