// Copyright 2026 The framecls Authors.
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

#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <type_traits>

namespace framecls {

class FormatError : public std::runtime_error {
 public:
  FormatError(const std::string& what, std::uint64_t offset)
      : std::runtime_error(what + " at byte offset " + std::to_string(offset)), offset_(offset) {}
  std::uint64_t offset() const { return offset_; }

 private:
  std::uint64_t offset_;
};

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

class BinaryWriter {
 public:
  explicit BinaryWriter(std::ostream& out) : out_(out) {}

  template <typename T>
    requires std::is_arithmetic_v<T>
  void put(T value) {
    out_.write(reinterpret_cast<const char*>(&value), sizeof(T));
  }

  template <typename T>
    requires std::is_arithmetic_v<T>
  void put_array(const T* values, std::size_t count) {
    out_.write(reinterpret_cast<const char*>(values), static_cast<std::streamsize>(sizeof(T) * count));
  }

  void put_bytes(const std::string& bytes) { out_.write(bytes.data(), static_cast<std::streamsize>(bytes.size())); }

  bool ok() const { return static_cast<bool>(out_); }

 private:
  std::ostream& out_;
};

// Reads fixed-width little-endian values and reports the offset of any truncation.
class BinaryReader {
 public:
  explicit BinaryReader(std::istream& in) : in_(in) {}

  template <typename T>
    requires std::is_arithmetic_v<T>
  T get(const char* what) {
    T value{};
    read_raw(reinterpret_cast<char*>(&value), sizeof(T), what);
    return value;
  }

  template <typename T>
    requires std::is_arithmetic_v<T>
  void get_array(T* values, std::size_t count, const char* what) {
    read_raw(reinterpret_cast<char*>(values), sizeof(T) * count, what);
  }

  std::string get_bytes(std::size_t count, const char* what) {
    std::string s(count, '\0');
    read_raw(s.data(), count, what);
    return s;
  }

  std::uint64_t offset() const { return offset_; }

  bool at_end() {
    return in_.peek() == std::char_traits<char>::eof();
  }

 private:
  void read_raw(char* dst, std::size_t n, const char* what) {
    if (n == 0) return;
    in_.read(dst, static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n)
      throw FormatError(std::string("truncated stream while reading ") + what, offset_ + in_.gcount());
    offset_ += n;
  }

  std::istream& in_;
  std::uint64_t offset_ = 0;
};

}  // namespace framecls
