// Copyright 2026 The Locodiff Authors
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

#ifndef LOCODIFF_SRC_BINARY_IO_HPP_
#define LOCODIFF_SRC_BINARY_IO_HPP_

#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace locodiff::detail {

static_assert(std::endian::native == std::endian::little,
              "binary formats assume a little-endian host");

class ByteWriter {
 public:
  explicit ByteWriter(std::ostream& os) : os_(os) {}

  template <typename T>
  void put(T v) {
    os_.write(reinterpret_cast<const char*>(&v), sizeof(T));
  }
  void put_bytes(const char* p, std::size_t n) {
    os_.write(p, static_cast<std::streamsize>(n));
  }

 private:
  std::ostream& os_;
};

// Tracks the byte offset so truncation and corruption errors can name the
// exact position where reading failed.
class ByteReader {
 public:
  ByteReader(std::istream& is, std::string name) : is_(is), name_(std::move(name)) {}

  template <typename T>
  T get(const char* field) {
    T v{};
    is_.read(reinterpret_cast<char*>(&v), sizeof(T));
    const std::streamsize got = is_.gcount();
    if (got != static_cast<std::streamsize>(sizeof(T))) {
      fail(field, offset_ + static_cast<std::uint64_t>(got));
    }
    offset_ += sizeof(T);
    return v;
  }

  void get_bytes(char* p, std::size_t n, const char* field) {
    is_.read(p, static_cast<std::streamsize>(n));
    const std::streamsize got = is_.gcount();
    if (got != static_cast<std::streamsize>(n)) {
      fail(field, offset_ + static_cast<std::uint64_t>(got));
    }
    offset_ += n;
  }

  std::uint64_t offset() const { return offset_; }

  [[noreturn]] void fail(const char* field, std::uint64_t at) const {
    std::ostringstream os;
    os << name_ << ": truncated or corrupt while reading " << field
       << " at byte offset " << at;
    throw std::runtime_error(os.str());
  }

 private:
  std::istream& is_;
  std::string name_;
  std::uint64_t offset_ = 0;
};

}  // namespace locodiff::detail

#endif  // LOCODIFF_SRC_BINARY_IO_HPP_
