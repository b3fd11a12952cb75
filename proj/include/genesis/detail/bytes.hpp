/* Copyright 2026 The Genesis Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace genesis::detail {

// Little-endian byte packing shared by the MVOL, NIfTI and checkpoint codecs.

class ByteWriter {
 public:
  void u8(std::uint8_t v) { buf_.push_back(v); }
  void u16(std::uint16_t v) { put_le(v); }
  void u32(std::uint32_t v) { put_le(v); }
  void i16(std::int16_t v) { put_le(static_cast<std::uint16_t>(v)); }
  void i32(std::int32_t v) { put_le(static_cast<std::uint32_t>(v)); }
  void f32(float v) { put_le(std::bit_cast<std::uint32_t>(v)); }
  void bytes(std::string_view s) { buf_.insert(buf_.end(), s.begin(), s.end()); }
  void zeros(std::size_t n) { buf_.insert(buf_.end(), n, 0); }
  std::size_t size() const { return buf_.size(); }
  std::vector<std::uint8_t> take() { return std::move(buf_); }

 private:
  template <typename U>
  void put_le(U v) {
    for (std::size_t i = 0; i < sizeof(U); ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  std::vector<std::uint8_t> buf_;
};

/// Bounds-checked reader; `ok()` turns false on the first overrun and all
/// later reads return zero.
class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> data) : data_(data) {}

  std::uint8_t u8() { return get_le<std::uint8_t>(); }
  std::uint16_t u16() { return get_le<std::uint16_t>(); }
  std::uint32_t u32() { return get_le<std::uint32_t>(); }
  std::int16_t i16() { return static_cast<std::int16_t>(get_le<std::uint16_t>()); }
  std::int32_t i32() { return static_cast<std::int32_t>(get_le<std::uint32_t>()); }
  float f32() { return std::bit_cast<float>(get_le<std::uint32_t>()); }
  std::string str(std::size_t n) {
    if (!take(n)) return {};
    return std::string(reinterpret_cast<const char*>(data_.data() + pos_ - n), n);
  }
  bool skip(std::size_t n) { return take(n); }
  void seek(std::size_t pos) {
    if (pos > data_.size()) {
      ok_ = false;
      pos_ = data_.size();
    } else {
      pos_ = pos;
    }
  }

  bool ok() const { return ok_; }
  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return data_.size() - pos_; }

 private:
  bool take(std::size_t n) {
    if (!ok_ || remaining() < n) {
      ok_ = false;
      return false;
    }
    pos_ += n;
    return true;
  }
  template <typename U>
  U get_le() {
    if (!take(sizeof(U))) return 0;
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i)
      v |= static_cast<U>(static_cast<U>(data_[pos_ - sizeof(U) + i]) << (8 * i));
    return v;
  }

  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
  bool ok_ = true;
};

/// Reads a whole file; returns false if it cannot be opened.
bool slurp(const std::filesystem::path& path, std::vector<std::uint8_t>& out);

/// Writes a whole file; throws IoError on failure.
void spit(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace genesis::detail
