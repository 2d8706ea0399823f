// Copyright 2026 The gnvox Authors
// SPDX-License-Identifier: Apache-2.0

#include "gnv/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <set>

#include "gnv/autodiff.hpp"
#include "gnv/error.hpp"

namespace gnv {

namespace {

using Kind = CheckpointError::Kind;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t checked_u32(std::size_t v, const char* what) {
  if (v > std::numeric_limits<std::uint32_t>::max()) {
    throw CheckpointError(Kind::kMalformed, std::string(what) + " exceeds 32 bits");
  }
  return static_cast<std::uint32_t>(v);
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  bool done() const { return pos_ == bytes_.size(); }
  std::size_t remaining() const { return bytes_.size() - pos_; }

  void need(std::size_t n, const std::string& what) const {
    if (remaining() < n) throw CheckpointError(Kind::kTruncated, "truncated checkpoint while reading " + what);
  }
  std::uint8_t u8(const std::string& what) {
    need(1, what);
    return bytes_[pos_++];
  }
  std::uint32_t u32(const std::string& what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::uint64_t u64(const std::string& what) {
    need(8, what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 8;
    return v;
  }
  std::string str(std::size_t n, const std::string& what) {
    need(n, what);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

const TensorSection* CheckpointFile::find(std::string_view name) const {
  for (const auto& s : sections) {
    if (s.name == name) return &s;
  }
  return nullptr;
}

std::vector<std::uint8_t> encode_checkpoint(const CheckpointFile& file) {
  std::set<std::string_view> names;
  for (const auto& s : file.sections) {
    if (!names.insert(s.name).second) throw CheckpointError(Kind::kMalformed, "duplicate section '" + s.name + "'");
    if (shape_product(s.dims) != s.values.size()) {
      throw CheckpointError(Kind::kShapeMismatch, "section '" + s.name + "' payload does not match its dims");
    }
  }
  nlohmann::json meta = file.metadata;
  meta["section_count"] = file.sections.size();
  const std::string meta_text = meta.dump();

  std::vector<std::uint8_t> out(std::begin(kCheckpointMagic), std::end(kCheckpointMagic));
  put_u32(out, kCheckpointVersion);
  put_u32(out, checked_u32(meta_text.size(), "metadata"));
  out.insert(out.end(), meta_text.begin(), meta_text.end());
  for (const auto& s : file.sections) {
    put_u32(out, checked_u32(s.name.size(), "section name"));
    out.insert(out.end(), s.name.begin(), s.name.end());
    out.push_back(static_cast<std::uint8_t>(s.dtype));
    put_u32(out, checked_u32(s.dims.size(), "rank"));
    for (std::size_t d : s.dims) put_u32(out, checked_u32(d, "dimension"));
    if (s.dtype == DType::kF64) {
      for (double v : s.values) put_u64(out, std::bit_cast<std::uint64_t>(v));
    } else {
      for (double v : s.values) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
    }
  }
  return out;
}

CheckpointFile decode_checkpoint(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  if (r.remaining() < 4 || std::memcmp(bytes.data(), kCheckpointMagic, 4) != 0) {
    throw CheckpointError(Kind::kBadMagic, "bad magic: not a gnvox checkpoint");
  }
  r.str(4, "magic");
  const std::uint32_t version = r.u32("version");
  if (version != kCheckpointVersion) {
    throw CheckpointError(Kind::kUnsupportedVersion, "unsupported checkpoint version " + std::to_string(version));
  }
  CheckpointFile file;
  const std::uint32_t meta_len = r.u32("metadata length");
  const std::string meta_text = r.str(meta_len, "metadata");
  try {
    file.metadata = nlohmann::json::parse(meta_text);
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(Kind::kMalformed, std::string("checkpoint metadata is not valid JSON: ") + e.what());
  }
  if (!file.metadata.is_object() || !file.metadata.contains("section_count") ||
      !file.metadata["section_count"].is_number_unsigned()) {
    throw CheckpointError(Kind::kMalformed, "checkpoint metadata lacks section_count");
  }
  const auto expected = file.metadata["section_count"].get<std::size_t>();
  std::set<std::string> names;
  while (file.sections.size() < expected) {
    TensorSection s;
    const std::string where = "section " + std::to_string(file.sections.size());
    s.name = r.str(r.u32(where + " name length"), where + " name");
    if (!names.insert(s.name).second) throw CheckpointError(Kind::kMalformed, "duplicate section '" + s.name + "'");
    const std::uint8_t tag = r.u8("dtype of '" + s.name + "'");
    if (tag > 1) throw CheckpointError(Kind::kMalformed, "unknown dtype tag in section '" + s.name + "'");
    s.dtype = static_cast<DType>(tag);
    const std::uint32_t rank = r.u32("rank of '" + s.name + "'");
    r.need(std::size_t{4} * rank, "dims of '" + s.name + "'");
    std::size_t count = 1;
    for (std::uint32_t i = 0; i < rank; ++i) {
      s.dims.push_back(r.u32("dims"));
      count *= s.dims.back();
    }
    const std::size_t width = s.dtype == DType::kF64 ? 8 : 4;
    if (count > r.remaining() / width) {
      throw CheckpointError(Kind::kTruncated, "truncated payload in section '" + s.name + "'");
    }
    s.values.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
      s.values[i] = s.dtype == DType::kF64 ? std::bit_cast<double>(r.u64("payload"))
                                           : static_cast<double>(std::bit_cast<float>(r.u32("payload")));
    }
    file.sections.push_back(std::move(s));
  }
  if (!r.done()) {
    throw CheckpointError(Kind::kTrailingBytes,
                          std::to_string(r.remaining()) + " unexpected trailing bytes after the last section");
  }
  file.metadata.erase("section_count");
  return file;
}

void write_checkpoint_file(const CheckpointFile& file, const std::filesystem::path& path) {
  const std::vector<std::uint8_t> bytes = encode_checkpoint(file);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

CheckpointFile read_checkpoint_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError(Kind::kNotFound, "checkpoint not found: " + path.string());
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

}  // namespace gnv
