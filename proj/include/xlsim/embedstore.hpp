#pragma once

// Static word vectors per language and the context-free cosine channel.

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "xlsim/core/error.hpp"
#include "xlsim/core/hash.hpp"
#include "xlsim/core/numeric.hpp"
#include "xlsim/core/text.hpp"

namespace xlsim {

enum class Casing : uint8_t { lower = 0, preserve = 1 };

inline Casing parse_casing(std::string_view s) {
  if (s == "lower") return Casing::lower;
  if (s == "preserve") return Casing::preserve;
  throw UsageError("unknown casing policy '" + std::string(s) + "'");
}

template <std::floating_point T>
class BasicVectorStore {
 public:
  using value_type = T;

  BasicVectorStore() = default;
  BasicVectorStore(std::string lang, std::size_t dim, Casing casing = Casing::lower)
      : lang_(std::move(lang)), dim_(dim), casing_(casing) {
    if (dim_ == 0) throw DataError("vector store dimension must be positive");
  }

  /// Adds a vector under the casing policy. Returns false (and keeps the
  /// earlier vector) when the normalized key already exists.
  bool add(std::string_view word, std::span<const T> vec) {
    if (vec.size() != dim_)
      throw DataError("vector for '" + std::string(word) + "' has length " + std::to_string(vec.size()) +
                      ", store dimension is " + std::to_string(dim_));
    if (!std::all_of(vec.begin(), vec.end(), [](T x) { return std::isfinite(x); }))
      throw DataError("vector for '" + std::string(word) + "' has a non-finite component");
    auto key = normalize(word);
    if (index_.count(key)) return false;
    index_.emplace(key, keys_.size());
    keys_.push_back(std::move(key));
    data_.insert(data_.end(), vec.begin(), vec.end());
    return true;
  }

  std::optional<std::span<const T>> find(std::string_view word) const {
    const auto it = index_.find(normalize(word));
    if (it == index_.end()) return std::nullopt;
    return std::span<const T>(data_.data() + it->second * dim_, dim_);
  }

  std::string normalize(std::string_view word) const {
    return casing_ == Casing::lower ? text::lowercase(word) : std::string(word);
  }

  const std::string& lang() const noexcept { return lang_; }
  std::size_t dim() const noexcept { return dim_; }
  Casing casing() const noexcept { return casing_; }
  std::size_t size() const noexcept { return keys_.size(); }
  bool empty() const noexcept { return keys_.empty(); }
  /// Keys in insertion order.
  const std::vector<std::string>& words() const noexcept { return keys_; }

 private:
  std::string lang_;
  std::size_t dim_ = 1;
  Casing casing_ = Casing::lower;
  std::vector<std::string> keys_;
  std::vector<T> data_;
  std::unordered_map<std::string, std::size_t> index_;
};

using VectorStore = BasicVectorStore<float>;

/// Cosine of the two words' vectors; absent when either is OOV or zero.
template <std::floating_point T>
std::optional<double> we_similarity(const BasicVectorStore<T>& store, std::string_view w1, std::string_view w2) {
  const auto a = store.find(w1);
  const auto b = store.find(w2);
  if (!a || !b) return std::nullopt;
  return numeric::cosine(*a, *b);
}

struct TextVectorLoad {
  VectorStore store;
  std::size_t lines = 0;
  std::size_t malformed = 0;   // wrong field count or unparsable component
  std::size_t duplicates = 0;  // repeated key after casing; first kept
};

/// Maximum share of rows with the wrong field count before loading aborts.
inline constexpr double kMaxInconsistentShare = 0.001;

namespace detail {

inline std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    if (i >= line.size()) break;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
    out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

template <class Int>
std::optional<Int> parse_int(std::string_view s) {
  Int v{};
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

}  // namespace detail

/// Reads word2vec-style text vectors: optional "count dim" header, then
/// "word v1 ... vdim" rows. `limit` caps the number of entries kept.
inline TextVectorLoad load_text_vectors(std::istream& in, const std::string& lang,
                                        std::optional<std::size_t> limit = std::nullopt,
                                        Casing casing = Casing::lower) {
  TextVectorLoad out;
  std::optional<std::size_t> dim;
  std::size_t inconsistent = 0;
  std::string line;
  std::vector<float> vec;
  bool first = true;
  bool created = false;
  while (std::getline(in, line)) {
    const auto fields = detail::split_fields(line);
    if (fields.empty()) continue;
    if (first) {
      first = false;
      if (fields.size() == 2) {
        auto n = detail::parse_int<std::size_t>(fields[0]);
        auto d = detail::parse_int<std::size_t>(fields[1]);
        if (n && d && *d > 0) {
          dim = *d;
          continue;
        }
      }
    }
    if (limit && out.store.size() >= *limit) break;
    ++out.lines;
    if (!dim) {
      if (fields.size() < 2) {
        ++out.malformed;
        ++inconsistent;
        continue;
      }
      dim = fields.size() - 1;
    }
    if (!created) {
      out.store = VectorStore(lang, *dim, casing);
      created = true;
    }
    if (fields.size() != *dim + 1) {
      ++out.malformed;
      ++inconsistent;
      continue;
    }
    vec.resize(*dim);
    bool ok = true;
    for (std::size_t k = 0; k < *dim && ok; ++k) {
      const auto f = fields[k + 1];
      const auto res = std::from_chars(f.data(), f.data() + f.size(), vec[k]);
      ok = res.ec == std::errc{} && res.ptr == f.data() + f.size() && std::isfinite(vec[k]);
    }
    if (!ok) {
      ++out.malformed;
      continue;
    }
    if (!out.store.add(fields[0], vec)) ++out.duplicates;
  }
  if (!created) out.store = VectorStore(lang, dim.value_or(1), casing);
  if (out.lines > 0 && static_cast<double>(inconsistent) / static_cast<double>(out.lines) > kMaxInconsistentShare)
    throw DataError("inconsistent dimensionality in " + std::to_string(inconsistent) + " of " +
                    std::to_string(out.lines) + " vector rows");
  return out;
}

inline TextVectorLoad load_text_vectors(const std::string& path, const std::string& lang,
                                        std::optional<std::size_t> limit = std::nullopt,
                                        Casing casing = Casing::lower) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read vector file '" + path + "'");
  return load_text_vectors(in, lang, limit, casing);
}

// Binary layout (little-endian):
//   magic[8] "XLSIMVEC" | u32 version | u32 dim | u64 count | u8 casing |
//   u8 lang_len | lang bytes | u64 key_offsets[count+1] | key bytes |
//   f32 payload[count*dim] | sha256[32] over everything before it
inline constexpr char kVectorMagic[8] = {'X', 'L', 'S', 'I', 'M', 'V', 'E', 'C'};
inline constexpr uint32_t kVectorFormatVersion = 1;

namespace detail {

class ByteWriter {
 public:
  template <class Int>
  void put(Int v) {
    for (std::size_t i = 0; i < sizeof(Int); ++i) bytes.push_back(static_cast<uint8_t>((static_cast<uint64_t>(v) >> (8 * i)) & 0xff));
  }
  void put_f32(float f) { put(std::bit_cast<uint32_t>(f)); }
  void put_bytes(std::string_view s) { bytes.insert(bytes.end(), s.begin(), s.end()); }
  std::vector<uint8_t> bytes;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const uint8_t> b) : b_(b) {}
  template <class Int>
  Int get() {
    need(sizeof(Int));
    uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(Int); ++i) v |= static_cast<uint64_t>(b_[pos_ + i]) << (8 * i);
    pos_ += sizeof(Int);
    return static_cast<Int>(v);
  }
  float get_f32() { return std::bit_cast<float>(get<uint32_t>()); }
  std::string_view get_bytes(std::size_t n) {
    need(n);
    std::string_view s(reinterpret_cast<const char*>(b_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  std::size_t remaining() const { return b_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (b_.size() - pos_ < n) throw DataError("vector binary truncated");
  }
  std::span<const uint8_t> b_;
  std::size_t pos_ = 0;
};

}  // namespace detail

template <std::floating_point T>
std::vector<uint8_t> serialize_binary(const BasicVectorStore<T>& store) {
  std::vector<std::size_t> order(store.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  const auto& keys = store.words();
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return keys[a] < keys[b]; });

  detail::ByteWriter w;
  w.put_bytes(std::string_view(kVectorMagic, sizeof kVectorMagic));
  w.put(kVectorFormatVersion);
  w.put(static_cast<uint32_t>(store.dim()));
  w.put(static_cast<uint64_t>(store.size()));
  w.put(static_cast<uint8_t>(store.casing()));
  if (store.lang().size() > 255) throw DataError("language code too long");
  w.put(static_cast<uint8_t>(store.lang().size()));
  w.put_bytes(store.lang());
  uint64_t off = 0;
  w.put(off);
  for (auto i : order) {
    off += keys[i].size();
    w.put(off);
  }
  for (auto i : order) w.put_bytes(keys[i]);
  for (auto i : order) {
    const auto vec = *store.find(keys[i]);
    for (T x : vec) w.put_f32(static_cast<float>(x));
  }
  const auto digest = hash::sha256_bytes(std::span<const uint8_t>(w.bytes));
  w.bytes.insert(w.bytes.end(), digest.begin(), digest.end());
  return std::move(w.bytes);
}

template <std::floating_point T = float>
BasicVectorStore<T> deserialize_binary(std::span<const uint8_t> bytes) {
  constexpr std::size_t kDigest = 32;
  if (bytes.size() < sizeof kVectorMagic + 4 + kDigest) throw DataError("vector binary truncated");
  if (std::memcmp(bytes.data(), kVectorMagic, sizeof kVectorMagic) != 0) throw DataError("not a vector binary (bad magic)");
  detail::ByteReader r(bytes.first(bytes.size() - kDigest));
  r.get_bytes(sizeof kVectorMagic);
  const auto version = r.get<uint32_t>();
  if (version != kVectorFormatVersion)
    throw DataError("vector binary format version " + std::to_string(version) + " unsupported (expected " +
                    std::to_string(kVectorFormatVersion) + ")");
  const auto digest = hash::sha256_bytes(bytes.first(bytes.size() - kDigest));
  if (!std::equal(digest.begin(), digest.end(), bytes.end() - kDigest)) throw DataError("vector binary checksum mismatch");

  const auto dim = r.get<uint32_t>();
  const auto count = r.get<uint64_t>();
  const auto casing = r.get<uint8_t>();
  if (casing > 1) throw DataError("vector binary has unknown casing policy");
  const auto lang_len = r.get<uint8_t>();
  const std::string lang(r.get_bytes(lang_len));
  if (count > r.remaining() / 8) throw DataError("vector binary entry count exceeds file size");
  std::vector<uint64_t> offsets(count + 1);
  for (auto& o : offsets) o = r.get<uint64_t>();
  const auto blob = r.get_bytes(offsets.back());
  if (r.remaining() != count * dim * 4) throw DataError("vector binary payload size mismatch");
  BasicVectorStore<T> store(lang, dim == 0 ? 1 : dim, static_cast<Casing>(casing));
  std::vector<T> vec(dim);
  for (uint64_t i = 0; i < count; ++i) {
    if (offsets[i] > offsets[i + 1]) throw DataError("vector binary key offsets not monotone");
    const auto key = blob.substr(offsets[i], offsets[i + 1] - offsets[i]);
    for (auto& x : vec) x = static_cast<T>(r.get_f32());
    store.add(key, vec);
  }
  return store;
}

template <std::floating_point T>
void compile_binary(const BasicVectorStore<T>& store, const std::string& path) {
  const auto bytes = serialize_binary(store);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write '" + path + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("I/O failure writing '" + path + "'");
}

template <std::floating_point T = float>
BasicVectorStore<T> open_binary(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read vector binary '" + path + "'");
  const std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_binary<T>(bytes);
}

/// Opens a store by extension: ".bin" is the binary cache, anything else text.
inline VectorStore open_vectors(const std::string& path, const std::string& lang,
                                std::optional<std::size_t> limit = std::nullopt, Casing casing = Casing::lower) {
  if (path.size() >= 4 && path.compare(path.size() - 4, 4, ".bin") == 0) return open_binary<float>(path);
  return load_text_vectors(path, lang, limit, casing).store;
}

}  // namespace xlsim
