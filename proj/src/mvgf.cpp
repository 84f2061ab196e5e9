#include "framescope/mvgf.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>

namespace framescope {

namespace {

constexpr std::uint8_t kMagic[4] = {'M', 'V', 'G', 'F'};

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

template <typename U>
void put_le(std::vector<std::uint8_t>& out, U value) {
  static_assert(std::is_unsigned_v<U>);
  for (std::size_t b = 0; b < sizeof(U); ++b) out.push_back(static_cast<std::uint8_t>(value >> (8 * b)));
}

template <typename U>
U get_le(const std::uint8_t* p) {
  U v = 0;
  for (std::size_t b = 0; b < sizeof(U); ++b) v |= static_cast<U>(p[b]) << (8 * b);
  return v;
}

template <Real T>
using Bits = std::conditional_t<std::is_same_v<T, float>, std::uint32_t, std::uint64_t>;

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  const std::uint8_t* take(std::size_t n, const char* what) {
    if (bytes_.size() - pos_ < n) {
      throw TruncatedError(std::string("mvgf: truncated ") + what + " (need " + std::to_string(n) +
                           " bytes at offset " + std::to_string(pos_) + ", have " +
                           std::to_string(bytes_.size() - pos_) + ")");
    }
    const std::uint8_t* p = bytes_.data() + pos_;
    pos_ += n;
    return p;
  }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

template <Real T>
Tensor<T> decode_payload(Reader& r, const Shape& shape, std::size_t numel) {
  const std::uint8_t* p = r.take(numel * sizeof(T), "payload");
  std::vector<T> data(numel);
  for (std::size_t i = 0; i < numel; ++i) {
    data[i] = std::bit_cast<T>(get_le<Bits<T>>(p + i * sizeof(T)));
  }
  return Tensor<T>(shape, std::move(data));
}

}  // namespace

template <Real T>
std::vector<std::uint8_t> encode_mvgf(const Tensor<T>& t) {
  if (t.rank() == 0 || t.rank() > std::numeric_limits<std::uint8_t>::max()) {
    throw ArgumentError("mvgf: unsupported rank " + std::to_string(t.rank()));
  }
  std::vector<std::uint8_t> out;
  out.reserve(10 + 8 * t.rank() + t.numel() * sizeof(T));
  out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
  put_le<std::uint32_t>(out, kMvgfVersion);
  out.push_back(static_cast<std::uint8_t>(dtype_of<T>()));
  out.push_back(static_cast<std::uint8_t>(t.rank()));
  for (std::size_t d : t.shape()) put_le<std::uint64_t>(out, d);
  for (T v : t.data()) put_le<Bits<T>>(out, std::bit_cast<Bits<T>>(v));
  return out;
}

template std::vector<std::uint8_t> encode_mvgf(const Tensor32&);
template std::vector<std::uint8_t> encode_mvgf(const Tensor64&);

std::vector<std::uint8_t> encode_mvgf(const AnyTensor& t) {
  return std::visit([](const auto& x) { return encode_mvgf(x); }, t);
}

AnyTensor decode_mvgf(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  const std::uint8_t* magic = r.take(4, "magic");
  if (std::memcmp(magic, kMagic, 4) != 0) {
    throw BadMagicError("mvgf: bad magic '" + std::string(reinterpret_cast<const char*>(magic), 4) +
                        "', expected 'MVGF'");
  }
  const auto version = get_le<std::uint32_t>(r.take(4, "version"));
  if (version != kMvgfVersion) {
    throw UnsupportedVersionError("mvgf: unsupported format version " + std::to_string(version));
  }
  const std::uint8_t dtype = *r.take(1, "dtype");
  if (dtype != static_cast<std::uint8_t>(DType::f32) && dtype != static_cast<std::uint8_t>(DType::f64)) {
    throw BadDtypeError("mvgf: unknown dtype code " + std::to_string(dtype));
  }
  const std::uint8_t rank = *r.take(1, "rank");
  if (rank == 0) throw DimensionOverflowError("mvgf: rank must be at least 1");
  const std::uint8_t* dims = r.take(8 * static_cast<std::size_t>(rank), "dimensions");
  const std::size_t elem = dtype == static_cast<std::uint8_t>(DType::f32) ? 4 : 8;

  Shape shape(rank);
  std::uint64_t numel = 1;
  for (std::size_t i = 0; i < rank; ++i) {
    const auto d = get_le<std::uint64_t>(dims + 8 * i);
    if (d == 0) throw DimensionOverflowError("mvgf: dimension " + std::to_string(i) + " is zero");
    if (d > std::numeric_limits<std::size_t>::max() || numel > std::numeric_limits<std::uint64_t>::max() / d ||
        numel * d > std::numeric_limits<std::size_t>::max() / elem) {
      throw DimensionOverflowError("mvgf: dimension product overflows at axis " + std::to_string(i));
    }
    numel *= d;
    shape[i] = static_cast<std::size_t>(d);
  }

  AnyTensor out = dtype == static_cast<std::uint8_t>(DType::f32)
                      ? AnyTensor(decode_payload<float>(r, shape, numel))
                      : AnyTensor(decode_payload<double>(r, shape, numel));
  if (r.remaining() != 0) {
    throw TrailingDataError("mvgf: " + std::to_string(r.remaining()) + " unexpected bytes after payload");
  }
  return out;
}

void write_features(const std::filesystem::path& path, const AnyTensor& t) {
  const std::vector<std::uint8_t> bytes = encode_mvgf(t);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open '" + path.string() + "' for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw IoError("failed writing '" + path.string() + "'");
}

AnyTensor read_features(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open '" + path.string() + "' for reading");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return decode_mvgf(bytes);
}

template <Real T>
Tensor<T> read_features_as(const std::filesystem::path& path) {
  AnyTensor t = read_features(path);
  if (auto* p = std::get_if<Tensor<T>>(&t)) return std::move(*p);
  throw BadDtypeError("mvgf: '" + path.string() + "' does not hold " +
                      (std::is_same_v<T, float> ? "f32" : "f64") + " data");
}

template Tensor32 read_features_as<float>(const std::filesystem::path&);
template Tensor64 read_features_as<double>(const std::filesystem::path&);

}  // namespace framescope
