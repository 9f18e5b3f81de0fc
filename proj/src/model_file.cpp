#include "alsf/model_file.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

namespace alsf::model_file {
namespace {

static_assert(std::endian::native == std::endian::little,
              "model files are little-endian; add byte swapping for this target");

constexpr char kMagic[4] = {'A', 'L', 'S', 'F'};

class Writer {
 public:
  template <typename T>
  void put(T value) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(&value);
    bytes_.insert(bytes_.end(), p, p + sizeof(T));
  }
  void put_bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    bytes_.insert(bytes_.end(), p, p + n);
  }
  void put_matrix(const Matrix& m) {
    for (Index r = 0; r < m.rows(); ++r) {
      for (Index c = 0; c < m.cols(); ++c) put<double>(m(r, c));
    }
  }
  std::vector<std::uint8_t>& bytes() { return bytes_; }

 private:
  std::vector<std::uint8_t> bytes_;
};

class Reader {
 public:
  Reader(const std::uint8_t* data, std::size_t size) : data_(data), size_(size) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    T value;
    std::memcpy(&value, data_ + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }
  std::string get_string(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(data_ + pos_), n);
    pos_ += n;
    return s;
  }
  Matrix get_matrix(std::uint64_t rows, std::uint64_t cols) {
    if (cols != 0 && rows > (size_ - pos_) / 8 / cols) truncated();
    Matrix m(static_cast<Index>(rows), static_cast<Index>(cols));
    for (Index r = 0; r < m.rows(); ++r) {
      for (Index c = 0; c < m.cols(); ++c) m(r, c) = get<double>();
    }
    return m;
  }
  std::size_t remaining() const { return size_ - pos_; }

 private:
  void need(std::size_t n) const {
    if (n > size_ - pos_) truncated();
  }
  [[noreturn]] static void truncated() {
    throw Error(ErrorCode::kDimensionMismatch, "model file body is shorter than its header");
  }

  const std::uint8_t* data_;
  std::size_t size_;
  std::size_t pos_ = 0;
};

}  // namespace

std::uint32_t crc32(const std::uint8_t* data, std::size_t size) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  while (size > 0) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(size, 1u << 30));
    crc = ::crc32(crc, data, chunk);
    data += chunk;
    size -= chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

std::vector<std::uint8_t> serialize(const AlsfModel& model) {
  model.validate();
  const int C = model.num_classes();
  Writer w;
  w.put_bytes(kMagic, 4);
  w.put<std::uint32_t>(kVersion);
  w.put<std::uint64_t>(static_cast<std::uint64_t>(model.dim()));
  w.put<std::uint64_t>(static_cast<std::uint64_t>(C));
  for (int c = 0; c < C; ++c) w.put<std::uint64_t>(static_cast<std::uint64_t>(model.class_size(c)));
  w.put<std::uint64_t>(static_cast<std::uint64_t>(model.shared_size()));
  for (int c = 0; c < C; ++c) {
    const std::string label = c < static_cast<int>(model.labels.size())
                                  ? model.labels[c]
                                  : "class" + std::to_string(c);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(label.size()));
    w.put_bytes(label.data(), label.size());
  }
  for (const auto& D : model.class_dicts) w.put_matrix(D);
  w.put_matrix(model.shared_dict);
  for (const auto& A : model.class_analysis) w.put_matrix(A);
  w.put_matrix(model.shared_analysis);
  const std::uint32_t crc = crc32(w.bytes().data(), w.bytes().size());
  w.put<std::uint32_t>(crc);
  return std::move(w.bytes());
}

AlsfModel deserialize(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 12 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw Error(ErrorCode::kUnsupportedFormat, "not an ALSF model file");
  }
  Reader header(bytes.data() + 4, bytes.size() - 4);
  const auto version = header.get<std::uint32_t>();
  if (version != kVersion) {
    throw Error(ErrorCode::kVersionMismatch, "model file version " + std::to_string(version) +
                                                 ", expected " + std::to_string(kVersion));
  }
  const std::size_t body = bytes.size() - 4;
  std::uint32_t stored;
  std::memcpy(&stored, bytes.data() + body, 4);
  if (crc32(bytes.data(), body) != stored) {
    throw Error(ErrorCode::kChecksumFailure, "model file checksum does not match its contents");
  }

  Reader r(bytes.data() + 8, body - 8);
  const auto d = r.get<std::uint64_t>();
  const auto C = r.get<std::uint64_t>();
  if (C == 0 || C > r.remaining() / 8) {
    throw Error(ErrorCode::kDimensionMismatch, "implausible class count in model header");
  }
  std::vector<std::uint64_t> k(C);
  for (auto& kc : k) kc = r.get<std::uint64_t>();
  const auto k0 = r.get<std::uint64_t>();

  AlsfModel model;
  for (std::uint64_t c = 0; c < C; ++c) model.labels.push_back(r.get_string(r.get<std::uint32_t>()));
  for (std::uint64_t c = 0; c < C; ++c) model.class_dicts.push_back(r.get_matrix(d, k[c]));
  model.shared_dict = r.get_matrix(d, k0);
  for (std::uint64_t c = 0; c < C; ++c) model.class_analysis.push_back(r.get_matrix(k[c], d));
  model.shared_analysis = r.get_matrix(k0, k0 > 0 ? d : 0);
  if (k0 == 0) model.shared_analysis.resize(0, static_cast<Index>(d));
  if (r.remaining() != 0) {
    throw Error(ErrorCode::kDimensionMismatch, "model file has trailing bytes before checksum");
  }
  model.validate();
  return model;
}

void save_model(const AlsfModel& model, const std::filesystem::path& path) {
  const auto bytes = serialize(model);
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::kIoError, "cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorCode::kIoError, "short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

AlsfModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path.string());
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                        std::istreambuf_iterator<char>());
  return deserialize(bytes);
}

}  // namespace alsf::model_file
