// SPDX-License-Identifier: Apache-2.0
#include "sigclr/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "sigclr/errors.hpp"

namespace sigclr {

namespace {

constexpr char kMagic[4] = {'S', 'G', 'C', 'L'};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int shift = 0; shift < 32; shift += 8) out.push_back(static_cast<std::uint8_t>(v >> shift));
}

std::uint32_t narrow(std::size_t v, const char* what) {
  if (v > 0xFFFFFFFFu) throw ShapeError(std::string(what) + " does not fit the checkpoint format");
  return static_cast<std::uint32_t>(v);
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::span<const std::uint8_t> take(std::size_t n, const char* what) {
    if (bytes_.size() - pos_ < n) throw ParseError(std::string("truncated checkpoint: ") + what, pos_);
    auto out = bytes_.subspan(pos_, n);
    pos_ += n;
    return out;
  }
  std::uint32_t u32(const char* what) {
    const auto b = take(4, what);
    return static_cast<std::uint32_t>(b[0]) | static_cast<std::uint32_t>(b[1]) << 8 |
           static_cast<std::uint32_t>(b[2]) << 16 | static_cast<std::uint32_t>(b[3]) << 24;
  }
  std::size_t pos() const noexcept { return pos_; }
  bool done() const noexcept { return pos_ == bytes_.size(); }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(std::span<const ConstTensorRef> tensors) {
  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  out.push_back(kCheckpointVersion);
  put_u32(out, narrow(tensors.size(), "tensor count"));
  for (const auto& t : tensors) {
    put_u32(out, narrow(t.name.size(), "tensor name"));
    out.insert(out.end(), t.name.begin(), t.name.end());
    put_u32(out, narrow(t.value->rows(), "row count"));
    put_u32(out, narrow(t.value->cols(), "column count"));
    for (double v : t.value->data()) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  }
  return out;
}

std::vector<NamedTensor> decode_checkpoint(std::span<const std::uint8_t> bytes) {
  Reader in(bytes);
  const auto magic = in.take(4, "magic");
  if (std::memcmp(magic.data(), kMagic, 4) != 0) throw ParseError("not a checkpoint (bad magic)", 0);
  const std::uint8_t version = in.take(1, "version")[0];
  if (version != kCheckpointVersion)
    throw ParseError("unsupported checkpoint version " + std::to_string(version), 4);
  const std::uint32_t count = in.u32("tensor count");
  std::vector<NamedTensor> out;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint32_t name_len = in.u32("name length");
    const auto name = in.take(name_len, "name");
    const std::uint32_t rows = in.u32("rows");
    const std::uint32_t cols = in.u32("cols");
    const std::size_t n = static_cast<std::size_t>(rows) * cols;
    if (n > (bytes.size() - in.pos()) / 4) throw ParseError("truncated checkpoint: tensor data", in.pos());
    Matrix m(rows, cols);
    for (std::size_t k = 0; k < n; ++k)
      m.data()[k] = static_cast<double>(std::bit_cast<float>(in.u32("value")));
    out.push_back({std::string(name.begin(), name.end()), std::move(m)});
  }
  if (!in.done()) throw ParseError("trailing bytes after checkpoint", in.pos());
  return out;
}

void write_checkpoint(const std::filesystem::path& path, std::span<const ConstTensorRef> tensors) {
  const auto bytes = encode_checkpoint(tensors);
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw std::runtime_error("failed writing " + path.string());
}

std::vector<NamedTensor> read_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open checkpoint " + path.string());
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(is)), {});
  return decode_checkpoint(bytes);
}

void load_into(std::span<const TensorRef> targets, const std::vector<NamedTensor>& stored) {
  for (const auto& t : targets) {
    const NamedTensor* match = nullptr;
    for (const auto& s : stored)
      if (s.name == t.name) match = &s;
    if (!match) throw InvalidArgument("checkpoint has no tensor named " + t.name);
    if (match->value.rows() != t.value->rows() || match->value.cols() != t.value->cols())
      throw ShapeError("checkpoint tensor " + t.name + " has the wrong shape");
    *t.value = match->value;
  }
}

}  // namespace sigclr
