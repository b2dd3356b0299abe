#include "histo/net/network.hpp"

#include <array>
#include <cstring>
#include <fstream>

namespace histo::net {

namespace {

constexpr char kMagic[4] = {'C', 'N', 'V', '1'};
constexpr std::uint8_t kVersion = 1;

// Kernel sizes of the seven weight layers, in order.
constexpr std::array<int, 7> kKernels = {5, 5, 3, 3, 9, 1, 1};
constexpr std::array<int, 6> kBaseFilters = {32, 64, 128, 256, 1024, 512};

void write_u32(std::ofstream& os, std::uint32_t v) {
  char buf[4] = {static_cast<char>(v & 0xff),
                 static_cast<char>((v >> 8) & 0xff),
                 static_cast<char>((v >> 16) & 0xff),
                 static_cast<char>((v >> 24) & 0xff)};
  os.write(buf, 4);
}

std::uint32_t read_u32(std::ifstream& is, const std::string& what) {
  unsigned char buf[4];
  if (!is.read(reinterpret_cast<char*>(buf), 4))
    fail(ErrorCode::TruncatedFile, "checkpoint: missing " + what);
  return static_cast<std::uint32_t>(buf[0]) |
         static_cast<std::uint32_t>(buf[1]) << 8 |
         static_cast<std::uint32_t>(buf[2]) << 16 |
         static_cast<std::uint32_t>(buf[3]) << 24;
}

}  // namespace

NetworkSpec canonical_spec(int num_classes, int width_divisor) {
  if (num_classes < 2)
    fail(ErrorCode::InvalidClassCount,
         "need at least 2 classes, got " + std::to_string(num_classes));
  if (width_divisor < 1)
    fail(ErrorCode::InvalidArgument, "width_divisor must be >= 1");

  auto scaled = [&](int base) { return std::max(1, base / width_divisor); };

  NetworkSpec spec;
  spec.input_channels = 3;
  spec.num_classes = num_classes;
  spec.min_input = 150;
  auto conv = [](int kernel, int filters, bool same, bool relu) {
    return LayerDesc{LayerKind::Conv, kernel, filters, same, relu};
  };
  auto pool = [] { return LayerDesc{LayerKind::Pool, 0, 0, false, false}; };
  spec.layers = {
      conv(5, scaled(kBaseFilters[0]), true, true),  pool(),
      conv(5, scaled(kBaseFilters[1]), true, true),  pool(),
      conv(3, scaled(kBaseFilters[2]), true, true),  pool(),
      conv(3, scaled(kBaseFilters[3]), true, true),  pool(),
      conv(9, scaled(kBaseFilters[4]), false, true),
      conv(1, scaled(kBaseFilters[5]), false, true),
      conv(1, num_classes, false, false),
      LayerDesc{LayerKind::Softmax, 0, 0, false, false},
  };
  return spec;
}

std::pair<NetworkSpec, NetworkParams<float>> build_network(
    int num_classes, std::uint64_t seed, int width_divisor) {
  NetworkSpec spec = canonical_spec(num_classes, width_divisor);
  return {spec, init_params<float>(spec, seed)};
}

void save_checkpoint(const NetworkSpec& spec,
                     const NetworkParams<float>& params,
                     const std::filesystem::path& path) {
  if (spec.weight_layer_count() != static_cast<int>(params.conv.size()))
    fail(ErrorCode::ShapeMismatch, "checkpoint: spec/params mismatch");
  if (params.conv.size() != kKernels.size())
    fail(ErrorCode::InvalidArgument,
         "checkpoint: only the canonical stack is persisted");

  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary);
    if (!os) fail(ErrorCode::IoError, "cannot create " + tmp.string());
    os.write(kMagic, 4);
    os.put(static_cast<char>(kVersion));
    write_u32(os, static_cast<std::uint32_t>(spec.num_classes));
    for (const auto& layer : params.conv) {
      write_u32(os, static_cast<std::uint32_t>(layer.kernel));
      write_u32(os, static_cast<std::uint32_t>(layer.kernel));
      write_u32(os, static_cast<std::uint32_t>(layer.in_ch));
      write_u32(os, static_cast<std::uint32_t>(layer.out_ch));
      os.write(reinterpret_cast<const char*>(layer.weight.data()),
               static_cast<std::streamsize>(layer.weight.size() *
                                            sizeof(float)));
      os.write(reinterpret_cast<const char*>(layer.bias.data()),
               static_cast<std::streamsize>(layer.bias.size() *
                                            sizeof(float)));
    }
    if (!os) fail(ErrorCode::IoError, "failed writing " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::pair<NetworkSpec, NetworkParams<float>> load_checkpoint(
    const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) fail(ErrorCode::IoError, "cannot open " + path.string());

  char magic[4];
  if (!is.read(magic, 4))
    fail(ErrorCode::TruncatedFile, path.string() + ": missing header");
  if (std::memcmp(magic, kMagic, 4) != 0)
    fail(ErrorCode::BadMagic, path.string() + ": not a CNV1 checkpoint");
  char version;
  if (!is.get(version))
    fail(ErrorCode::TruncatedFile, path.string() + ": missing version");
  if (static_cast<std::uint8_t>(version) != kVersion)
    fail(ErrorCode::BadVersion, path.string() + ": unsupported version");

  const auto num_classes = read_u32(is, "class count");
  if (num_classes < 2)
    fail(ErrorCode::ShapeMismatch, path.string() + ": bad class count");

  NetworkParams<float> params;
  int expect_in = 3;
  for (std::size_t li = 0; li < kKernels.size(); ++li) {
    const auto kh = read_u32(is, "kernel dims");
    const auto kw = read_u32(is, "kernel dims");
    const auto in_ch = read_u32(is, "kernel dims");
    const auto out_ch = read_u32(is, "kernel dims");
    if (kh != kw || static_cast<int>(kh) != kKernels[li])
      fail(ErrorCode::ShapeMismatch,
           path.string() + ": layer " + std::to_string(li) +
               " kernel does not match the canonical stack");
    if (static_cast<int>(in_ch) != expect_in || out_ch == 0)
      fail(ErrorCode::ShapeMismatch,
           path.string() + ": layer " + std::to_string(li) +
               " channel chain is inconsistent");
    ConvParams<float> p;
    p.kernel = static_cast<int>(kh);
    p.in_ch = static_cast<int>(in_ch);
    p.out_ch = static_cast<int>(out_ch);
    p.weight.resize(p.out_ch, p.kernel * p.kernel * p.in_ch);
    p.bias.resize(p.out_ch);
    if (!is.read(reinterpret_cast<char*>(p.weight.data()),
                 static_cast<std::streamsize>(p.weight.size() *
                                              sizeof(float))))
      fail(ErrorCode::TruncatedFile,
           path.string() + ": kernel data ends early");
    if (!is.read(reinterpret_cast<char*>(p.bias.data()),
                 static_cast<std::streamsize>(p.bias.size() * sizeof(float))))
      fail(ErrorCode::TruncatedFile, path.string() + ": bias data ends early");
    params.conv.push_back(std::move(p));
    expect_in = static_cast<int>(out_ch);
  }
  if (static_cast<std::uint32_t>(expect_in) != num_classes)
    fail(ErrorCode::ShapeMismatch,
         path.string() + ": classifier width disagrees with the header");

  NetworkSpec spec = canonical_spec(static_cast<int>(num_classes));
  std::size_t conv_idx = 0;
  for (auto& l : spec.layers)
    if (l.kind == LayerKind::Conv) l.filters = params.conv[conv_idx++].out_ch;
  return {spec, std::move(params)};
}

}  // namespace histo::net
