#include "voltsim/nn.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <mutex>
#include <ostream>
#include <set>
#include <thread>

#include "voltsim/characterizer.hpp"
#include "voltsim/errors.hpp"
#include "voltsim/placement.hpp"
#include "voltsim/rng.hpp"
#include "voltsim/secded.hpp"

namespace voltsim::nn {

namespace {

constexpr std::uint64_t kTagWeights = 0x4E4E57;
constexpr std::uint64_t kTagProto = 0x4E4E50;
constexpr std::uint64_t kTagImage = 0x4E4E49;
constexpr std::uint64_t kTagLabel = 0x4E4E4C;
constexpr std::uint64_t kTagInject = 0x4E4E4A;

constexpr char kMagic[4] = {'V', 'S', 'N', 'N'};
constexpr std::uint32_t kFileVersion = 1;

template <typename Fn>
void ParallelFor(std::size_t n, int threads, Fn&& fn) {
  const auto workers = std::min<std::size_t>(static_cast<std::size_t>(std::max(1, threads)), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < workers; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i; (i = next.fetch_add(1)) < n;) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

void PutU32(std::ostream& out, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v), static_cast<char>(v >> 8), static_cast<char>(v >> 16),
                     static_cast<char>(v >> 24)};
  out.write(b, 4);
}

void PutU32Be(std::ostream& out, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v >> 24), static_cast<char>(v >> 16),
                     static_cast<char>(v >> 8), static_cast<char>(v)};
  out.write(b, 4);
}

class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  void Bytes(void* dst, std::size_t n, const char* what) {
    in_.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) {
      throw ParseError(std::string("unexpected end of file reading ") + what,
                       offset_ + static_cast<std::size_t>(in_.gcount()));
    }
    offset_ += n;
  }
  std::uint32_t U32(const char* what) {
    unsigned char b[4];
    Bytes(b, 4, what);
    return b[0] | (b[1] << 8) | (b[2] << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
  }
  std::uint32_t U32Be(const char* what) {
    unsigned char b[4];
    Bytes(b, 4, what);
    return (static_cast<std::uint32_t>(b[0]) << 24) | (b[1] << 16) | (b[2] << 8) | b[3];
  }
  std::uint8_t U8(const char* what) {
    std::uint8_t b;
    Bytes(&b, 1, what);
    return b;
  }
  bool AtEnd() { return in_.peek() == std::char_traits<char>::eof(); }
  std::size_t offset() const { return offset_; }

 private:
  std::istream& in_;
  std::size_t offset_ = 0;
};

double Sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Q1.31 samples of the sigmoid on [-8, 8], 1024 intervals.
const std::array<std::int64_t, 1025>& SigmoidTable() {
  static const auto table = [] {
    std::array<std::int64_t, 1025> t{};
    for (int k = 0; k <= 1024; ++k) {
      const double x = -8.0 + 16.0 * k / 1024.0;
      t[static_cast<std::size_t>(k)] = std::llround(Sigmoid(x) * 2147483648.0);
    }
    return t;
  }();
  return table;
}

std::uint16_t PixelQ15(std::uint8_t px) {
  return static_cast<std::uint16_t>(std::min<int>(32767, (px * 32768 + 127) / 255));
}

}  // namespace

void QuantFormat::Validate() const {
  if (sign_bits != 1 || digit_bits < 0 || frac_bits < 0 || sign_bits + digit_bits + frac_bits != 16) {
    throw InvalidInput("quantization format " + ToString() + " must be 1 + digit + frac = 16 bits");
  }
}

double QuantFormat::max_value() const { return std::ldexp(32767.0, -frac_bits); }
double QuantFormat::min_value() const { return std::ldexp(-32768.0, -frac_bits); }

std::string QuantFormat::ToString() const {
  return "Q(" + std::to_string(sign_bits) + "," + std::to_string(digit_bits) + "," +
         std::to_string(frac_bits) + ")";
}

std::uint16_t Quantize(double value, const QuantFormat& format) {
  format.Validate();
  if (std::isnan(value)) throw InvalidInput("cannot quantize NaN");
  const double scaled = std::round(std::ldexp(value, format.frac_bits));
  const double clamped = std::clamp(scaled, -32768.0, 32767.0);
  return static_cast<std::uint16_t>(static_cast<std::int16_t>(clamped));
}

double Dequantize(std::uint16_t word, const QuantFormat& format) {
  return std::ldexp(static_cast<double>(static_cast<std::int16_t>(word)), -format.frac_bits);
}

std::vector<LayerSpec> MnistTopology() {
  const int sizes[] = {784, 1024, 512, 256, 128, 10};
  std::vector<LayerSpec> out;
  for (int j = 0; j < 5; ++j) {
    LayerSpec l;
    l.index = j;
    l.in_size = sizes[j];
    l.out_size = sizes[j + 1];
    l.format = j == 4 ? QuantFormat{1, 4, 11} : QuantFormat{1, 0, 15};
    out.push_back(l);
  }
  return out;
}

int TotalBrams(std::span<const LayerSpec> layers) {
  int n = 0;
  for (const auto& l : layers) n += l.bram_count();
  return n;
}

void Network::Validate() const {
  if (layers.empty()) throw InvalidInput("network has no layers");
  if (weights.size() != layers.size() || biases.size() != layers.size()) {
    throw InvalidInput("network weight/bias arrays do not match the layer count");
  }
  for (std::size_t j = 0; j < layers.size(); ++j) {
    const auto& l = layers[j];
    l.format.Validate();
    if (l.in_size <= 0 || l.out_size <= 0) throw InvalidInput("layer sizes must be positive");
    if (l.index != static_cast<int>(j)) throw InvalidInput("layer indices must be 0..n-1");
    if (j > 0 && layers[j - 1].out_size != l.in_size) {
      throw InvalidInput("layer " + std::to_string(j) + " input size " +
                         std::to_string(l.in_size) + " does not match previous output " +
                         std::to_string(layers[j - 1].out_size));
    }
    if (weights[j].size() != l.weight_count()) {
      throw InvalidInput("layer " + std::to_string(j) + " has " +
                         std::to_string(weights[j].size()) + " weights, expected " +
                         std::to_string(l.weight_count()));
    }
    if (biases[j].size() != static_cast<std::size_t>(l.out_size)) {
      throw InvalidInput("layer " + std::to_string(j) + " bias count mismatch");
    }
  }
  if (layers.front().in_size != kImagePixels) {
    throw InvalidInput("first layer must take " + std::to_string(kImagePixels) + " inputs");
  }
}

void SaveNetwork(std::ostream& out, const Network& net) {
  net.Validate();
  out.write(kMagic, 4);
  PutU32(out, kFileVersion);
  PutU32(out, static_cast<std::uint32_t>(net.layers.size()));
  for (const auto& l : net.layers) {
    PutU32(out, static_cast<std::uint32_t>(l.in_size));
    PutU32(out, static_cast<std::uint32_t>(l.out_size));
    const char f[4] = {static_cast<char>(l.format.sign_bits), static_cast<char>(l.format.digit_bits),
                       static_cast<char>(l.format.frac_bits), 0};
    out.write(f, 4);
  }
  auto put_words = [&](const std::vector<std::uint16_t>& words) {
    for (std::uint16_t w : words) {
      const char b[2] = {static_cast<char>(w), static_cast<char>(w >> 8)};
      out.write(b, 2);
    }
  };
  for (std::size_t j = 0; j < net.layers.size(); ++j) {
    put_words(net.weights[j]);
    put_words(net.biases[j]);
  }
}

Network LoadNetwork(std::istream& in) {
  Reader r(in);
  char magic[4];
  r.Bytes(magic, 4, "magic");
  if (std::memcmp(magic, kMagic, 4) != 0) throw ParseError("bad magic, not a weight file", 0);
  const std::uint32_t version = r.U32("version");
  if (version != kFileVersion) {
    throw InvalidInput("unsupported weight file version " + std::to_string(version));
  }
  const std::uint32_t count = r.U32("layer count");
  if (count == 0 || count > 64) throw InvalidInput("implausible layer count");
  Network net;
  for (std::uint32_t j = 0; j < count; ++j) {
    LayerSpec l;
    l.index = static_cast<int>(j);
    l.in_size = static_cast<int>(r.U32("layer input size"));
    l.out_size = static_cast<int>(r.U32("layer output size"));
    l.format.sign_bits = r.U8("format");
    l.format.digit_bits = r.U8("format");
    l.format.frac_bits = r.U8("format");
    r.U8("format");
    l.format.Validate();
    if (l.in_size <= 0 || l.out_size <= 0 || l.in_size > (1 << 20) || l.out_size > (1 << 20)) {
      throw InvalidInput("implausible layer dimensions");
    }
    net.layers.push_back(l);
  }
  auto get_words = [&](std::size_t n, const char* what) {
    std::vector<std::uint16_t> words(n);
    for (auto& w : words) {
      unsigned char b[2];
      try {
        r.Bytes(b, 2, what);
      } catch (const ParseError& e) {
        throw InvalidInput(std::string("dimension mismatch: file ends inside ") + what +
                           " at byte " + std::to_string(e.offset()));
      }
      w = static_cast<std::uint16_t>(b[0] | (b[1] << 8));
    }
    return words;
  };
  for (const auto& l : net.layers) {
    net.weights.push_back(get_words(l.weight_count(), "weights"));
    net.biases.push_back(get_words(static_cast<std::size_t>(l.out_size), "biases"));
  }
  if (!r.AtEnd()) {
    throw InvalidInput("dimension mismatch: trailing data after byte " + std::to_string(r.offset()));
  }
  net.Validate();
  return net;
}

void SaveNetwork(const std::string& path, const Network& net) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidInput("cannot write " + path);
  SaveNetwork(out, net);
}

Network LoadNetwork(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("cannot read " + path);
  return LoadNetwork(in);
}

double BitSparsity(const Network& net) {
  std::uint64_t ones = 0, bits = 0;
  for (const auto& layer : net.weights) {
    for (std::uint16_t w : layer) ones += static_cast<std::uint64_t>(std::popcount(w));
    bits += 16 * layer.size();
  }
  return bits ? 1.0 - static_cast<double>(ones) / static_cast<double>(bits) : 0.0;
}

void Dataset::Validate() const {
  if (pixels.size() != labels.size() * kImagePixels) {
    throw InvalidInput("dataset pixel count does not match label count");
  }
  for (auto l : labels) {
    if (l >= 10) throw InvalidInput("dataset label out of range");
  }
}

Dataset LoadIdx(std::istream& images, std::istream& labels) {
  Reader ri(images), rl(labels);
  if (ri.U32Be("image magic") != 0x00000803) throw ParseError("bad IDX image magic", 0);
  const std::uint32_t n = ri.U32Be("image count");
  const std::uint32_t rows = ri.U32Be("rows");
  const std::uint32_t cols = ri.U32Be("cols");
  if (rows != kImageSide || cols != kImageSide) {
    throw InvalidInput("IDX images must be 28x28");
  }
  if (rl.U32Be("label magic") != 0x00000801) throw ParseError("bad IDX label magic", 0);
  if (rl.U32Be("label count") != n) throw InvalidInput("IDX image/label counts differ");
  Dataset d;
  d.pixels.resize(static_cast<std::size_t>(n) * kImagePixels);
  d.labels.resize(n);
  ri.Bytes(d.pixels.data(), d.pixels.size(), "pixels");
  rl.Bytes(d.labels.data(), d.labels.size(), "labels");
  d.Validate();
  return d;
}

Dataset LoadIdx(const std::string& images_path, const std::string& labels_path) {
  std::ifstream im(images_path, std::ios::binary), lb(labels_path, std::ios::binary);
  if (!im) throw InvalidInput("cannot read " + images_path);
  if (!lb) throw InvalidInput("cannot read " + labels_path);
  return LoadIdx(im, lb);
}

void SaveIdx(std::ostream& images, std::ostream& labels, const Dataset& data) {
  data.Validate();
  PutU32Be(images, 0x00000803);
  PutU32Be(images, static_cast<std::uint32_t>(data.size()));
  PutU32Be(images, kImageSide);
  PutU32Be(images, kImageSide);
  images.write(reinterpret_cast<const char*>(data.pixels.data()),
               static_cast<std::streamsize>(data.pixels.size()));
  PutU32Be(labels, 0x00000801);
  PutU32Be(labels, static_cast<std::uint32_t>(data.size()));
  labels.write(reinterpret_cast<const char*>(data.labels.data()),
               static_cast<std::streamsize>(data.labels.size()));
}

void SaveIdx(const std::string& images_path, const std::string& labels_path,
             const Dataset& data) {
  std::ofstream im(images_path, std::ios::binary), lb(labels_path, std::ios::binary);
  if (!im || !lb) throw InvalidInput("cannot write IDX files");
  SaveIdx(im, lb, data);
}

FloatNetwork ToFloat(const Network& net) {
  FloatNetwork f;
  f.layers = net.layers;
  for (std::size_t j = 0; j < net.layers.size(); ++j) {
    const auto& fmt = net.layers[j].format;
    auto& w = f.weights.emplace_back();
    for (auto q : net.weights[j]) w.push_back(Dequantize(q, fmt));
    auto& b = f.biases.emplace_back();
    for (auto q : net.biases[j]) b.push_back(Dequantize(q, fmt));
  }
  return f;
}

Network QuantizeNetwork(const FloatNetwork& f) {
  Network net;
  net.layers = f.layers;
  for (std::size_t j = 0; j < f.layers.size(); ++j) {
    const auto& fmt = f.layers[j].format;
    auto& w = net.weights.emplace_back();
    for (double x : f.weights[j]) w.push_back(Quantize(x, fmt));
    auto& b = net.biases.emplace_back();
    for (double x : f.biases[j]) b.push_back(Quantize(x, fmt));
  }
  net.Validate();
  return net;
}

int InferFloat(const FloatNetwork& net, std::span<const std::uint8_t> image) {
  std::vector<double> a(image.size());
  for (std::size_t i = 0; i < image.size(); ++i) a[i] = image[i] / 255.0;
  std::vector<double> z;
  for (std::size_t j = 0; j < net.layers.size(); ++j) {
    const auto& l = net.layers[j];
    z.assign(static_cast<std::size_t>(l.out_size), 0.0);
    for (int o = 0; o < l.out_size; ++o) {
      const double* w = net.weights[j].data() + static_cast<std::size_t>(o) * l.in_size;
      double acc = net.biases[j][static_cast<std::size_t>(o)];
      for (int i = 0; i < l.in_size; ++i) acc += w[i] * a[static_cast<std::size_t>(i)];
      z[static_cast<std::size_t>(o)] = acc;
    }
    if (j + 1 < net.layers.size()) {
      a.resize(z.size());
      for (std::size_t k = 0; k < z.size(); ++k) a[k] = Sigmoid(z[k]);
    }
  }
  return static_cast<int>(std::max_element(z.begin(), z.end()) - z.begin());
}

namespace {

// Float forward pass returning the output logits.
std::vector<double> Logits(const FloatNetwork& net, std::span<const std::uint8_t> image) {
  std::vector<double> a(image.size());
  for (std::size_t i = 0; i < image.size(); ++i) a[i] = image[i] / 255.0;
  std::vector<double> z;
  for (std::size_t j = 0; j < net.layers.size(); ++j) {
    const auto& l = net.layers[j];
    z.assign(static_cast<std::size_t>(l.out_size), 0.0);
    for (int o = 0; o < l.out_size; ++o) {
      const double* w = net.weights[j].data() + static_cast<std::size_t>(o) * l.in_size;
      double acc = net.biases[j][static_cast<std::size_t>(o)];
      for (int i = 0; i < l.in_size; ++i) acc += w[i] * a[static_cast<std::size_t>(i)];
      z[static_cast<std::size_t>(o)] = acc;
    }
    if (j + 1 < net.layers.size()) {
      a.resize(z.size());
      for (std::size_t k = 0; k < z.size(); ++k) a[k] = Sigmoid(z[k]);
    }
  }
  return z;
}

using Prototypes = std::vector<std::array<double, kImagePixels>>;

Prototypes MakePrototypes(std::uint64_t seed) {
  Prototypes protos(10);
  for (int c = 0; c < 10; ++c) {
    rng::Stream s(rng::Derive({seed, kTagProto, static_cast<std::uint64_t>(c)}));
    auto& p = protos[static_cast<std::size_t>(c)];
    p.fill(0.0);
    for (int k = 0; k < 4; ++k) {
      const double cx = 6 + 16 * s.Uniform(), cy = 6 + 16 * s.Uniform();
      const double r = 2.0 + 3.0 * s.Uniform();
      for (int y = 0; y < kImageSide; ++y) {
        for (int x = 0; x < kImageSide; ++x) {
          const double d2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
          p[static_cast<std::size_t>(y * kImageSide + x)] += std::exp(-d2 / (2 * r * r));
        }
      }
    }
    for (auto& v : p) v = std::min(1.0, v);
  }
  return protos;
}

void MakeImage(const Prototypes& protos, std::uint64_t key, std::uint8_t* out) {
  rng::Stream s(key);
  const auto& p = protos[static_cast<std::size_t>(s.Below(protos.size()))];
  const double gain = 0.6 + 0.4 * s.Uniform();
  for (int i = 0; i < kImagePixels; ++i) {
    const double v = gain * p[static_cast<std::size_t>(i)] + 0.15 * s.Normal();
    out[i] = static_cast<std::uint8_t>(std::lround(255.0 * std::clamp(v, 0.0, 1.0)));
  }
}

constexpr std::uint64_t kTagCalib = 0x4E4E43;
constexpr double kWeightDensity = 0.3;
constexpr double kMinMargin = 1.0;
constexpr int kCalibImages = 256;

}  // namespace

SyntheticModel MakeSyntheticModel(std::uint64_t seed, std::size_t images,
                                  std::span<const LayerSpec> layers_in) {
  SyntheticModel m;
  const std::vector<LayerSpec> layers =
      layers_in.empty() ? MnistTopology() : std::vector<LayerSpec>(layers_in.begin(), layers_in.end());
  if (layers.empty() || layers.front().in_size != kImagePixels) {
    throw InvalidInput("synthetic model needs a 784-input first layer");
  }

  // Teacher: sparse weights, each row's non-zeros summing to zero so
  // pre-activations stay centred although every activation is positive.
  m.teacher.layers = layers;
  for (std::size_t j = 0; j < layers.size(); ++j) {
    const auto& l = layers[j];
    const bool last = j + 1 == layers.size();
    const double gain = last ? 12.0 : 4.0;
    const double sigma = gain / std::sqrt(kWeightDensity * l.in_size);
    const double lo = l.format.min_value();
    const double hi = l.format.max_value();
    rng::Stream s(rng::Derive({seed, kTagWeights, j}));
    auto& w = m.teacher.weights.emplace_back(l.weight_count(), 0.0);
    std::vector<int> nz;
    for (int o = 0; o < l.out_size; ++o) {
      double* row = w.data() + static_cast<std::size_t>(o) * l.in_size;
      nz.clear();
      double mean = 0;
      for (int i = 0; i < l.in_size; ++i) {
        if (s.Uniform() >= kWeightDensity) continue;
        nz.push_back(i);
        mean += (row[i] = sigma * s.Normal());
      }
      if (nz.empty()) continue;
      mean /= static_cast<double>(nz.size());
      for (int i : nz) row[i] = std::clamp(row[i] - mean, lo, hi);
    }
    auto& b = m.teacher.biases.emplace_back(static_cast<std::size_t>(l.out_size));
    for (auto& x : b) x = std::clamp(0.1 * s.Normal(), lo, hi);
  }

  const Prototypes protos = MakePrototypes(seed);
  std::vector<std::uint8_t> img(kImagePixels);

  // Centre the output logits over a calibration set so every class occurs.
  {
    auto& out_bias = m.teacher.biases.back();
    std::vector<double> mean(out_bias.size(), 0.0);
    for (int n = 0; n < kCalibImages; ++n) {
      MakeImage(protos, rng::Derive({seed, kTagCalib, static_cast<std::uint64_t>(n)}), img.data());
      const auto z = Logits(m.teacher, img);
      for (std::size_t c = 0; c < z.size(); ++c) mean[c] += z[c] / kCalibImages;
    }
    const auto& fmt = layers.back().format;
    for (std::size_t c = 0; c < out_bias.size(); ++c) {
      out_bias[c] = std::clamp(out_bias[c] - mean[c], fmt.min_value(), fmt.max_value());
    }
  }
  m.network = QuantizeNetwork(m.teacher);

  // Keep images the teacher classifies with a clear margin.
  m.dataset.pixels.reserve(images * kImagePixels);
  for (std::uint64_t k = 0; m.dataset.labels.size() < images; ++k) {
    MakeImage(protos, rng::Derive({seed, kTagImage, k}), img.data());
    const auto z = Logits(m.teacher, img);
    std::vector<double> sorted = z;
    std::partial_sort(sorted.begin(), sorted.begin() + 2, sorted.end(), std::greater<>());
    if (sorted.size() > 1 && sorted[0] - sorted[1] < kMinMargin) continue;
    int label = static_cast<int>(std::max_element(z.begin(), z.end()) - z.begin());
    // A small share of labels disagree with the teacher, as with real data.
    const std::uint64_t h = rng::Derive({seed, kTagLabel, m.dataset.labels.size()});
    if (rng::ToUnit(h) < 0.025) label = (label + 1 + static_cast<int>((h >> 8) % 9)) % 10;
    m.dataset.pixels.insert(m.dataset.pixels.end(), img.begin(), img.end());
    m.dataset.labels.push_back(static_cast<std::uint8_t>(label));
  }
  return m;
}

BramArray MapWeightsToBrams(const Network& net, const PlacementAssignment& placement,
                            int num_brams) {
  net.Validate();
  if (placement.size() != static_cast<std::size_t>(TotalBrams(net.layers))) {
    throw InvalidInput("placement does not cover every logical BRAM of the network");
  }
  if (placement.num_physical() > num_brams) {
    throw CapacityExceeded("placement addresses more physical BRAMs than the chip has");
  }
  BramArray array(num_brams, kWeightsPerBram, 16);
  for (std::size_t i = 0; i < placement.size(); ++i) {
    const auto& lb = placement.logical()[i];
    const auto& w = net.weights[static_cast<std::size_t>(lb.layer)];
    const std::size_t base = static_cast<std::size_t>(lb.slot) * kWeightsPerBram;
    for (int r = 0; r < kWeightsPerBram && base + static_cast<std::size_t>(r) < w.size(); ++r) {
      array.Store(placement.physical()[i], r, w[base + static_cast<std::size_t>(r)]);
    }
  }
  return array;
}

WeightImage FaultyWeights(const Network& net, const PlacementAssignment& placement,
                          const FaultMask& mask, bool ecc_on) {
  WeightImage out = net.weights;
  if (mask.empty()) return out;
  const int num_physical = std::min(placement.num_physical(),
                                    static_cast<int>(mask.entries().back().cell.bram) + 1);
  for (int b = 0; b < num_physical; ++b) {
    const auto entries = mask.EntriesForBram(b);
    if (entries.empty()) continue;
    const int logical = placement.LogicalAt(b);
    if (logical < 0) continue;
    const auto& lb = placement.logical()[static_cast<std::size_t>(logical)];
    const auto& src = net.weights[static_cast<std::size_t>(lb.layer)];
    auto& dst = out[static_cast<std::size_t>(lb.layer)];
    const std::size_t base = static_cast<std::size_t>(lb.slot) * kWeightsPerBram;
    auto stored = [&](int row) -> std::uint16_t {
      const std::size_t idx = base + static_cast<std::size_t>(row);
      return idx < src.size() ? src[idx] : 0;
    };
    if (!ecc_on) {
      for (const auto& e : entries) {
        const std::size_t idx = base + static_cast<std::size_t>(e.cell.row);
        if (idx >= dst.size()) continue;
        const auto bit = static_cast<std::uint16_t>(1u << e.cell.col);
        dst[idx] = e.stuck ? static_cast<std::uint16_t>(dst[idx] | bit)
                           : static_cast<std::uint16_t>(dst[idx] & ~bit);
      }
      continue;
    }
    for (std::size_t k = 0; k < entries.size();) {
      const int quad = entries[k].cell.row / 4;
      std::uint64_t data = 0;
      for (int i = 0; i < 4; ++i) {
        data |= static_cast<std::uint64_t>(stored(quad * 4 + i)) << (16 * i);
      }
      ecc::Codeword72 cw = ecc::Encode64(data);
      for (; k < entries.size() && entries[k].cell.row / 4 == quad; ++k) {
        const auto& e = entries[k];
        const int pos = ecc::DataPosition((e.cell.row % 4) * 16 + e.cell.col);
        if (cw.Bit(pos) != static_cast<bool>(e.stuck)) cw.Flip(pos);
      }
      const ecc::DecodeOutcome d = ecc::Decode72(cw);
      const std::uint64_t read = d.kind == ecc::DecodeKind::kDoubleDetected ? 0 : d.data;
      for (int i = 0; i < 4; ++i) {
        const std::size_t idx = base + static_cast<std::size_t>(quad * 4 + i);
        if (idx < dst.size()) dst[idx] = static_cast<std::uint16_t>(read >> (16 * i));
      }
    }
  }
  return out;
}

std::uint16_t SigmoidQ15(std::int64_t x_q16) {
  const auto& t = SigmoidTable();
  constexpr std::int64_t kLo = -8 * 65536;
  constexpr std::int64_t kSpan = 16 * 65536;
  std::int64_t s;
  const std::int64_t u = std::max(x_q16, kLo) - kLo;
  if (u >= kSpan) {
    s = t[1024];
  } else {
    const auto idx = static_cast<std::size_t>(u >> 10);
    const std::int64_t frac = u & 1023;
    s = t[idx] + (((t[idx + 1] - t[idx]) * frac) >> 10);
  }
  return static_cast<std::uint16_t>(std::min<std::int64_t>(32767, (s + (1 << 15)) >> 16));
}

int Infer(const Network& net, const WeightImage& weights, std::span<const std::uint8_t> image) {
  std::vector<std::uint16_t> act(image.size());
  for (std::size_t i = 0; i < image.size(); ++i) act[i] = PixelQ15(image[i]);
  std::vector<std::uint16_t> next;
  std::vector<std::int64_t> acc;
  for (std::size_t j = 0; j < net.layers.size(); ++j) {
    const auto& l = net.layers[j];
    const int shift = l.format.frac_bits - 1;  // Q(frac+15) -> Q16.16
    const bool last = j + 1 == net.layers.size();
    acc.assign(static_cast<std::size_t>(l.out_size), 0);
    next.resize(static_cast<std::size_t>(l.out_size));
    for (int o = 0; o < l.out_size; ++o) {
      const std::uint16_t* w = weights[j].data() + static_cast<std::size_t>(o) * l.in_size;
      std::int64_t sum = static_cast<std::int64_t>(
                             static_cast<std::int16_t>(net.biases[j][static_cast<std::size_t>(o)]))
                         << 15;
      for (int i = 0; i < l.in_size; ++i) {
        sum += static_cast<std::int32_t>(static_cast<std::int16_t>(w[i])) *
               static_cast<std::int32_t>(act[static_cast<std::size_t>(i)]);
      }
      acc[static_cast<std::size_t>(o)] = sum;
      if (!last) {
        const std::int64_t x = shift > 0 ? (sum + (std::int64_t{1} << (shift - 1))) >> shift
                                         : sum << -shift;
        next[static_cast<std::size_t>(o)] = SigmoidQ15(x);
      }
    }
    act.swap(next);
  }
  return static_cast<int>(std::max_element(acc.begin(), acc.end()) - acc.begin());
}

int Infer(const Network& net, std::span<const std::uint8_t> image) {
  return Infer(net, net.weights, image);
}

double ErrorPercent(const Network& net, const WeightImage& weights, const Dataset& data,
                    int threads) {
  if (data.size() == 0) throw InvalidInput("empty dataset");
  std::vector<std::uint8_t> wrong(data.size(), 0);
  ParallelFor(data.size(), threads, [&](std::size_t i) {
    wrong[i] = Infer(net, weights, data.Image(i)) != data.labels[i];
  });
  std::size_t n = 0;
  for (auto w : wrong) n += w;
  return 100.0 * static_cast<double>(n) / static_cast<double>(data.size());
}

double FaultFreeErrorPercent(const Network& net, const Dataset& data, int threads) {
  return ErrorPercent(net, net.weights, data, threads);
}

EvalResult Evaluate(const Network& net, const Dataset& data, const FaultVariationMap& fvm,
                    const PlacementAssignment& placement, const EvalConfig& config) {
  net.Validate();
  data.Validate();
  if (config.runs < 1) throw InvalidInput("runs must be >= 1");
  if (placement.num_physical() != fvm.profile.num_brams) {
    throw InvalidInput("placement and fault map disagree on the BRAM count");
  }
  EvalResult r;
  for (int run = 0; run < config.runs; ++run) {
    const FaultMask mask = RealizeFaults(fvm, config.voltage_mv, config.temperature_c,
                                         RunSeed(config.run_seed, run));
    const WeightImage w = FaultyWeights(net, placement, mask, config.ecc_on);
    r.per_run_error_pct.push_back(ErrorPercent(net, w, data, config.threads));
  }
  auto sorted = r.per_run_error_pct;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  r.median_error_pct = n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
  return r;
}

std::vector<double> LayerVulnerability(const Network& net, const Dataset& data, int injections,
                                       std::uint64_t seed, int trials, int threads) {
  net.Validate();
  const std::size_t layers = net.layers.size();
  if (injections == 0) return std::vector<double>(layers, 1.0);
  if (injections < 100) throw InvalidInput("injections per layer must be 0 or >= 100");
  if (trials < 1) throw InvalidInput("trials must be >= 1");
  const double base = FaultFreeErrorPercent(net, data, threads);
  std::vector<double> increase(layers, 0.0);
  for (std::size_t j = 0; j < layers; ++j) {
    const auto& src = net.weights[j];
    std::uint64_t ones = 0;
    for (auto w : src) ones += static_cast<std::uint64_t>(std::popcount(w));
    const std::uint64_t k = std::min<std::uint64_t>(ones, static_cast<std::uint64_t>(injections));
    for (int t = 0; t < trials; ++t) {
      rng::Stream s(rng::Derive({seed, kTagInject, j, static_cast<std::uint64_t>(t)}));
      WeightImage w = net.weights;
      std::set<std::uint64_t> hit;
      while (hit.size() < k) {
        const std::uint64_t bit = s.Below(src.size() * 16);
        if (!((src[bit / 16] >> (bit % 16)) & 1u)) continue;
        if (!hit.insert(bit).second) continue;
        w[j][bit / 16] = static_cast<std::uint16_t>(w[j][bit / 16] & ~(1u << (bit % 16)));
      }
      increase[j] += ErrorPercent(net, w, data, threads) - base;
    }
    increase[j] /= trials;
  }
  double min_pos = 0;
  for (double x : increase) {
    if (x > 0 && (min_pos == 0 || x < min_pos)) min_pos = x;
  }
  std::vector<double> out(layers, 1.0);
  if (min_pos == 0) return out;
  for (std::size_t j = 0; j < layers; ++j) out[j] = std::max(0.0, increase[j]) / min_pos;
  return out;
}

}  // namespace voltsim::nn
