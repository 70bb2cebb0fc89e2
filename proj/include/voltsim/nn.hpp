#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "voltsim/bram_sim.hpp"
#include "voltsim/fault_map.hpp"

namespace voltsim {

class PlacementAssignment;

namespace nn {

// 16-bit two's complement fixed point: 1 sign bit, `digit` integer bits,
// `frac` fraction bits.
struct QuantFormat {
  int sign_bits = 1;
  int digit_bits = 0;
  int frac_bits = 15;

  void Validate() const;
  double max_value() const;
  double min_value() const;
  std::string ToString() const;

  friend bool operator==(const QuantFormat&, const QuantFormat&) = default;
};

// Round to nearest (ties away from zero), saturating.
std::uint16_t Quantize(double value, const QuantFormat& format);
double Dequantize(std::uint16_t word, const QuantFormat& format);

inline constexpr int kWeightsPerBram = 1024;

struct LayerSpec {
  int index = 0;
  int in_size = 0;
  int out_size = 0;
  QuantFormat format;

  std::size_t weight_count() const {
    return static_cast<std::size_t>(in_size) * static_cast<std::size_t>(out_size);
  }
  int bram_count() const {
    return static_cast<int>((weight_count() + kWeightsPerBram - 1) / kWeightsPerBram);
  }

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

// Reference topology: 784-1024-512-256-128-10 with Q(1,0,15) for the first four
// weight sets and Q(1,4,11) for the last.
std::vector<LayerSpec> MnistTopology();
int TotalBrams(std::span<const LayerSpec> layers);

// Weights are row-major [out][in]. Biases are kept outside the BRAMs.
struct Network {
  std::vector<LayerSpec> layers;
  std::vector<std::vector<std::uint16_t>> weights;
  std::vector<std::vector<std::uint16_t>> biases;

  void Validate() const;
  friend bool operator==(const Network&, const Network&) = default;
};

void SaveNetwork(std::ostream& out, const Network& net);
Network LoadNetwork(std::istream& in);
void SaveNetwork(const std::string& path, const Network& net);
Network LoadNetwork(const std::string& path);

// Fraction of weight bits that are 0.
double BitSparsity(const Network& net);

inline constexpr int kImageSide = 28;
inline constexpr int kImagePixels = kImageSide * kImageSide;

struct Dataset {
  std::vector<std::uint8_t> pixels;  // count x 784
  std::vector<std::uint8_t> labels;

  std::size_t size() const { return labels.size(); }
  std::span<const std::uint8_t> Image(std::size_t i) const {
    return {pixels.data() + i * kImagePixels, static_cast<std::size_t>(kImagePixels)};
  }
  void Validate() const;
};

// IDX containers (0x00000803 images, 0x00000801 labels).
Dataset LoadIdx(std::istream& images, std::istream& labels);
Dataset LoadIdx(const std::string& images_path, const std::string& labels_path);
void SaveIdx(std::ostream& images, std::ostream& labels, const Dataset& data);
void SaveIdx(const std::string& images_path, const std::string& labels_path,
             const Dataset& data);

// Double-precision network used as a reference.
struct FloatNetwork {
  std::vector<LayerSpec> layers;
  std::vector<std::vector<double>> weights;
  std::vector<std::vector<double>> biases;
};

FloatNetwork ToFloat(const Network& net);
Network QuantizeNetwork(const FloatNetwork& net);
int InferFloat(const FloatNetwork& net, std::span<const std::uint8_t> image);

struct SyntheticModel {
  FloatNetwork teacher;
  Network network;
  Dataset dataset;
};

// Deterministic stand-in for a trained classifier: random zero-mean teacher
// weights, images built from noisy class prototypes, labels from the teacher
// with a small fraction relabelled.
SyntheticModel MakeSyntheticModel(std::uint64_t seed, std::size_t images,
                                  std::span<const LayerSpec> layers = {});

// Weights as read back from the BRAMs, flat per layer.
using WeightImage = std::vector<std::vector<std::uint16_t>>;

// Lays the weights into BRAM rows (layer-major, row-major within a layer,
// one 16-bit weight per row, 1024 per BRAM) at the physical BRAMs chosen by
// `placement`. Unused rows hold 0.
BramArray MapWeightsToBrams(const Network& net, const PlacementAssignment& placement,
                            int num_brams);

// Weights after reading through a fault mask. With `ecc_on` every four rows
// of a BRAM form one 64-bit SECDED word; detected-uncorrectable words read as
// zero.
WeightImage FaultyWeights(const Network& net, const PlacementAssignment& placement,
                          const FaultMask& mask, bool ecc_on);

// Fixed-point forward pass; returns the argmax class (lowest index on ties).
int Infer(const Network& net, const WeightImage& weights, std::span<const std::uint8_t> image);
int Infer(const Network& net, std::span<const std::uint8_t> image);

// Misclassified percentage over the dataset.
double ErrorPercent(const Network& net, const WeightImage& weights, const Dataset& data,
                    int threads = 1);
double FaultFreeErrorPercent(const Network& net, const Dataset& data, int threads = 1);

struct EvalConfig {
  int voltage_mv = 540;
  double temperature_c = 50;
  bool ecc_on = false;
  int runs = 1;
  std::uint64_t run_seed = 0;
  int threads = 1;
};

struct EvalResult {
  std::vector<double> per_run_error_pct;
  double median_error_pct = 0;
};

EvalResult Evaluate(const Network& net, const Dataset& data, const FaultVariationMap& fvm,
                    const PlacementAssignment& placement, const EvalConfig& config);

// Sigmoid of a Q16.16 input as a Q15 activation.
std::uint16_t SigmoidQ15(std::int64_t x_q16);

// Error increase when `injections` stuck-at-0 faults hit stored 1 bits of one
// weight set at a time, normalized by the smallest positive increase.
std::vector<double> LayerVulnerability(const Network& net, const Dataset& data,
                                       int injections, std::uint64_t seed, int trials = 1,
                                       int threads = 1);

}  // namespace nn
}  // namespace voltsim
