#pragma once

#include "alzhinet/ops.hpp"
#include "alzhinet/rng.hpp"
#include "alzhinet/tensor.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace alzhinet {

struct NamedTensor {
  std::string name;
  Tensor tensor;  // shared handle: gradients and updates land in the model
};

// --- layers -----------------------------------------------------------

struct Conv2dLayer {
  Tensor weight;
  std::optional<Tensor> bias;
  int stride = 1;
  int padding = 0;

  /// He-normal (fan-in) weights; layers followed by batch norm carry no bias.
  static Conv2dLayer make(Index out_ch, Index in_ch, Index k, int stride, int padding,
                          bool with_bias, RngStream& rng);
  Tensor operator()(const Tensor& x) const;
};

struct Conv3dLayer {
  Tensor weight;
  std::optional<Tensor> bias;
  int stride = 1;
  int padding = 1;

  static Conv3dLayer make(Index out_ch, Index in_ch, Index k, int stride, int padding,
                          bool with_bias, RngStream& rng);
  Tensor operator()(const Tensor& x) const;
};

struct BatchNormLayer {
  Tensor gamma, beta, running_mean, running_var;
  double momentum = 0.1;
  double eps = 1e-5;

  static BatchNormLayer make(Index channels);
  Tensor operator()(const Tensor& x, bool training);
};

struct DenseLayer {
  Tensor weight, bias;

  static DenseLayer make(Index out_features, Index in_features, RngStream& rng);
  Tensor operator()(const Tensor& x) const;
};

// --- networks ---------------------------------------------------------

struct TwoDNetConfig {
  int num_classes = 4;
  double width_multiplier = 1.0;  // scales the canonical {64,128,256,512} stage widths
  std::vector<int> blocks_per_stage = {2, 2, 2, 2};
  int input_channels = 3;
};

/// Compact residual classifier: 7x7/2 stem, four basic-block stages with
/// 1x1/2 projection shortcuts, global average pooling, one dense head.
class TwoDNet {
 public:
  TwoDNet(const TwoDNetConfig& cfg, std::uint64_t init_seed);

  Tensor forward(const Tensor& images, bool training);
  std::vector<NamedTensor> parameters();
  std::vector<NamedTensor> buffers();
  /// Parameters followed by buffers; the checkpoint manifest.
  std::vector<NamedTensor> state();
  Index param_count(bool exclude_head = false);
  const TwoDNetConfig& config() const { return cfg_; }

 private:
  struct Block {
    Conv2dLayer conv1;
    BatchNormLayer bn1;
    Conv2dLayer conv2;
    BatchNormLayer bn2;
    std::optional<Conv2dLayer> down_conv;
    std::optional<BatchNormLayer> down_bn;
  };

  TwoDNetConfig cfg_;
  Conv2dLayer stem_;
  BatchNormLayer stem_bn_;
  std::vector<std::vector<Block>> stages_;
  DenseLayer fc_;
};

struct ThreeDNetConfig {
  int num_classes = 4;
  double width_multiplier = 1.0;  // scales {64,128,256} and the hidden 512
  int input_channels = 3;
};

/// One row of the encoder layout, for programmatic structure checks.
struct LayerDesc {
  std::string type;
  Index in_channels = 0;   // 0 where not applicable
  Index out_channels = 0;
  Index kernel = 0;
};

/// Volumetric encoder: three 3x3x3 conv+BN+ReLU stages, average pool k3,
/// global pooling, then dense 256->512 (ReLU) and dense 512->classes.
class ThreeDNet {
 public:
  ThreeDNet(const ThreeDNetConfig& cfg, std::uint64_t init_seed);

  Tensor forward(const Tensor& volumes, bool training);
  std::vector<NamedTensor> parameters();
  std::vector<NamedTensor> buffers();
  std::vector<NamedTensor> state();
  Index param_count(bool exclude_head = false);
  std::vector<LayerDesc> manifest() const;
  const ThreeDNetConfig& config() const { return cfg_; }

 private:
  ThreeDNetConfig cfg_;
  Conv3dLayer conv1_, conv2_, conv3_;
  BatchNormLayer bn1_, bn2_, bn3_;
  int pool_kernel_ = 3;
  DenseLayer fc1_, fc2_;
};

struct HybridOutput {
  Tensor o2d, o3d, oh;  // logits
  Tensor s2d, s3d;      // softmax probabilities
};

/// Two classifiers over the same samples; the combined logits are
/// oh = alpha * o2d + beta * o3d, elementwise and in that exact expression.
class HybridModel {
 public:
  HybridModel(TwoDNetConfig two_d_cfg, ThreeDNetConfig three_d_cfg, double alpha, double beta,
              std::uint64_t init_seed);

  HybridOutput forward(const Tensor& images, const Tensor& volumes, bool training);

  TwoDNet& two_d() { return two_d_; }
  ThreeDNet& three_d() { return three_d_; }
  double alpha() const { return alpha_; }
  double beta() const { return beta_; }
  void set_weights(double alpha, double beta);

  std::vector<NamedTensor> parameters();
  /// "2d."/"3d."-prefixed parameters and buffers of both nets.
  std::vector<NamedTensor> state();

 private:
  TwoDNet two_d_;
  ThreeDNet three_d_;
  double alpha_, beta_;
};

// --- checkpoints ------------------------------------------------------
//
// AZWT container: magic "AZWT", u32 version = 1, u32 tensor count; per
// tensor u16 name length, UTF-8 name, u8 rank, u32 dims[rank], raw
// little-endian f64 payload. Round-trips are bit exact.

void save_weights(const std::vector<NamedTensor>& state, const std::filesystem::path& path);

/// Loads a checkpoint whose manifest (names and shapes) must match `state`
/// exactly; the error names the first offending tensor.
void load_weights(std::vector<NamedTensor> state, const std::filesystem::path& path);

/// Reads just the tensor names of a checkpoint (cheap manifest probe).
std::vector<std::string> checkpoint_names(const std::filesystem::path& path);

/// Deep copy of a state vector (for best-epoch snapshots).
std::vector<NamedTensor> snapshot(const std::vector<NamedTensor>& state);
/// Writes snapshot values back into live tensors, matched by position.
void restore(std::vector<NamedTensor>& live, const std::vector<NamedTensor>& saved);

}  // namespace alzhinet
