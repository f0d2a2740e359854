#include "alzhinet/model.hpp"

#include "alzhinet/errors.hpp"

#include <cmath>

namespace alzhinet {

namespace {

Tensor he_normal(std::vector<Index> shape, Index fan_in, RngStream& rng) {
  Tensor w(std::move(shape));
  const double stddev = std::sqrt(2.0 / static_cast<double>(fan_in));
  for (Index i = 0; i < w.size(); ++i) w.array()[i] = rng.normal(0.0, stddev);
  w.set_requires_grad(true);
  return w;
}

Index scaled_width(Index base, double multiplier) {
  const Index w = static_cast<Index>(std::llround(base * multiplier));
  if (w < 1) throw ParamError("width multiplier collapses a layer to zero channels");
  return w;
}

void push_bn(std::vector<NamedTensor>& params, std::vector<NamedTensor>& buffers,
             const std::string& prefix, BatchNormLayer& bn) {
  params.push_back({prefix + ".gamma", bn.gamma});
  params.push_back({prefix + ".beta", bn.beta});
  buffers.push_back({prefix + ".running_mean", bn.running_mean});
  buffers.push_back({prefix + ".running_var", bn.running_var});
}

}  // namespace

Conv2dLayer Conv2dLayer::make(Index out_ch, Index in_ch, Index k, int stride, int padding,
                              bool with_bias, RngStream& rng) {
  Conv2dLayer layer;
  layer.weight = he_normal({out_ch, in_ch, k, k}, in_ch * k * k, rng);
  if (with_bias) layer.bias = Tensor::zeros({out_ch}).set_requires_grad(true);
  layer.stride = stride;
  layer.padding = padding;
  return layer;
}

Tensor Conv2dLayer::operator()(const Tensor& x) const {
  return bias ? conv2d(x, weight, *bias, stride, padding) : conv2d(x, weight, stride, padding);
}

Conv3dLayer Conv3dLayer::make(Index out_ch, Index in_ch, Index k, int stride, int padding,
                              bool with_bias, RngStream& rng) {
  Conv3dLayer layer;
  layer.weight = he_normal({out_ch, in_ch, k, k, k}, in_ch * k * k * k, rng);
  if (with_bias) layer.bias = Tensor::zeros({out_ch}).set_requires_grad(true);
  layer.stride = stride;
  layer.padding = padding;
  return layer;
}

Tensor Conv3dLayer::operator()(const Tensor& x) const {
  return bias ? conv3d(x, weight, *bias, stride, padding) : conv3d(x, weight, stride, padding);
}

BatchNormLayer BatchNormLayer::make(Index channels) {
  BatchNormLayer layer;
  layer.gamma = Tensor::full({channels}, 1.0).set_requires_grad(true);
  layer.beta = Tensor::zeros({channels}).set_requires_grad(true);
  layer.running_mean = Tensor::zeros({channels});
  layer.running_var = Tensor::full({channels}, 1.0);
  return layer;
}

Tensor BatchNormLayer::operator()(const Tensor& x, bool training) {
  return batch_norm(x, running_mean, running_var, gamma, beta, training, momentum, eps);
}

DenseLayer DenseLayer::make(Index out_features, Index in_features, RngStream& rng) {
  DenseLayer layer;
  layer.weight = he_normal({out_features, in_features}, in_features, rng);
  layer.bias = Tensor::zeros({out_features}).set_requires_grad(true);
  return layer;
}

Tensor DenseLayer::operator()(const Tensor& x) const { return dense(x, weight, bias); }

// --- TwoDNet ----------------------------------------------------------

TwoDNet::TwoDNet(const TwoDNetConfig& cfg, std::uint64_t init_seed) : cfg_(cfg) {
  if (cfg.num_classes < 2) throw ParamError("num_classes must be at least 2");
  if (scaled_width(64, cfg.width_multiplier) < 4)
    throw ParamError("width_multiplier * 64 must be at least 4");
  if (cfg.blocks_per_stage.size() != 4) throw ParamError("expected four residual stages");

  RngStream rng(splitmix64_mix(init_seed) ^ 0x2d2d2d2dull);
  const Index widths[4] = {scaled_width(64, cfg.width_multiplier),
                           scaled_width(128, cfg.width_multiplier),
                           scaled_width(256, cfg.width_multiplier),
                           scaled_width(512, cfg.width_multiplier)};

  stem_ = Conv2dLayer::make(widths[0], cfg.input_channels, 7, 2, 3, /*with_bias=*/false, rng);
  stem_bn_ = BatchNormLayer::make(widths[0]);

  Index in_ch = widths[0];
  for (int s = 0; s < 4; ++s) {
    std::vector<Block> stage;
    for (int b = 0; b < cfg.blocks_per_stage[static_cast<std::size_t>(s)]; ++b) {
      const int stride = (s > 0 && b == 0) ? 2 : 1;
      Block block;
      block.conv1 = Conv2dLayer::make(widths[s], in_ch, 3, stride, 1, false, rng);
      block.bn1 = BatchNormLayer::make(widths[s]);
      block.conv2 = Conv2dLayer::make(widths[s], widths[s], 3, 1, 1, false, rng);
      block.bn2 = BatchNormLayer::make(widths[s]);
      if (stride != 1 || in_ch != widths[s]) {
        block.down_conv = Conv2dLayer::make(widths[s], in_ch, 1, stride, 0, false, rng);
        block.down_bn = BatchNormLayer::make(widths[s]);
      }
      in_ch = widths[s];
      stage.push_back(std::move(block));
    }
    stages_.push_back(std::move(stage));
  }
  fc_ = DenseLayer::make(cfg.num_classes, widths[3], rng);
}

Tensor TwoDNet::forward(const Tensor& images, bool training) {
  Tensor x = relu(stem_bn_(stem_(images), training));
  for (auto& stage : stages_)
    for (auto& block : stage) {
      Tensor identity = x;
      Tensor y = relu(block.bn1(block.conv1(x), training));
      y = block.bn2(block.conv2(y), training);
      if (block.down_conv) identity = (*block.down_bn)((*block.down_conv)(x), training);
      x = relu(add(y, identity));
    }
  Tensor pooled = adaptive_avg_pool_to_one(x);
  Tensor flat = reshape(pooled, {pooled.dim(0), pooled.dim(1)});
  return fc_(flat);
}

std::vector<NamedTensor> TwoDNet::parameters() {
  std::vector<NamedTensor> params, buffers;
  params.push_back({"stem.conv.weight", stem_.weight});
  push_bn(params, buffers, "stem.bn", stem_bn_);
  for (std::size_t s = 0; s < stages_.size(); ++s)
    for (std::size_t b = 0; b < stages_[s].size(); ++b) {
      const std::string p = "stage" + std::to_string(s + 1) + ".block" + std::to_string(b);
      Block& block = stages_[s][b];
      params.push_back({p + ".conv1.weight", block.conv1.weight});
      push_bn(params, buffers, p + ".bn1", block.bn1);
      params.push_back({p + ".conv2.weight", block.conv2.weight});
      push_bn(params, buffers, p + ".bn2", block.bn2);
      if (block.down_conv) {
        params.push_back({p + ".down.conv.weight", block.down_conv->weight});
        push_bn(params, buffers, p + ".down.bn", *block.down_bn);
      }
    }
  params.push_back({"fc.weight", fc_.weight});
  params.push_back({"fc.bias", fc_.bias});
  return params;
}

std::vector<NamedTensor> TwoDNet::buffers() {
  std::vector<NamedTensor> params, buffers;
  push_bn(params, buffers, "stem.bn", stem_bn_);
  for (std::size_t s = 0; s < stages_.size(); ++s)
    for (std::size_t b = 0; b < stages_[s].size(); ++b) {
      const std::string p = "stage" + std::to_string(s + 1) + ".block" + std::to_string(b);
      Block& block = stages_[s][b];
      push_bn(params, buffers, p + ".bn1", block.bn1);
      push_bn(params, buffers, p + ".bn2", block.bn2);
      if (block.down_bn) push_bn(params, buffers, p + ".down.bn", *block.down_bn);
    }
  return buffers;
}

std::vector<NamedTensor> TwoDNet::state() {
  std::vector<NamedTensor> all = parameters();
  for (auto& buf : buffers()) all.push_back(std::move(buf));
  return all;
}

Index TwoDNet::param_count(bool exclude_head) {
  Index total = 0;
  for (const auto& [name, tensor] : parameters()) {
    if (exclude_head && name.rfind("fc.", 0) == 0) continue;
    total += tensor.size();
  }
  return total;
}

// --- ThreeDNet --------------------------------------------------------

ThreeDNet::ThreeDNet(const ThreeDNetConfig& cfg, std::uint64_t init_seed) : cfg_(cfg) {
  if (cfg.num_classes < 2) throw ParamError("num_classes must be at least 2");
  RngStream rng(splitmix64_mix(init_seed) ^ 0x3d3d3d3dull);
  const Index c1 = scaled_width(64, cfg.width_multiplier);
  const Index c2 = scaled_width(128, cfg.width_multiplier);
  const Index c3 = scaled_width(256, cfg.width_multiplier);
  const Index hidden = scaled_width(512, cfg.width_multiplier);

  conv1_ = Conv3dLayer::make(c1, cfg.input_channels, 3, 1, 1, false, rng);
  bn1_ = BatchNormLayer::make(c1);
  conv2_ = Conv3dLayer::make(c2, c1, 3, 1, 1, false, rng);
  bn2_ = BatchNormLayer::make(c2);
  conv3_ = Conv3dLayer::make(c3, c2, 3, 1, 1, false, rng);
  bn3_ = BatchNormLayer::make(c3);
  fc1_ = DenseLayer::make(hidden, c3, rng);
  fc2_ = DenseLayer::make(cfg.num_classes, hidden, rng);
}

Tensor ThreeDNet::forward(const Tensor& volumes, bool training) {
  Tensor x = relu(bn1_(conv1_(volumes), training));
  x = relu(bn2_(conv2_(x), training));
  x = relu(bn3_(conv3_(x), training));
  x = avg_pool(x, pool_kernel_);
  x = adaptive_avg_pool_to_one(x);
  Tensor flat = reshape(x, {x.dim(0), x.dim(1)});
  return fc2_(relu(fc1_(flat)));
}

std::vector<NamedTensor> ThreeDNet::parameters() {
  std::vector<NamedTensor> params, buffers;
  params.push_back({"conv1.weight", conv1_.weight});
  push_bn(params, buffers, "bn1", bn1_);
  params.push_back({"conv2.weight", conv2_.weight});
  push_bn(params, buffers, "bn2", bn2_);
  params.push_back({"conv3.weight", conv3_.weight});
  push_bn(params, buffers, "bn3", bn3_);
  params.push_back({"fc1.weight", fc1_.weight});
  params.push_back({"fc1.bias", fc1_.bias});
  params.push_back({"fc2.weight", fc2_.weight});
  params.push_back({"fc2.bias", fc2_.bias});
  return params;
}

std::vector<NamedTensor> ThreeDNet::buffers() {
  std::vector<NamedTensor> params, buffers;
  push_bn(params, buffers, "bn1", bn1_);
  push_bn(params, buffers, "bn2", bn2_);
  push_bn(params, buffers, "bn3", bn3_);
  return buffers;
}

std::vector<NamedTensor> ThreeDNet::state() {
  std::vector<NamedTensor> all = parameters();
  for (auto& buf : buffers()) all.push_back(std::move(buf));
  return all;
}

Index ThreeDNet::param_count(bool exclude_head) {
  Index total = 0;
  for (const auto& [name, tensor] : parameters()) {
    if (exclude_head && name.rfind("fc2.", 0) == 0) continue;
    total += tensor.size();
  }
  return total;
}

std::vector<LayerDesc> ThreeDNet::manifest() const {
  const Index c1 = conv1_.weight.dim(0), c2 = conv2_.weight.dim(0), c3 = conv3_.weight.dim(0);
  return {
      {"conv3d", cfg_.input_channels, c1, 3},
      {"batch_norm", 0, c1, 0},
      {"conv3d", c1, c2, 3},
      {"batch_norm", 0, c2, 0},
      {"conv3d", c2, c3, 3},
      {"batch_norm", 0, c3, 0},
      {"avg_pool", 0, 0, pool_kernel_},
      {"adaptive_avg_pool", 0, 0, 1},
      {"dense", fc1_.weight.dim(1), fc1_.weight.dim(0), 0},
      {"dense", fc2_.weight.dim(1), fc2_.weight.dim(0), 0},
  };
}

// --- HybridModel ------------------------------------------------------

HybridModel::HybridModel(TwoDNetConfig two_d_cfg, ThreeDNetConfig three_d_cfg, double alpha,
                         double beta, std::uint64_t init_seed)
    : two_d_(two_d_cfg, splitmix64_mix(init_seed) ^ 0x2dull),
      three_d_(three_d_cfg, splitmix64_mix(init_seed) ^ 0x3dull),
      alpha_(alpha),
      beta_(beta) {
  set_weights(alpha, beta);
}

void HybridModel::set_weights(double alpha, double beta) {
  if (alpha < 0.0 || beta < 0.0 || alpha + beta <= 0.0)
    throw ParamError("hybrid weights need alpha >= 0, beta >= 0, alpha + beta > 0");
  alpha_ = alpha;
  beta_ = beta;
}

HybridOutput HybridModel::forward(const Tensor& images, const Tensor& volumes, bool training) {
  if (images.dim(0) != volumes.dim(0))
    throw ShapeError("image and volume batches are misaligned: " + shape_str(images.shape()) +
                     " vs " + shape_str(volumes.shape()));
  HybridOutput out;
  out.o2d = two_d_.forward(images, training);
  out.o3d = three_d_.forward(volumes, training);
  out.oh = add(scale(out.o2d, alpha_), scale(out.o3d, beta_));
  out.s2d = softmax(out.o2d);
  out.s3d = softmax(out.o3d);
  return out;
}

std::vector<NamedTensor> HybridModel::parameters() {
  std::vector<NamedTensor> all;
  for (auto& [name, tensor] : two_d_.parameters()) all.push_back({"2d." + name, tensor});
  for (auto& [name, tensor] : three_d_.parameters()) all.push_back({"3d." + name, tensor});
  return all;
}

std::vector<NamedTensor> HybridModel::state() {
  std::vector<NamedTensor> all;
  for (auto& [name, tensor] : two_d_.state()) all.push_back({"2d." + name, tensor});
  for (auto& [name, tensor] : three_d_.state()) all.push_back({"3d." + name, tensor});
  return all;
}

std::vector<NamedTensor> snapshot(const std::vector<NamedTensor>& state) {
  std::vector<NamedTensor> copy;
  copy.reserve(state.size());
  for (const auto& [name, tensor] : state) copy.push_back({name, tensor.detach()});
  return copy;
}

void restore(std::vector<NamedTensor>& live, const std::vector<NamedTensor>& saved) {
  if (live.size() != saved.size()) throw ContractError("snapshot size mismatch");
  for (std::size_t i = 0; i < live.size(); ++i) {
    if (live[i].name != saved[i].name) throw ContractError("snapshot name mismatch at " + live[i].name);
    live[i].tensor.array() = saved[i].tensor.array();
  }
}

}  // namespace alzhinet
