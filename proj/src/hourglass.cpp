#include "cxhg/hourglass.hpp"

#include <bit>

#include "cxhg/error.hpp"
#include "cxhg/ops.hpp"

namespace cxhg {

namespace {
[[noreturn]] void invalid(const std::string& what) {
  throw Error(ErrorCode::config, "invalid hourglass config: " + what);
}
}  // namespace

void HourglassConfig::validate() const {
  if (num_modules == 0) invalid("num_modules must be positive");
  if (depth == 0) invalid("depth must be positive");
  if (widths.size() != depth) {
    invalid("widths has " + std::to_string(widths.size()) + " entries, depth is " +
            std::to_string(depth));
  }
  for (auto w : widths) {
    if (w == 0 || w % 2 != 0) invalid("every width must be positive and even");
  }
  if (stem_width == 0) invalid("stem_width must be positive");
  if (num_classes == 0 || num_classes > 255) invalid("num_classes must be in [1, 255]");
  if (input_channels == 0) invalid("input_channels must be positive");
  if (num_codewords == 0) invalid("num_codewords must be positive");
  if (!std::has_single_bit(patch_size)) invalid("patch_size must be a power of two");
  if (patch_size % (std::size_t{1} << depth) != 0) {
    invalid("patch_size must be divisible by 2^depth");
  }
  if (!std::has_single_bit(encoding_divisor) || encoding_divisor < 2 ||
      encoding_divisor > (std::size_t{1} << depth)) {
    invalid("encoding_divisor must be a power of two in [2, 2^depth]");
  }
}

std::size_t HourglassConfig::encoding_level() const {
  return static_cast<std::size_t>(std::countr_zero(encoding_divisor));
}

bool is_encoding_parameter(const std::string& name) {
  return name.find(".codebook.") != std::string::npos ||
         name.find(".encoding") != std::string::npos;
}

ContextualHourglassModule::ContextualHourglassModule(const HourglassConfig& config,
                                                     SplitMix64& rng)
    : depth_(config.depth),
      encoding_level_(config.encoding_level()),
      input_width_(config.widths[0]) {
  const auto& w = config.widths;
  for (std::size_t l = 0; l < depth_; ++l) {
    const std::size_t in = l == 0 ? input_width_ : w[l - 1];
    skip_.emplace_back(in, w[l], rng);
    down_.emplace_back(in, w[l], rng);
  }
  bottom_ = ResidualBlock(w[depth_ - 1], w[depth_ - 1], rng);
  for (std::size_t l = 0; l < depth_; ++l) {
    const std::size_t out = l == 0 ? input_width_ : w[l - 1];
    up_.emplace_back(w[l], out, rng);
  }
  output_block_ = ResidualBlock(input_width_, input_width_, rng);
  head_ = Conv2d(input_width_, config.num_classes, 1, {1, 0}, rng);
  feature_remap_ = Conv2d(input_width_, input_width_, 1, {1, 0}, rng);
  logit_remap_ = Conv2d(config.num_classes, input_width_, 1, {1, 0}, rng);
  const std::size_t enc_channels = w[encoding_level_ - 1];
  codebook_ = EncodingCodebook(config.num_codewords, enc_channels, rng);
  heads_.emplace_back(enc_channels, config.num_classes, rng);
  heads_.emplace_back(enc_channels, config.num_classes, rng);
}

Tensor ContextualHourglassModule::apply_encoding(const Tensor& features, std::size_t layer,
                                                 EncodingUse use,
                                                 std::vector<Tensor>& se_probs) {
  if (use == EncodingUse::bypassed) return features;
  EncodedSemantics enc = encode(features, codebook_);
  se_probs.push_back(presence_logits(enc, heads_[layer]));
  return attention_scale(features, enc, heads_[layer]);
}

ModuleOutput ContextualHourglassModule::forward(const Tensor& input, Mode mode,
                                                EncodingUse use) {
  if (input.rank() != 4 || input.dim(1) != input_width_) {
    throw Error(ErrorCode::shape, "hourglass module expects width " +
                                      std::to_string(input_width_) + ", got " +
                                      shape_str(input.shape()));
  }
  ModuleOutput out;
  std::vector<Tensor> skips(depth_);
  Tensor cur = input;
  for (std::size_t l = 0; l < depth_; ++l) {
    skips[l] = skip_[l].forward(cur, mode);
    cur = down_[l].forward(max_pool2d(cur), mode);
    if (l + 1 == encoding_level_) cur = apply_encoding(cur, 0, use, out.se_probs);
  }
  cur = bottom_.forward(cur, mode);
  if (encoding_level_ == depth_) cur = apply_encoding(cur, 1, use, out.se_probs);
  for (std::size_t l = depth_; l-- > 0;) {
    cur = up_[l].forward(add(bilinear_upsample(cur, 2), skips[l]), mode);
    if (l == encoding_level_ && l < depth_) cur = apply_encoding(cur, 1, use, out.se_probs);
  }
  Tensor features = output_block_.forward(cur, mode);
  out.logits = head_.forward(features);
  out.features = add(add(input, feature_remap_.forward(features)),
                     logit_remap_.forward(out.logits));
  return out;
}

void ContextualHourglassModule::visit_parameters(const std::string& prefix,
                                                 const TensorVisitor& visit) {
  for (std::size_t l = 0; l < depth_; ++l) {
    const std::string lv = std::to_string(l);
    skip_[l].visit_parameters(prefix + ".skip" + lv, visit);
    down_[l].visit_parameters(prefix + ".down" + lv, visit);
  }
  bottom_.visit_parameters(prefix + ".bottom", visit);
  for (std::size_t l = 0; l < depth_; ++l) {
    up_[l].visit_parameters(prefix + ".up" + std::to_string(l), visit);
  }
  output_block_.visit_parameters(prefix + ".out", visit);
  head_.visit_parameters(prefix + ".head", visit);
  feature_remap_.visit_parameters(prefix + ".feature_remap", visit);
  logit_remap_.visit_parameters(prefix + ".logit_remap", visit);
  codebook_.visit_parameters(prefix + ".codebook", visit);
  heads_[0].visit_parameters(prefix + ".encoding1", visit);
  heads_[1].visit_parameters(prefix + ".encoding2", visit);
}

void ContextualHourglassModule::visit_buffers(const std::string& prefix,
                                              const TensorVisitor& visit) {
  for (std::size_t l = 0; l < depth_; ++l) {
    const std::string lv = std::to_string(l);
    skip_[l].visit_buffers(prefix + ".skip" + lv, visit);
    down_[l].visit_buffers(prefix + ".down" + lv, visit);
  }
  bottom_.visit_buffers(prefix + ".bottom", visit);
  for (std::size_t l = 0; l < depth_; ++l) {
    up_[l].visit_buffers(prefix + ".up" + std::to_string(l), visit);
  }
  output_block_.visit_buffers(prefix + ".out", visit);
}

HourglassNetwork::HourglassNetwork(const HourglassConfig& config, std::uint64_t seed)
    : config_(config) {
  config_.validate();
  SplitMix64 rng(seed);
  stem_conv_ = Conv2d(config_.input_channels, config_.stem_width, 3, {1, 1}, rng);
  stem_block_ = ResidualBlock(config_.stem_width, config_.widths[0], rng);
  for (std::size_t m = 0; m < config_.num_modules; ++m) modules_.emplace_back(config_, rng);
}

NetworkOutput HourglassNetwork::forward(const Tensor& image, Mode mode, EncodingUse use) {
  if (image.rank() != 4 || image.dim(1) != config_.input_channels ||
      image.dim(2) != config_.patch_size || image.dim(3) != config_.patch_size) {
    throw Error(ErrorCode::shape,
                "network expects (B, " + std::to_string(config_.input_channels) + ", " +
                    std::to_string(config_.patch_size) + ", " +
                    std::to_string(config_.patch_size) + "), got " +
                    shape_str(image.shape()));
  }
  NetworkOutput out;
  Tensor features = stem_block_.forward(stem_conv_.forward(image), mode);
  for (auto& module : modules_) {
    ModuleOutput mo = module.forward(features, mode, use);
    features = mo.features;
    out.fused_logits = out.fused_logits.defined() ? add(out.fused_logits, mo.logits)
                                                  : mo.logits;
    out.per_module_logits.push_back(std::move(mo.logits));
    for (auto& p : mo.se_probs) out.se_probs.push_back(std::move(p));
  }
  return out;
}

void HourglassNetwork::visit_parameters(const TensorVisitor& visit) {
  stem_conv_.visit_parameters("stem.conv", visit);
  stem_block_.visit_parameters("stem.block", visit);
  for (std::size_t m = 0; m < modules_.size(); ++m) {
    modules_[m].visit_parameters("module" + std::to_string(m), visit);
  }
}

void HourglassNetwork::visit_buffers(const TensorVisitor& visit) {
  stem_block_.visit_buffers("stem.block", visit);
  for (std::size_t m = 0; m < modules_.size(); ++m) {
    modules_[m].visit_buffers("module" + std::to_string(m), visit);
  }
}

std::vector<std::pair<std::string, Tensor>> HourglassNetwork::named_parameters() {
  std::vector<std::pair<std::string, Tensor>> out;
  visit_parameters([&](const std::string& name, Tensor& t) { out.emplace_back(name, t); });
  return out;
}

std::vector<std::pair<std::string, Tensor>> HourglassNetwork::named_buffers() {
  std::vector<std::pair<std::string, Tensor>> out;
  visit_buffers([&](const std::string& name, Tensor& t) { out.emplace_back(name, t); });
  return out;
}

void HourglassNetwork::to(DType dtype) {
  visit_parameters([dtype](const std::string&, Tensor& t) {
    if (t.dtype() == dtype) return;
    t = t.to(dtype);
    t.set_requires_grad(true);
  });
  visit_buffers([dtype](const std::string&, Tensor& t) {
    if (t.dtype() != dtype) t = t.to(dtype);
  });
}

void HourglassNetwork::zero_grad() {
  visit_parameters([](const std::string&, Tensor& t) { t.zero_grad(); });
}

Labels predict_labels(const Tensor& logits) {
  if (logits.rank() != 4 || logits.dim(1) == 0) {
    throw Error(ErrorCode::shape, "predict_labels: expected (B, D, H, W), got " +
                                      shape_str(logits.shape()));
  }
  const std::size_t batch = logits.dim(0), classes = logits.dim(1);
  const std::size_t plane = logits.dim(2) * logits.dim(3);
  Labels out(batch, logits.dim(2), logits.dim(3));
  dispatch(logits.dtype(), [&](auto tag) {
    using T = decltype(tag);
    auto v = logits.values<T>();
    for (std::size_t b = 0; b < batch; ++b) {
      const T* base = v.data() + b * classes * plane;
      for (std::size_t i = 0; i < plane; ++i) {
        std::size_t best = 0;
        for (std::size_t c = 1; c < classes; ++c) {
          if (base[c * plane + i] > base[best * plane + i]) best = c;
        }
        out.ids[b * plane + i] = static_cast<std::uint8_t>(best);
      }
    }
  });
  return out;
}

}  // namespace cxhg
