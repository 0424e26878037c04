#include "cxhg/checkpoint.hpp"

#include <map>

#include "binary_io.hpp"
#include "cxhg/error.hpp"

namespace cxhg {

namespace {

constexpr std::string_view kMagic = "CXHG";
constexpr std::uint32_t kVersion = 1;
constexpr std::string_view kArchName = "meta.arch";
constexpr std::string_view kAdamStep = "adam.t";
constexpr std::string_view kAdamFirst = "adam.m.";
constexpr std::string_view kAdamSecond = "adam.v.";

Tensor architecture_echo(const HourglassConfig& c) {
  std::vector<float> v{float(c.num_modules),  float(c.depth),          float(c.stem_width),
                       float(c.num_classes),  float(c.input_channels), float(c.patch_size),
                       float(c.encoding_divisor), float(c.num_codewords)};
  for (auto w : c.widths) v.push_back(float(w));
  const std::size_t n = v.size();
  return Tensor::from_vector({n}, std::move(v));
}

bool starts_with(const std::string& s, std::string_view prefix) {
  return s.compare(0, prefix.size(), prefix) == 0;
}

[[noreturn]] void shape_mismatch(const std::string& name, const Shape& expected,
                                 const Shape& found) {
  throw FormatError(FormatIssue::shape_mismatch, "checkpoint: shape mismatch for tensor " +
                                                     name + ": expected " +
                                                     shape_str(expected) + ", found " +
                                                     shape_str(found));
}

}  // namespace

const Tensor* Checkpoint::find(const std::string& name) const {
  for (const auto& [n, t] : tensors) {
    if (n == name) return &t;
  }
  return nullptr;
}

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt) {
  io::ByteWriter w;
  w.bytes(kMagic);
  w.u32(kVersion);
  w.u64(ckpt.step);
  w.u32(static_cast<std::uint32_t>(ckpt.tensors.size()));
  for (const auto& [name, t] : ckpt.tensors) {
    if (name.size() > 0xFFFF) throw Error(ErrorCode::value, "checkpoint: tensor name too long");
    w.u16(static_cast<std::uint16_t>(name.size()));
    w.bytes(name);
    w.u8(static_cast<std::uint8_t>(t.rank()));
    for (auto d : t.shape()) w.u32(static_cast<std::uint32_t>(d));
    for (double v : t.to_vector()) w.f32(static_cast<float>(v));
  }
  return std::move(w.buffer());
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
  io::ByteReader r(bytes, "checkpoint");
  if (r.remaining() < 4 || r.bytes(4) != kMagic) {
    throw FormatError(FormatIssue::bad_magic, "checkpoint: bad magic");
  }
  const std::uint32_t version = r.u32();
  if (version != kVersion) {
    throw FormatError(FormatIssue::bad_version,
                      "checkpoint: bad version " + std::to_string(version));
  }
  Checkpoint ckpt;
  ckpt.step = r.u64();
  const std::uint32_t count = r.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = r.bytes(r.u16());
    Shape shape(r.u8());
    for (auto& d : shape) d = r.u32();
    const std::size_t n = shape_numel(shape);
    r.need(n * 4);
    std::vector<float> v(n);
    for (auto& x : v) x = r.f32();
    ckpt.tensors.emplace_back(std::move(name), Tensor::from_vector(std::move(shape), std::move(v)));
  }
  if (r.remaining() != 0) {
    throw FormatError(FormatIssue::bad_value, "checkpoint: trailing bytes after tensors");
  }
  return ckpt;
}

void write_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  io::write_file(path, encode_checkpoint(ckpt));
}

Checkpoint read_checkpoint(const std::string& path) {
  return decode_checkpoint(io::read_file(path));
}

Checkpoint make_checkpoint(HourglassNetwork& net, const AdamState* adam, std::uint64_t step,
                           bool include_encoding) {
  Checkpoint ckpt;
  ckpt.step = step;
  ckpt.tensors.emplace_back(std::string(kArchName), architecture_echo(net.config()));
  net.visit_parameters([&](const std::string& name, Tensor& t) {
    if (!include_encoding && is_encoding_parameter(name)) return;
    ckpt.tensors.emplace_back(name, t.detach());
  });
  net.visit_buffers([&](const std::string& name, Tensor& t) {
    ckpt.tensors.emplace_back(name, t.detach());
  });
  if (adam) {
    if (adam->step > (std::uint64_t{1} << 24)) {
      throw Error(ErrorCode::value, "checkpoint: adam step exceeds f32-exact range");
    }
    ckpt.tensors.emplace_back(std::string(kAdamStep),
                              Tensor::full({1}, static_cast<double>(adam->step)));
    for (const auto& [name, m] : adam->first_moment) {
      if (!include_encoding && is_encoding_parameter(name)) continue;
      ckpt.tensors.emplace_back(std::string(kAdamFirst) + name, m.detach());
    }
    for (const auto& [name, v] : adam->second_moment) {
      if (!include_encoding && is_encoding_parameter(name)) continue;
      ckpt.tensors.emplace_back(std::string(kAdamSecond) + name, v.detach());
    }
  }
  return ckpt;
}

void load_checkpoint(const Checkpoint& ckpt, HourglassNetwork& net, AdamState* adam) {
  std::map<std::string, const Tensor*> stored;
  for (const auto& [name, t] : ckpt.tensors) {
    if (!stored.emplace(name, &t).second) {
      throw FormatError(FormatIssue::bad_value, "checkpoint: duplicate tensor " + name);
    }
  }

  const Tensor arch = architecture_echo(net.config());
  auto arch_it = stored.find(std::string(kArchName));
  if (arch_it == stored.end()) {
    throw FormatError(FormatIssue::bad_value, "checkpoint: missing tensor meta.arch");
  }
  if (arch_it->second->shape() != arch.shape()) {
    shape_mismatch("meta.arch", arch.shape(), arch_it->second->shape());
  }
  if (arch_it->second->to_vector() != arch.to_vector()) {
    throw FormatError(FormatIssue::shape_mismatch,
                      "checkpoint: shape mismatch: architecture differs (meta.arch)");
  }

  // Validate everything before mutating the network.
  std::map<std::string, Tensor*> targets;
  auto collect = [&](const std::string& name, Tensor& t) { targets.emplace(name, &t); };
  net.visit_parameters(collect);
  net.visit_buffers(collect);
  for (auto& [name, t] : targets) {
    auto it = stored.find(name);
    if (it == stored.end()) {
      if (is_encoding_parameter(name)) continue;
      throw FormatError(FormatIssue::bad_value, "checkpoint: missing tensor " + name);
    }
    if (it->second->shape() != t->shape()) shape_mismatch(name, t->shape(), it->second->shape());
  }
  for (const auto& [name, t] : stored) {
    if (name == kArchName || starts_with(name, "adam.")) continue;
    if (!targets.count(name)) {
      throw FormatError(FormatIssue::bad_value, "checkpoint: unexpected tensor " + name);
    }
  }

  for (auto& [name, t] : targets) {
    auto it = stored.find(name);
    if (it == stored.end()) continue;
    const bool grad = t->requires_grad();
    *t = it->second->to(t->dtype());
    if (grad) t->set_requires_grad(true);
  }

  if (!adam) return;
  auto step_it = stored.find(std::string(kAdamStep));
  if (step_it == stored.end()) return;
  AdamState restored;
  restored.beta1 = adam->beta1;
  restored.beta2 = adam->beta2;
  restored.epsilon = adam->epsilon;
  restored.step = static_cast<std::uint64_t>(step_it->second->item());
  for (const auto& [name, t] : stored) {
    const bool first = starts_with(name, kAdamFirst);
    const bool second = starts_with(name, kAdamSecond);
    if (!first && !second) continue;
    std::string param = name.substr(kAdamFirst.size());
    auto target = targets.find(param);
    if (target == targets.end()) {
      throw FormatError(FormatIssue::bad_value, "checkpoint: moment for unknown tensor " + param);
    }
    if (t->shape() != target->second->shape()) {
      shape_mismatch(name, target->second->shape(), t->shape());
    }
    auto& slot = first ? restored.first_moment : restored.second_moment;
    slot[param] = t->to(target->second->dtype());
  }
  *adam = std::move(restored);
}

}  // namespace cxhg
