#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cxhg/hourglass.hpp"
#include "cxhg/optim.hpp"

namespace cxhg {

/// CXHG container (little-endian):
///   "CXHG" | version u32 = 1 | step u64 | tensor count u32 |
///   per tensor: name length u16, UTF-8 name, rank u8, dims u32 x rank, f32 data
struct Checkpoint {
  std::uint64_t step = 0;
  NamedTensors tensors;

  const Tensor* find(const std::string& name) const;
};

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes);

void write_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint(const std::string& path);

/// Parameters, batch-norm buffers, an architecture echo ("meta.arch") and,
/// when `adam` is given, its moments ("adam.m.<name>", "adam.v.<name>") and
/// step ("adam.t"). Without `include_encoding` the codebook and encoding
/// heads are left out, which is how pretrained (phase-1) weights are stored.
Checkpoint make_checkpoint(HourglassNetwork& net, const AdamState* adam, std::uint64_t step,
                           bool include_encoding = true);

/// Restores `net` (and `adam`, when given and present in the file).
/// Encoding-layer tensors may be absent and keep their current values; any
/// other missing tensor, unknown tensor or shape disagreement is rejected
/// with a FormatError naming the tensor.
void load_checkpoint(const Checkpoint& ckpt, HourglassNetwork& net, AdamState* adam);

}  // namespace cxhg
