#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "agenticsum/error.hpp"

namespace agenticsum {

/// Self-attention of one sentence: heads x tokens x tokens, row-major
/// (head, query, key).
struct AttentionTensor {
  std::size_t heads = 0;
  std::size_t tokens = 0;
  std::vector<double> weights;

  AttentionTensor() = default;
  AttentionTensor(std::size_t h, std::size_t t, double fill = 0.0)
      : heads(h), tokens(t), weights(h * t * t, fill) {}

  double& at(std::size_t h, std::size_t i, std::size_t k) {
    return weights[(h * tokens + i) * tokens + k];
  }
  double at(std::size_t h, std::size_t i, std::size_t k) const {
    return weights[(h * tokens + i) * tokens + k];
  }

  void validate() const {
    if (weights.size() != heads * tokens * tokens) {
      fail(ErrorKind::structural, "attention tensor size does not match H*T*T");
    }
    for (double w : weights) {
      if (!std::isfinite(w) || w < 0.0) {
        fail(ErrorKind::structural, "attention weights must be finite and non-negative");
      }
    }
  }

  bool operator==(const AttentionTensor&) const = default;
};

/// Attention of the token generated at `step` (1-based) over the `length`
/// positions visible at that step, per head (row-major head, position).
/// `input_positions` are 0-based positions holding source-document tokens.
struct StepAttention {
  std::size_t step = 0;
  std::size_t heads = 0;
  std::size_t length = 0;
  std::vector<double> weights;
  std::vector<std::size_t> input_positions;

  double at(std::size_t h, std::size_t i) const { return weights[h * length + i]; }

  void validate() const {
    if (heads == 0) fail(ErrorKind::structural, "step attention has no heads");
    if (weights.size() != heads * length) {
      fail(ErrorKind::structural, "step attention size does not match H*L");
    }
    for (double w : weights) {
      if (!std::isfinite(w) || w < 0.0) {
        fail(ErrorKind::structural, "attention weights must be finite and non-negative");
      }
    }
    for (std::size_t p : input_positions) {
      if (p >= length) fail(ErrorKind::structural, "input position outside attention row");
    }
  }

  bool operator==(const StepAttention&) const = default;
};

}  // namespace agenticsum
