#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace fsnc {

// One audited gradient path: the worst relative error between analytic and
// central-difference gradients seen across all draws.
struct GradientAuditResult {
  std::string name;
  double worst = 0.0;
};

// Re-derives every hand-written gradient in the library numerically on
// `draws` random small instances per path (graphs of up to 8 nodes).
// Covers the encoder in both modes, the projection head, cross-entropy,
// each contrastive loss, the nearest-prototype episode loss and the probe
// objective.  All results should sit well below 1e-4.
std::vector<GradientAuditResult> gradient_audit(std::size_t draws,
                                                std::uint64_t seed);

}  // namespace fsnc
