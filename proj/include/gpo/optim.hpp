#pragma once

#include "gpo/coarse.hpp"
#include "gpo/field.hpp"
#include "gpo/loss.hpp"
#include "gpo/primitives.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

namespace gpo {

// How eta_t is interpreted. `normalized` treats displacements in the
// [-1, 1] image-coordinate convention, so one unit of eta_t moves a
// displacement by max(W, H)/2 pixels; `pixels` applies eta_t directly.
enum class DisplacementRateUnits { Pixels, Normalized };

struct OptimConfig {
  double eta_g = 1.0;
  double eta_t = 0.01;
  double eta_r = 0.01;
  DisplacementRateUnits t_units = DisplacementRateUnits::Normalized;
  int tau_max = 100;
  int K = 10;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  LossWeights loss_weights;
  std::uint64_t seed = 0;
  int snapshot_every = 10; // 0 disables node snapshots

  void validate() const;
};

// Step sizes actually handed to Adam, per parameter group.
struct AdamRates {
  double g = 1.0;
  double t = 0.01;
  double beta = 0.01;
};

AdamRates effective_rates(const OptimConfig &cfg, int width, int height);

// First/second moments for every trainable scalar, five per node in the
// order g.x, g.y, t.x, t.y, beta.
struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::int64_t step = 0;

  AdamState() = default;
  explicit AdamState(std::size_t n_nodes) : m(5 * n_nodes, 0.0), v(5 * n_nodes, 0.0) {}
};

void adam_step(NodeSet &nodes, const NodeGrads &grads, AdamState &state, const AdamRates &rates,
               const OptimConfig &cfg);

struct NodeSnapshot {
  int iteration = 0;
  NodeSet nodes;
};

struct RegistrationResult {
  DisplacementField final_field;
  Image warped;
  NodeSet final_nodes;
  std::vector<LossReport> loss_trace;
  std::vector<NodeSnapshot> node_snapshots;
  GlobalTransform global_transform;
  std::map<std::string, double> timing; // seconds per phase
};

class NumericalFailure : public Error {
public:
  NumericalFailure(int iteration, std::vector<std::size_t> nodes, const std::string &what);
  int iteration() const noexcept { return iteration_; }
  const std::vector<std::size_t> &nodes() const noexcept { return nodes_; }

private:
  int iteration_;
  std::vector<std::size_t> nodes_;
};

// Called after every optimizer step with the 1-based iteration index.
using IterationObserver = std::function<void(int, const NodeSet &, const LossReport &)>;

RegistrationResult register_images(const Image &fixed, const Image &moving_coarse, NodeSet nodes,
                                   const OptimConfig &cfg, const IterationObserver &observer = {});

void write_loss_trace(const std::vector<LossReport> &trace, const std::filesystem::path &path);

} // namespace gpo
