#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

#include "colabel/rng.hpp"

namespace colabel {

// Fully connected tanh network mapping R^d -> R. Parameters are stored flat,
// layer by layer: column-major weight matrix (rows x cols), then bias. Hidden
// layers use tanh, the output layer is affine.
struct MlpModel {
  int input_dim = 0;
  std::vector<int> layer_sizes;  // [input_dim, hidden..., 1]
  Eigen::VectorXd params;

  int num_layers() const { return static_cast<int>(layer_sizes.size()) - 1; }
  int rows(int layer) const { return layer_sizes[layer + 1]; }
  int cols(int layer) const { return layer_sizes[layer]; }

  std::ptrdiff_t weight_offset(int layer) const;
  std::ptrdiff_t bias_offset(int layer) const;

  Eigen::Map<const Eigen::MatrixXd> weight(int layer) const;
  Eigen::Map<const Eigen::VectorXd> bias(int layer) const;
  Eigen::Map<Eigen::MatrixXd> weight(int layer);
  Eigen::Map<Eigen::VectorXd> bias(int layer);

  static std::ptrdiff_t param_count(int input_dim, const std::vector<int>& hidden);
};

// Uniform Glorot weights with limit sqrt(6/(fan_in+fan_out)), zero biases.
// Rejects an empty hidden list and non-positive widths.
MlpModel init_mlp(int input_dim, const std::vector<int>& hidden, Rng& rng);

// Versioned text checkpoint; parameters round-trip bit-exactly (hexfloat).
void save_mlp(const MlpModel& model, const std::string& path);
MlpModel load_mlp(const std::string& path);

}  // namespace colabel
