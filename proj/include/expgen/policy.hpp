#pragma once

// Small actor-critic networks: dense tanh trunk, optional gated recurrent
// cell, categorical policy head and scalar value head. Everything is templated
// on the scalar type; training runs in float, gradient checks in double.

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <type_traits>
#include <vector>

#include "expgen/env.hpp"
#include "expgen/random.hpp"

namespace expgen {

struct Architecture {
  int input_dim = 0;
  std::vector<int> hidden{64, 64};
  int recurrent_width = 0;  // 0 means feedforward
  int action_count = kActionCount;
  // 0 feeds every observation plane; r > 0 feeds only the (2r+1)^2 window
  // around the agent (see observation_vector).
  int view_radius = 0;

  bool recurrent() const { return recurrent_width > 0; }
  int trunk_width() const { return hidden.empty() ? input_dim : hidden.back(); }
  int embedding_width() const { return recurrent() ? recurrent_width : trunk_width(); }
  Eigen::Index parameter_count() const;
  void validate() const;

  friend bool operator==(const Architecture&, const Architecture&) = default;
};

/// Offsets of each weight block inside the flat parameter vector. Matrices are
/// stored column-major.
struct ParamLayout {
  struct Block {
    Eigen::Index weight = 0;
    Eigen::Index bias = 0;
    int rows = 0;
    int cols = 0;
  };
  std::vector<Block> trunk;
  Block gru_input;   // 3H x trunk_width, gate rows ordered [reset; update; candidate]
  Block gru_hidden;  // 3H x H
  Block policy;
  Block value;
  Eigen::Index total = 0;

  explicit ParamLayout(const Architecture& arch);
};

template <typename Scalar>
struct PolicyParams {
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  Architecture arch;
  Vector weights;

  static PolicyParams zeros(const Architecture& arch);
  /// Orthogonal initialisation (gain sqrt(2) trunk, 1 recurrent/value, 0.01 policy).
  static PolicyParams initialize(const Architecture& arch, std::uint64_t seed);

  template <typename Other>
  PolicyParams<Other> cast() const {
    return {arch, weights.template cast<Other>()};
  }
};

template <typename Scalar>
struct MemoryState {
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> hidden;

  static MemoryState initial(const Architecture& arch) {
    MemoryState m;
    m.hidden.setZero(arch.recurrent_width);
    return m;
  }
};

struct ActionDistribution {
  Eigen::VectorXd probabilities;

  int sample(Rng& rng) const;
  int argmax() const;
  double entropy() const;
};

template <typename Scalar>
struct StepOutput {
  ActionDistribution distribution;
  Scalar value = 0;
  MemoryState<Scalar> memory;
};

template <typename Scalar>
StepOutput<Scalar> policy_forward(const PolicyParams<Scalar>& params,
                                  const Eigen::Ref<const Eigen::VectorXf>& observation,
                                  const MemoryState<Scalar>& memory);

/// T steps of B parallel sequences. Column t * B + b holds step t of
/// sequence b. A reset of 1 zeroes the carried memory before that step.
template <typename Scalar>
struct SequenceBatch {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using RowArray = Eigen::Array<Scalar, 1, Eigen::Dynamic>;

  int steps = 1;
  int width = 0;
  Matrix observations;
  RowArray resets;
  Matrix initial_memory;

  Eigen::Index samples() const { return static_cast<Eigen::Index>(steps) * width; }
};

template <typename Scalar>
struct BatchOutput {
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> logits;  // A x N
  Eigen::Matrix<Scalar, 1, Eigen::Dynamic> values;               // 1 x N
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> final_memory;
};

template <typename Scalar>
BatchOutput<Scalar> policy_forward_batch(const PolicyParams<Scalar>& params, const SequenceBatch<Scalar>& batch);

/// Scalar loss over the heads' outputs plus an optional direct term on the
/// weights. The head term writes d(loss)/d(logits) and d(loss)/d(values).
template <typename Scalar>
struct LossSpec {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using RowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  std::function<Scalar(const Matrix& logits, const RowVector& values, Matrix& dlogits, RowVector& dvalues)> heads;
  std::function<Scalar(const Vector& weights, Vector& grad)> weights;
};

template <typename Scalar>
struct GradientResult {
  Scalar loss = 0;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> grad;
};

/// Exact reverse-mode gradient of the loss, backpropagating through every
/// recurrent step of the batch. Throws a numeric error on a non-finite loss or
/// gradient.
template <typename Scalar>
GradientResult<Scalar> policy_gradient(const PolicyParams<Scalar>& params,
                                       const std::type_identity_t<SequenceBatch<Scalar>>* batch,
                                       const std::type_identity_t<LossSpec<Scalar>>& loss);

template <typename Scalar>
struct AdamState {
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> first_moment;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> second_moment;
  std::int64_t step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  static AdamState for_params(const PolicyParams<Scalar>& params) {
    AdamState s;
    s.first_moment.setZero(params.weights.size());
    s.second_moment.setZero(params.weights.size());
    return s;
  }
};

inline constexpr double kDefaultLearningRate = 5e-4;

template <typename Scalar>
void optimizer_step(PolicyParams<Scalar>& params,
                    const std::type_identity_t<Eigen::Matrix<Scalar, Eigen::Dynamic, 1>>& grads, double lr,
                    AdamState<Scalar>& state);

// Checkpoint layout (little-endian):
//   char[8]  magic "EXPGCKPT"
//   u32      format version (1)
//   u32      bytes per scalar (4 or 8)
//   u32      input_dim, u32 hidden layer count, u32 x count widths,
//   u32      recurrent_width, u32 action_count, u32 view_radius
//   u64      weight count, then weights
//   u8       1 if optimizer state follows, else 0
//   i64 step, f64 beta1, f64 beta2, f64 epsilon, first moment, second moment
inline constexpr std::uint32_t kCheckpointVersion = 1;

template <typename Scalar>
struct Checkpoint {
  PolicyParams<Scalar> params;
  std::optional<AdamState<Scalar>> optimizer;
};

template <typename Scalar>
void save_checkpoint(const std::filesystem::path& path, const PolicyParams<Scalar>& params,
                     const AdamState<Scalar>* optimizer = nullptr);

template <typename Scalar>
Checkpoint<Scalar> load_checkpoint(const std::filesystem::path& path);

/// Numerically stable log-softmax of each column.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic> log_softmax_columns(
    const Eigen::MatrixBase<Derived>& logits) {
  using S = typename Derived::Scalar;
  Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic> out = logits;
  for (Eigen::Index c = 0; c < out.cols(); ++c) {
    const S peak = out.col(c).maxCoeff();
    out.col(c).array() -= peak;
    out.col(c).array() -= std::log(out.col(c).array().exp().sum());
  }
  return out;
}

}  // namespace expgen
