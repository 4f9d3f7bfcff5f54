#include "expgen/policy.hpp"

#include <Eigen/QR>
#include <array>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <sstream>

#include "expgen/error.hpp"

namespace expgen {

Eigen::Index Architecture::parameter_count() const { return ParamLayout(*this).total; }

void Architecture::validate() const {
  if (input_dim < 1) throw Error(ErrorKind::Shape, "architecture input_dim must be >= 1");
  if (action_count < 1) throw Error(ErrorKind::Shape, "architecture action_count must be >= 1");
  if (recurrent_width < 0) throw Error(ErrorKind::Shape, "recurrent width must be >= 0");
  if (view_radius < 0) throw Error(ErrorKind::Shape, "view radius must be >= 0");
  for (int w : hidden) {
    if (w < 1) throw Error(ErrorKind::Shape, "hidden widths must be >= 1");
  }
}

ParamLayout::ParamLayout(const Architecture& arch) {
  Eigen::Index cursor = 0;
  auto block = [&](int rows, int cols) {
    Block b{cursor, cursor + static_cast<Eigen::Index>(rows) * cols, rows, cols};
    cursor = b.bias + rows;
    return b;
  };
  int in = arch.input_dim;
  for (int w : arch.hidden) {
    trunk.push_back(block(w, in));
    in = w;
  }
  if (arch.recurrent()) {
    gru_input = block(3 * arch.recurrent_width, in);
    gru_hidden = block(3 * arch.recurrent_width, arch.recurrent_width);
  }
  policy = block(arch.action_count, arch.embedding_width());
  value = block(1, arch.embedding_width());
  total = cursor;
}

int ActionDistribution::sample(Rng& rng) const {
  return sample_categorical<double>(std::span<const double>(probabilities.data(), probabilities.size()), rng);
}

int ActionDistribution::argmax() const {
  Eigen::Index best = 0;
  probabilities.maxCoeff(&best);
  return static_cast<int>(best);
}

double ActionDistribution::entropy() const {
  double h = 0.0;
  for (double p : probabilities) {
    if (p > 0.0) h -= p * std::log(p);
  }
  return h;
}

namespace {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using RowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

template <typename Scalar>
auto weight_map(const Vector<Scalar>& w, const ParamLayout::Block& b) {
  return Eigen::Map<const Matrix<Scalar>>(w.data() + b.weight, b.rows, b.cols);
}
template <typename Scalar>
auto bias_map(const Vector<Scalar>& w, const ParamLayout::Block& b) {
  return Eigen::Map<const Vector<Scalar>>(w.data() + b.bias, b.rows);
}
template <typename Scalar>
auto weight_map(Vector<Scalar>& w, const ParamLayout::Block& b) {
  return Eigen::Map<Matrix<Scalar>>(w.data() + b.weight, b.rows, b.cols);
}
template <typename Scalar>
auto bias_map(Vector<Scalar>& w, const ParamLayout::Block& b) {
  return Eigen::Map<Vector<Scalar>>(w.data() + b.bias, b.rows);
}

template <typename Derived>
auto sigmoid(const Eigen::ArrayBase<Derived>& x) {
  using S = typename Derived::Scalar;
  return (S(1) + (-x).exp()).inverse();
}

// Intermediate values kept for the backward pass.
template <typename Scalar>
struct Tape {
  std::vector<Matrix<Scalar>> trunk;  // activations after each dense layer
  Matrix<Scalar> gru_input;           // W_x a + b_x for all samples, 3H x N
  Matrix<Scalar> carried;             // memory entering each step after resets, H x N
  Matrix<Scalar> reset_gate, update_gate, candidate, hidden_proj_candidate;
  Matrix<Scalar> embedding;  // E x N
};

template <typename Scalar>
void check_batch(const Architecture& arch, const SequenceBatch<Scalar>& batch) {
  const auto n = batch.samples();
  if (batch.observations.rows() != arch.input_dim || batch.observations.cols() != n) {
    std::ostringstream msg;
    msg << "observation block is " << batch.observations.rows() << "x" << batch.observations.cols()
        << ", expected " << arch.input_dim << "x" << n;
    throw Error(ErrorKind::Shape, msg.str());
  }
  if (arch.recurrent()) {
    if (batch.initial_memory.rows() != arch.recurrent_width || batch.initial_memory.cols() != batch.width) {
      throw Error(ErrorKind::Shape, "initial memory shape does not match architecture");
    }
    if (batch.resets.size() != n) throw Error(ErrorKind::Shape, "reset mask length mismatch");
  }
}

template <typename Scalar>
BatchOutput<Scalar> forward(const PolicyParams<Scalar>& params, const SequenceBatch<Scalar>& batch,
                            Tape<Scalar>* tape) {
  const Architecture& arch = params.arch;
  check_batch(arch, batch);
  const ParamLayout layout(arch);
  const auto& w = params.weights;
  const Eigen::Index n = batch.samples();

  Matrix<Scalar> act = batch.observations;
  for (const auto& block : layout.trunk) {
    Matrix<Scalar> pre = weight_map(w, block) * act;
    pre.colwise() += bias_map(w, block);
    act = pre.array().tanh().matrix();
    if (tape) tape->trunk.push_back(act);
  }

  BatchOutput<Scalar> out;
  Matrix<Scalar> embedding;
  if (arch.recurrent()) {
    const int h = arch.recurrent_width;
    const int b = batch.width;
    Matrix<Scalar> gx = weight_map(w, layout.gru_input) * act;
    gx.colwise() += bias_map(w, layout.gru_input);
    const auto wh = weight_map(w, layout.gru_hidden);
    const auto bh = bias_map(w, layout.gru_hidden);
    embedding.resize(h, n);
    if (tape) {
      tape->carried.resize(h, n);
      tape->reset_gate.resize(h, n);
      tape->update_gate.resize(h, n);
      tape->candidate.resize(h, n);
      tape->hidden_proj_candidate.resize(h, n);
    }
    Matrix<Scalar> memory = batch.initial_memory;
    for (int t = 0; t < batch.steps; ++t) {
      const Eigen::Index c0 = static_cast<Eigen::Index>(t) * b;
      for (int j = 0; j < b; ++j) {
        if (batch.resets[c0 + j] != Scalar(0)) memory.col(j).setZero();
      }
      Matrix<Scalar> gh = wh * memory;
      gh.colwise() += bh;
      const auto gx_t = gx.middleCols(c0, b);
      Matrix<Scalar> r = sigmoid((gx_t.topRows(h) + gh.topRows(h)).array()).matrix();
      Matrix<Scalar> z = sigmoid((gx_t.middleRows(h, h) + gh.middleRows(h, h)).array()).matrix();
      Matrix<Scalar> cand =
          (gx_t.bottomRows(h).array() + r.array() * gh.bottomRows(h).array()).tanh().matrix();
      Matrix<Scalar> next = ((Scalar(1) - z.array()) * cand.array() + z.array() * memory.array()).matrix();
      if (tape) {
        tape->carried.middleCols(c0, b) = memory;
        tape->reset_gate.middleCols(c0, b) = r;
        tape->update_gate.middleCols(c0, b) = z;
        tape->candidate.middleCols(c0, b) = cand;
        tape->hidden_proj_candidate.middleCols(c0, b) = gh.bottomRows(h);
      }
      embedding.middleCols(c0, b) = next;
      memory = std::move(next);
    }
    if (tape) tape->gru_input = std::move(gx);
    out.final_memory = std::move(memory);
  } else {
    embedding = std::move(act);
  }

  out.logits = weight_map(w, layout.policy) * embedding;
  out.logits.colwise() += bias_map(w, layout.policy);
  out.values = weight_map(w, layout.value) * embedding;
  out.values.array() += w[layout.value.bias];
  if (tape) tape->embedding = std::move(embedding);
  return out;
}

template <typename Scalar>
void accumulate_dense(Vector<Scalar>& grad, const ParamLayout::Block& block, const Matrix<Scalar>& dpre,
                      const Matrix<Scalar>& input) {
  weight_map(grad, block).noalias() += dpre * input.transpose();
  bias_map(grad, block) += dpre.rowwise().sum();
}

template <typename Scalar>
void backward(const PolicyParams<Scalar>& params, const SequenceBatch<Scalar>& batch, const Tape<Scalar>& tape,
              const Matrix<Scalar>& dlogits, const RowVector<Scalar>& dvalues, Vector<Scalar>& grad) {
  const Architecture& arch = params.arch;
  const ParamLayout layout(arch);
  const auto& w = params.weights;

  accumulate_dense<Scalar>(grad, layout.policy, dlogits, tape.embedding);
  accumulate_dense<Scalar>(grad, layout.value, dvalues, tape.embedding);
  Matrix<Scalar> dembed = weight_map(w, layout.policy).transpose() * dlogits;
  dembed.noalias() += weight_map(w, layout.value).transpose() * dvalues;

  const Matrix<Scalar>& trunk_out = tape.trunk.empty() ? batch.observations : tape.trunk.back();
  Matrix<Scalar> dact;
  if (arch.recurrent()) {
    const int h = arch.recurrent_width;
    const int b = batch.width;
    const auto wh = weight_map(w, layout.gru_hidden);
    Matrix<Scalar> dgx(3 * h, batch.samples());
    Matrix<Scalar> dgh(3 * h, b);
    Matrix<Scalar> dcarry = Matrix<Scalar>::Zero(h, b);
    auto dwh = weight_map(grad, layout.gru_hidden);
    auto dbh = bias_map(grad, layout.gru_hidden);
    for (int t = batch.steps - 1; t >= 0; --t) {
      const Eigen::Index c0 = static_cast<Eigen::Index>(t) * b;
      const auto r = tape.reset_gate.middleCols(c0, b).array();
      const auto z = tape.update_gate.middleCols(c0, b).array();
      const auto cand = tape.candidate.middleCols(c0, b).array();
      const auto prev = tape.carried.middleCols(c0, b);
      const auto ghn = tape.hidden_proj_candidate.middleCols(c0, b).array();

      const Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic> dh = dembed.middleCols(c0, b).array() + dcarry.array();
      const Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic> dcand_pre = dh * (Scalar(1) - z) * (Scalar(1) - cand.square());
      const Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic> dz_pre = dh * (prev.array() - cand) * z * (Scalar(1) - z);
      const Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic> dr_pre = dcand_pre * ghn * r * (Scalar(1) - r);

      dgh.topRows(h) = dr_pre.matrix();
      dgh.middleRows(h, h) = dz_pre.matrix();
      dgh.bottomRows(h) = (dcand_pre * r).matrix();
      auto dgx_t = dgx.middleCols(c0, b);
      dgx_t.topRows(h) = dr_pre.matrix();
      dgx_t.middleRows(h, h) = dz_pre.matrix();
      dgx_t.bottomRows(h) = dcand_pre.matrix();

      dwh.noalias() += dgh * prev.transpose();
      dbh += dgh.rowwise().sum();
      dcarry = (dh * z).matrix();
      dcarry.noalias() += wh.transpose() * dgh;
      for (int j = 0; j < b; ++j) {
        if (batch.resets[c0 + j] != Scalar(0)) dcarry.col(j).setZero();
      }
    }
    accumulate_dense<Scalar>(grad, layout.gru_input, dgx, trunk_out);
    if (!layout.trunk.empty()) dact = weight_map(w, layout.gru_input).transpose() * dgx;
  } else {
    dact = std::move(dembed);
  }

  for (std::size_t l = layout.trunk.size(); l-- > 0;) {
    const Matrix<Scalar> dpre = (dact.array() * (Scalar(1) - tape.trunk[l].array().square())).matrix();
    const Matrix<Scalar>& input = l == 0 ? batch.observations : tape.trunk[l - 1];
    accumulate_dense<Scalar>(grad, layout.trunk[l], dpre, input);
    if (l > 0) dact = weight_map(w, layout.trunk[l]).transpose() * dpre;
  }
}

template <typename Scalar>
Matrix<Scalar> orthogonal(int rows, int cols, double gain, Rng& rng) {
  Eigen::MatrixXd g(std::max(rows, cols), std::min(rows, cols));
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    // Box-Muller on the portable uniform source.
    const double u1 = 1.0 - uniform01(rng);
    const double u2 = uniform01(rng);
    g.data()[i] = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(g.rows(), g.cols());
  const Eigen::VectorXd d = qr.matrixQR().diagonal();
  for (Eigen::Index j = 0; j < q.cols(); ++j) {
    if (d[j] < 0) q.col(j) = -q.col(j);
  }
  Eigen::MatrixXd out = rows >= cols ? q : Eigen::MatrixXd(q.transpose());
  return (gain * out).cast<Scalar>();
}

template <typename Scalar>
void write_pod(std::ostream& os, const Scalar& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

template <typename Scalar>
Scalar read_pod(std::istream& is) {
  Scalar v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(v));
  if (!is) throw Error(ErrorKind::Io, "truncated checkpoint");
  return v;
}

template <typename Scalar>
void write_vector(std::ostream& os, const Vector<Scalar>& v) {
  os.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(Scalar)));
}

template <typename Stored, typename Scalar>
Vector<Scalar> read_vector(std::istream& is, std::uint64_t n) {
  Eigen::Matrix<Stored, Eigen::Dynamic, 1> v(static_cast<Eigen::Index>(n));
  is.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(Stored)));
  if (!is) throw Error(ErrorKind::Io, "truncated checkpoint");
  return v.template cast<Scalar>();
}

constexpr std::array<char, 8> kMagic{'E', 'X', 'P', 'G', 'C', 'K', 'P', 'T'};

template <typename Stored, typename Scalar>
Checkpoint<Scalar> read_payload(std::istream& is, Architecture arch) {
  Checkpoint<Scalar> ckpt;
  ckpt.params.arch = std::move(arch);
  const auto n = read_pod<std::uint64_t>(is);
  if (static_cast<Eigen::Index>(n) != ckpt.params.arch.parameter_count()) {
    throw Error(ErrorKind::Io, "checkpoint weight count does not match its architecture");
  }
  ckpt.params.weights = read_vector<Stored, Scalar>(is, n);
  if (read_pod<std::uint8_t>(is)) {
    AdamState<Scalar> opt;
    opt.step = read_pod<std::int64_t>(is);
    opt.beta1 = read_pod<double>(is);
    opt.beta2 = read_pod<double>(is);
    opt.epsilon = read_pod<double>(is);
    opt.first_moment = read_vector<Stored, Scalar>(is, n);
    opt.second_moment = read_vector<Stored, Scalar>(is, n);
    ckpt.optimizer = std::move(opt);
  }
  return ckpt;
}

}  // namespace

template <typename Scalar>
PolicyParams<Scalar> PolicyParams<Scalar>::zeros(const Architecture& arch) {
  arch.validate();
  return {arch, Vector::Zero(arch.parameter_count())};
}

template <typename Scalar>
PolicyParams<Scalar> PolicyParams<Scalar>::initialize(const Architecture& arch, std::uint64_t seed) {
  PolicyParams p = zeros(arch);
  const ParamLayout layout(arch);
  Rng rng(derive_seed(seed, 0x696e6974ULL));
  for (const auto& block : layout.trunk) {
    weight_map(p.weights, block) = orthogonal<Scalar>(block.rows, block.cols, std::numbers::sqrt2, rng);
  }
  if (arch.recurrent()) {
    const int h = arch.recurrent_width;
    for (int gate = 0; gate < 3; ++gate) {
      weight_map(p.weights, layout.gru_input).middleRows(gate * h, h) =
          orthogonal<Scalar>(h, layout.gru_input.cols, 1.0, rng);
      weight_map(p.weights, layout.gru_hidden).middleRows(gate * h, h) = orthogonal<Scalar>(h, h, 1.0, rng);
    }
  }
  weight_map(p.weights, layout.policy) = orthogonal<Scalar>(layout.policy.rows, layout.policy.cols, 0.01, rng);
  weight_map(p.weights, layout.value) = orthogonal<Scalar>(1, layout.value.cols, 1.0, rng);
  return p;
}

template <typename Scalar>
BatchOutput<Scalar> policy_forward_batch(const PolicyParams<Scalar>& params, const SequenceBatch<Scalar>& batch) {
  return forward<Scalar>(params, batch, nullptr);
}

template <typename Scalar>
StepOutput<Scalar> policy_forward(const PolicyParams<Scalar>& params,
                                  const Eigen::Ref<const Eigen::VectorXf>& observation,
                                  const MemoryState<Scalar>& memory) {
  const Architecture& arch = params.arch;
  if (observation.size() != arch.input_dim) {
    throw Error(ErrorKind::Shape, "observation has " + std::to_string(observation.size()) +
                                      " entries, policy expects " + std::to_string(arch.input_dim));
  }
  if (memory.hidden.size() != arch.recurrent_width) {
    throw Error(ErrorKind::Shape, "memory state width does not match architecture");
  }
  SequenceBatch<Scalar> batch;
  batch.steps = 1;
  batch.width = 1;
  batch.observations = observation.template cast<Scalar>();
  batch.resets.setZero(1);
  batch.initial_memory = memory.hidden;
  auto out = forward<Scalar>(params, batch, nullptr);

  StepOutput<Scalar> step;
  const Eigen::VectorXd logp = log_softmax_columns(out.logits.template cast<double>());
  step.distribution.probabilities = logp.array().exp();
  step.value = out.values(0);
  if (arch.recurrent()) {
    step.memory.hidden = out.final_memory.col(0);
  } else {
    step.memory = memory;
  }
  return step;
}

template <typename Scalar>
GradientResult<Scalar> policy_gradient(const PolicyParams<Scalar>& params,
                                       const std::type_identity_t<SequenceBatch<Scalar>>* batch,
                                       const std::type_identity_t<LossSpec<Scalar>>& loss) {
  GradientResult<Scalar> result;
  result.grad.setZero(params.weights.size());
  if (batch && loss.heads) {
    Tape<Scalar> tape;
    auto out = forward<Scalar>(params, *batch, &tape);
    Matrix<Scalar> dlogits = Matrix<Scalar>::Zero(out.logits.rows(), out.logits.cols());
    RowVector<Scalar> dvalues = RowVector<Scalar>::Zero(out.values.cols());
    result.loss += loss.heads(out.logits, out.values, dlogits, dvalues);
    if (!std::isfinite(static_cast<double>(result.loss))) {
      throw Error(ErrorKind::Numeric, "non-finite loss");
    }
    backward<Scalar>(params, *batch, tape, dlogits, dvalues, result.grad);
  }
  if (loss.weights) {
    Vector<Scalar> g = Vector<Scalar>::Zero(params.weights.size());
    result.loss += loss.weights(params.weights, g);
    result.grad += g;
  }
  if (!std::isfinite(static_cast<double>(result.loss))) throw Error(ErrorKind::Numeric, "non-finite loss");
  if (!result.grad.allFinite()) throw Error(ErrorKind::Numeric, "non-finite gradient");
  return result;
}

template <typename Scalar>
void optimizer_step(PolicyParams<Scalar>& params, const std::type_identity_t<Vector<Scalar>>& grads, double lr,
                    AdamState<Scalar>& state) {
  if (grads.size() != params.weights.size() || state.first_moment.size() != params.weights.size()) {
    throw Error(ErrorKind::Shape, "gradient/optimizer state size does not match parameters");
  }
  ++state.step;
  const auto b1 = static_cast<Scalar>(state.beta1);
  const auto b2 = static_cast<Scalar>(state.beta2);
  state.first_moment = b1 * state.first_moment + (Scalar(1) - b1) * grads;
  state.second_moment = b2 * state.second_moment + (Scalar(1) - b2) * grads.cwiseAbs2();
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  const auto step_size = static_cast<Scalar>(lr / c1);
  const auto root_c2 = static_cast<Scalar>(std::sqrt(c2));
  params.weights.array() -= step_size * state.first_moment.array() /
                            (state.second_moment.array().sqrt() / root_c2 + static_cast<Scalar>(state.epsilon));
}

template <typename Scalar>
void save_checkpoint(const std::filesystem::path& path, const PolicyParams<Scalar>& params,
                     const AdamState<Scalar>* optimizer) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw Error(ErrorKind::Io, "cannot write checkpoint " + path.string());
  const Architecture& arch = params.arch;
  os.write(kMagic.data(), kMagic.size());
  write_pod(os, kCheckpointVersion);
  write_pod(os, static_cast<std::uint32_t>(sizeof(Scalar)));
  write_pod(os, static_cast<std::uint32_t>(arch.input_dim));
  write_pod(os, static_cast<std::uint32_t>(arch.hidden.size()));
  for (int w : arch.hidden) write_pod(os, static_cast<std::uint32_t>(w));
  write_pod(os, static_cast<std::uint32_t>(arch.recurrent_width));
  write_pod(os, static_cast<std::uint32_t>(arch.action_count));
  write_pod(os, static_cast<std::uint32_t>(arch.view_radius));
  write_pod(os, static_cast<std::uint64_t>(params.weights.size()));
  write_vector(os, params.weights);
  write_pod(os, static_cast<std::uint8_t>(optimizer ? 1 : 0));
  if (optimizer) {
    write_pod(os, static_cast<std::int64_t>(optimizer->step));
    write_pod(os, optimizer->beta1);
    write_pod(os, optimizer->beta2);
    write_pod(os, optimizer->epsilon);
    write_vector(os, optimizer->first_moment);
    write_vector(os, optimizer->second_moment);
  }
  if (!os) throw Error(ErrorKind::Io, "failed writing checkpoint " + path.string());
}

template <typename Scalar>
Checkpoint<Scalar> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorKind::Io, "cannot open checkpoint " + path.string());
  std::array<char, 8> magic{};
  is.read(magic.data(), magic.size());
  if (!is || magic != kMagic) throw Error(ErrorKind::Io, path.string() + " is not a policy checkpoint");
  const auto version = read_pod<std::uint32_t>(is);
  if (version != kCheckpointVersion) {
    throw Error(ErrorKind::Io, "unsupported checkpoint version " + std::to_string(version));
  }
  const auto scalar_bytes = read_pod<std::uint32_t>(is);
  Architecture arch;
  arch.input_dim = static_cast<int>(read_pod<std::uint32_t>(is));
  arch.hidden.resize(read_pod<std::uint32_t>(is));
  for (int& w : arch.hidden) w = static_cast<int>(read_pod<std::uint32_t>(is));
  arch.recurrent_width = static_cast<int>(read_pod<std::uint32_t>(is));
  arch.action_count = static_cast<int>(read_pod<std::uint32_t>(is));
  arch.view_radius = static_cast<int>(read_pod<std::uint32_t>(is));
  arch.validate();
  if (scalar_bytes == 4) return read_payload<float, Scalar>(is, std::move(arch));
  if (scalar_bytes == 8) return read_payload<double, Scalar>(is, std::move(arch));
  throw Error(ErrorKind::Io, "unsupported scalar width in checkpoint");
}

#define EXPGEN_INSTANTIATE(S)                                                                               \
  template struct PolicyParams<S>;                                                                          \
  template StepOutput<S> policy_forward(const PolicyParams<S>&, const Eigen::Ref<const Eigen::VectorXf>&, \
                                        const MemoryState<S>&);                                             \
  template BatchOutput<S> policy_forward_batch(const PolicyParams<S>&, const SequenceBatch<S>&);            \
  template GradientResult<S> policy_gradient<S>(const PolicyParams<S>&, const SequenceBatch<S>*,               \
                                             const LossSpec<S>&);                                           \
  template void optimizer_step<S>(PolicyParams<S>&, const Vector<S>&, double, AdamState<S>&);                  \
  template void save_checkpoint(const std::filesystem::path&, const PolicyParams<S>&, const AdamState<S>*); \
  template Checkpoint<S> load_checkpoint(const std::filesystem::path&);

EXPGEN_INSTANTIATE(float)
EXPGEN_INSTANTIATE(double)

#undef EXPGEN_INSTANTIATE

}  // namespace expgen
