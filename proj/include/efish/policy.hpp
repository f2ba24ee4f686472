#ifndef EFISH_POLICY_HPP_
#define EFISH_POLICY_HPP_

#include <string>
#include <vector>

#include <Eigen/Core>

#include "efish/rng.hpp"
#include "efish/world.hpp"

namespace efish {

using Eigen::MatrixXd;
using Eigen::RowVectorXd;
using Eigen::VectorXd;

// Head rows in the actor output: thrust mean, turn mean, eod logit, bite
// logit. Continuous heads are Gaussians in pre-squash space with
// state-independent log stds; tanh squashes turn to [-1,1] and
// 0.5*(tanh+1) squashes thrust to [0,1].
constexpr int kHeadThrustMu = 0;
constexpr int kHeadTurnMu = 1;
constexpr int kHeadEodLogit = 2;
constexpr int kHeadBiteLogit = 3;
constexpr int kNumHeads = 4;
constexpr int kNumGaussianHeads = 2;

// One named view into the parameter struct; biases/log_std set `vec`.
struct TensorRef {
  std::string name;
  MatrixXd* mat = nullptr;
  VectorXd* vec = nullptr;
};

// GRU trunk + two-hidden-layer tanh MLP heads, all widths = hidden_dim.
// Doubles throughout; checkpoints store float32 (see checkpoint module).
struct PolicyParams {
  int obs_dim = 0;
  int hidden_dim = 0;

  MatrixXd Wz, Wr, Wh;  // input weights, H x D
  MatrixXd Uz, Ur, Uh;  // recurrent weights, H x H
  VectorXd bz, br, bh;

  MatrixXd Wa1, Wa2, Wao;  // actor: H x H, H x H, 4 x H
  VectorXd ba1, ba2, bao;
  VectorXd log_std;  // 2 (thrust, turn), state independent

  MatrixXd Wc1, Wc2, Wco;  // critic: H x H, H x H, 1 x H
  VectorXd bc1, bc2, bco;

  // Allocates shapes and zero-fills.
  static PolicyParams zeros(int obs_dim, int hidden_dim);
  // Orthogonal recurrent weights, scaled-uniform inputs, zero biases,
  // actor output scaled by 0.01, log_std = -0.5.
  static PolicyParams init(int obs_dim, int hidden_dim, Rng& rng);

  // Fixed-order named views; the order defines flat/checkpoint layout.
  std::vector<TensorRef> tensors();
  std::vector<TensorRef> tensors() const;  // const views (pointers still mutable refs)

  std::size_t num_params() const;
  void set_zero();
  bool all_finite() const;
};

// y += alpha * x over every tensor (same shapes).
void axpy(PolicyParams& y, const PolicyParams& x, double alpha);
void scale(PolicyParams& x, double alpha);
double global_norm(const PolicyParams& x);

// Per-step activations kept for backprop.
struct StepCache {
  MatrixXd h_prev;          // masked input hidden, H x B
  MatrixXd x;               // D x B
  MatrixXd z, r, c, h;      // gates and new hidden
  MatrixXd a1, a2, heads;   // actor path (heads: 4 x B)
  MatrixXd v1, v2;          // critic path
  RowVectorXd value;        // 1 x B
};

struct ForwardResult {
  MatrixXd heads;      // 4 x B
  RowVectorXd value;   // 1 x B
  MatrixXd h;          // H x B
};

// One batched step: GRU then both heads. Throws ContractError on dimension
// mismatch or non-finite input. `cache` (optional) receives activations.
ForwardResult policy_forward(const PolicyParams& p, const MatrixXd& x,
                             const MatrixXd& h, StepCache* cache = nullptr);

// Standalone gate equations (column vectors), used by tests.
VectorXd gru_step(const PolicyParams& p, const VectorXd& x, const VectorXd& h);

// Distribution math shared by sampling and evaluation. `u` holds the raw
// pre-squash Gaussian draws; storing u (not the squashed action) lets
// evaluation reproduce sampling logprobs exactly.
double heads_logprob(const Eigen::Vector4d& heads, const VectorXd& log_std,
                     const Eigen::Vector2d& u, bool eod, bool bite);
double heads_entropy(const Eigen::Vector4d& heads, const VectorXd& log_std);
double bernoulli_entropy(double logit);
double bernoulli_logprob(double logit, bool taken);

struct ActionSample {
  ActionCommand cmd;
  Eigen::Vector2d u;  // raw thrust/turn draws
  double logprob = 0.0;
};

ActionSample sample_actions(const Eigen::Vector4d& heads, const VectorXd& log_std,
                            Rng& rng);

// Deterministic (mode) action, used by evaluation rollouts.
ActionCommand mode_actions(const Eigen::Vector4d& heads);

// A minibatch of aligned sequences: T steps of B (env, agent) columns.
// done[t] masks the hidden state before step t+1 (1 = reset).
struct SequenceBatch {
  std::vector<MatrixXd> x;        // T of D x B
  std::vector<MatrixXd> u;        // T of 2 x B
  std::vector<MatrixXd> bits;     // T of 2 x B (eod, bite in {0,1})
  std::vector<RowVectorXd> done;  // T of 1 x B
  MatrixXd h0;                    // H x B

  int T() const { return static_cast<int>(x.size()); }
  int B() const { return h0.cols() > 0 ? static_cast<int>(h0.cols()) : 0; }
};

struct EvalResult {
  MatrixXd logp;     // T x B
  MatrixXd value;    // T x B
  MatrixXd entropy;  // T x B
  std::vector<StepCache> caches;
};

// Re-runs the recurrence over stored sequences; pure given (params, batch).
EvalResult evaluate_sequence(const PolicyParams& p, const SequenceBatch& batch);

// Accumulates d(sum over t,b of dlogp.*logp + dvalue.*value + dentropy.*entropy)
// / dparams into `grads` by backprop through time.
void backward_sequence(const PolicyParams& p, const SequenceBatch& batch,
                       const EvalResult& eval, const MatrixXd& dlogp,
                       const MatrixXd& dvalue, const MatrixXd& dentropy,
                       PolicyParams& grads);

}  // namespace efish

#endif  // EFISH_POLICY_HPP_
