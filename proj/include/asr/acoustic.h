#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "asr/alphabet.h"
#include "asr/criterion.h"
#include "asr/features.h"
#include "asr/types.h"

namespace asr {

enum class Nonlinearity { kNone, kHardTanh, kTanh, kReLU };

Nonlinearity parse_nonlinearity(const std::string& name);
std::string to_string(Nonlinearity n);

struct ConvLayerSpec {
  int d_in = 1;
  int d_out = 1;
  int kw = 1;  // kernel width in frames
  int dw = 1;  // stride in frames
  Nonlinearity nonlinearity = Nonlinearity::kHardTanh;
};

/// Stack of strided 1D convolutions. Text form is one layer per line:
/// "d_in d_out kw dw nonlinearity", '#' starts a comment.
struct NetworkSpec {
  std::vector<ConvLayerSpec> layers;

  void validate() const;
  int input_dim() const { return layers.front().d_in; }
  int output_dim() const { return layers.back().d_out; }

  static NetworkSpec parse(const std::string& text);
  static NetworkSpec load(const std::string& path);
  std::string to_text() const;
};

struct ReceptiveField {
  int64_t kw = 1;
  int64_t dw = 1;
};

/// The whole stack seen as one convolution: dw = prod dw_l,
/// kw = 1 + sum_l (kw_l - 1) * prod_{m<l} dw_m.
ReceptiveField receptive_field(const NetworkSpec& spec);

/// floor((T_x - kw) / dw) + 1, or 0 when T_x < kw.
Eigen::Index conv_output_frames(Eigen::Index input_frames, int64_t kw, int64_t dw);

/// weights(i, k * d_in + j) = w_{i,j,k}: a row dotted with the flattened input
/// window x[dw*t .. dw*t+kw) gives output channel i at frame t.
template <typename Scalar>
struct LayerParams {
  Matrix<Scalar> weights;
  Vector<Scalar> bias;

  Scalar& w(int out, int in, int k, int d_in) { return weights(out, k * d_in + in); }
  Scalar w(int out, int in, int k, int d_in) const { return weights(out, k * d_in + in); }
};

template <typename Scalar>
struct ModelParams {
  std::vector<LayerParams<Scalar>> layers;

  /// Uniform in +-1/sqrt(d_in * kw) for weights and biases.
  static ModelParams init(const NetworkSpec& spec, std::mt19937_64& rng);
  static ModelParams zeros_like(const NetworkSpec& spec);
  double squared_norm() const;
};

/// Linear part only: y_t^i = b_i + sum_j sum_k w_{i,j,k} x^j_{dw*t + k}.
template <typename Scalar>
Matrix<Scalar> conv1d_forward(const Matrix<Scalar>& x, const ConvLayerSpec& layer,
                              const LayerParams<Scalar>& params);

template <typename Scalar>
struct ConvGradients {
  Matrix<Scalar> d_x;
  Matrix<Scalar> d_w;
  Vector<Scalar> d_b;
};

template <typename Scalar>
ConvGradients<Scalar> conv1d_backward(const Matrix<Scalar>& x, const ConvLayerSpec& layer,
                                      const LayerParams<Scalar>& params, const Matrix<Scalar>& d_y);

template <typename Scalar>
Matrix<Scalar> activate(const Matrix<Scalar>& pre, Nonlinearity n);

/// d(activation)/d(pre) elementwise; HardTanh uses 1 on (-1, 1) and 0
/// elsewhere, including at +-1.
template <typename Scalar>
Matrix<Scalar> activation_grad(const Matrix<Scalar>& pre, Nonlinearity n);

enum class OutputMode { kRaw, kLogSoftmax };

template <typename Scalar>
struct ForwardCache {
  std::vector<Matrix<Scalar>> inputs;  // input to each layer
  std::vector<Matrix<Scalar>> pre;     // pre-activation of each layer
  Matrix<Scalar> output;
};

template <typename Scalar>
EmissionTable<Scalar> network_forward(const Matrix<Scalar>& features, const NetworkSpec& spec,
                                      const ModelParams<Scalar>& params,
                                      OutputMode mode = OutputMode::kRaw,
                                      ForwardCache<Scalar>* cache = nullptr);

template <typename Scalar>
EmissionTable<Scalar> network_forward(const FeatureSequence& features, const NetworkSpec& spec,
                                      const ModelParams<Scalar>& params,
                                      OutputMode mode = OutputMode::kRaw) {
  return network_forward<Scalar>(features.frames.cast<Scalar>(), spec, params, mode);
}

/// Parameter gradients given d(loss)/d(emissions) and the forward cache.
template <typename Scalar>
ModelParams<Scalar> network_backward(const NetworkSpec& spec, const ModelParams<Scalar>& params,
                                     const ForwardCache<Scalar>& cache,
                                     const Matrix<Scalar>& d_emissions,
                                     OutputMode mode = OutputMode::kRaw);

// ---------------------------------------------------------------------------
// Toy end-to-end training.

struct ToyTaskConfig {
  int num_samples = 500;
  int min_letters = 2;
  int max_letters = 4;
  int min_letter_frames = 5;  // 10 ms frames
  int max_letter_frames = 9;
  double noise = 0.3;
  uint64_t seed = 1;
};

struct ToySample {
  FeatureSequence features;  // normalized MFCC
  std::string transcription;
  LabelSequence labels;
};

/// Letters a..e, no repetition labels or silence.
Alphabet toy_alphabet();

/// Each letter is a pair of sinusoids at letter-specific frequencies plus
/// white noise; samples are concatenated letter segments at 16 kHz.
Waveform synthesize_letters(std::string_view text, const ToyTaskConfig& cfg, std::mt19937_64& rng);

std::vector<ToySample> make_toy_dataset(const ToyTaskConfig& cfg, const Alphabet& alphabet);

struct TrainConfig {
  int epochs = 50;
  int holdout = 100;  // last samples of the dataset are held out
  double learning_rate = 0.05;
  double clip_norm = 1.0;
  uint64_t seed = 1;
};

struct EpochStats {
  int epoch = 0;
  double train_loss = 0.0;
  double heldout_ler = 0.0;
};

struct TrainResult {
  ModelParams<float> params;
  TransitionTable<float> transitions;
  std::vector<EpochStats> curve;  // entry 0 is the untrained model
};

/// Label error rate of full-graph Viterbi output after merging duplicates.
double heldout_ler(std::span<const ToySample> samples, const NetworkSpec& spec,
                   const ModelParams<float>& params, const TransitionTable<float>& transitions);

/// Plain per-sample SGD on asg_loss with global L2 clipping.
TrainResult train_toy(std::span<const ToySample> dataset, const NetworkSpec& spec,
                      const TrainConfig& cfg);

/// Versioned binary checkpoint: spec, float32 weights, transitions.
void save_checkpoint(const std::string& path, const NetworkSpec& spec,
                     const ModelParams<float>& params, const TransitionTable<float>& transitions);

struct Checkpoint {
  NetworkSpec spec;
  ModelParams<float> params;
  TransitionTable<float> transitions;
};

Checkpoint load_checkpoint(const std::string& path);

}  // namespace asr
