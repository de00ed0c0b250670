#pragma once

#include <span>
#include <string>
#include <vector>

#include "asr/types.h"

namespace asr {

struct Waveform {
  VectorXd samples;
  int sample_rate = 16000;
};

struct FeatureSequence {
  MatrixXd frames;  // T x d
  double frame_stride_ms = 10.0;
  double window_ms = 25.0;

  Eigen::Index num_frames() const { return frames.rows(); }
  Eigen::Index dim() const { return frames.cols(); }
};

// Defaults: Hamming window, 512-point FFT, 40 HTK-mel filters spanning
// 0..Nyquist, natural log with a 1e-10 floor, orthonormal DCT-II, +-2 frame
// delta regression. Pre-emphasis is off unless a coefficient is set.
struct FeatureConfig {
  double window_ms = 25.0;
  double stride_ms = 10.0;
  int fft_size = 512;
  int num_filters = 40;
  int num_ceps = 13;
  double log_floor = 1e-10;
  int delta_window = 2;
  double pre_emphasis = 0.0;
};

/// T = floor((S - W) / H) + 1 for S >= W, else 0.
Eigen::Index frame_count(Eigen::Index num_samples, Eigen::Index window, Eigen::Index hop);

/// Windowed frames (T x window samples) after optional pre-emphasis.
MatrixXd frame_signal(const Waveform& w, const FeatureConfig& cfg = {});

/// |FFT|^2 of each Hamming-windowed frame, bins 0..fft_size/2.
FeatureSequence power_spectrum(const Waveform& w, const FeatureConfig& cfg = {});

/// num_filters x (fft_size/2 + 1) triangular mel weights.
MatrixXd mel_filterbank(int sample_rate, const FeatureConfig& cfg = {});

/// Orthonormal DCT-II basis, rows = output coefficients.
MatrixXd dct_matrix(int num_out, int num_in);

/// +-N frame regression deltas with edge frames replicated.
MatrixXd deltas(const MatrixXd& x, int window);

/// Cepstra followed by their deltas and delta-deltas (T x 3*num_ceps).
FeatureSequence mfcc(const Waveform& w, const FeatureConfig& cfg = {});

/// Per-dimension zero mean / unit (population) std over the sequence.
/// Dimensions with zero variance map to 0.
FeatureSequence normalize(const FeatureSequence& f);

Waveform read_wav(const std::string& path);
void write_wav(const std::string& path, const Waveform& w);
/// Headerless little-endian int16 mono PCM.
Waveform read_raw_pcm(const std::string& path, int sample_rate);

void save_features(const std::string& path, const FeatureSequence& f);
FeatureSequence load_features(const std::string& path);

}  // namespace asr
