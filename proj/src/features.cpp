#include "asr/features.h"

#include <cmath>
#include <complex>
#include <cstring>
#include <fstream>
#include <numbers>

#include <unsupported/Eigen/FFT>

#include "asr/io.h"

namespace asr {

namespace {

Eigen::Index samples_for(double ms, int rate) {
  return static_cast<Eigen::Index>(std::llround(ms * rate / 1000.0));
}

void check_waveform(const Waveform& w, Eigen::Index window) {
  if (w.sample_rate <= 0) throw Error("invalid sample rate " + std::to_string(w.sample_rate));
  if (!w.samples.allFinite()) throw Error("waveform contains non-finite samples");
  if (w.samples.size() < window) {
    throw Error("waveform too short: " + std::to_string(w.samples.size()) +
                " samples, need at least one window of " + std::to_string(window));
  }
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

}  // namespace

Eigen::Index frame_count(Eigen::Index num_samples, Eigen::Index window, Eigen::Index hop) {
  if (window <= 0 || hop <= 0) throw Error("window and hop must be positive");
  if (num_samples < window) return 0;
  return (num_samples - window) / hop + 1;
}

MatrixXd frame_signal(const Waveform& w, const FeatureConfig& cfg) {
  const Eigen::Index window = samples_for(cfg.window_ms, w.sample_rate);
  const Eigen::Index hop = samples_for(cfg.stride_ms, w.sample_rate);
  check_waveform(w, window);
  if (window > cfg.fft_size) {
    throw Error("window of " + std::to_string(window) + " samples exceeds fft size " +
                std::to_string(cfg.fft_size));
  }

  VectorXd x = w.samples;
  if (cfg.pre_emphasis != 0.0) {
    for (Eigen::Index i = x.size() - 1; i > 0; --i) x[i] -= cfg.pre_emphasis * w.samples[i - 1];
  }

  // Symmetric Hamming window.
  VectorXd hamming(window);
  for (Eigen::Index n = 0; n < window; ++n) {
    hamming[n] = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * static_cast<double>(n) /
                                        static_cast<double>(window - 1));
  }

  const Eigen::Index T = frame_count(x.size(), window, hop);
  MatrixXd frames(T, window);
  for (Eigen::Index t = 0; t < T; ++t) {
    frames.row(t) = x.segment(t * hop, window).cwiseProduct(hamming).transpose();
  }
  return frames;
}

FeatureSequence power_spectrum(const Waveform& w, const FeatureConfig& cfg) {
  const MatrixXd frames = frame_signal(w, cfg);
  const int bins = cfg.fft_size / 2 + 1;

  Eigen::FFT<double> fft;
  fft.SetFlag(Eigen::FFT<double>::HalfSpectrum);
  std::vector<double> buffer(static_cast<size_t>(cfg.fft_size));
  std::vector<std::complex<double>> spectrum;

  FeatureSequence out;
  out.frame_stride_ms = cfg.stride_ms;
  out.window_ms = cfg.window_ms;
  out.frames.resize(frames.rows(), bins);
  for (Eigen::Index t = 0; t < frames.rows(); ++t) {
    std::fill(buffer.begin(), buffer.end(), 0.0);
    for (Eigen::Index n = 0; n < frames.cols(); ++n) buffer[static_cast<size_t>(n)] = frames(t, n);
    fft.fwd(spectrum, buffer);
    for (int k = 0; k < bins; ++k) out.frames(t, k) = std::norm(spectrum[static_cast<size_t>(k)]);
  }
  return out;
}

MatrixXd mel_filterbank(int sample_rate, const FeatureConfig& cfg) {
  const int bins = cfg.fft_size / 2 + 1;
  const int m = cfg.num_filters;
  const double mel_lo = hz_to_mel(0.0);
  const double mel_hi = hz_to_mel(sample_rate / 2.0);

  std::vector<double> edges(static_cast<size_t>(m + 2));
  for (int i = 0; i < m + 2; ++i) {
    edges[static_cast<size_t>(i)] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * i / (m + 1));
  }

  MatrixXd bank = MatrixXd::Zero(m, bins);
  for (int f = 0; f < m; ++f) {
    const double left = edges[static_cast<size_t>(f)];
    const double center = edges[static_cast<size_t>(f) + 1];
    const double right = edges[static_cast<size_t>(f) + 2];
    for (int k = 0; k < bins; ++k) {
      const double hz = static_cast<double>(k) * sample_rate / cfg.fft_size;
      if (hz > left && hz <= center) {
        bank(f, k) = (hz - left) / (center - left);
      } else if (hz > center && hz < right) {
        bank(f, k) = (right - hz) / (right - center);
      }
    }
  }
  return bank;
}

MatrixXd dct_matrix(int num_out, int num_in) {
  MatrixXd d(num_out, num_in);
  for (int k = 0; k < num_out; ++k) {
    const double scale = std::sqrt((k == 0 ? 1.0 : 2.0) / num_in);
    for (int n = 0; n < num_in; ++n) {
      d(k, n) = scale * std::cos(std::numbers::pi * k * (2.0 * n + 1.0) / (2.0 * num_in));
    }
  }
  return d;
}

MatrixXd deltas(const MatrixXd& x, int window) {
  const Eigen::Index T = x.rows();
  double denom = 0.0;
  for (int n = 1; n <= window; ++n) denom += 2.0 * n * n;
  MatrixXd d = MatrixXd::Zero(T, x.cols());
  auto clamp = [T](Eigen::Index i) { return std::clamp<Eigen::Index>(i, 0, T - 1); };
  for (Eigen::Index t = 0; t < T; ++t) {
    for (int n = 1; n <= window; ++n) {
      d.row(t) += n * (x.row(clamp(t + n)) - x.row(clamp(t - n)));
    }
  }
  return d / denom;
}

FeatureSequence mfcc(const Waveform& w, const FeatureConfig& cfg) {
  const FeatureSequence power = power_spectrum(w, cfg);
  const MatrixXd bank = mel_filterbank(w.sample_rate, cfg);
  const MatrixXd energies = power.frames * bank.transpose();
  const MatrixXd log_energies = energies.cwiseMax(cfg.log_floor).array().log().matrix();
  const MatrixXd ceps = log_energies * dct_matrix(cfg.num_ceps, cfg.num_filters).transpose();
  const MatrixXd d1 = deltas(ceps, cfg.delta_window);
  const MatrixXd d2 = deltas(d1, cfg.delta_window);

  FeatureSequence out;
  out.frame_stride_ms = cfg.stride_ms;
  out.window_ms = cfg.window_ms;
  out.frames.resize(ceps.rows(), 3 * cfg.num_ceps);
  out.frames << ceps, d1, d2;
  return out;
}

FeatureSequence normalize(const FeatureSequence& f) {
  FeatureSequence out = f;
  const Eigen::Index T = f.frames.rows();
  if (T == 0) return out;
  for (Eigen::Index j = 0; j < f.frames.cols(); ++j) {
    auto col = f.frames.col(j);
    const double mean = col.mean();
    const double var = (col.array() - mean).square().mean();
    const double sd = std::sqrt(var);
    if (sd <= 1e-12 * std::max(1.0, std::abs(mean))) {
      out.frames.col(j).setZero();
    } else {
      out.frames.col(j) = (col.array() - mean) / sd;
    }
  }
  return out;
}

namespace {

uint32_t read_u32(const char* p) {
  uint32_t v;
  std::memcpy(&v, p, 4);
  return v;
}

uint16_t read_u16(const char* p) {
  uint16_t v;
  std::memcpy(&v, p, 2);
  return v;
}

std::vector<char> slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

VectorXd pcm16_to_samples(const char* data, size_t bytes) {
  const size_t n = bytes / 2;
  VectorXd s(static_cast<Eigen::Index>(n));
  for (size_t i = 0; i < n; ++i) {
    int16_t v;
    std::memcpy(&v, data + 2 * i, 2);
    s[static_cast<Eigen::Index>(i)] = v / 32768.0;
  }
  return s;
}

}  // namespace

Waveform read_wav(const std::string& path) {
  const std::vector<char> bytes = slurp(path);
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw IoError("not a RIFF/WAVE file: " + path);
  }
  Waveform w;
  bool have_fmt = false;
  size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const char* chunk = bytes.data() + pos;
    const uint32_t size = read_u32(chunk + 4);
    const char* body = chunk + 8;
    if (pos + 8 + size > bytes.size()) throw IoError("truncated chunk in " + path);
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (size < 16) throw IoError("short fmt chunk in " + path);
      const uint16_t format = read_u16(body);
      const uint16_t channels = read_u16(body + 2);
      const uint16_t bits = read_u16(body + 14);
      if (format != 1 || channels != 1 || bits != 16) {
        throw IoError("only 16-bit mono PCM WAV is supported: " + path);
      }
      w.sample_rate = static_cast<int>(read_u32(body + 4));
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      if (!have_fmt) throw IoError("data chunk before fmt chunk in " + path);
      w.samples = pcm16_to_samples(body, size);
      return w;
    }
    pos += 8 + size + (size & 1u);
  }
  throw IoError("no data chunk in " + path);
}

void write_wav(const std::string& path, const Waveform& w) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  const auto n = static_cast<uint32_t>(w.samples.size());
  const uint32_t data_bytes = n * 2;
  auto u32 = [&](uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); };
  auto u16 = [&](uint16_t v) { out.write(reinterpret_cast<const char*>(&v), 2); };
  out.write("RIFF", 4);
  u32(36 + data_bytes);
  out.write("WAVE", 4);
  out.write("fmt ", 4);
  u32(16);
  u16(1);
  u16(1);
  u32(static_cast<uint32_t>(w.sample_rate));
  u32(static_cast<uint32_t>(w.sample_rate) * 2);
  u16(2);
  u16(16);
  out.write("data", 4);
  u32(data_bytes);
  for (Eigen::Index i = 0; i < w.samples.size(); ++i) {
    const double v = std::clamp(w.samples[i] * 32768.0, -32768.0, 32767.0);
    u16(static_cast<uint16_t>(static_cast<int16_t>(std::lround(v))));
  }
}

Waveform read_raw_pcm(const std::string& path, int sample_rate) {
  const std::vector<char> bytes = slurp(path);
  if (bytes.size() % 2 != 0) throw IoError("odd byte count in raw PCM file " + path);
  return Waveform{pcm16_to_samples(bytes.data(), bytes.size()), sample_rate};
}

void save_features(const std::string& path, const FeatureSequence& f) {
  write_matrix_file(path, MatrixFile{f.frames.cast<float>(), static_cast<float>(f.frame_stride_ms)});
}

FeatureSequence load_features(const std::string& path) {
  MatrixFile file = read_matrix_file(path);
  FeatureSequence f;
  f.frames = file.values.cast<double>();
  f.frame_stride_ms = file.stride_ms;
  return f;
}

}  // namespace asr
