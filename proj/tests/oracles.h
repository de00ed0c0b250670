#pragma once

// Reference implementations used only by tests. None of these share code
// with the library's dynamic programs: paths are enumerated explicitly and
// convolutions are evaluated with plain loops.

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <numbers>
#include <random>
#include <vector>

#include "asr/acoustic.h"
#include "asr/alphabet.h"
#include "asr/criterion.h"

namespace asr::oracle {

inline double log_sum_exp(const std::vector<double>& v) {
  if (v.empty()) return -std::numeric_limits<double>::infinity();
  const double m = *std::max_element(v.begin(), v.end());
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

/// Calls fn(path) for every frame labeling in [0, L)^T.
inline void for_each_path(int num_labels, int frames, const std::function<void(const LabelSequence&)>& fn) {
  LabelSequence path(static_cast<size_t>(frames), 0);
  while (true) {
    fn(path);
    int t = frames - 1;
    while (t >= 0 && ++path[static_cast<size_t>(t)] == num_labels) {
      path[static_cast<size_t>(t)] = 0;
      --t;
    }
    if (t < 0) return;
  }
}

inline double path_score(const LabelSequence& path, const MatrixXd& f, const MatrixXd* trans,
                         const VectorXd* start) {
  double s = 0.0;
  for (size_t t = 0; t < path.size(); ++t) {
    s += f(static_cast<Eigen::Index>(t), path[t]);
    if (t == 0) {
      if (start) s += (*start)(path[0]);
    } else if (trans) {
      s += (*trans)(path[t - 1], path[t]);
    }
  }
  return s;
}

inline LabelSequence collapse(const LabelSequence& p) {
  LabelSequence out;
  for (LabelId l : p) {
    if (out.empty() || out.back() != l) out.push_back(l);
  }
  return out;
}

inline LabelSequence collapse_blank(const LabelSequence& p, LabelId blank) {
  LabelSequence out;
  LabelId prev = -1;
  for (LabelId l : p) {
    if (l != prev && l != blank) out.push_back(l);
    prev = l;
  }
  return out;
}

struct Enumerated {
  std::vector<double> accepted;
  std::vector<double> all;
  std::vector<LabelSequence> accepted_paths;
};

/// ASG: a frame labeling belongs to the constrained graph iff merging
/// duplicates gives back the transcription.
inline Enumerated enumerate_asg(const MatrixXd& f, const MatrixXd& trans, const VectorXd& start,
                                const LabelSequence& labels) {
  Enumerated e;
  for_each_path(static_cast<int>(f.cols()), static_cast<int>(f.rows()), [&](const LabelSequence& p) {
    const double s = path_score(p, f, &trans, &start);
    e.all.push_back(s);
    if (collapse(p) == labels) {
      e.accepted.push_back(s);
      e.accepted_paths.push_back(p);
    }
  });
  return e;
}

inline double asg_loss(const MatrixXd& f, const MatrixXd& trans, const VectorXd& start,
                       const LabelSequence& labels) {
  const Enumerated e = enumerate_asg(f, trans, start, labels);
  return log_sum_exp(e.all) - log_sum_exp(e.accepted);
}

inline Enumerated enumerate_ctc(const MatrixXd& f, const LabelSequence& labels, LabelId blank) {
  Enumerated e;
  for_each_path(static_cast<int>(f.cols()), static_cast<int>(f.rows()), [&](const LabelSequence& p) {
    const double s = path_score(p, f, nullptr, nullptr);
    e.all.push_back(s);
    if (collapse_blank(p, blank) == labels) {
      e.accepted.push_back(s);
      e.accepted_paths.push_back(p);
    }
  });
  return e;
}

inline double ctc_loss(const MatrixXd& f, const LabelSequence& labels, LabelId blank) {
  return -log_sum_exp(enumerate_ctc(f, labels, blank).accepted);
}

/// Random transcription with no two equal neighbours.
inline LabelSequence random_labels(std::mt19937_64& rng, int num_labels, int length) {
  std::uniform_int_distribution<int> pick(0, num_labels - 1);
  LabelSequence out;
  while (static_cast<int>(out.size()) < length) {
    const int l = pick(rng);
    if (!out.empty() && out.back() == l) continue;
    out.push_back(l);
  }
  return out;
}

/// Random transcription over [0, num_letters); neighbours may repeat.
inline LabelSequence random_ctc_labels(std::mt19937_64& rng, int num_letters, int length) {
  std::uniform_int_distribution<int> pick(0, num_letters - 1);
  LabelSequence out;
  for (int i = 0; i < length; ++i) out.push_back(pick(rng));
  return out;
}

inline MatrixXd random_matrix(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols,
                              double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

inline VectorXd random_vector(std::mt19937_64& rng, Eigen::Index n, double scale = 1.0) {
  std::normal_distribution<double> d(0.0, scale);
  VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = d(rng);
  return v;
}

/// Central difference of fn with respect to x(i), restoring x afterwards.
inline double central_difference(double& x, double step, const std::function<double()>& fn) {
  const double saved = x;
  x = saved + step;
  const double up = fn();
  x = saved - step;
  const double down = fn();
  x = saved;
  return (up - down) / (2.0 * step);
}

/// |a - b| / max(1, |a|, |b|): relative for large values, absolute near 0.
inline double rel_error(double a, double b) {
  return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
}

/// y[t][i] = b[i] + sum_j sum_k w[i][j][k] * x[dw*t + k][j]
inline MatrixXd naive_conv(const MatrixXd& x, const ConvLayerSpec& layer, const LayerParams<double>& p) {
  const Eigen::Index ty = (x.rows() - layer.kw) / layer.dw + 1;
  MatrixXd y(ty, layer.d_out);
  for (Eigen::Index t = 0; t < ty; ++t) {
    for (int i = 0; i < layer.d_out; ++i) {
      double s = p.bias(i);
      for (int j = 0; j < layer.d_in; ++j) {
        for (int k = 0; k < layer.kw; ++k) {
          s += p.w(i, j, k, layer.d_in) * x(layer.dw * t + k, j);
        }
      }
      y(t, i) = s;
    }
  }
  return y;
}

/// Direct O(N^2) DFT power at each bin 0..n/2 of a real frame zero-padded to n.
inline std::vector<double> dft_power(const std::vector<double>& frame, int n) {
  std::vector<double> out(static_cast<size_t>(n / 2 + 1));
  for (int k = 0; k <= n / 2; ++k) {
    std::complex<double> acc = 0.0;
    for (size_t i = 0; i < frame.size(); ++i) {
      const double angle = -2.0 * std::numbers::pi * k * static_cast<double>(i) / n;
      acc += frame[i] * std::complex<double>(std::cos(angle), std::sin(angle));
    }
    out[static_cast<size_t>(k)] = std::norm(acc);
  }
  return out;
}

/// Textbook Levenshtein with a full (n+1) x (m+1) table.
template <typename T>
size_t full_table_edit_distance(const std::vector<T>& a, const std::vector<T>& b) {
  std::vector<std::vector<size_t>> d(a.size() + 1, std::vector<size_t>(b.size() + 1));
  for (size_t i = 0; i <= a.size(); ++i) d[i][0] = i;
  for (size_t j = 0; j <= b.size(); ++j) d[0][j] = j;
  for (size_t i = 1; i <= a.size(); ++i) {
    for (size_t j = 1; j <= b.size(); ++j) {
      d[i][j] = std::min({d[i - 1][j] + 1, d[i][j - 1] + 1, d[i - 1][j - 1] + (a[i - 1] == b[j - 1] ? 0u : 1u)});
    }
  }
  return d[a.size()][b.size()];
}

}  // namespace asr::oracle
