#include "asr/criterion.h"

#include <algorithm>
#include <cmath>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace asr {

namespace {

constexpr double kNormTolerance = 1e-5;

// Accumulates logadd or max over a stream of values without storing them.
// Two passes are avoided by rescaling the running sum when the max moves.
class Accumulator {
 public:
  explicit Accumulator(ScoreMode mode) : mode_(mode) {}

  void add(double v) {
    if (v == kNegInf<double>) return;
    if (mode_ == ScoreMode::kMax) {
      if (v > max_) max_ = v;
      return;
    }
    if (v <= max_) {
      sum_ += std::exp(v - max_);
    } else {
      sum_ = (max_ == kNegInf<double> ? 0.0 : sum_ * std::exp(max_ - v)) + 1.0;
      max_ = v;
    }
  }

  double value() const {
    if (max_ == kNegInf<double>) return kNegInf<double>;
    return mode_ == ScoreMode::kMax ? max_ : max_ + std::log(sum_);
  }

 private:
  ScoreMode mode_;
  double max_ = kNegInf<double>;
  double sum_ = 0.0;
};

template <typename Scalar>
void check_shapes(const UnfoldedGraph& graph, const EmissionTable<Scalar>& emissions,
                  const TransitionTable<Scalar>* transitions) {
  if (emissions.frames() != graph.frames) {
    throw ShapeError("emission table has " + std::to_string(emissions.frames()) +
                     " frames, graph is unfolded over " + std::to_string(graph.frames));
  }
  for (const auto& s : graph.states) {
    if (s.label < 0 || s.label >= emissions.labels()) {
      throw ShapeError("graph label " + std::to_string(s.label) + " outside emission table with " +
                       std::to_string(emissions.labels()) + " labels");
    }
  }
  if (transitions) {
    const auto L = emissions.labels();
    if (transitions->trans.rows() != L || transitions->trans.cols() != L ||
        transitions->start.size() != L) {
      throw ShapeError("transition table does not match " + std::to_string(L) + " labels");
    }
  }
}

template <typename Scalar>
double trans_score(const TransitionTable<Scalar>* tr, LabelId from, LabelId to) {
  return tr ? static_cast<double>(tr->trans(from, to)) : 0.0;
}

template <typename Scalar>
double start_score(const TransitionTable<Scalar>* tr, LabelId to) {
  return tr ? static_cast<double>(tr->start(to)) : 0.0;
}

// alpha(t, s): score of all partial paths ending in state s at frame t.
template <typename Scalar>
MatrixXd forward_table(const UnfoldedGraph& graph, const EmissionTable<Scalar>& em,
                       const TransitionTable<Scalar>* tr, ScoreMode mode) {
  const int T = graph.frames;
  MatrixXd alpha = MatrixXd::Constant(T, graph.num_states(), kNegInf<double>);
  for (int s : graph.active[0]) {
    const GraphState& st = graph.states[static_cast<size_t>(s)];
    if (st.initial) alpha(0, s) = static_cast<double>(em.scores(0, st.label)) + start_score(tr, st.label);
  }
  for (int t = 1; t < T; ++t) {
    for (int s : graph.active[static_cast<size_t>(t)]) {
      const GraphState& st = graph.states[static_cast<size_t>(s)];
      Accumulator acc(mode);
      for (int p : st.predecessors) {
        const double prev = alpha(t - 1, p);
        if (prev == kNegInf<double>) continue;
        acc.add(prev + trans_score(tr, graph.states[static_cast<size_t>(p)].label, st.label));
      }
      const double v = acc.value();
      if (v != kNegInf<double>) alpha(t, s) = v + static_cast<double>(em.scores(t, st.label));
    }
  }
  return alpha;
}

// beta(t, s): score of all path suffixes leaving state s at frame t, not
// including s's own emission.
template <typename Scalar>
MatrixXd backward_table(const UnfoldedGraph& graph, const EmissionTable<Scalar>& em,
                        const TransitionTable<Scalar>* tr) {
  const int T = graph.frames;
  MatrixXd beta = MatrixXd::Constant(T, graph.num_states(), kNegInf<double>);
  for (int s : graph.active[static_cast<size_t>(T - 1)]) {
    if (graph.states[static_cast<size_t>(s)].accepting) beta(T - 1, s) = 0.0;
  }
  for (int t = T - 2; t >= 0; --t) {
    for (int p : graph.active[static_cast<size_t>(t)]) {
      const GraphState& st = graph.states[static_cast<size_t>(p)];
      Accumulator acc(ScoreMode::kLogAdd);
      for (int s : st.successors) {
        const double next = beta(t + 1, s);
        if (next == kNegInf<double>) continue;
        const LabelId to = graph.states[static_cast<size_t>(s)].label;
        acc.add(trans_score(tr, st.label, to) + static_cast<double>(em.scores(t + 1, to)) + next);
      }
      beta(t, p) = acc.value();
    }
  }
  return beta;
}

double final_score(const UnfoldedGraph& graph, const MatrixXd& alpha, ScoreMode mode) {
  Accumulator acc(mode);
  const int last = graph.frames - 1;
  for (int s : graph.active[static_cast<size_t>(last)]) {
    if (graph.states[static_cast<size_t>(s)].accepting) acc.add(alpha(last, s));
  }
  return acc.value();
}

void check_finite_labels(std::span<const LabelId> labels, int num_labels) {
  for (size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= num_labels) {
      throw ShapeError("transcription label " + std::to_string(labels[i]) + " at position " +
                       std::to_string(i) + " outside emission table with " +
                       std::to_string(num_labels) + " labels");
    }
  }
}

template <typename Scalar>
void check_finite(const EmissionTable<Scalar>& em) {
  if (!em.scores.allFinite()) throw Error("emission table contains non-finite scores");
}

void check_asg_transcription(std::span<const LabelId> labels, int frames) {
  const int N = static_cast<int>(labels.size());
  if (N == 0) throw InfeasibleError("ASG transcription is empty");
  if (frames < N) {
    throw InfeasibleError("ASG transcription of " + std::to_string(N) + " labels needs at least " +
                          std::to_string(N) + " frames, got " + std::to_string(frames));
  }
  for (int k = 1; k < N; ++k) {
    if (labels[static_cast<size_t>(k)] == labels[static_cast<size_t>(k - 1)]) {
      throw Error("ASG transcription repeats label " + std::to_string(labels[static_cast<size_t>(k)]) +
                  " at position " + std::to_string(k) + "; use repetition labels");
    }
  }
}

// Same quantities as lattice_marginals over build_asg_graph, specialised to
// the stay-or-advance chain. State n can only be occupied at frame t when
// n <= t and the remaining N-1-n labels fit in the remaining frames, so each
// frame touches a band of states and avoids the generic graph bookkeeping.
template <typename Scalar>
LatticeMarginals asg_chain_marginals(std::span<const LabelId> labels, const EmissionTable<Scalar>& em,
                                     const TransitionTable<Scalar>& tr) {
  const int T = em.frames();
  const int N = static_cast<int>(labels.size());
  const int L = em.labels();
  check_asg_transcription(labels, T);
  auto lab = [&](int n) { return labels[static_cast<size_t>(n)]; };
  auto lo = [&](int t) { return std::max(0, N - T + t); };
  auto hi = [&](int t) { return std::min(t, N - 1); };
  auto emit = [&](int t, int n) { return static_cast<double>(em.scores(t, lab(n))); };

  std::vector<double> stay(static_cast<size_t>(N)), advance(static_cast<size_t>(N), kNegInf<double>);
  for (int n = 0; n < N; ++n) {
    stay[static_cast<size_t>(n)] = static_cast<double>(tr.trans(lab(n), lab(n)));
    if (n > 0) advance[static_cast<size_t>(n)] = static_cast<double>(tr.trans(lab(n - 1), lab(n)));
  }

  MatrixXd alpha = MatrixXd::Constant(T, N, kNegInf<double>);
  alpha(0, 0) = emit(0, 0) + static_cast<double>(tr.start(lab(0)));
  for (int t = 1; t < T; ++t) {
    for (int n = lo(t); n <= hi(t); ++n) {
      const double s = alpha(t - 1, n) + stay[static_cast<size_t>(n)];
      const double a = n > 0 ? alpha(t - 1, n - 1) + advance[static_cast<size_t>(n)] : kNegInf<double>;
      alpha(t, n) = logadd(s, a) + emit(t, n);
    }
  }
  MatrixXd beta = MatrixXd::Constant(T, N, kNegInf<double>);
  beta(T - 1, N - 1) = 0.0;
  for (int t = T - 2; t >= 0; --t) {
    for (int n = lo(t); n <= hi(t); ++n) {
      const double s = stay[static_cast<size_t>(n)] + emit(t + 1, n) + beta(t + 1, n);
      const double a = n + 1 < N ? advance[static_cast<size_t>(n + 1)] + emit(t + 1, n + 1) + beta(t + 1, n + 1)
                                 : kNegInf<double>;
      beta(t, n) = logadd(s, a);
    }
  }

  LatticeMarginals m;
  m.log_z = alpha(T - 1, N - 1);
  if (!std::isfinite(m.log_z)) throw Error("lattice has non-finite total score");
  m.emissions = MatrixXd::Zero(T, L);
  m.transitions = MatrixXd::Zero(L, L);
  m.start = VectorXd::Zero(L);
  m.start(lab(0)) = 1.0;
  std::vector<double> stay_count(static_cast<size_t>(N), 0.0), advance_count(static_cast<size_t>(N), 0.0);
  for (int t = 0; t < T; ++t) {
    for (int n = lo(t); n <= hi(t); ++n) {
      const double b = beta(t, n);
      m.emissions(t, lab(n)) += std::exp(alpha(t, n) + b - m.log_z);
      if (t == 0) continue;
      const double tail = emit(t, n) + b - m.log_z;
      stay_count[static_cast<size_t>(n)] += std::exp(alpha(t - 1, n) + stay[static_cast<size_t>(n)] + tail);
      if (n > 0) {
        advance_count[static_cast<size_t>(n)] +=
            std::exp(alpha(t - 1, n - 1) + advance[static_cast<size_t>(n)] + tail);
      }
    }
  }
  for (int n = 0; n < N; ++n) {
    m.transitions(lab(n), lab(n)) += stay_count[static_cast<size_t>(n)];
    if (n > 0) m.transitions(lab(n - 1), lab(n)) += advance_count[static_cast<size_t>(n)];
  }
  return m;
}

int resolve_threads(int threads) {
#ifdef _OPENMP
  return threads > 0 ? threads : omp_get_max_threads();
#else
  (void)threads;
  return 1;
#endif
}

}  // namespace

void unfold(UnfoldedGraph& graph, int frames) {
  if (frames < 1) throw InfeasibleError("graph needs at least one frame");
  const int S = graph.num_states();
  graph.frames = frames;
  for (auto& s : graph.states) s.successors.clear();
  for (int s = 0; s < S; ++s) {
    auto& preds = graph.states[static_cast<size_t>(s)].predecessors;
    std::sort(preds.begin(), preds.end());
    for (int p : preds) graph.states[static_cast<size_t>(p)].successors.push_back(s);
  }

  std::vector<std::vector<char>> fwd(static_cast<size_t>(frames), std::vector<char>(S, 0));
  std::vector<std::vector<char>> bwd(static_cast<size_t>(frames), std::vector<char>(S, 0));
  for (int s = 0; s < S; ++s) fwd[0][s] = graph.states[static_cast<size_t>(s)].initial;
  for (int t = 1; t < frames; ++t) {
    for (int s = 0; s < S; ++s) {
      for (int p : graph.states[static_cast<size_t>(s)].predecessors) {
        if (fwd[t - 1][p]) {
          fwd[t][s] = 1;
          break;
        }
      }
    }
  }
  for (int s = 0; s < S; ++s) bwd[frames - 1][s] = graph.states[static_cast<size_t>(s)].accepting;
  for (int t = frames - 2; t >= 0; --t) {
    for (int s = 0; s < S; ++s) {
      for (int n : graph.states[static_cast<size_t>(s)].successors) {
        if (bwd[t + 1][n]) {
          bwd[t][s] = 1;
          break;
        }
      }
    }
  }
  graph.active.assign(static_cast<size_t>(frames), {});
  for (int t = 0; t < frames; ++t) {
    for (int s = 0; s < S; ++s) {
      if (fwd[t][s] && bwd[t][s]) graph.active[static_cast<size_t>(t)].push_back(s);
    }
  }
  if (graph.active[0].empty()) {
    throw InfeasibleError("no accepted path over " + std::to_string(frames) + " frames");
  }
}

int ctc_min_frames(std::span<const LabelId> labels) {
  int n = static_cast<int>(labels.size());
  for (size_t i = 1; i < labels.size(); ++i) {
    if (labels[i] == labels[i - 1]) ++n;
  }
  return n;
}

UnfoldedGraph build_ctc_graph(std::span<const LabelId> labels, int frames, LabelId blank) {
  for (LabelId l : labels) {
    if (l == blank) throw Error("CTC transcription contains the blank label");
  }
  const int need = std::max(1, ctc_min_frames(labels));
  if (frames < need) {
    throw InfeasibleError("CTC transcription of " + std::to_string(labels.size()) +
                          " labels needs at least " + std::to_string(need) + " frames, got " +
                          std::to_string(frames));
  }
  const int N = static_cast<int>(labels.size());
  UnfoldedGraph g;
  g.states.resize(static_cast<size_t>(2 * N + 1));
  for (int s = 0; s < 2 * N + 1; ++s) {
    GraphState& st = g.states[static_cast<size_t>(s)];
    const bool is_blank = s % 2 == 0;
    st.label = is_blank ? blank : labels[static_cast<size_t>(s / 2)];
    if (s >= 2 && !is_blank && st.label != g.states[static_cast<size_t>(s - 2)].label) {
      st.predecessors.push_back(s - 2);
    }
    if (s >= 1) st.predecessors.push_back(s - 1);
    st.predecessors.push_back(s);
    st.initial = s <= 1;
    st.accepting = s >= 2 * N - 1;
  }
  unfold(g, frames);
  return g;
}

UnfoldedGraph build_asg_graph(std::span<const LabelId> labels, int frames) {
  check_asg_transcription(labels, frames);
  const int N = static_cast<int>(labels.size());
  UnfoldedGraph g;
  g.states.resize(static_cast<size_t>(N));
  for (int k = 0; k < N; ++k) {
    GraphState& st = g.states[static_cast<size_t>(k)];
    st.label = labels[static_cast<size_t>(k)];
    if (k > 0) st.predecessors.push_back(k - 1);
    st.predecessors.push_back(k);
    st.initial = k == 0;
    st.accepting = k == N - 1;
  }
  unfold(g, frames);
  return g;
}

UnfoldedGraph build_full_graph(int num_labels, int frames) {
  if (num_labels < 1) throw Error("full graph needs at least one label");
  UnfoldedGraph g;
  g.states.resize(static_cast<size_t>(num_labels));
  for (int j = 0; j < num_labels; ++j) {
    GraphState& st = g.states[static_cast<size_t>(j)];
    st.label = j;
    st.predecessors.resize(static_cast<size_t>(num_labels));
    for (int i = 0; i < num_labels; ++i) st.predecessors[static_cast<size_t>(i)] = i;
    st.initial = true;
    st.accepting = true;
  }
  unfold(g, frames);
  return g;
}

bool accepts(const UnfoldedGraph& graph, std::span<const LabelId> frame_labels) {
  if (static_cast<int>(frame_labels.size()) != graph.frames || graph.frames == 0) return false;
  const int S = graph.num_states();
  std::vector<char> cur(static_cast<size_t>(S), 0), next(static_cast<size_t>(S), 0);
  for (int s = 0; s < S; ++s) {
    const auto& st = graph.states[static_cast<size_t>(s)];
    cur[static_cast<size_t>(s)] = st.initial && st.label == frame_labels[0];
  }
  for (size_t t = 1; t < frame_labels.size(); ++t) {
    for (int s = 0; s < S; ++s) {
      const auto& st = graph.states[static_cast<size_t>(s)];
      next[static_cast<size_t>(s)] = 0;
      if (st.label != frame_labels[t]) continue;
      for (int p : st.predecessors) {
        if (cur[static_cast<size_t>(p)]) {
          next[static_cast<size_t>(s)] = 1;
          break;
        }
      }
    }
    std::swap(cur, next);
  }
  for (int s = 0; s < S; ++s) {
    if (cur[static_cast<size_t>(s)] && graph.states[static_cast<size_t>(s)].accepting) return true;
  }
  return false;
}

double logadd(std::span<const double> values) {
  if (values.empty()) return kNegInf<double>;
  const double m = *std::max_element(values.begin(), values.end());
  if (m == kNegInf<double>) return m;
  if (std::isinf(m)) return m;
  double sum = 0.0;
  for (double v : values) sum += std::exp(v - m);
  return m + std::log(sum);
}

double logadd(double a, double b) {
  if (a < b) std::swap(a, b);
  if (b == kNegInf<double>) return a;
  return a + std::log1p(std::exp(b - a));
}

template <typename Scalar>
ForwardResult forward_score(const UnfoldedGraph& graph, const EmissionTable<Scalar>& emissions,
                            const TransitionTable<Scalar>* transitions, ScoreMode mode) {
  check_shapes(graph, emissions, transitions);
  ForwardResult out;
  out.table = forward_table(graph, emissions, transitions, mode);
  out.score = final_score(graph, out.table, mode);
  return out;
}

template <typename Scalar>
ViterbiResult viterbi(const UnfoldedGraph& graph, const EmissionTable<Scalar>& emissions,
                      const TransitionTable<Scalar>* transitions) {
  check_shapes(graph, emissions, transitions);
  const int T = graph.frames;
  const int S = graph.num_states();
  MatrixXd score = MatrixXd::Constant(T, S, kNegInf<double>);
  Eigen::MatrixXi back = Eigen::MatrixXi::Constant(T, S, -1);
  for (int s : graph.active[0]) {
    const GraphState& st = graph.states[static_cast<size_t>(s)];
    if (st.initial) {
      score(0, s) = static_cast<double>(emissions.scores(0, st.label)) + start_score(transitions, st.label);
    }
  }
  for (int t = 1; t < T; ++t) {
    for (int s : graph.active[static_cast<size_t>(t)]) {
      const GraphState& st = graph.states[static_cast<size_t>(s)];
      double best = kNegInf<double>;
      int arg = -1;
      for (int p : st.predecessors) {
        const double prev = score(t - 1, p);
        if (prev == kNegInf<double>) continue;
        const double v = prev + trans_score(transitions, graph.states[static_cast<size_t>(p)].label, st.label);
        if (v > best) {
          best = v;
          arg = p;
        }
      }
      if (arg >= 0) {
        score(t, s) = best + static_cast<double>(emissions.scores(t, st.label));
        back(t, s) = arg;
      }
    }
  }
  ViterbiResult out;
  int end = -1;
  for (int s : graph.active[static_cast<size_t>(T - 1)]) {
    if (!graph.states[static_cast<size_t>(s)].accepting) continue;
    if (score(T - 1, s) > out.score) {
      out.score = score(T - 1, s);
      end = s;
    }
  }
  if (end < 0) throw InfeasibleError("no accepted path");
  out.states.resize(static_cast<size_t>(T));
  out.frame_labels.resize(static_cast<size_t>(T));
  for (int t = T - 1, s = end; t >= 0; --t) {
    out.states[static_cast<size_t>(t)] = s;
    out.frame_labels[static_cast<size_t>(t)] = graph.states[static_cast<size_t>(s)].label;
    s = back(t, s);
  }
  return out;
}

template <typename Scalar>
LatticeMarginals lattice_marginals(const UnfoldedGraph& graph,
                                   const EmissionTable<Scalar>& emissions,
                                   const TransitionTable<Scalar>* transitions) {
  check_shapes(graph, emissions, transitions);
  const int T = graph.frames;
  const int L = emissions.labels();
  const MatrixXd alpha = forward_table(graph, emissions, transitions, ScoreMode::kLogAdd);
  const MatrixXd beta = backward_table(graph, emissions, transitions);

  LatticeMarginals m;
  m.log_z = final_score(graph, alpha, ScoreMode::kLogAdd);
  if (!std::isfinite(m.log_z)) throw Error("lattice has non-finite total score");
  m.emissions = MatrixXd::Zero(T, L);
  m.transitions = MatrixXd::Zero(L, L);
  m.start = VectorXd::Zero(L);

  for (int t = 0; t < T; ++t) {
    for (int s : graph.active[static_cast<size_t>(t)]) {
      const GraphState& st = graph.states[static_cast<size_t>(s)];
      const double node = alpha(t, s) + beta(t, s) - m.log_z;
      if (node == kNegInf<double>) continue;
      const double p = std::exp(node);
      m.emissions(t, st.label) += p;
      if (t == 0 && st.initial) m.start(st.label) += p;
      if (t == 0 || !transitions) continue;
      const double tail = static_cast<double>(emissions.scores(t, st.label)) + beta(t, s) - m.log_z;
      for (int q : st.predecessors) {
        const double prev = alpha(t - 1, q);
        if (prev == kNegInf<double>) continue;
        const LabelId from = graph.states[static_cast<size_t>(q)].label;
        m.transitions(from, st.label) += std::exp(prev + trans_score(transitions, from, st.label) + tail);
      }
    }
  }
  return m;
}

template <typename Scalar>
CriterionResult<Scalar> ctc_loss(const EmissionTable<Scalar>& emissions,
                                 std::span<const LabelId> labels, LabelId blank,
                                 CtcOptions options) {
  const int L = emissions.labels();
  if (blank < 0 || blank >= L) throw ShapeError("blank id outside emission table");
  check_finite_labels(labels, L);
  check_finite(emissions);
  if (options.strict) {
    for (int t = 0; t < emissions.frames(); ++t) {
      const VectorXd row = emissions.scores.row(t).template cast<double>().transpose();
      const double z = logadd(std::span<const double>(row.data(), static_cast<size_t>(row.size())));
      if (std::abs(z) > kNormTolerance) {
        throw Error("CTC emissions are not normalized at frame " + std::to_string(t));
      }
    }
  }
  const UnfoldedGraph graph = build_ctc_graph(labels, emissions.frames(), blank);
  const LatticeMarginals m = lattice_marginals<Scalar>(graph, emissions, nullptr);
  CriterionResult<Scalar> out;
  out.loss = -m.log_z;
  out.d_emissions = (-m.emissions).cast<Scalar>();
  out.d_transitions = Matrix<Scalar>::Zero(L, L);
  out.d_start = Vector<Scalar>::Zero(L);
  return out;
}

template <typename Scalar>
CriterionResult<Scalar> asg_loss(const EmissionTable<Scalar>& emissions,
                                 const TransitionTable<Scalar>& transitions,
                                 std::span<const LabelId> labels) {
  check_finite_labels(labels, emissions.labels());
  check_finite(emissions);
  check_asg_transcription(labels, emissions.frames());
  // The denominator pass validates the transition table shape first.
  const UnfoldedGraph full = build_full_graph(emissions.labels(), emissions.frames());
  const LatticeMarginals den = lattice_marginals(full, emissions, &transitions);
  const LatticeMarginals num = asg_chain_marginals(labels, emissions, transitions);
  CriterionResult<Scalar> out;
  out.loss = den.log_z - num.log_z;
  out.d_emissions = (den.emissions - num.emissions).cast<Scalar>();
  out.d_transitions = (den.transitions - num.transitions).cast<Scalar>();
  out.d_start = (den.start - num.start).cast<Scalar>();
  return out;
}

template <typename Scalar>
std::vector<CriterionResult<Scalar>> asg_loss_batch(std::span<const SequenceSample<Scalar>> batch,
                                                    const TransitionTable<Scalar>& transitions,
                                                    int threads) {
  std::vector<CriterionResult<Scalar>> out(batch.size());
  const auto n = static_cast<std::ptrdiff_t>(batch.size());
  const int workers = resolve_threads(threads);
  (void)workers;
  std::exception_ptr error;
#pragma omp parallel for num_threads(workers) schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      const auto& sample = batch[static_cast<size_t>(i)];
      out[static_cast<size_t>(i)] = asg_loss(sample.emissions, transitions, sample.labels);
    } catch (...) {
#pragma omp critical
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
  return out;
}

template <typename Scalar>
std::vector<CriterionResult<Scalar>> ctc_loss_batch(std::span<const SequenceSample<Scalar>> batch,
                                                    LabelId blank, int threads) {
  std::vector<CriterionResult<Scalar>> out(batch.size());
  const auto n = static_cast<std::ptrdiff_t>(batch.size());
  const int workers = resolve_threads(threads);
  (void)workers;
  std::exception_ptr error;
#pragma omp parallel for num_threads(workers) schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      const auto& sample = batch[static_cast<size_t>(i)];
      out[static_cast<size_t>(i)] = ctc_loss(sample.emissions, sample.labels, blank);
    } catch (...) {
#pragma omp critical
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
  return out;
}

template <typename Scalar>
Matrix<Scalar> log_softmax(const Matrix<Scalar>& x) {
  Matrix<Scalar> out(x.rows(), x.cols());
  for (Eigen::Index t = 0; t < x.rows(); ++t) {
    const VectorXd row = x.row(t).template cast<double>().transpose();
    const double z = logadd(std::span<const double>(row.data(), static_cast<size_t>(row.size())));
    out.row(t) = (row.array() - z).matrix().transpose().template cast<Scalar>();
  }
  return out;
}

#define ASR_INSTANTIATE_CRITERION(S)                                                              \
  template ForwardResult forward_score<S>(const UnfoldedGraph&, const EmissionTable<S>&,          \
                                          const TransitionTable<S>*, ScoreMode);                  \
  template ViterbiResult viterbi<S>(const UnfoldedGraph&, const EmissionTable<S>&,                \
                                    const TransitionTable<S>*);                                   \
  template LatticeMarginals lattice_marginals<S>(const UnfoldedGraph&, const EmissionTable<S>&,   \
                                                 const TransitionTable<S>*);                      \
  template CriterionResult<S> ctc_loss<S>(const EmissionTable<S>&, std::span<const LabelId>,      \
                                          LabelId, CtcOptions);                                   \
  template CriterionResult<S> asg_loss<S>(const EmissionTable<S>&, const TransitionTable<S>&,     \
                                          std::span<const LabelId>);                              \
  template std::vector<CriterionResult<S>> asg_loss_batch<S>(                                     \
      std::span<const SequenceSample<S>>, const TransitionTable<S>&, int);                        \
  template std::vector<CriterionResult<S>> ctc_loss_batch<S>(std::span<const SequenceSample<S>>,  \
                                                             LabelId, int);                       \
  template Matrix<S> log_softmax<S>(const Matrix<S>&);

ASR_INSTANTIATE_CRITERION(float)
ASR_INSTANTIATE_CRITERION(double)

#undef ASR_INSTANTIATE_CRITERION

}  // namespace asr
