#pragma once

#include <span>
#include <vector>

#include "asr/alphabet.h"
#include "asr/types.h"

namespace asr {

/// T x |L| frame scores f_t(i) in the log domain. `normalized` marks rows
/// that are log-probabilities (CTC input); ASG takes raw scores.
template <typename Scalar>
struct EmissionTable {
  Matrix<Scalar> scores;
  bool normalized = false;

  int frames() const { return static_cast<int>(scores.rows()); }
  int labels() const { return static_cast<int>(scores.cols()); }
};

/// trans(i, j) scores a move from label i at t-1 to label j at t; start(j)
/// scores label j at the first frame.
template <typename Scalar>
struct TransitionTable {
  Matrix<Scalar> trans;
  Vector<Scalar> start;

  static TransitionTable zeros(int num_labels) {
    return {Matrix<Scalar>::Zero(num_labels, num_labels), Vector<Scalar>::Zero(num_labels)};
  }
  int labels() const { return static_cast<int>(trans.rows()); }
};

struct GraphState {
  LabelId label = 0;
  std::vector<int> predecessors;  // ascending state indices
  std::vector<int> successors;
  bool initial = false;
  bool accepting = false;
};

/// A state topology unrolled over `frames` time steps. `active[t]` lists the
/// states (ascending) that lie on at least one accepted path at frame t.
struct UnfoldedGraph {
  int frames = 0;
  std::vector<GraphState> states;
  std::vector<std::vector<int>> active;

  int num_states() const { return static_cast<int>(states.size()); }
};

/// Fills successor lists and the per-frame active sets. Throws
/// InfeasibleError when no path reaches an accepting state at the last frame.
void unfold(UnfoldedGraph& graph, int frames);

/// Smallest T for which a CTC graph over `labels` is feasible.
int ctc_min_frames(std::span<const LabelId> labels);

/// blank, l1, blank, l2, ..., lN, blank; blanks optional except between
/// identical neighbours.
UnfoldedGraph build_ctc_graph(std::span<const LabelId> labels, int frames, LabelId blank);

/// One state per transcription label; stay or advance by one.
UnfoldedGraph build_asg_graph(std::span<const LabelId> labels, int frames);

/// Every label may follow every label.
UnfoldedGraph build_full_graph(int num_labels, int frames);

/// True when some path of `graph` emits exactly `frame_labels`.
bool accepts(const UnfoldedGraph& graph, std::span<const LabelId> frame_labels);

/// log(sum(exp(v))) with max shift. Empty input gives -inf.
double logadd(std::span<const double> values);
double logadd(double a, double b);

enum class ScoreMode { kLogAdd, kMax };

struct ForwardResult {
  double score = kNegInf<double>;
  MatrixXd table;  // frames x states, -inf where inactive
};

/// Path score = sum_t f_t(label) + trans(prev, label), with start(label) at
/// t = 0. `transitions == nullptr` means all-zero transitions (CTC).
template <typename Scalar>
ForwardResult forward_score(const UnfoldedGraph& graph, const EmissionTable<Scalar>& emissions,
                            const TransitionTable<Scalar>* transitions, ScoreMode mode);

struct ViterbiResult {
  LabelSequence frame_labels;
  std::vector<int> states;
  double score = kNegInf<double>;
};

/// Best path; ties go to the lowest state index.
template <typename Scalar>
ViterbiResult viterbi(const UnfoldedGraph& graph, const EmissionTable<Scalar>& emissions,
                      const TransitionTable<Scalar>* transitions);

/// Posterior expectations under the graph's path distribution.
struct LatticeMarginals {
  double log_z = kNegInf<double>;
  MatrixXd emissions;    // frames x labels: P(label at t)
  MatrixXd transitions;  // labels x labels: expected count of i -> j moves
  VectorXd start;        // labels: P(first label = j)
};

template <typename Scalar>
LatticeMarginals lattice_marginals(const UnfoldedGraph& graph,
                                   const EmissionTable<Scalar>& emissions,
                                   const TransitionTable<Scalar>* transitions);

template <typename Scalar>
struct CriterionResult {
  double loss = 0.0;
  Matrix<Scalar> d_emissions;
  Matrix<Scalar> d_transitions;
  Vector<Scalar> d_start;
};

struct CtcOptions {
  // Reject emission rows whose logadd differs from 0 by more than 1e-5.
  bool strict = false;
};

/// -log of the total probability of every CTC alignment of `labels`.
template <typename Scalar>
CriterionResult<Scalar> ctc_loss(const EmissionTable<Scalar>& emissions,
                                 std::span<const LabelId> labels, LabelId blank,
                                 CtcOptions options = {});

/// Globally normalised: -forward(G_asg) + forward(G_full). Gradients are
/// full-graph marginals minus constrained-graph marginals.
template <typename Scalar>
CriterionResult<Scalar> asg_loss(const EmissionTable<Scalar>& emissions,
                                 const TransitionTable<Scalar>& transitions,
                                 std::span<const LabelId> labels);

template <typename Scalar>
struct SequenceSample {
  EmissionTable<Scalar> emissions;
  LabelSequence labels;
};

/// Independent instances evaluated with up to `threads` workers (0 = all
/// hardware threads). Output order matches input and does not depend on the
/// thread count.
template <typename Scalar>
std::vector<CriterionResult<Scalar>> asg_loss_batch(std::span<const SequenceSample<Scalar>> batch,
                                                    const TransitionTable<Scalar>& transitions,
                                                    int threads = 0);

template <typename Scalar>
std::vector<CriterionResult<Scalar>> ctc_loss_batch(std::span<const SequenceSample<Scalar>> batch,
                                                    LabelId blank, int threads = 0);

/// Row-wise log-softmax.
template <typename Scalar>
Matrix<Scalar> log_softmax(const Matrix<Scalar>& x);

}  // namespace asr
