#include "asr/acoustic.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "asr/metrics.h"

namespace asr {

Nonlinearity parse_nonlinearity(const std::string& name) {
  if (name == "none" || name == "linear") return Nonlinearity::kNone;
  if (name == "hardtanh") return Nonlinearity::kHardTanh;
  if (name == "tanh") return Nonlinearity::kTanh;
  if (name == "relu") return Nonlinearity::kReLU;
  throw Error("unknown nonlinearity '" + name + "'");
}

std::string to_string(Nonlinearity n) {
  switch (n) {
    case Nonlinearity::kNone: return "none";
    case Nonlinearity::kHardTanh: return "hardtanh";
    case Nonlinearity::kTanh: return "tanh";
    case Nonlinearity::kReLU: return "relu";
  }
  return "none";
}

void NetworkSpec::validate() const {
  if (layers.empty()) throw Error("network spec has no layers");
  for (size_t l = 0; l < layers.size(); ++l) {
    const auto& c = layers[l];
    if (c.d_in < 1 || c.d_out < 1 || c.kw < 1 || c.dw < 1) {
      throw Error("layer " + std::to_string(l) + ": d_in, d_out, kw and dw must all be >= 1");
    }
    if (l > 0 && layers[l - 1].d_out != c.d_in) {
      throw Error("layer " + std::to_string(l) + ": d_in " + std::to_string(c.d_in) +
                  " does not match previous d_out " + std::to_string(layers[l - 1].d_out));
    }
  }
}

NetworkSpec NetworkSpec::parse(const std::string& text) {
  NetworkSpec spec;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    std::istringstream fields(line);
    ConvLayerSpec layer;
    std::string nl;
    if (!(fields >> layer.d_in)) continue;
    if (!(fields >> layer.d_out >> layer.kw >> layer.dw >> nl)) {
      throw Error("network spec line " + std::to_string(lineno) +
                  ": expected 'd_in d_out kw dw nonlinearity'");
    }
    layer.nonlinearity = parse_nonlinearity(nl);
    spec.layers.push_back(layer);
  }
  spec.validate();
  return spec;
}

NetworkSpec NetworkSpec::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open network spec " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

std::string NetworkSpec::to_text() const {
  std::ostringstream out;
  for (const auto& l : layers) {
    out << l.d_in << ' ' << l.d_out << ' ' << l.kw << ' ' << l.dw << ' ' << to_string(l.nonlinearity)
        << '\n';
  }
  return out.str();
}

ReceptiveField receptive_field(const NetworkSpec& spec) {
  spec.validate();
  ReceptiveField rf;
  for (const auto& l : spec.layers) {
    rf.kw += (l.kw - 1) * rf.dw;
    rf.dw *= l.dw;
  }
  return rf;
}

Eigen::Index conv_output_frames(Eigen::Index input_frames, int64_t kw, int64_t dw) {
  if (input_frames < kw) return 0;
  return static_cast<Eigen::Index>((input_frames - kw) / dw + 1);
}

template <typename Scalar>
ModelParams<Scalar> ModelParams<Scalar>::init(const NetworkSpec& spec, std::mt19937_64& rng) {
  spec.validate();
  ModelParams p;
  for (const auto& l : spec.layers) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(l.d_in) * l.kw);
    std::uniform_real_distribution<double> dist(-bound, bound);
    LayerParams<Scalar> lp;
    lp.weights.resize(l.d_out, static_cast<Eigen::Index>(l.kw) * l.d_in);
    lp.bias.resize(l.d_out);
    for (Eigen::Index i = 0; i < lp.weights.size(); ++i) lp.weights.data()[i] = static_cast<Scalar>(dist(rng));
    for (Eigen::Index i = 0; i < lp.bias.size(); ++i) lp.bias[i] = static_cast<Scalar>(dist(rng));
    p.layers.push_back(std::move(lp));
  }
  return p;
}

template <typename Scalar>
ModelParams<Scalar> ModelParams<Scalar>::zeros_like(const NetworkSpec& spec) {
  ModelParams p;
  for (const auto& l : spec.layers) {
    p.layers.push_back({Matrix<Scalar>::Zero(l.d_out, static_cast<Eigen::Index>(l.kw) * l.d_in),
                        Vector<Scalar>::Zero(l.d_out)});
  }
  return p;
}

template <typename Scalar>
double ModelParams<Scalar>::squared_norm() const {
  double s = 0.0;
  for (const auto& l : layers) {
    s += l.weights.template cast<double>().squaredNorm() + l.bias.template cast<double>().squaredNorm();
  }
  return s;
}

namespace {

void check_layer_shapes(Eigen::Index x_cols, const ConvLayerSpec& layer, Eigen::Index w_rows,
                        Eigen::Index w_cols, Eigen::Index b_size) {
  if (x_cols != layer.d_in) {
    throw ShapeError("conv input has " + std::to_string(x_cols) + " channels, layer expects " +
                     std::to_string(layer.d_in));
  }
  if (w_rows != layer.d_out || w_cols != static_cast<Eigen::Index>(layer.kw) * layer.d_in ||
      b_size != layer.d_out) {
    throw ShapeError("conv parameters do not match the layer spec");
  }
}

// Row t holds the flattened window x[dw*t, dw*t + kw), frame-major.
template <typename Scalar>
MatrixXd unfold_windows(const Matrix<Scalar>& x, const ConvLayerSpec& layer) {
  const Eigen::Index ty = conv_output_frames(x.rows(), layer.kw, layer.dw);
  const Eigen::Index width = static_cast<Eigen::Index>(layer.kw) * layer.d_in;
  MatrixXd cols(ty, width);
  for (Eigen::Index t = 0; t < ty; ++t) {
    Eigen::Map<const Eigen::Matrix<Scalar, 1, Eigen::Dynamic>> window(
        x.data() + t * layer.dw * layer.d_in, width);
    cols.row(t) = window.template cast<double>();
  }
  return cols;
}

}  // namespace

template <typename Scalar>
Matrix<Scalar> conv1d_forward(const Matrix<Scalar>& x, const ConvLayerSpec& layer,
                              const LayerParams<Scalar>& params) {
  check_layer_shapes(x.cols(), layer, params.weights.rows(), params.weights.cols(), params.bias.size());
  if (x.rows() < layer.kw) {
    throw ShapeError("conv input too short: " + std::to_string(x.rows()) + " frames, kernel width " +
                     std::to_string(layer.kw));
  }
  const MatrixXd cols = unfold_windows(x, layer);
  MatrixXd y = cols * params.weights.template cast<double>().transpose();
  y.rowwise() += params.bias.template cast<double>().transpose();
  return y.cast<Scalar>();
}

template <typename Scalar>
ConvGradients<Scalar> conv1d_backward(const Matrix<Scalar>& x, const ConvLayerSpec& layer,
                                      const LayerParams<Scalar>& params, const Matrix<Scalar>& d_y) {
  check_layer_shapes(x.cols(), layer, params.weights.rows(), params.weights.cols(), params.bias.size());
  const Eigen::Index ty = conv_output_frames(x.rows(), layer.kw, layer.dw);
  if (d_y.rows() != ty || d_y.cols() != layer.d_out) {
    throw ShapeError("upstream gradient shape does not match conv output");
  }
  const MatrixXd cols = unfold_windows(x, layer);
  const MatrixXd dy = d_y.template cast<double>();
  ConvGradients<Scalar> g;
  g.d_w = (dy.transpose() * cols).cast<Scalar>();
  g.d_b = dy.colwise().sum().transpose().cast<Scalar>();

  const MatrixXd d_cols = dy * params.weights.template cast<double>();
  MatrixXd dx = MatrixXd::Zero(x.rows(), x.cols());
  const Eigen::Index width = static_cast<Eigen::Index>(layer.kw) * layer.d_in;
  for (Eigen::Index t = 0; t < ty; ++t) {
    Eigen::Map<Eigen::Matrix<double, 1, Eigen::Dynamic>> window(dx.data() + t * layer.dw * layer.d_in,
                                                                 width);
    window += d_cols.row(t);
  }
  g.d_x = dx.cast<Scalar>();
  return g;
}

template <typename Scalar>
Matrix<Scalar> activate(const Matrix<Scalar>& pre, Nonlinearity n) {
  switch (n) {
    case Nonlinearity::kNone: return pre;
    case Nonlinearity::kHardTanh: return pre.cwiseMax(Scalar(-1)).cwiseMin(Scalar(1));
    case Nonlinearity::kTanh: return pre.array().tanh().matrix();
    case Nonlinearity::kReLU: return pre.cwiseMax(Scalar(0));
  }
  return pre;
}

template <typename Scalar>
Matrix<Scalar> activation_grad(const Matrix<Scalar>& pre, Nonlinearity n) {
  switch (n) {
    case Nonlinearity::kNone: return Matrix<Scalar>::Ones(pre.rows(), pre.cols());
    case Nonlinearity::kHardTanh:
      return (pre.array() > Scalar(-1) && pre.array() < Scalar(1)).template cast<Scalar>().matrix();
    case Nonlinearity::kTanh: return (Scalar(1) - pre.array().tanh().square()).matrix();
    case Nonlinearity::kReLU: return (pre.array() > Scalar(0)).template cast<Scalar>().matrix();
  }
  return Matrix<Scalar>::Ones(pre.rows(), pre.cols());
}

template <typename Scalar>
EmissionTable<Scalar> network_forward(const Matrix<Scalar>& features, const NetworkSpec& spec,
                                      const ModelParams<Scalar>& params, OutputMode mode,
                                      ForwardCache<Scalar>* cache) {
  spec.validate();
  if (params.layers.size() != spec.layers.size()) {
    throw ShapeError("parameter set has " + std::to_string(params.layers.size()) +
                     " layers, spec has " + std::to_string(spec.layers.size()));
  }
  const ReceptiveField rf = receptive_field(spec);
  if (features.rows() < rf.kw) {
    throw ShapeError("input too short: " + std::to_string(features.rows()) +
                     " frames, network needs at least " + std::to_string(rf.kw));
  }
  if (cache) {
    cache->inputs.clear();
    cache->pre.clear();
  }
  Matrix<Scalar> x = features;
  for (size_t l = 0; l < spec.layers.size(); ++l) {
    Matrix<Scalar> pre = conv1d_forward(x, spec.layers[l], params.layers[l]);
    Matrix<Scalar> post = activate(pre, spec.layers[l].nonlinearity);
    if (cache) {
      cache->inputs.push_back(std::move(x));
      cache->pre.push_back(std::move(pre));
    }
    x = std::move(post);
  }
  if (cache) cache->output = x;
  EmissionTable<Scalar> em;
  if (mode == OutputMode::kLogSoftmax) {
    em.scores = log_softmax(x);
    em.normalized = true;
  } else {
    em.scores = std::move(x);
  }
  return em;
}

template <typename Scalar>
ModelParams<Scalar> network_backward(const NetworkSpec& spec, const ModelParams<Scalar>& params,
                                     const ForwardCache<Scalar>& cache,
                                     const Matrix<Scalar>& d_emissions, OutputMode mode) {
  if (cache.pre.size() != spec.layers.size()) throw ShapeError("forward cache does not match spec");
  Matrix<Scalar> grad = d_emissions;
  if (mode == OutputMode::kLogSoftmax) {
    // y = x - logsumexp(x): dx = dy - softmax(x) * sum(dy).
    const Matrix<Scalar> soft = log_softmax(cache.output).array().exp().matrix();
    const Vector<Scalar> row_sums = d_emissions.rowwise().sum();
    grad = d_emissions - (soft.array().colwise() * row_sums.array()).matrix();
  }
  ModelParams<Scalar> out;
  out.layers.resize(spec.layers.size());
  for (size_t l = spec.layers.size(); l-- > 0;) {
    const Matrix<Scalar> d_pre =
        grad.cwiseProduct(activation_grad(cache.pre[l], spec.layers[l].nonlinearity));
    ConvGradients<Scalar> g = conv1d_backward(cache.inputs[l], spec.layers[l], params.layers[l], d_pre);
    out.layers[l].weights = std::move(g.d_w);
    out.layers[l].bias = std::move(g.d_b);
    grad = std::move(g.d_x);
  }
  return out;
}

// ---------------------------------------------------------------------------

Alphabet toy_alphabet() { return Alphabet({"a", "b", "c", "d", "e"}); }

namespace {

struct LetterTemplate {
  double f1;
  double f2;
};

constexpr LetterTemplate kTemplates[] = {
    {300.0, 1200.0}, {500.0, 2100.0}, {750.0, 2700.0}, {1000.0, 1600.0}, {1300.0, 3300.0},
};

}  // namespace

Waveform synthesize_letters(std::string_view text, const ToyTaskConfig& cfg, std::mt19937_64& rng) {
  const Alphabet alphabet = toy_alphabet();
  constexpr int kRate = 16000;
  constexpr int kFrame = kRate / 100;
  std::uniform_int_distribution<int> frames(cfg.min_letter_frames, cfg.max_letter_frames);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  std::uniform_real_distribution<double> gain(0.7, 1.3);
  std::normal_distribution<double> noise(0.0, cfg.noise);

  std::vector<double> samples;
  for (char c : text) {
    const auto id = alphabet.find(std::string_view(&c, 1));
    if (!id) throw Error(std::string("toy task cannot synthesize '") + c + "'");
    const LetterTemplate& tpl = kTemplates[*id];
    const int n = frames(rng) * kFrame;
    const double p1 = phase(rng), p2 = phase(rng), g1 = gain(rng), g2 = gain(rng);
    for (int i = 0; i < n; ++i) {
      const double t = static_cast<double>(i) / kRate;
      samples.push_back(0.5 * g1 * std::sin(2.0 * std::numbers::pi * tpl.f1 * t + p1) +
                        0.3 * g2 * std::sin(2.0 * std::numbers::pi * tpl.f2 * t + p2) + noise(rng));
    }
  }
  // Tail so the last letter fills complete analysis windows.
  for (int i = 0; i < 240; ++i) samples.push_back(noise(rng));
  Waveform w;
  w.sample_rate = kRate;
  w.samples = Eigen::Map<const VectorXd>(samples.data(), static_cast<Eigen::Index>(samples.size()));
  return w;
}

std::vector<ToySample> make_toy_dataset(const ToyTaskConfig& cfg, const Alphabet& alphabet) {
  std::mt19937_64 rng(cfg.seed);
  std::uniform_int_distribution<int> length(cfg.min_letters, cfg.max_letters);
  std::uniform_int_distribution<int> letter(0, alphabet.size() - 1);
  std::vector<ToySample> out;
  out.reserve(static_cast<size_t>(cfg.num_samples));
  for (int i = 0; i < cfg.num_samples; ++i) {
    std::string text;
    const int n = length(rng);
    while (static_cast<int>(text.size()) < n) {
      const char c = alphabet.symbol(letter(rng))[0];
      if (!text.empty() && text.back() == c) continue;
      text += c;
    }
    ToySample s;
    s.transcription = text;
    s.labels = encode_transcription(text, alphabet);
    s.features = normalize(mfcc(synthesize_letters(text, cfg, rng)));
    out.push_back(std::move(s));
  }
  return out;
}

double heldout_ler(std::span<const ToySample> samples, const NetworkSpec& spec,
                   const ModelParams<float>& params, const TransitionTable<float>& transitions) {
  size_t edits = 0, total = 0;
  for (const auto& s : samples) {
    const auto em = network_forward<float>(s.features, spec, params);
    const UnfoldedGraph full = build_full_graph(em.labels(), em.frames());
    const ViterbiResult best = viterbi(full, em, &transitions);
    const LabelSequence hyp = collapse_path(best.frame_labels);
    edits += edit_distance<LabelId>(s.labels, hyp);
    total += s.labels.size();
  }
  return total == 0 ? 0.0 : static_cast<double>(edits) / static_cast<double>(total);
}

TrainResult train_toy(std::span<const ToySample> dataset, const NetworkSpec& spec,
                      const TrainConfig& cfg) {
  spec.validate();
  if (dataset.empty()) throw Error("training dataset is empty");
  if (cfg.holdout < 1 || cfg.holdout >= static_cast<int>(dataset.size())) {
    throw Error("holdout must leave at least one training and one held-out sample");
  }
  const ReceptiveField rf = receptive_field(spec);
  for (size_t i = 0; i < dataset.size(); ++i) {
    const auto& s = dataset[i];
    if (s.features.dim() != spec.input_dim()) {
      throw Error("sample " + std::to_string(i) + ": feature dim " + std::to_string(s.features.dim()) +
                  " does not match network input " + std::to_string(spec.input_dim()));
    }
    const auto out_frames = conv_output_frames(s.features.num_frames(), rf.kw, rf.dw);
    if (out_frames < static_cast<Eigen::Index>(s.labels.size())) {
      throw InfeasibleError("sample " + std::to_string(i) + " is infeasible: " +
                            std::to_string(out_frames) + " output frames for " +
                            std::to_string(s.labels.size()) + " labels");
    }
  }

  const size_t n_train = dataset.size() - static_cast<size_t>(cfg.holdout);
  const auto train = dataset.subspan(0, n_train);
  const auto held = dataset.subspan(n_train);

  std::mt19937_64 rng(cfg.seed);
  TrainResult r;
  r.params = ModelParams<float>::init(spec, rng);
  r.transitions = TransitionTable<float>::zeros(spec.output_dim());
  r.curve.push_back({0, 0.0, heldout_ler(held, spec, r.params, r.transitions)});

  std::vector<size_t> order(n_train);
  for (size_t i = 0; i < n_train; ++i) order[i] = i;
  const auto lr = static_cast<float>(cfg.learning_rate);

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    for (size_t idx : order) {
      const ToySample& s = train[idx];
      ForwardCache<float> cache;
      const auto em = network_forward<float>(s.features.frames.cast<float>(), spec, r.params,
                                             OutputMode::kRaw, &cache);
      const auto res = asg_loss(em, r.transitions, s.labels);
      loss_sum += res.loss;
      ModelParams<float> grads = network_backward(spec, r.params, cache, res.d_emissions);

      const double norm = std::sqrt(grads.squared_norm() +
                                    res.d_transitions.cast<double>().squaredNorm() +
                                    res.d_start.cast<double>().squaredNorm());
      const float scale = norm > cfg.clip_norm ? static_cast<float>(cfg.clip_norm / norm) : 1.0f;
      const float step = lr * scale;
      for (size_t l = 0; l < grads.layers.size(); ++l) {
        r.params.layers[l].weights -= step * grads.layers[l].weights;
        r.params.layers[l].bias -= step * grads.layers[l].bias;
      }
      r.transitions.trans -= step * res.d_transitions;
      r.transitions.start -= step * res.d_start;
    }
    r.curve.push_back({epoch, loss_sum / static_cast<double>(n_train),
                       heldout_ler(held, spec, r.params, r.transitions)});
  }
  return r;
}

// ---------------------------------------------------------------------------

namespace {

constexpr uint32_t kCheckpointMagic = 0x43475341;  // "ASGC"
constexpr uint32_t kCheckpointVersion = 1;

void put_u32(std::ostream& out, uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); }

template <typename M>
void put_floats(std::ostream& out, const M& m) {
  out.write(reinterpret_cast<const char*>(m.data()), static_cast<std::streamsize>(m.size() * 4));
}

uint32_t get_u32(std::istream& in) {
  uint32_t v;
  if (!in.read(reinterpret_cast<char*>(&v), 4)) throw IoError("truncated checkpoint");
  return v;
}

template <typename M>
void get_floats(std::istream& in, M& m) {
  if (!in.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(m.size() * 4))) {
    throw IoError("truncated checkpoint");
  }
}

}  // namespace

void save_checkpoint(const std::string& path, const NetworkSpec& spec,
                     const ModelParams<float>& params, const TransitionTable<float>& transitions) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint " + path);
  put_u32(out, kCheckpointMagic);
  put_u32(out, kCheckpointVersion);
  put_u32(out, static_cast<uint32_t>(spec.layers.size()));
  for (size_t l = 0; l < spec.layers.size(); ++l) {
    const auto& c = spec.layers[l];
    put_u32(out, static_cast<uint32_t>(c.d_in));
    put_u32(out, static_cast<uint32_t>(c.d_out));
    put_u32(out, static_cast<uint32_t>(c.kw));
    put_u32(out, static_cast<uint32_t>(c.dw));
    put_u32(out, static_cast<uint32_t>(c.nonlinearity));
    put_floats(out, params.layers[l].weights);
    put_floats(out, params.layers[l].bias);
  }
  put_u32(out, static_cast<uint32_t>(transitions.labels()));
  put_floats(out, transitions.trans);
  put_floats(out, transitions.start);
  if (!out) throw IoError("write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path);
  if (get_u32(in) != kCheckpointMagic) throw IoError("not a checkpoint (bad magic): " + path);
  if (const auto v = get_u32(in); v != kCheckpointVersion) {
    throw IoError("unsupported checkpoint version " + std::to_string(v));
  }
  Checkpoint ck;
  const uint32_t layers = get_u32(in);
  for (uint32_t l = 0; l < layers; ++l) {
    ConvLayerSpec c;
    c.d_in = static_cast<int>(get_u32(in));
    c.d_out = static_cast<int>(get_u32(in));
    c.kw = static_cast<int>(get_u32(in));
    c.dw = static_cast<int>(get_u32(in));
    const uint32_t nl = get_u32(in);
    if (nl > static_cast<uint32_t>(Nonlinearity::kReLU)) throw IoError("bad nonlinearity code");
    c.nonlinearity = static_cast<Nonlinearity>(nl);
    ck.spec.layers.push_back(c);
    LayerParams<float> p;
    p.weights.resize(c.d_out, static_cast<Eigen::Index>(c.kw) * c.d_in);
    p.bias.resize(c.d_out);
    get_floats(in, p.weights);
    get_floats(in, p.bias);
    ck.params.layers.push_back(std::move(p));
  }
  ck.spec.validate();
  const auto L = static_cast<int>(get_u32(in));
  ck.transitions.trans.resize(L, L);
  ck.transitions.start.resize(L);
  get_floats(in, ck.transitions.trans);
  get_floats(in, ck.transitions.start);
  return ck;
}

#define ASR_INSTANTIATE_ACOUSTIC(S)                                                               \
  template struct ModelParams<S>;                                                                 \
  template Matrix<S> conv1d_forward<S>(const Matrix<S>&, const ConvLayerSpec&,                    \
                                       const LayerParams<S>&);                                    \
  template ConvGradients<S> conv1d_backward<S>(const Matrix<S>&, const ConvLayerSpec&,            \
                                               const LayerParams<S>&, const Matrix<S>&);          \
  template Matrix<S> activate<S>(const Matrix<S>&, Nonlinearity);                                 \
  template Matrix<S> activation_grad<S>(const Matrix<S>&, Nonlinearity);                          \
  template EmissionTable<S> network_forward<S>(const Matrix<S>&, const NetworkSpec&,              \
                                               const ModelParams<S>&, OutputMode,                 \
                                               ForwardCache<S>*);                                 \
  template ModelParams<S> network_backward<S>(const NetworkSpec&, const ModelParams<S>&,          \
                                              const ForwardCache<S>&, const Matrix<S>&,           \
                                              OutputMode);

ASR_INSTANTIATE_ACOUSTIC(float)
ASR_INSTANTIATE_ACOUSTIC(double)

#undef ASR_INSTANTIATE_ACOUSTIC

}  // namespace asr
