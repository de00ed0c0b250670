#include "asr/lm.h"

#include <cmath>

#include <charconv>
#include <fstream>
#include <sstream>

namespace asr {

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

std::optional<double> parse_double(std::string_view s) {
  double v = 0.0;
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end) return std::nullopt;
  return v;
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  return s;
}

}  // namespace

NGramLM NGramLM::parse_arpa(std::string_view text) {
  std::vector<std::string_view> lines;
  for (size_t pos = 0; pos <= text.size();) {
    size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    lines.push_back(trim(text.substr(pos, nl - pos)));
    pos = nl + 1;
  }
  const int n_lines = static_cast<int>(lines.size());
  int i = 0;
  while (i < n_lines && lines[static_cast<size_t>(i)] != "\\data\\") ++i;
  if (i == n_lines) throw ArpaParseError(n_lines, "missing \\data\\ header");
  ++i;

  std::vector<size_t> declared;
  for (; i < n_lines; ++i) {
    const std::string_view line = lines[static_cast<size_t>(i)];
    if (line.empty()) continue;
    if (line.starts_with("\\")) break;
    const int lineno = i + 1;
    if (!line.starts_with("ngram ")) throw ArpaParseError(lineno, "expected 'ngram <order>=<count>'");
    const std::string_view body = trim(line.substr(6));
    const size_t eq = body.find('=');
    int k = 0;
    long long count = -1;
    if (eq == std::string_view::npos ||
        std::from_chars(body.data(), body.data() + eq, k).ptr != body.data() + eq ||
        std::from_chars(body.data() + eq + 1, body.data() + body.size(), count).ptr !=
            body.data() + body.size() ||
        count < 0) {
      throw ArpaParseError(lineno, "malformed count line '" + std::string(line) + "'");
    }
    if (k != static_cast<int>(declared.size()) + 1) {
      throw ArpaParseError(lineno, "ngram orders must be declared in sequence starting at 1");
    }
    declared.push_back(static_cast<size_t>(count));
  }
  if (declared.empty()) throw ArpaParseError(i + 1, "no ngram counts after \\data\\");

  NGramLM lm;
  const int order = static_cast<int>(declared.size());
  lm.tables_.resize(static_cast<size_t>(order));
  lm.order_keys_.resize(static_cast<size_t>(order));

  for (int k = 1; k <= order; ++k) {
    while (i < n_lines && lines[static_cast<size_t>(i)].empty()) ++i;
    if (i == n_lines) {
      throw ArpaParseError(n_lines, "missing \\" + std::to_string(k) + "-grams: section");
    }
    const std::string expected = "\\" + std::to_string(k) + "-grams:";
    if (lines[static_cast<size_t>(i)] != expected) {
      throw ArpaParseError(i + 1, "expected '" + expected + "', found '" +
                                      std::string(lines[static_cast<size_t>(i)]) + "'");
    }
    const int header_line = i + 1;
    ++i;
    auto& table = lm.tables_[static_cast<size_t>(k - 1)];
    auto& keys = lm.order_keys_[static_cast<size_t>(k - 1)];
    for (; i < n_lines; ++i) {
      const std::string_view line = lines[static_cast<size_t>(i)];
      if (line.empty()) continue;
      if (line.starts_with("\\")) break;
      const int lineno = i + 1;
      const auto fields = split_fields(line);
      if (fields.size() != static_cast<size_t>(k) + 1 && fields.size() != static_cast<size_t>(k) + 2) {
        throw ArpaParseError(lineno, "expected " + std::to_string(k) + " words with a probability "
                                     "and optional backoff");
      }
      const auto prob = parse_double(fields[0]);
      if (!prob) throw ArpaParseError(lineno, "bad probability '" + std::string(fields[0]) + "'");
      if (*prob > 0.0) throw ArpaParseError(lineno, "log10 probability must be <= 0");
      NGramEntry entry{*prob, std::nullopt};
      if (fields.size() == static_cast<size_t>(k) + 2) {
        if (k == order) throw ArpaParseError(lineno, "backoff weight on highest-order n-gram");
        const auto bo = parse_double(fields.back());
        if (!bo) throw ArpaParseError(lineno, "bad backoff '" + std::string(fields.back()) + "'");
        entry.backoff = *bo;
      }
      std::vector<WordId> key;
      for (int w = 1; w <= k; ++w) {
        const std::string word(fields[static_cast<size_t>(w)]);
        if (k == 1) {
          if (lm.index_.count(word)) throw ArpaParseError(lineno, "duplicate unigram '" + word + "'");
          const auto id = static_cast<WordId>(lm.words_.size());
          lm.index_.emplace(word, id);
          lm.words_.push_back(word);
          key.push_back(id);
        } else {
          auto it = lm.index_.find(word);
          if (it == lm.index_.end()) {
            throw ArpaParseError(lineno, "word '" + word + "' has no unigram entry");
          }
          key.push_back(it->second);
        }
      }
      if (!table.emplace(key, entry).second) {
        throw ArpaParseError(lineno, "duplicate " + std::to_string(k) + "-gram");
      }
      keys.push_back(std::move(key));
    }
    if (table.size() != declared[static_cast<size_t>(k - 1)]) {
      throw ArpaParseError(header_line, std::to_string(k) + "-gram count mismatch: declared " +
                                            std::to_string(declared[static_cast<size_t>(k - 1)]) +
                                            ", found " + std::to_string(table.size()));
    }
  }
  while (i < n_lines && lines[static_cast<size_t>(i)].empty()) ++i;
  if (i == n_lines) throw ArpaParseError(n_lines, "missing \\end\\");
  if (lines[static_cast<size_t>(i)] != "\\end\\") {
    throw ArpaParseError(i + 1, "unexpected section '" + std::string(lines[static_cast<size_t>(i)]) +
                                    "', expected \\end\\");
  }

  if (auto b = lm.find(kBos)) lm.bos_ = *b;
  if (auto e = lm.find(kEos)) lm.eos_ = *e;
  return lm;
}

NGramLM NGramLM::load_arpa(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open ARPA file " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_arpa(buf.str());
}

std::string NGramLM::to_arpa() const {
  std::ostringstream out;
  out << "\\data\\\n";
  for (int k = 1; k <= order(); ++k) out << "ngram " << k << '=' << count(k) << '\n';
  for (int k = 1; k <= order(); ++k) {
    out << "\n\\" << k << "-grams:\n";
    const auto& table = tables_[static_cast<size_t>(k - 1)];
    for (const auto& key : order_keys_[static_cast<size_t>(k - 1)]) {
      const NGramEntry& e = table.at(key);
      out << format_double(e.logprob) << '\t';
      for (size_t w = 0; w < key.size(); ++w) out << (w ? " " : "") << words_[static_cast<size_t>(key[w])];
      if (e.backoff) out << '\t' << format_double(*e.backoff);
      out << '\n';
    }
  }
  out << "\n\\end\\\n";
  return out.str();
}

void NGramLM::save_arpa(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write ARPA file " + path);
  out << to_arpa();
}

std::optional<WordId> NGramLM::find(std::string_view word) const {
  auto it = index_.find(std::string(word));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

WordId NGramLM::resolve(std::string_view word) const {
  if (auto id = find(word)) return *id;
  if (oov_ == OovPolicy::kUnk) return *find(kUnk);
  throw Error("out-of-vocabulary word '" + std::string(word) + "'");
}

void NGramLM::set_oov_policy(OovPolicy p) {
  if (p == OovPolicy::kUnk && !find(kUnk)) throw Error("LM defines no <unk> for the unk OOV policy");
  oov_ = p;
}

const NGramEntry* NGramLM::entry(std::span<const WordId> ngram) const {
  if (ngram.empty() || ngram.size() > tables_.size()) return nullptr;
  const auto& table = tables_[ngram.size() - 1];
  auto it = table.find(std::vector<WordId>(ngram.begin(), ngram.end()));
  return it == table.end() ? nullptr : &it->second;
}

NGramLM::Score NGramLM::score_word(std::span<const WordId> context, WordId word) const {
  if (word < 0 || word >= vocab_size()) throw Error("word id " + std::to_string(word) + " out of range");
  const size_t keep = static_cast<size_t>(order() - 1);
  if (context.size() > keep) context = context.subspan(context.size() - keep);

  double backoff = 0.0;
  std::vector<WordId> key;
  for (size_t start = 0;; ++start) {
    const auto ctx = context.subspan(start);
    key.assign(ctx.begin(), ctx.end());
    key.push_back(word);
    if (const NGramEntry* e = entry(key)) {
      Score s{backoff + e->logprob, {}};
      std::vector<WordId> hist(context.begin(), context.end());
      hist.push_back(word);
      const size_t drop = hist.size() > keep ? hist.size() - keep : 0;
      s.state.assign(hist.begin() + static_cast<std::ptrdiff_t>(drop), hist.end());
      return s;
    }
    // Unigrams cover the whole vocabulary, so ctx is never empty here.
    if (const NGramEntry* c = entry(ctx); c && c->backoff) backoff += *c->backoff;
  }
}

std::vector<WordId> NGramLM::initial_state() const {
  if (bos_ < 0) throw Error("LM has no <s> entry");
  if (order() <= 1) return {};
  return {bos_};
}

double NGramLM::sentence_logprob_ids(std::span<const WordId> words) const {
  if (eos_ < 0) throw Error("LM has no </s> entry");
  std::vector<WordId> state = initial_state();
  double total = 0.0;
  for (WordId w : words) {
    Score s = score_word(state, w);
    total += s.log10_prob;
    state = std::move(s.state);
  }
  return total + score_word(state, eos_).log10_prob;
}

double NGramLM::sentence_logprob(std::span<const std::string> words) const {
  std::vector<WordId> ids;
  ids.reserve(words.size());
  for (const auto& w : words) ids.push_back(resolve(w));
  return sentence_logprob_ids(ids);
}

// ---------------------------------------------------------------------------

std::optional<int> LexiconTrie::find(std::span<const LabelId> spelling) const {
  int node = kRoot;
  for (LabelId l : spelling) {
    const auto& ch = nodes[static_cast<size_t>(node)].children;
    auto it = ch.find(l);
    if (it == ch.end()) return std::nullopt;
    node = it->second;
  }
  return node;
}

int LexiconTrie::insert(const std::string& word, const LabelSequence& spelling) {
  if (spelling.empty()) throw Error("word '" + word + "' has an empty spelling");
  if (nodes.empty()) nodes.emplace_back();
  int node = kRoot;
  for (LabelId l : spelling) {
    auto it = nodes[static_cast<size_t>(node)].children.find(l);
    if (it != nodes[static_cast<size_t>(node)].children.end()) {
      node = it->second;
      continue;
    }
    const int child = static_cast<int>(nodes.size());
    Node n;
    n.label = l;
    n.parent = node;
    nodes.push_back(std::move(n));
    nodes[static_cast<size_t>(node)].children.emplace(l, child);
    node = child;
  }
  const int idx = static_cast<int>(words.size());
  words.push_back(word);
  spellings.push_back(spelling);
  nodes[static_cast<size_t>(node)].words.push_back(idx);
  return idx;
}

LexiconTrie build_lexicon(std::span<const std::string> words, const Alphabet& alphabet) {
  LexiconTrie trie;
  trie.nodes.emplace_back();
  std::unordered_map<std::string, int> seen;
  for (const auto& w : words) {
    if (!seen.emplace(w, 0).second) throw Error("duplicate lexicon word '" + w + "'");
    LabelSequence spelling;
    try {
      spelling = encode_transcription(w, alphabet);
    } catch (const Error& e) {
      throw Error("unspellable word '" + w + "': " + e.what());
    }
    for (LabelId l : spelling) {
      if (alphabet.is_silence(l)) throw Error("unspellable word '" + w + "': contains a separator");
    }
    trie.insert(w, spelling);
  }
  return trie;
}

void smear(LexiconTrie& trie, const NGramLM& lm, SmearMode mode) {
  for (auto& n : trie.nodes) n.smeared = kNegInf<double>;
  for (size_t n = 0; n < trie.nodes.size(); ++n) {
    for (int w : trie.nodes[n].words) {
      const WordId id = lm.resolve(trie.words[static_cast<size_t>(w)]);
      const double lp = lm.score_word(std::span<const WordId>{}, id).log10_prob;
      for (int up = static_cast<int>(n); up >= 0; up = trie.nodes[static_cast<size_t>(up)].parent) {
        auto& s = trie.nodes[static_cast<size_t>(up)].smeared;
        if (mode == SmearMode::kMax) {
          if (lp > s) s = lp;
        } else {
          s = std::log10(std::pow(10.0, s) + std::pow(10.0, lp));
        }
      }
    }
  }
}

LexiconTrie load_lexicon(const std::string& path, const Alphabet& alphabet) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open lexicon " + path);
  LexiconTrie trie;
  trie.nodes.emplace_back();
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    const size_t tab = line.find('\t');
    if (tab == std::string::npos) {
      throw Error("lexicon line " + std::to_string(lineno) + ": expected 'word<TAB>spelling'");
    }
    const std::string word = line.substr(0, tab);
    LabelSequence spelling = parse_spelling(line.substr(tab + 1), alphabet);
    validate_labels(spelling, alphabet);
    trie.insert(word, spelling);
  }
  return trie;
}

void save_lexicon(const std::string& path, const LexiconTrie& trie, const Alphabet& alphabet) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write lexicon " + path);
  for (size_t w = 0; w < trie.words.size(); ++w) {
    out << trie.words[w] << '\t' << spell(trie.spellings[w], alphabet) << '\n';
  }
}

}  // namespace asr
