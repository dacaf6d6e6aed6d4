#pragma once

// Brute-force re-check of every attack iteration: saliencies from full
// forward passes, nearest boundary from enumerating pairwise hyperplanes,
// synonym scores from re-encoding each substituted sequence.

#include <cmath>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "geoattack/attack.hpp"

namespace oracle {

using namespace geoattack;

struct Instance {
  std::shared_ptr<const Vocabulary> vocab;
  std::optional<Classifier> classifier;
  SynonymLexicon lexicon;
  Example example;
};

// Vocabulary of at most 10 entries (8 words, ".", oov), bag encoder, random affine head,
// at most 4 in-vocabulary synonyms per word, a punctuation mark now and then.
inline Instance make_instance(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> nwords(4, 8), dim(2, 4), classes(2, 3), len(3, 9), nsyn(0, 4);
  std::normal_distribution<double> n;
  Instance inst;
  const int w = nwords(rng);
  std::vector<std::string> words;
  for (int i = 0; i < w; ++i) words.push_back("w" + std::to_string(i));
  words.push_back(".");
  inst.vocab = std::make_shared<const Vocabulary>(Vocabulary::from_tokens(words));
  const std::size_t d = static_cast<std::size_t>(dim(rng));
  const std::size_t c = static_cast<std::size_t>(classes(rng));
  ModelParams p;
  p.embedding = EmbeddingTable(inst.vocab->size(), d);
  for (std::size_t r = 1; r < inst.vocab->size(); ++r)
    for (double& x : p.embedding.row(static_cast<TokenId>(r))) x = n(rng);
  p.encoder = BagEncoder{d};
  Matrix wm(c, d);
  for (double& x : wm.data) x = n(rng);
  Vec b(c);
  for (double& x : b) x = 0.3 * n(rng);
  p.head = AffineHead(wm, b);
  std::vector<std::string> labels;
  for (std::size_t k = 0; k < c; ++k) labels.push_back("c" + std::to_string(k));
  inst.classifier.emplace(std::move(p), inst.vocab, labels);

  std::uniform_int_distribution<int> pick(0, w - 1);
  for (int i = 0; i < w; ++i) {
    std::vector<std::string> syn;
    const int m = nsyn(rng);
    for (int j = 0; j < m; ++j) {
      const int s = pick(rng);
      if (s != i) syn.push_back(words[static_cast<std::size_t>(s)]);
    }
    if (!syn.empty()) inst.lexicon.add(words[static_cast<std::size_t>(i)], syn);
  }
  const int n_tok = len(rng);
  std::bernoulli_distribution punct(0.15);
  for (int i = 0; i < n_tok; ++i)
    inst.example.tokens.push_back(Token::from_surface(punct(rng) ? "." : words[static_cast<std::size_t>(pick(rng))]));
  inst.example.tokens.push_back(Token::from_surface("w" + std::to_string(w + 3)));  // out of vocabulary
  inst.example.id = "toy";
  inst.example.label = inst.classifier->predict(inst.example);
  return inst;
}

inline double prob(const Classifier& clf, const std::vector<TokenId>& ids, std::size_t label) {
  const Vec z = clf.logits(ids);
  double mx = z[0];
  for (double x : z) mx = std::max(mx, x);
  double s = 0;
  for (double x : z) s += std::exp(x - mx);
  return std::exp(z[label] - mx) / s;
}

struct Check {
  std::size_t iterations = 0;
  std::size_t position_ok = 0;
  std::size_t synonym_checks = 0;
  std::size_t synonym_ok = 0;
  bool consistent = true;  // replaced flags, status and final text agree
  std::string detail;
};

// Nearest-boundary direction by enumerating every competing class.
inline std::optional<Vec> boundary_direction(const AffineHead& head, const Vec& v) {
  const std::size_t c = head.num_classes(), d = v.size();
  Vec z(c);
  for (std::size_t i = 0; i < c; ++i) {
    z[i] = head.bias[i];
    for (std::size_t k = 0; k < d; ++k) z[i] += head.weight(i, k) * v[k];
  }
  std::size_t top = 0;
  for (std::size_t i = 1; i < c; ++i)
    if (z[i] > z[top]) top = i;
  double best = std::numeric_limits<double>::infinity();
  std::optional<Vec> r;
  for (std::size_t l = 0; l < c; ++l) {
    if (l == top) continue;
    Vec w(d);
    double n2 = 0;
    for (std::size_t k = 0; k < d; ++k) {
      w[k] = head.weight(l, k) - head.weight(top, k);
      n2 += w[k] * w[k];
    }
    if (n2 == 0) continue;
    const double f = z[l] - z[top];
    const double dist = std::abs(f) / std::sqrt(n2);
    if (dist < best) {
      best = dist;
      for (double& x : w) x *= -f / n2;
      r = w;
    }
  }
  if (r) {
    double n2 = 0;
    for (double x : *r) n2 += x * x;
    if (n2 == 0) return std::nullopt;
  }
  return r;
}

enum class Objective { Projection, ProbabilityDrop };

inline Check verify(const Instance& inst, const AttackResult& res, Objective objective, std::size_t budget) {
  const double tie = 1e-12;
  const Classifier& clf = *inst.classifier;
  const Vocabulary& vocab = *inst.vocab;
  const std::size_t y = inst.example.label;
  std::vector<Token> tokens = inst.example.tokens;
  std::vector<TokenId> ids;
  for (const auto& t : tokens) ids.push_back(vocab.id(t.text));
  const std::size_t original = clf.predict(ids);
  std::vector<std::size_t> cand;
  for (std::size_t k = 0; k < tokens.size(); ++k)
    if (!is_punctuation_text(tokens[k].text) && k < ids.size() && ids[k] != vocab.oov_id()) cand.push_back(k);

  Check out;
  std::size_t replaced = 0;
  AttackStatus status = AttackStatus::Exhausted;
  for (const TraceStep& step : res.trace) {
    ++out.iterations;
    // Position: maximum saliency, leftmost among ties.
    const double p0 = prob(clf, ids, y);
    std::vector<double> s;
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t k : cand) {
      auto masked = ids;
      masked[k] = vocab.oov_id();
      s.push_back(p0 - prob(clf, masked, y));
      best = std::max(best, s.back());
    }
    std::size_t expect = cand.size();
    for (std::size_t i = 0; i < cand.size(); ++i)
      if (s[i] >= best - tie) {
        expect = i;
        break;
      }
    std::size_t idx = cand.size();
    for (std::size_t i = 0; i < cand.size(); ++i)
      if (cand[i] == step.position) idx = i;
    const bool pos_ok = idx < cand.size() && (idx == expect || std::abs(s[idx] - s[expect]) <= tie);
    if (pos_ok) ++out.position_ok;
    else out.detail += "position mismatch at iteration " + std::to_string(step.iteration) + "; ";
    if (idx == cand.size()) {
      out.consistent = false;
      return out;
    }
    cand.erase(cand.begin() + static_cast<std::ptrdiff_t>(idx));
    const std::size_t k = step.position;

    // Synonyms: lexicon entries in vocabulary, single words.
    std::vector<std::string> syn;
    for (const auto& w : inst.lexicon.lookup(tokens[k].text))
      if (w.find(' ') == std::string::npos && w.find('_') == std::string::npos && vocab.contains(w)) syn.push_back(w);
    std::optional<std::size_t> chosen;
    if (!syn.empty()) {
      const Vec v = clf.encode(ids);
      std::vector<double> score;
      std::optional<Vec> r;
      if (objective == Objective::Projection) r = boundary_direction(clf.head(), v);
      if (objective == Objective::ProbabilityDrop || r) {
        double rn = 0;
        if (r)
          for (double x : *r) rn += x * x;
        rn = std::sqrt(rn);
        for (const auto& w : syn) {
          auto sub = ids;
          sub[k] = vocab.id(w);
          if (objective == Objective::Projection) {
            const Vec vm = clf.encode(sub);
            double z = 0;
            for (std::size_t j = 0; j < v.size(); ++j) z += (vm[j] - v[j]) * (*r)[j];
            score.push_back(z / rn);
          } else {
            score.push_back(prob(clf, ids, y) - prob(clf, sub, y));
          }
        }
        double mx = score[0];
        for (double x : score) mx = std::max(mx, x);
        std::size_t arg = 0;
        while (score[arg] < mx - tie) ++arg;
        ++out.synonym_checks;
        std::size_t got = syn.size();
        for (std::size_t i = 0; i < syn.size(); ++i)
          if (step.synonym && to_lower_utf8(*step.synonym) == syn[i]) got = i;
        if (got < syn.size() && (got == arg || std::abs(score[got] - mx) <= tie)) ++out.synonym_ok;
        else out.detail += "synonym mismatch at iteration " + std::to_string(step.iteration) + "; ";
        // Follow the attack's own pick so later iterations see the same text.
        const std::size_t follow = got < syn.size() ? got : arg;
        if (std::abs(mx) <= tie) {
          if (step.replaced) chosen = follow;  // sign of a near-zero score is rounding
        } else if (mx > 0) {
          chosen = follow;
        }
      }
    }
    if (chosen.has_value() != step.replaced) {
      out.consistent = false;
      out.detail += "replaced flag mismatch at iteration " + std::to_string(step.iteration) + "; ";
    }
    if (step.replaced && chosen) {
      tokens[k] = Token::from_surface(syn[*chosen]);
      ids[k] = vocab.id(syn[*chosen]);
      ++replaced;
      if (clf.predict(ids) != original) {
        status = AttackStatus::Success;
        break;
      }
      if (replaced >= budget) {
        status = AttackStatus::BudgetExceeded;
        break;
      }
    }
  }
  if (status == AttackStatus::Exhausted && !cand.empty()) out.consistent = false;
  if (status != res.status) {
    out.consistent = false;
    out.detail += "status mismatch; ";
  }
  if (replaced != res.replacements.size()) out.consistent = false;
  return out;
}

}  // namespace oracle
