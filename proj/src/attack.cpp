#include "geoattack/attack.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace geoattack {

CandidateSet build_candidates(std::span<const Token> tokens, const Vocabulary& vocab) {
  CandidateSet out;
  for (std::size_t k = 0; k < tokens.size(); ++k)
    if (!tokens[k].is_punctuation && vocab.contains(tokens[k].text)) out.push_back(k);
  return out;
}

double word_saliency(const Classifier& classifier, std::span<const TokenId> ids, std::size_t label,
                     std::size_t position) {
  if (position >= ids.size()) throw std::out_of_range("saliency position out of range");
  const double p = classifier.probabilities(ids)[label];
  std::vector<TokenId> masked(ids.begin(), ids.end());
  masked[position] = classifier.vocab().oov_id();
  return p - classifier.probabilities(masked)[label];
}

std::vector<double> saliency_scores(const Classifier& classifier, const SubstitutionEncoder& encoding,
                                    std::size_t label, std::span<const std::size_t> positions) {
  const AffineHead& head = classifier.head();
  const double p = kernels::softmax(head.logits(encoding.base()))[label];
  const TokenId oov = classifier.vocab().oov_id();
  std::vector<double> out;
  out.reserve(positions.size());
  for (std::size_t pos : positions)
    out.push_back(p - kernels::softmax(head.logits(encoding.substitute(pos, oov)))[label]);
  return out;
}

std::size_t select_candidate(const Classifier& classifier, std::span<const TokenId> ids, std::size_t label,
                             std::span<const std::size_t> candidates) {
  if (candidates.empty()) throw std::invalid_argument("empty candidate set");
  const SubstitutionEncoder encoding(classifier, ids);
  const auto scores = saliency_scores(classifier, encoding, label, candidates);
  std::size_t best = 0;
  for (std::size_t k = 1; k < scores.size(); ++k)
    if (scores[k] > scores[best] || (scores[k] == scores[best] && candidates[k] < candidates[best])) best = k;
  return candidates[best];
}

std::string_view status_name(AttackStatus status) {
  switch (status) {
    case AttackStatus::Success: return "success";
    case AttackStatus::Exhausted: return "exhausted";
    case AttackStatus::BudgetExceeded: return "budget_exceeded";
  }
  return "?";
}

AttackMethod parse_attack_method(std::string_view name) {
  if (name == "geometric") return AttackMethod::Geometric;
  if (name == "greedy") return AttackMethod::GreedyProbability;
  throw std::invalid_argument("unknown attack method '" + std::string(name) + "' (geometric|greedy)");
}

std::string_view attack_method_name(AttackMethod method) {
  return method == AttackMethod::Geometric ? "geometric" : "greedy";
}

namespace {

struct State {
  double distance;
  double true_prob;
  std::size_t prediction;
};

// Signed distance is +inf when the head has no boundary at all.
State measure(const Classifier& classifier, std::span<const double> v, std::size_t label, std::size_t reference) {
  const Vec z = classifier.head().logits(v);
  State s;
  s.prediction = kernels::argmax(z);
  s.true_prob = kernels::softmax(z)[label];
  try {
    s.distance = signed_distance(classifier.head(), v, reference);
  } catch (const NoBoundary&) {
    s.distance = std::numeric_limits<double>::infinity();
  }
  return s;
}

std::optional<BoundaryStep> boundary_step(const Classifier& classifier, std::span<const double> v,
                                          const AttackConfig& config) {
  try {
    if (config.iterative_deepfool) return deepfool_iterative(classifier.head(), v, config.deepfool);
    return deepfool_affine(classifier.head(), v);
  } catch (const GeometryError&) {
    return std::nullopt;
  }
}

AttackResult run_attack(const Classifier& classifier, const Example& example, const SynonymLexicon& lexicon,
                        const AttackConfig& config, AttackMethod method) {
  if (config.max_replacements == 0) throw std::invalid_argument("replacement budget must be >= 1");
  if (example.tokens.empty()) throw ModelError("cannot attack an empty example");
  if (example.label >= classifier.num_classes()) throw ModelError("example label out of range");
  const Vocabulary& vocab = classifier.vocab();
  const std::size_t label = example.label;

  AttackResult result;
  result.example_id = example.id;
  result.final_example = example;
  std::vector<Token>& tokens = result.final_example.tokens;
  std::vector<TokenId> ids = encode(tokens, vocab);

  const Vec v0 = classifier.encode(ids);
  const std::size_t original = kernels::argmax(classifier.head().logits(v0));
  const State initial = measure(classifier, v0, label, original);
  result.original_prediction = original;
  result.initial_distance = initial.distance;
  result.initial_true_prob = initial.true_prob;

  CandidateSet candidates = build_candidates(tokens, vocab);
  State current = initial;
  std::size_t iteration = 0;
  bool done = false;
  while (!candidates.empty() && !done) {
    const SubstitutionEncoder encoding(classifier, ids);
    const Vec& v = encoding.base();

    const auto scores = saliency_scores(classifier, encoding, label, candidates);
    std::size_t best = 0;
    for (std::size_t k = 1; k < scores.size(); ++k)
      if (scores[k] > scores[best]) best = k;
    const std::size_t position = candidates[best];
    candidates.erase(candidates.begin() + static_cast<std::ptrdiff_t>(best));

    TraceStep step;
    step.iteration = iteration++;
    step.position = position;
    step.word = tokens[position].surface;
    step.saliency = scores[best];
    step.distance_before = current.distance;
    step.true_prob_before = current.true_prob;

    const std::vector<Token> options = synonyms(lexicon, tokens[position], vocab);
    step.num_synonyms = options.size();

    std::optional<std::size_t> chosen;
    if (!options.empty()) {
      if (method == AttackMethod::Geometric) {
        const auto boundary = boundary_step(classifier, v, config);
        if (boundary && !boundary->at_boundary()) {
          double z_max = -std::numeric_limits<double>::infinity();
          std::size_t arg = 0;
          Vec d(v.size());
          for (std::size_t m = 0; m < options.size(); ++m) {
            const Vec vm = encoding.substitute(position, vocab.id(options[m].text));
            for (std::size_t k = 0; k < d.size(); ++k) d[k] = vm[k] - v[k];
            const double z = project(d, boundary->direction).length;
            if (z > z_max) {
              z_max = z;
              arg = m;
            }
          }
          step.z_max = z_max;
          step.synonym = options[arg].surface;
          if (z_max > 0.0) chosen = arg;
        }
      } else {
        const double p = current.true_prob;
        double best_drop = -std::numeric_limits<double>::infinity();
        std::size_t arg = 0;
        for (std::size_t m = 0; m < options.size(); ++m) {
          const Vec vm = encoding.substitute(position, vocab.id(options[m].text));
          const double drop = p - kernels::softmax(classifier.head().logits(vm))[label];
          if (drop > best_drop) {
            best_drop = drop;
            arg = m;
          }
        }
        step.z_max = best_drop;
        step.synonym = options[arg].surface;
        if (best_drop > 0.0) chosen = arg;
      }
    }

    if (chosen) {
      const Token& syn = options[*chosen];
      result.replacements.push_back({position, tokens[position].surface, syn.surface});
      tokens[position] = syn;
      ids[position] = vocab.id(syn.text);
      current = measure(classifier, classifier.encode(ids), label, original);
      step.replaced = true;
      if (current.prediction != original) {
        result.status = AttackStatus::Success;
        done = true;
      } else if (result.replacements.size() >= config.max_replacements) {
        result.status = AttackStatus::BudgetExceeded;
        done = true;
      }
    }
    step.distance_after = current.distance;
    step.true_prob_after = current.true_prob;
    result.trace.push_back(std::move(step));
  }

  result.final_prediction = current.prediction;
  result.final_distance = current.distance;
  result.final_true_prob = current.true_prob;
  result.replacement_rate = static_cast<double>(result.replacements.size()) / static_cast<double>(tokens.size());
  return result;
}

}  // namespace

AttackResult attack(const Classifier& classifier, const Example& example, const SynonymLexicon& lexicon,
                    const AttackConfig& config) {
  return run_attack(classifier, example, lexicon, config, AttackMethod::Geometric);
}

AttackResult greedy_probability_baseline(const Classifier& classifier, const Example& example,
                                         const SynonymLexicon& lexicon, const AttackConfig& config) {
  return run_attack(classifier, example, lexicon, config, AttackMethod::GreedyProbability);
}

}  // namespace geoattack
