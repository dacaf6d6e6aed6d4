#pragma once

// Word-level adversarial attack: saliency-ranked word selection followed by
// synonym choice guided by the direction to the nearest decision boundary
// of the classification head.

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "geoattack/corpus.hpp"
#include "geoattack/geometry.hpp"
#include "geoattack/lexicon.hpp"
#include "geoattack/model.hpp"

namespace geoattack {

/// Token positions eligible for replacement, ascending.
using CandidateSet = std::vector<std::size_t>;

/// Positions of in-vocabulary, non-punctuation tokens.
CandidateSet build_candidates(std::span<const Token> tokens, const Vocabulary& vocab);

/// S = P(y|X) - P(y|X') where X' has `position` replaced by the oov token.
/// Reference implementation: two full forward passes.
double word_saliency(const Classifier& classifier, std::span<const TokenId> ids, std::size_t label,
                     std::size_t position);

/// Saliency of every candidate position using incremental re-encoding.
std::vector<double> saliency_scores(const Classifier& classifier, const SubstitutionEncoder& encoding,
                                    std::size_t label, std::span<const std::size_t> positions);

/// Candidate with the largest saliency; the leftmost position wins ties.
/// Throws std::invalid_argument on an empty candidate set.
std::size_t select_candidate(const Classifier& classifier, std::span<const TokenId> ids, std::size_t label,
                             std::span<const std::size_t> candidates);

enum class AttackStatus { Success, Exhausted, BudgetExceeded };
std::string_view status_name(AttackStatus status);

enum class AttackMethod { Geometric, GreedyProbability };
AttackMethod parse_attack_method(std::string_view name);
std::string_view attack_method_name(AttackMethod method);

struct AttackConfig {
  std::size_t max_replacements = 50;
  bool iterative_deepfool = false;  // closed form is exact for the affine head
  DeepFoolOptions deepfool;
  bool trace = false;  // write trace files (traces are always recorded in memory)
  AttackMethod method = AttackMethod::Geometric;
};

struct TraceStep {
  std::size_t iteration = 0;
  std::size_t position = 0;
  std::string word;                    // surface at the selected position
  std::optional<std::string> synonym;  // best-scoring synonym, if any
  std::optional<double> z_max;         // projection length (geometric) or probability drop (baseline)
  bool replaced = false;
  double saliency = 0.0;
  double distance_before = 0.0;  // signed distance to the boundary of the original prediction
  double distance_after = 0.0;
  double true_prob_before = 0.0;
  double true_prob_after = 0.0;
  std::size_t num_synonyms = 0;
};

struct Replacement {
  std::size_t position = 0;
  std::string original;
  std::string synonym;
};

struct AttackResult {
  std::string example_id;
  AttackStatus status = AttackStatus::Exhausted;
  Example final_example;
  std::vector<Replacement> replacements;
  std::vector<TraceStep> trace;
  double replacement_rate = 0.0;
  std::size_t original_prediction = 0;
  std::size_t final_prediction = 0;
  double initial_distance = 0.0;
  double final_distance = 0.0;
  double initial_true_prob = 0.0;
  double final_true_prob = 0.0;
};

/// Runs the attack on one example. The caller decides whether misclassified
/// examples are attacked at all.
AttackResult attack(const Classifier& classifier, const Example& example, const SynonymLexicon& lexicon,
                    const AttackConfig& config);

/// Same loop, but the synonym is the one with the largest drop in the
/// true-class probability (replaced only when the drop is positive).
AttackResult greedy_probability_baseline(const Classifier& classifier, const Example& example,
                                         const SynonymLexicon& lexicon, const AttackConfig& config);

}  // namespace geoattack
