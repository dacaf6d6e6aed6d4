#pragma once

// Dataset-level attack evaluation, adversarial fine-tuning and report files.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "geoattack/attack.hpp"
#include "geoattack/train.hpp"

namespace geoattack {

struct AttackCounts {
  std::size_t sampled = 0;
  std::size_t attacked = 0;
  std::size_t skipped_misclassified = 0;
  std::size_t succeeded = 0;
  std::size_t exhausted = 0;
  std::size_t budget_exceeded = 0;
};

struct AttackMetrics {
  double success_rate = 0.0;          // succeeded / attacked
  double avg_replacement_rate = 0.0;  // over successful attacks only
  AttackCounts counts;
};

/// Aggregates per-example results; misclassified originals never enter them.
AttackMetrics aggregate(const std::vector<AttackResult>& results, std::size_t skipped_misclassified);

struct EvaluationOptions {
  std::optional<std::size_t> sample_limit;  // seeded subset of the dataset; all when unset
  std::uint64_t seed = 1;
  int workers = 0;
};

struct Evaluation {
  AttackMetrics metrics;
  std::vector<AttackResult> results;  // in dataset order
};

class EvaluationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Seeded subset of `n` indices out of `total`, returned ascending.
std::vector<std::size_t> sample_indices(std::size_t total, std::optional<std::size_t> n, std::uint64_t seed);

/// Attacks every correctly classified example of the (sampled) dataset.
/// Throws EvaluationError when no example is eligible.
Evaluation evaluate_attack(const Classifier& classifier, const Dataset& dataset, const SynonymLexicon& lexicon,
                           const AttackConfig& config, const EvaluationOptions& options);
Evaluation evaluate_attack_serial(const Classifier& classifier, const Dataset& dataset,
                                  const SynonymLexicon& lexicon, const AttackConfig& config,
                                  const EvaluationOptions& options);

struct CurvePoint {
  std::size_t epoch = 0;
  double success_rate = 0.0;
  double avg_replacement_rate = 0.0;
  double clean_accuracy = 0.0;
  std::size_t adversarial_added = 0;
  std::size_t train_size = 0;
};

using RobustnessCurve = std::vector<CurvePoint>;

struct AdvTrainConfig {
  std::size_t epochs = 3;
  std::size_t attack_cap = 500;              // correctly classified train examples attacked per epoch
  std::optional<std::size_t> eval_sample;    // fixed test subset used for the curve
  TrainConfig train;                         // optimizer settings for fine-tuning
};

using CurveCallback = std::function<void(const CurvePoint&)>;

/// Fine-tunes `classifier` in place. Every epoch regenerates adversarial
/// copies (original labels) of up to `attack_cap` train examples and trains
/// one pass over clean + adversarial data. Epoch 0 is the starting model.
RobustnessCurve adversarial_train(Classifier& classifier, const Dataset& train_set, const Dataset& test_set,
                                  const SynonymLexicon& lexicon, const AttackConfig& attack_config,
                                  const AdvTrainConfig& config, const CurveCallback& on_epoch = {});

struct Report {
  std::string run_id;
  nlohmann::json config;
  std::optional<AttackMetrics> metrics;
  std::optional<double> clean_accuracy;
  RobustnessCurve curve;
};

class ReportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Short hex id derived from the config and aggregates; no clock involved.
std::string make_run_id(const nlohmann::json& config, const std::optional<AttackMetrics>& metrics);

nlohmann::json to_json(const AttackMetrics& metrics);
AttackMetrics metrics_from_json(const nlohmann::json& j);

/// Writes report.json, and per_example.csv / curve.csv when there is data
/// for them. Throws ReportError when the directory is not writable.
void emit_report(const Report& report, const std::vector<AttackResult>& results, const std::filesystem::path& dir);

/// One tab-separated file per example under `dir`.
void write_traces(const std::vector<AttackResult>& results, const std::filesystem::path& dir);

/// Parses report.json (and curve.csv next to it when present).
Report parse_report(const std::filesystem::path& path);
RobustnessCurve parse_curve(const std::filesystem::path& path);

std::string format_double(double x);

}  // namespace geoattack
