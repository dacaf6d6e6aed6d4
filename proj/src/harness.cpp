#include "geoattack/harness.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <random>
#include <sstream>

#include "geoattack/parallel.hpp"

namespace geoattack {

namespace fs = std::filesystem;

AttackMetrics aggregate(const std::vector<AttackResult>& results, std::size_t skipped_misclassified) {
  AttackMetrics m;
  m.counts.attacked = results.size();
  m.counts.skipped_misclassified = skipped_misclassified;
  m.counts.sampled = results.size() + skipped_misclassified;
  double rate_sum = 0.0;
  for (const auto& r : results) {
    switch (r.status) {
      case AttackStatus::Success:
        ++m.counts.succeeded;
        rate_sum += r.replacement_rate;
        break;
      case AttackStatus::Exhausted: ++m.counts.exhausted; break;
      case AttackStatus::BudgetExceeded: ++m.counts.budget_exceeded; break;
    }
  }
  if (m.counts.attacked > 0)
    m.success_rate = static_cast<double>(m.counts.succeeded) / static_cast<double>(m.counts.attacked);
  if (m.counts.succeeded > 0) m.avg_replacement_rate = rate_sum / static_cast<double>(m.counts.succeeded);
  return m;
}

std::vector<std::size_t> sample_indices(std::size_t total, std::optional<std::size_t> n, std::uint64_t seed) {
  std::vector<std::size_t> idx(total);
  for (std::size_t i = 0; i < total; ++i) idx[i] = i;
  if (!n || *n >= total) return idx;
  // Partial Fisher-Yates with explicit integer draws so the subset does not
  // depend on the standard library's distribution implementation.
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < *n; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng() % (total - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(*n);
  std::sort(idx.begin(), idx.end());
  return idx;
}

namespace {

template <class Loop>
Evaluation evaluate_with(const Classifier& classifier, const Dataset& dataset, const SynonymLexicon& lexicon,
                         const AttackConfig& config, const EvaluationOptions& options, Loop&& loop) {
  const auto picked = sample_indices(dataset.size(), options.sample_limit, options.seed);
  std::vector<char> correct(picked.size(), 0);
  loop(picked.size(), [&](std::size_t i) {
    const Example& ex = dataset.examples[picked[i]];
    correct[i] = !ex.tokens.empty() && classifier.predict(ex) == ex.label;
  });
  std::vector<std::size_t> eligible;
  for (std::size_t i = 0; i < picked.size(); ++i)
    if (correct[i]) eligible.push_back(picked[i]);
  if (eligible.empty()) throw EvaluationError("no correctly classified example to attack");

  Evaluation out;
  out.results.resize(eligible.size());
  loop(eligible.size(), [&](std::size_t i) {
    const Example& ex = dataset.examples[eligible[i]];
    out.results[i] = config.method == AttackMethod::Geometric
                         ? attack(classifier, ex, lexicon, config)
                         : greedy_probability_baseline(classifier, ex, lexicon, config);
  });
  out.metrics = aggregate(out.results, picked.size() - eligible.size());
  return out;
}

}  // namespace

Evaluation evaluate_attack(const Classifier& classifier, const Dataset& dataset, const SynonymLexicon& lexicon,
                           const AttackConfig& config, const EvaluationOptions& options) {
  return evaluate_with(classifier, dataset, lexicon, config, options,
                       [&](std::size_t n, auto&& body) { for_each_index(n, options.workers, body); });
}

Evaluation evaluate_attack_serial(const Classifier& classifier, const Dataset& dataset,
                                  const SynonymLexicon& lexicon, const AttackConfig& config,
                                  const EvaluationOptions& options) {
  return evaluate_with(classifier, dataset, lexicon, config, options,
                       [](std::size_t n, auto&& body) { for_each_index_serial(n, body); });
}

RobustnessCurve adversarial_train(Classifier& classifier, const Dataset& train_set, const Dataset& test_set,
                                  const SynonymLexicon& lexicon, const AttackConfig& attack_config,
                                  const AdvTrainConfig& config, const CurveCallback& on_epoch) {
  const int workers = config.train.workers;
  const std::vector<EncodedExample> clean = encode_dataset(train_set, classifier.vocab());
  const std::vector<EncodedExample> test = encode_dataset(test_set, classifier.vocab());
  EvaluationOptions eval_opts;
  eval_opts.sample_limit = config.eval_sample;
  eval_opts.seed = config.train.seed;
  eval_opts.workers = workers;

  RobustnessCurve curve;
  auto measure = [&](std::size_t epoch, std::size_t added, std::size_t train_size) {
    CurvePoint p;
    p.epoch = epoch;
    p.clean_accuracy = accuracy(classifier, test, workers);
    try {
      const Evaluation ev = evaluate_attack(classifier, test_set, lexicon, attack_config, eval_opts);
      p.success_rate = ev.metrics.success_rate;
      p.avg_replacement_rate = ev.metrics.avg_replacement_rate;
    } catch (const EvaluationError&) {
      // Nothing left to attack: report zero success.
    }
    p.adversarial_added = added;
    p.train_size = train_size;
    curve.push_back(p);
    if (on_epoch) on_epoch(p);
  };

  measure(0, 0, clean.size());
  if (config.epochs == 0) return curve;

  Trainer trainer(classifier, config.train);
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    // Fresh seeded order each epoch; the first `attack_cap` correctly
    // classified examples in that order get attacked.
    const auto order = [&] {
      std::vector<std::size_t> idx = sample_indices(train_set.size(), train_set.size(), 0);
      std::mt19937_64 rng(config.train.seed ^ (0x51ed27ULL * epoch));
      for (std::size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[rng() % i]);
      return idx;
    }();
    const auto predictions = predict_all(classifier, clean, workers);
    std::vector<std::size_t> chosen;
    for (std::size_t i : order) {
      if (chosen.size() >= config.attack_cap) break;
      if (predictions[i] == clean[i].label && !clean[i].ids.empty()) chosen.push_back(i);
    }
    std::vector<AttackResult> results(chosen.size());
    for_each_index(chosen.size(), workers, [&](std::size_t i) {
      results[i] = attack(classifier, train_set.examples[chosen[i]], lexicon, attack_config);
    });

    std::vector<EncodedExample> augmented = clean;
    std::size_t added = 0;
    for (std::size_t i = 0; i < results.size(); ++i) {
      if (results[i].status != AttackStatus::Success) continue;
      augmented.push_back({encode(results[i].final_example.tokens, classifier.vocab()), clean[chosen[i]].label});
      ++added;
    }
    if (added == 0) std::cerr << "warning: epoch " << epoch << " produced no adversarial examples; training on clean data\n";
    trainer.train_epoch(augmented);
    measure(epoch, added, augmented.size());
  }
  return curve;
}

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

nlohmann::json to_json(const AttackMetrics& m) {
  return {{"success_rate", m.success_rate},
          {"avg_replacement_rate", m.avg_replacement_rate},
          {"counts",
           {{"sampled", m.counts.sampled},
            {"attacked", m.counts.attacked},
            {"skipped_misclassified", m.counts.skipped_misclassified},
            {"succeeded", m.counts.succeeded},
            {"exhausted", m.counts.exhausted},
            {"budget_exceeded", m.counts.budget_exceeded}}}};
}

AttackMetrics metrics_from_json(const nlohmann::json& j) {
  AttackMetrics m;
  m.success_rate = j.at("success_rate").get<double>();
  m.avg_replacement_rate = j.at("avg_replacement_rate").get<double>();
  const auto& c = j.at("counts");
  m.counts.sampled = c.at("sampled").get<std::size_t>();
  m.counts.attacked = c.at("attacked").get<std::size_t>();
  m.counts.skipped_misclassified = c.at("skipped_misclassified").get<std::size_t>();
  m.counts.succeeded = c.at("succeeded").get<std::size_t>();
  m.counts.exhausted = c.at("exhausted").get<std::size_t>();
  m.counts.budget_exceeded = c.at("budget_exceeded").get<std::size_t>();
  return m;
}

std::string make_run_id(const nlohmann::json& config, const std::optional<AttackMetrics>& metrics) {
  std::string blob = config.dump();
  if (metrics) blob += to_json(*metrics).dump();
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << fnv1a64(blob);
  return os.str().substr(0, 12);
}

namespace {

std::ofstream open_for_write(const fs::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ReportError("cannot write " + path.string());
  return out;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

nlohmann::json curve_json(const RobustnessCurve& curve) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& p : curve)
    arr.push_back({{"epoch", p.epoch},
                   {"success_rate", p.success_rate},
                   {"avg_replacement_rate", p.avg_replacement_rate},
                   {"clean_accuracy", p.clean_accuracy},
                   {"adversarial_added", p.adversarial_added},
                   {"train_size", p.train_size}});
  return arr;
}

void write_curve(const RobustnessCurve& curve, const fs::path& path) {
  auto out = open_for_write(path);
  out << "epoch,success_rate,avg_replacement_rate,clean_accuracy,adversarial_added,train_size\n";
  for (const auto& p : curve)
    out << p.epoch << ',' << format_double(p.success_rate) << ',' << format_double(p.avg_replacement_rate) << ','
        << format_double(p.clean_accuracy) << ',' << p.adversarial_added << ',' << p.train_size << '\n';
  if (!out) throw ReportError("write failed: " + path.string());
}

}  // namespace

void emit_report(const Report& report, const std::vector<AttackResult>& results, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ReportError("cannot create " + dir.string() + ": " + ec.message());

  nlohmann::json j;
  j["run_id"] = report.run_id;
  j["config"] = report.config;
  if (report.metrics) j["metrics"] = to_json(*report.metrics);
  if (report.clean_accuracy) j["clean_accuracy"] = *report.clean_accuracy;
  if (!report.curve.empty()) j["curve"] = curve_json(report.curve);
  {
    auto out = open_for_write(dir / "report.json");
    out << j.dump(2) << '\n';
    if (!out) throw ReportError("write failed: " + (dir / "report.json").string());
  }
  if (report.metrics) {
    auto out = open_for_write(dir / "per_example.csv");
    out << "example_id,status,n_tokens,n_replacements,replacement_rate,initial_distance,final_distance,"
           "initial_true_prob,final_true_prob\n";
    for (const auto& r : results)
      out << csv_field(r.example_id) << ',' << status_name(r.status) << ',' << r.final_example.tokens.size() << ','
          << r.replacements.size() << ',' << format_double(r.replacement_rate) << ','
          << format_double(r.initial_distance) << ',' << format_double(r.final_distance) << ','
          << format_double(r.initial_true_prob) << ',' << format_double(r.final_true_prob) << '\n';
    if (!out) throw ReportError("write failed: per_example.csv");
  }
  if (!report.curve.empty()) write_curve(report.curve, dir / "curve.csv");
}

void write_traces(const std::vector<AttackResult>& results, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ReportError("cannot create " + dir.string() + ": " + ec.message());
  for (std::size_t n = 0; n < results.size(); ++n) {
    const auto& r = results[n];
    std::string name = r.example_id.empty() ? std::to_string(n) : r.example_id;
    for (char& c : name)
      if (c == '/' || c == '\\') c = '_';
    auto out = open_for_write(dir / (name + ".tsv"));
    out << "iteration\tposition\tword\tsynonym\treplaced\tsaliency\tz_max\tdistance_before\tdistance_after"
           "\ttrue_prob_before\ttrue_prob_after\tn_synonyms\n";
    for (const auto& s : r.trace)
      out << s.iteration << '\t' << s.position << '\t' << s.word << '\t' << s.synonym.value_or("") << '\t'
          << (s.replaced ? 1 : 0) << '\t' << format_double(s.saliency) << '\t'
          << (s.z_max ? format_double(*s.z_max) : "") << '\t' << format_double(s.distance_before) << '\t'
          << format_double(s.distance_after) << '\t' << format_double(s.true_prob_before) << '\t'
          << format_double(s.true_prob_after) << '\t' << s.num_synonyms << '\n';
    out << "# status\t" << status_name(r.status) << '\n';
    if (!out) throw ReportError("write failed: trace " + name);
  }
}

RobustnessCurve parse_curve(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ReportError("cannot read " + path.string());
  std::string line;
  if (!std::getline(in, line) || line.rfind("epoch,success_rate", 0) != 0)
    throw ReportError(path.string() + ": missing curve header");
  RobustnessCurve curve;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
    if (f.size() != 6) throw ReportError(path.string() + ": malformed curve row at line " + std::to_string(line_no));
    try {
      CurvePoint p;
      p.epoch = std::stoul(f[0]);
      p.success_rate = std::stod(f[1]);
      p.avg_replacement_rate = std::stod(f[2]);
      p.clean_accuracy = std::stod(f[3]);
      p.adversarial_added = std::stoul(f[4]);
      p.train_size = std::stoul(f[5]);
      curve.push_back(p);
    } catch (const std::exception&) {
      throw ReportError(path.string() + ": malformed curve row at line " + std::to_string(line_no));
    }
  }
  return curve;
}

Report parse_report(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ReportError("cannot read " + path.string());
  Report r;
  try {
    const nlohmann::json j = nlohmann::json::parse(in);
    r.run_id = j.at("run_id").get<std::string>();
    r.config = j.at("config");
    if (j.contains("metrics")) r.metrics = metrics_from_json(j.at("metrics"));
    if (j.contains("clean_accuracy")) r.clean_accuracy = j.at("clean_accuracy").get<double>();
    if (j.contains("curve")) {
      for (const auto& p : j.at("curve")) {
        CurvePoint c;
        c.epoch = p.at("epoch").get<std::size_t>();
        c.success_rate = p.at("success_rate").get<double>();
        c.avg_replacement_rate = p.at("avg_replacement_rate").get<double>();
        c.clean_accuracy = p.at("clean_accuracy").get<double>();
        c.adversarial_added = p.at("adversarial_added").get<std::size_t>();
        c.train_size = p.at("train_size").get<std::size_t>();
        r.curve.push_back(c);
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ReportError(path.string() + ": malformed report: " + e.what());
  }
  return r;
}

}  // namespace geoattack
