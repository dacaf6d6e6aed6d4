// geoattack command-line entry point: train, attack, advtrain, report.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "geoattack/attack.hpp"
#include "geoattack/checkpoint.hpp"
#include "geoattack/corpus.hpp"
#include "geoattack/embedding.hpp"
#include "geoattack/harness.hpp"
#include "geoattack/lexicon.hpp"
#include "geoattack/parallel.hpp"
#include "geoattack/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace geoattack;

namespace {

struct Profile {
  std::optional<std::size_t> max_len;
  std::size_t budget;
};

Profile profile_defaults(const std::string& name) {
  if (name == "imdb") return {600, 50};
  return {std::nullopt, 25};
}

struct Common {
  std::string profile = "imdb";
  std::optional<std::size_t> max_len;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  std::string out;
  std::string format;
};

struct TrainArgs {
  std::string data, test, emb, model = "cnn";
  std::size_t epochs = 10, batch = 32, hidden = 128, emb_dim = 100, min_freq = 1;
  double lr = 1e-3, clip = 5.0, dropout = 0.0;
  bool freeze_emb = false;
};

struct AttackArgs {
  std::string ckpt, data, lexicon, method = "geometric";
  std::optional<std::size_t> budget, sample;
  bool trace = false, iterative = false;
};

struct AdvArgs {
  std::string ckpt, data, test, lexicon;
  std::optional<std::size_t> budget, eval_sample;
  std::size_t epochs = 3, cap = 500, batch = 32;
  double lr = 1e-3, dropout = 0.0;
};

struct ReportArgs {
  std::vector<std::string> reports;
  std::string curve;
};

int resolve_workers(const Common& c) {
  if (c.workers) return *c.workers;
  if (const char* env = std::getenv("BA_WORKERS")) {
    try {
      return std::stoi(env);
    } catch (const std::exception&) {
      throw CLI::ValidationError("BA_WORKERS", std::string("not an integer: ") + env);
    }
  }
  return 0;
}

DatasetFormat resolve_format(const std::string& flag, const fs::path& path) {
  if (!flag.empty()) return parse_dataset_format(flag);
  if (fs::is_directory(path)) return DatasetFormat::Dir;
  return path.extension() == ".csv" ? DatasetFormat::Csv : DatasetFormat::Tsv;
}

// A directory with train/ and test/ below it names both splits.
std::pair<fs::path, std::optional<fs::path>> resolve_splits(const fs::path& data, const std::string& test) {
  if (fs::is_directory(data / "train")) {
    std::optional<fs::path> t;
    if (!test.empty()) t = test;
    else if (fs::is_directory(data / "test")) t = data / "test";
    return {data / "train", t};
  }
  return {data, test.empty() ? std::nullopt : std::optional<fs::path>(test)};
}

Dataset load_split(const fs::path& path, const Common& c, std::optional<std::size_t> max_len,
                   std::vector<std::string> labels, Split split) {
  LoadOptions opts;
  opts.format = resolve_format(c.format, path);
  opts.max_len = max_len;
  opts.label_names = std::move(labels);
  opts.split = split;
  return load_dataset(path, opts);
}

struct Loaded {
  std::shared_ptr<const Vocabulary> vocab;
  std::optional<Classifier> classifier;
};

Loaded load_model(const fs::path& ckpt) {
  const fs::path file = fs::is_directory(ckpt) ? ckpt / "model.ckpt" : ckpt;
  const fs::path vocab_file = file.parent_path() / "vocab.txt";
  if (!fs::exists(file)) throw CLI::ValidationError("--ckpt", "no checkpoint at " + file.string());
  if (!fs::exists(vocab_file)) throw CLI::ValidationError("--ckpt", "no vocab.txt next to " + file.string());
  Loaded l;
  l.vocab = std::make_shared<const Vocabulary>(Vocabulary::load(vocab_file));
  l.classifier.emplace(load_checkpoint(file, l.vocab));
  return l;
}

// Effective option values of a parsed subcommand, keyed by long name.
json collect_args(const CLI::App& sub) {
  json args = json::object();
  for (const CLI::Option* opt : sub.get_options()) {
    const auto& names = opt->get_lnames();
    if (names.empty() && opt->get_positional()) {
      if (!opt->results().empty()) args["_positional"] = opt->results();
      continue;
    }
    if (names.empty() || names[0] == "help" || names[0] == "config") continue;
    if (opt->get_expected_min() == 0) {
      args[names[0]] = opt->count() > 0;
    } else if (!opt->results().empty()) {
      if (opt->get_expected_max() > 1) args[names[0]] = opt->results();
      else args[names[0]] = opt->results().back();
    } else if (!opt->get_default_str().empty()) {
      args[names[0]] = opt->get_default_str();
    }
  }
  return args;
}

// Turns a config echo back into command-line tokens placed before the
// user's own, so explicit flags still win.
std::vector<std::string> replay_args(const fs::path& path, const std::string& expected_cmd) {
  std::ifstream in(path);
  if (!in) throw CLI::ValidationError("--config", "cannot read " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw CLI::ValidationError("--config", std::string("malformed config echo: ") + e.what());
  }
  if (j.value("command", "") != expected_cmd)
    throw CLI::ValidationError("--config", "echo is for '" + j.value("command", "?") + "', not '" + expected_cmd + "'");
  std::vector<std::string> out;
  for (const auto& [name, value] : j.at("args").items()) {
    if (name == "_positional") {
      for (const auto& v : value) out.push_back(v.get<std::string>());
    } else if (value.is_boolean()) {
      if (value.get<bool>()) out.push_back("--" + name);
    } else if (value.is_array()) {
      for (const auto& v : value) out.push_back("--" + name), out.push_back(v.get<std::string>());
    } else {
      out.push_back("--" + name);
      out.push_back(value.get<std::string>());
    }
  }
  return out;
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ReportError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

void prepare_out(const fs::path& out) {
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw ReportError("cannot create output directory " + out.string() + ": " + ec.message());
}

std::string pct(double x) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(2) << 100.0 * x << '%';
  return os.str();
}

int run_train(const TrainArgs& a, const Common& c, const json& echo) {
  const Profile prof = profile_defaults(c.profile);
  const auto max_len = c.max_len ? c.max_len : prof.max_len;
  const auto [train_path, test_path] = resolve_splits(a.data, a.test);
  Dataset train_set = load_split(train_path, c, max_len, {}, Split::Train);
  std::optional<Dataset> test_set;
  if (test_path) test_set = load_split(*test_path, c, max_len, train_set.label_names, Split::Test);

  auto vocab = std::make_shared<const Vocabulary>(Vocabulary::build(train_set, a.min_freq));
  std::optional<EmbeddingTable> emb;
  EmbeddingCoverage coverage;
  if (!a.emb.empty()) emb = load_embeddings(a.emb, *vocab, a.emb_dim, &coverage);

  TrainConfig cfg;
  cfg.encoder = parse_encoder_kind(a.model);
  cfg.epochs = a.epochs;
  cfg.batch_size = a.batch;
  cfg.learning_rate = a.lr;
  cfg.grad_clip = a.clip;
  cfg.dropout = a.dropout;
  cfg.freeze_embeddings = a.freeze_emb;
  cfg.seed = *c.seed;
  cfg.hidden = a.hidden;
  cfg.embedding_dim = a.emb_dim;
  cfg.workers = resolve_workers(c);

  prepare_out(c.out);
  write_json(fs::path(c.out) / "config_echo.json", echo);
  std::cout << "train: " << train_set.size() << " examples, vocab " << vocab->size();
  if (emb) std::cout << ", embedding coverage " << pct(coverage.ratio());
  std::cout << '\n';

  json history = json::array();
  TrainResult result = train(train_set, test_set ? &*test_set : nullptr, vocab, emb ? &*emb : nullptr, cfg,
                             [&](const EpochMetrics& m) {
                               std::cout << "epoch " << m.epoch << " loss " << format_double(m.loss) << " train "
                                         << pct(m.train_accuracy);
                               if (m.test_accuracy) std::cout << " test " << pct(*m.test_accuracy);
                               std::cout << std::endl;
                               json row = {{"epoch", m.epoch}, {"loss", m.loss}, {"train_accuracy", m.train_accuracy}};
                               if (m.test_accuracy) row["test_accuracy"] = *m.test_accuracy;
                               history.push_back(row);
                             });
  vocab->save(fs::path(c.out) / "vocab.txt");
  save_checkpoint(result.classifier, fs::path(c.out) / "model.ckpt");
  json metrics = {{"history", history}, {"vocab_size", vocab->size()}};
  if (emb) metrics["embedding_coverage"] = coverage.ratio();
  if (!result.history.empty() && result.history.back().test_accuracy) {
    metrics["test_accuracy"] = *result.history.back().test_accuracy;
    std::cout << "test accuracy " << pct(*result.history.back().test_accuracy) << '\n';
  }
  write_json(fs::path(c.out) / "metrics.json", metrics);
  return 0;
}

AttackConfig attack_config(std::optional<std::size_t> budget, const Profile& prof, bool iterative,
                           const std::string& method) {
  AttackConfig cfg;
  cfg.max_replacements = budget ? *budget : prof.budget;
  cfg.iterative_deepfool = iterative;
  cfg.method = parse_attack_method(method);
  return cfg;
}

int run_attack(const AttackArgs& a, const Common& c, json echo) {
  const Profile prof = profile_defaults(c.profile);
  const auto max_len = c.max_len ? c.max_len : prof.max_len;
  Loaded model = load_model(a.ckpt);
  const Classifier& clf = *model.classifier;
  const auto [train_path, test_path] = resolve_splits(a.data, "");
  const fs::path eval_path = test_path ? *test_path : train_path;
  const Dataset data = load_split(eval_path, c, max_len, clf.label_names(), Split::Test);
  const SynonymLexicon lexicon = SynonymLexicon::load(a.lexicon);

  const AttackConfig cfg = attack_config(a.budget, prof, a.iterative, a.method);
  EvaluationOptions opts;
  opts.sample_limit = a.sample;
  opts.seed = *c.seed;
  opts.workers = resolve_workers(c);
  echo["effective"] = {{"budget", cfg.max_replacements},
                       {"max_len", max_len ? json(*max_len) : json(nullptr)},
                       {"eval_path", eval_path.string()}};

  prepare_out(c.out);
  write_json(fs::path(c.out) / "config_echo.json", echo);
  const Evaluation ev = evaluate_attack(clf, data, lexicon, cfg, opts);

  const auto encoded = encode_dataset(data, clf.vocab());
  std::vector<EncodedExample> picked;
  for (std::size_t i : sample_indices(data.size(), a.sample, *c.seed)) picked.push_back(encoded[i]);

  Report report;
  report.config = echo;
  report.metrics = ev.metrics;
  report.clean_accuracy = accuracy(clf, picked, opts.workers);
  report.run_id = make_run_id(echo, report.metrics);
  emit_report(report, ev.results, c.out);
  if (a.trace) write_traces(ev.results, fs::path(c.out) / "traces");

  std::cout << "attacked " << ev.metrics.counts.attacked << " (skipped " << ev.metrics.counts.skipped_misclassified
            << " misclassified)\nsuccess rate " << pct(ev.metrics.success_rate) << "\navg replacement rate "
            << pct(ev.metrics.avg_replacement_rate) << "\nrun id " << report.run_id << '\n';
  return 0;
}

int run_advtrain(const AdvArgs& a, const Common& c, json echo) {
  const Profile prof = profile_defaults(c.profile);
  const auto max_len = c.max_len ? c.max_len : prof.max_len;
  Loaded model = load_model(a.ckpt);
  Classifier& clf = *model.classifier;
  const auto [train_path, test_path] = resolve_splits(a.data, a.test);
  if (!test_path) throw CLI::ValidationError("--test", "advtrain needs a test split");
  const Dataset train_set = load_split(train_path, c, max_len, clf.label_names(), Split::Train);
  const Dataset test_set = load_split(*test_path, c, max_len, clf.label_names(), Split::Test);
  const SynonymLexicon lexicon = SynonymLexicon::load(a.lexicon);

  const AttackConfig acfg = attack_config(a.budget, prof, false, "geometric");
  AdvTrainConfig cfg;
  cfg.epochs = a.epochs;
  cfg.attack_cap = a.cap;
  cfg.eval_sample = a.eval_sample;
  cfg.train.seed = *c.seed;
  cfg.train.learning_rate = a.lr;
  cfg.train.batch_size = a.batch;
  cfg.train.dropout = a.dropout;
  cfg.train.workers = resolve_workers(c);
  echo["effective"] = {{"budget", acfg.max_replacements}, {"max_len", max_len ? json(*max_len) : json(nullptr)}};

  prepare_out(c.out);
  write_json(fs::path(c.out) / "config_echo.json", echo);
  const RobustnessCurve curve =
      adversarial_train(clf, train_set, test_set, lexicon, acfg, cfg, [](const CurvePoint& p) {
        std::cout << "epoch " << p.epoch << " success " << pct(p.success_rate) << " replaced "
                  << pct(p.avg_replacement_rate) << " clean acc " << pct(p.clean_accuracy) << " added "
                  << p.adversarial_added << std::endl;
      });
  Report report;
  report.config = echo;
  report.curve = curve;
  report.run_id = make_run_id(echo, std::nullopt);
  emit_report(report, {}, c.out);
  model.vocab->save(fs::path(c.out) / "vocab.txt");
  save_checkpoint(clf, fs::path(c.out) / "model.ckpt");
  return 0;
}

int run_report(const ReportArgs& a, const Common& c, const json& echo) {
  std::vector<Report> reports;
  for (const auto& p : a.reports) reports.push_back(parse_report(p));
  RobustnessCurve curve;
  if (!a.curve.empty()) curve = parse_curve(a.curve);

  if (!reports.empty()) {
    std::cout << std::left << std::setw(16) << "run" << std::setw(10) << "attacked" << std::setw(12) << "clean acc"
              << std::setw(12) << "success" << "replaced\n";
    for (const auto& r : reports) {
      std::cout << std::setw(16) << r.run_id;
      if (r.metrics) {
        std::cout << std::setw(10) << r.metrics->counts.attacked << std::setw(12)
                  << (r.clean_accuracy ? pct(*r.clean_accuracy) : "-") << std::setw(12)
                  << pct(r.metrics->success_rate) << pct(r.metrics->avg_replacement_rate);
      } else {
        std::cout << "(no attack metrics)";
      }
      std::cout << '\n';
      if (curve.empty()) curve = r.curve;
    }
  }
  if (!c.out.empty()) {
    prepare_out(c.out);
    write_json(fs::path(c.out) / "config_echo.json", echo);
    if (!curve.empty()) {
      auto series = [&](const std::string& name, auto get) {
        std::ofstream out(fs::path(c.out) / name);
        if (!out) throw ReportError("cannot write " + name);
        out << "epoch,value\n";
        for (const auto& p : curve) out << p.epoch << ',' << format_double(get(p)) << '\n';
      };
      series("series_success_rate.csv", [](const CurvePoint& p) { return p.success_rate; });
      series("series_replacement_rate.csv", [](const CurvePoint& p) { return p.avg_replacement_rate; });
      series("series_clean_accuracy.csv", [](const CurvePoint& p) { return p.clean_accuracy; });
    }
  }
  if (!curve.empty()) {
    std::cout << "epoch  success   replaced  clean acc\n";
    for (const auto& p : curve)
      std::cout << std::setw(7) << p.epoch << std::setw(10) << pct(p.success_rate) << std::setw(10)
                << pct(p.avg_replacement_rate) << pct(p.clean_accuracy) << '\n';
  }
  return 0;
}

void add_common(CLI::App* sub, Common& c, bool needs_seed) {
  sub->add_option("--profile", c.profile, "Dataset profile bundling max-len and budget defaults")
      ->check(CLI::IsMember({"imdb", "agnews"}))
      ->capture_default_str();
  sub->add_option("--max-len", c.max_len, "Truncate examples to this many tokens");
  sub->add_option("--format", c.format, "Dataset format (csv|tsv|dir); inferred when omitted")
      ->check(CLI::IsMember({"csv", "tsv", "dir"}));
  auto* seed = sub->add_option("--seed", c.seed, "Random seed");
  if (needs_seed) seed->required();
  sub->add_option("--workers", c.workers, "Worker threads (default: BA_WORKERS or all cores)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Geometry-guided word substitution attacks on text classifiers"};
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

  Common common;
  std::string config_path;
  TrainArgs ta;
  AttackArgs aa;
  AdvArgs va;
  ReportArgs ra;

  auto* train_cmd = app.add_subcommand("train", "Train a classifier and write a checkpoint");
  add_common(train_cmd, common, true);
  train_cmd->add_option("--data", ta.data, "Training data (file, or directory with train/ and test/)")
      ->required()
      ->check(CLI::ExistingPath);
  train_cmd->add_option("--test", ta.test, "Test split")->check(CLI::ExistingPath);
  train_cmd->add_option("--emb", ta.emb, "Pretrained embeddings (word v1 ... vD)")->check(CLI::ExistingFile);
  train_cmd->add_option("--model", ta.model, "Encoder: cnn|rnn|bag")
      ->check(CLI::IsMember({"cnn", "rnn", "bag"}))
      ->capture_default_str();
  train_cmd->add_option("--epochs", ta.epochs)->capture_default_str();
  train_cmd->add_option("--batch", ta.batch)->capture_default_str()->check(CLI::PositiveNumber);
  train_cmd->add_option("--lr", ta.lr)->capture_default_str();
  train_cmd->add_option("--dropout", ta.dropout, "Dropout on the pooled features")
      ->capture_default_str()
      ->check(CLI::Range(0.0, 0.95));
  train_cmd->add_option("--clip", ta.clip, "Global gradient-norm clip (0 disables)")->capture_default_str();
  train_cmd->add_flag("--freeze-emb", ta.freeze_emb, "Keep the embedding table fixed");
  train_cmd->add_option("--hidden", ta.hidden)->capture_default_str()->check(CLI::PositiveNumber);
  train_cmd->add_option("--emb-dim", ta.emb_dim)->capture_default_str()->check(CLI::PositiveNumber);
  train_cmd->add_option("--min-freq", ta.min_freq)->capture_default_str();
  train_cmd->add_option("--out", common.out)->required();

  auto* attack_cmd = app.add_subcommand("attack", "Attack a dataset with a trained checkpoint");
  add_common(attack_cmd, common, true);
  attack_cmd->add_option("--ckpt", aa.ckpt, "Checkpoint file or run directory")->required()->check(CLI::ExistingPath);
  attack_cmd->add_option("--data", aa.data, "Examples to attack (test/ is used when present)")
      ->required()
      ->check(CLI::ExistingPath);
  attack_cmd->add_option("--lexicon", aa.lexicon, "Synonym TSV")->required()->check(CLI::ExistingFile);
  attack_cmd->add_option("--budget", aa.budget, "Replacement budget (profile default 50/25)")
      ->check(CLI::PositiveNumber);
  attack_cmd->add_option("--sample", aa.sample, "Attack a seeded random subset of this size");
  attack_cmd->add_option("--method", aa.method, "geometric|greedy")
      ->check(CLI::IsMember({"geometric", "greedy"}))
      ->capture_default_str();
  attack_cmd->add_flag("--trace", aa.trace, "Write per-example trace files");
  attack_cmd->add_flag("--iterative", aa.iterative, "Use iterative boundary search");
  attack_cmd->add_option("--out", common.out)->required();

  auto* adv_cmd = app.add_subcommand("advtrain", "Adversarially fine-tune a checkpoint");
  add_common(adv_cmd, common, true);
  adv_cmd->add_option("--ckpt", va.ckpt)->required()->check(CLI::ExistingPath);
  adv_cmd->add_option("--data", va.data, "Training data (or directory with train/ and test/)")
      ->required()
      ->check(CLI::ExistingPath);
  adv_cmd->add_option("--test", va.test)->check(CLI::ExistingPath);
  adv_cmd->add_option("--lexicon", va.lexicon)->required()->check(CLI::ExistingFile);
  adv_cmd->add_option("--budget", va.budget)->check(CLI::PositiveNumber);
  adv_cmd->add_option("--epochs", va.epochs)->capture_default_str();
  adv_cmd->add_option("--cap", va.cap, "Correctly classified train examples attacked per epoch")
      ->capture_default_str();
  adv_cmd->add_option("--eval-sample", va.eval_sample, "Fixed test subset used for the curve");
  adv_cmd->add_option("--lr", va.lr)->capture_default_str();
  adv_cmd->add_option("--dropout", va.dropout)->capture_default_str()->check(CLI::Range(0.0, 0.95));
  adv_cmd->add_option("--batch", va.batch)->capture_default_str()->check(CLI::PositiveNumber);
  adv_cmd->add_option("--out", common.out)->required();

  auto* report_cmd = app.add_subcommand("report", "Summarize report.json files and curve data");
  report_cmd->add_option("reports", ra.reports, "report.json files")->check(CLI::ExistingFile);
  report_cmd->add_option("--curve", ra.curve, "curve.csv")->check(CLI::ExistingFile);
  report_cmd->add_option("--out", common.out, "Directory for plot series");

  for (auto* sub : {train_cmd, attack_cmd, adv_cmd, report_cmd})
    sub->add_option("--config", config_path, "Replay a config_echo.json")->check(CLI::ExistingFile);

  try {
    // --config is expanded before parsing so the echoed arguments can satisfy required options.
    std::vector<std::string> tokens(argv, argv + argc);
    for (std::size_t i = 2; i < tokens.size(); ++i) {
      std::string path;
      std::size_t span = 0;
      if (tokens[i] == "--config" && i + 1 < tokens.size()) {
        path = tokens[i + 1];
        span = 2;
      } else if (tokens[i].rfind("--config=", 0) == 0) {
        path = tokens[i].substr(9);
        span = 1;
      }
      if (span == 0) continue;
      if (!fs::is_regular_file(path)) throw CLI::ValidationError("--config", "cannot read " + path);
      tokens.erase(tokens.begin() + static_cast<std::ptrdiff_t>(i), tokens.begin() + static_cast<std::ptrdiff_t>(i + span));
      const std::vector<std::string> args = replay_args(path, tokens[1]);
      tokens.insert(tokens.begin() + 2, args.begin(), args.end());
      break;
    }
    std::vector<const char*> cargv;
    for (const auto& t : tokens) cargv.push_back(t.c_str());
    app.parse(static_cast<int>(cargv.size()), const_cast<char**>(cargv.data()));
    CLI::App* sub = app.get_subcommands().front();
    json echo = {{"command", sub->get_name()}, {"args", collect_args(*sub)}};
    echo["args"].erase("config");
    if (sub == train_cmd) return run_train(ta, common, echo);
    if (sub == attack_cmd) return run_attack(aa, common, echo);
    if (sub == adv_cmd) return run_advtrain(va, common, echo);
    return run_report(ra, common, echo);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
