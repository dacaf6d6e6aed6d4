#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "geoattack/harness.hpp"
#include "toy.hpp"

using namespace geoattack;

namespace {

struct FlipToy {
  std::shared_ptr<const Vocabulary> vocab = toy::vocab({"movie", "good", "nice", "fine", "bad", "poor"});
  Classifier clf = toy::bag(vocab, toy::matrix(7, 2, {0, 0, 0, 1, 2, 0, -1, 0.5, 1, 0, -2, 0, -1.5, 0}),
                            AffineHead(toy::matrix(2, 2, {1, 0, -1, 0}), {0, 0}));
  SynonymLexicon lex;
  Dataset data;
  FlipToy() {
    lex.add("good", {"fine", "nice"});
    lex.add("bad", {"fine"});
    data.label_names = {"c0", "c1"};
    data.examples = {toy::example({"good", "movie"}, 0, "a"), toy::example({"movie", "good"}, 0, "b"),
                     toy::example({"good", "movie", "movie"}, 0, "c"), toy::example({"bad", "movie"}, 1, "d"),
                     toy::example({"bad", "movie"}, 0, "wrong")};
  }
};

// Polarity words plus two synonyms whose clean usage points the wrong way.
Dataset polarity(bool test) {
  Dataset d;
  d.label_names = {"neg", "pos"};
  const std::vector<std::string> nouns{"movie", "film", "story", "plot"};
  int id = 0;
  auto add = [&](std::vector<std::string> w, std::size_t y) { d.examples.push_back(toy::example(w, y, std::to_string(id++))); };
  for (int rep = 0; rep < (test ? 1 : 3); ++rep)
    for (const auto& n : nouns) {
      add({"good", n}, 1);
      add({"great", n}, 1);
      add({"bad", n}, 0);
      add({"awful", n}, 0);
    }
  if (!test)
    for (const auto& n : nouns) {
      add({"fine", n}, 0);
      add({"poor", n}, 1);
    }
  return d;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST_CASE("aggregate counts and rates") {
  std::vector<AttackResult> rs(4);
  rs[0].status = AttackStatus::Success;
  rs[0].replacement_rate = 0.2;
  rs[1].status = AttackStatus::Success;
  rs[1].replacement_rate = 0.4;
  rs[2].status = AttackStatus::Exhausted;
  rs[2].replacement_rate = 0.9;
  rs[3].status = AttackStatus::BudgetExceeded;
  const AttackMetrics m = aggregate(rs, 3);
  CHECK(m.counts.attacked == 4);
  CHECK(m.counts.sampled == 7);
  CHECK(m.counts.succeeded == 2);
  CHECK(m.counts.exhausted == 1);
  CHECK(m.counts.budget_exceeded == 1);
  CHECK(m.success_rate == 0.5);
  CHECK(m.avg_replacement_rate == doctest::Approx(0.3));
  CHECK(aggregate({}, 0).success_rate == 0.0);
}

TEST_CASE("seeded sampling") {
  const auto a = sample_indices(100, 10, 7);
  CHECK(a.size() == 10);
  CHECK(std::is_sorted(a.begin(), a.end()));
  CHECK(a == sample_indices(100, 10, 7));
  CHECK(a != sample_indices(100, 10, 8));
  CHECK(sample_indices(5, std::nullopt, 1).size() == 5);
  CHECK(sample_indices(5, 50, 1).size() == 5);
}

TEST_CASE("every example flippable by one swap") {
  FlipToy t;
  EvaluationOptions opts;
  const Evaluation ev = evaluate_attack(t.clf, t.data, t.lex, AttackConfig{}, opts);
  CHECK(ev.metrics.counts.skipped_misclassified == 1);
  CHECK(ev.metrics.counts.attacked == 4);
  CHECK(ev.metrics.success_rate == 1.0);
  for (const auto& r : ev.results) {
    CHECK(r.replacements.size() == 1);
    CHECK(r.replacement_rate == doctest::Approx(1.0 / static_cast<double>(r.final_example.tokens.size())));
  }
  CHECK(ev.metrics.avg_replacement_rate == doctest::Approx((0.5 + 0.5 + 1.0 / 3 + 0.5) / 4));
}

TEST_CASE("constant classifier: only its class is attacked and nothing flips") {
  FlipToy t;
  const Classifier flat = toy::bag(t.vocab, t.clf.params().embedding.rows, AffineHead(Matrix(2, 2), {1, 0}));
  const Evaluation ev = evaluate_attack(flat, t.data, t.lex, AttackConfig{}, {});
  CHECK(ev.metrics.counts.attacked == 4);
  CHECK(ev.metrics.counts.skipped_misclassified == 1);
  CHECK(ev.metrics.success_rate == 0.0);
}

TEST_CASE("no eligible example is an error") {
  FlipToy t;
  Dataset wrong;
  wrong.label_names = t.data.label_names;
  wrong.examples = {t.data.examples.back()};
  CHECK_THROWS_AS(evaluate_attack(t.clf, wrong, t.lex, AttackConfig{}, {}), EvaluationError);
}

TEST_CASE("parallel evaluation equals the serial reference") {
  std::mt19937_64 rng(12);
  const Dataset train_set = polarity(false);
  auto vocab = std::make_shared<const Vocabulary>(Vocabulary::build(train_set));
  const Classifier clf = toy::random_classifier(EncoderKind::Convolutional, vocab, 4, 6, 2, rng);
  SynonymLexicon lex;
  lex.add("good", {"fine", "great"});
  lex.add("bad", {"poor", "awful"});
  lex.add("movie", {"film"});
  EvaluationOptions opts;
  opts.workers = 3;
  opts.sample_limit = 30;
  try {
    const Evaluation par = evaluate_attack(clf, train_set, lex, AttackConfig{}, opts);
    const Evaluation ser = evaluate_attack_serial(clf, train_set, lex, AttackConfig{}, opts);
    CHECK(to_json(par.metrics) == to_json(ser.metrics));
    REQUIRE(par.results.size() == ser.results.size());
    for (std::size_t i = 0; i < par.results.size(); ++i) {
      CHECK(par.results[i].example_id == ser.results[i].example_id);
      CHECK(par.results[i].final_distance == ser.results[i].final_distance);
    }
  } catch (const EvaluationError&) {
    FAIL("random model classified nothing correctly");
  }
}

TEST_CASE("adversarial training: epoch 0 only when epochs = 0") {
  FlipToy t;
  Classifier clf = t.clf;
  AdvTrainConfig cfg;
  cfg.epochs = 0;
  const RobustnessCurve curve = adversarial_train(clf, t.data, t.data, t.lex, AttackConfig{}, cfg);
  REQUIRE(curve.size() == 1);
  CHECK(curve[0].epoch == 0);
  CHECK(curve[0].success_rate == 1.0);
  CHECK(clf.params().head.weight.data == t.clf.params().head.weight.data);
  CHECK(clf.params().embedding.rows.data == t.clf.params().embedding.rows.data);
}

TEST_CASE("adversarial training lowers the toy success rate") {
  const Dataset train_set = polarity(false);
  const Dataset test_set = polarity(true);
  auto vocab = std::make_shared<const Vocabulary>(Vocabulary::build(train_set));
  TrainConfig tc;
  tc.encoder = EncoderKind::Bag;
  tc.embedding_dim = 4;
  tc.hidden = 4;
  tc.epochs = 40;
  tc.batch_size = 4;
  tc.learning_rate = 0.05;
  tc.seed = 3;
  TrainResult base = train(train_set, &test_set, vocab, nullptr, tc);
  SynonymLexicon lex;
  lex.add("good", {"fine"});
  lex.add("great", {"fine"});
  lex.add("bad", {"poor"});
  lex.add("awful", {"poor"});
  AdvTrainConfig cfg;
  cfg.epochs = 3;
  cfg.attack_cap = 100;
  cfg.train = tc;
  std::vector<std::size_t> sizes;
  const RobustnessCurve curve = adversarial_train(base.classifier, train_set, test_set, lex, AttackConfig{}, cfg,
                                                  [&](const CurvePoint& p) { sizes.push_back(p.train_size); });
  REQUIRE(curve.size() == 4);
  MESSAGE("toy curve: " << curve[0].success_rate << " -> " << curve[3].success_rate);
  CHECK(curve[0].success_rate > 0.0);
  CHECK(curve[3].success_rate <= curve[0].success_rate);
  for (const auto& p : curve) CHECK(p.train_size == train_set.size() + p.adversarial_added);
  CHECK(sizes.size() == 4);
}

TEST_CASE("report round trip") {
  FlipToy t;
  const Evaluation ev = evaluate_attack(t.clf, t.data, t.lex, AttackConfig{}, {});
  Report rep;
  rep.config = {{"seed", 1}, {"budget", 50}};
  rep.metrics = ev.metrics;
  rep.clean_accuracy = 0.8;
  rep.curve = {{0, 1.0, 0.5, 0.8, 0, 5}, {1, 0.5, 0.6, 0.79, 2, 7}};
  rep.run_id = make_run_id(rep.config, rep.metrics);
  CHECK(rep.run_id.size() == 12);
  CHECK(rep.run_id == make_run_id(rep.config, rep.metrics));
  const auto dir = toy::scratch("report");
  emit_report(rep, ev.results, dir);
  const Report back = parse_report(dir / "report.json");
  CHECK(back.run_id == rep.run_id);
  CHECK(to_json(*back.metrics) == to_json(*rep.metrics));
  CHECK(back.curve.size() == 2);
  CHECK(parse_curve(dir / "curve.csv").size() == 2);
  CHECK(parse_curve(dir / "curve.csv")[1].adversarial_added == 2);

  std::ifstream csv(dir / "per_example.csv");
  std::size_t rows = 0;
  for (std::string line; std::getline(csv, line);) ++rows;
  CHECK(rows == ev.metrics.counts.attacked + 1);

  write_traces(ev.results, dir / "traces");
  CHECK(std::filesystem::exists(dir / "traces" / "a.tsv"));
  CHECK(slurp(dir / "traces" / "a.tsv").find("# status\tsuccess") != std::string::npos);
}

TEST_CASE("empty results still give a valid report") {
  Report rep;
  rep.config = nlohmann::json::object();
  rep.metrics = aggregate({}, 0);
  rep.run_id = make_run_id(rep.config, rep.metrics);
  const auto dir = toy::scratch("report_empty");
  emit_report(rep, {}, dir);
  CHECK(parse_report(dir / "report.json").metrics->counts.attacked == 0);
  CHECK(slurp(dir / "per_example.csv").find('\n') == slurp(dir / "per_example.csv").size() - 1);
}

TEST_CASE("report errors") {
  const auto dir = toy::scratch("report_bad");
  toy::write(dir / "blocker", "x");
  Report rep;
  rep.metrics = aggregate({}, 0);
  CHECK_THROWS_AS(emit_report(rep, {}, dir / "blocker" / "sub"), ReportError);
  toy::write(dir / "bad.json", "{\"run_id\": 3");
  CHECK_THROWS_AS(parse_report(dir / "bad.json"), ReportError);
  toy::write(dir / "bad.csv", "epoch,success_rate,avg_replacement_rate,clean_accuracy,adversarial_added,train_size\n1,2\n");
  CHECK_THROWS_AS(parse_curve(dir / "bad.csv"), ReportError);
  CHECK_THROWS_AS(parse_report(dir / "absent.json"), ReportError);
}
