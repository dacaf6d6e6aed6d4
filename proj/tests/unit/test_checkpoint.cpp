#include <filesystem>
#include <fstream>
#include <random>

#include "doctest.h"
#include "geoattack/checkpoint.hpp"
#include "toy.hpp"

using namespace geoattack;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST_CASE("checkpoint round trip preserves predictions") {
  std::mt19937_64 rng(41);
  const auto v = toy::vocab({"a", "b", "c", "d", "e", "f"});
  const auto dir = toy::scratch("ckpt");
  for (EncoderKind kind : {EncoderKind::Convolutional, EncoderKind::Recurrent, EncoderKind::Bag}) {
    const Classifier clf = toy::random_classifier(kind, v, 4, 9, 3, rng);
    save_checkpoint(clf, dir / "m.ckpt");
    const Classifier back = load_checkpoint(dir / "m.ckpt", v);
    CHECK(back.kind() == kind);
    CHECK(back.label_names() == clf.label_names());
    std::uniform_int_distribution<TokenId> tok(0, static_cast<TokenId>(v->size() - 1));
    std::uniform_int_distribution<int> len(1, 12);
    for (int i = 0; i < 100; ++i) {
      std::vector<TokenId> ids(static_cast<std::size_t>(len(rng)));
      for (auto& t : ids) t = tok(rng);
      CHECK(back.predict(ids) == clf.predict(ids));
      CHECK(back.logits(ids) == clf.logits(ids));
    }
  }
}

TEST_CASE("corrupt, truncated and mismatched checkpoints are rejected") {
  std::mt19937_64 rng(43);
  const auto v = toy::vocab({"a", "b", "c"});
  const auto dir = toy::scratch("ckpt_bad");
  const Classifier clf = toy::random_classifier(EncoderKind::Convolutional, v, 3, 6, 2, rng);
  save_checkpoint(clf, dir / "m.ckpt");
  const std::string bytes = slurp(dir / "m.ckpt");

  toy::write(dir / "trunc.ckpt", bytes.substr(0, bytes.size() / 2));
  CHECK_THROWS_AS(load_checkpoint(dir / "trunc.ckpt", v), CheckpointError);

  std::string flipped = bytes;
  flipped[bytes.size() / 2] ^= 0x40;
  toy::write(dir / "flip.ckpt", flipped);
  CHECK_THROWS_AS(load_checkpoint(dir / "flip.ckpt", v), CheckpointError);

  std::string version = bytes;
  version[8] = 99;
  toy::write(dir / "ver.ckpt", version);
  CHECK_THROWS_AS(load_checkpoint(dir / "ver.ckpt", v), CheckpointError);

  CHECK_THROWS_AS(load_checkpoint(dir / "m.ckpt", toy::vocab({"a", "b", "x"})), CheckpointError);
  CHECK_THROWS_AS(load_checkpoint(dir / "absent.ckpt", v), CheckpointError);
  CHECK_FALSE(std::filesystem::exists(dir / "m.ckpt.tmp"));
}
