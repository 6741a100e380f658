#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "dualrnn/config.hpp"

using namespace dualrnn;

TEST_CASE("config text parses keys, comments and whitespace") {
  const RunConfig cfg = parse_config_text(
      "# a comment\n"
      "architecture = ers\n"
      "recurrence=mdlstm   # trailing comment\n"
      "  embedding_units =  64\n"
      "lr = 5e-4\n"
      "tie_weights = 0\n");
  CHECK(cfg.architecture == "ers");
  CHECK(cfg.recurrence == "mdlstm");
  CHECK(cfg.embedding_units == 64);
  CHECK(cfg.lr == doctest::Approx(5e-4));
  CHECK(cfg.tie_weights == false);
  CHECK(cfg.batch_size == 32);  // untouched keys keep their defaults
}

TEST_CASE("unknown keys and malformed lines are rejected") {
  CHECK_THROWS_AS(parse_config_text("no_such_key = 1\n"), config_error);
  CHECK_THROWS_AS(parse_config_text("just some words\n"), config_error);
  CHECK_THROWS_AS(parse_config_text("epochs = ten\n"), config_error);
  CHECK_THROWS_AS(parse_config_text("architecture = transformer\n"), config_error);
}

TEST_CASE("overrides take precedence over file values") {
  RunConfig cfg = parse_config_text("epochs = 10\nlr = 1e-3\n");
  apply_override(cfg, "epochs=25");
  apply_override(cfg, "seed = 9");
  CHECK(cfg.epochs == 25);
  CHECK(cfg.seed == 9);
  CHECK(cfg.lr == doctest::Approx(1e-3));
  CHECK_THROWS_AS(apply_override(cfg, "epochs"), config_error);
}

TEST_CASE("the echo round-trips through the parser") {
  RunConfig cfg;
  cfg.architecture = "ers";
  cfg.recurrence = "dlstm";
  cfg.vocab_size = 321;
  cfg.dropout_rec = 0.35;
  cfg.l2_mogrifier = 1e-6;
  cfg.train_path = "/tmp/x.txt";
  cfg.seed = 1234567;
  const RunConfig back = parse_config_text(config_echo(cfg));
  CHECK(config_echo(back) == config_echo(cfg));
}

TEST_CASE("every documented key has a default and parses back") {
  RunConfig cfg;
  for (const auto& doc : config_key_docs()) {
    CHECK(!doc.key.empty());
    CHECK(!doc.doc.empty());
    // corpus paths are the only keys whose default is empty
    if (doc.default_value.empty())
      CHECK((doc.key == "train_path" || doc.key == "valid_path" || doc.key == "test_path" ||
             doc.key == "checkpoint_path"));
    else
      apply_override(cfg, doc.key + "=" + doc.default_value);
  }
}

TEST_CASE("model extraction carries every hyperparameter") {
  RunConfig cfg = parse_config_text(
      "architecture = dual\nrecurrence = mdlstm\nvocab_size = 50\n"
      "embedding_units = 8\nrecurrent_units = 8\ndual_units = 8\n"
      "mogrifier_rounds = 3\nmogrifier_rank = 2\nmogrifier_bias = 0\n"
      "dropout_mogrifier = 0.15\nl2_activation = 1e-5\nseed = 3\n");
  const ModelConfig m = cfg.model();
  m.validate();
  CHECK(m.recurrence == RecKind::MDLSTM);
  CHECK(m.mogrifier_rounds == 3);
  CHECK(m.mogrifier_rank == 2);
  CHECK(m.mogrifier_bias == false);
  CHECK(m.dropout.mogrifier == doctest::Approx(0.15));
  CHECK(m.l2.activation == doctest::Approx(1e-5));
  CHECK(m.seed == 3);
}
