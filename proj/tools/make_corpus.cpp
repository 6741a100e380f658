#include <CLI11.hpp>
#include <iostream>

#include "dualrnn/common.hpp"
#include "dualrnn/synth.hpp"

// Writes one of the bundled synthetic corpora as train/valid/test files, for
// quick experiments without real data.
int main(int argc, char** argv) {
  CLI::App app{"generate a synthetic toy corpus"};
  std::string kind;
  std::string out_dir = "corpus";
  uint64_t seed = 11;
  app.add_option("kind", kind, "pattern | shift")->required();
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--seed", seed, "seed for the shift corpus");
  CLI11_PARSE(app, argc, argv);

  try {
    dualrnn::SynthCorpus corpus;
    if (kind == "pattern")
      corpus = dualrnn::make_pattern_corpus();
    else if (kind == "shift")
      corpus = dualrnn::make_two_regime_corpus(seed);
    else
      throw dualrnn::config_error("kind must be 'pattern' or 'shift', got '" + kind + "'");
    dualrnn::write_corpus_dir(corpus, out_dir);
    std::cout << "wrote " << out_dir << "/{train,valid,test}.txt\n";
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
