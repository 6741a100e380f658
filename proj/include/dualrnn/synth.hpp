#ifndef DUALRNN_SYNTH_HPP
#define DUALRNN_SYNTH_HPP

#include <cstdint>
#include <string>

namespace dualrnn {

struct SynthCorpus {
  std::string train, valid, test;
};

// Fixed cyclic corpus: lines of seven word tokens so the end-of-sequence
// marker completes a period of eight. 64 training lines = 512 tokens.
SynthCorpus make_pattern_corpus();

// Markov chain over sixteen symbols whose transition stride changes from the
// first to the second regime midway through the test split. Training and
// validation text come from the first regime only.
SynthCorpus make_two_regime_corpus(uint64_t seed);

// Writes train.txt / valid.txt / test.txt under dir (created if missing).
void write_corpus_dir(const SynthCorpus& corpus, const std::string& dir);

}  // namespace dualrnn

#endif  // DUALRNN_SYNTH_HPP
