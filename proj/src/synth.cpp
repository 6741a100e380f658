#include "dualrnn/synth.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "dualrnn/common.hpp"
#include "dualrnn/rng.hpp"

namespace dualrnn {

namespace {

std::string pattern_lines(int lines) {
  std::ostringstream os;
  for (int l = 0; l < lines; ++l) {
    for (int w = 0; w < 7; ++w) os << (w ? " " : "") << "w" << w;
    os << "\n";
  }
  return os.str();
}

// 16 symbols per line; the walker survives line breaks so the chain structure
// spans the whole split.
std::string chain_lines(int lines, int stride, double noise, int& cur, RngStream& rng) {
  std::ostringstream os;
  for (int l = 0; l < lines; ++l) {
    for (int w = 0; w < 16; ++w) {
      os << (w ? " " : "") << "v" << cur;
      if (rng.next_unit() < noise)
        cur = static_cast<int>(rng.next_below(16));
      else
        cur = (cur + stride) % 16;
    }
    os << "\n";
  }
  return os.str();
}

}  // namespace

SynthCorpus make_pattern_corpus() {
  SynthCorpus c;
  c.train = pattern_lines(64);  // 64 * (7 + <eos>) = 512 tokens
  c.valid = pattern_lines(16);
  c.test = pattern_lines(16);
  return c;
}

SynthCorpus make_two_regime_corpus(uint64_t seed) {
  RngStream rng(seed);
  const double noise = 0.1;
  int cur = 0;
  SynthCorpus c;
  c.train = chain_lines(120, 1, noise, cur, rng);
  c.valid = chain_lines(30, 1, noise, cur, rng);
  // distribution shift mid-stream: regime one, then a different stride
  c.test = chain_lines(15, 1, noise, cur, rng) + chain_lines(45, 5, noise, cur, rng);
  return c;
}

void write_corpus_dir(const SynthCorpus& corpus, const std::string& dir) {
  std::filesystem::create_directories(dir);
  const std::pair<const char*, const std::string*> files[] = {
      {"train.txt", &corpus.train}, {"valid.txt", &corpus.valid}, {"test.txt", &corpus.test}};
  for (auto& [name, text] : files) {
    std::ofstream out(dir + "/" + name, std::ios::binary | std::ios::trunc);
    if (!out) throw io_error("cannot write '" + dir + "/" + name + "'");
    out << *text;
  }
}

}  // namespace dualrnn
