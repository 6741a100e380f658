#ifndef DUALRNN_DATA_HPP
#define DUALRNN_DATA_HPP

#include <string>
#include <unordered_map>
#include <vector>

#include "dualrnn/model.hpp"

namespace dualrnn {

inline constexpr const char* kEosToken = "<eos>";
inline constexpr const char* kUnkToken = "<unk>";

// Bijective token <-> dense id map, built from training text only.
class Vocab {
 public:
  int add(const std::string& token);      // returns existing id on repeat
  int id_of(const std::string& token) const;  // OOV resolves to <unk>, else error
  bool contains(const std::string& token) const;
  const std::string& token_of(int id) const;
  int size() const { return static_cast<int>(id_to_token_.size()); }
  int unk_id() const { return unk_id_; }

 private:
  std::vector<std::string> id_to_token_;
  std::unordered_map<std::string, int> token_to_id_;
  int unk_id_ = -1;
};

// Whitespace tokenization with one end-of-sequence token appended per line.
// The text is used as-is; no case folding or substitution happens here.
std::vector<std::string> load_tokens(const std::string& path);
std::vector<std::string> tokenize_lines(const std::string& text);

struct Corpus {
  std::vector<std::string> train, valid, test;
};
Corpus load_corpus(const std::string& train_path, const std::string& valid_path,
                   const std::string& test_path);

Vocab build_vocab(const std::vector<std::string>& train_tokens);
std::vector<int32_t> encode(const Vocab& vocab, const std::vector<std::string>& tokens);

// The corpus id sequence split into `batch` contiguous chunks, consumed
// left-to-right in shift-by-one windows so hidden state can be carried
// between them. Tokens that do not fill the matrix are dropped.
class BatchStream {
 public:
  BatchStream(std::vector<int32_t> ids, int64_t batch);

  int64_t batch() const { return batch_; }
  int64_t chunk_length() const { return chunk_; }
  // targets available per epoch: batch * (chunk_length - 1)
  int64_t target_count() const { return batch_ * (chunk_ > 0 ? chunk_ - 1 : 0); }

  void reset() { cursor_ = 0; }
  // Emits the next (x, y) pair of up to `steps` columns; the final window may
  // be shorter. Returns false when the epoch is exhausted.
  bool next(int64_t steps, TokenMatrix& x, TokenMatrix& y);

 private:
  std::vector<int32_t> ids_;
  int64_t batch_ = 0;
  int64_t chunk_ = 0;
  int64_t cursor_ = 0;
};

}  // namespace dualrnn

#endif  // DUALRNN_DATA_HPP
