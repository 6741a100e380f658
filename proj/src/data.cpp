#include "dualrnn/data.hpp"

#include <fstream>
#include <sstream>

namespace dualrnn {

int Vocab::add(const std::string& token) {
  auto it = token_to_id_.find(token);
  if (it != token_to_id_.end()) return it->second;
  const int id = static_cast<int>(id_to_token_.size());
  id_to_token_.push_back(token);
  token_to_id_.emplace(token, id);
  if (token == kUnkToken) unk_id_ = id;
  return id;
}

int Vocab::id_of(const std::string& token) const {
  auto it = token_to_id_.find(token);
  if (it != token_to_id_.end()) return it->second;
  if (unk_id_ < 0)
    throw error("data", "out-of-vocabulary token '" + token + "' and the vocabulary has no '" +
                            kUnkToken + "' entry");
  return unk_id_;
}

bool Vocab::contains(const std::string& token) const { return token_to_id_.count(token) > 0; }

const std::string& Vocab::token_of(int id) const {
  if (id < 0 || id >= size())
    throw error("data", "token id " + std::to_string(id) + " outside vocabulary of size " +
                            std::to_string(size()));
  return id_to_token_[static_cast<size_t>(id)];
}

std::vector<std::string> tokenize_lines(const std::string& text) {
  std::vector<std::string> tokens;
  std::istringstream lines(text);
  std::string line;
  while (std::getline(lines, line)) {
    std::istringstream words(line);
    std::string w;
    while (words >> w) tokens.push_back(w);
    tokens.push_back(kEosToken);
  }
  return tokens;
}

std::vector<std::string> load_tokens(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open corpus file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  std::vector<std::string> tokens = tokenize_lines(buf.str());
  if (tokens.empty()) throw io_error("corpus file '" + path + "' is empty");
  return tokens;
}

Corpus load_corpus(const std::string& train_path, const std::string& valid_path,
                   const std::string& test_path) {
  return Corpus{load_tokens(train_path), load_tokens(valid_path), load_tokens(test_path)};
}

Vocab build_vocab(const std::vector<std::string>& train_tokens) {
  if (train_tokens.empty()) throw error("data", "cannot build a vocabulary from an empty corpus");
  Vocab v;
  for (const std::string& t : train_tokens) v.add(t);
  return v;
}

std::vector<int32_t> encode(const Vocab& vocab, const std::vector<std::string>& tokens) {
  std::vector<int32_t> ids;
  ids.reserve(tokens.size());
  for (const std::string& t : tokens) ids.push_back(static_cast<int32_t>(vocab.id_of(t)));
  return ids;
}

BatchStream::BatchStream(std::vector<int32_t> ids, int64_t batch)
    : ids_(std::move(ids)), batch_(batch) {
  if (batch_ < 1) throw error("data", "batch size must be positive");
  chunk_ = static_cast<int64_t>(ids_.size()) / batch_;
  if (chunk_ < 2)
    throw error("data", "corpus of " + std::to_string(ids_.size()) +
                            " tokens is too short for batch size " + std::to_string(batch_));
  ids_.resize(static_cast<size_t>(chunk_ * batch_));  // drop the tail
}

bool BatchStream::next(int64_t steps, TokenMatrix& x, TokenMatrix& y) {
  if (steps < 1) throw error("data", "window length must be positive");
  if (cursor_ >= chunk_ - 1) return false;
  const int64_t t = std::min(steps, chunk_ - 1 - cursor_);
  x = TokenMatrix(batch_, t);
  y = TokenMatrix(batch_, t);
  for (int64_t b = 0; b < batch_; ++b) {
    const int32_t* chunk_base = ids_.data() + b * chunk_;
    for (int64_t j = 0; j < t; ++j) {
      x.at(b, j) = chunk_base[cursor_ + j];
      y.at(b, j) = chunk_base[cursor_ + j + 1];
    }
  }
  cursor_ += t;
  return true;
}

}  // namespace dualrnn
