#ifndef DUALRNN_COMMON_HPP
#define DUALRNN_COMMON_HPP

#include <array>
#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>

namespace dualrnn {

// Error categories surface as "category: message" so the CLI can emit a
// single machine-parsable line.
class error : public std::runtime_error {
 public:
  error(const std::string& category, const std::string& message)
      : std::runtime_error(category + ": " + message), category_(category) {}
  const std::string& category() const { return category_; }

 private:
  std::string category_;
};

struct shape_error : error {
  explicit shape_error(const std::string& m) : error("shape", m) {}
};
struct config_error : error {
  explicit config_error(const std::string& m) : error("config", m) {}
};
struct io_error : error {
  explicit io_error(const std::string& m) : error("io", m) {}
};
struct numeric_error : error {
  explicit numeric_error(const std::string& m) : error("numeric", m) {}
};

// Dense extents, rank 1..3.
struct Shape {
  int rank = 0;
  std::array<int64_t, 3> d{{0, 0, 0}};

  Shape() = default;
  Shape(int64_t n) : rank(1), d{{n, 0, 0}} {}
  Shape(int64_t r, int64_t c) : rank(2), d{{r, c, 0}} {}
  Shape(int64_t a, int64_t b, int64_t c) : rank(3), d{{a, b, c}} {}

  int64_t size() const {
    int64_t n = 1;
    for (int i = 0; i < rank; ++i) n *= d[i];
    return rank == 0 ? 0 : n;
  }
  int64_t rows() const { return d[0]; }
  int64_t cols() const { return rank >= 2 ? d[1] : 1; }

  bool operator==(const Shape& o) const { return rank == o.rank && d == o.d; }
  bool operator!=(const Shape& o) const { return !(*this == o); }

  std::string str() const {
    std::ostringstream os;
    os << '[';
    for (int i = 0; i < rank; ++i) os << (i ? "x" : "") << d[i];
    os << ']';
    return os.str();
  }
};

}  // namespace dualrnn

#endif  // DUALRNN_COMMON_HPP
