#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "zk3col/error.hpp"
#include "zk3col/graph.hpp"

namespace zk3col {

inline constexpr std::size_t factorial(std::size_t k) { return k <= 1 ? 1 : k * factorial(k - 1); }

// Permutation of {1..k}, k in {2,3,4}, in one-line notation, with its
// lexicographic rank in S_k.
class Permutation {
 public:
  static constexpr std::size_t kMaxK = 4;

  Permutation() : Permutation(identity(3)) {}

  static Permutation identity(std::size_t k) {
    std::vector<int> image(k);
    std::iota(image.begin(), image.end(), 1);
    return Permutation(image);
  }

  explicit Permutation(const std::vector<int>& image) : k_(image.size()) {
    if (k_ < 2 || k_ > kMaxK) throw Error(ErrorCode::invalid_argument, "permutation size must be 2, 3 or 4");
    std::array<bool, kMaxK + 1> seen{};
    for (std::size_t i = 0; i < k_; ++i) {
      const int x = image[i];
      if (x < 1 || x > static_cast<int>(k_) || seen[x])
        throw Error(ErrorCode::invalid_argument, "permutation image is not a bijection on {1..k}");
      seen[x] = true;
      image_[i] = x;
    }
  }

  static Permutation from_rank(std::size_t k, std::size_t rank) {
    if (k < 2 || k > kMaxK) throw Error(ErrorCode::invalid_argument, "permutation size must be 2, 3 or 4");
    if (rank >= factorial(k))
      throw Error(ErrorCode::invalid_argument,
                  "rank " + std::to_string(rank) + " out of range for S_" + std::to_string(k));
    std::vector<int> pool(k);
    std::iota(pool.begin(), pool.end(), 1);
    std::vector<int> image;
    for (std::size_t i = k; i > 0; --i) {
      const std::size_t f = factorial(i - 1);
      image.push_back(pool[rank / f]);
      pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(rank / f));
      rank %= f;
    }
    return Permutation(image);
  }

  std::size_t k() const { return k_; }

  std::size_t rank() const {
    std::size_t r = 0;
    for (std::size_t i = 0; i < k_; ++i) {
      std::size_t smaller = 0;
      for (std::size_t j = i + 1; j < k_; ++j)
        if (image_[j] < image_[i]) ++smaller;
      r += smaller * factorial(k_ - 1 - i);
    }
    return r;
  }

  // phi(x) for x in 1..k
  int operator()(int x) const {
    if (x < 1 || x > static_cast<int>(k_)) throw Error(ErrorCode::invalid_argument, "permutation argument out of range");
    return image_[x - 1];
  }

  int inverse(int y) const {
    for (std::size_t i = 0; i < k_; ++i)
      if (image_[i] == y) return static_cast<int>(i) + 1;
    throw Error(ErrorCode::invalid_argument, "permutation value out of range");
  }

  std::vector<int> image() const { return {image_.begin(), image_.begin() + static_cast<std::ptrdiff_t>(k_)}; }

  std::string to_string() const {
    std::string s = "(";
    for (std::size_t i = 0; i < k_; ++i) {
      if (i) s += ',';
      s += std::to_string(image_[i]);
    }
    return s + ")";
  }

  friend bool operator==(const Permutation& a, const Permutation& b) {
    return a.k_ == b.k_ && std::equal(a.image_.begin(), a.image_.begin() + a.k_, b.image_.begin());
  }

 private:
  std::size_t k_ = 3;
  std::array<int, kMaxK> image_{};
};

inline Coloring apply_permutation(const Permutation& phi, const Coloring& c) {
  if (phi.k() != kNumColors) throw Error(ErrorCode::invalid_argument, "color permutation must act on {1,2,3}");
  std::vector<Color> out(c.size());
  for (std::size_t v = 0; v < c.size(); ++v) out[v] = phi(c[static_cast<Vertex>(v)]);
  return Coloring(std::move(out));
}

}  // namespace zk3col
