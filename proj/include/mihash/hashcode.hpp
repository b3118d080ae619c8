#ifndef MIHASH_HASHCODE_HPP
#define MIHASH_HASHCODE_HPP

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace mihash {

// K-bit binary code over {-1,+1}, stored bit-packed (bit set means +1).
// Bits past K in the last word are always zero so XOR-based distances need
// no masking.
class HashCode {
 public:
  HashCode() = default;
  explicit HashCode(std::size_t bits) : bits_(bits), words_((bits + 63) / 64, 0) {}

  // Entrywise sign of a real vector, with sgn(0) = +1.
  static HashCode from_signs(std::span<const double> h);

  std::size_t bits() const { return bits_; }
  std::size_t words() const { return words_.size(); }
  std::uint64_t word(std::size_t w) const { return words_[w]; }

  int sign(std::size_t k) const {
    return (words_[k / 64] >> (k % 64)) & 1 ? +1 : -1;
  }
  void set_sign(std::size_t k, int s) {
    if (s >= 0) {
      words_[k / 64] |= std::uint64_t{1} << (k % 64);
    } else {
      words_[k / 64] &= ~(std::uint64_t{1} << (k % 64));
    }
  }

  std::vector<double> to_signs() const;

  bool operator==(const HashCode& other) const = default;

 private:
  std::size_t bits_ = 0;
  std::vector<std::uint64_t> words_;
};

// Positions where the signs differ; XOR + popcount on the packed words.
// Throws std::invalid_argument on length mismatch.
std::size_t hamming(const HashCode& a, const HashCode& b);

}  // namespace mihash

#endif  // MIHASH_HASHCODE_HPP
