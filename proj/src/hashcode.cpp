#include "mihash/hashcode.hpp"

#include <bit>
#include <stdexcept>

#include "mihash/matrix.hpp"

namespace mihash {

HashCode HashCode::from_signs(std::span<const double> h) {
  HashCode code(h.size());
  for (std::size_t k = 0; k < h.size(); ++k) {
    code.set_sign(k, sgn(h[k]) > 0 ? +1 : -1);
  }
  return code;
}

std::vector<double> HashCode::to_signs() const {
  std::vector<double> out(bits_);
  for (std::size_t k = 0; k < bits_; ++k) {
    out[k] = sign(k);
  }
  return out;
}

std::size_t hamming(const HashCode& a, const HashCode& b) {
  if (a.bits() != b.bits()) {
    throw std::invalid_argument("hamming: code length mismatch (" +
                                std::to_string(a.bits()) + " vs " +
                                std::to_string(b.bits()) + ")");
  }
  std::size_t dist = 0;
  for (std::size_t w = 0; w < a.words(); ++w) {
    dist += static_cast<std::size_t>(std::popcount(a.word(w) ^ b.word(w)));
  }
  return dist;
}

}  // namespace mihash
