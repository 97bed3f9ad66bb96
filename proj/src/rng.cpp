#include "l2s/rng.hpp"

#include <bit>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace l2s {

double Rng::Normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u = 0.0, v = 0.0, s = 0.0;
  do {
    u = 2.0 * Uniform() - 1.0;
    v = 2.0 * Uniform() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  const double f = std::sqrt(-2.0 * std::log(s) / s);
  spare_ = v * f;
  has_spare_ = true;
  return u * f;
}

std::uint64_t Rng::Below(std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("Rng::Below: n must be positive");
  const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % n);
  std::uint64_t x = 0;
  do {
    x = engine_();
  } while (x >= limit);
  return x % n;
}

std::string Rng::SaveState() const {
  std::ostringstream os;
  os << engine_ << ' ' << (has_spare_ ? 1 : 0) << ' '
     << std::bit_cast<std::uint64_t>(spare_);
  return os.str();
}

void Rng::LoadState(const std::string& state) {
  std::istringstream is(state);
  int spare_flag = 0;
  std::uint64_t spare_bits = 0;
  is >> engine_ >> spare_flag >> spare_bits;
  if (is.fail()) throw std::runtime_error("Rng::LoadState: malformed state string");
  has_spare_ = spare_flag != 0;
  spare_ = std::bit_cast<double>(spare_bits);
}

bool Rng::operator==(const Rng& other) const {
  return engine_ == other.engine_ && has_spare_ == other.has_spare_ &&
         std::bit_cast<std::uint64_t>(spare_) == std::bit_cast<std::uint64_t>(other.spare_);
}

}  // namespace l2s
