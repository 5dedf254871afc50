#include "promptevc/rng.hpp"

#include <sstream>

namespace promptevc {

std::string RngStream::save_state() const {
  std::ostringstream os;
  os << eng_;
  return os.str();
}

void RngStream::restore_state(const std::string& s) {
  std::istringstream is(s);
  is >> eng_;
  if (is.fail()) fail("RngStream: malformed serialized state");
}

}  // namespace promptevc
