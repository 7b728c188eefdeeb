#pragma once

#include <cstdio>
#include <string>

namespace tvvi {

// 17 significant digits: enough for exact double round-trips in decimal.
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return std::string(buf);
}

}  // namespace tvvi
