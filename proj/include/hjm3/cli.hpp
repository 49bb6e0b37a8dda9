#pragma once

#include <string>
#include <vector>

namespace hjm3 {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitGate = 2;

// Entry point of the hjm3 executable. args[0] is the program name.
int dispatch(const std::vector<std::string>& args);

}  // namespace hjm3
