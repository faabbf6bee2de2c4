#ifndef MDRAFT_VERSION_HPP
#define MDRAFT_VERSION_HPP

namespace mdraft {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace mdraft

#endif  // MDRAFT_VERSION_HPP
