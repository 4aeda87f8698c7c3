#pragma once

#include <cstdint>
#include <cstdio>
#include <string>

namespace mrfno {

/// splitmix64 step; used to derive independent seed streams from a base seed.
inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Combine a base seed with stream/index tags into a fresh seed.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream, std::uint64_t index = 0) {
    return mix64(mix64(base ^ mix64(stream)) ^ mix64(index));
}

/// Round-trippable text form of a double ("%.17g"), stable across runs.
inline std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

} // namespace mrfno
