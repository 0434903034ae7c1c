#pragma once

#include "labrbf/data.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>

namespace labkrr {

inline constexpr int kExitOk = 0;
inline constexpr int kExitCheckFailed = 1;
inline constexpr int kExitUsage = 2;

/// Bad flags, config keys or synthetic dataset specs.
class UsageError : public labrbf::Error {
public:
    using Error::Error;
};

/// "sin2x3[:n=200,lo=-2,hi=2,noise=0.4]" or "cherkassky:id=2[,n=200,noise=0.1,lo=-1,hi=1]".
struct SynthSpec {
    enum class Kind { Sin2x3, Cherkassky } kind = Kind::Sin2x3;
    int id = 0;
    labrbf::Index n = 200;
    double noise = 0.0;
    std::optional<std::pair<double, double>> domain;
};

[[nodiscard]] SynthSpec parse_synth_spec(const std::string& text);
[[nodiscard]] labrbf::data::RawDataset generate(const SynthSpec& spec, std::uint64_t seed);

/// Runs the command line in-process. Returns the exit status.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace labkrr
