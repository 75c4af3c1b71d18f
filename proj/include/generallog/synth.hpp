#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace generallog::synth {

struct SynthSpec {
    std::size_t source_count = 2000;
    std::size_t target_count = 2000;
    double anomaly_rate = 0.1;
    /// Share of target sessions that contain system-specific templates.
    double proprietary_fraction = 0.3;
    /// Probability that a target General session words an event differently
    /// from the source system.
    double variant_rate = 0.3;
    /// When false the proprietary pool is empty and every target session is
    /// built from shared templates.
    bool proprietary_pool = true;

    void validate() const;
};

enum class SessionKind { General, Proprietary };

struct SessionTruth {
    std::string id;
    int label = 0;
    SessionKind kind = SessionKind::General;
};

struct SystemLogs {
    std::vector<std::string> lines;
    std::vector<SessionTruth> sessions;  // in emission order
};

struct SynthCorpus {
    SystemLogs source;
    SystemLogs target;
};

/// Deterministic per seed. Anomaly counts are round(rate * count) per system,
/// with target anomalies split between General and Proprietary sessions in
/// proportion to their sizes. Throws Error(InconsistentSpec).
SynthCorpus synth_generate(std::uint64_t seed, const SynthSpec& spec);

/// Line layout: `<timestamp> <session> <LEVEL> <message>`.
inline constexpr const char* kHeaderRegex = R"(^(\S+) (\S+) (\S+) (.*)$)";
inline constexpr const char* kHeaderFields = "timestamp,session,level,content";
inline constexpr const char* kSessionRegex = R"(^\S+ (\S+) )";

/// Writes source.log, source_labels.csv, target.log, target_labels.csv,
/// target_kinds.csv and a ready-to-run generallog.conf into `dir`.
void write_corpus(const std::filesystem::path& dir, const SynthCorpus& corpus, std::uint64_t seed);

}  // namespace generallog::synth
