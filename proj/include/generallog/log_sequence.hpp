#pragma once

#include "generallog/log_parsing.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace generallog {

/// One session or window: an ordered list of template ids.
struct LogSequence {
    std::string id;
    std::vector<std::uint32_t> template_ids;
    std::string system;
    std::optional<int> truth_label;
};

/// Template id -> template, across every system in a run.
using TemplateCatalog = std::unordered_map<std::uint32_t, parsing::LogTemplate>;

/// Template texts in sequence order, joined by " | ".
std::string render_sequence(const LogSequence& seq, const TemplateCatalog& catalog);

}  // namespace generallog
