#pragma once

#include "generallog/neural/model.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>

namespace generallog::neural {

/// Text checkpoint:
///   GENERALLOG-CKPT v1
///   <name> <ndims> <dim1> ... <dimk>
///   <row-major values, 17 significant digits>
///   ...
///   seed <n>
/// The decision threshold travels as the one-element tensor "meta.decision_threshold".
struct Checkpoint {
    ModelParams params;
    std::uint64_t seed = 0;
    double decision_threshold = 0.5;
};

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt);
/// Throws Error(Io) on any format violation or missing tensor.
Checkpoint read_checkpoint(std::istream& in);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace generallog::neural
