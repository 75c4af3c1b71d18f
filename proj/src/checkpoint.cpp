#include "generallog/neural/checkpoint.hpp"

#include "generallog/errors.hpp"
#include "generallog/text.hpp"

#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

namespace generallog::neural {

namespace {

constexpr std::string_view kHeader = "GENERALLOG-CKPT v1";
constexpr std::string_view kThresholdName = "meta.decision_threshold";

void write_tensor(std::ostream& out, std::string_view name, const Tensor& t) {
    out << name << ' ' << t.shape().size();
    for (const auto dim : t.shape()) out << ' ' << dim;
    out << '\n';
    for (std::size_t i = 0; i < t.size(); ++i) out << (i ? " " : "") << text::exact(t[i]);
    out << '\n';
}

[[noreturn]] void malformed(const std::string& why) { throw Error(ErrorCode::Io, "malformed checkpoint: " + why); }

}  // namespace

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt) {
    out << kHeader << '\n';
    ckpt.params.for_each([&out](std::string_view name, const Tensor& t) { write_tensor(out, name, t); });
    write_tensor(out, kThresholdName, Tensor({1}, {ckpt.decision_threshold}));
    out << "seed " << ckpt.seed << '\n';
}

Checkpoint read_checkpoint(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || text::trim(line) != kHeader) malformed("missing header line");

    std::map<std::string, Tensor, std::less<>> tensors;
    std::optional<std::uint64_t> seed;
    while (std::getline(in, line)) {
        const auto fields = text::split_whitespace(line);
        if (fields.empty()) continue;
        if (fields[0] == "seed") {
            if (fields.size() != 2) malformed("bad seed line");
            seed = static_cast<std::uint64_t>(std::stoull(fields[1]));
            continue;
        }
        if (fields.size() < 2) malformed("bad tensor header '" + line + "'");
        const auto ndims = static_cast<std::size_t>(text::parse_int(fields[1]));
        if (fields.size() != 2 + ndims) malformed("tensor '" + fields[0] + "' dimension count");
        std::vector<std::size_t> shape;
        for (std::size_t k = 0; k < ndims; ++k) shape.push_back(static_cast<std::size_t>(text::parse_int(fields[2 + k])));
        std::string values_line;
        if (!std::getline(in, values_line)) malformed("tensor '" + fields[0] + "' has no values");
        std::vector<double> values;
        for (const auto& v : text::split_whitespace(values_line)) values.push_back(text::parse_double(v));
        try {
            tensors.emplace(fields[0], Tensor(std::move(shape), std::move(values)));
        } catch (const Error& e) {
            malformed("tensor '" + fields[0] + "': " + e.what());
        }
    }
    if (!seed) malformed("missing seed line");

    const auto first = tensors.find("gru.update_input");
    if (first == tensors.end() || first->second.shape().size() != 2) malformed("missing gru.update_input");
    Checkpoint ckpt;
    ckpt.seed = *seed;
    ckpt.params = ModelParams::zeros(first->second.cols(), first->second.rows());
    ckpt.params.for_each([&](std::string_view name, Tensor& t) {
        const auto it = tensors.find(name);
        if (it == tensors.end()) malformed("missing tensor " + std::string(name));
        if (!it->second.same_shape(t)) malformed("shape mismatch for " + std::string(name));
        t = it->second;
    });
    if (const auto it = tensors.find(kThresholdName); it != tensors.end() && it->second.size() == 1) {
        ckpt.decision_threshold = it->second[0];
    }
    return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
    std::ostringstream out;
    write_checkpoint(out, ckpt);
    text::write_file(path, out.str());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::Io, "cannot open checkpoint " + path.string());
    return read_checkpoint(in);
}

}  // namespace generallog::neural
