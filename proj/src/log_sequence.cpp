#include "generallog/log_sequence.hpp"

#include "generallog/errors.hpp"

namespace generallog {

std::string render_sequence(const LogSequence& seq, const TemplateCatalog& catalog) {
    std::string out;
    for (std::size_t i = 0; i < seq.template_ids.size(); ++i) {
        const auto it = catalog.find(seq.template_ids[i]);
        if (it == catalog.end()) {
            throw Error(ErrorCode::UnknownTemplate, "template id " + std::to_string(seq.template_ids[i]));
        }
        if (i > 0) out += " | ";
        out += it->second.text();
    }
    return out;
}

}  // namespace generallog
