#pragma once

// Structured text (JSON) documents: model descriptions and Lyapunov
// certificates. The model schema is documented in README.md; unknown keys
// are rejected at every level.

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "json.hpp"

#include "rsctmdp/lyapunov.hpp"
#include "rsctmdp/model.hpp"

namespace rsctmdp {

struct LoadOptions {
    /// Overrides `actions.points` of an mm_infinity document.
    std::optional<std::size_t> action_points;
};

struct ModelDocument {
    enum class Kind { mm_infinity, tabular };

    Kind kind = Kind::tabular;
    Model model;
    /// Present for mm_infinity documents.
    std::optional<MMInfinityParams> params;
};

ModelDocument load_tabular(const nlohmann::json& document, const LoadOptions& options = {});
ModelDocument load_model_document(std::string_view text, const LoadOptions& options = {});
/// Throws IoError when the file cannot be read.
ModelDocument load_model_file(const std::filesystem::path& path, const LoadOptions& options = {});

nlohmann::json certificate_to_json(const LyapunovCertificate& cert);
/// Reads weights and constants; stored verdicts are informational and are
/// not restored, so the certificate must be checked again before use.
LyapunovCertificate certificate_from_json(const nlohmann::json& doc);
LyapunovCertificate load_certificate_file(const std::filesystem::path& path);

}  // namespace rsctmdp
