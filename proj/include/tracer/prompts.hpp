#pragma once

#include <map>
#include <string>
#include <string_view>

namespace tracer {

enum class TemplateId {
    PerceptionInference,
    Initialization,
    InitializationStrict,  // retry variant with a stricter format reminder
    Propagation,
    PropagationSelfCorrection,  // experimental self-correcting variant
    WeightUpdate,
    Rejuvenation,
    Summarization,
    ActionLabeling,
    QaDirect,
    QaCot,
};

using Bindings = std::map<std::string, std::string>;

const std::string& template_body(TemplateId id);
std::string template_name(TemplateId id);
TemplateId template_from_name(std::string_view name);

/// Substitutes every {placeholder} in the template body. Substituted text is
/// inserted verbatim and never rescanned. Throws MissingBindingError naming
/// the first placeholder without a binding.
std::string render_prompt(TemplateId id, const Bindings& bindings);

}  // namespace tracer
