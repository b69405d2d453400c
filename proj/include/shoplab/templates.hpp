#pragma once
// Prompt templates, one file per id in a templates directory. Placeholders
// use {name} syntax; only the known placeholder names are substituted, any
// other brace content (JSON examples etc.) passes through verbatim.

#include <map>
#include <string>
#include <vector>

namespace shoplab {

enum class TemplateId {
    ResearcherSystem,
    SupervisorSystem,
    PlanEval,
    ToolcallEval,
    FinalAnswerGate,
    FinalReportEval,
    UserAgentPersona,
    UserAgentRubric,
    Extractor,
    Internalizer,
};

inline constexpr int kTemplateCount = 10;

// File stem, e.g. "researcher_system" -> <dir>/researcher_system.txt
std::string to_string(TemplateId id);

using Bindings = std::map<std::string, std::string>;

const std::vector<std::string>& known_placeholders();

// Substitutes every {name} occurrence for known names; throws
// UnboundPlaceholderError when a known placeholder has no binding.
std::string render_template(const std::string& text, const Bindings& bindings);

class TemplateSet {
public:
    static TemplateSet load(const std::string& dir);

    const std::string& text(TemplateId id) const { return texts_[static_cast<int>(id)]; }
    std::string render(TemplateId id, const Bindings& bindings) const {
        return render_template(text(id), bindings);
    }

private:
    std::array<std::string, kTemplateCount> texts_;
};

}  // namespace shoplab
