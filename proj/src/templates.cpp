#include "shoplab/templates.hpp"

#include <array>
#include <fstream>
#include <sstream>

#include "shoplab/errors.hpp"

namespace shoplab {

namespace {

const std::array<const char*, kTemplateCount> kStems = {
    "researcher_system", "supervisor_system", "plan_eval",         "toolcall_eval",
    "final_answer_gate", "final_report_eval", "user_agent_persona", "user_agent_rubric",
    "extractor",         "internalizer"};

}  // namespace

std::string to_string(TemplateId id) { return kStems[static_cast<int>(id)]; }

const std::vector<std::string>& known_placeholders() {
    static const std::vector<std::string> names = {
        "question",          "history_str",    "latte_response", "evaluation_criteria",
        "checklist_summary", "status_summary", "webpage_content", "goal"};
    return names;
}

std::string render_template(const std::string& text, const Bindings& bindings) {
    std::string out;
    out.reserve(text.size());
    size_t i = 0;
    while (i < text.size()) {
        if (text[i] != '{') {
            out.push_back(text[i++]);
            continue;
        }
        bool replaced = false;
        for (const auto& name : known_placeholders()) {
            if (text.compare(i + 1, name.size(), name) == 0 &&
                i + 1 + name.size() < text.size() && text[i + 1 + name.size()] == '}') {
                auto it = bindings.find(name);
                if (it == bindings.end()) throw UnboundPlaceholderError(name);
                out += it->second;
                i += name.size() + 2;
                replaced = true;
                break;
            }
        }
        if (!replaced) out.push_back(text[i++]);
    }
    return out;
}

TemplateSet TemplateSet::load(const std::string& dir) {
    TemplateSet set;
    for (int i = 0; i < kTemplateCount; ++i) {
        const std::string path = dir + "/" + kStems[i] + ".txt";
        std::ifstream in(path, std::ios::binary);
        if (!in) throw IoError("missing template file: " + path);
        std::ostringstream buf;
        buf << in.rdbuf();
        set.texts_[i] = buf.str();
    }
    return set;
}

}  // namespace shoplab
