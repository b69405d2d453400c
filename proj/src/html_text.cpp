#include "shoplab/html_text.hpp"

#include <algorithm>
#include <cctype>
#include <set>

namespace shoplab {

namespace {

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

const std::set<std::string>& skip_tags() {
    static const std::set<std::string> tags = {"script", "style", "head", "noscript", "template"};
    return tags;
}

const std::set<std::string>& block_tags() {
    static const std::set<std::string> tags = {"p",  "div", "br", "li", "tr", "table", "ul",
                                               "ol", "h1",  "h2", "h3", "h4", "h5",    "h6",
                                               "section", "article", "header", "footer", "pre"};
    return tags;
}

std::string decode_entities(const std::string& in) {
    std::string out;
    out.reserve(in.size());
    size_t i = 0;
    while (i < in.size()) {
        if (in[i] != '&') {
            out.push_back(in[i++]);
            continue;
        }
        size_t semi = in.find(';', i);
        if (semi == std::string::npos || semi - i > 8) {
            out.push_back(in[i++]);
            continue;
        }
        std::string ent = in.substr(i + 1, semi - i - 1);
        if (ent == "amp") out.push_back('&');
        else if (ent == "lt") out.push_back('<');
        else if (ent == "gt") out.push_back('>');
        else if (ent == "quot") out.push_back('"');
        else if (ent == "apos" || ent == "#39") out.push_back('\'');
        else if (ent == "nbsp") out.push_back(' ');
        else if (!ent.empty() && ent[0] == '#') {
            int code = std::atoi(ent.c_str() + 1);
            if (code > 0 && code < 128) out.push_back(static_cast<char>(code));
            else out.push_back(' ');
        } else {
            out.push_back(in[i]);
            ++i;
            continue;
        }
        i = semi + 1;
    }
    return out;
}

}  // namespace

std::string html_to_text(std::string_view html) {
    std::string raw;
    raw.reserve(html.size());
    size_t i = 0;
    while (i < html.size()) {
        if (html[i] != '<') {
            raw.push_back(html[i++]);
            continue;
        }
        // comment
        if (html.substr(i, 4) == "<!--") {
            size_t end = html.find("-->", i + 4);
            i = end == std::string_view::npos ? html.size() : end + 3;
            continue;
        }
        size_t close = html.find('>', i);
        if (close == std::string_view::npos) break;
        std::string tag_body(html.substr(i + 1, close - i - 1));
        bool closing = !tag_body.empty() && tag_body[0] == '/';
        std::string name;
        for (size_t k = closing ? 1 : 0; k < tag_body.size(); ++k) {
            unsigned char c = static_cast<unsigned char>(tag_body[k]);
            if (std::isalnum(c)) name.push_back(static_cast<char>(std::tolower(c)));
            else break;
        }
        if (!closing && skip_tags().count(name)) {
            std::string end_tag = "</" + name;
            size_t pos = close + 1;
            size_t found = std::string_view::npos;
            while (pos < html.size()) {
                size_t cand = html.find('<', pos);
                if (cand == std::string_view::npos) break;
                if (lower(std::string(html.substr(cand, end_tag.size()))) == end_tag) {
                    found = cand;
                    break;
                }
                pos = cand + 1;
            }
            if (found == std::string_view::npos) {
                i = html.size();
            } else {
                size_t end_close = html.find('>', found);
                i = end_close == std::string_view::npos ? html.size() : end_close + 1;
            }
            continue;
        }
        raw.push_back(block_tags().count(name) ? '\n' : ' ');
        i = close + 1;
    }

    raw = decode_entities(raw);

    // collapse whitespace: runs of spaces/tabs -> one space, runs with a
    // newline -> one newline, trim edges
    std::string out;
    out.reserve(raw.size());
    bool pending_space = false;
    bool pending_newline = false;
    for (char c : raw) {
        if (c == '\n' || c == '\r') {
            pending_newline = true;
        } else if (std::isspace(static_cast<unsigned char>(c))) {
            pending_space = true;
        } else {
            if (!out.empty()) {
                if (pending_newline) out.push_back('\n');
                else if (pending_space) out.push_back(' ');
            }
            pending_space = pending_newline = false;
            out.push_back(c);
        }
    }
    return out;
}

}  // namespace shoplab
