#pragma once

#include <string>
#include <string_view>

namespace shoplab {

// Reduces an HTML page to readable plain text: drops script/style/head
// blocks and comments, turns block-level tag boundaries into newlines,
// decodes common entities, and collapses whitespace runs.
std::string html_to_text(std::string_view html);

}  // namespace shoplab
