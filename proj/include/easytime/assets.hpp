#pragma once

#include <string>

namespace easytime::assets {

/// Text assets compiled into the library.
const std::string &schema_sql();
const std::string &prompt_template();
const std::string &qa_grammar();

} // namespace easytime::assets
