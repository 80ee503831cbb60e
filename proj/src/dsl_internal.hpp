#pragma once

#include "lexer.hpp"
#include "megart/metamodel.hpp"

namespace megart::detail {

/// Parses `megamodel STRING { ... }` at the cursor. Throws ParseFailure on
/// syntax errors; the result is not yet checked.
Megamodel parse_megamodel_block(Cursor& cur, const std::string& file);

/// Parses `STRING 'as' IDENT | IDENT`, returning (identifier, display name).
std::pair<std::string, std::string> parse_named(Cursor& cur, std::string_view what);

Endpoint parse_endpoint(Cursor& cur);

}  // namespace megart::detail
