#pragma once

// Shared tokenizer and token cursor for the .fld, .ld, patch, and scenario
// grammars. Internal to the library.

#include <string>
#include <string_view>
#include <vector>

#include "megart/diagnostic.hpp"

namespace megart::detail {

enum class Tok {
  ident,
  string,
  number,
  lbrace,
  rbrace,
  lparen,
  rparen,
  lbracket,
  rbracket,
  comma,
  dot,
  colon,
  semicolon,
  arrow,       // ->
  back_arrow,  // <-
  open_stereo,   // <<
  close_stereo,  // >>
  end,
};

std::string_view describe(Tok t);

struct Token {
  Tok kind = Tok::end;
  std::string text;  // identifier/number spelling, unescaped string contents
  SourceSpan span;
};

/// Thrown inside parsers; converted to a Diagnostic at the API boundary.
struct ParseFailure {
  Diagnostic diag;
};

[[noreturn]] void fail(const SourceSpan& at, std::string code, std::string message);

/// Tokenizes `text`. Throws ParseFailure on a lexical error.
std::vector<Token> tokenize(std::string_view text, const std::string& file);

class Cursor {
 public:
  explicit Cursor(std::vector<Token> tokens) : toks_(std::move(tokens)) {}

  const Token& peek(std::size_t ahead = 0) const;
  bool at(Tok k) const { return peek().kind == k; }
  bool at_word(std::string_view w) const { return at(Tok::ident) && peek().text == w; }
  bool at_end() const { return at(Tok::end); }

  const Token& next();
  const Token& expect(Tok k, std::string_view what);
  const Token& expect_word(std::string_view w);
  bool accept(Tok k);
  bool accept_word(std::string_view w);
  std::string ident(std::string_view what) { return expect(Tok::ident, what).text; }
  std::string string(std::string_view what) { return expect(Tok::string, what).text; }

  /// Span from `from` to the previously consumed token.
  SourceSpan span_from(const SourceSpan& from) const;

 private:
  std::vector<Token> toks_;
  std::size_t pos_ = 0;
};

}  // namespace megart::detail
