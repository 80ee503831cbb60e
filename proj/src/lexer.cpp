#include "lexer.hpp"

#include <cctype>

namespace megart::detail {

std::string_view describe(Tok t) {
  switch (t) {
    case Tok::ident: return "identifier";
    case Tok::string: return "string";
    case Tok::number: return "number";
    case Tok::lbrace: return "'{'";
    case Tok::rbrace: return "'}'";
    case Tok::lparen: return "'('";
    case Tok::rparen: return "')'";
    case Tok::lbracket: return "'['";
    case Tok::rbracket: return "']'";
    case Tok::comma: return "','";
    case Tok::dot: return "'.'";
    case Tok::colon: return "':'";
    case Tok::semicolon: return "';'";
    case Tok::arrow: return "'->'";
    case Tok::back_arrow: return "'<-'";
    case Tok::open_stereo: return "'<<'";
    case Tok::close_stereo: return "'>>'";
    case Tok::end: return "end of input";
  }
  return "?";
}

void fail(const SourceSpan& at, std::string code, std::string message) {
  throw ParseFailure{Diagnostic{Severity::error, std::move(code), std::move(message), at, {}}};
}

namespace {

// Locale-independent character classes.
bool is_alpha(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_'; }
bool is_digit(char c) { return c >= '0' && c <= '9'; }

}  // namespace

std::vector<Token> tokenize(std::string_view text, const std::string& file) {
  std::vector<Token> out;
  int line = 1;
  int col = 1;
  std::size_t i = 0;

  auto advance = [&](std::size_t n = 1) {
    for (std::size_t k = 0; k < n && i < text.size(); ++k, ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
  };
  auto here = [&] { return SourceSpan{file, line, col, line, col}; };
  auto push = [&](Tok k, std::string s, SourceSpan sp) {
    sp.line_end = line;
    sp.col_end = col > 1 ? col - 1 : col;
    if (sp.line_end == sp.line_begin && sp.col_end < sp.col_begin) sp.col_end = sp.col_begin;
    out.push_back(Token{k, std::move(s), std::move(sp)});
  };

  while (i < text.size()) {
    char c = text[i];
    if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
      advance();
      continue;
    }
    if (c == '#') {
      while (i < text.size() && text[i] != '\n') advance();
      continue;
    }
    SourceSpan start = here();
    if (is_alpha(c)) {
      std::string s;
      while (i < text.size()) {
        char d = text[i];
        bool dash_ok = d == '-' && !(i + 1 < text.size() && text[i + 1] == '>');
        if (!(is_alpha(d) || is_digit(d) || dash_ok)) break;
        s.push_back(d);
        advance();
      }
      push(Tok::ident, std::move(s), start);
      continue;
    }
    if (is_digit(c) || (c == '-' && i + 1 < text.size() && is_digit(text[i + 1]))) {
      std::string s;
      s.push_back(c);
      advance();
      while (i < text.size() && (is_digit(text[i]) || text[i] == '.')) {
        s.push_back(text[i]);
        advance();
      }
      push(Tok::number, std::move(s), start);
      continue;
    }
    if (c == '"') {
      advance();
      std::string s;
      bool closed = false;
      while (i < text.size()) {
        char d = text[i];
        if (d == '"') {
          advance();
          closed = true;
          break;
        }
        if (d == '\n') break;
        if (d == '\\' && i + 1 < text.size()) {
          char e = text[i + 1];
          advance(2);
          switch (e) {
            case 'n': s.push_back('\n'); break;
            case 't': s.push_back('\t'); break;
            default: s.push_back(e); break;
          }
          continue;
        }
        s.push_back(d);
        advance();
      }
      if (!closed) {
        SourceSpan sp = start;
        sp.line_end = line;
        sp.col_end = col;
        fail(sp, "E-SYNTAX", "unterminated string");
      }
      push(Tok::string, std::move(s), start);
      continue;
    }
    auto two = [&](char a, char b) { return c == a && i + 1 < text.size() && text[i + 1] == b; };
    if (two('-', '>')) {
      advance(2);
      push(Tok::arrow, "->", start);
      continue;
    }
    if (two('<', '-')) {
      advance(2);
      push(Tok::back_arrow, "<-", start);
      continue;
    }
    if (two('<', '<')) {
      advance(2);
      push(Tok::open_stereo, "<<", start);
      continue;
    }
    if (two('>', '>')) {
      advance(2);
      push(Tok::close_stereo, ">>", start);
      continue;
    }
    Tok k;
    switch (c) {
      case '{': k = Tok::lbrace; break;
      case '}': k = Tok::rbrace; break;
      case '(': k = Tok::lparen; break;
      case ')': k = Tok::rparen; break;
      case '[': k = Tok::lbracket; break;
      case ']': k = Tok::rbracket; break;
      case ',': k = Tok::comma; break;
      case '.': k = Tok::dot; break;
      case ':': k = Tok::colon; break;
      case ';': k = Tok::semicolon; break;
      default: {
        SourceSpan sp = start;
        fail(sp, "E-SYNTAX", std::string("unexpected character '") + c + "'");
      }
    }
    advance();
    push(k, std::string(1, c), start);
  }
  SourceSpan eof = here();
  out.push_back(Token{Tok::end, {}, eof});
  return out;
}

const Token& Cursor::peek(std::size_t ahead) const {
  std::size_t p = pos_ + ahead;
  return p < toks_.size() ? toks_[p] : toks_.back();
}

const Token& Cursor::next() {
  const Token& t = peek();
  if (pos_ < toks_.size() - 1) ++pos_;
  return t;
}

const Token& Cursor::expect(Tok k, std::string_view what) {
  if (!at(k)) {
    const Token& t = peek();
    std::string got = t.kind == Tok::end ? "end of input" : "'" + t.text + "'";
    fail(t.span, "E-SYNTAX", "expected " + std::string(what) + ", got " + got);
  }
  return next();
}

const Token& Cursor::expect_word(std::string_view w) {
  if (!at_word(w)) {
    const Token& t = peek();
    std::string got = t.kind == Tok::end ? "end of input" : "'" + t.text + "'";
    fail(t.span, "E-SYNTAX", "expected '" + std::string(w) + "', got " + got);
  }
  return next();
}

bool Cursor::accept(Tok k) {
  if (!at(k)) return false;
  next();
  return true;
}

bool Cursor::accept_word(std::string_view w) {
  if (!at_word(w)) return false;
  next();
  return true;
}

SourceSpan Cursor::span_from(const SourceSpan& from) const {
  SourceSpan s = from;
  const Token& prev = toks_[pos_ > 0 ? pos_ - 1 : 0];
  s.line_end = prev.span.line_end;
  s.col_end = prev.span.col_end;
  return s;
}

}  // namespace megart::detail
