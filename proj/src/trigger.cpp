#include "megart/trigger.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

#include "lexer.hpp"

namespace megart {
namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

bool valid_ident(std::string_view s) {
  if (s.empty()) return false;
  auto alpha = [](char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_'; };
  if (!alpha(s.front())) return false;
  return std::all_of(s.begin(), s.end(), [&](char c) { return alpha(c) || (c >= '0' && c <= '9') || c == '-'; });
}

}  // namespace

std::string to_string(const EventPattern& p) {
  switch (p.kind) {
    case EventPattern::Kind::before: return "Before[" + p.name + "]";
    case EventPattern::Kind::after: return "After[" + p.name + "]";
    case EventPattern::Kind::type: break;
  }
  return p.name;
}

bool TriggerSpec::intercepts() const {
  return std::any_of(events.begin(), events.end(), [](const EventPattern& p) { return p.is_interception(); });
}

std::string format_period(Ticks period) {
  if (period % kTicksPerSecond == 0) return std::to_string(period / kTicksPerSecond) + "s";
  if (period % kTicksPerMilli == 0) return std::to_string(period / kTicksPerMilli) + "ms";
  // Sub-millisecond: fractional milliseconds, exact in decimal.
  std::string ms = std::to_string(period / kTicksPerMilli);
  std::string frac = std::to_string(period % kTicksPerMilli);
  frac.insert(0, 3 - frac.size(), '0');
  while (!frac.empty() && frac.back() == '0') frac.pop_back();
  return ms + "." + frac + "ms";
}

std::string to_string(const TriggerSpec& t) {
  std::string out;
  for (std::size_t i = 0; i < t.events.size(); ++i) {
    if (i) out += ", ";
    out += to_string(t.events[i]);
  }
  out += "; ";
  if (t.period) out += format_period(*t.period);
  out += "; " + t.initial_state;
  return out;
}

Parsed<TriggerSpec> parse_trigger(std::string_view text, const SourceSpan& where) {
  Parsed<TriggerSpec> out;
  auto diag = [&](std::string code, std::string msg) {
    out.diagnostics.push_back(Diagnostic{Severity::error, std::move(code), std::move(msg), where, {}});
    return out;
  };

  std::vector<std::string_view> parts;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= text.size(); ++i) {
    if (i == text.size() || text[i] == ';') {
      parts.push_back(trim(text.substr(start, i - start)));
      start = i + 1;
    }
  }
  // "a; b; c;" splits into four parts with an empty tail.
  if (parts.size() == 4 && parts.back().empty()) parts.pop_back();
  if (parts.size() != 3)
    return diag("E-TRIG-SYNTAX", "trigger needs three ';'-separated parts: events; period; initialState");

  TriggerSpec spec;
  if (!parts[0].empty()) {
    std::string_view list = parts[0];
    std::size_t s = 0;
    for (std::size_t i = 0; i <= list.size(); ++i) {
      if (i != list.size() && list[i] != ',') continue;
      std::string_view item = trim(list.substr(s, i - s));
      s = i + 1;
      EventPattern p;
      auto bracketed = [&](std::string_view prefix, EventPattern::Kind k) {
        if (item.size() > prefix.size() + 1 && item.substr(0, prefix.size()) == prefix && item.back() == ']') {
          p.kind = k;
          p.name = std::string(trim(item.substr(prefix.size(), item.size() - prefix.size() - 1)));
          return true;
        }
        return false;
      };
      if (!bracketed("Before[", EventPattern::Kind::before) && !bracketed("After[", EventPattern::Kind::after)) {
        p.kind = EventPattern::Kind::type;
        p.name = std::string(item);
      }
      if (!valid_ident(p.name)) return diag("E-TRIG-SYNTAX", "malformed event '" + std::string(item) + "'");
      spec.events.push_back(std::move(p));
    }
  }

  if (!parts[1].empty()) {
    std::string_view p = parts[1];
    std::size_t n = 0;
    while (n < p.size() && ((p[n] >= '0' && p[n] <= '9') || p[n] == '.')) ++n;
    std::string_view num = p.substr(0, n);
    std::string_view unit = trim(p.substr(n));
    double v = 0;
    auto [ptr, ec] = std::from_chars(num.data(), num.data() + num.size(), v);
    if (num.empty() || ec != std::errc() || ptr != num.data() + num.size())
      return diag("E-TRIG-SYNTAX", "malformed period '" + std::string(p) + "'");
    if (unit == "s") {
      spec.period = static_cast<Ticks>(std::llround(v * kTicksPerSecond));
    } else if (unit == "ms") {
      spec.period = static_cast<Ticks>(std::llround(v * kTicksPerMilli));
    } else {
      return diag("E-TRIG-UNIT", "unknown period unit '" + std::string(unit) + "' (use s or ms)");
    }
  }

  if (spec.events.empty() && !spec.period)
    return diag("E-TRIG-EMPTY", "trigger needs events, a period, or both");
  if (!valid_ident(parts[2])) return diag("E-TRIG-SYNTAX", "missing or malformed initial state");
  spec.initial_state = std::string(parts[2]);
  out.value = std::move(spec);
  return out;
}

bool EventTypeRegistry::add(const std::string& name, const std::string& parent) {
  if (contains(name)) return false;
  if (!parent.empty() && !contains(parent)) return false;
  order_.push_back(name);
  parents_.emplace(name, parent);
  return true;
}

bool EventTypeRegistry::contains(std::string_view name) const { return parents_.find(name) != parents_.end(); }

bool EventTypeRegistry::is_a(std::string_view type, std::string_view ancestor) const {
  std::string_view cur = type;
  // Declaration order guarantees termination: parents precede children.
  for (std::size_t guard = 0; guard <= order_.size(); ++guard) {
    if (cur == ancestor) return true;
    auto it = parents_.find(cur);
    if (it == parents_.end() || it->second.empty()) return false;
    cur = it->second;
  }
  return false;
}

std::optional<std::string> EventTypeRegistry::parent_of(std::string_view name) const {
  auto it = parents_.find(name);
  if (it == parents_.end() || it->second.empty()) return std::nullopt;
  return it->second;
}

Parsed<EventTypeRegistry> parse_event_types(std::string_view text, const std::string& file) {
  using namespace detail;
  Parsed<EventTypeRegistry> out;
  try {
    Cursor cur(tokenize(text, file));
    EventTypeRegistry reg;
    while (!cur.at_end()) {
      SourceSpan at = cur.expect_word("event").span;
      std::string name = cur.ident("event type name");
      std::string parent;
      if (cur.accept_word("extends")) parent = cur.ident("parent event type");
      cur.expect(Tok::semicolon, "';'");
      if (reg.contains(name)) fail(cur.span_from(at), "E-EVENT-DUP", "event type '" + name + "' declared twice");
      if (!parent.empty() && !reg.contains(parent))
        fail(cur.span_from(at), "E-EVENT-PARENT", "unknown parent event type '" + parent + "'");
      reg.add(name, parent);
    }
    out.value = std::move(reg);
  } catch (const ParseFailure& f) {
    out.diagnostics.push_back(f.diag);
  }
  return out;
}

std::string serialize_event_types(const EventTypeRegistry& reg) {
  std::string out;
  for (const std::string& n : reg.names()) {
    out += "event " + n;
    if (auto p = reg.parent_of(n)) out += " extends " + *p;
    out += ";\n";
  }
  return out;
}

bool match_event(const TriggerSpec& spec, const Event& event, std::string_view sensed,
                 const EventTypeRegistry& types) {
  if (event.is_interception()) {
    if (std::find(event.call_chain.begin(), event.call_chain.end(), sensed) == event.call_chain.end())
      return false;
    return std::any_of(spec.events.begin(), spec.events.end(), [&](const EventPattern& p) {
      return p.kind == event.phase && p.name == event.op;
    });
  }
  if (event.source != sensed) return false;
  return std::any_of(spec.events.begin(), spec.events.end(), [&](const EventPattern& p) {
    return p.kind == EventPattern::Kind::type && types.is_a(event.type, p.name);
  });
}

}  // namespace megart
