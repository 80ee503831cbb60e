#pragma once

// Triggering conditions `events; period; initialState` and the event model
// they are matched against.

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "megart/clock.hpp"
#include "megart/diagnostic.hpp"

namespace megart {

/// One entry of a trigger's event list: an event type, or an interception
/// point Before[op] / After[op] on the sensed module.
struct EventPattern {
  enum class Kind { type, before, after };
  Kind kind = Kind::type;
  std::string name;  // event type name or operation name

  bool operator==(const EventPattern&) const = default;
  bool is_interception() const { return kind != Kind::type; }
};

std::string to_string(const EventPattern& p);

struct TriggerSpec {
  std::vector<EventPattern> events;
  std::optional<Ticks> period;
  std::string initial_state;

  bool operator==(const TriggerSpec&) const = default;
  bool periodic_only() const { return events.empty(); }
  bool intercepts() const;
};

/// Parses "RtException; 10s; Monitor;". The trailing ';' is optional; the
/// period takes an `s` or `ms` suffix; event lists are comma separated.
Parsed<TriggerSpec> parse_trigger(std::string_view text, const SourceSpan& where = {});

/// Canonical form, e.g. "RtException; 10s; Monitor".
std::string to_string(const TriggerSpec& t);
std::string format_period(Ticks period);

/// Event type hierarchy (single inheritance, acyclic by construction: a
/// parent must be declared before its children).
class EventTypeRegistry {
 public:
  /// False if `name` exists or `parent` is unknown.
  bool add(const std::string& name, const std::string& parent = {});
  bool contains(std::string_view name) const;
  /// True iff `type` equals `ancestor` or descends from it.
  bool is_a(std::string_view type, std::string_view ancestor) const;
  std::optional<std::string> parent_of(std::string_view name) const;
  /// Declaration order.
  const std::vector<std::string>& names() const { return order_; }

  bool operator==(const EventTypeRegistry& o) const { return order_ == o.order_ && parents_ == o.parents_; }

 private:
  std::vector<std::string> order_;
  std::map<std::string, std::string, std::less<>> parents_;
};

/// `event RtException; event OutOfMemoryRtException extends RtException;`
Parsed<EventTypeRegistry> parse_event_types(std::string_view text, const std::string& file = {});
std::string serialize_event_types(const EventTypeRegistry& reg);

struct Event {
  std::string type;    // registered type, or "Before[op]" / "After[op]"
  std::string source;  // emitting module instance
  Ticks timestamp = 0;
  nlohmann::json payload = nlohmann::json::object();

  // Interception events only: the phase, operation, and the active call
  // chain (outermost first) of the run that emitted it.
  EventPattern::Kind phase = EventPattern::Kind::type;
  std::string op;
  std::vector<std::string> call_chain;

  bool is_interception() const { return phase != EventPattern::Kind::type; }
};

/// True iff `event` activates `spec` on a sense edge observing `sensed`:
/// a typed event from `sensed` whose type is (a descendant of) a listed
/// type, or an interception event raised while `sensed` was in the call
/// chain and matching a listed Before/After pattern.
bool match_event(const TriggerSpec& spec, const Event& event, std::string_view sensed,
                 const EventTypeRegistry& types);

}  // namespace megart
