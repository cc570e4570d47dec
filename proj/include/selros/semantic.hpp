#pragma once

#include <cctype>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "selros/errors.hpp"
#include "selros/interpreter.hpp"
#include "selros/objectmap.hpp"

namespace selros {

enum class QueryLevel { RoomLevel, EnvironmentLevel };

struct Prompt {
  std::string role_text;
  std::string instruction_text;
  std::string data_text;
  QueryLevel level = QueryLevel::RoomLevel;
};

struct SemanticAssignment {
  int room_id = 0;
  std::string label;
  std::string reasoning;  // may be empty at environment level
};

// Closed label set. Matching is case-insensitive; canonical spellings are
// whatever the configuration lists.
struct Vocabulary {
  std::vector<std::string> labels;

  static Vocabulary defaults() {
    return Vocabulary{{"Bedroom", "Bathroom", "Kitchen", "Livingroom", "Hallway",
                       "Officeroom", "Storage", "Other"}};
  }

  std::optional<std::string> canonical(const std::string& candidate) const {
    auto lower = [](const std::string& s) {
      std::string out = s;
      std::transform(out.begin(), out.end(), out.begin(),
                     [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
      return out;
    };
    const std::string want = lower(candidate);
    for (const std::string& label : labels)
      if (lower(label) == want) return label;
    return std::nullopt;
  }

  std::string joined() const {
    std::string out;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (i) out += ", ";
      out += labels[i];
    }
    return out;
  }

  void validate() const {
    if (labels.empty()) throw ConfigError("vocabulary must not be empty");
    if (!canonical("Other")) throw ConfigError("vocabulary must contain \"Other\"");
  }
};

enum class LlmBackendKind { Stub, Http };

struct LlmConfig {
  LlmBackendKind backend = LlmBackendKind::Stub;
  std::string endpoint;
  std::string model;
  std::string api_key;
  int max_retries = 2;
  double timeout_seconds = 30.0;
  double temperature = 0.0;

  void validate() const {
    if (max_retries < 0) throw ConfigError("max_retries must be >= 0");
    if (backend == LlmBackendKind::Http && (endpoint.empty() || model.empty()))
      throw ConfigError("http backend requires an endpoint and a model");
  }
};

// ---------------------------------------------------------------------------
// Prompt templates

struct PromptTemplates {
  std::string room_role;
  std::string room_instruction;
  std::string env_role;
  std::string env_instruction;

  static const PromptTemplates& defaults() {
    static const PromptTemplates t{
        "You are an indoor-environment analyst for a home service robot. You identify "
        "the type of a room from its geometry and the objects observed inside it.",

        "Classify the room described in the data section as exactly one of the following "
        "labels: {vocabulary}.\n"
        "Answer with exactly two lines:\n"
        "LABEL: <one label from the list>\n"
        "REASON: <one short sentence explaining your choice>",

        "You are an indoor-environment analyst for a home service robot. You review the "
        "candidate labels assigned to every room of one home and produce the final, "
        "mutually consistent labeling.",

        "The data section describes every room of the home: its geometry, the objects "
        "observed in it, its adjacent rooms, and a candidate label with the reasoning "
        "behind it. Reconsider each candidate in the context of the whole home; you may "
        "keep or revise it. Use only these labels: {vocabulary}.\n"
        "Answer with exactly {room_count} lines, one line per room, in this exact "
        "format:\n"
        "Room <id>: <label>"};
    return t;
  }
};

inline std::string substitute_placeholders(std::string text,
                                           const std::map<std::string, std::string>& values) {
  for (const auto& [key, value] : values) {
    const std::string token = "{" + key + "}";
    std::size_t pos = 0;
    while ((pos = text.find(token, pos)) != std::string::npos) {
      text.replace(pos, token.size(), value);
      pos += value.size();
    }
  }
  return text;
}

namespace detail {

inline std::string read_template_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open template: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  std::string text = buf.str();
  if (!text.empty() && text.back() == '\n') text.pop_back();  // editor-added newline
  return text;
}

}  // namespace detail

// Loads the four prompt templates from <dir>/{room_role,room_instruction,
// env_role,env_instruction}.txt.
inline PromptTemplates load_templates(const std::string& dir) {
  PromptTemplates t;
  t.room_role = detail::read_template_file(dir + "/room_role.txt");
  t.room_instruction = detail::read_template_file(dir + "/room_instruction.txt");
  t.env_role = detail::read_template_file(dir + "/env_role.txt");
  t.env_instruction = detail::read_template_file(dir + "/env_instruction.txt");
  return t;
}

// ---------------------------------------------------------------------------
// Prompt construction

namespace detail {

inline std::string format_meters(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

inline std::string format_objects(const ObjectCounts& objects) {
  if (objects.empty()) return "none";
  std::string out;
  bool first = true;
  for (const auto& [name, count] : objects) {  // std::map keeps this alphabetical
    if (!first) out += ", ";
    first = false;
    out += name + " x" + std::to_string(count);
  }
  return out;
}

}  // namespace detail

// Room-level query: one room's facts, no knowledge of the rest of the home.
// Output is byte-deterministic for identical inputs.
inline Prompt build_room_prompt(const RoomRecord& record, const ObjectCounts& objects,
                                const Vocabulary& vocabulary,
                                const PromptTemplates& templates = PromptTemplates::defaults()) {
  Prompt p;
  p.level = QueryLevel::RoomLevel;
  p.role_text = templates.room_role;
  p.instruction_text =
      substitute_placeholders(templates.room_instruction, {{"vocabulary", vocabulary.joined()}});
  std::string data;
  data += "room: " + std::to_string(record.id) + "\n";
  data += "area: " + detail::format_meters(record.area_m2) + " m2\n";
  data += "size: " + detail::format_meters(record.length_m) + " m x " +
          detail::format_meters(record.width_m) + " m\n";
  data += "adjacent rooms: " + std::to_string(record.adjacent.size()) + "\n";
  data += "objects: " + detail::format_objects(objects);
  p.data_text = data;
  return p;
}

// Environment-level query: every room's facts plus its room-level candidate,
// with adjacent rooms named alongside their candidates so the model can
// reconcile the whole home at once.
inline Prompt build_environment_prompt(const std::vector<SemanticAssignment>& room_responses,
                                       const std::vector<RoomRecord>& records,
                                       const ObservationSet& observations,
                                       const Vocabulary& vocabulary,
                                       const PromptTemplates& templates = PromptTemplates::defaults()) {
  std::map<int, const SemanticAssignment*> by_id;
  for (const SemanticAssignment& a : room_responses) by_id[a.room_id] = &a;
  for (const RoomRecord& r : records)
    if (!by_id.count(r.id))
      throw MissingResponseError("no room-level response for room " + std::to_string(r.id),
                                 r.id);

  Prompt p;
  p.level = QueryLevel::EnvironmentLevel;
  p.role_text = templates.env_role;
  p.instruction_text = substitute_placeholders(
      templates.env_instruction, {{"vocabulary", vocabulary.joined()},
                                  {"room_count", std::to_string(records.size())}});

  static const ObjectCounts kNoObjects;
  std::string data;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const RoomRecord& r = records[i];
    const SemanticAssignment& candidate = *by_id.at(r.id);
    auto obs_it = observations.find(r.id);
    const ObjectCounts& objects = obs_it != observations.end() ? obs_it->second : kNoObjects;

    if (i) data += "\n\n";
    data += "Room " + std::to_string(r.id) + ":\n";
    data += "  area: " + detail::format_meters(r.area_m2) + " m2\n";
    data += "  size: " + detail::format_meters(r.length_m) + " m x " +
            detail::format_meters(r.width_m) + " m\n";
    data += "  objects: " + detail::format_objects(objects) + "\n";
    if (r.adjacent.empty()) {
      data += "  adjacent: none\n";
    } else {
      data += "  adjacent: ";
      for (std::size_t j = 0; j < r.adjacent.size(); ++j) {
        if (j) data += ", ";
        int other = r.adjacent[j];
        data += "Room " + std::to_string(other) + " (candidate: " + by_id.at(other)->label + ")";
      }
      data += "\n";
    }
    data += "  candidate: " + candidate.label + "\n";
    data += "  reason: " + candidate.reasoning;
  }
  p.data_text = data;
  return p;
}

// Full prompt as one document (system text, then the user text the backend
// receives). Used for golden files and prompt dumps.
inline std::string render_prompt(const Prompt& p) {
  return p.role_text + "\n\n" + p.instruction_text + "\n\n" + p.data_text + "\n";
}

// ---------------------------------------------------------------------------
// Response parsing

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

inline std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

// Matches "<key> : <value>" with any case and surrounding whitespace.
inline std::optional<std::string> keyed_line_value(const std::string& line,
                                                   const std::string& key) {
  std::string t = trim(line);
  if (t.size() < key.size() || lower(t.substr(0, key.size())) != key) return std::nullopt;
  std::size_t i = key.size();
  while (i < t.size() && std::isspace(static_cast<unsigned char>(t[i]))) ++i;
  if (i >= t.size() || t[i] != ':') return std::nullopt;
  return trim(t.substr(i + 1));
}

inline std::string excerpt_of(const std::string& text) {
  std::string t = trim(text);
  return t.size() <= 160 ? t : t.substr(0, 160) + "...";
}

inline std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return lines;
}

}  // namespace detail

// Pulls the first "LABEL:" and "REASON:" lines out of a room-level reply.
// A missing reason is tolerated; a missing or out-of-vocabulary label is not.
inline std::pair<std::string, std::string> parse_room_response(const std::string& text,
                                                               const Vocabulary& vocabulary) {
  std::optional<std::string> label, reason;
  for (const std::string& line : detail::split_lines(text)) {
    if (!label)
      if (auto v = detail::keyed_line_value(line, "label")) label = *v;
    if (!reason)
      if (auto v = detail::keyed_line_value(line, "reason")) reason = *v;
  }
  if (!label)
    throw FormatError("reply has no LABEL line", detail::excerpt_of(text));
  auto canonical = vocabulary.canonical(*label);
  if (!canonical)
    throw FormatError("label '" + *label + "' is not in the vocabulary",
                      detail::excerpt_of(text));
  return {*canonical, reason.value_or("")};
}

// Extracts "Room <id>: <label>" lines from an environment-level reply and
// checks there is exactly one per expected room. Other prose is ignored.
inline std::vector<SemanticAssignment> parse_environment_response(
    const std::string& text, const std::vector<int>& room_ids, const Vocabulary& vocabulary) {
  std::map<int, std::string> found;
  std::vector<int> duplicated, unexpected;
  std::vector<std::string> bad_labels;
  const std::set<int> expected(room_ids.begin(), room_ids.end());

  for (const std::string& raw : detail::split_lines(text)) {
    std::string line = detail::trim(raw);
    if (detail::lower(line.substr(0, 4)) != "room") continue;
    std::size_t i = 4;
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    std::size_t digits_begin = i;
    while (i < line.size() && std::isdigit(static_cast<unsigned char>(line[i]))) ++i;
    if (i == digits_begin) continue;
    int id = std::stoi(line.substr(digits_begin, i - digits_begin));
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    if (i >= line.size() || line[i] != ':') continue;
    std::string value = detail::trim(line.substr(i + 1));

    if (!expected.count(id)) {
      unexpected.push_back(id);
      continue;
    }
    auto canonical = vocabulary.canonical(value);
    if (!canonical) {
      bad_labels.push_back("room " + std::to_string(id) + ": '" + value + "'");
      continue;
    }
    if (found.count(id)) {
      duplicated.push_back(id);
      continue;
    }
    found[id] = *canonical;
  }

  std::vector<int> missing;
  for (int id : room_ids)
    if (!found.count(id)) missing.push_back(id);

  if (!bad_labels.empty() || !duplicated.empty() || !missing.empty() || !unexpected.empty()) {
    std::string what = "environment reply malformed:";
    auto join_ids = [](const std::vector<int>& ids) {
      std::string s;
      for (std::size_t i = 0; i < ids.size(); ++i)
        s += (i ? ", " : "") + std::to_string(ids[i]);
      return s;
    };
    if (!missing.empty()) what += " missing rooms [" + join_ids(missing) + "];";
    if (!duplicated.empty()) what += " duplicated rooms [" + join_ids(duplicated) + "];";
    if (!unexpected.empty()) what += " unexpected rooms [" + join_ids(unexpected) + "];";
    for (const std::string& b : bad_labels) what += " unknown label " + b + ";";
    throw FormatError(what, detail::excerpt_of(text));
  }

  std::vector<SemanticAssignment> assignments;
  for (int id : room_ids) assignments.push_back(SemanticAssignment{id, found.at(id), ""});
  return assignments;
}

// ---------------------------------------------------------------------------
// Offline deterministic classifier (the stub backend's brain)

namespace detail {

struct StubRoomFacts {
  double area_m2 = 0.0;
  double length_m = 0.0;
  double width_m = 0.0;
  std::vector<std::string> objects;  // alphabetical, as serialized
};

inline StubRoomFacts parse_stub_facts(const std::string& data_text, const std::string& indent) {
  StubRoomFacts facts;
  for (const std::string& line : split_lines(data_text)) {
    if (auto v = keyed_line_value(line, "area")) {
      std::sscanf(v->c_str(), "%lf", &facts.area_m2);
    } else if (auto s = keyed_line_value(line, "size")) {
      std::sscanf(s->c_str(), "%lf m x %lf", &facts.length_m, &facts.width_m);
    } else if (auto o = keyed_line_value(line, "objects")) {
      if (*o == "none") continue;
      std::istringstream items(*o);
      std::string item;
      while (std::getline(items, item, ',')) {
        std::string name = trim(item);
        std::size_t x = name.rfind(" x");
        if (x != std::string::npos) name = name.substr(0, x);
        if (!name.empty()) facts.objects.push_back(name);
      }
    }
  }
  (void)indent;
  return facts;
}

inline bool has_any(const std::vector<std::string>& objects, const std::set<std::string>& set) {
  for (const std::string& o : objects)
    if (set.count(o)) return true;
  return false;
}

inline std::string first_of(const std::vector<std::string>& objects,
                            const std::set<std::string>& set) {
  for (const std::string& o : objects)
    if (set.count(o)) return o;
  return {};
}

inline std::string classify_stub_room(const StubRoomFacts& facts) {
  static const std::set<std::string> kBath{"toilet", "bathtub", "shower", "showerhead"};
  static const std::set<std::string> kBed{"bed"};
  static const std::set<std::string> kKitchen{"stove", "stoveburner", "fridge", "microwave",
                                              "countertop"};
  static const std::set<std::string> kLiving{"sofa", "television", "tv"};
  static const std::set<std::string> kOffice{"desk", "chair", "laptop"};

  if (has_any(facts.objects, kBath))
    return "LABEL: Bathroom\nREASON: observed a " + first_of(facts.objects, kBath) +
           ", which marks a bathroom.";
  if (has_any(facts.objects, kBed))
    return "LABEL: Bedroom\nREASON: observed a bed, which marks a bedroom.";
  if (has_any(facts.objects, kKitchen))
    return "LABEL: Kitchen\nREASON: observed a " + first_of(facts.objects, kKitchen) +
           ", which marks a kitchen.";
  if (has_any(facts.objects, kLiving))
    return "LABEL: Livingroom\nREASON: observed a " + first_of(facts.objects, kLiving) +
           ", which marks a living room.";
  bool has_desk = has_any(facts.objects, {"desk"});
  bool has_companion = has_any(facts.objects, {"chair"}) || has_any(facts.objects, {"laptop"});
  if (has_desk && has_companion) {
    std::string companion = first_of(facts.objects, {"chair", "laptop"});
    return "LABEL: Officeroom\nREASON: observed a desk paired with a " + companion +
           ", which marks an office.";
  }

  bool signature = has_any(facts.objects, kBath) || has_any(facts.objects, kBed) ||
                   has_any(facts.objects, kKitchen) || has_any(facts.objects, kLiving) ||
                   has_any(facts.objects, kOffice);
  if (!signature && facts.width_m > 0.0 && facts.length_m / facts.width_m >= 3.0)
    return "LABEL: Hallway\nREASON: no signature objects and an elongated footprint "
           "suggest a hallway.";
  if (!signature && facts.area_m2 < 3.0)
    return "LABEL: Storage\nREASON: no signature objects and a very small area suggest "
           "a storage space.";
  return "LABEL: Other\nREASON: no signature objects matched this room.";
}

struct StubEnvRoom {
  int id = 0;
  std::string candidate;
  std::vector<std::pair<int, std::string>> adjacent;  // (room id, candidate)
};

inline std::vector<StubEnvRoom> parse_stub_env(const std::string& data_text) {
  std::vector<StubEnvRoom> rooms;
  for (const std::string& raw : split_lines(data_text)) {
    std::string line = trim(raw);
    if (line.empty()) continue;
    if (line.rfind("Room ", 0) == 0 && line.back() == ':') {
      StubEnvRoom room;
      room.id = std::stoi(line.substr(5));
      rooms.push_back(room);
      continue;
    }
    if (rooms.empty()) continue;
    if (auto v = keyed_line_value(line, "candidate")) {
      rooms.back().candidate = *v;
    } else if (auto a = keyed_line_value(line, "adjacent")) {
      if (*a == "none") continue;
      // entries look like "Room 2 (candidate: Bathroom)"; labels carry no commas
      std::istringstream items(*a);
      std::string item;
      while (std::getline(items, item, ',')) {
        std::string part = trim(item);
        if (part.rfind("Room ", 0) != 0) continue;
        int id = std::stoi(part.substr(5));
        std::string label;
        std::size_t open = part.find("candidate:");
        std::size_t close = part.rfind(')');
        if (open != std::string::npos && close != std::string::npos && close > open)
          label = trim(part.substr(open + 10, close - open - 10));
        rooms.back().adjacent.emplace_back(id, label);
      }
    }
  }
  return rooms;
}

}  // namespace detail

// Deterministic offline classifier. Room level applies a fixed first-match
// rule table over the observed objects and the room dimensions; environment
// level echoes every room's candidate, except that an Other room with exactly
// one neighbor adopts that neighbor's candidate. Every string it returns
// parses cleanly with the corresponding parser.
inline std::string stub_classify(QueryLevel level, const std::string& data_text) {
  if (level == QueryLevel::RoomLevel)
    return detail::classify_stub_room(detail::parse_stub_facts(data_text, "  "));

  std::vector<detail::StubEnvRoom> rooms = detail::parse_stub_env(data_text);
  std::string out;
  for (std::size_t i = 0; i < rooms.size(); ++i) {
    std::string label = rooms[i].candidate;
    if (label == "Other" && rooms[i].adjacent.size() == 1 &&
        !rooms[i].adjacent[0].second.empty())
      label = rooms[i].adjacent[0].second;
    if (i) out += "\n";
    out += "Room " + std::to_string(rooms[i].id) + ": " + label;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Backends and the retrying query driver

struct ChatMessage {
  std::string role;
  std::string content;
};

class LlmBackend {
 public:
  virtual ~LlmBackend() = default;
  // Returns the raw completion text; throws LlmUnavailable on transport
  // failure. `messages` holds the full conversation including corrective
  // turns; `prompt` is the structured query behind it.
  virtual std::string complete(const Prompt& prompt,
                               const std::vector<ChatMessage>& messages) = 0;
};

class StubBackend final : public LlmBackend {
 public:
  std::string complete(const Prompt& prompt, const std::vector<ChatMessage>&) override {
    return stub_classify(prompt.level, prompt.data_text);
  }
};

// Thread-safe JSON-lines audit log of every backend call.
class TranscriptLog {
 public:
  explicit TranscriptLog(const std::string& path) : out_(path, std::ios::app) {
    if (!out_) throw IoError("cannot open transcript log: " + path);
  }

  void record(const Prompt& prompt, int attempt, const std::vector<ChatMessage>& messages,
              const std::string* response, const std::string* error) {
    nlohmann::json msgs = nlohmann::json::array();
    for (const ChatMessage& m : messages) msgs.push_back({{"role", m.role}, {"content", m.content}});
    nlohmann::json entry{
        {"level", prompt.level == QueryLevel::RoomLevel ? "room" : "environment"},
        {"attempt", attempt},
        {"request", {{"messages", msgs}}}};
    if (response) entry["response"] = *response;
    if (error) entry["error"] = *error;
    std::lock_guard<std::mutex> lock(mu_);
    out_ << entry.dump() << '\n';
    out_.flush();
  }

 private:
  std::mutex mu_;
  std::ofstream out_;
};

// Returns an error description when the reply is unusable, nothing when it
// is fine.
using ResponseValidator = std::function<std::optional<std::string>(const std::string&)>;

inline std::vector<ChatMessage> initial_messages(const Prompt& prompt) {
  return {{"system", prompt.role_text},
          {"user", prompt.instruction_text + "\n\n" + prompt.data_text}};
}

// Issues the prompt with up to max_retries + 1 backend calls. Transport
// failures retry as-is; replies the validator rejects retry with the
// malformed reply appended verbatim as an assistant turn plus a corrective
// user turn.
inline std::string query(const Prompt& prompt, LlmBackend& backend, const LlmConfig& config,
                         const ResponseValidator& validator = {},
                         TranscriptLog* transcript = nullptr) {
  config.validate();
  std::vector<ChatMessage> messages = initial_messages(prompt);
  bool last_was_format = false;
  std::string last_reply;
  std::string last_error = "no attempts made";

  for (int attempt = 1; attempt <= config.max_retries + 1; ++attempt) {
    std::string reply;
    try {
      reply = backend.complete(prompt, messages);
    } catch (const LlmUnavailable& e) {
      last_was_format = false;
      last_error = e.what();
      if (transcript) {
        std::string err = e.what();
        transcript->record(prompt, attempt, messages, nullptr, &err);
      }
      continue;
    }
    if (transcript) transcript->record(prompt, attempt, messages, &reply, nullptr);

    std::optional<std::string> problem = validator ? validator(reply) : std::nullopt;
    if (!problem) return reply;

    last_was_format = true;
    last_reply = reply;
    last_error = *problem;
    messages.push_back({"assistant", reply});
    messages.push_back({"user",
                        "Your previous reply did not match the required format (" + *problem +
                            "). Answer again and follow the format instructions exactly."});
  }

  if (last_was_format)
    throw PersistentFormatError("backend kept replying in the wrong format: " + last_error,
                                last_reply);
  throw LlmUnavailable("backend unavailable after " + std::to_string(config.max_retries + 1) +
                       " attempts: " + last_error);
}

}  // namespace selros
