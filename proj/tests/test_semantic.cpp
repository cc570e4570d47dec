#include <catch2/catch.hpp>

#include <random>

#include <json.hpp>

#include "selros/semantic.hpp"
#include "support/fixtures.hpp"

using namespace selros;

namespace {

RoomRecord make_record(int id, double area_m2, double length_m, double width_m,
                       std::vector<int> adjacent = {}) {
  RoomRecord r;
  r.id = id;
  r.area_m2 = area_m2;
  r.area_cells = static_cast<long>(area_m2 / 0.25);
  r.length_m = length_m;
  r.width_m = width_m;
  r.adjacent = std::move(adjacent);
  return r;
}

struct ScriptedBackend final : LlmBackend {
  static constexpr const char* kUnavailable = "<unavailable>";
  std::vector<std::string> replies;
  std::size_t calls = 0;
  std::vector<std::vector<ChatMessage>> seen;

  explicit ScriptedBackend(std::vector<std::string> r) : replies(std::move(r)) {}

  std::string complete(const Prompt&, const std::vector<ChatMessage>& messages) override {
    seen.push_back(messages);
    std::size_t i = calls++;
    if (i >= replies.size()) throw LlmUnavailable("script exhausted");
    if (replies[i] == kUnavailable) throw LlmUnavailable("scripted transport failure");
    return replies[i];
  }
};

std::optional<std::string> require_label_line(const std::string& reply) {
  try {
    parse_room_response(reply, Vocabulary::defaults());
    return std::nullopt;
  } catch (const FormatError& e) {
    return std::string(e.what());
  }
}

}  // namespace

TEST_CASE("room prompt lists area and the sorted object multiset") {
  RoomRecord r = make_record(1, 12.0, 4.0, 3.0, {2});
  ObjectCounts objects{{"bed", 1}, {"lamp", 1}};
  Prompt p = build_room_prompt(r, objects, Vocabulary::defaults());
  REQUIRE(p.level == QueryLevel::RoomLevel);
  REQUIRE(p.data_text.find("area: 12.00 m2") != std::string::npos);
  REQUIRE(p.data_text.find("objects: bed x1, lamp x1") != std::string::npos);
  REQUIRE(p.data_text.find("size: 4.00 m x 3.00 m") != std::string::npos);
  REQUIRE(p.data_text.find("adjacent rooms: 1") != std::string::npos);
  REQUIRE(p.instruction_text.find("LABEL:") != std::string::npos);
  REQUIRE(p.instruction_text.find("Bedroom, Bathroom, Kitchen") != std::string::npos);
}

TEST_CASE("empty object multiset renders as none") {
  Prompt p = build_room_prompt(make_record(1, 4.0, 2.0, 2.0), {}, Vocabulary::defaults());
  REQUIRE(p.data_text.find("objects: none") != std::string::npos);
}

TEST_CASE("prompt construction is byte-deterministic") {
  RoomRecord r = make_record(3, 7.25, 3.5, 2.0, {1, 2});
  ObjectCounts objects{{"chair", 3}, {"desk", 1}};
  Prompt a = build_room_prompt(r, objects, Vocabulary::defaults());
  Prompt b = build_room_prompt(r, objects, Vocabulary::defaults());
  REQUIRE(a.role_text == b.role_text);
  REQUIRE(a.instruction_text == b.instruction_text);
  REQUIRE(a.data_text == b.data_text);
}

TEST_CASE("environment prompt has one block per room and names neighbor candidates") {
  std::vector<RoomRecord> records{make_record(1, 20.0, 5.0, 4.0, {2}),
                                  make_record(2, 6.0, 3.0, 2.0, {1, 3}),
                                  make_record(3, 9.0, 3.0, 3.0, {2})};
  ObservationSet obs;
  obs[1]["bed"] = 1;
  obs[2]["toilet"] = 1;
  obs[3];
  std::vector<SemanticAssignment> candidates{{1, "Bedroom", "a bed is present"},
                                             {2, "Bathroom", "a toilet is present"},
                                             {3, "Other", ""}};
  Prompt p = build_environment_prompt(candidates, records, obs, Vocabulary::defaults());
  REQUIRE(p.level == QueryLevel::EnvironmentLevel);
  REQUIRE(p.data_text.find("Room 1:") != std::string::npos);
  REQUIRE(p.data_text.find("Room 2:") != std::string::npos);
  REQUIRE(p.data_text.find("Room 3:") != std::string::npos);
  REQUIRE(p.data_text.find("adjacent: Room 2 (candidate: Bathroom)") != std::string::npos);
  REQUIRE(p.data_text.find("adjacent: Room 1 (candidate: Bedroom), Room 3 (candidate: Other)") !=
          std::string::npos);
  REQUIRE(p.instruction_text.find("exactly 3 lines") != std::string::npos);

  Prompt again = build_environment_prompt(candidates, records, obs, Vocabulary::defaults());
  REQUIRE(again.data_text == p.data_text);
}

TEST_CASE("environment prompt demands a response for every room") {
  std::vector<RoomRecord> records{make_record(1, 4.0, 2.0, 2.0), make_record(2, 4.0, 2.0, 2.0)};
  std::vector<SemanticAssignment> only_one{{1, "Bedroom", ""}};
  try {
    build_environment_prompt(only_one, records, {}, Vocabulary::defaults());
    FAIL("expected MissingResponseError");
  } catch (const MissingResponseError& e) {
    REQUIRE(e.room_id == 2);
  }
}

TEST_CASE("room response parsing") {
  Vocabulary vocab = Vocabulary::defaults();
  auto [label, reason] = parse_room_response("LABEL: Bedroom\nREASON: a bed is present", vocab);
  REQUIRE(label == "Bedroom");
  REQUIRE(reason == "a bed is present");

  auto [label2, reason2] = parse_room_response("label: kitchen", vocab);
  REQUIRE(label2 == "Kitchen");
  REQUIRE(reason2.empty());

  REQUIRE_THROWS_AS(parse_room_response("This looks like a bedroom.", vocab), FormatError);
  REQUIRE_THROWS_AS(parse_room_response("LABEL: Ballroom", vocab), FormatError);
  auto [label3, reason3] =
      parse_room_response("noise\n  LABEL :  Livingroom  \nmore noise\nREASON: tv", vocab);
  REQUIRE(label3 == "Livingroom");
  REQUIRE(reason3 == "tv");
}

TEST_CASE("environment response parsing") {
  Vocabulary vocab = Vocabulary::defaults();
  auto a = parse_environment_response("Room 1: Kitchen\nRoom 2: Livingroom", {1, 2}, vocab);
  REQUIRE(a.size() == 2);
  REQUIRE(a[0].label == "Kitchen");
  REQUIRE(a[1].label == "Livingroom");

  auto tolerant = parse_environment_response(
      "Here is my final answer:\nRoom 1: Kitchen\nroom 2: livingroom\nThanks!", {1, 2}, vocab);
  REQUIRE(tolerant[1].label == "Livingroom");

  REQUIRE_THROWS_AS(parse_environment_response("Room 1: Kitchen", {1, 2}, vocab), FormatError);
  REQUIRE_THROWS_AS(parse_environment_response("Room 1: Ballroom\nRoom 2: Kitchen", {1, 2}, vocab),
                    FormatError);
  REQUIRE_THROWS_AS(
      parse_environment_response("Room 1: Kitchen\nRoom 1: Kitchen\nRoom 2: Other", {1, 2}, vocab),
      FormatError);
  REQUIRE_THROWS_AS(
      parse_environment_response("Room 1: Kitchen\nRoom 2: Other\nRoom 7: Other", {1, 2}, vocab),
      FormatError);

  try {
    parse_environment_response("Room 2: Kitchen", {1, 2}, vocab);
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    REQUIRE(std::string(e.what()).find("missing rooms [1]") != std::string::npos);
  }
}

namespace {

std::string stub_for(const ObjectCounts& objects, double area = 12.0, double length = 4.0,
                     double width = 3.0) {
  RoomRecord r = make_record(1, area, length, width);
  Prompt p = build_room_prompt(r, objects, Vocabulary::defaults());
  return stub_classify(QueryLevel::RoomLevel, p.data_text);
}

}  // namespace

TEST_CASE("stub room rules fire in order") {
  REQUIRE(stub_for({{"bed", 1}, {"lamp", 1}}).find("LABEL: Bedroom") == 0);
  REQUIRE(stub_for({{"toilet", 1}}).find("LABEL: Bathroom") == 0);
  REQUIRE(stub_for({{"bed", 1}, {"toilet", 1}}).find("LABEL: Bathroom") == 0);  // bath first
  REQUIRE(stub_for({{"stove", 1}}).find("LABEL: Kitchen") == 0);
  REQUIRE(stub_for({{"sofa", 1}, {"television", 1}}).find("LABEL: Livingroom") == 0);
  REQUIRE(stub_for({{"desk", 1}, {"chair", 1}}).find("LABEL: Officeroom") == 0);
  REQUIRE(stub_for({{"desk", 1}, {"laptop", 1}}).find("LABEL: Officeroom") == 0);
  REQUIRE(stub_for({{"desk", 1}}).find("LABEL: Other") == 0);  // desk alone is not an office
  // elongation: 10 x 1 room, no signature objects
  REQUIRE(stub_for({}, 2.5, 5.0, 0.5).find("LABEL: Hallway") == 0);
  // small area, no signature objects
  REQUIRE(stub_for({}, 2.25, 1.5, 1.5).find("LABEL: Storage") == 0);
  // unremarkable room
  REQUIRE(stub_for({{"plant", 2}}, 12.0, 4.0, 3.0).find("LABEL: Other") == 0);
  // signature objects disable the geometry fallbacks
  REQUIRE(stub_for({{"chair", 1}}, 2.25, 1.5, 1.5).find("LABEL: Other") == 0);
}

TEST_CASE("stub environment level echoes candidates and fills in lone Others") {
  std::vector<RoomRecord> records{make_record(1, 20.0, 5.0, 4.0, {2}),
                                  make_record(2, 6.0, 3.0, 2.0, {1})};
  ObservationSet obs;
  obs[1]["sofa"] = 1;
  obs[2];
  std::vector<SemanticAssignment> candidates{{1, "Livingroom", "sofa"}, {2, "Other", ""}};
  Prompt p = build_environment_prompt(candidates, records, obs, Vocabulary::defaults());
  std::string reply = stub_classify(QueryLevel::EnvironmentLevel, p.data_text);
  REQUIRE(reply == "Room 1: Livingroom\nRoom 2: Livingroom");
}

TEST_CASE("stub keeps Other when a room has several neighbors") {
  std::vector<RoomRecord> records{make_record(1, 20.0, 5.0, 4.0, {3}),
                                  make_record(2, 6.0, 3.0, 2.0, {3}),
                                  make_record(3, 6.0, 3.0, 2.0, {1, 2})};
  ObservationSet obs;
  obs[1]["sofa"] = 1;
  obs[2]["bed"] = 1;
  obs[3];
  std::vector<SemanticAssignment> candidates{
      {1, "Livingroom", "sofa"}, {2, "Bedroom", "bed"}, {3, "Other", ""}};
  Prompt p = build_environment_prompt(candidates, records, obs, Vocabulary::defaults());
  std::string reply = stub_classify(QueryLevel::EnvironmentLevel, p.data_text);
  REQUIRE(reply == "Room 1: Livingroom\nRoom 2: Bedroom\nRoom 3: Other");
}

TEST_CASE("every stub reply parses cleanly") {
  std::mt19937 rng(64);
  Vocabulary vocab = Vocabulary::defaults();
  std::vector<std::string> pool{"bed",  "toilet", "stove", "sofa",  "desk",
                                "chair", "lamp",  "plant", "table", "television"};
  for (int trial = 0; trial < 200; ++trial) {
    ObjectCounts objects;
    int n = std::uniform_int_distribution<int>(0, 4)(rng);
    for (int i = 0; i < n; ++i)
      ++objects[pool[std::uniform_int_distribution<std::size_t>(0, pool.size() - 1)(rng)]];
    double len = std::uniform_real_distribution<double>(0.5, 8.0)(rng);
    double wid = std::uniform_real_distribution<double>(0.5, len)(rng);
    RoomRecord r = make_record(1, len * wid, len, wid);
    Prompt p = build_room_prompt(r, objects, vocab);
    std::string reply = stub_classify(QueryLevel::RoomLevel, p.data_text);
    auto [label, reason] = parse_room_response(reply, vocab);
    REQUIRE(vocab.canonical(label).has_value());
    REQUIRE_FALSE(reason.empty());
  }
}

TEST_CASE("repo template files match the built-in defaults") {
  PromptTemplates repo = load_templates(testsupport::template_dir());
  const PromptTemplates& builtin = PromptTemplates::defaults();
  REQUIRE(repo.room_role == builtin.room_role);
  REQUIRE(repo.room_instruction == builtin.room_instruction);
  REQUIRE(repo.env_role == builtin.env_role);
  REQUIRE(repo.env_instruction == builtin.env_instruction);
}

TEST_CASE("placeholder substitution replaces every occurrence") {
  std::string out = substitute_placeholders("{a} and {b} then {a}", {{"a", "x"}, {"b", "y"}});
  REQUIRE(out == "x and y then x");
  REQUIRE(substitute_placeholders("{missing}", {{"a", "x"}}) == "{missing}");
}

TEST_CASE("query returns the first valid reply") {
  ScriptedBackend backend({"LABEL: Bedroom\nREASON: bed"});
  LlmConfig cfg;
  Prompt p = build_room_prompt(make_record(1, 4.0, 2.0, 2.0), {{"bed", 1}},
                               Vocabulary::defaults());
  REQUIRE(query(p, backend, cfg, require_label_line) == "LABEL: Bedroom\nREASON: bed");
  REQUIRE(backend.calls == 1);
  REQUIRE(backend.seen[0].size() == 2);
  REQUIRE(backend.seen[0][0].role == "system");
  REQUIRE(backend.seen[0][1].role == "user");
  REQUIRE(backend.seen[0][1].content ==
          p.instruction_text + "\n\n" + p.data_text);
}

TEST_CASE("transport failures retry without corrective turns") {
  ScriptedBackend backend({ScriptedBackend::kUnavailable, ScriptedBackend::kUnavailable,
                           "LABEL: Kitchen\nREASON: stove"});
  LlmConfig cfg;
  cfg.max_retries = 2;
  Prompt p = build_room_prompt(make_record(1, 4.0, 2.0, 2.0), {}, Vocabulary::defaults());
  REQUIRE(query(p, backend, cfg, require_label_line) == "LABEL: Kitchen\nREASON: stove");
  REQUIRE(backend.calls == 3);
  REQUIRE(backend.seen[2].size() == 2);  // no corrective turns added
}

TEST_CASE("an unreachable backend gives up after max_retries + 1 attempts") {
  ScriptedBackend backend({ScriptedBackend::kUnavailable, ScriptedBackend::kUnavailable,
                           ScriptedBackend::kUnavailable, ScriptedBackend::kUnavailable});
  LlmConfig cfg;
  cfg.max_retries = 2;
  Prompt p = build_room_prompt(make_record(1, 4.0, 2.0, 2.0), {}, Vocabulary::defaults());
  REQUIRE_THROWS_AS(query(p, backend, cfg, require_label_line), LlmUnavailable);
  REQUIRE(backend.calls == 3);
}

TEST_CASE("a malformed reply retries with the reply quoted verbatim") {
  const std::string malformed = "I believe this is a bedroom, probably.";
  ScriptedBackend backend({malformed, "LABEL: Bedroom\nREASON: bed"});
  LlmConfig cfg;
  cfg.max_retries = 2;
  Prompt p = build_room_prompt(make_record(1, 4.0, 2.0, 2.0), {{"bed", 1}},
                               Vocabulary::defaults());
  REQUIRE(query(p, backend, cfg, require_label_line) == "LABEL: Bedroom\nREASON: bed");
  REQUIRE(backend.calls == 2);

  const auto& retry = backend.seen[1];
  REQUIRE(retry.size() == 4);
  REQUIRE(retry[2].role == "assistant");
  REQUIRE(retry[2].content == malformed);
  REQUIRE(retry[3].role == "user");
  REQUIRE(retry[3].content.find("did not match the required format") != std::string::npos);
}

TEST_CASE("persistently malformed output fails after exactly max_retries + 1 calls") {
  ScriptedBackend backend({"junk", "junk", "junk", "junk"});
  LlmConfig cfg;
  cfg.max_retries = 2;
  Prompt p = build_room_prompt(make_record(1, 4.0, 2.0, 2.0), {}, Vocabulary::defaults());
  try {
    query(p, backend, cfg, require_label_line);
    FAIL("expected PersistentFormatError");
  } catch (const PersistentFormatError& e) {
    REQUIRE(e.last_reply == "junk");
  }
  REQUIRE(backend.calls == 3);
}

TEST_CASE("stub backend answers without a network and parses") {
  StubBackend backend;
  LlmConfig cfg;
  Prompt p = build_room_prompt(make_record(1, 12.0, 4.0, 3.0), {{"bed", 1}},
                               Vocabulary::defaults());
  std::string reply = query(p, backend, cfg, require_label_line);
  auto [label, reason] = parse_room_response(reply, Vocabulary::defaults());
  REQUIRE(label == "Bedroom");
}

TEST_CASE("transcript log records every call as JSON lines") {
  auto dir = testsupport::fresh_dir("transcript");
  {
    TranscriptLog log(dir + "/t.jsonl");
    ScriptedBackend backend(
        {ScriptedBackend::kUnavailable, "bad", "LABEL: Bedroom\nREASON: bed"});
    LlmConfig cfg;
    cfg.max_retries = 2;
    Prompt p = build_room_prompt(make_record(1, 4.0, 2.0, 2.0), {{"bed", 1}},
                                 Vocabulary::defaults());
    query(p, backend, cfg, require_label_line, &log);
  }
  std::istringstream lines(testsupport::read_file(dir + "/t.jsonl"));
  std::string line;
  std::vector<nlohmann::json> entries;
  while (std::getline(lines, line)) entries.push_back(nlohmann::json::parse(line));
  REQUIRE(entries.size() == 3);
  REQUIRE(entries[0].at("level") == "room");
  REQUIRE(entries[0].contains("error"));
  REQUIRE(entries[1].at("response") == "bad");
  REQUIRE(entries[2].at("response") == "LABEL: Bedroom\nREASON: bed");
  REQUIRE(entries[2].at("request").at("messages").size() == 4);
}

TEST_CASE("vocabulary validation") {
  Vocabulary v;
  REQUIRE_THROWS_AS(v.validate(), ConfigError);
  v.labels = {"Bedroom"};
  REQUIRE_THROWS_AS(v.validate(), ConfigError);
  v.labels = {"Bedroom", "Other"};
  REQUIRE_NOTHROW(v.validate());
  REQUIRE(v.canonical("bedROOM") == std::string("Bedroom"));
  REQUIRE_FALSE(v.canonical("garage").has_value());
}
