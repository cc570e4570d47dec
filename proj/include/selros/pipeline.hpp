#pragma once

#include <atomic>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "selros/errors.hpp"
#include "selros/gridmap.hpp"
#include "selros/http_backend.hpp"
#include "selros/integration.hpp"
#include "selros/interpreter.hpp"
#include "selros/metrics.hpp"
#include "selros/objectmap.hpp"
#include "selros/segmentation.hpp"
#include "selros/semantic.hpp"

namespace selros {

// Fixed artifact names inside the output directory; every stage reads its
// predecessors' files from there, so running the pipeline and running the
// stage subcommands one by one produce the same bytes.
namespace artifacts {
inline constexpr const char* kSegmentationLabels = "segmentation.labels";
inline constexpr const char* kSegmentationPpm = "segmentation.ppm";
inline constexpr const char* kCentroids = "centroids.json";
inline constexpr const char* kRooms = "rooms.json";
inline constexpr const char* kObservations = "observations.json";
inline constexpr const char* kSemantic = "semantic.json";
inline constexpr const char* kImprovedLabels = "improved.labels";
inline constexpr const char* kImprovedPpm = "improved.ppm";
inline constexpr const char* kReport = "report.json";
inline constexpr const char* kTranscript = "transcript.jsonl";
}  // namespace artifacts

struct PipelineConfig {
  std::string map_path;
  std::string annotation_path;      // optional object annotations
  std::string rooms_objects_path;   // optional predeclared per-room lists
  std::string import_segmentation;  // optional: use this label map instead of segmenting
  SegmentationParams segmentation;
  int adjacency_dilation = 1;
  double max_range = 5.0;  // meters
  LlmConfig llm;
  Vocabulary vocabulary = Vocabulary::defaults();
  std::string output_dir;
  int parallel = 4;
  std::string template_dir;  // optional override of the built-in prompt templates
  bool log_transcript = false;

  std::string artifact(const char* name) const {
    return (std::filesystem::path(output_dir) / name).string();
  }

  PromptTemplates templates() const {
    return template_dir.empty() ? PromptTemplates::defaults() : load_templates(template_dir);
  }

  void validate() const {
    segmentation.validate();
    if (adjacency_dilation < 1) throw ConfigError("adjacency_dilation must be >= 1");
    if (max_range <= 0.0) throw ConfigError("max_range must be positive");
    if (parallel < 1) throw ConfigError("parallel must be >= 1");
    llm.validate();
    vocabulary.validate();
  }
};

// ---------------------------------------------------------------------------
// Config file and environment overlays (precedence: flags > file > env > defaults)

// Reads SELROS_LLM_ENDPOINT / SELROS_LLM_API_KEY / SELROS_LLM_MODEL.
inline void apply_env_overrides(PipelineConfig& cfg) {
  if (const char* v = std::getenv("SELROS_LLM_ENDPOINT")) cfg.llm.endpoint = v;
  if (const char* v = std::getenv("SELROS_LLM_API_KEY")) cfg.llm.api_key = v;
  if (const char* v = std::getenv("SELROS_LLM_MODEL")) cfg.llm.model = v;
}

namespace detail {

inline SegAlgorithm parse_algorithm(const std::string& name) {
  if (name == "morphological") return SegAlgorithm::Morphological;
  if (name == "distance") return SegAlgorithm::Distance;
  throw ConfigError("unknown segmentation algorithm '" + name +
                    "' (want morphological or distance)");
}

inline LlmBackendKind parse_backend(const std::string& name) {
  if (name == "stub") return LlmBackendKind::Stub;
  if (name == "http") return LlmBackendKind::Http;
  throw ConfigError("unknown llm backend '" + name + "' (want stub or http)");
}

template <typename T>
void maybe_set(const nlohmann::json& obj, const char* key, T& target) {
  if (obj.contains(key)) target = obj.at(key).get<T>();
}

}  // namespace detail

// Applies a JSON config file on top of `cfg`; only keys present in the file
// change anything.
inline void apply_config_file(PipelineConfig& cfg, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed config JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ConfigError("config file must hold a JSON object");

  detail::maybe_set(doc, "map", cfg.map_path);
  detail::maybe_set(doc, "annotations", cfg.annotation_path);
  detail::maybe_set(doc, "rooms_objects", cfg.rooms_objects_path);
  detail::maybe_set(doc, "import_segmentation", cfg.import_segmentation);
  detail::maybe_set(doc, "adjacency_dilation", cfg.adjacency_dilation);
  detail::maybe_set(doc, "max_range", cfg.max_range);
  detail::maybe_set(doc, "output_dir", cfg.output_dir);
  detail::maybe_set(doc, "parallel", cfg.parallel);
  detail::maybe_set(doc, "template_dir", cfg.template_dir);
  detail::maybe_set(doc, "log_transcript", cfg.log_transcript);
  if (doc.contains("vocabulary")) cfg.vocabulary.labels = doc.at("vocabulary").get<std::vector<std::string>>();

  if (doc.contains("segmentation")) {
    const auto& seg = doc.at("segmentation");
    if (seg.contains("algorithm"))
      cfg.segmentation.algorithm = detail::parse_algorithm(seg.at("algorithm").get<std::string>());
    detail::maybe_set(seg, "min_room_area", cfg.segmentation.min_room_area);
    detail::maybe_set(seg, "max_room_area", cfg.segmentation.max_room_area);
    detail::maybe_set(seg, "erosion_step", cfg.segmentation.erosion_step);
    detail::maybe_set(seg, "max_iterations", cfg.segmentation.max_iterations);
  }
  if (doc.contains("llm")) {
    const auto& llm = doc.at("llm");
    if (llm.contains("backend"))
      cfg.llm.backend = detail::parse_backend(llm.at("backend").get<std::string>());
    detail::maybe_set(llm, "endpoint", cfg.llm.endpoint);
    detail::maybe_set(llm, "model", cfg.llm.model);
    detail::maybe_set(llm, "api_key", cfg.llm.api_key);
    detail::maybe_set(llm, "max_retries", cfg.llm.max_retries);
    detail::maybe_set(llm, "timeout", cfg.llm.timeout_seconds);
    detail::maybe_set(llm, "temperature", cfg.llm.temperature);
  }
}

// ---------------------------------------------------------------------------
// Artifact (de)serialization

inline void save_centroids(const std::vector<std::pair<int, CellCoord>>& centroids,
                           const std::string& path) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& [id, c] : centroids)
    arr.push_back({{"room", id}, {"x", c.x}, {"y", c.y}});
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << nlohmann::json{{"centroids", arr}}.dump(2) << '\n';
}

inline std::vector<std::pair<int, CellCoord>> load_centroids(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open centroids file: " + path);
  nlohmann::json doc;
  in >> doc;
  std::vector<std::pair<int, CellCoord>> centroids;
  for (const auto& entry : doc.at("centroids"))
    centroids.emplace_back(entry.at("room").get<int>(),
                           CellCoord{entry.at("x").get<int>(), entry.at("y").get<int>()});
  return centroids;
}

inline nlohmann::json room_record_to_json(const RoomRecord& r) {
  return nlohmann::json{
      {"id", r.id},
      {"area_cells", r.area_cells},
      {"area_m2", r.area_m2},
      {"bbox", {{"min_x", r.min_x}, {"min_y", r.min_y}, {"max_x", r.max_x}, {"max_y", r.max_y}}},
      {"length_m", r.length_m},
      {"width_m", r.width_m},
      {"centroid", {{"x", r.centroid.x}, {"y", r.centroid.y}}},
      {"adjacent", r.adjacent}};
}

inline RoomRecord room_record_from_json(const nlohmann::json& j) {
  RoomRecord r;
  r.id = j.at("id").get<int>();
  r.area_cells = j.at("area_cells").get<long>();
  r.area_m2 = j.at("area_m2").get<double>();
  r.min_x = j.at("bbox").at("min_x").get<int>();
  r.min_y = j.at("bbox").at("min_y").get<int>();
  r.max_x = j.at("bbox").at("max_x").get<int>();
  r.max_y = j.at("bbox").at("max_y").get<int>();
  r.length_m = j.at("length_m").get<double>();
  r.width_m = j.at("width_m").get<double>();
  r.centroid = CellCoord{j.at("centroid").at("x").get<int>(), j.at("centroid").at("y").get<int>()};
  r.adjacent = j.at("adjacent").get<std::vector<int>>();
  return r;
}

inline void save_rooms(const std::vector<RoomRecord>& records, const std::string& path) {
  nlohmann::json arr = nlohmann::json::array();
  for (const RoomRecord& r : records) arr.push_back(room_record_to_json(r));
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << nlohmann::json{{"rooms", arr}}.dump(2) << '\n';
}

inline std::vector<RoomRecord> load_rooms(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open rooms file: " + path);
  nlohmann::json doc;
  in >> doc;
  std::vector<RoomRecord> records;
  for (const auto& entry : doc.at("rooms")) records.push_back(room_record_from_json(entry));
  return records;
}

// Observations persist in the same shape merge_predeclared ingests:
// {"rooms":{"<id>":["name", ...]}} with multiset entries repeated.
inline void save_observations(const ObservationSet& observations, const std::string& path) {
  nlohmann::json rooms = nlohmann::json::object();
  for (const auto& [id, objects] : observations) {
    nlohmann::json names = nlohmann::json::array();
    for (const auto& [name, count] : objects)
      for (int i = 0; i < count; ++i) names.push_back(name);
    rooms[std::to_string(id)] = names;
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << nlohmann::json{{"rooms", rooms}}.dump(2) << '\n';
}

inline ObservationSet load_observations(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open observations file: " + path);
  nlohmann::json doc;
  in >> doc;
  ObservationSet observations;
  for (const auto& [key, names] : doc.at("rooms").items()) {
    int id = std::stoi(key);
    observations[id];
    for (const auto& name : names) ++observations[id][name.get<std::string>()];
  }
  return observations;
}

// The semantic table: final label per room plus the room-level candidate and
// its reasoning.
struct SemanticTable {
  std::vector<SemanticAssignment> final_assignments;  // label = final, reasoning = ""
  std::vector<SemanticAssignment> candidates;         // room-level label + reasoning
};

inline void save_semantic(const SemanticTable& table, const std::string& path) {
  std::map<int, const SemanticAssignment*> candidate_of;
  for (const SemanticAssignment& c : table.candidates) candidate_of[c.room_id] = &c;
  nlohmann::json arr = nlohmann::json::array();
  for (const SemanticAssignment& a : table.final_assignments) {
    auto it = candidate_of.find(a.room_id);
    arr.push_back({{"id", a.room_id},
                   {"label", a.label},
                   {"candidate", it != candidate_of.end() ? it->second->label : a.label},
                   {"reasoning", it != candidate_of.end() ? it->second->reasoning : ""}});
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << nlohmann::json{{"rooms", arr}}.dump(2) << '\n';
}

inline SemanticTable load_semantic(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open semantic file: " + path);
  nlohmann::json doc;
  in >> doc;
  SemanticTable table;
  for (const auto& entry : doc.at("rooms")) {
    int id = entry.at("id").get<int>();
    table.final_assignments.push_back(
        SemanticAssignment{id, entry.at("label").get<std::string>(), ""});
    table.candidates.push_back(SemanticAssignment{id, entry.at("candidate").get<std::string>(),
                                                  entry.at("reasoning").get<std::string>()});
  }
  return table;
}

// ---------------------------------------------------------------------------
// Hierarchical query driver

// Runs the room-level queries (fanned out over at most `parallel` threads),
// aggregates the candidates into the environment-level query, and parses the
// final assignment. Results are keyed by room id, so completion order never
// shows in the output.
inline SemanticTable run_hierarchical_query(const std::vector<RoomRecord>& records,
                                            const ObservationSet& observations,
                                            const Vocabulary& vocabulary,
                                            const PromptTemplates& templates,
                                            LlmBackend& backend, const LlmConfig& config,
                                            int parallel, TranscriptLog* transcript = nullptr) {
  vocabulary.validate();
  config.validate();

  static const ObjectCounts kNoObjects;
  auto objects_of = [&](int id) -> const ObjectCounts& {
    auto it = observations.find(id);
    return it != observations.end() ? it->second : kNoObjects;
  };

  auto room_validator = [&vocabulary](const std::string& reply) -> std::optional<std::string> {
    try {
      parse_room_response(reply, vocabulary);
      return std::nullopt;
    } catch (const FormatError& e) {
      return std::string(e.what());
    }
  };

  std::vector<SemanticAssignment> candidates(records.size());
  std::exception_ptr failure;
  std::mutex failure_mu;
  std::atomic<std::size_t> cursor{0};
  auto worker = [&]() {
    while (true) {
      std::size_t i = cursor.fetch_add(1);
      if (i >= records.size()) return;
      {
        std::lock_guard<std::mutex> lock(failure_mu);
        if (failure) return;
      }
      try {
        Prompt prompt = build_room_prompt(records[i], objects_of(records[i].id), vocabulary,
                                          templates);
        std::string reply = query(prompt, backend, config, room_validator, transcript);
        auto [label, reasoning] = parse_room_response(reply, vocabulary);
        candidates[i] = SemanticAssignment{records[i].id, label, reasoning};
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mu);
        if (!failure) failure = std::current_exception();
        return;
      }
    }
  };

  const int thread_count = std::max(1, std::min<int>(parallel, static_cast<int>(records.size())));
  std::vector<std::thread> threads;
  for (int t = 0; t < thread_count; ++t) threads.emplace_back(worker);
  for (std::thread& t : threads) t.join();
  if (failure) std::rethrow_exception(failure);

  std::vector<int> room_ids;
  for (const RoomRecord& r : records) room_ids.push_back(r.id);

  Prompt env_prompt =
      build_environment_prompt(candidates, records, observations, vocabulary, templates);
  auto env_validator = [&](const std::string& reply) -> std::optional<std::string> {
    try {
      parse_environment_response(reply, room_ids, vocabulary);
      return std::nullopt;
    } catch (const FormatError& e) {
      return std::string(e.what());
    }
  };
  std::string env_reply = query(env_prompt, backend, config, env_validator, transcript);

  SemanticTable table;
  table.final_assignments = parse_environment_response(env_reply, room_ids, vocabulary);
  table.candidates = std::move(candidates);
  return table;
}

// ---------------------------------------------------------------------------
// Pipeline stages. Each one loads its inputs from the artifact files of the
// previous stage and persists its own outputs.

inline void run_segment_stage(const PipelineConfig& cfg) {
  cfg.validate();
  std::filesystem::create_directories(cfg.output_dir);
  const OccupancyGrid grid = read_occupancy(cfg.map_path);

  LabelMap map;
  if (cfg.import_segmentation.empty()) {
    map = segment(grid, cfg.segmentation);
  } else {
    LabelMapReadResult imported = read_label_map(cfg.import_segmentation);
    if (imported.map.width != grid.width || imported.map.height != grid.height)
      throw ShapeError("imported segmentation dimensions do not match the map");
    map = std::move(imported.map);
  }

  write_label_map(map, cfg.artifact(artifacts::kSegmentationLabels));
  export_ppm(map, cfg.artifact(artifacts::kSegmentationPpm));
  save_centroids(room_centroids(map, grid), cfg.artifact(artifacts::kCentroids));
}

inline std::vector<RoomRecord> run_interpret_stage(const PipelineConfig& cfg) {
  cfg.validate();
  const OccupancyGrid grid = read_occupancy(cfg.map_path);
  const LabelMap map = read_label_map(cfg.artifact(artifacts::kSegmentationLabels)).map;
  std::vector<RoomRecord> records = interpret(map, grid, cfg.adjacency_dilation);
  save_rooms(records, cfg.artifact(artifacts::kRooms));
  return records;
}

inline ObservationSet run_objects_stage(const PipelineConfig& cfg) {
  cfg.validate();
  const OccupancyGrid grid = read_occupancy(cfg.map_path);
  const LabelMap map = read_label_map(cfg.artifact(artifacts::kSegmentationLabels)).map;
  const auto centroids = load_centroids(cfg.artifact(artifacts::kCentroids));

  std::vector<ObjectAnnotation> annotations;
  if (!cfg.annotation_path.empty())
    annotations = read_annotations(cfg.annotation_path, grid.width, grid.height);
  ObservationSet observations = observe(annotations, map, grid, centroids, cfg.max_range);
  if (!cfg.rooms_objects_path.empty())
    observations = merge_predeclared(std::move(observations), cfg.rooms_objects_path);
  save_observations(observations, cfg.artifact(artifacts::kObservations));
  return observations;
}

inline SemanticTable run_query_stage(const PipelineConfig& cfg, LlmBackend& backend) {
  cfg.validate();
  const std::vector<RoomRecord> records = load_rooms(cfg.artifact(artifacts::kRooms));
  const ObservationSet observations = load_observations(cfg.artifact(artifacts::kObservations));

  std::unique_ptr<TranscriptLog> transcript;
  if (cfg.log_transcript)
    transcript = std::make_unique<TranscriptLog>(cfg.artifact(artifacts::kTranscript));

  SemanticTable table =
      run_hierarchical_query(records, observations, cfg.vocabulary, cfg.templates(), backend,
                             cfg.llm, cfg.parallel, transcript.get());
  save_semantic(table, cfg.artifact(artifacts::kSemantic));
  return table;
}

inline IntegrationResult run_integrate_stage(const PipelineConfig& cfg) {
  cfg.validate();
  const LabelMap map = read_label_map(cfg.artifact(artifacts::kSegmentationLabels)).map;
  const std::vector<RoomRecord> records = load_rooms(cfg.artifact(artifacts::kRooms));
  const SemanticTable table = load_semantic(cfg.artifact(artifacts::kSemantic));

  IntegrationResult result = integrate(map, records, table.final_assignments);
  write_label_map(result.improved_map, cfg.artifact(artifacts::kImprovedLabels));
  export_ppm(result.improved_map, cfg.artifact(artifacts::kImprovedPpm));
  emit_report(result, records, cfg.artifact(artifacts::kReport), cfg.adjacency_dilation);
  return result;
}

// Algorithm 1 end to end: segment -> interpret -> observe -> room-level
// queries -> environment-level query -> integrate. When `backend` is null
// one is built from the LLM config.
inline IntegrationResult run_pipeline(const PipelineConfig& cfg, LlmBackend* backend = nullptr) {
  cfg.validate();
  std::unique_ptr<LlmBackend> owned;
  if (!backend) {
    owned = make_backend(cfg.llm);
    backend = owned.get();
  }
  run_segment_stage(cfg);
  run_interpret_stage(cfg);
  run_objects_stage(cfg);
  run_query_stage(cfg, *backend);
  return run_integrate_stage(cfg);
}

}  // namespace selros
