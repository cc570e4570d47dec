// selros — semantic room segmentation pipeline.
//
// Subcommands mirror the pipeline stages (segment, interpret, objects,
// query, integrate, evaluate) plus `pipeline` which runs them all. All
// artifacts land under --out with fixed names, so stage runs compose.
//
// Exit codes: 0 success, 2 input/config error, 3 LLM failure.

#include <cstdio>
#include <exception>
#include <functional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "selros/pipeline.hpp"

namespace {

struct CommonFlags {
  std::string config_path;
  std::string map_path;
  std::string out_dir = "out";
  std::string import_segmentation;
  std::string annotations;
  std::string rooms_objects;
  std::string algo = "morphological";
  double min_area = 0.0;
  double max_area = 0.0;
  int erosion_step = 0;
  int max_iterations = 0;
  int adjacency_dilation = 0;
  double max_range = 0.0;
  std::string llm_backend;
  std::string endpoint;
  std::string model;
  std::string api_key;
  int max_retries = -1;
  double timeout = 0.0;
  double temperature = 0.0;
  int parallel = 0;
  std::string template_dir;
  bool log_transcript = false;

  CLI::Option* map_opt = nullptr;
  CLI::Option* out_opt = nullptr;
  CLI::Option* import_opt = nullptr;
  CLI::Option* annotations_opt = nullptr;
  CLI::Option* rooms_objects_opt = nullptr;
  CLI::Option* algo_opt = nullptr;
  CLI::Option* min_area_opt = nullptr;
  CLI::Option* max_area_opt = nullptr;
  CLI::Option* erosion_opt = nullptr;
  CLI::Option* iterations_opt = nullptr;
  CLI::Option* dilation_opt = nullptr;
  CLI::Option* range_opt = nullptr;
  CLI::Option* backend_opt = nullptr;
  CLI::Option* endpoint_opt = nullptr;
  CLI::Option* model_opt = nullptr;
  CLI::Option* api_key_opt = nullptr;
  CLI::Option* retries_opt = nullptr;
  CLI::Option* timeout_opt = nullptr;
  CLI::Option* temperature_opt = nullptr;
  CLI::Option* parallel_opt = nullptr;
  CLI::Option* templates_opt = nullptr;
  CLI::Option* transcript_opt = nullptr;
};

void add_map_flags(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config_path, "JSON config file (flags override it)");
  f.map_opt = cmd->add_option("--map", f.map_path, "occupancy map (PGM P2/P5)");
  f.out_opt = cmd->add_option("--out", f.out_dir, "output directory");
}

void add_segment_flags(CLI::App* cmd, CommonFlags& f) {
  f.algo_opt = cmd->add_option("--algo", f.algo, "segmentation algorithm")
                   ->check(CLI::IsMember({"morphological", "distance"}));
  f.min_area_opt = cmd->add_option("--min-area", f.min_area, "minimum room area (m^2)");
  f.max_area_opt = cmd->add_option("--max-area", f.max_area, "maximum room area (m^2)");
  f.erosion_opt = cmd->add_option("--erosion-step", f.erosion_step, "cells eroded per iteration");
  f.iterations_opt = cmd->add_option("--max-iterations", f.max_iterations, "erosion iteration cap");
  f.import_opt = cmd->add_option("--import-segmentation", f.import_segmentation,
                                 "use this label map instead of segmenting");
}

void add_objects_flags(CLI::App* cmd, CommonFlags& f) {
  f.annotations_opt = cmd->add_option("--annotations", f.annotations, "object annotation JSON");
  f.rooms_objects_opt =
      cmd->add_option("--rooms-objects", f.rooms_objects, "predeclared per-room object lists");
  f.range_opt = cmd->add_option("--max-range", f.max_range, "observation range (m)");
}

void add_llm_flags(CLI::App* cmd, CommonFlags& f) {
  f.backend_opt = cmd->add_option("--llm", f.llm_backend, "LLM backend")
                      ->check(CLI::IsMember({"stub", "http"}));
  f.endpoint_opt = cmd->add_option("--endpoint", f.endpoint, "chat-completion endpoint URL");
  f.model_opt = cmd->add_option("--model", f.model, "model name");
  f.api_key_opt = cmd->add_option("--api-key", f.api_key, "API key");
  f.retries_opt = cmd->add_option("--max-retries", f.max_retries, "LLM retry budget");
  f.timeout_opt = cmd->add_option("--timeout", f.timeout, "HTTP timeout (s)");
  f.temperature_opt = cmd->add_option("--temperature", f.temperature, "sampling temperature");
  f.parallel_opt = cmd->add_option("--parallel", f.parallel, "concurrent room-level queries");
  f.templates_opt = cmd->add_option("--templates", f.template_dir, "prompt template directory");
  f.transcript_opt =
      cmd->add_flag("--log-transcript", f.log_transcript, "append request/response audit log");
}

void add_interpret_flags(CLI::App* cmd, CommonFlags& f) {
  f.dilation_opt =
      cmd->add_option("--adjacency-dilation", f.adjacency_dilation, "adjacency dilation (cells)");
}

// defaults -> environment -> config file -> flags
selros::PipelineConfig build_config(const CommonFlags& f) {
  selros::PipelineConfig cfg;
  selros::apply_env_overrides(cfg);
  if (!f.config_path.empty()) selros::apply_config_file(cfg, f.config_path);

  auto given = [](const CLI::Option* opt) { return opt && opt->count() > 0; };
  if (given(f.map_opt)) cfg.map_path = f.map_path;
  if (given(f.out_opt) || cfg.output_dir.empty()) cfg.output_dir = f.out_dir;
  if (given(f.import_opt)) cfg.import_segmentation = f.import_segmentation;
  if (given(f.annotations_opt)) cfg.annotation_path = f.annotations;
  if (given(f.rooms_objects_opt)) cfg.rooms_objects_path = f.rooms_objects;
  if (given(f.algo_opt)) cfg.segmentation.algorithm = selros::detail::parse_algorithm(f.algo);
  if (given(f.min_area_opt)) cfg.segmentation.min_room_area = f.min_area;
  if (given(f.max_area_opt)) cfg.segmentation.max_room_area = f.max_area;
  if (given(f.erosion_opt)) cfg.segmentation.erosion_step = f.erosion_step;
  if (given(f.iterations_opt)) cfg.segmentation.max_iterations = f.max_iterations;
  if (given(f.dilation_opt)) cfg.adjacency_dilation = f.adjacency_dilation;
  if (given(f.range_opt)) cfg.max_range = f.max_range;
  if (given(f.backend_opt)) cfg.llm.backend = selros::detail::parse_backend(f.llm_backend);
  if (given(f.endpoint_opt)) cfg.llm.endpoint = f.endpoint;
  if (given(f.model_opt)) cfg.llm.model = f.model;
  if (given(f.api_key_opt)) cfg.llm.api_key = f.api_key;
  if (given(f.retries_opt)) cfg.llm.max_retries = f.max_retries;
  if (given(f.timeout_opt)) cfg.llm.timeout_seconds = f.timeout;
  if (given(f.temperature_opt)) cfg.llm.temperature = f.temperature;
  if (given(f.parallel_opt)) cfg.parallel = f.parallel;
  if (given(f.templates_opt)) cfg.template_dir = f.template_dir;
  if (given(f.transcript_opt)) cfg.log_transcript = f.log_transcript;
  return cfg;
}

int run_guarded(const std::function<void()>& body) {
  try {
    body();
    return 0;
  } catch (const selros::LlmUnavailable& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  } catch (const selros::PersistentFormatError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SeLRoS: semantic layering for room segmentation"};
  app.require_subcommand(1);

  CommonFlags seg_f, int_f, obj_f, qry_f, itg_f, pipe_f;

  CLI::App* cmd_segment = app.add_subcommand("segment", "segment an occupancy map into rooms");
  add_map_flags(cmd_segment, seg_f);
  add_segment_flags(cmd_segment, seg_f);

  CLI::App* cmd_interpret =
      app.add_subcommand("interpret", "derive per-room area, shape and adjacency");
  add_map_flags(cmd_interpret, int_f);
  add_interpret_flags(cmd_interpret, int_f);

  CLI::App* cmd_objects =
      app.add_subcommand("objects", "observe annotated objects from room centroids");
  add_map_flags(cmd_objects, obj_f);
  add_objects_flags(cmd_objects, obj_f);

  CLI::App* cmd_query =
      app.add_subcommand("query", "run the two-level LLM query over interpreted rooms");
  add_map_flags(cmd_query, qry_f);
  add_llm_flags(cmd_query, qry_f);

  CLI::App* cmd_integrate =
      app.add_subcommand("integrate", "merge adjacent rooms that share a label");
  add_map_flags(cmd_integrate, itg_f);
  add_interpret_flags(cmd_integrate, itg_f);

  std::string eval_gt, eval_pred, eval_json;
  CLI::App* cmd_evaluate =
      app.add_subcommand("evaluate", "score a segmentation against ground truth");
  cmd_evaluate->add_option("--gt", eval_gt, "ground-truth label map")->required();
  cmd_evaluate->add_option("--pred", eval_pred, "predicted label map")->required();
  cmd_evaluate->add_option("--json", eval_json, "also write a JSON metric report here");

  CLI::App* cmd_pipeline = app.add_subcommand("pipeline", "run every stage end to end");
  add_map_flags(cmd_pipeline, pipe_f);
  add_segment_flags(cmd_pipeline, pipe_f);
  add_interpret_flags(cmd_pipeline, pipe_f);
  add_objects_flags(cmd_pipeline, pipe_f);
  add_llm_flags(cmd_pipeline, pipe_f);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  if (cmd_segment->parsed())
    return run_guarded([&] { selros::run_segment_stage(build_config(seg_f)); });
  if (cmd_interpret->parsed())
    return run_guarded([&] { selros::run_interpret_stage(build_config(int_f)); });
  if (cmd_objects->parsed())
    return run_guarded([&] { selros::run_objects_stage(build_config(obj_f)); });
  if (cmd_query->parsed())
    return run_guarded([&] {
      selros::PipelineConfig cfg = build_config(qry_f);
      auto backend = selros::make_backend(cfg.llm);
      selros::run_query_stage(cfg, *backend);
    });
  if (cmd_integrate->parsed())
    return run_guarded([&] { selros::run_integrate_stage(build_config(itg_f)); });
  if (cmd_evaluate->parsed())
    return run_guarded([&] {
      selros::LabelMap gt = selros::read_label_map(eval_gt).map;
      selros::LabelMap pred = selros::read_label_map(eval_pred).map;
      selros::MetricReport report = selros::evaluate_segmentation(gt, pred);
      std::printf("IoU %.4f  MSIoU %.4f\n", report.mean_iou, report.msiou);
      if (!eval_json.empty()) {
        std::ofstream out(eval_json, std::ios::trunc);
        if (!out) throw selros::IoError("cannot open for writing: " + eval_json);
        out << selros::metric_report_to_json(report).dump(2) << '\n';
      }
    });
  if (cmd_pipeline->parsed())
    return run_guarded([&] { selros::run_pipeline(build_config(pipe_f)); });
  return 2;
}
