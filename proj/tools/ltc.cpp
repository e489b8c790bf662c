#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "ltc/checkpoint.hpp"
#include "ltc/error.hpp"
#include "ltc/pipeline.hpp"
#include "ltc/scenario.hpp"
#include "ltc/svg.hpp"

using namespace ltc;
namespace fs = std::filesystem;

namespace {

// Files and directories created by a command; removed unless committed.
class Outputs {
 public:
  explicit Outputs(fs::path dir) : dir_(std::move(dir)) {
    if (!fs::exists(dir_)) {
      fs::create_directories(dir_);
      created_dir_ = true;
    }
  }
  Outputs(const Outputs&) = delete;
  Outputs& operator=(const Outputs&) = delete;
  ~Outputs() {
    if (committed_) return;
    std::error_code ec;
    for (const fs::path& p : created_) fs::remove_all(p, ec);
    if (created_dir_) fs::remove_all(dir_, ec);
  }

  fs::path path(const std::string& name) {
    const fs::path p = dir_ / name;
    created_.push_back(p);
    return p;
  }
  void write(const std::string& name, const std::string& text) {
    const fs::path p = path(name);
    std::ofstream out(p, std::ios::binary);
    out << text;
    if (!out) throw std::runtime_error("cannot write " + p.string());
    std::cout << "wrote " << p.string() << "\n";
  }
  void write(const std::string& name, const Bytes& bytes) {
    write(name, std::string(bytes.begin(), bytes.end()));
  }
  void commit() { committed_ = true; }

 private:
  fs::path dir_;
  std::vector<fs::path> created_;
  bool created_dir_ = false;
  bool committed_ = false;
};

struct Common {
  std::string scenario;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string checkpoint;
  std::string network;

  Scenario load() const {
    Scenario sc = load_scenario(scenario);
    if (seed) sc.apply_seed(*seed);
    if (network == "constrained") sc.network = NetworkConfig::constrained();
    else if (network == "rich") sc.network = NetworkConfig::rich();
    else if (!network.empty()) throw InvalidInput("unknown network preset '" + network + "'");
    return sc;
  }
  fs::path out_dir() const {
    if (!out.empty()) return out;
    if (const char* env = std::getenv("LTC_OUT_DIR"); env && *env) return env;
    return "ltc_out";
  }
};

void add_common(CLI::App* cmd, Common& c, bool with_checkpoint) {
  cmd->add_option("--scenario", c.scenario, "Scenario file")->required()->check(CLI::ExistingFile);
  cmd->add_option("--seed", c.seed, "Reseed the main scene, student and training");
  cmd->add_option("--out", c.out, "Output directory (default: $LTC_OUT_DIR, else ./ltc_out)");
  cmd->add_option("--network", c.network, "Override the network preset: constrained | rich");
  if (with_checkpoint)
    cmd->add_option("--checkpoint", c.checkpoint, "Pretrained student (.ltck); pretrained on the fly if omitted");
}

std::string fmt(double v) {
  std::ostringstream o;
  o << std::setprecision(10) << v;
  return o.str();
}

Bytes read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  return Bytes((std::istreambuf_iterator<char>(in)), {});
}

bool needs_student(const std::string& mode) { return mode.rfind("ltc", 0) == 0; }

StudentNet pretrained_student(const Scenario& sc, TrainReport* report = nullptr) {
  StudentNet s(sc.student_seed, sc.conv_layers);
  TrainReport r = pretrain(s, sc.pretraining_scenes(), sc.pretrain);
  if (report) *report = std::move(r);
  return s;
}

StudentNet obtain_student(const Common& c, const Scenario& sc) {
  if (!c.checkpoint.empty()) {
    StudentNet s = student_from_checkpoint(load_checkpoint(read_file(c.checkpoint)));
    if (s.conv_layers() != sc.conv_layers)
      throw InvalidInput("checkpoint has " + std::to_string(s.conv_layers()) + " conv layers, scenario asks for " +
                         std::to_string(sc.conv_layers));
    return s;
  }
  std::cerr << "no --checkpoint given; pretraining from the scenario\n";
  return pretrained_student(sc);
}

// Resolves `th = auto` against the scenario's calibration footage.
void calibrate_if_needed(Scenario& sc, const StudentNet& student, const std::string& mode) {
  if (!sc.calibrate_th || (mode != "ltc" && mode != "ltc-temporal")) return;
  sc.pipeline.th = sc.calibrated_threshold(student);
  std::cerr << "calibrated th = " << fmt(sc.pipeline.th) << "\n";
}

struct ModeRun {
  RunMetrics metrics;
  std::optional<OracleResult> oracle;
};

ModeRun run_mode(const Scenario& sc, const std::string& mode, const StudentNet* student, const RunOptions& opts) {
  const SceneConfig& scene = sc.scene();
  const PipelineConfig& p = sc.pipeline;
  ModeRun r;
  if (mode == "ltc") r.metrics = run_ltc(scene, *student, sc.network, p, LtcMode::ltc, opts);
  else if (mode == "ltc-spatial") r.metrics = run_ltc(scene, *student, sc.network, p, LtcMode::spatial_only, opts);
  else if (mode == "ltc-temporal") r.metrics = run_ltc(scene, *student, sc.network, p, LtcMode::temporal_only, opts);
  else if (mode == "dds") r.metrics = run_dds_baseline(scene, sc.network, p, opts);
  else if (mode == "reducto") r.metrics = run_reducto_baseline(scene, sc.network, p, opts);
  else if (mode == "uniform") r.metrics = run_uniform_baseline(scene, sc.network, p, p.uniform_r, opts);
  else if (mode == "oracle") {
    r.oracle = run_oracle(scene, sc.network, p, opts);
    r.metrics = r.oracle->metrics;
  } else {
    throw InvalidInput("unknown mode '" + mode + "'");
  }
  return r;
}

std::string metrics_csv(const RunMetrics& m) {
  std::ostringstream o;
  write_metrics_csv(o, m);
  return o.str();
}

std::string summary_csv(const std::vector<RunMetrics>& runs) {
  std::ostringstream o;
  write_summary_csv(o, runs);
  return o.str();
}

std::string updates_csv(const RunMetrics& m) {
  std::ostringstream o;
  o << "run_id,batch,scope,bytes,hit_rate_before,hit_rate_after_extension,hit_rate_after\n";
  for (const UpdateRecord& u : m.updates)
    o << m.run_id << ',' << u.batch << ',' << (u.scope == CheckpointScope::full ? "full" : "extension_only") << ','
      << u.bytes << ',' << fmt(u.hit_rate_before) << ',' << fmt(u.hit_rate_after_extension) << ','
      << fmt(u.hit_rate_after) << '\n';
  return o.str();
}

std::string hit_rates_csv(const RunMetrics& m) {
  std::ostringstream o;
  o << "run_id,batch,hit_rate\n";
  for (std::size_t b = 0; b < m.hit_rates.size(); ++b) o << m.run_id << ',' << b << ',' << fmt(m.hit_rates[b]) << '\n';
  return o.str();
}

std::string cdf_csv(const OracleResult& r) {
  std::ostringstream o;
  o << "series,x,p\n";
  for (std::size_t k = 0; k < r.region_cdf.x.size(); ++k)
    o << "object_region_fraction," << fmt(r.region_cdf.x[k]) << ',' << fmt(r.region_cdf.p[k]) << '\n';
  for (std::size_t k = 0; k < r.useful_cdf.x.size(); ++k)
    o << "useful_frame_fraction," << fmt(r.useful_cdf.x[k]) << ',' << fmt(r.useful_cdf.p[k]) << '\n';
  return o.str();
}

svg::Series cdf_series(const std::string& name, const Cdf& c) {
  svg::Series s{name, {}};
  double prev = 0;
  for (std::size_t k = 0; k < c.x.size(); ++k) {
    s.points.push_back({c.x[k], prev});
    s.points.push_back({c.x[k], c.p[k]});
    prev = c.p[k];
  }
  return s;
}

// Bandwidth-F1 plot (one series per label) next to mean-delay bars.
std::string tradeoff_svg(const std::string& title, const std::vector<std::pair<std::string, std::vector<RunMetrics>>>& groups) {
  svg::LinePlot plot{title + ": F1 vs bandwidth", "normalized bandwidth", "mean F1", {}};
  svg::BarChart bars{title + ": mean response delay", "delay (s)", {}};
  for (const auto& [label, runs] : groups) {
    svg::Series s{label, {}};
    for (const RunMetrics& m : runs) {
      s.points.push_back({m.normalized_bandwidth(), m.mean_f1()});
      bars.bars.push_back({runs.size() == 1 ? label : m.run_id, m.mean_delay()});
    }
    plot.series.push_back(std::move(s));
  }
  return svg::combine({svg::render(plot), svg::render(bars)});
}

void print_summary(const RunMetrics& m) {
  std::cout << m.run_id << ": mean F1 " << fmt(m.mean_f1()) << ", normalized bandwidth " << fmt(m.normalized_bandwidth())
            << ", mean delay " << fmt(m.mean_delay()) << " s, filtered " << fmt(m.filtered_fraction());
  if (!m.updates.empty())
    std::cout << ", updates " << m.extension_updates() << " extension / " << m.full_updates() << " full";
  std::cout << "\n";
}

std::vector<std::string> split_list(const std::vector<std::string>& items) {
  std::vector<std::string> out;
  for (const std::string& item : items) {
    std::stringstream ss(item);
    std::string part;
    while (std::getline(ss, part, ','))
      if (!part.empty()) out.push_back(part);
  }
  return out;
}

int cmd_pretrain(const Common& c, const std::string& name) {
  const Scenario sc = c.load();
  Outputs out(c.out_dir());
  const auto t0 = std::chrono::steady_clock::now();
  TrainReport report;
  const StudentNet s = pretrained_student(sc, &report);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  out.write(name, save_checkpoint(s, CheckpointScope::full));
  std::ostringstream loss;
  loss << "epoch,loss\n";
  for (std::size_t e = 0; e < report.loss_trace.size(); ++e) loss << e + 1 << ',' << fmt(report.loss_trace[e]) << '\n';
  out.write(fs::path(name).stem().string() + "_loss.csv", loss.str());
  const RegionScore held = evaluate_regions(s, heldout_dataset(sc.pretraining_scenes(), sc.pretrain));
  std::cout << "trained " << report.loss_trace.size() << " epochs in " << fmt(secs) << " s\n"
            << "held-out regions: accuracy " << fmt(held.accuracy) << ", recall " << fmt(held.recall)
            << ", precision " << fmt(held.precision) << " (" << held.positives << " positive, " << held.negatives
            << " negative)\n";
  out.commit();
  return 0;
}

int cmd_run(const Common& c, std::string mode) {
  Scenario sc = c.load();
  if (mode.empty()) mode = sc.mode;
  Outputs out(c.out_dir());
  std::optional<StudentNet> student;
  if (needs_student(mode)) {
    student = obtain_student(c, sc);
    calibrate_if_needed(sc, *student, mode);
  }
  RunOptions opts{mode, out.path(mode + "_trace").string()};
  const ModeRun r = run_mode(sc, mode, student ? &*student : nullptr, opts);
  std::cout << "wrote " << opts.trace_dir << "/\n";
  out.write(mode + "_metrics.csv", metrics_csv(r.metrics));
  out.write(mode + "_summary.csv", summary_csv({r.metrics}));
  if (needs_student(mode)) {
    out.write(mode + "_hit_rates.csv", hit_rates_csv(r.metrics));
    out.write(mode + "_updates.csv", updates_csv(r.metrics));
  }
  if (r.oracle) {
    out.write("oracle_cdf.csv", cdf_csv(*r.oracle));
    svg::LinePlot plot{"Oracle redundancy CDFs", "fraction", "CDF",
                       {cdf_series("object-region fraction per frame", r.oracle->region_cdf),
                        cdf_series("useful-frame fraction per batch", r.oracle->useful_cdf)}};
    out.write("oracle_cdf.svg", svg::render(plot));
  }
  print_summary(r.metrics);
  out.commit();
  return 0;
}

int cmd_compare(const Common& c, const std::vector<std::string>& mode_args) {
  Scenario sc = c.load();
  std::vector<std::string> modes;
  for (const std::string& m : split_list(mode_args))
    if (std::find(modes.begin(), modes.end(), m) == modes.end()) modes.push_back(m);
  if (modes.empty()) throw InvalidInput("compare: no modes given");
  for (const std::string& m : modes)
    if (std::find(run_modes().begin(), run_modes().end(), m) == run_modes().end())
      throw InvalidInput("compare: unknown mode '" + m + "'");
  Outputs out(c.out_dir());
  std::optional<StudentNet> student;
  if (std::any_of(modes.begin(), modes.end(), needs_student)) {
    student = obtain_student(c, sc);
    calibrate_if_needed(sc, *student, "ltc");
  }
  std::vector<RunMetrics> runs;
  std::vector<std::pair<std::string, std::vector<RunMetrics>>> groups;
  std::string per_frame;
  for (const std::string& mode : modes) {
    const ModeRun r = run_mode(sc, mode, student ? &*student : nullptr, RunOptions{mode, ""});
    print_summary(r.metrics);
    std::ostringstream o;
    write_metrics_csv(o, r.metrics, runs.empty());
    per_frame += o.str();
    runs.push_back(r.metrics);
    groups.push_back({mode, {r.metrics}});
  }
  out.write("compare_frames.csv", per_frame);
  out.write("compare.csv", summary_csv(runs));
  out.write("compare.svg", tradeoff_svg("compare", groups));
  out.commit();
  return 0;
}

int cmd_sweep(const Common& c, const std::string& param, const std::vector<std::string>& value_args, std::string mode) {
  const Scenario base = c.load();
  if (mode.empty()) mode = base.mode;
  const std::vector<std::string> values = split_list(value_args);
  if (values.size() < 2) throw InvalidInput("sweep: give at least two values");
  if (param != "th" && param != "r" && param != "L" && param != "conv_layers")
    throw InvalidInput("sweep: parameter must be th, r, L or conv_layers");
  Outputs out(c.out_dir());
  std::optional<StudentNet> shared;
  if (needs_student(mode) && param != "conv_layers") shared = obtain_student(c, base);

  std::vector<RunMetrics> runs;
  std::vector<double> fps;
  for (const std::string& text : values) {
    Scenario sc = base;
    double v = 0;
    try {
      std::size_t used = 0;
      v = std::stod(text, &used);
      if (used != text.size()) throw std::invalid_argument(text);
    } catch (const std::exception&) {
      throw InvalidInput("sweep: value '" + text + "' is not a number");
    }
    if (param == "th") {
      sc.pipeline.th = v;
      sc.calibrate_th = false;
    } else if (param == "r") {
      sc.pipeline.r = static_cast<int>(v);
    } else if (param == "L") {
      for (auto& [name, scene] : sc.scenes) scene.regions_per_axis = static_cast<int>(v);
    } else {
      sc.conv_layers = static_cast<int>(v);
    }
    sc.validate();
    std::optional<StudentNet> student = shared;
    if (needs_student(mode) && !student) {
      std::cerr << "pretraining a student with " << sc.conv_layers << " conv layers\n";
      student = pretrained_student(sc);
    }
    if (student) calibrate_if_needed(sc, *student, mode);
    const std::string id = param + "=" + text;
    ModeRun r = run_mode(sc, mode, student ? &*student : nullptr, RunOptions{id, ""});
    print_summary(r.metrics);
    runs.push_back(std::move(r.metrics));
    const int L = sc.scene().regions_per_axis;
    fps.push_back(1.0 / (static_cast<double>(L) * L * source_region_time(sc.network, sc.conv_layers)));
  }

  std::ostringstream csv;
  std::ostringstream summary;
  write_summary_csv(summary, runs);
  std::string line;
  std::istringstream rows(summary.str());
  std::getline(rows, line);
  csv << "param,value," << line << ",student_fps\n";
  for (std::size_t k = 0; std::getline(rows, line); ++k)
    csv << param << ',' << values[k] << ',' << line << ',' << fmt(fps[k]) << '\n';
  out.write("sweep_" + param + ".csv", csv.str());
  out.write("sweep_" + param + ".svg", tradeoff_svg("sweep " + param, {{mode, runs}}));
  out.commit();
  return 0;
}

int cmd_calibrate(const Common& c, int points) {
  const Scenario sc = c.load();
  Outputs out(c.out_dir());
  const StudentNet s = obtain_student(c, sc);
  const auto batches = calibration_batches(sc.calibration_frames(), s, sc.scene().regions_per_axis);
  const double th = calibrate_threshold(batches, sc.calibration_target_f1, points);
  std::vector<double> grid;
  std::vector<double> all;
  for (const auto& b : batches) all.insert(all.end(), b.diff.begin(), b.diff.end());
  std::sort(all.begin(), all.end());
  for (int k = 1; k <= points; ++k) grid.push_back(all[std::min(all.size() - 1, all.size() * k / points)]);
  grid.push_back(th);
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  grid.erase(std::remove_if(grid.begin(), grid.end(), [](double t) { return !(t > 0); }), grid.end());
  std::ostringstream csv;
  csv << "th,mean_f1,filtered_fraction\n";
  svg::Series f1{"mean F1", {}}, filtered{"filtered fraction", {}};
  for (const CalibrationPoint& p : threshold_sweep(batches, grid)) {
    csv << fmt(p.th) << ',' << fmt(p.mean_f1) << ',' << fmt(p.filtered_fraction) << '\n';
    f1.points.push_back({p.th, p.mean_f1});
    filtered.points.push_back({p.th, p.filtered_fraction});
  }
  out.write("calibration.csv", csv.str());
  out.write("calibration.svg", svg::render(svg::LinePlot{"Threshold calibration", "th", "value", {f1, filtered}}));
  std::cout << "th = " << fmt(th) << " (target mean F1 " << fmt(sc.calibration_target_f1) << ")\n";
  out.commit();
  return 0;
}

int cmd_export_frames(const Common& c, const std::string& scene_name, int first, int count) {
  const Scenario sc = c.load();
  const SceneConfig* scene = &sc.scene();
  if (!scene_name.empty()) {
    const auto it = sc.scenes.find(scene_name);
    if (it == sc.scenes.end()) throw InvalidInput("no scene named '" + scene_name + "'");
    scene = &it->second;
  }
  if (first < 0 || count < 1) throw InvalidInput("export-frames: need --first >= 0 and --count >= 1");
  Outputs out(c.out_dir());
  std::ostringstream boxes;
  boxes << "frame,id,x,y,w,h\n";
  for (const LabeledFrame& f : generate_batch(*scene, first, count)) {
    char name[32];
    std::snprintf(name, sizeof name, "frame_%05d.ppm", f.frame.index);
    write_ppm(out.path(name).string(), f.frame.pixels);
    for (const BoundingBox& b : f.truth)
      boxes << f.frame.index << ',' << b.id << ',' << fmt(b.x) << ',' << fmt(b.y) << ',' << fmt(b.w) << ','
            << fmt(b.h) << '\n';
  }
  std::cout << "wrote " << count << " frames\n";
  out.write("boxes.csv", boxes.str());
  out.commit();
  return 0;
}

int cmd_feature_compare(const Common& c, int count) {
  const Scenario sc = c.load();
  if (count < 2) throw InvalidInput("feature-compare: need --count >= 2");
  Outputs out(c.out_dir());
  const StudentNet s = obtain_student(c, sc);
  const auto frames = generate_batch(sc.scene(), 0, count);
  const auto series = feature_compare(frames, s, sc.scene().regions_per_axis,
                                      {FeatureKind::encoder, FeatureKind::raw_pixel, FeatureKind::edge_count});
  std::ostringstream csv;
  csv << "frame";
  for (const auto& d : series) csv << ',' << to_string(d.kind);
  csv << '\n';
  for (std::size_t k = 0; k + 1 < frames.size(); ++k) {
    csv << k + 1;
    for (const auto& d : series) csv << ',' << fmt(d.values[k]);
    csv << '\n';
  }
  // Each series scaled to its maximum so the shapes are comparable.
  svg::LinePlot plot{"Consecutive-frame difference", "frame", "difference / max", {}};
  for (const auto& d : series) {
    const double hi = *std::max_element(d.values.begin(), d.values.end());
    svg::Series line{to_string(d.kind), {}};
    for (std::size_t k = 0; k < d.values.size(); ++k)
      line.points.push_back({static_cast<double>(k + 1), hi > 0 ? d.values[k] / hi : 0.0});
    plot.series.push_back(std::move(line));
  }
  out.write("feature_compare.csv", csv.str());
  out.write("feature_compare.svg", svg::render(plot));
  out.commit();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Semantic video compression simulator"};
  app.require_subcommand(1);
  Common common;
  int status = 0;

  std::string checkpoint_name = "student.ltck";
  auto* pre = app.add_subcommand("pretrain", "Pretrain the student on the scenario's historical scenes");
  add_common(pre, common, false);
  pre->add_option("--name", checkpoint_name, "Checkpoint file name inside --out");
  pre->callback([&] { status = cmd_pretrain(common, checkpoint_name); });

  std::string mode;
  auto* run = app.add_subcommand("run", "Run one mode and write per-frame metrics and the message trace");
  add_common(run, common, true);
  run->add_option("--mode", mode, "ltc | ltc-spatial | ltc-temporal | dds | reducto | uniform | oracle");
  run->callback([&] { status = cmd_run(common, mode); });

  std::string param;
  std::vector<std::string> values;
  auto* sweep = app.add_subcommand("sweep", "Run one mode across values of th, r, L or conv_layers");
  add_common(sweep, common, true);
  sweep->add_option("--param", param, "th | r | L | conv_layers")->required();
  sweep->add_option("--values", values, "Values, space or comma separated")->required();
  sweep->add_option("--mode", mode, "Mode to sweep (default: scenario mode)");
  sweep->callback([&] { status = cmd_sweep(common, param, values, mode); });

  std::vector<std::string> modes{"ltc", "dds", "reducto", "uniform"};
  auto* compare = app.add_subcommand("compare", "Run several modes on the same scenario");
  add_common(compare, common, true);
  compare->add_option("--modes", modes, "Modes, space or comma separated");
  compare->callback([&] { status = cmd_compare(common, modes); });

  int points = 40;
  auto* cal = app.add_subcommand("calibrate", "Sweep the temporal threshold on calibration footage");
  add_common(cal, common, true);
  cal->add_option("--points", points, "Candidate thresholds")->check(CLI::Range(2, 10000));
  cal->callback([&] { status = cmd_calibrate(common, points); });

  std::string scene_name;
  int first = 0, count = 30;
  auto* exp = app.add_subcommand("export-frames", "Write scene frames as PPM images with their boxes");
  add_common(exp, common, false);
  exp->add_option("--scene", scene_name, "Scene name (default: the pipeline scene)");
  exp->add_option("--first", first, "First frame index");
  exp->add_option("--count", count, "Number of frames");
  exp->callback([&] { status = cmd_export_frames(common, scene_name, first, count); });

  int fc_count = 60;
  auto* fc = app.add_subcommand("feature-compare", "Compare frame-difference features over consecutive frames");
  add_common(fc, common, true);
  fc->add_option("--count", fc_count, "Number of frames");
  fc->callback([&] { status = cmd_feature_compare(common, fc_count); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return status;
}
