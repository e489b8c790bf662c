#include "ltc/scenario.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>

#include "ltc/error.hpp"
#include "ltc/rng.hpp"

namespace ltc {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> words(const std::string& s) {
  std::istringstream in(s);
  std::vector<std::string> out;
  for (std::string w; in >> w;) out.push_back(w);
  return out;
}

class Value {
 public:
  Value(std::string key, std::string text, int line, std::string origin)
      : key_(std::move(key)), text_(std::move(text)), line_(line), origin_(std::move(origin)) {}

  double number() const {
    const auto w = parts(1);
    return to_double(w[0]);
  }
  int integer() const {
    const double v = number();
    if (v != static_cast<double>(static_cast<long long>(v))) fail("expected an integer");
    return static_cast<int>(v);
  }
  std::uint64_t seed() const {
    const auto w = parts(1);
    try {
      std::size_t used = 0;
      const auto v = std::stoull(w[0], &used);
      if (used != w[0].size()) throw std::invalid_argument("");
      return v;
    } catch (const std::exception&) {
      fail("expected a non-negative integer");
    }
  }
  bool boolean() const {
    const auto w = parts(1);
    if (w[0] == "true" || w[0] == "1" || w[0] == "yes") return true;
    if (w[0] == "false" || w[0] == "0" || w[0] == "no") return false;
    fail("expected true or false");
  }
  std::pair<int, int> range() const {
    const auto w = words(text_);
    if (w.size() == 1) {
      const int v = integer();
      return {v, v};
    }
    if (w.size() != 2) fail("expected one or two integers");
    const double a = to_double(w[0]), b = to_double(w[1]);
    if (a != static_cast<int>(a) || b != static_cast<int>(b)) fail("expected integers");
    return {static_cast<int>(a), static_cast<int>(b)};
  }
  Rgb color() const {
    const auto w = parts(3);
    return {static_cast<float>(to_double(w[0])), static_cast<float>(to_double(w[1])),
            static_cast<float>(to_double(w[2]))};
  }
  std::string word() const { return parts(1)[0]; }
  std::vector<std::string> list() const { return words(text_); }
  Texture texture() const {
    try {
      return texture_from_string(word());
    } catch (const std::exception& e) {
      fail(e.what());
    }
  }
  [[noreturn]] void fail(const std::string& what) const { throw ConfigError(key_ + ": " + what, line_, origin_); }

 private:
  std::vector<std::string> parts(std::size_t n) const {
    auto w = words(text_);
    if (w.size() != n) fail("expected " + std::to_string(n) + " value(s), got " + std::to_string(w.size()));
    return w;
  }
  double to_double(const std::string& s) const {
    try {
      std::size_t used = 0;
      const double v = std::stod(s, &used);
      if (used != s.size()) throw std::invalid_argument("");
      return v;
    } catch (const std::exception&) {
      fail("'" + s + "' is not a number");
    }
  }
  std::string key_, text_;
  int line_;
  std::string origin_;
};

struct Line {
  std::string origin;
  int number;
  std::string text;
};

void read_lines(std::istream& in, const std::string& origin, const std::filesystem::path& base, int depth,
                std::vector<Line>& out) {
  if (depth > 8) throw ConfigError("includes nested too deeply", 0, origin);
  std::string raw;
  for (int n = 1; std::getline(in, raw); ++n) {
    const auto hash = raw.find('#');
    const std::string text = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (text.empty()) continue;
    if (text.rfind("include", 0) == 0 && text.size() > 7 && (text[7] == ' ' || text[7] == '\t')) {
      const std::string rel = trim(text.substr(8));
      const std::filesystem::path path = base / rel;
      std::ifstream sub(path);
      if (!sub) throw ConfigError("cannot open included file '" + rel + "'", n, origin);
      read_lines(sub, path.filename().string(), path.parent_path(), depth + 1, out);
      continue;
    }
    out.push_back({origin, n, text});
  }
}

using Setter = std::function<void(const Value&)>;
using Table = std::map<std::string, Setter>;

Table background_keys(BackgroundSpec& bg) {
  return {
      {"background.texture", [&](const Value& v) { bg.texture = v.texture(); }},
      {"background.color", [&](const Value& v) { bg.color = v.color(); }},
      {"background.color2", [&](const Value& v) { bg.color2 = v.color(); }},
      {"background.period", [&](const Value& v) { bg.period = v.integer(); }},
      {"background.noise", [&](const Value& v) { bg.noise = v.number(); }},
      {"background.flicker", [&](const Value& v) { bg.flicker = v.number(); }},
  };
}

Table scene_keys(SceneConfig& s) {
  Table t = background_keys(s.background);
  t["regions_per_axis"] = [&](const Value& v) { s.regions_per_axis = v.integer(); };
  t["fps"] = [&](const Value& v) { s.fps = v.integer(); };
  t["seed"] = [&](const Value& v) { s.seed = v.seed(); };
  return t;
}

Table object_keys(ObjectSpec& o) {
  return {
      {"name", [&](const Value& v) { o.name = v.word(); }},
      {"shape",
       [&](const Value& v) {
         const auto w = v.word();
         if (w == "rect") o.shape = ObjectShape::rect;
         else if (w == "ellipse") o.shape = ObjectShape::ellipse;
         else v.fail("expected rect or ellipse");
       }},
      {"width", [&](const Value& v) { std::tie(o.min_width, o.max_width) = v.range(); }},
      {"height", [&](const Value& v) { std::tie(o.min_height, o.max_height) = v.range(); }},
      {"vx", [&](const Value& v) { std::tie(o.min_vx, o.max_vx) = v.range(); }},
      {"vy", [&](const Value& v) { std::tie(o.min_vy, o.max_vy) = v.range(); }},
      {"life", [&](const Value& v) { std::tie(o.min_life, o.max_life) = v.range(); }},
      {"texture", [&](const Value& v) { o.texture = v.texture(); }},
      {"color", [&](const Value& v) { o.color = v.color(); }},
      {"color2", [&](const Value& v) { o.color2 = v.color(); }},
      {"spawn_rate", [&](const Value& v) { o.spawn_rate = v.number(); }},
      {"initial_count", [&](const Value& v) { o.initial_count = v.integer(); }},
      {"max_alive", [&](const Value& v) { o.max_alive = v.integer(); }},
  };
}

Table drift_keys(DriftEntry& d) {
  return {
      {"frame", [&](const Value& v) { d.frame = v.integer(); }},
      {"background.texture", [&](const Value& v) { d.background_texture = v.texture(); }},
      {"background.color", [&](const Value& v) { d.background_color = v.color(); }},
      {"background.color2", [&](const Value& v) { d.background_color2 = v.color(); }},
      {"background.noise", [&](const Value& v) { d.noise = v.number(); }},
      {"background.flicker", [&](const Value& v) { d.flicker = v.number(); }},
      {"object.texture", [&](const Value& v) { d.object_texture = v.texture(); }},
      {"object.color", [&](const Value& v) { d.object_color = v.color(); }},
      {"object.color2", [&](const Value& v) { d.object_color2 = v.color(); }},
  };
}

OverlapMode overlap_from(const Value& v) {
  const auto w = v.word();
  if (w == "coverage") return OverlapMode::coverage;
  if (w == "iou") return OverlapMode::iou;
  v.fail("expected coverage or iou");
}

Table train_keys(TrainConfig& t) {
  return {
      {"learning_rate", [&](const Value& v) { t.learning_rate = v.number(); }},
      {"epochs", [&](const Value& v) { t.epochs = v.integer(); }},
      {"minibatch", [&](const Value& v) { t.minibatch = v.integer(); }},
      {"seed", [&](const Value& v) { t.seed = v.seed(); }},
      {"negative_ratio", [&](const Value& v) { t.negative_ratio = v.number(); }},
      {"momentum", [&](const Value& v) { t.momentum = v.number(); }},
      {"loss",
       [&](const Value& v) {
         const auto w = v.word();
         if (w == "full_bce") t.loss = LossForm::full_bce;
         else if (w == "positive_only") t.loss = LossForm::positive_only;
         else v.fail("expected full_bce or positive_only");
       }},
  };
}

Table pretrain_keys(Scenario& s) {
  return {
      {"scenes", [&](const Value& v) { s.pretrain_scenes = v.list(); }},
      {"frames_per_scene", [&](const Value& v) { s.pretrain.frames_per_scene = v.integer(); }},
      {"frame_stride", [&](const Value& v) { s.pretrain.frame_stride = v.integer(); }},
      {"max_regions", [&](const Value& v) { s.pretrain.max_regions = static_cast<std::size_t>(v.integer()); }},
      {"overlap", [&](const Value& v) { s.pretrain.overlap = overlap_from(v); }},
      {"conv_layers", [&](const Value& v) { s.conv_layers = v.integer(); }},
      {"student_seed", [&](const Value& v) { s.student_seed = v.seed(); }},
  };
}

Table network_keys(NetworkConfig& n) {
  return {
      {"preset",
       [&](const Value& v) {
         const auto w = v.word();
         if (w == "constrained") n = NetworkConfig::constrained();
         else if (w == "rich") n = NetworkConfig::rich();
         else v.fail("expected constrained or rich");
       }},
      {"bandwidth_bps", [&](const Value& v) { n.bandwidth_bps = v.number(); }},
      {"latency_s", [&](const Value& v) { n.latency_s = v.number(); }},
      {"server_frame_s", [&](const Value& v) { n.server_frame_s = v.number(); }},
      {"source_region_s", [&](const Value& v) { n.source_region_s = v.number(); }},
  };
}

Table pipeline_keys(Scenario& s) {
  PipelineConfig& p = s.pipeline;
  return {
      {"scene", [&](const Value& v) { s.main_scene = v.word(); }},
      {"mode", [&](const Value& v) { s.mode = v.word(); }},
      {"batch_size", [&](const Value& v) { p.batch_size = v.integer(); }},
      {"batches", [&](const Value& v) { p.batches = v.integer(); }},
      {"th", [&](const Value& v) {
         s.calibrate_th = v.word() == "auto";
         if (!s.calibrate_th) p.th = v.number();
       }},
      {"r", [&](const Value& v) { p.r = v.integer(); }},
      {"alpha", [&](const Value& v) { p.alpha = v.number(); }},
      {"overlap", [&](const Value& v) { p.overlap = overlap_from(v); }},
      {"drift_updates", [&](const Value& v) { p.drift_updates = v.boolean(); }},
      {"delta", [&](const Value& v) { p.delta = v.number(); }},
      {"update_window", [&](const Value& v) { p.update_window = v.integer(); }},
      {"update_max_regions", [&](const Value& v) { p.update_max_regions = static_cast<std::size_t>(v.integer()); }},
      {"extension_learning_rate", [&](const Value& v) { p.extension_train.learning_rate = v.number(); }},
      {"extension_epochs", [&](const Value& v) { p.extension_train.epochs = v.integer(); }},
      {"full_learning_rate", [&](const Value& v) { p.full_train.learning_rate = v.number(); }},
      {"full_epochs", [&](const Value& v) { p.full_train.epochs = v.integer(); }},
      {"dds_low_r", [&](const Value& v) { p.dds_low_r = v.integer(); }},
      {"reducto_profile_period", [&](const Value& v) { p.reducto_profile_period = v.integer(); }},
      {"reducto_target_f1", [&](const Value& v) { p.reducto_target_f1 = v.number(); }},
      {"uniform_r", [&](const Value& v) { p.uniform_r = v.integer(); }},
      {"calibration_target_f1", [&](const Value& v) { s.calibration_target_f1 = v.number(); }},
      {"calibration_batches", [&](const Value& v) { s.calibration_batches = v.integer(); }},
  };
}

}  // namespace

const SceneConfig& Scenario::scene() const {
  const auto it = scenes.find(main_scene);
  if (it == scenes.end()) throw ConfigError("scenario has no scene named '" + main_scene + "'");
  return it->second;
}

std::vector<SceneConfig> Scenario::pretraining_scenes() const {
  std::vector<SceneConfig> out;
  for (const auto& name : pretrain_scenes) {
    const auto it = scenes.find(name);
    if (it == scenes.end()) throw ConfigError("pretraining scene '" + name + "' is not defined");
    out.push_back(it->second);
  }
  return out;
}

std::vector<std::vector<LabeledFrame>> Scenario::calibration_frames() const {
  SceneConfig s = scene();
  s.seed = derive_seed(s.seed, {0xca1b});
  s.drift.clear();
  std::vector<std::vector<LabeledFrame>> out;
  for (int b = 0; b < calibration_batches; ++b)
    out.push_back(generate_batch(s, b * pipeline.batch_size, pipeline.batch_size));
  return out;
}

double Scenario::calibrated_threshold(const StudentNet& student) const {
  return calibrate_threshold(ltc::calibration_batches(calibration_frames(), student, scene().regions_per_axis),
                             calibration_target_f1);
}

void Scenario::apply_seed(std::uint64_t seed) {
  auto it = scenes.find(main_scene);
  if (it != scenes.end()) it->second.seed = derive_seed(it->second.seed, {seed});
  student_seed = derive_seed(student_seed, {seed});
  pretrain.train.seed = derive_seed(pretrain.train.seed, {seed});
}

void Scenario::validate() const {
  if (!scenes.count(main_scene)) throw ConfigError("scenario has no scene named '" + main_scene + "'");
  for (const auto& [name, s] : scenes) {
    try {
      s.validate();
    } catch (const InvalidInput& e) {
      throw ConfigError("scene '" + name + "': " + e.what());
    }
  }
  try {
    pretrain.train.validate();
    network.validate();
    pipeline.validate();
  } catch (const InvalidInput& e) {
    throw ConfigError(e.what());
  }
  if (conv_layers < 1 || conv_layers > 3) throw ConfigError("conv_layers must be 1, 2 or 3");
  if (calibration_batches < 1) throw ConfigError("calibration_batches must be >= 1");
  if (!(calibration_target_f1 >= 0 && calibration_target_f1 <= 1)) throw ConfigError("calibration_target_f1 must be in [0, 1]");
  const auto& modes = run_modes();
  if (std::find(modes.begin(), modes.end(), mode) == modes.end()) throw ConfigError("unknown mode '" + mode + "'");
  for (const auto& name : pretrain_scenes)
    if (!scenes.count(name)) throw ConfigError("pretraining scene '" + name + "' is not defined");
}

const std::vector<std::string>& run_modes() {
  static const std::vector<std::string> modes{"ltc", "ltc-spatial", "ltc-temporal", "dds", "reducto", "uniform", "oracle"};
  return modes;
}

Scenario parse_scenario(std::istream& in, const std::string& origin, const std::string& base_dir) {
  std::vector<Line> lines;
  read_lines(in, origin, base_dir, 0, lines);
  Scenario sc;
  // Objects and drift entries are collected per section, then appended.
  ObjectSpec object;
  DriftEntry drift;
  Table table;
  std::function<void()> finish = [] {};
  bool in_section = false;

  for (const Line& ln : lines) {
    const std::string& text = ln.text;
    const int line = ln.number;
    const std::string& from = ln.origin;
    if (text.front() == '[') {
      if (text.back() != ']') throw ConfigError("unterminated section header", line, from);
      finish();
      finish = [] {};
      const auto head = words(text.substr(1, text.size() - 2));
      if (head.empty()) throw ConfigError("empty section header", line, from);
      const std::string& kind = head[0];
      auto need_args = [&](std::size_t n) {
        if (head.size() != n + 1)
          throw ConfigError("section [" + kind + "] takes " + std::to_string(n) + " name(s)", line, from);
      };
      auto scene_ref = [&](const std::string& name) -> SceneConfig& {
        const auto it = sc.scenes.find(name);
        if (it == sc.scenes.end()) throw ConfigError("scene '" + name + "' must be declared before use", line, from);
        return it->second;
      };
      if (kind == "scene") {
        need_args(1);
        if (sc.scenes.count(head[1])) throw ConfigError("scene '" + head[1] + "' declared twice", line, from);
        table = scene_keys(sc.scenes[head[1]]);
      } else if (kind == "object") {
        need_args(1);
        SceneConfig& s = scene_ref(head[1]);
        object = ObjectSpec{};
        table = object_keys(object);
        finish = [&s, &object] { s.objects.push_back(object); };
      } else if (kind == "drift") {
        need_args(1);
        SceneConfig& s = scene_ref(head[1]);
        drift = DriftEntry{};
        table = drift_keys(drift);
        finish = [&s, &drift] { s.drift.push_back(drift); };
      } else if (kind == "pretrain") {
        need_args(0);
        table = pretrain_keys(sc);
      } else if (kind == "train") {
        need_args(0);
        table = train_keys(sc.pretrain.train);
      } else if (kind == "network") {
        need_args(0);
        table = network_keys(sc.network);
      } else if (kind == "pipeline") {
        need_args(0);
        table = pipeline_keys(sc);
      } else {
        throw ConfigError("unknown section [" + kind + "]", line, from);
      }
      in_section = true;
      continue;
    }
    const auto eq = text.find('=');
    if (eq == std::string::npos) throw ConfigError("expected key = value", line, from);
    if (!in_section) throw ConfigError("key outside of any section", line, from);
    const std::string key = trim(text.substr(0, eq));
    const std::string value = trim(text.substr(eq + 1));
    const auto it = table.find(key);
    if (it == table.end()) throw ConfigError("unknown key '" + key + "'", line, from);
    if (value.empty()) throw ConfigError(key + ": missing value", line, from);
    it->second(Value(key, value, line, from));
  }
  finish();
  try {
    sc.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(e.what(), 0, origin);
  }
  return sc;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open scenario file '" + path + "'");
  const std::filesystem::path p(path);
  return parse_scenario(in, p.filename().string(), p.parent_path().empty() ? "." : p.parent_path().string());
}

}  // namespace ltc
