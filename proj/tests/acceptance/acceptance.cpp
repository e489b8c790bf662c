#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "ltc/checkpoint.hpp"
#include "ltc/pipeline.hpp"
#include "ltc/scenario.hpp"
#include "support/reference.hpp"

using namespace ltc;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

// Collects the failed checks of one criterion.
struct Check {
  std::vector<std::string> failures;
  std::ostringstream notes;

  void expect(bool ok, const std::string& what) {
    if (!ok) failures.push_back(what);
  }
  template <typename T>
  Check& note(const T& v) {
    notes << v;
    return *this;
  }
};

std::string num(double v, int precision = 4) {
  std::ostringstream o;
  o.precision(precision);
  o << v;
  return o.str();
}

Scenario scenario(const std::string& name) { return load_scenario(std::string(LTC_SCENARIO_DIR) + "/" + name); }

Bytes read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  return Bytes((std::istreambuf_iterator<char>(in)), {});
}

std::size_t file_bytes(const fs::path& dir, const std::string& ext) {
  std::size_t total = 0;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.path().extension() == ext) total += fs::file_size(e.path());
  return total;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("ltc_acceptance_" + name);
  fs::remove_all(p);
  return p;
}

// The default scenario's pretrained student, shared by the run criteria.
const StudentNet& pretrained() {
  static const StudentNet student = [] {
    const Scenario sc = scenario("default.scn");
    StudentNet s(sc.student_seed, sc.conv_layers);
    pretrain(s, sc.pretraining_scenes(), sc.pretrain);
    return s;
  }();
  return student;
}

Scenario calibrated(const std::string& name) {
  Scenario sc = scenario(name);
  if (sc.calibrate_th) sc.pipeline.th = sc.calibrated_threshold(pretrained());
  return sc;
}

void architecture(Check& c) {
  const StudentNet s(1);
  const ParamCounts p = param_counts(s);
  c.expect(p.encoder == 205920 && p.extension == 4673 && p.total == 210593, "encoder/extension/total counts");
  const std::vector<std::size_t> expected{448, 4640, 200832, 4128, 528, 17};
  std::vector<std::size_t> layers;
  for (const nn::Network* net : {&s.encoder(), &s.extension()})
    for (std::size_t n : net->layer_param_counts())
      if (n) layers.push_back(n);
  c.expect(layers == expected, "per-layer counts");
  c.note("encoder ").note(p.encoder).note(", extension ").note(p.extension).note(", total ").note(p.total);
  c.note(", per layer");
  for (std::size_t n : layers) c.note(' ').note(n);
}

void gradients(Check& c) {
  const StudentNet s(21);
  std::mt19937_64 rng(22);
  constexpr int kRegions = 20;
  const nn::Tensor regions = ref::random_tensor({kRegions, 28, 28, 3}, rng);
  std::vector<std::uint8_t> labels;
  for (int k = 0; k < kRegions; ++k) labels.push_back(static_cast<std::uint8_t>(k % 2));
  const StudentGradients g = distill_gradients(s, regions, labels);

  std::vector<ref::Vec> xs;
  for (int b = 0; b < kRegions; ++b) xs.emplace_back(regions.data() + b * 2352, regions.data() + (b + 1) * 2352);
  auto enc = ref::params_of(s.encoder()), ext = ref::params_of(s.extension());
  // Larger steps straddle ReLU/max-pool kinks; the double reference allows a small step.
  const double h = 1e-7;
  double worst = 0;
  std::size_t checked = 0, tensors = 0;
  auto run = [&](std::vector<ref::Vec>& params, const std::vector<nn::Tensor>& grads, const char* part) {
    for (std::size_t t = 0; t < params.size(); ++t) {
      ++tensors;
      std::uniform_int_distribution<std::size_t> pick(0, params[t].size() - 1);
      for (int n = 0; n < 6; ++n) {
        const std::size_t k = pick(rng);
        const double keep = params[t][k];
        params[t][k] = keep + h;
        const double up = ref::student_loss(s, enc, ext, xs, labels);
        params[t][k] = keep - h;
        const double down = ref::student_loss(s, enc, ext, xs, labels);
        params[t][k] = keep;
        const double fd = (up - down) / (2 * h), an = grads[t][k];
        const double scale = std::max(std::fabs(an), std::fabs(fd));
        const double err = std::fabs(an - fd);
        ++checked;
        if (scale > 1e-6) worst = std::max(worst, err / scale);
        c.expect(err <= 1e-3 * scale + 1e-6, std::string(part) + " tensor " + std::to_string(t) + " index " +
                                                 std::to_string(k) + ": analytic " + num(an, 8) + " vs " + num(fd, 8));
      }
    }
  };
  run(enc, g.encoder, "encoder");
  run(ext, g.extension, "extension");
  c.note(checked).note(" components over ").note(tensors).note(" tensors, worst relative error ").note(num(worst, 3));
}

void closed_form_oracles(Check& c) {
  std::mt19937_64 rng(31);
  int bad = 0;
  for (int k = 0; k < 100; ++k) {
    const auto a = ref::random_feature_map(3, 0, rng), b = ref::random_feature_map(3, 1, rng);
    const double d = frame_difference(a, b);
    bad += std::fabs(d - ref::brute_frame_difference(a, b)) > 1e-6 * std::max(1.0, d);
  }
  c.expect(bad == 0, std::to_string(bad) + " frame_difference mismatches");

  bad = 0;
  std::uniform_real_distribution<double> th(0.5, 10.0);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + static_cast<int>(rng() % 8);
    const auto d = ref::random_distances(n, rng);
    const double t = th(rng);
    const auto parts = partition_by_matrix(d, n, t);
    const auto brute = ref::brute_partitions(d, n, t);
    bool same = parts.size() == brute.size();
    for (std::size_t k = 0; same && k < parts.size(); ++k)
      same = parts[k].first == brute[k].first && parts[k].last == brute[k].second &&
             parts[k].representative == ref::brute_representative(d, n, brute[k].first, brute[k].second);
    bad += !same;
  }
  c.expect(bad == 0, std::to_string(bad) + " partition/representative mismatches");

  bad = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + static_cast<int>(rng() % 8);
    std::vector<FeatureMap> maps;
    for (int k = 0; k < n; ++k) maps.push_back(ref::random_feature_map(2, k, rng));
    const auto d = difference_matrix(maps);
    bad += representative(maps) != ref::brute_representative(d, n, 0, n - 1);
  }
  c.expect(bad == 0, std::to_string(bad) + " representative mismatches");

  bad = 0;
  for (int k = 0; k < 200; ++k) {
    const auto a = ref::random_int_box(rng), b = ref::random_int_box(rng);
    bad += std::fabs(iou(a, b) - ref::raster_iou(a, b)) > 1e-6;
  }
  c.expect(bad == 0, std::to_string(bad) + " iou mismatches");

  bad = 0;
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<BoundingBox> pred, truth;
    const int np = static_cast<int>(rng() % 5), nt = static_cast<int>(rng() % 5);
    for (int k = 0; k < nt; ++k) truth.push_back(ref::random_int_box(rng, 20));
    for (int k = 0; k < np; ++k) {
      BoundingBox b = k < nt && (rng() & 1) ? truth[static_cast<std::size_t>(k)] : ref::random_int_box(rng, 20);
      b.x += static_cast<double>(rng() % 3);
      pred.push_back(b);
    }
    const F1Score s = f1_score(pred, truth);
    const auto [p, r, f] = ref::brute_f1(pred, truth);
    bad += std::fabs(s.precision - p) > 1e-6 || std::fabs(s.recall - r) > 1e-6 || std::fabs(s.f1 - f) > 1e-6;
  }
  c.expect(bad == 0, std::to_string(bad) + " f1_score mismatches");

  bad = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const int L = 1 + static_cast<int>(rng() % 5);
    QualityMap q = QualityMap::uniform(L, false);
    for (auto& v : q.hq) v = static_cast<std::uint8_t>(rng() & 1);
    const int r = kValidFactors[rng() % 4];
    const bool lq = (rng() & 1) != 0;
    const CompressedFrame cf = compress(ref::random_frame(L, rng), 0, q, r, lq);
    const std::size_t want = ref::formula_byte_cost(L, q.hq_count(), r, lq);
    bad += byte_cost(cf) != want || encode_frame(cf).size() != want;
  }
  c.expect(bad == 0, std::to_string(bad) + " byte_cost mismatches");
  c.note("frame_difference 100, partitions 200 (N <= 8), representative 200, iou 200, f1 200, byte_cost 100");
}

void invariants(Check& c) {
  std::mt19937_64 rng(41);
  int bad = 0;
  for (int k = 0; k < 20; ++k) {
    const int L = 1 + static_cast<int>(rng() % 4);
    const nn::Tensor f = ref::random_frame(L, rng);
    const CompressedFrame cf = compress(f, 3, QualityMap::uniform(L, true), 4);
    bad += !(reconstruct(cf) == f) || !(reconstruct(decode_frame(encode_frame(cf))) == f);
  }
  c.expect(bad == 0, "all-HQ compress/reconstruct is not the identity");

  const StudentNet s(42);
  for (CheckpointScope scope : {CheckpointScope::full, CheckpointScope::extension_only}) {
    const Bytes b = save_checkpoint(s, scope);
    StudentNet other(43);
    apply_checkpoint(other, load_checkpoint(b));
    const bool ok = scope == CheckpointScope::full ? other == s : other.extension() == s.extension();
    c.expect(ok && save_checkpoint(other, scope) == b, "checkpoint round trip");
  }

  Scenario sc = scenario("default.scn");
  sc.pipeline.batches = 3;
  sc.pipeline.th = 600;
  const fs::path trace = scratch("accounting");
  const RunMetrics m = run_ltc(sc.scene(), StudentNet(44), sc.network, sc.pipeline, LtcMode::ltc, {"acct", trace.string()});
  std::size_t attributed = 0;
  for (const FrameRecord& f : m.frames) attributed += f.bytes_attributed;
  const std::size_t up = file_bytes(trace, ".ltcb"), down = file_bytes(trace, ".ltcu");
  c.expect(up == m.uplink_bytes && down == m.downlink_bytes, "reported bytes differ from the trace recount");
  c.expect(attributed == up + down, "per-frame attribution does not sum to the trace total");
  const fs::path dds_trace = scratch("accounting_dds");
  const RunMetrics dds = run_dds_baseline(sc.scene(), sc.network, sc.pipeline, {"dds", dds_trace.string()});
  c.expect(dds.uplink_bytes == file_bytes(dds_trace, ".ltcb") && dds.downlink_bytes == file_bytes(dds_trace, ".ltcq"),
           "dds bytes differ from the trace recount");
  const fs::path red_trace = scratch("accounting_reducto");
  const RunMetrics red = run_reducto_baseline(sc.scene(), sc.network, sc.pipeline, {"reducto", red_trace.string()});
  c.expect(red.uplink_bytes == file_bytes(red_trace, ".ltcb") && red.downlink_bytes == file_bytes(red_trace, ".ltct"),
           "reducto bytes differ from the trace recount");
  fs::remove_all(trace);
  fs::remove_all(dds_trace);
  fs::remove_all(red_trace);

  bad = 0;
  std::uniform_int_distribution<int> size(1, 30);
  std::uniform_real_distribution<double> th(0.1, 12.0);
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = size(rng);
    const auto d = ref::random_distances(n, rng);
    const auto parts = partition_by_matrix(d, n, th(rng), trial);
    int next = trial;
    bool ok = !parts.empty();
    for (const Partition& p : parts) {
      ok = ok && p.first == next && p.last >= p.first && p.contains(p.representative);
      next = p.last + 1;
    }
    bad += !(ok && next == trial + n);
  }
  c.expect(bad == 0, std::to_string(bad) + " batches not covered exactly once");
  c.note("ltc trace ").note(up).note(" + ").note(down).note(" bytes = attributed ").note(attributed);
  c.note("; dds trace ").note(dds.uplink_bytes + dds.downlink_bytes).note(" bytes; reducto trace ");
  c.note(red.uplink_bytes + red.downlink_bytes).note(" bytes; 1000 random partitions covered");
}

// First user of pretrained(), so the pretraining time is charged here.
void distillation(Check& c) {
  const Scenario sc = scenario("default.scn");
  const RegionDataset train = pretraining_dataset(sc.pretraining_scenes(), sc.pretrain);
  const RegionScore held = evaluate_regions(pretrained(), heldout_dataset(sc.pretraining_scenes(), sc.pretrain));
  c.expect(train.size() <= 10000, "more than 10k training regions");
  c.expect(held.accuracy >= 0.9, "held-out accuracy below 0.9");
  c.expect(held.recall >= 0.9, "held-out recall below 0.9");
  c.note(sc.pretrain_scenes.size()).note(" scenes, ").note(train.size()).note(" training regions; held-out accuracy ");
  c.note(num(held.accuracy)).note(", recall ").note(num(held.recall)).note(" on ").note(held.positives + held.negatives);
  c.note(" regions");
}

void semantic_vs_uniform(Check& c) {
  const Scenario sc = scenario("sparse.scn");
  c.expect(sc.pipeline.r == 4, "sparse scenario must use r = 4");
  const RunMetrics ltc = run_ltc(sc.scene(), pretrained(), sc.network, sc.pipeline, LtcMode::spatial_only);
  const RunMetrics uni = run_uniform_baseline(sc.scene(), sc.network, sc.pipeline, sc.pipeline.uniform_r);
  double coverage = 0;
  const auto frames = generate_batch(sc.scene(), 0, sc.pipeline.batch_size * sc.pipeline.batches);
  for (const auto& f : frames) coverage += object_region_fraction(f.truth, sc.scene().regions_per_axis);
  coverage /= static_cast<double>(frames.size());
  c.expect(ltc.mean_f1() >= uni.mean_f1() + 0.05, "ltc-spatial F1 not 0.05 above uniform");
  c.expect(ltc.normalized_bandwidth() <= uni.normalized_bandwidth(), "ltc-spatial uses more bandwidth than uniform");
  c.note("object-region coverage ").note(num(coverage, 3)).note("; ltc-spatial F1 ").note(num(ltc.mean_f1()));
  c.note(" at bandwidth ").note(num(ltc.normalized_bandwidth())).note("; uniform r=").note(sc.pipeline.uniform_r);
  c.note(" F1 ").note(num(uni.mean_f1())).note(" at bandwidth ").note(num(uni.normalized_bandwidth()));
}

void delay_advantage(Check& c) {
  Scenario sc = calibrated("default.scn");
  for (const auto& [name, net] : {std::pair{"constrained", NetworkConfig::constrained()},
                                  std::pair{"rich", NetworkConfig::rich()}}) {
    const RunMetrics ltc = run_ltc(sc.scene(), pretrained(), net, sc.pipeline, LtcMode::ltc);
    const RunMetrics dds = run_dds_baseline(sc.scene(), net, sc.pipeline);
    const double gap = dds.mean_delay() - ltc.mean_delay();
    const double needed = net.latency_s + net.server_frame_s;
    c.expect(ltc.mean_delay() < dds.mean_delay(), std::string(name) + ": ltc not faster than dds");
    c.expect(gap >= needed, std::string(name) + ": gap below one feedback latency + one processing pass");
    c.note(name).note(": ltc ").note(num(ltc.mean_delay())).note(" s vs dds ").note(num(dds.mean_delay()));
    c.note(" s, reduction ").note(num(100 * gap / dds.mean_delay(), 3)).note("% (reference 21-45%); ");
  }
}

void filtering(Check& c) {
  const Scenario sc = calibrated("noisy_static.scn");
  const RunMetrics ltc = run_ltc(sc.scene(), pretrained(), sc.network, sc.pipeline, LtcMode::temporal_only);
  const RunMetrics red = run_reducto_baseline(sc.scene(), sc.network, sc.pipeline);
  c.expect(ltc.mean_f1() >= 0.9 && red.mean_f1() >= 0.9, "F1 below 0.9");
  c.expect(ltc.filtered_fraction() >= red.filtered_fraction(), "ltc-temporal filters fewer frames than reducto");
  // Bytes per batch, profiling vs regular.
  std::map<int, std::size_t> per_batch;
  for (const FrameRecord& f : red.frames) per_batch[f.batch] += f.bytes_attributed;
  std::size_t profiling = 0, regular = 0;
  for (const auto& [b, bytes] : per_batch) {
    const bool prof = std::find(red.profiling_batches.begin(), red.profiling_batches.end(), b) !=
                      red.profiling_batches.end();
    (prof ? profiling : regular) += bytes;
  }
  const std::size_t nprof = red.profiling_batches.size(), nreg = per_batch.size() - nprof;
  const std::size_t red_total = red.uplink_bytes + red.downlink_bytes, ltc_total = ltc.uplink_bytes + ltc.downlink_bytes;
  const double extra = static_cast<double>(red_total) - static_cast<double>(ltc_total);
  c.expect(nprof > 0 && nreg > 0, "need both profiling and regular batches");
  c.expect(extra <= 0 || static_cast<double>(profiling) >= 0.5 * extra,
           "profiling batches carry less than half of reducto's extra bytes");
  c.note("ltc-temporal filters ").note(num(ltc.filtered_fraction())).note(" at F1 ").note(num(ltc.mean_f1()));
  c.note("; reducto filters ").note(num(red.filtered_fraction())).note(" at F1 ").note(num(red.mean_f1()));
  c.note("; reducto extra bytes ").note(extra).note(", of which profiling batches carry ").note(profiling);
  c.note(" (").note(nprof).note(" profiling vs ").note(nreg).note(" regular batches, ").note(regular).note(" bytes)");
}

struct DriftRun {
  RunMetrics metrics;
  bool encoder_preserved = true;  // across every extension-only update
};

DriftRun drift_run(const std::string& name) {
  const Scenario sc = calibrated(name);
  const fs::path trace = scratch("drift_" + fs::path(name).stem().string());
  DriftRun r;
  r.metrics = run_ltc(sc.scene(), pretrained(), sc.network, sc.pipeline, LtcMode::ltc, {name, trace.string()});
  StudentNet source = pretrained();
  std::vector<fs::path> updates;
  for (const auto& e : fs::directory_iterator(trace))
    if (e.path().extension() == ".ltcu") updates.push_back(e.path());
  std::sort(updates.begin(), updates.end());
  for (const fs::path& p : updates) {
    const UpdateMessage u = decode_update_message(read_file(p));
    const nn::Network before = source.encoder();
    apply_checkpoint(source, load_checkpoint(u.checkpoint));
    if (u.scope == CheckpointScope::extension_only) r.encoder_preserved = r.encoder_preserved && source.encoder() == before;
  }
  fs::remove_all(trace);
  return r;
}

std::string hits(const RunMetrics& m) {
  std::string s;
  for (double h : m.hit_rates) s += (s.empty() ? "" : " ") + num(h, 3);
  return s;
}

void drift(Check& c) {
  const double delta = scenario("default.scn").pipeline.delta;
  const int n = scenario("drift_mild.scn").pipeline.batch_size;

  const DriftRun mild = drift_run("drift_mild.scn");
  const int change = scenario("drift_mild.scn").scene().drift.front().frame / n;
  const auto& mh = mild.metrics.hit_rates;
  std::optional<int> drop;
  for (int b = change; b <= change + 1 && b < static_cast<int>(mh.size()); ++b)
    if (mh[static_cast<std::size_t>(b)] < delta && !drop) drop = b;
  c.expect(drop.has_value(), "mild: hit-rate did not fall below delta within one batch of the change");
  bool restored = false;
  for (const UpdateRecord& u : mild.metrics.updates) {
    if (u.scope != CheckpointScope::extension_only || !drop || u.batch != *drop) continue;
    for (int b = u.batch + 1; b <= u.batch + 2 && b < static_cast<int>(mh.size()); ++b)
      restored = restored || mh[static_cast<std::size_t>(b)] >= delta;
  }
  c.expect(restored, "mild: no extension-only update restored hit-rate within 2 batches");
  c.expect(mild.encoder_preserved, "mild: encoder changed across an extension-only update");
  c.note("mild hit-rates [").note(hits(mild.metrics)).note("], ").note(mild.metrics.extension_updates());
  c.note(" extension / ").note(mild.metrics.full_updates()).note(" full; ");

  const DriftRun severe = drift_run("drift_severe.scn");
  bool ordered = severe.metrics.full_updates() > 0;
  for (const UpdateRecord& u : severe.metrics.updates)
    if (u.scope == CheckpointScope::full) ordered = ordered && u.hit_rate_after_extension < delta;
    else ordered = ordered && u.hit_rate_after_extension >= delta;
  c.expect(ordered, "severe: full update without a failed extension-only attempt first");
  c.expect(severe.encoder_preserved, "severe: encoder changed across an extension-only update");
  c.note("severe hit-rates [").note(hits(severe.metrics)).note("], updates");
  for (const UpdateRecord& u : severe.metrics.updates)
    c.note(" b").note(u.batch).note(u.scope == CheckpointScope::full ? ":full(ext " : ":ext(ext ")
        .note(num(u.hit_rate_after_extension, 3)).note(")");
  c.note("; ");

  const DriftRun mixed = drift_run("drift_mixed.scn");
  const std::size_t total = mixed.metrics.updates.size();
  const double share = total ? static_cast<double>(mixed.metrics.extension_updates()) / static_cast<double>(total) : 0;
  c.expect(total > 0 && share > 0.5, "mixed: extension-only updates are not the majority");
  c.note("mixed ").note(mixed.metrics.extension_updates()).note(" extension / ").note(mixed.metrics.full_updates());
  c.note(" full = ").note(num(100 * share, 3)).note("% extension (reference 85%)");
}

void oracle_cdfs(Check& c) {
  const Scenario sc = scenario("sparse.scn");
  c.expect(sc.pipeline.batches >= 16, "sparse scenario must run at least 16 batches");
  const OracleResult r = run_oracle(sc.scene(), sc.network, sc.pipeline);
  bool monotone = true;
  for (const Cdf* cdf : {&r.region_cdf, &r.useful_cdf}) {
    monotone = monotone && !cdf->x.empty() && std::abs(cdf->p.back() - 1.0) < 1e-12;
    for (std::size_t k = 1; k < cdf->x.size(); ++k)
      monotone = monotone && cdf->x[k - 1] < cdf->x[k] && cdf->p[k - 1] <= cdf->p[k];
  }
  const double at = r.region_cdf.at(0.33);
  c.expect(monotone, "CDFs not monotone");
  c.expect(at >= 0.75, "fewer than 75% of frames at <= 33% object regions");
  c.expect(std::abs(at - 0.8) <= 0.10, "outside 80% +- 10 points");
  c.note(r.region_fractions.size()).note(" frames; P(object-region fraction <= 0.33) = ").note(num(at, 3));
  c.note(" (reference 0.80); median useful-frame fraction ").note(num(percentile(r.useful_fractions, 0.5), 3));
}

void monotonicity(Check& c) {
  std::mt19937_64 rng(51);
  int bad = 0;
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<FeatureMap> maps;
    for (int k = 0; k < 30; ++k) maps.push_back(ref::random_feature_map(2, k, rng));
    const auto d = difference_matrix(maps);
    const double hi = *std::max_element(d.begin(), d.end());
    std::size_t prev = SIZE_MAX;
    for (int k = 1; k <= 20; ++k) {
      const std::size_t count = partition_by_matrix(d, 30, hi * 1.05 * k / 20.0).size();
      bad += count > prev;
      prev = count;
    }
  }
  c.expect(bad == 0, "partition count increased with th");

  bad = 0;
  for (int L : {1, 4, 16}) {
    const std::size_t cells = static_cast<std::size_t>(L) * L;
    for (std::size_t hq = 0; hq <= cells; ++hq) {
      if (hq < cells) bad += !(frame_cost(L, hq, 4) < frame_cost(L, hq + 1, 4));
      for (int k = 0; k + 1 < 4; ++k) bad += !(frame_cost(L, hq, kValidFactors[k]) > frame_cost(L, hq, kValidFactors[k + 1])) && hq < cells;
    }
  }
  c.expect(bad == 0, "byte cost not strictly monotone");

  bad = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const int L = 3;
    std::vector<BoundingBox> truth;
    for (int k = 0; k < 4; ++k) truth.push_back(ref::random_int_box(rng, 60));
    QualityMap q = QualityMap::uniform(L, false);
    for (auto& v : q.hq) v = static_cast<std::uint8_t>(rng() % 3 == 0);
    QualityMap more = q;
    for (auto& v : more.hq) v = static_cast<std::uint8_t>(v || rng() % 2 == 0);
    for (double alpha : {0.2, 0.5, 0.8}) {
      const auto a = teacher_detect(pixel_quality(q), truth, alpha);
      const auto b = teacher_detect(pixel_quality(more), truth, alpha);
      for (const auto& box : a) bad += std::find(b.begin(), b.end(), box) == b.end();
    }
  }
  c.expect(bad == 0, "teacher_detect lost a detection when quality increased");
  c.note("50 twenty-point th sweeps, byte cost over r and HQ count for L in {1,4,16}, 300 teacher_detect pairs");
}

}  // namespace

// Optional arguments select criteria by number; all run by default.
int main(int argc, char** argv) {
  struct Criterion {
    int id;
    const char* name;
    double budget_s;
    std::function<void(Check&)> run;
  };
  const std::vector<Criterion> criteria{
      {1, "architecture exactness", 1, architecture},
      {2, "gradient correctness", 120, gradients},
      {3, "closed-form oracles", 60, closed_form_oracles},
      {4, "round-trip and accounting invariants", 60, invariants},
      {5, "distillation efficacy", 300, distillation},
      {6, "semantic beats uniform", 300, semantic_vs_uniform},
      {7, "one-shot delay advantage", 300, delay_advantage},
      {8, "filtering advantage", 300, filtering},
      {9, "drift protocol", 600, drift},
      {10, "oracle redundancy CDFs", 120, oracle_cdfs},
      {11, "monotonicity properties", 60, monotonicity},
  };
  std::vector<int> only;
  for (int k = 1; k < argc; ++k) only.push_back(std::atoi(argv[k]));
  int failed = 0, ran = 0;
  for (const Criterion& cr : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), cr.id) == only.end()) continue;
    ++ran;
    Check c;
    const auto t0 = Clock::now();
    try {
      cr.run(c);
    } catch (const std::exception& e) {
      c.failures.push_back(std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
    c.expect(secs <= cr.budget_s, "runtime " + num(secs, 3) + " s over the " + num(cr.budget_s) + " s budget");
    const bool ok = c.failures.empty();
    failed += !ok;
    std::printf("%s %2d %s (%.1f s)\n", ok ? "PASS" : "FAIL", cr.id, cr.name, secs);
    std::printf("     %s\n", c.notes.str().c_str());
    for (const std::string& f : c.failures) std::printf("     not met: %s\n", f.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %d criteria met\n", ran - failed, ran);
  return failed == 0 ? 0 : 1;
}
