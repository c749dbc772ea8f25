#include "phasegen/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "phasegen/checkpoint.hpp"
#include "phasegen/cvnn.hpp"
#include "phasegen/datasets.hpp"
#include "phasegen/diffusion.hpp"
#include "phasegen/image.hpp"
#include "phasegen/kspace.hpp"
#include "phasegen/metrics.hpp"
#include "phasegen/phantom.hpp"
#include "phasegen/png.hpp"
#include "phasegen/recon.hpp"
#include "phasegen/rng.hpp"
#include "phasegen/sampling.hpp"
#include "phasegen/tensor_io.hpp"
#include "phasegen/train.hpp"
#include "phasegen/unwrap.hpp"

namespace fs = std::filesystem;

namespace phasegen::cli {

namespace {

// ----------------------------------------------------------------------------
// Config files: flat `key = value` lines, `#` comments, no sections.
// ----------------------------------------------------------------------------

std::string trim(const std::string& s) {
  const size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::pair<std::string, std::string>> load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config file: " + path);
  std::vector<std::pair<std::string, std::string>> kv;
  std::set<std::string> seen;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line " + std::to_string(lineno) +
                                  " is not 'key = value': " + path);
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty())
      throw std::invalid_argument("config line " + std::to_string(lineno) +
                                  " has an empty key: " + path);
    if (!seen.insert(key).second)
      throw std::invalid_argument("duplicate config key '" + key + "' in " + path);
    kv.emplace_back(std::move(key), std::move(value));
  }
  return kv;
}

long long to_ll(const std::string& key, const std::string& s) {
  try {
    size_t pos = 0;
    const long long v = std::stoll(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("");
    return v;
  } catch (...) {
    throw std::invalid_argument("value for '" + key + "' is not an integer: " + s);
  }
}

uint64_t to_u64(const std::string& key, const std::string& s) {
  try {
    if (!s.empty() && s[0] == '-') throw std::invalid_argument("");
    size_t pos = 0;
    const unsigned long long v = std::stoull(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("");
    return v;
  } catch (...) {
    throw std::invalid_argument("value for '" + key + "' is not an unsigned integer: " + s);
  }
}

double to_f64(const std::string& key, const std::string& s) {
  try {
    size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("");
    return v;
  } catch (...) {
    throw std::invalid_argument("value for '" + key + "' is not a number: " + s);
  }
}

bool to_bool(const std::string& key, const std::string& s) {
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  throw std::invalid_argument("value for '" + key + "' is not a boolean: " + s);
}

void assign(const std::string& key, const std::string& s, int& var) {
  const long long v = to_ll(key, s);
  if (v < INT_MIN || v > INT_MAX)
    throw std::invalid_argument("value for '" + key + "' is out of range: " + s);
  var = static_cast<int>(v);
}
void assign(const std::string& key, const std::string& s, uint64_t& var) { var = to_u64(key, s); }
void assign(const std::string& key, const std::string& s, double& var) { var = to_f64(key, s); }
void assign(const std::string& key, const std::string& s, float& var) {
  var = static_cast<float>(to_f64(key, s));
}
void assign(const std::string&, const std::string& s, std::string& var) { var = s; }

// Per-command option registry.  Flags beat config-file values beat defaults;
// unknown config keys are rejected against the registered set.
struct Schema {
  struct Entry {
    std::string key;
    CLI::Option* opt;
    std::function<void(const std::string&)> set;
  };
  std::vector<Entry> entries;
  std::string config_path;
  std::set<std::string> file_keys;

  void attach_config(CLI::App& sub) {
    sub.add_option("--config", config_path,
                   "flat 'key = value' file supplying defaults for any flag");
  }

  template <class T>
  CLI::Option* opt(CLI::App& sub, const std::string& flag, T& var, const std::string& help) {
    CLI::Option* o = sub.add_option(flag, var, help);
    const std::string key = flag.substr(2);
    entries.push_back({key, o, [&var, key](const std::string& s) { assign(key, s, var); }});
    return o;
  }

  CLI::Option* flag(CLI::App& sub, const std::string& name, bool& var, const std::string& help) {
    CLI::Option* o = sub.add_flag(name, var, help);
    const std::string key = name.substr(2);
    entries.push_back({key, o, [&var, key](const std::string& s) { var = to_bool(key, s); }});
    return o;
  }

  Entry* find(const std::string& key) {
    for (auto& e : entries)
      if (e.key == key) return &e;
    return nullptr;
  }

  void merge_config() {
    if (config_path.empty()) return;
    for (const auto& [k, v] : load_config_file(config_path)) {
      Entry* e = find(k);
      if (!e) throw std::invalid_argument("unknown config key '" + k + "'");
      if (e->opt->count() == 0) {
        e->set(v);
        file_keys.insert(k);
      }
    }
  }

  // True when the key came from an explicit flag or the config file (as
  // opposed to sitting at its built-in default).
  bool user_set(const std::string& key) {
    Entry* e = find(key);
    return e != nullptr && (e->opt->count() > 0 || file_keys.count(key) > 0);
  }
};

// ----------------------------------------------------------------------------
// Shared command plumbing
// ----------------------------------------------------------------------------

void require_value(const std::string& v, const char* flag) {
  if (v.empty()) throw std::invalid_argument(std::string(flag) + " is required");
}

// Fresh run directory under `root`, named by UTC timestamp and seed (or an
// explicit name); an existing directory of the same name gets a numeric
// suffix, so prior runs are never touched.
std::string make_run_dir(const std::string& root, uint64_t seed, const std::string& run_name) {
  fs::create_directories(root);
  std::string base = run_name;
  if (base.empty()) {
    const std::time_t now = std::time(nullptr);
    std::tm tmv{};
    gmtime_r(&now, &tmv);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y%m%d-%H%M%S", &tmv);
    base = std::string(buf) + "-seed" + std::to_string(seed);
  }
  fs::path want = fs::path(root) / base;
  fs::path chosen = want;
  for (int suffix = 1; fs::exists(chosen); ++suffix)
    chosen = fs::path(want.string() + "-" + std::to_string(suffix));
  fs::create_directories(chosen);
  return chosen.string();
}

NoiseLaw parse_noise_law(const std::string& s) {
  if (s == "uniform") return NoiseLaw::uniform;
  if (s == "gaussian-wrapped") return NoiseLaw::gaussian_wrapped;
  throw std::invalid_argument("unknown noise law '" + s + "' (uniform, gaussian-wrapped)");
}

const char* noise_law_name(NoiseLaw law) {
  return law == NoiseLaw::uniform ? "uniform" : "gaussian-wrapped";
}

SigmaRule parse_sigma_rule(const std::string& s) {
  if (s == "fixed-beta") return SigmaRule::fixed_beta;
  if (s == "zero") return SigmaRule::zero;
  throw std::invalid_argument("unknown sigma rule '" + s + "' (fixed-beta, zero)");
}

std::string record_id(const char* stem, size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s_%05zu", stem, i);
  return buf;
}

size_t mask_pixels(const BinaryMask& m) {
  size_t n = 0;
  for (uint8_t v : m.data) n += v ? 1 : 0;
  return n;
}

MetricReport magnitude_phase_report(const PolarImage& ref, const PolarImage& pred) {
  MetricReport r;
  r.mse = mse(ref.magnitude, pred.magnitude);
  r.nrmse = nrmse(ref.magnitude, pred.magnitude);
  r.psnr = psnr(ref.magnitude, pred.magnitude);
  r.ssim = ssim(ref.magnitude, pred.magnitude);
  const BinaryMask fg = foreground_mask(ref.magnitude);
  if (mask_pixels(fg) > 0) r.circ_rmse = circular_rmse(ref.phase, pred.phase, fg);
  const BinaryMask pfg = foreground_mask(pred.magnitude);
  r.dsc = dice(fg, pfg);
  if (mask_pixels(fg) > 0 && mask_pixels(pfg) > 0) r.hd = hausdorff(fg, pfg);
  return r;
}

void write_metric_csv(const std::string& path, const std::vector<MetricReport>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open metrics file for writing: " + path);
  out << MetricReport::csv_header() << '\n';
  for (const MetricReport& r : rows) out << r.csv_row() << '\n';
  if (!out) throw std::runtime_error("failed writing metrics file: " + path);
}

// ----------------------------------------------------------------------------
// phantom
// ----------------------------------------------------------------------------

struct PhantomCmd {
  Schema schema;
  int n = 10;
  int size = 64;
  uint64_t seed = 0;
  std::string out;

  void run() {
    schema.merge_config();
    require_value(out, "--out");
    if (n < 0) throw std::invalid_argument("--n must be >= 0");
    if (fs::exists(manifest_path(out)))
      throw std::invalid_argument("refusing to overwrite existing dataset: " +
                                  manifest_path(out));
    std::vector<DatasetEntry> entries;
    entries.reserve(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
      const std::string id = record_id("phantom", static_cast<size_t>(i));
      const PhantomRecord rec = generate_phantom(seed + static_cast<uint64_t>(i), size);
      write_record(out, id, phantom_to_complex(rec));
      entries.push_back({id, "real", id + ".cxt1"});
    }
    write_manifest(out, entries);
    std::cout << "wrote " << n << " records to " << out << "\n";
  }
};

void register_phantom(CLI::App& app) {
  auto st = std::make_shared<PhantomCmd>();
  CLI::App* sub = app.add_subcommand("phantom", "generate a synthetic phantom dataset");
  st->schema.attach_config(*sub);
  st->schema.opt(*sub, "--n", st->n, "record count");
  st->schema.opt(*sub, "--size", st->size, "grid side length (>= 16)");
  st->schema.opt(*sub, "--seed", st->seed, "base seed; record i uses seed + i");
  st->schema.opt(*sub, "--out", st->out, "dataset directory to create");
  sub->callback([st] { st->run(); });
}

// ----------------------------------------------------------------------------
// mask
// ----------------------------------------------------------------------------

struct MaskCmd {
  Schema schema;
  int width = 320;
  float accel = 4.0f;
  float center_fraction = 0.08f;
  uint64_t seed = 0;
  std::string out;

  void run() {
    schema.merge_config();
    require_value(out, "--out");
    fs::create_directories(out);
    const std::string path = (fs::path(out) / "mask.cxt1").string();
    if (fs::exists(path))
      throw std::invalid_argument("refusing to overwrite existing mask: " + path);
    Rng rng(seed);
    const SamplingMask m = make_cartesian_mask(width, accel, center_fraction, rng);
    write_mask(path, m, seed);
    std::cout << "kept " << m.kept_count() << " of " << width << " columns (center "
              << m.center_count() << "), wrote " << path << "\n";
  }
};

void register_mask(CLI::App& app) {
  auto st = std::make_shared<MaskCmd>();
  CLI::App* sub = app.add_subcommand("mask", "draw a Cartesian column-sampling mask");
  st->schema.attach_config(*sub);
  st->schema.opt(*sub, "--width", st->width, "k-space width in columns");
  st->schema.opt(*sub, "--accel", st->accel, "acceleration factor");
  st->schema.opt(*sub, "--center-fraction", st->center_fraction,
                 "fully sampled center fraction");
  st->schema.opt(*sub, "--seed", st->seed, "mask seed");
  st->schema.opt(*sub, "--out", st->out, "output directory");
  sub->callback([st] { st->run(); });
}

// ----------------------------------------------------------------------------
// train-phasegen
// ----------------------------------------------------------------------------

struct TrainPhasegenCmd {
  Schema schema;
  std::string dataset;
  std::string preset = "toy";
  int epochs = 8;
  int batch = 8;
  double lr = 1e-3;
  double dropout = 0.2;
  int timesteps = 50;
  int base_channels = 8;
  int depth = 2;
  std::string noise_law = "uniform";
  bool cartesian = false;
  uint64_t seed = 0;
  std::string out;
  std::string run_name;

  void apply_preset() {
    if (preset != "toy" && preset != "paper-full")
      throw std::invalid_argument("unknown preset '" + preset + "' (toy, paper-full)");
    if (preset == "toy") return;  // toy values are the built-in defaults
    const auto set_if_default = [&](const char* key, auto& var, auto value) {
      if (!schema.user_set(key)) var = value;
    };
    set_if_default("epochs", epochs, 200);
    set_if_default("batch", batch, 128);
    set_if_default("lr", lr, 1e-4);
    set_if_default("timesteps", timesteps, 1000);
    set_if_default("base-channels", base_channels, 64);
    set_if_default("depth", depth, 3);
  }

  void run() {
    schema.merge_config();
    require_value(dataset, "--dataset");
    require_value(out, "--out");
    apply_preset();

    const Dataset ds = read_manifest(dataset);
    const std::vector<ComplexImage> records = load_all_records(ds);

    PhasegenTrainConfig tc;
    tc.epochs = epochs;
    tc.batch_size = batch;
    tc.lr = lr;
    tc.dropout = dropout;
    tc.timesteps = timesteps;
    tc.base_channels = base_channels;
    tc.depth = depth;
    tc.seed = seed;
    tc.noise_law = parse_noise_law(noise_law);
    tc.cartesian_mixing = cartesian;

    const std::string run_dir = make_run_dir(out, seed, run_name);
    std::vector<LossPoint> trace;
    PhasegenModel model = train_phasegen(records, tc, &trace);

    save_checkpoint(model.net.params(), (fs::path(run_dir) / "ckpt_final").string());
    write_loss_csv((fs::path(run_dir) / "loss.csv").string(), trace);
    write_schedule((fs::path(run_dir) / "schedule.csv").string(), model.schedule);

    std::ofstream cfg((fs::path(run_dir) / "model.cfg").string(), std::ios::binary);
    if (!cfg) throw std::runtime_error("cannot write model.cfg under " + run_dir);
    cfg << "timesteps = " << timesteps << "\n"
        << "base_channels = " << base_channels << "\n"
        << "depth = " << depth << "\n"
        << "dropout = " << dropout << "\n"
        << "noise_law = " << noise_law_name(tc.noise_law) << "\n"
        << "cartesian = " << (cartesian ? "true" : "false") << "\n"
        << "epochs = " << epochs << "\n"
        << "batch = " << batch << "\n"
        << "lr = " << lr << "\n"
        << "seed = " << seed << "\n";
    if (!cfg) throw std::runtime_error("failed writing model.cfg under " + run_dir);

    std::cout << "run dir: " << run_dir << "\n";
    if (!trace.empty())
      std::cout << "steps: " << trace.size() << ", final loss: " << trace.back().loss << "\n";
  }
};

void register_train_phasegen(CLI::App& app) {
  auto st = std::make_shared<TrainPhasegenCmd>();
  CLI::App* sub =
      app.add_subcommand("train-phasegen", "train the phase-synthesis noise predictor");
  st->schema.attach_config(*sub);
  st->schema.opt(*sub, "--dataset", st->dataset, "training dataset directory");
  st->schema.opt(*sub, "--preset", st->preset, "hyperparameter preset: toy, paper-full");
  st->schema.opt(*sub, "--epochs", st->epochs, "training epochs");
  st->schema.opt(*sub, "--batch", st->batch, "batch size");
  st->schema.opt(*sub, "--lr", st->lr, "initial learning rate");
  st->schema.opt(*sub, "--dropout", st->dropout, "dropout rate on the contracting path");
  st->schema.opt(*sub, "--timesteps", st->timesteps, "diffusion timesteps T");
  st->schema.opt(*sub, "--base-channels", st->base_channels, "channels at full resolution");
  st->schema.opt(*sub, "--depth", st->depth, "downsampling levels");
  st->schema.opt(*sub, "--noise-law", st->noise_law, "phase noise law: uniform, gaussian-wrapped");
  st->schema.flag(*sub, "--cartesian", st->cartesian,
                  "use the additive Cartesian forward process (ablation)");
  st->schema.opt(*sub, "--seed", st->seed, "training seed");
  st->schema.opt(*sub, "--out", st->out, "directory that receives the run directory");
  st->schema.opt(*sub, "--run-name", st->run_name, "run directory name (default: timestamp+seed)");
  sub->callback([st] { st->run(); });
}

// ----------------------------------------------------------------------------
// sample
// ----------------------------------------------------------------------------

struct SampleCmd {
  Schema schema;
  std::string model;
  std::string dataset;
  int count = -1;
  std::string sigma_rule = "fixed-beta";
  std::string noise_law;  // empty: use the model's training law
  uint64_t seed = 0;
  std::string out;
  std::string run_name;

  void run() {
    schema.merge_config();
    require_value(model, "--model");
    require_value(dataset, "--dataset");
    require_value(out, "--out");

    std::map<std::string, std::string> mc;
    for (const auto& [k, v] : load_config_file((fs::path(model) / "model.cfg").string()))
      mc[k] = v;
    const auto need = [&](const char* key) -> const std::string& {
      auto it = mc.find(key);
      if (it == mc.end())
        throw std::runtime_error("model.cfg is missing key '" + std::string(key) + "'");
      return it->second;
    };
    cvnn::CvUNetConfig ncfg;
    ncfg.timesteps = static_cast<int>(to_ll("timesteps", need("timesteps")));
    ncfg.base_channels = static_cast<int>(to_ll("base_channels", need("base_channels")));
    ncfg.depth = static_cast<int>(to_ll("depth", need("depth")));
    ncfg.dropout = to_f64("dropout", need("dropout"));

    Rng scratch(0);
    cvnn::CvUNet<float> net(ncfg, scratch);
    load_checkpoint_into(net.params(), (fs::path(model) / "ckpt_final").string());
    const NoiseSchedule schedule = read_schedule((fs::path(model) / "schedule.csv").string());
    if (schedule.timesteps != ncfg.timesteps)
      throw std::runtime_error("model.cfg and schedule.csv disagree on timesteps");

    SampleConfig scfg;
    scfg.sigma_rule = parse_sigma_rule(sigma_rule);
    scfg.noise_law = parse_noise_law(noise_law.empty() ? need("noise_law") : noise_law);

    const Dataset ds = read_manifest(dataset);
    const size_t total = ds.entries.size();
    const size_t want = count < 0 ? total : static_cast<size_t>(count);
    if (want > total)
      throw std::invalid_argument("--count " + std::to_string(want) + " exceeds the dataset's " +
                                  std::to_string(total) + " records");

    const std::string run_dir = make_run_dir(out, seed, run_name);
    Rng root(seed);
    std::vector<DatasetEntry> entries;
    entries.reserve(want);
    for (size_t i = 0; i < want; ++i) {
      const ComplexImage z0 = read_record(ds.entries[i]);
      const RealGrid magnitude = to_polar(z0).magnitude;
      Rng ri = root.child(100 + i);
      const PolarImage sampled = sample_phase(magnitude, net, schedule, scfg, ri);
      write_record(run_dir, ds.entries[i].id, from_polar(sampled));
      entries.push_back({ds.entries[i].id, "synthetic", ds.entries[i].id + ".cxt1"});
    }
    write_manifest(run_dir, entries);
    std::cout << "run dir: " << run_dir << "\n";
    std::cout << "sampled " << want << " records\n";
  }
};

void register_sample(CLI::App& app) {
  auto st = std::make_shared<SampleCmd>();
  CLI::App* sub = app.add_subcommand("sample", "synthesize phase for dataset magnitudes");
  st->schema.attach_config(*sub);
  st->schema.opt(*sub, "--model", st->model, "training run directory (model.cfg, ckpt_final, schedule.csv)");
  st->schema.opt(*sub, "--dataset", st->dataset, "dataset supplying conditioning magnitudes");
  st->schema.opt(*sub, "--count", st->count, "records to sample (default: all)");
  st->schema.opt(*sub, "--sigma-rule", st->sigma_rule, "reverse noise scale: fixed-beta, zero");
  st->schema.opt(*sub, "--noise-law", st->noise_law,
                 "override the phase noise law (default: the model's)");
  st->schema.opt(*sub, "--seed", st->seed, "sampling seed");
  st->schema.opt(*sub, "--out", st->out, "directory that receives the run directory");
  st->schema.opt(*sub, "--run-name", st->run_name, "run directory name (default: timestamp+seed)");
  sub->callback([st] { st->run(); });
}

// ----------------------------------------------------------------------------
// naive-phase
// ----------------------------------------------------------------------------

struct NaiveCmd {
  Schema schema;
  std::string dataset;
  double sigma = 0.05;
  int count = -1;
  uint64_t seed = 0;
  std::string out;
  std::string run_name;

  void run() {
    schema.merge_config();
    require_value(dataset, "--dataset");
    require_value(out, "--out");

    const Dataset ds = read_manifest(dataset);
    const size_t total = ds.entries.size();
    const size_t want = count < 0 ? total : static_cast<size_t>(count);
    if (want > total)
      throw std::invalid_argument("--count " + std::to_string(want) + " exceeds the dataset's " +
                                  std::to_string(total) + " records");

    const std::string run_dir = make_run_dir(out, seed, run_name);
    Rng root(seed);
    std::vector<DatasetEntry> entries;
    entries.reserve(want);
    for (size_t i = 0; i < want; ++i) {
      const ComplexImage z0 = read_record(ds.entries[i]);
      const RealGrid magnitude = to_polar(z0).magnitude;
      Rng ri = root.child(100 + i);
      const PolarImage guessed = naive_phase(magnitude, sigma, ri);
      write_record(run_dir, ds.entries[i].id, from_polar(guessed));
      entries.push_back({ds.entries[i].id, "synthetic", ds.entries[i].id + ".cxt1"});
    }
    write_manifest(run_dir, entries);
    std::cout << "run dir: " << run_dir << "\n";
    std::cout << "generated " << want << " records\n";
  }
};

void register_naive(CLI::App& app) {
  auto st = std::make_shared<NaiveCmd>();
  CLI::App* sub =
      app.add_subcommand("naive-phase", "sinusoidal magnitude-driven phase baseline");
  st->schema.attach_config(*sub);
  st->schema.opt(*sub, "--dataset", st->dataset, "dataset supplying magnitudes");
  st->schema.opt(*sub, "--sigma", st->sigma, "additive gaussian phase noise");
  st->schema.opt(*sub, "--count", st->count, "records to generate (default: all)");
  st->schema.opt(*sub, "--seed", st->seed, "noise seed");
  st->schema.opt(*sub, "--out", st->out, "directory that receives the run directory");
  st->schema.opt(*sub, "--run-name", st->run_name, "run directory name (default: timestamp+seed)");
  sub->callback([st] { st->run(); });
}

// ----------------------------------------------------------------------------
// recon
// ----------------------------------------------------------------------------

struct ReconCmd {
  Schema schema;
  std::string dataset;
  std::string baseline;  // "" trains; "zerofill" skips training
  int epochs = 6;
  int batch = 4;
  double lr = 1e-3;
  float accel = 4.0f;
  float center_fraction = 0.08f;
  int base_channels = 8;
  int depth = 2;
  int holdout = 0;  // 0: max(1, n/5)
  uint64_t seed = 0;
  std::string out;
  std::string run_name;

  void run() {
    schema.merge_config();
    require_value(dataset, "--dataset");
    require_value(out, "--out");
    if (!baseline.empty() && baseline != "zerofill")
      throw std::invalid_argument("unknown baseline '" + baseline + "' (zerofill)");

    const Dataset ds = read_manifest(dataset);
    const std::vector<ComplexImage> records = load_all_records(ds);
    const size_t n = records.size();
    if (n == 0) throw std::runtime_error("dataset has no records: " + dataset);

    size_t test_n = holdout > 0 ? static_cast<size_t>(holdout)
                                : std::max<size_t>(1, n / 5);
    if (test_n > n) throw std::invalid_argument("--holdout exceeds the dataset size");
    if (baseline.empty() && test_n >= n)
      throw std::invalid_argument("holdout leaves no training records");
    const size_t train_n = n - test_n;

    const int w = records[0].width;
    Rng root(seed);
    std::vector<SamplingMask> masks(test_n);
    std::vector<ComplexImage> acquired(test_n);
    for (size_t i = 0; i < test_n; ++i) {
      Rng mrng = root.child(5000 + i);
      masks[i] = make_cartesian_mask(w, accel, center_fraction, mrng);
      acquired[i] = apply_mask(fft2c(records[train_n + i]), masks[i]);
    }

    const std::string run_dir = make_run_dir(out, seed, run_name);

    std::vector<MetricReport> zf_rows;
    zf_rows.reserve(test_n);
    for (size_t i = 0; i < test_n; ++i) {
      const PolarImage ref = to_polar(records[train_n + i]);
      zf_rows.push_back(magnitude_phase_report(ref, zerofill_recon(acquired[i])));
    }

    if (baseline == "zerofill") {
      write_metric_csv((fs::path(run_dir) / "metrics.csv").string(), zf_rows);
      std::cout << "run dir: " << run_dir << "\n";
      std::cout << "zerofill metrics for " << test_n << " held-out records\n";
      return;
    }

    ReconTrainConfig rc;
    rc.epochs = epochs;
    rc.batch_size = batch;
    rc.lr = lr;
    rc.acceleration = accel;
    rc.center_fraction = center_fraction;
    rc.base_channels = base_channels;
    rc.depth = depth;
    rc.seed = seed;

    std::vector<ComplexImage> train_set(records.begin(),
                                        records.begin() + static_cast<long>(train_n));
    std::vector<LossPoint> trace;
    ReconNet net = train_recon(train_set, rc, &trace);

    save_checkpoint(net.params(), (fs::path(run_dir) / "ckpt_final").string());
    write_loss_csv((fs::path(run_dir) / "loss.csv").string(), trace);

    std::vector<MetricReport> rows;
    rows.reserve(test_n);
    for (size_t i = 0; i < test_n; ++i) {
      const ComplexImage zerofilled = ifft2c(acquired[i]);
      const ReconOutput got = net.forward(zerofilled, acquired[i], masks[i]);
      const PolarImage ref = to_polar(records[train_n + i]);
      rows.push_back(magnitude_phase_report(ref, to_polar(got.image)));
    }
    write_metric_csv((fs::path(run_dir) / "metrics.csv").string(), rows);
    write_metric_csv((fs::path(run_dir) / "zerofill.csv").string(), zf_rows);
    std::cout << "run dir: " << run_dir << "\n";
    std::cout << "trained on " << train_n << " records, evaluated " << test_n << "\n";
  }
};

void register_recon(CLI::App& app) {
  auto st = std::make_shared<ReconCmd>();
  CLI::App* sub = app.add_subcommand(
      "recon", "train/evaluate undersampled reconstruction, or score the zerofill baseline");
  st->schema.attach_config(*sub);
  st->schema.opt(*sub, "--dataset", st->dataset, "complex image dataset directory");
  st->schema.opt(*sub, "--baseline", st->baseline, "skip training: zerofill");
  st->schema.opt(*sub, "--epochs", st->epochs, "training epochs");
  st->schema.opt(*sub, "--batch", st->batch, "batch size");
  st->schema.opt(*sub, "--lr", st->lr, "initial learning rate");
  st->schema.opt(*sub, "--accel", st->accel, "undersampling acceleration factor");
  st->schema.opt(*sub, "--center-fraction", st->center_fraction, "fully sampled center fraction");
  st->schema.opt(*sub, "--base-channels", st->base_channels, "channels at full resolution");
  st->schema.opt(*sub, "--depth", st->depth, "downsampling levels");
  st->schema.opt(*sub, "--holdout", st->holdout, "held-out record count (default: n/5, min 1)");
  st->schema.opt(*sub, "--seed", st->seed, "run seed (masks, init, batches)");
  st->schema.opt(*sub, "--out", st->out, "directory that receives the run directory");
  st->schema.opt(*sub, "--run-name", st->run_name, "run directory name (default: timestamp+seed)");
  sub->callback([st] { st->run(); });
}

// ----------------------------------------------------------------------------
// metrics
// ----------------------------------------------------------------------------

struct MetricsCmd {
  Schema schema;
  std::string ref_path;
  std::string pred_path;
  std::string mask_path;

  void run() {
    schema.merge_config();
    const ComplexImage ref = read_tensor(ref_path);
    const ComplexImage pred = read_tensor(pred_path);
    if (!same_shape(ref, pred))
      throw std::invalid_argument("shape mismatch between " + ref_path + " and " + pred_path);
    const PolarImage rp = to_polar(ref);
    const PolarImage pp = to_polar(pred);

    MetricReport r;
    r.mse = mse(rp.magnitude, pp.magnitude);
    r.nrmse = nrmse(rp.magnitude, pp.magnitude);
    r.psnr = psnr(rp.magnitude, pp.magnitude);
    r.ssim = ssim(rp.magnitude, pp.magnitude);
    if (!mask_path.empty()) {
      const RealGrid mg = read_real_grid(mask_path);
      if (mg.height != ref.height || mg.width != ref.width)
        throw std::invalid_argument("mask shape does not match the images: " + mask_path);
      BinaryMask bm(mg.height, mg.width);
      for (size_t i = 0; i < mg.size(); ++i) bm.data[i] = mg.data[i] != 0.0f ? 1 : 0;
      r.circ_rmse = circular_rmse(rp.phase, pp.phase, bm);
      const BinaryMask pfg = foreground_mask(pp.magnitude);
      r.dsc = dice(bm, pfg);
      if (mask_pixels(bm) > 0 && mask_pixels(pfg) > 0) r.hd = hausdorff(bm, pfg);
    }
    std::cout << MetricReport::csv_header() << "\n" << r.csv_row() << "\n";
  }
};

void register_metrics(CLI::App& app) {
  auto st = std::make_shared<MetricsCmd>();
  CLI::App* sub = app.add_subcommand("metrics", "score a prediction against a reference");
  st->schema.attach_config(*sub);
  sub->add_option("ref", st->ref_path, "reference complex image (CXT1)")->required();
  sub->add_option("pred", st->pred_path, "predicted complex image (CXT1)")->required();
  st->schema.opt(*sub, "--mask", st->mask_path,
                 "region mask (real CXT1, nonzero = inside); adds dsc/hd/circ_rmse");
  sub->callback([st] { st->run(); });
}

// ----------------------------------------------------------------------------
// unwrap
// ----------------------------------------------------------------------------

struct UnwrapCmd {
  Schema schema;
  std::string input;
  std::string out;

  void run() {
    schema.merge_config();
    require_value(input, "--input");
    require_value(out, "--out");
    const RealGrid wrapped = read_real_grid(input);
    const RealGrid unwrapped = laplacian_unwrap(wrapped);
    fs::create_directories(out);
    const std::string path = (fs::path(out) / "unwrapped.cxt1").string();
    if (fs::exists(path))
      throw std::invalid_argument("refusing to overwrite existing output: " + path);
    write_real_grid(path, unwrapped);
    std::cout << "wrote " << path << "\n";
  }
};

void register_unwrap(CLI::App& app) {
  auto st = std::make_shared<UnwrapCmd>();
  CLI::App* sub = app.add_subcommand("unwrap", "unwrap a phase grid");
  st->schema.attach_config(*sub);
  st->schema.opt(*sub, "--input", st->input, "wrapped phase grid (real CXT1)");
  st->schema.opt(*sub, "--out", st->out, "output directory");
  sub->callback([st] { st->run(); });
}

// ----------------------------------------------------------------------------
// export-png
// ----------------------------------------------------------------------------

struct ExportPngCmd {
  Schema schema;
  std::string input;
  std::string kind = "magnitude";
  std::string out;

  void run() {
    schema.merge_config();
    require_value(out, "--out");
    if (kind != "magnitude" && kind != "phase")
      throw std::invalid_argument("unknown kind '" + kind + "' (magnitude, phase)");
    if (fs::exists(out))
      throw std::invalid_argument("refusing to overwrite existing output: " + out);

    const TensorData t = read_tensor_file(input);
    if (t.dims.size() != 2)
      throw std::invalid_argument("png export needs a rank-2 tensor: " + input);
    const int h = static_cast<int>(t.dims[0]);
    const int w = static_cast<int>(t.dims[1]);

    RealGrid grid(h, w);
    if (t.dtype == TensorDtype::complex64) {
      ComplexImage z(h, w);
      for (size_t i = 0; i < z.size(); ++i)
        z.data[i] = cfloat(t.values[2 * i], t.values[2 * i + 1]);
      const PolarImage p = to_polar(z);
      grid = kind == "magnitude" ? p.magnitude : p.phase;
    } else {
      std::copy(t.values.begin(), t.values.end(), grid.data.begin());
    }

    if (const fs::path parent = fs::path(out).parent_path(); !parent.empty())
      fs::create_directories(parent);
    if (kind == "magnitude")
      write_png_magnitude(out, grid);
    else
      write_png_phase(out, grid);
    std::cout << "wrote " << out << "\n";
  }
};

void register_export_png(CLI::App& app) {
  auto st = std::make_shared<ExportPngCmd>();
  CLI::App* sub = app.add_subcommand("export-png", "render a CXT1 tensor to a PNG");
  st->schema.attach_config(*sub);
  sub->add_option("input", st->input, "CXT1 file (complex or real, rank 2)")->required();
  st->schema.opt(*sub, "--kind", st->kind, "magnitude or phase");
  st->schema.opt(*sub, "--out", st->out, "output PNG path");
  sub->callback([st] { st->run(); });
}

}  // namespace

int run(const std::vector<std::string>& args) {
  CLI::App app{"complex-valued diffusion for MR phase synthesis, with k-space tooling"};
  app.require_subcommand(1);
  register_phantom(app);
  register_train_phasegen(app);
  register_sample(app);
  register_naive(app);
  register_mask(app);
  register_recon(app);
  register_metrics(app);
  register_unwrap(app);
  register_export_png(app);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
    return 0;
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace phasegen::cli
