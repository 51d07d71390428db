#include "ocpdl/cli.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <optional>
#include <thread>
#include <utility>

#include <CLI11.hpp>

#include "ocpdl/baselines.hpp"
#include "ocpdl/diagnostics.hpp"
#include "ocpdl/online.hpp"
#include "ocpdl/report.hpp"
#include "ocpdl/streams.hpp"

namespace ocpdl {

namespace {

std::string trim(const std::string& s) {
  std::size_t lo = 0;
  std::size_t hi = s.size();
  while (lo < hi && std::isspace(static_cast<unsigned char>(s[lo]))) ++lo;
  while (hi > lo && std::isspace(static_cast<unsigned char>(s[hi - 1]))) --hi;
  return s.substr(lo, hi - lo);
}

template <typename T>
T parse_integer(const std::string& key, const std::string& text) {
  T value{};
  const char* begin = text.data();
  const char* end = begin + text.size();
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc{} || ptr != end || text.empty()) {
    throw ConfigError("config key '" + key + "': '" + text + "' is not an integer");
  }
  return value;
}

double parse_real(const std::string& key, const std::string& text) {
  double value = 0.0;
  const char* begin = text.data();
  const char* end = begin + text.size();
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc{} || ptr != end || text.empty()) {
    throw ConfigError("config key '" + key + "': '" + text + "' is not a number");
  }
  return value;
}

}  // namespace

KeyValueConfig KeyValueConfig::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path.string());
  KeyValueConfig cfg;
  std::string line;
  std::int64_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string stripped = trim(line);
    if (stripped.empty() || stripped.front() == '#') continue;
    const std::size_t eq = stripped.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(path.string() + ":" + std::to_string(line_no) +
                        ": expected key=value, got '" + stripped + "'");
    }
    const std::string key = trim(stripped.substr(0, eq));
    if (key.empty()) {
      throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": empty key");
    }
    cfg.set(key, trim(stripped.substr(eq + 1)));
  }
  return cfg;
}

void KeyValueConfig::set(std::string key, std::string value) {
  if (key.empty()) throw ConfigError("config keys must be nonempty");
  values_[std::move(key)] = std::move(value);
}

bool KeyValueConfig::has(const std::string& key) const { return values_.count(key) > 0; }

std::string KeyValueConfig::get_string(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("config key '" + key + "' is required");
  return it->second;
}

std::string KeyValueConfig::get_string(const std::string& key, std::string fallback) const {
  const auto it = values_.find(key);
  return it == values_.end() ? std::move(fallback) : it->second;
}

std::int64_t KeyValueConfig::get_int(const std::string& key, std::int64_t fallback) const {
  const auto it = values_.find(key);
  return it == values_.end() ? fallback : parse_integer<std::int64_t>(key, it->second);
}

double KeyValueConfig::get_double(const std::string& key, double fallback) const {
  const auto it = values_.find(key);
  return it == values_.end() ? fallback : parse_real(key, it->second);
}

bool KeyValueConfig::get_bool(const std::string& key, bool fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  const std::string& v = it->second;
  if (v == "1" || v == "true") return true;
  if (v == "0" || v == "false") return false;
  throw ConfigError("config key '" + key + "': '" + v + "' is not a boolean (0/1/true/false)");
}

std::uint64_t KeyValueConfig::get_seed(const std::string& key, std::uint64_t fallback) const {
  const auto it = values_.find(key);
  return it == values_.end() ? fallback : parse_integer<std::uint64_t>(key, it->second);
}

void KeyValueConfig::require_known(const std::vector<std::string>& allowed) const {
  for (const auto& [key, value] : values_) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw ConfigError("unknown config key '" + key + "' for this command");
    }
  }
}

Shape parse_shape(const std::string& text) {
  Shape shape;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t comma = std::min(text.find(',', pos), text.size());
    const std::string part = trim(text.substr(pos, comma - pos));
    const std::int64_t extent = parse_integer<std::int64_t>("shape", part);
    if (extent < 1) throw ConfigError("shape extents must be positive, got " + part);
    shape.push_back(extent);
    pos = comma + 1;
  }
  return shape;
}

namespace {

// --- config key tables ----------------------------------------------------

const std::vector<std::string>& model_keys() {
  static const std::vector<std::string> keys = {
      "rank",       "lambda",       "beta",  "balanced",      "T",
      "batch",      "seed",         "coding_tol", "coding_iters", "c_max",
      "factor_tol", "factor_sweeps", "u_max"};
  return keys;
}

const std::vector<std::string>& source_keys() {
  static const std::vector<std::string> keys = {
      "tensor", "synthetic", "truth_rank", "truth_seed", "subsample",
      "markov", "image",     "patch",      "stream_dir"};
  return keys;
}

std::vector<std::string> concat_keys(std::initializer_list<std::vector<std::string>> groups) {
  std::vector<std::string> all;
  for (const auto& g : groups) all.insert(all.end(), g.begin(), g.end());
  return all;
}

// Seed-derivation tags: the learner derives its loading initialization with
// tag 1 internally; the CLI derives stream sampling with tag 2 and the
// synthetic ground truth with tag 3, so equal seed values stay uncorrelated.
constexpr std::uint64_t kStreamTag = 2;
constexpr std::uint64_t kTruthTag = 3;

std::uint64_t stream_seed_for(std::uint64_t run_seed) {
  return Rng(run_seed).split(kStreamTag).seed();
}

// Solver knobs shared by every method.
struct MethodParams {
  std::int64_t rank = 1;
  std::int64_t online_steps = 100;
  std::int64_t offline_sweeps = 50;
  double beta = 1.0;
  bool balanced = false;
  CodingSettings coding;
  FactorSettings factor;
};

MethodParams read_params(const KeyValueConfig& cfg, std::int64_t default_sweeps) {
  MethodParams p;
  p.rank = cfg.get_int("rank", 0);
  if (p.rank < 1) throw ConfigError("rank is required and must be at least 1");
  p.online_steps = cfg.get_int("T", 100);
  p.offline_sweeps = cfg.get_int("sweeps", default_sweeps);
  p.beta = cfg.get_double("beta", 1.0);
  p.balanced = cfg.get_bool("balanced", false);
  p.coding.lambda = cfg.get_double("lambda", 0.0);
  p.coding.tol = cfg.get_double("coding_tol", p.coding.tol);
  p.coding.max_iters = static_cast<int>(cfg.get_int("coding_iters", p.coding.max_iters));
  p.coding.c_max = cfg.get_double("c_max", p.coding.c_max);
  p.factor.tol = cfg.get_double("factor_tol", p.factor.tol);
  p.factor.max_sweeps = static_cast<int>(cfg.get_int("factor_sweeps", p.factor.max_sweeps));
  p.factor.u_max = cfg.get_double("u_max", p.factor.u_max);
  return p;
}

// --- data sources -----------------------------------------------------------

struct SourceData {
  std::optional<DenseTensor> reference;  // full tensor when the source has one
  std::function<BatchStream(std::uint64_t)> make_stream;  // seed -> fresh stream
  std::int64_t learner_batch = 1;  // sample count each emitted minibatch carries
};

std::vector<std::filesystem::path> list_stream_files(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw IoError("stream_dir " + dir.string() + " is not a directory");
  }
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".dtf1") {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw ConfigError("stream_dir " + dir.string() + " holds no .dtf1 files");
  return files;
}

// Opens the single configured data source. `batches` bounds the stream length
// and `batch` is the sample count for chain / patch minibatches.
SourceData open_source(const KeyValueConfig& cfg, std::int64_t rank, std::int64_t batches,
                       std::int64_t batch) {
  const char* exclusive[] = {"tensor", "synthetic", "markov", "image", "stream_dir"};
  std::vector<std::string> present;
  for (const char* key : exclusive) {
    if (cfg.has(key)) present.emplace_back(key);
  }
  if (present.size() != 1) {
    throw ConfigError("exactly one data source among tensor=, synthetic=, markov=, image=, "
                      "stream_dir= is required (got " + std::to_string(present.size()) + ")");
  }
  if (batches < 1) throw ConfigError("T must be at least 1");
  if (batch < 1) throw ConfigError("batch must be at least 1");

  SourceData out;
  const std::string& kind = present.front();
  if (kind == "tensor" || kind == "synthetic") {
    if (kind == "tensor") {
      out.reference = read_dtf1(cfg.get_string("tensor"));
    } else {
      const Shape shape = parse_shape(cfg.get_string("synthetic"));
      const std::int64_t truth_rank = cfg.get_int("truth_rank", rank);
      if (truth_rank < 1) throw ConfigError("truth_rank must be at least 1");
      Rng truth_rng = Rng(cfg.get_seed("truth_seed", 0)).split(kTruthTag);
      out.reference = cp_reconstruct(random_loadings(shape, truth_rank, truth_rng));
    }
    if (out.reference->mode_count() < 2) {
      throw ConfigError("full tensor sources need at least two modes");
    }
    const std::int64_t m = cfg.get_int("subsample", batch);
    out.learner_batch = m;
    out.make_stream = [full = *out.reference, m, batches](std::uint64_t seed) {
      return subsample_stream(full, m, batches, Rng(seed));
    };
  } else if (kind == "markov") {
    auto spec = std::make_shared<MarkovChainSpec>(read_markov_spec(cfg.get_string("markov")));
    out.learner_batch = batch;
    out.make_stream = [spec, batches, batch](std::uint64_t seed) {
      return markov_tensor_stream(*spec, batches, batch, Rng(seed));
    };
  } else if (kind == "image") {
    DenseTensor img = ppm_read(cfg.get_string("image"));
    const std::int64_t patch = cfg.get_int("patch", 20);
    out.learner_batch = batch;
    out.make_stream = [img = std::move(img), patch, batches, batch](std::uint64_t seed) {
      return patch_stream(img, patch, batches, batch, Rng(seed));
    };
  } else {
    const auto files = list_stream_files(cfg.get_string("stream_dir"));
    auto loaded = std::make_shared<std::vector<DenseTensor>>();
    loaded->reserve(files.size());
    for (const auto& f : files) loaded->push_back(read_dtf1(f));
    out.learner_batch = batch;
    out.make_stream = [loaded](std::uint64_t) -> BatchStream {
      return [loaded, i = std::size_t{0}]() mutable -> std::optional<DenseTensor> {
        if (i >= loaded->size()) return std::nullopt;
        return (*loaded)[i++];
      };
    };
  }
  return out;
}

// --- method runners ---------------------------------------------------------

struct CurveResult {
  std::vector<TraceRecord> trace;
  LoadingSet loadings;
};

// Online run with per-step evaluation against the reference tensor when one
// exists: the learned data-mode factors are completed by refit_last_mode (a
// plain nonnegative least-squares fit, no l1 term) before measuring the
// full-tensor error, and the completed set is what gets written out.
CurveResult run_online(const SourceData& source, const MethodParams& p, std::uint64_t seed) {
  RunConfig rc;
  rc.rank = p.rank;
  rc.batch = source.learner_batch;
  rc.beta = p.beta;
  rc.balanced = p.balanced;
  rc.iterations = p.online_steps;
  rc.seed = seed;
  rc.coding = p.coding;
  rc.factor = p.factor;
  rc.validate();

  CodingSettings eval = p.coding;
  eval.lambda = 0.0;

  BatchStream stream = source.make_stream(stream_seed_for(seed));
  std::optional<DenseTensor> batch = stream();
  if (!batch) throw ConfigError("stream yielded no batches");
  Shape data_shape = batch->shape();
  data_shape.pop_back();

  CurveResult out;
  AggregateState state = init_state(rc, data_shape);
  for (std::int64_t i = 0; i < rc.iterations; ++i) {
    if (i > 0) {
      batch = stream();
      if (!batch) break;
    }
    TraceRecord rec = step(state, *batch, rc);
    if (source.reference) {
      out.loadings = refit_last_mode(*source.reference, state.loadings, eval);
      const DenseTensor recon = cp_reconstruct(out.loadings);
      rec.abs_err = abs_error(*source.reference, recon);
      rec.rel_err = rel_error(*source.reference, recon);
    }
    out.trace.push_back(std::move(rec));
  }
  if (!source.reference) out.loadings = state.loadings;
  return out;
}

CurveResult run_offline(const std::string& method, const SourceData& source,
                        const MethodParams& p, std::uint64_t seed) {
  if (!source.reference) {
    throw ConfigError("method '" + method +
                      "' needs a full tensor source (tensor= or synthetic=)");
  }
  BaselineSettings bs;
  bs.rank = p.rank;
  bs.sweeps = p.offline_sweeps;
  bs.seed = seed;
  bs.factor = p.factor;
  BaselineResult res = method == "als" ? run_als(*source.reference, bs)
                                       : run_mu(*source.reference, bs);
  return {std::move(res.trace), std::move(res.loadings)};
}

CurveResult run_method(const std::string& method, const SourceData& source,
                       const MethodParams& p, std::uint64_t seed) {
  if (method == "ocpdl") return run_online(source, p, seed);
  if (method == "als" || method == "mu") return run_offline(method, source, p, seed);
  throw ConfigError("unknown method '" + method + "' (expected ocpdl, als, or mu)");
}

std::vector<std::string> split_methods(const std::string& text) {
  std::vector<std::string> methods;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t comma = std::min(text.find(',', pos), text.size());
    const std::string part = trim(text.substr(pos, comma - pos));
    if (part.empty()) throw ConfigError("methods list has an empty entry");
    if (std::find(methods.begin(), methods.end(), part) != methods.end()) {
      throw ConfigError("method '" + part + "' listed twice");
    }
    methods.push_back(part);
    pos = comma + 1;
  }
  return methods;
}

std::size_t thread_budget(std::size_t jobs) {
  std::size_t n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("OCPDL_THREADS")) {
    const std::int64_t cap = parse_integer<std::int64_t>("OCPDL_THREADS", env);
    if (cap < 1) throw ConfigError("OCPDL_THREADS must be at least 1");
    n = std::min<std::size_t>(n, static_cast<std::size_t>(cap));
  }
  return std::min(n, std::max<std::size_t>(jobs, 1));
}

void write_run_outputs(const std::filesystem::path& out_dir,
                       const std::vector<RunCurve>& curves, const LoadingSet* loadings) {
  std::filesystem::create_directories(out_dir);
  write_trace_csv(curves, out_dir / "trace.csv");
  write_error_chart(curves, out_dir / "error_curve.svg");
  if (loadings) {
    for (std::int64_t j = 0; j < loadings->mode_count(); ++j) {
      write_dtf1(loadings->factor(j), out_dir / ("U" + std::to_string(j + 1) + ".dtf1"));
    }
  }
}

int guarded(const std::function<int()>& body) {
  try {
    return body();
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
}

}  // namespace

int cmd_factorize(const KeyValueConfig& cfg) {
  return guarded([&] {
    cfg.require_known(concat_keys({model_keys(), source_keys(), {"method", "sweeps", "out"}}));
    const std::string method = cfg.get_string("method");
    const std::filesystem::path out_dir = cfg.get_string("out");
    const MethodParams p = read_params(cfg, 50);
    const std::uint64_t seed = cfg.get_seed("seed", 0);
    const SourceData source =
        open_source(cfg, p.rank, p.online_steps, cfg.get_int("batch", 1));

    CurveResult res = run_method(method, source, p, seed);
    const std::vector<RunCurve> curves = {{method, 0, std::move(res.trace)}};
    write_run_outputs(out_dir, curves, &res.loadings);
    return 0;
  });
}

int cmd_bench(const KeyValueConfig& cfg) {
  return guarded([&] {
    cfg.require_known(concat_keys({model_keys(), source_keys(),
                                   {"methods", "trials", "sweeps", "out"}}));
    const std::vector<std::string> methods =
        split_methods(cfg.get_string("methods", "ocpdl,als,mu"));
    const std::int64_t trials = cfg.get_int("trials", 10);
    if (trials < 1) throw ConfigError("trials must be at least 1");
    const std::filesystem::path out_dir = cfg.get_string("out");
    // Offline sweeps default to the online budget so every curve has T rows.
    const MethodParams p = read_params(cfg, cfg.get_int("T", 100));
    const std::uint64_t base_seed = cfg.get_seed("seed", 0);
    const SourceData source =
        open_source(cfg, p.rank, p.online_steps, cfg.get_int("batch", 1));

    struct Job {
      std::string method;
      std::int64_t trial;
      std::uint64_t seed;
    };
    std::vector<Job> jobs;
    for (const std::string& m : methods) {
      if (m != "ocpdl" && m != "als" && m != "mu") {
        throw ConfigError("unknown method '" + m + "' (expected ocpdl, als, or mu)");
      }
      if ((m == "als" || m == "mu") && !source.reference) {
        throw ConfigError("method '" + m + "' needs a full tensor source (tensor= or synthetic=)");
      }
      for (std::int64_t trial = 0; trial < trials; ++trial) {
        // Trial j shares its seed across methods (paired starts), distinct
        // seeds across trials. Trial 0 keeps the base seed, so a single-trial
        // bench reproduces cmd_factorize exactly.
        const std::uint64_t trial_seed =
            trial == 0 ? base_seed
                       : Rng(base_seed).split(static_cast<std::uint64_t>(trial)).seed();
        jobs.push_back({m, trial, trial_seed});
      }
    }

    std::vector<RunCurve> curves(jobs.size());
    std::vector<std::string> failures(jobs.size());
    std::atomic<std::size_t> cursor{0};
    const auto worker = [&] {
      for (;;) {
        const std::size_t i = cursor.fetch_add(1);
        if (i >= jobs.size()) return;
        try {
          CurveResult res = run_method(jobs[i].method, source, p, jobs[i].seed);
          curves[i] = {jobs[i].method, jobs[i].trial, std::move(res.trace)};
        } catch (const std::exception& e) {
          failures[i] = e.what()[0] ? e.what() : "unknown error";
        }
      }
    };
    const std::size_t threads = thread_budget(jobs.size());
    if (threads <= 1) {
      worker();
    } else {
      std::vector<std::thread> pool;
      pool.reserve(threads);
      for (std::size_t i = 0; i < threads; ++i) pool.emplace_back(worker);
      for (std::thread& t : pool) t.join();
    }
    for (const std::string& f : failures) {
      if (!f.empty()) throw ConfigError(f);
    }

    write_run_outputs(out_dir, curves, nullptr);
    return 0;
  });
}

int cmd_diagnose(const KeyValueConfig& cfg) {
  int exit_code = 0;
  const int guarded_code = guarded([&] {
    cfg.require_known(concat_keys({model_keys(), source_keys(), {"sweep"}}));
    KeyValueConfig local = cfg;
    // Default scenario: a rank-4 synthetic truth streamed as 200 two-sample
    // minibatches of 8x8x8 data, learned with lambda 0.5 and balanced weights.
    if (!local.has("tensor") && !local.has("synthetic") && !local.has("markov") &&
        !local.has("image") && !local.has("stream_dir")) {
      local.set("synthetic", "8,8,8,100");
    }
    RunConfig rc;
    rc.rank = local.get_int("rank", 4);
    rc.batch = local.get_int("batch", 2);
    rc.beta = local.get_double("beta", 1.0);
    rc.balanced = local.get_bool("balanced", true);
    rc.iterations = local.get_int("T", 200);
    rc.seed = local.get_seed("seed", 0);
    rc.coding.lambda = local.get_double("lambda", 0.5);
    rc.coding.tol = local.get_double("coding_tol", rc.coding.tol);
    rc.coding.max_iters = static_cast<int>(local.get_int("coding_iters", rc.coding.max_iters));
    rc.coding.c_max = local.get_double("c_max", rc.coding.c_max);
    rc.factor.tol = local.get_double("factor_tol", rc.factor.tol);
    rc.factor.max_sweeps = static_cast<int>(local.get_int("factor_sweeps", rc.factor.max_sweeps));
    rc.factor.u_max = local.get_double("u_max", rc.factor.u_max);
    const std::string sweep = local.get_string("sweep", "sequential");
    if (sweep == "frozen") {
      rc.sweep_mode = SweepMode::frozen;
    } else if (sweep != "sequential") {
      throw ConfigError("sweep must be 'sequential' or 'frozen', got '" + sweep + "'");
    }
    rc.validate();

    const SourceData source = open_source(local, rc.rank, rc.iterations, rc.batch);
    const BatchStream stream = source.make_stream(stream_seed_for(rc.seed));
    const std::vector<InvariantReport> reports = diagnose(stream, rc);
    exit_code = print_reports(reports, stdout) ? 0 : 1;
    return 0;
  });
  return guarded_code != 0 ? guarded_code : exit_code;
}

int cmd_patches(const KeyValueConfig& cfg) {
  return guarded([&] {
    cfg.require_known({"image", "patch", "T", "batch", "seed", "out"});
    const std::filesystem::path out_dir = cfg.get_string("out");
    const DenseTensor img = ppm_read(cfg.get_string("image"));
    const std::int64_t patch = cfg.get_int("patch", 20);
    const std::int64_t batches = cfg.get_int("T", 100);
    const std::int64_t per_batch = cfg.get_int("batch", 1);
    const std::uint64_t seed = cfg.get_seed("seed", 0);

    BatchStream stream = patch_stream(img, patch, batches, per_batch,
                                      Rng(stream_seed_for(seed)));
    std::vector<DenseTensor> all;
    all.reserve(static_cast<std::size_t>(batches));
    while (auto batch = stream()) all.push_back(std::move(*batch));

    std::filesystem::create_directories(out_dir);
    char name[32];
    for (std::size_t i = 0; i < all.size(); ++i) {
      std::snprintf(name, sizeof(name), "batch_%06zu.dtf1", i + 1);
      write_dtf1(all[i], out_dir / name);
    }
    return 0;
  });
}

namespace {

struct SubCommand {
  CLI::App* app = nullptr;
  std::string config_file;
  std::map<std::string, std::string> overrides;
  int (*run)(const KeyValueConfig&) = nullptr;
};

void add_key_options(CLI::App* sub, SubCommand& state, const std::vector<std::string>& keys) {
  for (const std::string& key : keys) {
    sub->add_option_function<std::string>(
        "--" + key,
        [&state, key](const std::string& value) { state.overrides[key] = value; },
        "sets " + key);
  }
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"streaming nonnegative CP tensor factorization workbench"};
  app.name("ocpdl");
  app.require_subcommand(1);

  std::array<SubCommand, 4> subs;
  const auto setup = [&](std::size_t i, const char* name, const char* help,
                         int (*run)(const KeyValueConfig&), const std::vector<std::string>& keys) {
    subs[i].app = app.add_subcommand(name, help);
    subs[i].run = run;
    subs[i].app->add_option("--config", subs[i].config_file, "key=value config file");
    add_key_options(subs[i].app, subs[i], keys);
  };
  setup(0, "factorize", "run one method and write its trace, chart, and loadings",
        &cmd_factorize, concat_keys({model_keys(), source_keys(), {"method", "sweeps", "out"}}));
  setup(1, "bench", "run methods x trials and write a combined trace and chart",
        &cmd_bench, concat_keys({model_keys(), source_keys(), {"methods", "trials", "sweeps", "out"}}));
  setup(2, "diagnose", "run the online learner and check its step-wise guarantees",
        &cmd_diagnose, concat_keys({model_keys(), source_keys(), {"sweep"}}));
  setup(3, "patches", "extract random image patches into a minibatch directory",
        &cmd_patches, {"image", "patch", "T", "batch", "seed", "out"});

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(std::move(reversed));
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  for (SubCommand& sub : subs) {
    if (!app.got_subcommand(sub.app)) continue;
    try {
      KeyValueConfig cfg = sub.config_file.empty()
                               ? KeyValueConfig{}
                               : KeyValueConfig::from_file(sub.config_file);
      for (const auto& [key, value] : sub.overrides) cfg.set(key, value);
      return sub.run(cfg);
    } catch (const std::exception& e) {
      std::fprintf(stderr, "error: %s\n", e.what());
      return 2;
    }
  }
  return 2;
}

}  // namespace ocpdl
