#include "ally/harness.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <set>
#include <sstream>

#include "ally/error.hpp"
#include "ally/io.hpp"
#include "ally/report_json.hpp"
#include "ally/rng.hpp"

namespace ally {

const char* to_string(DataSource s) noexcept {
  switch (s) {
    case DataSource::synth_blobs: return "synth_blobs";
    case DataSource::synth_regression: return "synth_regression";
    case DataSource::idx_files: return "idx_files";
    case DataSource::csv: return "csv";
  }
  return "?";
}

DataSource parse_data_source(const std::string& name) {
  for (auto s : {DataSource::synth_blobs, DataSource::synth_regression, DataSource::idx_files,
                 DataSource::csv})
    if (name == to_string(s)) return s;
  fail(ErrorKind::config, "unknown dataset source '" + name + "'");
}

namespace {

const char* to_string(Normalization n) {
  switch (n) {
    case Normalization::none: return "none";
    case Normalization::minmax: return "minmax";
    case Normalization::zscore: return "zscore";
  }
  return "?";
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream ss(s);
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

template <class T>
T parse_number(const std::string& key, const std::string& value) {
  const std::string v = trim(value);
  T out{};
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || ec != std::errc{} || ptr != v.data() + v.size())
    fail(ErrorKind::config, "setting '" + key + "': cannot parse '" + value + "' as a number");
  if constexpr (std::is_floating_point_v<T>)
    require(std::isfinite(out), ErrorKind::config, "setting '" + key + "': value must be finite");
  return out;
}

template <class T>
std::vector<T> parse_numbers(const std::string& key, const std::string& value) {
  std::vector<T> out;
  for (const auto& item : split_list(value)) out.push_back(parse_number<T>(key, item));
  return out;
}

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

template <class T>
std::string join(const std::vector<T>& v) {
  std::ostringstream os;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) os << ',';
    if constexpr (std::is_floating_point_v<T>)
      os << fmt(v[i]);
    else
      os << v[i];
  }
  return os.str();
}

struct Setting {
  const char* key;
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

#define ALLY_NUM(KEY, FIELD, TYPE)                                                        \
  Setting {                                                                               \
    KEY, [](ExperimentConfig& c, const std::string& v) { c.FIELD = parse_number<TYPE>(KEY, v); }, \
        [](const ExperimentConfig& c) {                                                   \
          if constexpr (std::is_floating_point_v<TYPE>)                                   \
            return fmt(c.FIELD);                                                          \
          else                                                                            \
            return std::to_string(c.FIELD);                                               \
        }                                                                                 \
  }
#define ALLY_STR(KEY, FIELD)                                                              \
  Setting {                                                                               \
    KEY, [](ExperimentConfig& c, const std::string& v) { c.FIELD = trim(v); },            \
        [](const ExperimentConfig& c) { return std::string(c.FIELD.string()); }           \
  }

const std::vector<Setting>& settings() {
  static const std::vector<Setting> table = {
      {"dataset.source",
       [](ExperimentConfig& c, const std::string& v) { c.dataset.source = parse_data_source(trim(v)); },
       [](const ExperimentConfig& c) { return std::string(to_string(c.dataset.source)); }},
      {"dataset.normalization",
       [](ExperimentConfig& c, const std::string& v) {
         c.dataset.normalization = parse_normalization(trim(v));
       },
       [](const ExperimentConfig& c) { return std::string(to_string(c.dataset.normalization)); }},
      ALLY_NUM("dataset.seed", dataset.seed, std::uint64_t),
      ALLY_NUM("dataset.n_initial", dataset.n_initial, std::size_t),
      ALLY_NUM("dataset.redundancy", dataset.redundancy, std::size_t),
      ALLY_NUM("dataset.test_fraction", dataset.test_fraction, double),
      ALLY_NUM("dataset.pool_limit", dataset.pool_limit, std::size_t),
      ALLY_NUM("blobs.n_per_class", dataset.blobs.n_per_class, std::size_t),
      ALLY_NUM("blobs.n_classes", dataset.blobs.n_classes, std::size_t),
      ALLY_NUM("blobs.dim", dataset.blobs.dim, std::size_t),
      ALLY_NUM("blobs.spread", dataset.blobs.spread, double),
      ALLY_NUM("blobs.separation", dataset.blobs.separation, double),
      ALLY_NUM("blobs.test_per_class", dataset.blobs.test_per_class, std::size_t),
      ALLY_NUM("regression.n", dataset.regression.n, std::size_t),
      ALLY_NUM("regression.n_test", dataset.regression.n_test, std::size_t),
      ALLY_NUM("regression.dim", dataset.regression.dim, std::size_t),
      ALLY_NUM("regression.noise", dataset.regression.noise, double),
      ALLY_STR("idx.train_images", dataset.train_images),
      ALLY_STR("idx.train_labels", dataset.train_labels),
      ALLY_STR("idx.test_images", dataset.test_images),
      ALLY_STR("idx.test_labels", dataset.test_labels),
      ALLY_STR("csv.path", dataset.csv_path),
      {"csv.targets",
       [](ExperimentConfig& c, const std::string& v) { c.dataset.target_columns = split_list(v); },
       [](const ExperimentConfig& c) { return join(c.dataset.target_columns); }},
      {"csv.features",
       [](ExperimentConfig& c, const std::string& v) { c.dataset.feature_columns = split_list(v); },
       [](const ExperimentConfig& c) { return join(c.dataset.feature_columns); }},
      {"model.hidden",
       [](ExperimentConfig& c, const std::string& v) {
         c.hidden_dims = parse_numbers<std::size_t>("model.hidden", v);
       },
       [](const ExperimentConfig& c) { return join(c.hidden_dims); }},
      ALLY_NUM("pdcl.eta_p", pdcl.eta_p, double),
      ALLY_NUM("pdcl.eta_d", pdcl.eta_d, double),
      ALLY_NUM("pdcl.max_iters", pdcl.max_iters, std::size_t),
      ALLY_NUM("pdcl.primal_steps", pdcl.primal_steps, std::size_t),
      {"pdcl.epsilon",
       [](ExperimentConfig& c, const std::string& v) {
         c.pdcl.epsilon = trim(v) == "auto" ? std::vector<double>{}
                                            : parse_numbers<double>("pdcl.epsilon", v);
       },
       [](const ExperimentConfig& c) {
         return c.pdcl.epsilon.empty() ? std::string("auto") : join(c.pdcl.epsilon);
       }},
      ALLY_NUM("pdcl.patience", pdcl.patience, std::size_t),
      ALLY_NUM("pdcl.validation_fraction", pdcl.validation_fraction, double),
      ALLY_NUM("pdcl.batch_size", pdcl.batch_size, std::size_t),
      {"pdcl.optimizer",
       [](ExperimentConfig& c, const std::string& v) {
         const auto s = trim(v);
         if (s == "adam")
           c.pdcl.primal_optimizer = OptimizerKind::adam;
         else if (s == "sgd")
           c.pdcl.primal_optimizer = OptimizerKind::sgd;
         else
           fail(ErrorKind::config, "setting 'pdcl.optimizer': expected adam or sgd, got '" + s + "'");
       },
       [](const ExperimentConfig& c) {
         return std::string(c.pdcl.primal_optimizer == OptimizerKind::adam ? "adam" : "sgd");
       }},
      {"dual_head.hidden",
       [](ExperimentConfig& c, const std::string& v) {
         c.dual_head.hidden_dims = parse_numbers<std::size_t>("dual_head.hidden", v);
       },
       [](const ExperimentConfig& c) { return join(c.dual_head.hidden_dims); }},
      ALLY_NUM("dual_head.lr", dual_head.lr, double),
      ALLY_NUM("dual_head.epochs", dual_head.epochs, std::size_t),
      {"strategies",
       [](ExperimentConfig& c, const std::string& v) {
         c.strategies.clear();
         for (const auto& s : split_list(v)) c.strategies.push_back(parse_strategy(s));
       },
       [](const ExperimentConfig& c) {
         std::vector<std::string> names;
         for (auto s : c.strategies) names.emplace_back(to_string(s));
         return join(names);
       }},
      ALLY_NUM("budget", budget, std::size_t),
      ALLY_NUM("n_rounds", n_rounds, std::size_t),
      ALLY_NUM("k_clusters", k_clusters, std::size_t),
      {"seeds",
       [](ExperimentConfig& c, const std::string& v) {
         c.seeds = parse_numbers<std::uint64_t>("seeds", v);
       },
       [](const ExperimentConfig& c) { return join(c.seeds); }},
      ALLY_STR("output_dir", output_dir),
      ALLY_NUM("generate.n_trajectories", generate.n_trajectories, std::size_t),
      ALLY_NUM("generate.step_size", generate.step_size, double),
      ALLY_NUM("generate.n_steps", generate.n_steps, std::size_t),
      ALLY_NUM("generate.snapshot_every", generate.snapshot_every, std::size_t),
      ALLY_NUM("generate.fraction", generate.uninformative_fraction, double),
      ALLY_NUM("generate.image_rows", generate.image_rows, std::size_t),
      ALLY_NUM("generate.image_cols", generate.image_cols, std::size_t),
  };
  return table;
}

#undef ALLY_NUM
#undef ALLY_STR

std::vector<double> resolved_epsilon(const PdclConfig& pdcl, LossKind kind) {
  if (!pdcl.epsilon.empty()) return pdcl.epsilon;
  return {kind == LossKind::cross_entropy ? 0.2 : 0.1};
}

std::size_t class_count(const Pool& pool) {
  int top = -1;
  for (int c : pool.labels.classes) top = std::max(top, c);
  for (int c : pool.test_labels.classes) top = std::max(top, c);
  return static_cast<std::size_t>(top + 1);
}

double elapsed(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

// ---------------------------------------------------------------- config

void ExperimentConfig::validate() const {
  require(!seeds.empty(), ErrorKind::config, "config: seeds must not be empty");
  require(!strategies.empty(), ErrorKind::config, "config: strategies must not be empty");
  require(budget >= 1, ErrorKind::config, "config: budget must be >= 1");
  require(n_rounds >= 1, ErrorKind::config, "config: n_rounds must be >= 1");
  require(effective_k() <= budget, ErrorKind::config,
          "config: k_clusters (" + std::to_string(k_clusters) + ") must be <= budget (" +
              std::to_string(budget) + ")");
  require(dataset.n_initial >= 1, ErrorKind::config, "config: dataset.n_initial must be >= 1");
  require(dataset.redundancy >= 1, ErrorKind::config, "config: dataset.redundancy must be >= 1");
  require(dataset.test_fraction > 0.0 && dataset.test_fraction < 1.0, ErrorKind::config,
          "config: dataset.test_fraction must lie in (0, 1)");
  for (std::size_t h : hidden_dims)
    require(h >= 1, ErrorKind::config, "config: model.hidden widths must be >= 1");
  PdclConfig p = pdcl;
  if (p.epsilon.empty()) p.epsilon = {0.2};
  p.validate();
  dual_head.validate();
  switch (dataset.source) {
    case DataSource::idx_files:
      require(!dataset.train_images.empty() && !dataset.train_labels.empty(), ErrorKind::config,
              "config: idx_files needs idx.train_images and idx.train_labels");
      require(dataset.test_images.empty() == dataset.test_labels.empty(), ErrorKind::config,
              "config: set both idx.test_images and idx.test_labels or neither");
      break;
    case DataSource::csv:
      require(!dataset.csv_path.empty(), ErrorKind::config, "config: csv needs csv.path");
      require(!dataset.target_columns.empty(), ErrorKind::config, "config: csv needs csv.targets");
      break;
    default: break;
  }
}

ExperimentConfig default_config(DataSource source) {
  ExperimentConfig c;
  c.dataset.source = source;
  if (source == DataSource::csv) c.dataset.normalization = Normalization::zscore;
  return c;
}

void apply_setting(ExperimentConfig& config, const std::string& key, const std::string& value) {
  const std::string k = trim(key);
  for (const auto& s : settings())
    if (k == s.key) {
      s.set(config, value);
      return;
    }
  fail(ErrorKind::config, "unknown setting '" + k + "'");
}

ExperimentConfig parse_config(const std::string& text, ExperimentConfig base) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      fail(ErrorKind::config, "config line " + std::to_string(line_no) + ": expected key = value");
    try {
      apply_setting(base, line.substr(0, eq), line.substr(eq + 1));
    } catch (const Error& e) {
      fail(ErrorKind::config, "config line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return base;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::config, "cannot open config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string serialize_config(const ExperimentConfig& config) {
  std::string out;
  for (const auto& s : settings()) out += std::string(s.key) + " = " + s.get(config) + "\n";
  return out;
}

std::string config_hash(const ExperimentConfig& config) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : serialize_config(config)) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

// ---------------------------------------------------------------- data

Pool load_dataset(const DatasetSpec& spec) {
  Pool pool;
  switch (spec.source) {
    case DataSource::synth_blobs: {
      BlobsSpec b = spec.blobs;
      b.seed = spec.seed;
      pool = synth_blobs(b);
      break;
    }
    case DataSource::synth_regression: {
      RegressionSpec r = spec.regression;
      r.seed = spec.seed;
      pool = synth_regression(r);
      break;
    }
    case DataSource::idx_files: {
      pool = load_idx(spec.train_images, spec.train_labels);
      if (!spec.test_images.empty()) {
        Pool test = load_idx(spec.test_images, spec.test_labels);
        pool.test_features = std::move(test.features);
        pool.test_labels = std::move(test.labels);
      } else {
        pool = carve_test_split(pool, spec.test_fraction, spec.seed);
      }
      break;
    }
    case DataSource::csv: {
      pool = load_csv(spec.csv_path, spec.target_columns, spec.feature_columns, Normalization::none);
      pool = carve_test_split(pool, spec.test_fraction, spec.seed);
      break;
    }
  }
  if (spec.pool_limit > 0 && spec.pool_limit < pool.size()) {
    std::vector<std::size_t> keep(spec.pool_limit);
    for (std::size_t i = 0; i < keep.size(); ++i) keep[i] = i;
    Pool cut = make_pool(pool.features.select_rows(keep), pool.labels.select(keep));
    cut.test_features = std::move(pool.test_features);
    cut.test_labels = std::move(pool.test_labels);
    pool = std::move(cut);
  }
  // statistics come from the pool only; the test split is transformed with them
  normalize_pool(pool, spec.normalization, spec.source == DataSource::csv);
  pool.check_invariants();
  return pool;
}

// ---------------------------------------------------------------- rounds

double test_metric(const ModelParams& params, const Pool& pool, std::string* name) {
  require(pool.test_features.rows() > 0, ErrorKind::input, "test split is empty");
  const Matrix out = forward(params, pool.test_features).outputs;
  if (pool.test_labels.kind == LossKind::cross_entropy) {
    if (name) *name = "accuracy";
    std::size_t hits = 0;
    for (std::size_t r = 0; r < out.rows(); ++r) {
      const auto row = out.row(r);
      const auto best = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
      hits += best == pool.test_labels.classes[r];
    }
    return static_cast<double>(hits) / static_cast<double>(out.rows());
  }
  if (name) *name = "mse";
  const auto loss = mse(out, pool.test_labels.values);
  double s = 0.0;
  for (double v : loss.values) s += v;
  return s / static_cast<double>(loss.values.size());
}

TrainedModel train_model(const Pool& pool, const ExperimentConfig& config, std::uint64_t seed,
                         bool with_dual_head) {
  const LabeledSet labeled = pool.labeled();
  const bool classify = pool.labels.kind == LossKind::cross_entropy;
  MlpArchitecture arch;
  arch.input_dim = pool.dim();
  arch.hidden_dims = config.hidden_dims;
  arch.output_dim = classify ? class_count(pool) : pool.labels.values.cols();
  arch.activation = Activation::relu;
  PdclConfig pc = config.pdcl;
  pc.epsilon = resolved_epsilon(pc, pool.labels.kind);

  PdclResult trained = pdcl_train(labeled, arch, pc, seed);
  TrainedModel out{std::move(trained.params), std::move(trained.dual), std::move(trained.report)};
  if (with_dual_head) {
    const Matrix emb_l = embed(out.params, labeled.features.select_rows(out.report.train_indices));
    DualHeadConfig dh = config.dual_head;
    dh.seed = derive_seed(seed, 0xd0a1ULL);
    out.params.dual_head = train_dual_head(emb_l, out.dual.lambdas, dh);
    out.report.dual_head_trained = true;
  }
  return out;
}

RoundOutcome al_round(const Pool& pool, const ExperimentConfig& config, Strategy strategy,
                      std::size_t round, std::uint64_t seed) {
  require(!pool.unlabeled_idx.empty(), ErrorKind::input,
          "round " + std::to_string(round) + ": unlabeled set is empty");
  const std::uint64_t rs = derive_seed(seed, 0x40000ULL + round);
  try {
    const bool needs_head = strategy == Strategy::ally || strategy == Strategy::top_dual;
    TrainedModel trained = train_model(pool, config, rs, needs_head);
    RoundOutcome out;
    out.report = std::move(trained.report);
    out.point.strategy = strategy;
    out.point.seed = seed;
    out.point.round = round;
    out.point.n_labeled = pool.labeled_idx.size();
    out.point.k = config.effective_k();
    out.point.metric_value = test_metric(trained.params, pool, &out.point.metric_name);

    const std::size_t n_u = pool.unlabeled_idx.size();
    const std::size_t b = std::min(config.budget, n_u);
    const Matrix emb_u = embed(trained.params, pool.unlabeled_features());
    switch (strategy) {
      case Strategy::ally:
      case Strategy::top_dual: {
        const auto preds = predict_duals(trained.params.dual_head, emb_u);
        if (strategy == Strategy::ally)
          out.batch = ally_select(emb_u, preds, b, std::min(config.effective_k(), b),
                                  derive_seed(rs, 0xc1ULL));
        else
          out.batch = top_dual_select(preds, b);
        break;
      }
      case Strategy::random:
        out.batch = random_select(n_u, b, derive_seed(rs, 0x5e1ULL));
        break;
      case Strategy::coreset:
        out.batch = coreset_select(embed(trained.params, pool.labeled_features()), emb_u, b);
        break;
    }

    std::set<std::size_t> labeled_sources, batch_sources;
    for (std::size_t i : pool.labeled_idx) labeled_sources.insert(pool.provenance[i]);
    for (std::size_t p : out.batch.indices) {
      const std::size_t src = pool.provenance[pool.unlabeled_idx[p]];
      out.dup_labeled += labeled_sources.count(src);
      out.dup_in_batch += !batch_sources.insert(src).second;
    }
    out.pool = move_to_labeled(pool, out.batch.indices);
    return out;
  } catch (const TrainingAborted& e) {
    throw TrainingAborted("round " + std::to_string(round) + ": " + e.what(), e.report());
  } catch (const Error& e) {
    fail(e.kind(), "round " + std::to_string(round) + ": " + e.what());
  }
}

// ---------------------------------------------------------------- experiments

bool ExperimentResult::all_ok() const noexcept {
  return std::all_of(cells.begin(), cells.end(), [](const CellRecord& c) { return c.ok; });
}

std::vector<SummaryRow> summarize(const std::vector<CurvePoint>& points) {
  std::map<std::tuple<std::string, std::size_t, std::size_t, std::string>, std::vector<const CurvePoint*>>
      groups;
  for (const auto& p : points)
    groups[{to_string(p.strategy), p.k, p.round, p.metric_name}].push_back(&p);
  std::vector<SummaryRow> rows;
  for (const auto& [key, members] : groups) {
    SummaryRow r;
    r.strategy = members.front()->strategy;
    r.k = members.front()->k;
    r.round = members.front()->round;
    r.n_labeled = members.front()->n_labeled;
    r.metric_name = members.front()->metric_name;
    r.n_seeds = members.size();
    for (const auto* m : members) r.mean += m->metric_value;
    r.mean /= static_cast<double>(r.n_seeds);
    if (r.n_seeds > 1) {
      double ss = 0.0;
      for (const auto* m : members) ss += (m->metric_value - r.mean) * (m->metric_value - r.mean);
      r.std = std::sqrt(ss / static_cast<double>(r.n_seeds - 1));
    }
    rows.push_back(r);
  }
  return rows;
}

std::string curves_csv(const std::vector<CurvePoint>& points) {
  std::ostringstream os;
  os << "strategy,seed,round,n_labeled,metric_name,metric_value,k\n";
  for (const auto& p : points)
    os << to_string(p.strategy) << ',' << p.seed << ',' << p.round << ',' << p.n_labeled << ','
       << p.metric_name << ',' << fmt(p.metric_value) << ',' << p.k << '\n';
  return os.str();
}

std::string summary_csv(const std::vector<SummaryRow>& rows) {
  std::ostringstream os;
  os << "strategy,k,round,n_labeled,metric_name,mean,std,n_seeds\n";
  for (const auto& r : rows)
    os << to_string(r.strategy) << ',' << r.k << ',' << r.round << ',' << r.n_labeled << ','
       << r.metric_name << ',' << fmt(r.mean) << ',' << fmt(r.std) << ',' << r.n_seeds << '\n';
  return os.str();
}

void write_experiment(const ExperimentResult& result, const ExperimentConfig& config,
                      const std::filesystem::path& dir) {
  write_file_atomic(dir / "curves.csv", curves_csv(result.points));
  write_file_atomic(dir / "summary.csv", summary_csv(result.summary));
  write_file_atomic(dir / "meta.json", experiment_meta(result, config).dump(2) + "\n");
}

ExperimentResult run_experiment(const ExperimentConfig& config, bool write_outputs) {
  config.validate();
  const auto t0 = std::chrono::steady_clock::now();
  ExperimentResult result;
  result.config_hash = config_hash(config);
  const Pool base = load_dataset(config.dataset);
  require(config.dataset.n_initial <= base.size(), ErrorKind::config,
          "config: dataset.n_initial exceeds the pool size " + std::to_string(base.size()));

  for (std::uint64_t seed : config.seeds) {
    Pool start = split_initial(base, config.dataset.n_initial, seed);
    if (config.dataset.redundancy > 1) start = clone_redundant(start, config.dataset.redundancy);
    for (Strategy strategy : config.strategies) {
      const auto tc = std::chrono::steady_clock::now();
      CellRecord cell;
      cell.strategy = strategy;
      cell.seed = seed;
      cell.k = config.effective_k();
      std::vector<CurvePoint> points;
      Pool pool = start;
      try {
        for (std::size_t round = 0; round < config.n_rounds && !pool.unlabeled_idx.empty(); ++round) {
          RoundOutcome r = al_round(pool, config, strategy, round, seed);
          points.push_back(r.point);
          cell.violation_fractions.push_back(r.report.violation_fraction);
          cell.dual_head_trained.push_back(r.report.dual_head_trained);
          cell.dup_labeled.push_back(r.dup_labeled);
          cell.dup_in_batch.push_back(r.dup_in_batch);
          pool = std::move(r.pool);
        }
      } catch (const std::exception& e) {
        cell.ok = false;
        cell.error = e.what();
      }
      cell.seconds = elapsed(tc);
      if (write_outputs) {
        const std::string stem = std::string(to_string(strategy)) + "_k" + std::to_string(cell.k) +
                                 "_seed" + std::to_string(seed);
        const auto cells_dir = config.output_dir / "cells";
        write_file_atomic(cells_dir / (stem + ".csv"), curves_csv(points));
        write_file_atomic(cells_dir / (stem + ".json"), to_json(cell).dump(2) + "\n");
      }
      result.points.insert(result.points.end(), points.begin(), points.end());
      result.cells.push_back(std::move(cell));
    }
  }
  result.summary = summarize(result.points);
  result.wall_seconds = elapsed(t0);
  if (write_outputs) write_experiment(result, config, config.output_dir);
  return result;
}

std::vector<std::size_t> cluster_grid(std::vector<std::size_t> k_values, std::size_t budget) {
  k_values.push_back(1);
  k_values.push_back(budget);
  for (std::size_t k : k_values)
    require(k >= 1 && k <= budget, ErrorKind::config,
            "sweep: cluster count " + std::to_string(k) + " must lie in [1, budget]");
  std::sort(k_values.begin(), k_values.end());
  k_values.erase(std::unique(k_values.begin(), k_values.end()), k_values.end());
  return k_values;
}

std::map<std::size_t, ExperimentResult> sweep_clusters(const ExperimentConfig& config,
                                                       const std::vector<std::size_t>& k_values,
                                                       bool write_outputs) {
  std::map<std::size_t, ExperimentResult> out;
  std::vector<CurvePoint> combined;
  for (std::size_t k : cluster_grid(k_values, config.budget)) {
    ExperimentConfig c = config;
    c.k_clusters = k;
    c.strategies = {Strategy::ally};
    c.output_dir = config.output_dir / ("k" + std::to_string(k));
    out[k] = run_experiment(c, write_outputs);
    combined.insert(combined.end(), out[k].points.begin(), out[k].points.end());
  }
  if (write_outputs) {
    write_file_atomic(config.output_dir / "curves.csv", curves_csv(combined));
    write_file_atomic(config.output_dir / "summary.csv", summary_csv(summarize(combined)));
  }
  return out;
}

namespace {

std::map<std::uint64_t, double> ally_gap(const ExperimentResult& r) {
  std::map<std::pair<std::uint64_t, std::size_t>, double> ally, random;
  for (const auto& p : r.points) {
    const double v = p.metric_name == "mse" ? -p.metric_value : p.metric_value;
    if (p.strategy == Strategy::ally) ally[{p.seed, p.round}] = v;
    if (p.strategy == Strategy::random) random[{p.seed, p.round}] = v;
  }
  std::map<std::uint64_t, double> sum;
  std::map<std::uint64_t, std::size_t> count;
  for (const auto& [key, v] : ally) {
    const auto it = random.find(key);
    if (it == random.end()) continue;
    sum[key.first] += v - it->second;
    ++count[key.first];
  }
  for (auto& [seed, s] : sum) s /= static_cast<double>(count[seed]);
  return sum;
}

}  // namespace

RedundancyComparison sweep_redundancy(const ExperimentConfig& config, std::size_t factor,
                                      bool write_outputs) {
  require(factor >= 1, ErrorKind::config, "sweep-redundancy: factor must be >= 1");
  RedundancyComparison cmp;
  cmp.factor = factor;
  ExperimentConfig base = config;
  base.strategies = {Strategy::ally, Strategy::random};
  base.dataset.redundancy = 1;
  base.output_dir = config.output_dir / "original";
  ExperimentConfig cloned = base;
  cloned.dataset.redundancy = factor;
  cloned.output_dir = config.output_dir / ("cloned_x" + std::to_string(factor));
  cmp.original = run_experiment(base, write_outputs);
  cmp.cloned = run_experiment(cloned, write_outputs);
  cmp.gap_original = ally_gap(cmp.original);
  cmp.gap_cloned = ally_gap(cmp.cloned);
  for (const auto& c : cmp.cloned.cells)
    if (c.strategy == Strategy::ally)
      for (std::size_t d : c.dup_labeled) cmp.dup_labeled_cloned += d;
  if (write_outputs) {
    std::ostringstream os;
    os << "seed,gap_original,gap_cloned,factor\n";
    for (const auto& [seed, g] : cmp.gap_original) {
      const auto it = cmp.gap_cloned.find(seed);
      os << seed << ',' << fmt(g) << ',' << (it == cmp.gap_cloned.end() ? std::string("nan") : fmt(it->second))
         << ',' << factor << '\n';
    }
    write_file_atomic(config.output_dir / "redundancy.csv", os.str());
  }
  return cmp;
}

// ---------------------------------------------------------------- generation

GenerateResult run_generate(const ExperimentConfig& config, bool write_outputs) {
  config.validate();
  const GenerateOptions& g = config.generate;
  require(g.n_trajectories >= 1, ErrorKind::config, "generate.n_trajectories must be >= 1");
  require(g.uninformative_fraction > 0.0 && g.uninformative_fraction <= 1.0, ErrorKind::config,
          "generate.fraction must lie in (0, 1]");
  const Pool base = load_dataset(config.dataset);
  require(config.dataset.n_initial < base.size(), ErrorKind::config,
          "config: dataset.n_initial must leave unlabeled rows");
  const std::uint64_t seed = config.seeds.front();
  const Pool pool = split_initial(base, config.dataset.n_initial, seed);
  TrainedModel trained = train_model(pool, config, derive_seed(seed, 0x6e7ULL), true);

  GenerateResult out;
  out.report = trained.report;
  const auto values = base.features.values();
  out.clip_lo = *std::min_element(values.begin(), values.end());
  out.clip_hi = *std::max_element(values.begin(), values.end());
  require(out.clip_lo < out.clip_hi, ErrorKind::input, "generate: features have no range");

  AscentConfig ac = AscentConfig::with_range(pool.dim(), out.clip_lo, out.clip_hi);
  ac.step_size = g.step_size;
  ac.n_steps = g.n_steps;
  ac.snapshot_every = g.snapshot_every;
  ac.validate(pool.dim());

  const Matrix unlabeled = pool.unlabeled_features();
  const auto low = least_informative(trained.params, unlabeled, g.uninformative_fraction);
  const std::size_t n = std::min(g.n_trajectories, low.size());
  for (std::size_t t = 0; t < n; ++t) {
    // evenly spaced through the low-score set, lowest first
    const std::size_t pos = low.size() == 1 ? 0 : t * (low.size() - 1) / std::max<std::size_t>(1, n - 1);
    const std::size_t row = low[pos];
    out.start_rows.push_back(pool.unlabeled_idx[row]);
    out.trajectories.push_back(ascend_input(trained.params, unlabeled.row(row), ac));
  }

  if (write_outputs) {
    write_score_trace(config.output_dir / "scores.csv", out.trajectories);
    nlohmann::json j = {{"clip_lo", out.clip_lo},
                        {"clip_hi", out.clip_hi},
                        {"start_rows", out.start_rows},
                        {"train_report", to_json(out.report)},
                        {"config_hash", config_hash(config)}};
    j["trajectories"] = nlohmann::json::array();
    for (const auto& t : out.trajectories) j["trajectories"].push_back(to_json(t));
    write_file_atomic(config.output_dir / "generate.json", j.dump(2) + "\n");

    std::size_t rows = g.image_rows, cols = g.image_cols;
    if (rows == 0 || cols == 0) {
      const auto side = static_cast<std::size_t>(std::lround(std::sqrt(static_cast<double>(pool.dim()))));
      if (side * side == pool.dim()) rows = cols = side;
    }
    if (rows * cols == pool.dim() && rows > 0) {
      // one grid row per trajectory, one tile per snapshot
      std::vector<std::vector<double>> tiles;
      std::size_t width = 0;
      for (const auto& t : out.trajectories) width = std::max(width, t.snapshots.size());
      for (const auto& t : out.trajectories)
        for (std::size_t s = 0; s < width; ++s)
          tiles.push_back(t.snapshots[std::min(s, t.snapshots.size() - 1)].x);
      write_pgm_grid(config.output_dir / "snapshots.pgm", tiles, rows, cols, width, out.clip_lo,
                     out.clip_hi);
    }
  }
  return out;
}

}  // namespace ally
