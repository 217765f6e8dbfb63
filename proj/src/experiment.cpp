#include "fwgd/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <functional>
#include <limits>
#include <set>
#include <sstream>

#include "json.hpp"

namespace fwgd {

namespace {

constexpr std::uint64_t kDataStream = 0x4d56;  // "MV"
constexpr char kMagic[8] = {'F', 'W', 'G', 'D', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kCheckpointVersion = 1;

std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const std::string& expected) {
  throw ConfigError("config key '" + key + "': expected " + expected + ", got '" + value + "'");
}

std::size_t to_size(const std::string& key, const std::string& v) {
  std::size_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || ec != std::errc() || ptr != v.data() + v.size()) bad_value(key, v, "a non-negative integer");
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  std::string_view s = v;
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(out))
    bad_value(key, v, "a finite number");
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true") return true;
  if (v == "false") return false;
  bad_value(key, v, "true or false");
}

std::optional<bool> to_opt_bool(const std::string& key, const std::string& v) {
  if (v == "auto") return std::nullopt;
  if (v == "true") return true;
  if (v == "false") return false;
  bad_value(key, v, "auto, true or false");
}

std::vector<std::size_t> to_size_list(const std::string& key, const std::string& v) {
  std::vector<std::size_t> out;
  if (v.empty()) return out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(to_size(key, trim(item)));
  return out;
}

std::string fmt(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

std::string fmt(const std::vector<std::size_t>& v) {
  std::string out;
  for (std::size_t k = 0; k < v.size(); ++k) out += (k ? "," : "") + std::to_string(v[k]);
  return out;
}

std::string fmt(std::optional<bool> v) { return v ? (*v ? "true" : "false") : "auto"; }
std::string fmt(bool v) { return v ? "true" : "false"; }

struct Field {
  std::string key;
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

const std::vector<Field>& fields() {
  using C = ExperimentConfig;
  static const std::vector<Field> table = {
      {"space",
       [](C& c, const std::string& v) {
         try {
           c.train.space = parse_inference_space(v);
         } catch (const std::exception&) {
           bad_value("space", v, "feature, weight, function or none");
         }
       },
       [](const C& c) { return to_string(c.train.space); }},
      {"ensemble_size", [](C& c, const std::string& v) { c.train.ensemble_size = to_size("ensemble_size", v); },
       [](const C& c) { return std::to_string(c.train.ensemble_size); }},
      {"hidden_layers", [](C& c, const std::string& v) { c.train.hidden_layers = to_size_list("hidden_layers", v); },
       [](const C& c) { return fmt(c.train.hidden_layers); }},
      {"feature_dim", [](C& c, const std::string& v) { c.train.feature_dim = to_size("feature_dim", v); },
       [](const C& c) { return std::to_string(c.train.feature_dim); }},
      {"prior",
       [](C& c, const std::string& v) {
         try {
           c.train.prior.family = parse_prior_family(v);
         } catch (const std::exception&) {
           bad_value("prior", v, "half_normal, half_cauchy, normal, cauchy or uniform");
         }
       },
       [](const C& c) { return to_string(c.train.prior.family); }},
      {"prior_scale", [](C& c, const std::string& v) { c.train.prior.inverse_scale = to_double("prior_scale", v); },
       [](const C& c) { return fmt(c.train.prior.inverse_scale); }},
      {"prior_grad_scale",
       [](C& c, const std::string& v) { c.train.prior_grad_scale = to_double("prior_grad_scale", v); },
       [](const C& c) { return fmt(c.train.prior_grad_scale); }},
      {"bandwidth",
       [](C& c, const std::string& v) {
         c.train.kernel.fixed_bandwidth =
             v == "median" ? std::nullopt : std::optional<double>(to_double("bandwidth", v));
       },
       [](const C& c) { return c.train.kernel.fixed_bandwidth ? fmt(*c.train.kernel.fixed_bandwidth) : "median"; }},
      {"projection_dim", [](C& c, const std::string& v) { c.train.projection_dim = to_size("projection_dim", v); },
       [](const C& c) { return std::to_string(c.train.projection_dim); }},
      {"repulsion", [](C& c, const std::string& v) { c.train.repulsion = to_bool("repulsion", v); },
       [](const C& c) { return fmt(c.train.repulsion); }},
      {"project_repulsion",
       [](C& c, const std::string& v) { c.train.project_repulsion = to_opt_bool("project_repulsion", v); },
       [](const C& c) { return fmt(c.train.project_repulsion); }},
      {"share_classifier",
       [](C& c, const std::string& v) { c.train.share_classifier = to_opt_bool("share_classifier", v); },
       [](const C& c) { return fmt(c.train.share_classifier); }},
      {"epochs", [](C& c, const std::string& v) { c.train.epochs = to_size("epochs", v); },
       [](const C& c) { return std::to_string(c.train.epochs); }},
      {"batch_size", [](C& c, const std::string& v) { c.train.batch_size = to_size("batch_size", v); },
       [](const C& c) { return std::to_string(c.train.batch_size); }},
      {"lr", [](C& c, const std::string& v) { c.train.base_lr = to_double("lr", v); },
       [](const C& c) { return fmt(c.train.base_lr); }},
      {"momentum", [](C& c, const std::string& v) { c.train.momentum = to_double("momentum", v); },
       [](const C& c) { return fmt(c.train.momentum); }},
      {"weight_decay", [](C& c, const std::string& v) { c.train.weight_decay = to_double("weight_decay", v); },
       [](const C& c) { return fmt(c.train.weight_decay); }},
      {"lr_decay_epochs",
       [](C& c, const std::string& v) { c.train.lr_decay_epochs = to_size_list("lr_decay_epochs", v); },
       [](const C& c) { return fmt(c.train.lr_decay_epochs); }},
      {"lr_decay_ratio", [](C& c, const std::string& v) { c.train.lr_decay_ratio = to_double("lr_decay_ratio", v); },
       [](const C& c) { return fmt(c.train.lr_decay_ratio); }},
      {"optimizer",
       [](C& c, const std::string& v) {
         if (v == "nesterov") c.train.optimizer = OptimizerKind::nesterov;
         else if (v == "sgd") c.train.optimizer = OptimizerKind::sgd;
         else bad_value("optimizer", v, "nesterov or sgd");
       },
       [](const C& c) { return std::string(c.train.optimizer == OptimizerKind::nesterov ? "nesterov" : "sgd"); }},
      {"seed",
       [](C& c, const std::string& v) {
         std::uint64_t s = 0;
         const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), s);
         if (v.empty() || ec != std::errc() || ptr != v.data() + v.size()) bad_value("seed", v, "an unsigned integer");
         c.train.seed = s;
       },
       [](const C& c) { return std::to_string(c.train.seed); }},
      {"dataset",
       [](C& c, const std::string& v) {
         if (v == "multiview") c.dataset = DatasetKind::multiview;
         else if (v == "csv") c.dataset = DatasetKind::csv;
         else bad_value("dataset", v, "multiview or csv");
       },
       [](const C& c) { return std::string(c.dataset == DatasetKind::multiview ? "multiview" : "csv"); }},
      {"multiview.classes", [](C& c, const std::string& v) { c.multiview.classes = to_size("multiview.classes", v); },
       [](const C& c) { return std::to_string(c.multiview.classes); }},
      {"multiview.views", [](C& c, const std::string& v) { c.multiview.views = to_size("multiview.views", v); },
       [](const C& c) { return std::to_string(c.multiview.views); }},
      {"multiview.view_dim", [](C& c, const std::string& v) { c.multiview.view_dim = to_size("multiview.view_dim", v); },
       [](const C& c) { return std::to_string(c.multiview.view_dim); }},
      {"multiview.input_dim",
       [](C& c, const std::string& v) { c.multiview.input_dim = to_size("multiview.input_dim", v); },
       [](const C& c) { return std::to_string(c.multiview.input_dim); }},
      {"multiview.noise", [](C& c, const std::string& v) { c.multiview.noise = to_double("multiview.noise", v); },
       [](const C& c) { return fmt(c.multiview.noise); }},
      {"multiview.strength_low",
       [](C& c, const std::string& v) { c.multiview.strength_low = to_double("multiview.strength_low", v); },
       [](const C& c) { return fmt(c.multiview.strength_low); }},
      {"multiview.strength_high",
       [](C& c, const std::string& v) { c.multiview.strength_high = to_double("multiview.strength_high", v); },
       [](const C& c) { return fmt(c.multiview.strength_high); }},
      {"multiview.single_view_fraction",
       [](C& c, const std::string& v) {
         c.multiview.single_view_fraction = to_double("multiview.single_view_fraction", v);
       },
       [](const C& c) { return fmt(c.multiview.single_view_fraction); }},
      {"multiview.weak_factor",
       [](C& c, const std::string& v) { c.multiview.weak_factor = to_double("multiview.weak_factor", v); },
       [](const C& c) { return fmt(c.multiview.weak_factor); }},
      {"n_train", [](C& c, const std::string& v) { c.sizes.train = to_size("n_train", v); },
       [](const C& c) { return std::to_string(c.sizes.train); }},
      {"n_val", [](C& c, const std::string& v) { c.sizes.val = to_size("n_val", v); },
       [](const C& c) { return std::to_string(c.sizes.val); }},
      {"n_test", [](C& c, const std::string& v) { c.sizes.test = to_size("n_test", v); },
       [](const C& c) { return std::to_string(c.sizes.test); }},
      {"corrupt_view",
       [](C& c, const std::string& v) {
         c.corrupt_view = v == "none" ? std::nullopt : std::optional<std::size_t>(to_size("corrupt_view", v));
       },
       [](const C& c) { return c.corrupt_view ? std::to_string(*c.corrupt_view) : "none"; }},
      {"csv.path", [](C& c, const std::string& v) { c.csv_path = v; },
       [](const C& c) { return c.csv_path.string(); }},
      {"csv.val_fraction", [](C& c, const std::string& v) { c.csv.val_fraction = to_double("csv.val_fraction", v); },
       [](const C& c) { return fmt(c.csv.val_fraction); }},
      {"csv.test_fraction",
       [](C& c, const std::string& v) { c.csv.test_fraction = to_double("csv.test_fraction", v); },
       [](const C& c) { return fmt(c.csv.test_fraction); }},
      {"csv.num_classes",
       [](C& c, const std::string& v) {
         c.csv.num_classes = v == "auto" ? std::nullopt : std::optional<std::size_t>(to_size("csv.num_classes", v));
       },
       [](const C& c) { return c.csv.num_classes ? std::to_string(*c.csv.num_classes) : "auto"; }},
      {"ece_bins", [](C& c, const std::string& v) { c.ece_bins = to_size("ece_bins", v); },
       [](const C& c) { return std::to_string(c.ece_bins); }},
      {"temperature_scaling",
       [](C& c, const std::string& v) { c.temperature_scaling = to_bool("temperature_scaling", v); },
       [](const C& c) { return fmt(c.temperature_scaling); }},
      {"output_dir", [](C& c, const std::string& v) { c.output_dir = v; },
       [](const C& c) { return c.output_dir.string(); }},
      {"checkpoint_every", [](C& c, const std::string& v) { c.checkpoint_every = to_size("checkpoint_every", v); },
       [](const C& c) { return std::to_string(c.checkpoint_every); }},
      {"workers", [](C& c, const std::string& v) { c.workers = to_size("workers", v); },
       [](const C& c) { return std::to_string(c.workers); }},
  };
  return table;
}

template <typename T>
void put_u(std::ostream& out, T v) {
  static_assert(std::is_unsigned_v<T>);
  unsigned char buf[sizeof(T)];
  for (std::size_t k = 0; k < sizeof(T); ++k) buf[k] = static_cast<unsigned char>(v >> (8 * k));
  out.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <typename T>
T get_u(std::istream& in, const std::filesystem::path& path) {
  unsigned char buf[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(buf), sizeof(T)))
    throw std::runtime_error(path.string() + ": truncated checkpoint");
  T v = 0;
  for (std::size_t k = 0; k < sizeof(T); ++k) v |= static_cast<T>(static_cast<T>(buf[k]) << (8 * k));
  return v;
}

nlohmann::ordered_json report_json(const MetricsReport& r) {
  nlohmann::ordered_json j;
  j["accuracy"] = r.accuracy;
  j["nll"] = r.nll;
  j["brier"] = r.brier;
  j["ece"] = r.ece;
  j["temperature"] = r.temperature;
  j["mean_pairwise_feature_similarity"] = r.mean_pairwise_feature_similarity;
  return j;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

}  // namespace

void ExperimentConfig::validate() const {
  try {
    train.validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  if (dataset == DatasetKind::multiview) {
    try {
      multiview.validate();
    } catch (const std::exception& e) {
      throw ConfigError(std::string("config: ") + e.what());
    }
    if (multiview.drop_view) throw ConfigError("config: corruption is applied through corrupt_view only");
    if (sizes.train == 0) throw ConfigError("config key 'n_train': must be positive");
    if (sizes.test == 0) throw ConfigError("config key 'n_test': must be positive");
    if (temperature_scaling && sizes.val == 0)
      throw ConfigError("config key 'n_val': must be positive when temperature_scaling = true");
    if (corrupt_view && *corrupt_view >= multiview.views)
      throw ConfigError("config key 'corrupt_view': view " + std::to_string(*corrupt_view) +
                        " out of range for " + std::to_string(multiview.views) + " views");
  } else {
    if (csv_path.empty()) throw ConfigError("config key 'csv.path': required when dataset = csv");
    if (corrupt_view) throw ConfigError("config key 'corrupt_view': view corruption needs dataset = multiview");
    if (!(csv.val_fraction >= 0.0 && csv.test_fraction > 0.0 && csv.val_fraction + csv.test_fraction < 1.0))
      throw ConfigError("config keys 'csv.val_fraction', 'csv.test_fraction': need val ≥ 0, test > 0, sum < 1");
    if (temperature_scaling && csv.val_fraction == 0.0)
      throw ConfigError("config key 'csv.val_fraction': must be positive when temperature_scaling = true");
  }
  if (ece_bins == 0) throw ConfigError("config key 'ece_bins': must be positive");
  if (workers > 0) {
    if (train.space != InferenceSpace::feature)
      throw ConfigError("config key 'workers': parallel execution needs space = feature");
    if (train.ensemble_size % workers != 0)
      throw ConfigError("config key 'workers': ensemble_size " + std::to_string(train.ensemble_size) +
                        " is not divisible by " + std::to_string(workers));
  }
}

ConfigEntries parse_config_text(const std::string& text) {
  ConfigEntries out;
  std::stringstream ss(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(ss, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(line_no) + ": expected 'key = value'");
    std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError("config line " + std::to_string(line_no) + ": empty key");
    out.emplace_back(std::move(key), trim(line.substr(eq + 1)));
  }
  return out;
}

ConfigEntries read_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

ConfigEntries parse_overrides(const std::vector<std::string>& args) {
  ConfigEntries out;
  for (const std::string& a : args) {
    if (a.rfind("--", 0) != 0 || a.find('=') == std::string::npos)
      throw ConfigError("override '" + a + "': expected --key=value");
    const auto eq = a.find('=');
    out.emplace_back(a.substr(2, eq - 2), a.substr(eq + 1));
  }
  return out;
}

ExperimentConfig build_config(const ConfigEntries& entries) {
  ExperimentConfig cfg;
  bool prior_given = false;
  bool scale_given = false;
  bool corrupt_given = false;
  for (const auto& [key, value] : entries) {
    const auto& table = fields();
    const auto it = std::find_if(table.begin(), table.end(), [&](const Field& f) { return f.key == key; });
    if (it == table.end()) throw ConfigError("config: unknown key '" + key + "'");
    it->set(cfg, value);
    prior_given = prior_given || key == "prior";
    scale_given = scale_given || key == "prior_scale";
    corrupt_given = corrupt_given || key == "corrupt_view";
  }
  const PriorSpec def = default_prior(cfg.train.space);
  if (!prior_given) cfg.train.prior.family = def.family;
  if (!scale_given) cfg.train.prior.inverse_scale = def.inverse_scale;
  if (cfg.dataset == DatasetKind::csv && !corrupt_given) cfg.corrupt_view.reset();
  cfg.csv.seed = cfg.train.seed;
  cfg.validate();
  return cfg;
}

std::string effective_config_text(const ExperimentConfig& cfg) {
  std::string out;
  for (const Field& f : fields()) out += f.key + " = " + f.get(cfg) + "\n";
  return out;
}

std::vector<std::string> config_keys() {
  std::vector<std::string> out;
  for (const Field& f : fields()) out.push_back(f.key);
  return out;
}

std::filesystem::path resolve_output_dir(const std::filesystem::path& output_dir) {
  if (output_dir.is_absolute()) return output_dir;
  if (const char* root = std::getenv("FWGD_OUTPUT_ROOT"); root && *root) return std::filesystem::path(root) / output_dir;
  return output_dir;
}

Dataset make_dataset(const ExperimentConfig& cfg) {
  Dataset data;
  if (cfg.dataset == DatasetKind::multiview) {
    Rng rng(cfg.train.seed, kDataStream);
    data = gen_multiview(cfg.multiview, cfg.sizes, rng);
  } else {
    CsvOptions opts = cfg.csv;
    opts.seed = cfg.train.seed;
    data = load_csv_dataset(cfg.csv_path, opts);
    if (data.count(Split::test) == 0) throw ConfigError("config: csv split leaves no test rows");
    if (cfg.temperature_scaling && data.count(Split::val) == 0)
      throw ConfigError("config: csv split leaves no validation rows for temperature scaling");
  }
  data.validate();
  return data;
}

std::string train_log_csv(const std::vector<EpochRecord>& log) {
  std::string out = "epoch,lr,mean_loglik,repulsion_norm,accuracy\n";
  for (const EpochRecord& r : log)
    out += std::to_string(r.epoch) + "," + fmt(r.lr) + "," + fmt(r.mean_loglik) + "," + fmt(r.repulsion_norm) +
           "," + fmt(r.accuracy) + "\n";
  return out;
}

std::string metrics_json(const ExperimentConfig& cfg, const ExperimentResult& result) {
  nlohmann::ordered_json j;
  j["space"] = to_string(cfg.train.space);
  j["ensemble_size"] = cfg.train.ensemble_size;
  j["seed"] = cfg.train.seed;
  j["epochs"] = result.log.size();
  j["steps"] = result.steps;
  j["clean"] = report_json(result.clean);
  j["corrupted"] = result.corrupted ? report_json(*result.corrupted) : nlohmann::ordered_json(nullptr);
  if (result.comm) {
    nlohmann::ordered_json c;
    c["workers"] = cfg.workers;
    c["steps"] = result.comm->steps;
    c["rounds_per_step"] = result.comm->rounds_per_step;
    c["round_bytes"] = result.comm->round_bytes;
    c["bytes_per_step"] = result.comm->bytes_per_step;
    c["total_bytes"] = result.comm->total_bytes;
    j["communication"] = c;
  }
  return j.dump(2) + "\n";
}

std::vector<NamedArray> ensemble_arrays(const Ensemble& e) {
  std::vector<NamedArray> out;
  for (std::size_t i = 0; i < e.particles.size(); ++i)
    out.push_back({"particle." + std::to_string(i), {e.particles[i].parameter_count()}, e.particles[i].params()});
  for (std::size_t j = 0; j < e.heads.size(); ++j)
    out.push_back({"head." + std::to_string(j),
                   {e.heads[j].feature_dim() * e.heads[j].num_classes() + e.heads[j].num_classes()},
                   e.heads[j].params()});
  return out;
}

void write_checkpoint(const std::filesystem::path& path, const std::vector<NamedArray>& arrays) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
  out.write(kMagic, sizeof(kMagic));
  put_u<std::uint32_t>(out, kCheckpointVersion);
  put_u<std::uint32_t>(out, static_cast<std::uint32_t>(arrays.size()));
  for (const NamedArray& a : arrays) {
    std::uint64_t count = 1;
    for (std::uint64_t d : a.shape) count *= d;
    if (count != a.data.size())
      throw std::invalid_argument("checkpoint array '" + a.name + "': shape does not match data length");
    put_u<std::uint32_t>(out, static_cast<std::uint32_t>(a.name.size()));
    out.write(a.name.data(), static_cast<std::streamsize>(a.name.size()));
    put_u<std::uint32_t>(out, static_cast<std::uint32_t>(a.shape.size()));
    for (std::uint64_t d : a.shape) put_u<std::uint64_t>(out, d);
    for (double v : a.data) {
      std::uint64_t bits = 0;
      std::memcpy(&bits, &v, sizeof(bits));
      put_u<std::uint64_t>(out, bits);
    }
  }
  if (!out) throw std::runtime_error("failed writing checkpoint " + path.string());
}

std::vector<NamedArray> read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read checkpoint " + path.string());
  char magic[sizeof(kMagic)];
  if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw std::runtime_error(path.string() + ": not a checkpoint file");
  const auto version = get_u<std::uint32_t>(in, path);
  if (version != kCheckpointVersion)
    throw std::runtime_error(path.string() + ": unsupported checkpoint version " + std::to_string(version));
  const auto count = get_u<std::uint32_t>(in, path);
  std::vector<NamedArray> out;
  for (std::uint32_t a = 0; a < count; ++a) {
    NamedArray arr;
    arr.name.resize(get_u<std::uint32_t>(in, path));
    if (!in.read(arr.name.data(), static_cast<std::streamsize>(arr.name.size())))
      throw std::runtime_error(path.string() + ": truncated checkpoint");
    const auto rank = get_u<std::uint32_t>(in, path);
    std::uint64_t n = 1;
    for (std::uint32_t d = 0; d < rank; ++d) {
      arr.shape.push_back(get_u<std::uint64_t>(in, path));
      n *= arr.shape.back();
    }
    arr.data.resize(n);
    for (double& v : arr.data) {
      const auto bits = get_u<std::uint64_t>(in, path);
      std::memcpy(&v, &bits, sizeof(v));
    }
    out.push_back(std::move(arr));
  }
  return out;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg, bool write_outputs) {
  cfg.validate();
  ExperimentResult result;
  result.output_dir = resolve_output_dir(cfg.output_dir);
  if (write_outputs) {
    std::filesystem::create_directories(result.output_dir);
    write_text(result.output_dir / "effective_config", effective_config_text(cfg));
  }

  const Dataset data = make_dataset(cfg);
  const Dataset train = data.subset(Split::train);
  const Dataset val = data.subset(Split::val);
  const Dataset test = data.subset(Split::test);
  std::optional<Dataset> corrupted_test;
  if (cfg.corrupt_view) {
    Dataset copy = data;
    drop_view(cfg.multiview, *cfg.corrupt_view, copy);
    corrupted_test = copy.subset(Split::test);
  }

  if (cfg.workers > 0) {
    ParallelResult pr = run_parallel(cfg.train, train.inputs, train.labels, data.num_classes, cfg.workers);
    result.ensemble = std::move(pr.ensemble);
    result.log = std::move(pr.log);
    result.comm = pr.comm;
    result.steps = pr.steps;
  } else {
    Trainer trainer(cfg.train, data.input_dim(), data.num_classes);
    while (trainer.epochs_done() < cfg.train.epochs) {
      result.log.push_back(trainer.run_epoch(train.inputs, train.labels));
      if (write_outputs && cfg.checkpoint_every > 0 && trainer.epochs_done() % cfg.checkpoint_every == 0)
        write_checkpoint(result.output_dir / "checkpoint.bin", ensemble_arrays(trainer.ensemble()));
    }
    result.ensemble = trainer.ensemble();
    result.steps = trainer.steps_done();
  }

  const auto& particles = result.ensemble.particles;
  const auto& heads = result.ensemble.heads;
  double temperature = 1.0;
  if (cfg.temperature_scaling)
    temperature = temperature_scale(member_logits(particles, heads, val.inputs), val.labels);
  result.clean = evaluate(particles, heads, test.inputs, test.labels, temperature, cfg.ece_bins);
  if (corrupted_test)
    result.corrupted =
        evaluate(particles, heads, corrupted_test->inputs, corrupted_test->labels, temperature, cfg.ece_bins);

  if (write_outputs) {
    write_text(result.output_dir / "metrics.json", metrics_json(cfg, result));
    write_text(result.output_dir / "train_log.csv", train_log_csv(result.log));
    write_checkpoint(result.output_dir / "checkpoint.bin", ensemble_arrays(result.ensemble));
  }
  return result;
}

MeanStd mean_std(const std::vector<double>& values) {
  if (values.empty()) throw std::invalid_argument("mean_std: no values");
  MeanStd out;
  for (double v : values) out.mean += v;
  out.mean /= static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values) ss += (v - out.mean) * (v - out.mean);
  out.std = std::sqrt(ss / static_cast<double>(values.size()));
  return out;
}

std::vector<std::string> compare_metric_names() {
  std::vector<std::string> out;
  for (const char* split : {"clean", "corrupted"})
    for (const char* m : {"accuracy", "nll", "brier", "ece", "temperature", "feature_similarity"})
      out.push_back(std::string(split) + "_" + m);
  return out;
}

std::vector<double> compare_metric_values(const ExperimentResult& r) {
  std::vector<double> out;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (const std::optional<MetricsReport>& m : {std::optional<MetricsReport>(r.clean), r.corrupted}) {
    if (m) {
      out.insert(out.end(), {m->accuracy, m->nll, m->brier, m->ece, m->temperature,
                             m->mean_pairwise_feature_similarity});
    } else {
      out.insert(out.end(), 6, nan);
    }
  }
  return out;
}

std::string compare(const std::vector<ExperimentConfig>& configs, const std::vector<std::string>& labels,
                    std::size_t seeds) {
  if (configs.size() != labels.size()) throw std::invalid_argument("compare: one label per config required");
  if (seeds == 0) throw std::invalid_argument("compare: need at least one seed");
  const std::vector<std::string> names = compare_metric_names();
  std::string out = "config,seeds";
  for (const std::string& n : names) out += "," + n + "_mean," + n + "_std";
  out += "\n";
  for (std::size_t c = 0; c < configs.size(); ++c) {
    std::vector<std::vector<double>> per_metric(names.size());
    for (std::size_t s = 0; s < seeds; ++s) {
      ExperimentConfig cfg = configs[c];
      cfg.train.seed = configs[c].train.seed + s;
      cfg.csv.seed = cfg.train.seed;
      cfg.output_dir = configs[c].output_dir / ("seed_" + std::to_string(cfg.train.seed));
      const std::vector<double> values = compare_metric_values(run_experiment(cfg));
      for (std::size_t m = 0; m < names.size(); ++m) per_metric[m].push_back(values[m]);
    }
    out += labels[c] + "," + std::to_string(seeds);
    for (const auto& v : per_metric) {
      if (std::isnan(v.front())) {
        out += ",,";
        continue;
      }
      const MeanStd ms = mean_std(v);
      out += "," + fmt(ms.mean) + "," + fmt(ms.std);
    }
    out += "\n";
  }
  return out;
}

GaussianTarget sanity_target(std::size_t dim) {
  GaussianTarget t;
  t.mean.resize(dim);
  t.covariance = Matrix(dim, dim);
  for (std::size_t i = 0; i < dim; ++i) {
    t.mean[i] = i % 2 == 0 ? 1.0 : -1.0;
    t.covariance(i, i) = i % 2 == 0 ? 1.0 : 0.5;
  }
  return t;
}

SanityResult run_gaussian_sanity(std::size_t dim, std::size_t particles, std::size_t steps, double lr,
                                 std::uint64_t seed) {
  const GaussianTarget target = sanity_target(dim);
  const Matrix x = gaussian_wgd_sample(target, particles, steps, lr, seed);
  SanityResult r;
  const auto n = static_cast<double>(x.rows());
  r.sample_mean.assign(dim, 0.0);
  for (std::size_t p = 0; p < x.rows(); ++p)
    for (std::size_t i = 0; i < dim; ++i) r.sample_mean[i] += x(p, i) / n;
  r.sample_covariance = Matrix(dim, dim);
  for (std::size_t p = 0; p < x.rows(); ++p)
    for (std::size_t i = 0; i < dim; ++i)
      for (std::size_t j = 0; j < dim; ++j)
        r.sample_covariance(i, j) += (x(p, i) - r.sample_mean[i]) * (x(p, j) - r.sample_mean[j]) / n;
  double me = 0.0;
  for (std::size_t i = 0; i < dim; ++i) me += (r.sample_mean[i] - target.mean[i]) * (r.sample_mean[i] - target.mean[i]);
  r.mean_error = std::sqrt(me);
  r.covariance_error = frobenius_norm(r.sample_covariance - target.covariance);
  return r;
}

}  // namespace fwgd
