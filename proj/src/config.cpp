#include "pclnet/config.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <functional>
#include <map>
#include <sstream>

#include "pclnet/error.hpp"
#include "pclnet/io.hpp"

namespace pclnet {

namespace {

struct Violation {
  std::string key;
  std::string message;
};

void check(bool ok, const std::string& key, const std::string& message) {
  if (!ok) throw Violation{key, message};
}

void validate_or_throw(const RunConfig& c) {
  check(c.threads >= 1, "threads", "threads must be >= 1");
  check(c.synth.height >= 1, "synth.height", "height must be >= 1");
  check(c.synth.width >= 1, "synth.width", "width must be >= 1");
  check(c.synth.looks >= 1, "synth.looks", "looks must be >= 1");
  check(c.synth.classes >= 1, "synth.classes", "classes must be >= 1");
  check(c.synth.width >= c.synth.classes, "synth.classes", "classes must not exceed width");
  for (const auto& [label, sigma] : c.synth.covariances) {
    const std::string key = "class." + std::to_string(label);
    check(label >= 1 && label <= c.synth.classes, "synth." + key, key + " exceeds the class count");
    check(validate_coherency(sigma).valid, "synth." + key, key + " covariance not PSD");
  }
  check(c.cluster.num_clusters >= 1, "cluster.num_clusters", "num_clusters must be >= 1");
  check(c.cluster.max_iter >= 1, "cluster.max_iter", "max_iter must be >= 1");
  check(c.cluster.candidate_stride >= 1, "cluster.candidate_stride", "candidate_stride must be >= 1");
  check(c.collect.gamma > 0, "collect.gamma", "gamma must be > 0");
  check(c.collect.samples_per_cluster >= 1, "collect.samples_per_cluster", "samples_per_cluster must be >= 1");
  check(c.collect.patch_size >= 1 && c.collect.patch_size % 2 == 1, "collect.patch_size",
        "patch_size must be a positive odd integer");
  const auto& p = c.pretrain;
  check(p.epochs >= 1, "pretrain.epochs", "epochs must be >= 1");
  check(p.learning_rate > 0, "pretrain.learning_rate", "learning_rate must be > 0");
  check(p.lr_factor > 0 && p.lr_factor <= 1, "pretrain.lr_factor", "lr_factor must be in (0, 1]");
  for (int m : p.milestones) check(m >= 0, "pretrain.milestones", "milestones must be >= 0");
  check(p.batch_size >= 1, "pretrain.batch_size", "batch_size must be >= 1");
  check(p.bank_size >= 1, "pretrain.bank_size", "bank_size must be >= 1");
  check(p.bank_size % p.batch_size == 0, "pretrain.bank_size", "bank_size must be a multiple of batch_size");
  check(p.momentum > 0 && p.momentum < 1, "pretrain.momentum", "momentum must be in (0, 1)");
  check(p.temperature > 0, "pretrain.temperature", "temperature must be > 0");
  const auto& f = c.finetune;
  check(f.epochs >= 1, "finetune.epochs", "epochs must be >= 1");
  check(f.learning_rate > 0, "finetune.learning_rate", "learning_rate must be > 0");
  check(f.batch_size >= 1, "finetune.batch_size", "batch_size must be >= 1");
  check(f.shots_per_class >= 1, "finetune.shots_per_class", "shots_per_class must be >= 1");
  check(f.validation_per_class >= 0, "finetune.validation_per_class", "validation_per_class must be >= 0");
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <typename T>
bool parse_number(const std::string& s, T& out) {
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && ptr == end;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> parts;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, ',')) parts.push_back(trim(item));
  return parts;
}

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct TypeError {
  std::string expected;
};

int as_int(const std::string& v) {
  int x;
  if (!parse_number(v, x)) throw TypeError{"an integer"};
  return x;
}
double as_double(const std::string& v) {
  double x;
  if (!parse_number(v, x)) throw TypeError{"a number"};
  return x;
}
std::uint64_t as_u64(const std::string& v) {
  std::uint64_t x;
  if (!parse_number(v, x)) throw TypeError{"an unsigned integer"};
  return x;
}
std::vector<int> as_int_list(const std::string& v) {
  std::vector<int> out;
  if (trim(v).empty()) return out;
  for (const auto& part : split_list(v)) out.push_back(as_int(part));
  return out;
}
CoherencyMatrix as_coherency(const std::string& v) {
  const auto parts = split_list(v);
  if (parts.size() != kPolChannels) throw TypeError{"9 comma-separated numbers"};
  std::array<double, kPolChannels> a;
  for (std::size_t i = 0; i < a.size(); ++i) a[i] = as_double(parts[i]);
  return CoherencyMatrix(a);
}

struct KeySpec {
  std::string section;
  std::string name;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define PCL_INT(sec, key, field)                                                 \
  KeySpec{sec, key, [](RunConfig& c, const std::string& v) { c.field = as_int(v); }, \
          [](const RunConfig& c) { return std::to_string(c.field); }}
#define PCL_DOUBLE(sec, key, field)                                                   \
  KeySpec{sec, key, [](RunConfig& c, const std::string& v) { c.field = as_double(v); }, \
          [](const RunConfig& c) { return fmt_double(c.field); }}

const std::vector<KeySpec>& key_specs() {
  static const std::vector<KeySpec> specs = {
      KeySpec{"", "seed", [](RunConfig& c, const std::string& v) { c.seed = as_u64(v); },
              [](const RunConfig& c) { return std::to_string(c.seed); }},
      PCL_INT("", "threads", threads),
      PCL_INT("synth", "height", synth.height),
      PCL_INT("synth", "width", synth.width),
      PCL_INT("synth", "looks", synth.looks),
      PCL_INT("synth", "classes", synth.classes),
      PCL_INT("cluster", "num_clusters", cluster.num_clusters),
      PCL_INT("cluster", "max_iter", cluster.max_iter),
      PCL_INT("cluster", "candidate_stride", cluster.candidate_stride),
      PCL_DOUBLE("collect", "gamma", collect.gamma),
      PCL_INT("collect", "samples_per_cluster", collect.samples_per_cluster),
      PCL_INT("collect", "patch_size", collect.patch_size),
      PCL_INT("pretrain", "epochs", pretrain.epochs),
      PCL_DOUBLE("pretrain", "learning_rate", pretrain.learning_rate),
      KeySpec{"pretrain", "milestones",
              [](RunConfig& c, const std::string& v) { c.pretrain.milestones = as_int_list(v); },
              [](const RunConfig& c) {
                std::string s;
                for (std::size_t i = 0; i < c.pretrain.milestones.size(); ++i)
                  s += (i ? ", " : "") + std::to_string(c.pretrain.milestones[i]);
                return s;
              }},
      PCL_DOUBLE("pretrain", "lr_factor", pretrain.lr_factor),
      PCL_INT("pretrain", "batch_size", pretrain.batch_size),
      PCL_INT("pretrain", "bank_size", pretrain.bank_size),
      PCL_DOUBLE("pretrain", "momentum", pretrain.momentum),
      PCL_DOUBLE("pretrain", "temperature", pretrain.temperature),
      PCL_INT("finetune", "epochs", finetune.epochs),
      PCL_DOUBLE("finetune", "learning_rate", finetune.learning_rate),
      PCL_INT("finetune", "batch_size", finetune.batch_size),
      PCL_INT("finetune", "shots_per_class", finetune.shots_per_class),
      PCL_INT("finetune", "validation_per_class", finetune.validation_per_class),
  };
  return specs;
}

#undef PCL_INT
#undef PCL_DOUBLE

const std::vector<std::string> kSections = {"", "synth", "cluster", "collect", "pretrain", "finetune"};

}  // namespace

void RunConfig::validate() const {
  try {
    validate_or_throw(*this);
  } catch (const Violation& v) {
    fail(ErrorKind::invalid_argument, v.message);
  }
}

RunConfig parse_config(const std::string& text) {
  RunConfig config;
  std::map<std::string, int> key_line;  // "section.key" -> line, plus bare key
  std::istringstream in(text);
  std::string raw;
  std::string section;
  int line_no = 0;
  auto error = [&](int line, const std::string& msg) -> void {
    fail(ErrorKind::invalid_argument, "line " + std::to_string(line) + ": " + msg);
  };

  while (std::getline(in, raw)) {
    ++line_no;
    const auto hash = raw.find('#');
    const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') error(line_no, "malformed section header '" + line + "'");
      section = trim(line.substr(1, line.size() - 2));
      if (std::find(kSections.begin(), kSections.end(), section) == kSections.end() || section.empty())
        error(line_no, "unknown section [" + section + "]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) error(line_no, "expected 'key = value', got '" + line + "'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const std::string where = section.empty() ? "top level" : "[" + section + "]";

    try {
      if (section == "synth" && key.rfind("class.", 0) == 0) {
        int label;
        if (!parse_number(key.substr(6), label)) error(line_no, "unknown key '" + key + "' in " + where);
        auto& covs = config.synth.covariances;
        std::erase_if(covs, [&](const auto& e) { return e.first == label; });
        covs.emplace_back(label, as_coherency(value));
        std::sort(covs.begin(), covs.end(), [](auto& a, auto& b) { return a.first < b.first; });
        key_line[section.empty() ? key : section + "." + key] = line_no;
        continue;
      }
      const auto& specs = key_specs();
      const auto it = std::find_if(specs.begin(), specs.end(), [&](const KeySpec& s) {
        return s.section == section && s.name == key;
      });
      if (it == specs.end()) error(line_no, "unknown key '" + key + "' in " + where);
      it->set(config, value);
      key_line[section.empty() ? key : section + "." + key] = line_no;
    } catch (const TypeError& t) {
      error(line_no, key + " must be " + t.expected + ", got '" + value + "'");
    }
  }

  try {
    validate_or_throw(config);
  } catch (const Violation& v) {
    const auto it = key_line.find(v.key);
    fail(ErrorKind::invalid_argument,
         (it == key_line.end() ? std::string() : "line " + std::to_string(it->second) + ": ") +
             v.message);
  }
  return config;
}

RunConfig load_config(const std::filesystem::path& path) {
  return parse_config(io::read_text(path));
}

std::string format_config(const RunConfig& config) {
  std::ostringstream out;
  std::string section = "";
  for (const auto& spec : key_specs()) {
    if (spec.section != section) {
      if (section == "synth") {
        for (const auto& [label, sigma] : config.synth.covariances) {
          out << "class." << label << " = ";
          for (int i = 0; i < kPolChannels; ++i) out << (i ? ", " : "") << fmt_double(sigma[static_cast<std::size_t>(i)]);
          out << '\n';
        }
      }
      section = spec.section;
      out << "\n[" << section << "]\n";
    }
    out << spec.name << " = " << spec.get(config) << '\n';
  }
  return out.str();
}

SyntheticSceneSpec RunConfig::synth_spec() const {
  SyntheticSceneSpec spec;
  spec.height = synth.height;
  spec.width = synth.width;
  spec.looks = synth.looks;
  spec.class_covariances = default_class_covariances(synth.classes);
  for (const auto& [label, sigma] : synth.covariances)
    spec.class_covariances[static_cast<std::size_t>(label - 1)] = sigma;
  spec.regions = SyntheticSceneSpec::vertical_bands(synth.height, synth.width, synth.classes);
  spec.seed = derive_seed(seed, "stage.synth");
  return spec;
}

PretrainConfig RunConfig::pretrain_config() const {
  PretrainConfig p;
  p.epochs = pretrain.epochs;
  p.batch_size = pretrain.batch_size;
  p.bank_size = pretrain.bank_size;
  p.momentum = pretrain.momentum;
  p.temperature = pretrain.temperature;
  p.sgd = {pretrain.learning_rate, pretrain.milestones, pretrain.lr_factor, pretrain.batch_size};
  p.seed = derive_seed(seed, "stage.pretrain");
  return p;
}

FinetuneConfig RunConfig::finetune_config() const {
  return {finetune.epochs, finetune.learning_rate, finetune.batch_size,
          derive_seed(seed, "stage.finetune")};
}

CollectOptions RunConfig::collect_options() const {
  return {collect.gamma, collect.samples_per_cluster, collect.patch_size,
          derive_seed(seed, "stage.collect")};
}

}  // namespace pclnet
