#include "alsf/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

namespace alsf::config {
namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

[[noreturn]] void fail(const Entry& e, const std::string& what) {
  throw Error(ErrorCode::kConfigError,
              "line " + std::to_string(e.line) + " (" + e.key + "): " + what);
}

long long to_int(const Entry& e, const std::string& text) {
  long long v = 0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end) fail(e, "expected an integer, got '" + text + "'");
  return v;
}

double to_double(const Entry& e, const std::string& text) {
  double v = 0.0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end) fail(e, "expected a number, got '" + text + "'");
  return v;
}

bool to_bool(const Entry& e, const std::string& text) {
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  fail(e, "expected true/false, got '" + text + "'");
}

std::optional<std::pair<int, int>> to_size(const Entry& e, const std::string& text) {
  if (text == "none") return std::nullopt;
  const auto x = text.find('x');
  if (x == std::string::npos) fail(e, "expected WIDTHxHEIGHT or none");
  const int w = static_cast<int>(to_int(e, text.substr(0, x)));
  const int h = static_cast<int>(to_int(e, text.substr(x + 1)));
  if (w < 1 || h < 1) fail(e, "downsample size must be positive");
  return std::make_pair(w, h);
}

RuleKind to_rule(const Entry& e, const std::string& text) {
  if (text == "ratio") return RuleKind::kRatio;
  if (text == "region") return RuleKind::kConnectedRegion;
  fail(e, "rule must be 'ratio' or 'region'");
}

ResidualMode to_mode(const Entry& e, const std::string& text) {
  if (text == "shared") return ResidualMode::kSharedSubtracted;
  if (text == "plain") return ResidualMode::kPlain;
  fail(e, "residual_mode must be 'shared' or 'plain'");
}

int to_channels(const Entry& e, const std::string& text) {
  if (text == "gray") return 1;
  if (text == "rgb") return 3;
  fail(e, "channels must be 'gray' or 'rgb'");
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(trim(item));
  return out;
}

// Applies one key to a Hyperparams; returns false for an unknown key.
bool apply_hyperparam(Hyperparams& hp, const Entry& e, const std::string& v) {
  const std::string& k = e.key;
  if (k == "eta") hp.eta = to_double(e, v);
  else if (k == "eta1") hp.eta1 = to_double(e, v);
  else if (k == "tau") hp.tau = to_double(e, v);
  else if (k == "lambda1") hp.lambda1 = to_double(e, v);
  else if (k == "lambda2") hp.lambda2 = to_double(e, v);
  else if (k == "lambda3") hp.lambda3 = to_double(e, v);
  else if (k == "k_per_class") hp.k_per_class = static_cast<int>(to_int(e, v));
  else if (k == "k_shared") hp.k_shared = static_cast<int>(to_int(e, v));
  else if (k == "max_iters") hp.max_iters = static_cast<int>(to_int(e, v));
  else if (k == "rel_tol") hp.rel_tol = to_double(e, v);
  else if (k == "code_sweeps") hp.code_sweeps = static_cast<int>(to_int(e, v));
  else if (k == "ridge_a0") hp.ridge_a0 = to_double(e, v);
  else if (k == "seed") hp.seed = static_cast<std::uint64_t>(to_int(e, v));
  else if (k == "joint_code_solve") hp.joint_code_solve = to_bool(e, v);
  else if (k == "parallel_classes") hp.parallel_classes = to_bool(e, v);
  else if (k == "block_order") {
    if (v == "codes-analysis-dict") hp.block_order = ClassBlockOrder::kCodesAnalysisDict;
    else if (v == "codes-dict-analysis") hp.block_order = ClassBlockOrder::kCodesDictAnalysis;
    else fail(e, "block_order must be codes-analysis-dict or codes-dict-analysis");
  } else {
    return false;
  }
  return true;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const std::vector<Entry>& global_entries(const std::vector<Section>& sections) {
  static const std::vector<Entry> empty;
  return !sections.empty() && sections.front().kind.empty() ? sections.front().entries : empty;
}

void reject_sections(const std::vector<Section>& sections, const char* what) {
  for (const auto& s : sections) {
    if (!s.kind.empty()) {
      throw Error(ErrorCode::kConfigError,
                  std::string(what) + " does not take sections ([" + s.kind + "])");
    }
  }
}

}  // namespace

std::string_view to_string(RuleKind kind) {
  return kind == RuleKind::kRatio ? "ratio" : "region";
}

std::string_view to_string(ResidualMode mode) {
  return mode == ResidualMode::kSharedSubtracted ? "shared" : "plain";
}

std::vector<Section> parse_text(const std::string& text, const std::string& source) {
  std::vector<Section> sections(1);
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto hash = raw.find('#');
    const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        throw Error(ErrorCode::kConfigError,
                    source + ":" + std::to_string(line_no) + ": unterminated section header");
      }
      const std::string inner = trim(line.substr(1, line.size() - 2));
      const auto space = inner.find(' ');
      Section s;
      s.kind = inner.substr(0, space);
      s.name = space == std::string::npos ? std::string() : trim(inner.substr(space + 1));
      sections.push_back(std::move(s));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorCode::kConfigError,
                  source + ":" + std::to_string(line_no) + ": expected 'key = value'");
    }
    Entry e{trim(line.substr(0, eq)), trim(line.substr(eq + 1)), line_no};
    if (e.key.empty()) {
      throw Error(ErrorCode::kConfigError, source + ":" + std::to_string(line_no) + ": empty key");
    }
    sections.back().entries.push_back(std::move(e));
  }
  return sections;
}

std::vector<Section> parse_file(const std::filesystem::path& path) {
  return parse_text(read_file(path), path.string());
}

int Manifest::positive_index() const {
  if (positive_class.empty()) return static_cast<int>(classes.size()) - 1;
  for (std::size_t c = 0; c < classes.size(); ++c) {
    if (classes[c].name == positive_class) return static_cast<int>(c);
  }
  throw Error(ErrorCode::kInsufficientData,
              "positive class '" + positive_class + "' is not listed in the manifest");
}

Manifest parse_manifest_text(const std::string& text, const std::filesystem::path& base_dir,
                             bool check_paths) {
  const auto sections = parse_text(text, "manifest");
  Manifest m;
  for (const auto& e : global_entries(sections)) {
    const std::string& v = e.value;
    if (e.key == "patch_size") m.patch_size = static_cast<int>(to_int(e, v));
    else if (e.key == "patches_per_class") m.patches_per_class = static_cast<int>(to_int(e, v));
    else if (e.key == "channels") m.channels = to_channels(e, v);
    else if (e.key == "downsample") m.downsample = to_size(e, v);
    else if (e.key == "rule") m.rule = to_rule(e, v);
    else if (e.key == "positive_class") m.positive_class = v;
    else if (e.key == "seed") m.seed = static_cast<std::uint64_t>(to_int(e, v));
    else if (e.key == "sampling_stride") m.sampling_stride = static_cast<int>(to_int(e, v));
    else if (e.key == "residual_mode") m.residual_mode = to_mode(e, v);
    else fail(e, "unknown manifest key");
  }
  if (m.patch_size < 2) throw Error(ErrorCode::kConfigError, "patch_size must be >= 2");
  if (m.patches_per_class < 1) throw Error(ErrorCode::kConfigError, "patches_per_class < 1");
  if (m.sampling_stride < 1) throw Error(ErrorCode::kConfigError, "sampling_stride < 1");

  auto resolve = [&](const std::string& p) {
    std::filesystem::path path(p);
    if (path.is_relative()) path = base_dir / path;
    if (check_paths && !std::filesystem::exists(path)) {
      throw Error(ErrorCode::kIoError, "manifest references missing file " + path.string());
    }
    return path;
  };
  for (std::size_t i = 1; i < sections.size(); ++i) {
    const Section& s = sections[i];
    if (s.kind != "class") throw Error(ErrorCode::kConfigError, "unknown section [" + s.kind + "]");
    if (s.name.empty()) throw Error(ErrorCode::kConfigError, "class section without a name");
    ClassEntry cls;
    cls.name = s.name;
    for (const auto& e : s.entries) {
      if (e.key == "train" || e.key == "test") {
        std::istringstream parts(e.value);
        std::string image, extra;
        parts >> image;
        if (image.empty()) fail(e, "missing image path");
        ImageEntry entry{resolve(image), std::nullopt, image};
        while (parts >> extra) {
          if (extra.rfind("mask=", 0) != 0) fail(e, "unexpected token '" + extra + "'");
          entry.mask = resolve(extra.substr(5));
        }
        (e.key == "train" ? cls.train : cls.test).push_back(std::move(entry));
      } else if (e.key == "center_mask") {
        cls.center_mask = to_bool(e, e.value);
      } else {
        fail(e, "unknown class key");
      }
    }
    for (const auto& other : m.classes) {
      if (other.name == cls.name) {
        throw Error(ErrorCode::kConfigError, "duplicate class '" + cls.name + "'");
      }
    }
    m.classes.push_back(std::move(cls));
  }
  if (m.classes.empty()) throw Error(ErrorCode::kInsufficientData, "manifest lists no classes");
  m.positive_index();
  return m;
}

Manifest parse_manifest(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  return parse_manifest_text(text, path.parent_path());
}

std::string format_manifest(const Manifest& m, const std::filesystem::path& base_dir) {
  std::ostringstream out;
  auto rel = [&](const std::filesystem::path& p) {
    return p.lexically_relative(base_dir).generic_string();
  };
  out << "patch_size = " << m.patch_size << "\n";
  out << "patches_per_class = " << m.patches_per_class << "\n";
  out << "channels = " << (m.channels == 1 ? "gray" : "rgb") << "\n";
  if (m.downsample) {
    out << "downsample = " << m.downsample->first << "x" << m.downsample->second << "\n";
  } else {
    out << "downsample = none\n";
  }
  out << "rule = " << to_string(m.rule) << "\n";
  if (!m.positive_class.empty()) out << "positive_class = " << m.positive_class << "\n";
  out << "seed = " << m.seed << "\n";
  out << "sampling_stride = " << m.sampling_stride << "\n";
  out << "residual_mode = " << to_string(m.residual_mode) << "\n";
  for (const auto& cls : m.classes) {
    out << "\n[class " << cls.name << "]\n";
    if (cls.center_mask) out << "center_mask = true\n";
    auto emit = [&](const char* key, const ImageEntry& e) {
      out << key << " = " << rel(e.image);
      if (e.mask) out << " mask=" << rel(*e.mask);
      out << "\n";
    };
    for (const auto& e : cls.train) emit("train", e);
    for (const auto& e : cls.test) emit("test", e);
  }
  return out.str();
}

Hyperparams parse_hyperparams(const std::vector<Section>& sections) {
  reject_sections(sections, "hyperparameter config");
  Hyperparams hp;
  for (const auto& e : global_entries(sections)) {
    if (!apply_hyperparam(hp, e, e.value)) fail(e, "unknown hyperparameter");
  }
  hp.validate();
  return hp;
}

Hyperparams parse_hyperparams_file(const std::filesystem::path& path) {
  return parse_hyperparams(parse_file(path));
}

CvGrid parse_grid(const std::vector<Section>& sections) {
  reject_sections(sections, "grid config");
  CvGrid grid;
  std::vector<std::pair<Entry, std::vector<std::string>>> axes;
  for (const auto& e : global_entries(sections)) {
    if (e.key == "folds") {
      grid.folds = static_cast<int>(to_int(e, e.value));
      continue;
    }
    Hyperparams probe;
    const auto values = split_list(e.value);
    if (values.empty()) fail(e, "empty value list");
    for (const auto& v : values) {
      if (!apply_hyperparam(probe, e, v)) fail(e, "unknown hyperparameter");
    }
    axes.emplace_back(e, values);
  }
  grid.points.push_back(Hyperparams{});
  for (const auto& [entry, values] : axes) {
    std::vector<Hyperparams> next;
    for (const auto& base : grid.points) {
      for (const auto& v : values) {
        Hyperparams hp = base;
        apply_hyperparam(hp, entry, v);
        next.push_back(hp);
      }
    }
    grid.points = std::move(next);
  }
  for (const auto& hp : grid.points) hp.validate();
  return grid;
}

RuleConfig parse_rule_config(const std::vector<Section>& sections) {
  reject_sections(sections, "rule config");
  RuleConfig rc;
  bool threshold_set = false;
  for (const auto& e : global_entries(sections)) {
    const std::string& v = e.value;
    if (e.key == "rule") rc.rule.kind = to_rule(e, v);
    else if (e.key == "positive_class") rc.positive_class = v;
    else if (e.key == "threshold") {
      rc.rule.threshold = to_double(e, v);
      threshold_set = true;
    } else if (e.key == "patch_size") rc.patch_size = static_cast<int>(to_int(e, v));
    else if (e.key == "channels") rc.channels = to_channels(e, v);
    else if (e.key == "downsample") rc.downsample = to_size(e, v);
    else if (e.key == "residual_mode") rc.residual_mode = to_mode(e, v);
    else fail(e, "unknown rule key");
  }
  if (!threshold_set) rc.rule.threshold = rc.rule.kind == RuleKind::kRatio ? 0.5 : 1.0;
  return rc;
}

SynthConfig parse_synth_config(const std::vector<Section>& sections) {
  reject_sections(sections, "synth config");
  SynthConfig sc;
  for (const auto& e : global_entries(sections)) {
    const std::string& v = e.value;
    if (e.key == "patch_size") sc.patch_size = static_cast<int>(to_int(e, v));
    else if (e.key == "classes") sc.spec.classes = static_cast<int>(to_int(e, v));
    else if (e.key == "class_subspace_dim") sc.spec.class_subspace_dim = static_cast<int>(to_int(e, v));
    else if (e.key == "shared_subspace_dim") sc.spec.shared_subspace_dim = static_cast<int>(to_int(e, v));
    else if (e.key == "noise_sigma") sc.spec.noise_sigma = to_double(e, v);
    else if (e.key == "seed") sc.spec.seed = static_cast<std::uint64_t>(to_int(e, v));
    else if (e.key == "grid_rows") sc.grid_rows = static_cast<int>(to_int(e, v));
    else if (e.key == "grid_cols") sc.grid_cols = static_cast<int>(to_int(e, v));
    else if (e.key == "train_images_per_class") sc.train_images_per_class = static_cast<int>(to_int(e, v));
    else if (e.key == "test_images_per_class") sc.test_images_per_class = static_cast<int>(to_int(e, v));
    else if (e.key == "patches_per_class") sc.train_patches_per_class = static_cast<int>(to_int(e, v));
    else if (e.key == "rule") sc.rule = to_rule(e, v);
    else fail(e, "unknown synth key");
  }
  if (sc.patch_size < 2) throw Error(ErrorCode::kConfigError, "patch_size must be >= 2");
  if (sc.grid_rows < 2 || sc.grid_cols < 2) {
    throw Error(ErrorCode::kConfigError, "synthetic image grids must be at least 2x2");
  }
  if (sc.train_images_per_class < 1 || sc.test_images_per_class < 1 ||
      sc.train_patches_per_class < 1) {
    throw Error(ErrorCode::kConfigError, "image and patch counts must be >= 1");
  }
  if (sc.spec.classes < 2) throw Error(ErrorCode::kConfigError, "synth needs >= 2 classes");
  sc.spec.d = sc.patch_size * sc.patch_size;
  sc.spec.patches_per_class = 1;
  try {
    sc.spec.validate();
  } catch (const Error& err) {
    throw Error(ErrorCode::kConfigError, err.what());
  }
  return sc;
}

}  // namespace alsf::config
