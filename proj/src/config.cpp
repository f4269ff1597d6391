#include "sparse3d/config.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "sparse3d/error.hpp"

namespace sparse3d {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

template <typename T>
T parse_value(std::string_view key, std::string_view value) {
  T out{};
  const char* end = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end) {
    throw Error("bad value '" + std::string(value) + "' for " + std::string(key));
  }
  return out;
}

bool parse_bool(std::string_view key, std::string_view value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw Error("bad boolean '" + std::string(value) + "' for " + std::string(key));
}

std::string join(const std::vector<int>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

}  // namespace

std::vector<int> parse_int_list(std::string_view text) {
  std::vector<int> out;
  text = trim(text);
  if (text.empty()) return out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto comma = text.find(',', start);
    const auto item = trim(text.substr(start, comma == std::string_view::npos ? text.npos
                                                                              : comma - start));
    out.push_back(parse_value<int>("list", item));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

void apply_setting(ExperimentConfig& c, std::string_view key, std::string_view raw) {
  const std::string_view value = trim(raw);
  if (key == "dataset") {
    c.dataset = std::string(value);
  } else if (key == "data_root") {
    c.data_root = std::string(value);
  } else if (key == "k" || key == "points") {
    c.points = parse_value<int>(key, value);
  } else if (key == "train_rotation") {
    c.train_rotation = parse_rotation_mode(value);
  } else if (key == "test_rotation") {
    c.test_rotation = parse_rotation_mode(value);
  } else if (key == "descriptor") {
    c.descriptor.kind = parse_descriptor_kind(value);
  } else if (key == "nd") {
    c.descriptor.count = parse_value<int>(key, value);
  } else if (key == "scale_norm") {
    c.descriptor.scale_normalize = parse_bool(key, value);
  } else if (key == "fold_normals") {
    c.descriptor.fold_normals = parse_bool(key, value);
  } else if (key == "shared_widths") {
    c.shared_widths = parse_int_list(value);
  } else if (key == "classifier_widths") {
    c.classifier_widths = parse_int_list(value);
  } else if (key == "decoder_widths") {
    c.decoder_widths = parse_int_list(value);
  } else if (key == "dropout") {
    c.dropout = parse_value<double>(key, value);
  } else if (key == "voxel_resolution") {
    c.voxel_resolution = parse_value<int>(key, value);
  } else if (key == "recon_weight") {
    c.recon_weight = parse_value<double>(key, value);
  } else if (key == "batchnorm") {
    c.batchnorm = parse_bool(key, value);
  } else if (key == "epochs") {
    c.epochs = parse_value<int>(key, value);
  } else if (key == "batch_size") {
    c.batch_size = parse_value<int>(key, value);
  } else if (key == "lr" || key == "learning_rate") {
    c.learning_rate = parse_value<double>(key, value);
  } else if (key == "seed") {
    c.seed = parse_value<std::uint64_t>(key, value);
  } else if (key == "synth_train_per_class") {
    c.synth_train_per_class = parse_value<int>(key, value);
  } else if (key == "synth_test_per_class") {
    c.synth_test_per_class = parse_value<int>(key, value);
  } else if (key == "train_limit") {
    c.train_limit = parse_value<int>(key, value);
  } else if (key == "test_limit") {
    c.test_limit = parse_value<int>(key, value);
  } else if (key == "resample_points") {
    c.resample_points = parse_bool(key, value);
  } else if (key == "stop_train_accuracy") {
    c.stop_train_accuracy = parse_value<double>(key, value);
  } else if (key == "voxel_threshold") {
    c.voxel_threshold = parse_value<double>(key, value);
  } else {
    throw Error("unknown config key '" + std::string(key) + "'");
  }
}

ExperimentConfig parse_config(std::string_view text) {
  ExperimentConfig config;
  if (const char* env = std::getenv("SPARSE3D_DATA")) config.data_root = env;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ParseError(line_no, "expected 'key = value'");
    }
    try {
      apply_setting(config, trim(line.substr(0, eq)), line.substr(eq + 1));
    } catch (const ParseError&) {
      throw;
    } catch (const Error& e) {
      throw ParseError(line_no, e.what());
    }
  }
  config.validate();
  return config;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  try {
    return parse_config(buffer.str());
  } catch (const Error& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

void ExperimentConfig::validate() const {
  if (dataset != "synth4" && dataset != "modelnet40") {
    throw Error("dataset must be synth4 or modelnet40");
  }
  if (points < points_per_descriptor(descriptor.kind)) {
    throw Error("need ≥ " + std::to_string(points_per_descriptor(descriptor.kind)) + " points");
  }
  if (descriptor.count < 1) throw Error("nd must be >= 1");
  if (epochs < 0) throw Error("epochs must be >= 0");
  if (batch_size < 1) throw Error("batch_size must be >= 1");
  if (!(learning_rate > 0.0)) throw Error("lr must be > 0");
  if (synth_train_per_class < 1 || synth_test_per_class < 1) {
    throw Error("synth split sizes must be >= 1");
  }
  model_config(2).validate();
}

ModelConfig ExperimentConfig::model_config(int num_classes) const {
  ModelConfig m;
  m.kind = descriptor.kind;
  m.shared_widths = shared_widths;
  m.classifier_widths = classifier_widths;
  m.decoder_widths = decoder_widths;
  m.dropout = dropout;
  m.voxel_resolution = voxel_resolution;
  m.recon_weight = recon_weight;
  m.num_classes = num_classes;
  m.batchnorm = batchnorm;
  return m;
}

std::string ExperimentConfig::to_text() const {
  std::ostringstream s;
  s.precision(17);
  s << "dataset = " << dataset << "\n";
  if (!data_root.empty()) s << "data_root = " << data_root << "\n";
  s << "k = " << points << "\n"
    << "train_rotation = " << to_string(train_rotation) << "\n"
    << "test_rotation = " << to_string(test_rotation) << "\n"
    << "descriptor = " << to_string(descriptor.kind) << "\n"
    << "nd = " << descriptor.count << "\n"
    << "scale_norm = " << (descriptor.scale_normalize ? "true" : "false") << "\n"
    << "fold_normals = " << (descriptor.fold_normals ? "true" : "false") << "\n"
    << "shared_widths = " << join(shared_widths) << "\n"
    << "classifier_widths = " << join(classifier_widths) << "\n"
    << "decoder_widths = " << join(decoder_widths) << "\n"
    << "dropout = " << dropout << "\n"
    << "voxel_resolution = " << voxel_resolution << "\n"
    << "recon_weight = " << recon_weight << "\n"
    << "batchnorm = " << (batchnorm ? "true" : "false") << "\n"
    << "epochs = " << epochs << "\n"
    << "batch_size = " << batch_size << "\n"
    << "lr = " << learning_rate << "\n"
    << "seed = " << seed << "\n"
    << "synth_train_per_class = " << synth_train_per_class << "\n"
    << "synth_test_per_class = " << synth_test_per_class << "\n"
    << "train_limit = " << train_limit << "\n"
    << "test_limit = " << test_limit << "\n"
    << "resample_points = " << (resample_points ? "true" : "false") << "\n"
    << "stop_train_accuracy = " << stop_train_accuracy << "\n"
    << "voxel_threshold = " << voxel_threshold << "\n";
  return s.str();
}

}  // namespace sparse3d
