#include "cppf/config.hpp"

#include <charconv>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>

#include "cppf/io.hpp"

namespace cppf {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) throw ConfigError("config: " + key + " expects a number, got '" + v + "'");
  return out;
}

long long to_int(const std::string& key, const std::string& v) {
  long long out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) throw ConfigError("config: " + key + " expects an integer, got '" + v + "'");
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "on") return true;
  if (v == "false" || v == "0" || v == "off") return false;
  throw ConfigError("config: " + key + " expects true/false, got '" + v + "'");
}

struct Field {
  std::string section;
  std::string key;
  std::function<void(RunConfig&, const std::string&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <class T>
Field real(std::string section, std::string key, T RunConfig::*group, double T::*member) {
  return {std::move(section), std::move(key),
          [=](RunConfig& c, const std::string& k, const std::string& v) { (c.*group).*member = to_double(k, v); },
          [=](const RunConfig& c) { return fmt_real((c.*group).*member); }};
}

template <class T, class I>
Field integer(std::string section, std::string key, T RunConfig::*group, I T::*member) {
  return {std::move(section), std::move(key),
          [=](RunConfig& c, const std::string& k, const std::string& v) {
            (c.*group).*member = static_cast<I>(to_int(k, v));
          },
          [=](const RunConfig& c) { return std::to_string((c.*group).*member); }};
}

template <class T>
Field flag(std::string section, std::string key, T RunConfig::*group, bool T::*member) {
  return {std::move(section), std::move(key),
          [=](RunConfig& c, const std::string& k, const std::string& v) { (c.*group).*member = to_bool(k, v); },
          [=](const RunConfig& c) { return std::string((c.*group).*member ? "true" : "false"); }};
}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = [] {
    using P = PipelineConfig;
    std::vector<Field> f;
    f.push_back({"run", "meshes",
                 [](RunConfig& c, const std::string&, const std::string& v) {
                   c.meshes.clear();
                   std::stringstream ss(v);
                   std::string item;
                   while (std::getline(ss, item, ',')) {
                     item = trim(item);
                     if (!item.empty()) c.meshes.push_back(item);
                   }
                 },
                 [](const RunConfig& c) {
                   std::string out;
                   for (std::size_t i = 0; i < c.meshes.size(); ++i) out += (i ? "," : "") + c.meshes[i];
                   return out;
                 }});
    f.push_back({"run", "views",
                 [](RunConfig& c, const std::string& k, const std::string& v) { c.views = static_cast<int>(to_int(k, v)); },
                 [](const RunConfig& c) { return std::to_string(c.views); }});
    f.push_back({"run", "output", [](RunConfig& c, const std::string&, const std::string& v) { c.output = v; },
                 [](const RunConfig& c) { return c.output; }});
    f.push_back(integer("run", "seed", &RunConfig::pipeline, &P::seed));
    f.push_back(integer("run", "workers", &RunConfig::pipeline, &P::workers));

    f.push_back(integer("pipeline", "tuples", &RunConfig::pipeline, &P::tuples));
    f.push_back(integer("pipeline", "tuple_size", &RunConfig::pipeline, &P::tuple_size));
    f.push_back(integer("pipeline", "normal_k", &RunConfig::pipeline, &P::normal_k));
    f.push_back(real("pipeline", "voxel", &RunConfig::pipeline, &P::voxel));
    f.push_back(real("pipeline", "grid_padding", &RunConfig::pipeline, &P::grid_padding));
    f.push_back(real("pipeline", "orientation_resolution_deg", &RunConfig::pipeline, &P::orientation_resolution_deg));
    f.push_back(flag("pipeline", "refine", &RunConfig::pipeline, &P::refine_enabled));
    f.push_back({"pipeline", "decode",
                 [](RunConfig& c, const std::string& k, const std::string& v) {
                   if (v == "expectation") c.pipeline.decode = DecodeMode::kExpectation;
                   else if (v == "sample") c.pipeline.decode = DecodeMode::kSample;
                   else throw ConfigError("config: " + k + " expects expectation|sample");
                 },
                 [](const RunConfig& c) {
                   return std::string(c.pipeline.decode == DecodeMode::kSample ? "sample" : "expectation");
                 }});

    auto desc = [](const RunConfig& c) -> const DescriptorConfig& { return c.pipeline.descriptor; };
    auto desc_mut = [](RunConfig& c) -> DescriptorConfig& { return c.pipeline.descriptor; };
    f.push_back({"descriptor", "radius",
                 [=](RunConfig& c, const std::string& k, const std::string& v) { desc_mut(c).radius = to_double(k, v); },
                 [=](const RunConfig& c) { return fmt_real(desc(c).radius); }});
    for (auto [key, member] : {std::pair{"distance_bins", &DescriptorConfig::distance_bins},
                               std::pair{"normal_bins", &DescriptorConfig::normal_bins},
                               std::pair{"offset_bins", &DescriptorConfig::offset_bins}}) {
      f.push_back({"descriptor", key,
                   [=](RunConfig& c, const std::string& k, const std::string& v) {
                     desc_mut(c).*member = static_cast<int>(to_int(k, v));
                   },
                   [=](const RunConfig& c) { return std::to_string(desc(c).*member); }});
    }

    auto filt = [](RunConfig& c) -> FilterConfig& { return c.pipeline.filter; };
    auto cfilt = [](const RunConfig& c) -> const FilterConfig& { return c.pipeline.filter; };
    for (auto [key, member] : {std::pair{"tau", &FilterConfig::tau}, std::pair{"eta", &FilterConfig::eta}}) {
      f.push_back({"filter", key,
                   [=](RunConfig& c, const std::string& k, const std::string& v) { filt(c).*member = to_double(k, v); },
                   [=](const RunConfig& c) { return fmt_real(cfilt(c).*member); }});
    }
    for (auto [key, member] : {std::pair{"sigma_samples", &FilterConfig::sigma_samples},
                               std::pair{"theta_samples", &FilterConfig::theta_samples}}) {
      f.push_back({"filter", key,
                   [=](RunConfig& c, const std::string& k, const std::string& v) {
                     filt(c).*member = static_cast<int>(to_int(k, v));
                   },
                   [=](const RunConfig& c) { return std::to_string(cfilt(c).*member); }});
    }
    for (auto [key, member] : {std::pair{"enabled", &FilterConfig::enabled}, std::pair{"use_beta", &FilterConfig::use_beta},
                               std::pair{"second_center_pass", &FilterConfig::second_center_pass}}) {
      f.push_back({"filter", key,
                   [=](RunConfig& c, const std::string& k, const std::string& v) { filt(c).*member = to_bool(k, v); },
                   [=](const RunConfig& c) { return std::string(cfilt(c).*member ? "true" : "false"); }});
    }

    auto ref = [](RunConfig& c) -> RefineConfig& { return c.pipeline.refine; };
    auto cref = [](const RunConfig& c) -> const RefineConfig& { return c.pipeline.refine; };
    for (auto [key, member] : {std::pair{"learning_rate", &RefineConfig::learning_rate},
                               std::pair{"beta1", &RefineConfig::beta1}, std::pair{"beta2", &RefineConfig::beta2},
                               std::pair{"epsilon", &RefineConfig::epsilon}}) {
      f.push_back({"refine", key,
                   [=](RunConfig& c, const std::string& k, const std::string& v) { ref(c).*member = to_double(k, v); },
                   [=](const RunConfig& c) { return fmt_real(cref(c).*member); }});
    }
    f.push_back({"refine", "iterations",
                 [=](RunConfig& c, const std::string& k, const std::string& v) {
                   ref(c).iterations = static_cast<int>(to_int(k, v));
                 },
                 [=](const RunConfig& c) { return std::to_string(cref(c).iterations); }});

    f.push_back(real("noise", "clutter_fraction", &RunConfig::noise, &NoiseConfig::clutter_fraction));
    f.push_back(real("noise", "depth_jitter_sigma", &RunConfig::noise, &NoiseConfig::depth_jitter_sigma));
    f.push_back(real("noise", "mask_dilation", &RunConfig::noise, &NoiseConfig::mask_dilation));

    using M = PredictorConfig;
    f.push_back(integer("predictor", "hidden_width", &RunConfig::predictor, &M::hidden_width));
    f.push_back(integer("predictor", "hidden_layers", &RunConfig::predictor, &M::hidden_layers));
    f.push_back(integer("predictor", "bins", &RunConfig::predictor, &M::bins));
    f.push_back(real("predictor", "learning_rate", &RunConfig::predictor, &M::learning_rate));
    f.push_back(integer("predictor", "epochs", &RunConfig::predictor, &M::epochs));
    f.push_back(integer("predictor", "lr_halving_period", &RunConfig::predictor, &M::lr_halving_period));
    f.push_back(integer("predictor", "batch_size", &RunConfig::predictor, &M::batch_size));
    f.push_back(integer("predictor", "seed", &RunConfig::predictor, &M::seed));
    f.push_back({"predictor", "loss",
                 [](RunConfig& c, const std::string& k, const std::string& v) {
                   if (v == "mse") c.predictor.loss = CoordLoss::kMse;
                   else if (v == "cross_entropy") c.predictor.loss = CoordLoss::kCrossEntropy;
                   else throw ConfigError("config: " + k + " expects mse|cross_entropy");
                 },
                 [](const RunConfig& c) {
                   return std::string(c.predictor.loss == CoordLoss::kCrossEntropy ? "cross_entropy" : "mse");
                 }});

    using O = OraclePredictorConfig;
    f.push_back(real("oracle", "coord_noise_sigma", &RunConfig::oracle, &O::coord_noise_sigma));
    f.push_back(real("oracle", "collision_rate", &RunConfig::oracle, &O::collision_rate));
    f.push_back(real("oracle", "scale_noise_sigma", &RunConfig::oracle, &O::scale_noise_sigma));
    f.push_back(integer("oracle", "bins", &RunConfig::oracle, &O::bins));
    f.push_back(integer("oracle", "seed", &RunConfig::oracle, &O::seed));
    f.push_back(integer("train", "tuples_per_view", &RunConfig::train, &TrainDataConfig::tuples_per_view));
    return f;
  }();
  return table;
}

void set_field(RunConfig& cfg, const std::string& section, const std::string& key, const std::string& value) {
  for (const auto& f : fields()) {
    if (f.section == section && f.key == key) {
      f.set(cfg, section + "." + key, value);
      return;
    }
  }
  throw ConfigError("config: unknown key " + section + "." + key);
}

}  // namespace

void RunConfig::validate(bool check_files) const {
  if (meshes.empty()) throw ConfigError("config: run.meshes is empty");
  if (views < 1) throw ConfigError("config: run.views must be at least 1");
  if (train.tuples_per_view < 1) throw ConfigError("config: train.tuples_per_view must be at least 1");
  try {
    pipeline.validate();
    noise.validate();
    predictor.validate();
    oracle.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (check_files) {
    for (const auto& m : meshes) {
      if (m.rfind("builtin:", 0) != 0 && !std::filesystem::exists(m)) throw ConfigError("config: mesh not found: " + m);
    }
  }
}

RunConfig parse_config(const std::string& text, RunConfig base) {
  std::istringstream in(text);
  std::string line, section = "run";
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("config line " + std::to_string(lineno) + ": malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    set_field(base, section, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return base;
}

RunConfig load_config(const std::string& path, RunConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), std::move(base));
}

void apply_override(RunConfig& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  const auto dot = assignment.find('.');
  if (eq == std::string::npos || dot == std::string::npos || dot > eq) {
    throw ConfigError("config: override must look like section.key=value, got '" + assignment + "'");
  }
  set_field(cfg, trim(assignment.substr(0, dot)), trim(assignment.substr(dot + 1, eq - dot - 1)),
            trim(assignment.substr(eq + 1)));
}

std::string dump_config(const RunConfig& cfg) {
  std::ostringstream out;
  std::string section;
  for (const auto& f : fields()) {
    if (f.section != section) {
      if (!section.empty()) out << '\n';
      section = f.section;
      out << '[' << section << "]\n";
    }
    out << f.key << " = " << f.get(cfg) << '\n';
  }
  return out.str();
}

}  // namespace cppf
