// Copyright 2026 The Splitfed Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include "splitfed/config.h"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>
#include <system_error>

#include "splitfed/errors.h"
#include "splitfed/random.h"

namespace splitfed {
namespace {

enum class Kind { kInt, kFloat, kBool, kString, kFloatList };

const char* KindName(Kind kind) {
  switch (kind) {
    case Kind::kInt: return "int";
    case Kind::kFloat: return "float";
    case Kind::kBool: return "bool";
    case Kind::kString: return "string";
    case Kind::kFloatList: return "float[]";
  }
  return "?";
}

std::string Trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string FloatText(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

bool ParseFloat(const std::string& text, double& out) {
  const std::string t = Trim(text);
  if (t.empty()) return false;
  const char* first = t.data();
  if (*first == '+') ++first;
  auto res = std::from_chars(first, t.data() + t.size(), out);
  return res.ec == std::errc() && res.ptr == t.data() + t.size();
}

struct Value {
  std::int64_t i = 0;
  double f = 0.0;
  bool b = false;
  std::string s;
  std::vector<double> list;
};

struct Field {
  std::string key;
  Kind kind;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const Value&)> set;
  bool dumped = true;  // part of the canonical text and hash
};

// Helpers building fields over plain members.
template <typename Get>
Field SizeField(std::string key, Get ref) {
  return {std::move(key), Kind::kInt,
          [ref](const RunConfig& c) {
            return std::to_string(ref(const_cast<RunConfig&>(c)));
          },
          [ref, key](RunConfig& c, const Value& v) {
            if (v.i < 0) throw ConfigError(key + " must be >= 0");
            ref(c) = static_cast<std::size_t>(v.i);
          }};
}

template <typename Get>
Field FloatField(std::string key, Get ref) {
  return {std::move(key), Kind::kFloat,
          [ref](const RunConfig& c) {
            return FloatText(ref(const_cast<RunConfig&>(c)));
          },
          [ref](RunConfig& c, const Value& v) { ref(c) = v.f; }};
}

template <typename Get>
Field BoolField(std::string key, Get ref) {
  return {std::move(key), Kind::kBool,
          [ref](const RunConfig& c) {
            return std::string(ref(const_cast<RunConfig&>(c)) ? "true" : "false");
          },
          [ref](RunConfig& c, const Value& v) { ref(c) = v.b; }};
}

Field StringField(std::string key,
                  std::function<std::string(const RunConfig&)> get,
                  std::function<void(RunConfig&, const std::string&)> set) {
  return {std::move(key), Kind::kString,
          [get](const RunConfig& c) { return "\"" + get(c) + "\""; },
          [set](RunConfig& c, const Value& v) { set(c, v.s); }};
}

Field ListField(std::string key, std::vector<double> RunConfig::*member) {
  return {std::move(key), Kind::kFloatList,
          [member](const RunConfig& c) {
            std::string out = "[";
            const auto& list = c.*member;
            for (std::size_t i = 0; i < list.size(); ++i) {
              if (i) out += ", ";
              out += FloatText(list[i]);
            }
            return out + "]";
          },
          [member](RunConfig& c, const Value& v) { c.*member = v.list; }};
}

#define SF_REF(expr) [](RunConfig& c) -> auto& { return expr; }

const std::vector<Field>& Fields() {
  static const std::vector<Field> fields = [] {
    std::vector<Field> f;
    f.push_back(StringField(
        "data.source",
        [](const RunConfig& c) {
          return std::string(c.source == DataSource::kSynth ? "synth" : "csv");
        },
        [](RunConfig& c, const std::string& s) {
          if (s == "synth") {
            c.source = DataSource::kSynth;
          } else if (s == "csv") {
            c.source = DataSource::kCsv;
          } else {
            throw ConfigError("expected synth or csv, got '" + s + "'");
          }
        }));
    f.push_back(StringField(
        "data.csv_path", [](const RunConfig& c) { return c.csv_path; },
        [](RunConfig& c, const std::string& s) { c.csv_path = s; }));
    f.push_back(SizeField("data.num_gs", SF_REF(c.num_gs)));
    f.push_back(SizeField("data.holdout_clients", SF_REF(c.holdout_clients)));
    f.push_back(SizeField("data.stride", SF_REF(c.stride)));

    f.push_back(SizeField("synth.clients", SF_REF(c.synth.clients)));
    f.push_back(SizeField("synth.days", SF_REF(c.synth.days)));
    f.push_back(StringField(
        "synth.profile",
        [](const RunConfig& c) { return SynthProfileName(c.synth.profile); },
        [](RunConfig& c, const std::string& s) {
          c.synth.profile = ParseSynthProfile(s);
        }));
    f.push_back(SizeField("synth.groups", SF_REF(c.synth.groups)));
    f.push_back(FloatField("synth.noise", SF_REF(c.synth.noise)));
    f.push_back(
        FloatField("synth.weekly_amplitude", SF_REF(c.synth.weekly_amplitude)));
    f.push_back({"synth.start", Kind::kInt,
                 [](const RunConfig& c) { return std::to_string(c.synth.start); },
                 [](RunConfig& c, const Value& v) { c.synth.start = v.i; }});

    f.push_back(SizeField("model.input_length", SF_REF(c.model.input_length)));
    f.push_back(SizeField("model.horizon", SF_REF(c.model.horizon)));
    f.push_back(SizeField("model.series_dim", SF_REF(c.model.series_dim)));
    f.push_back(SizeField("model.time_dim", SF_REF(c.model.time_dim)));
    f.push_back(SizeField("model.model_dim", SF_REF(c.model.model_dim)));
    f.push_back(SizeField("model.ff_dim", SF_REF(c.model.ff_dim)));
    f.push_back(SizeField("model.modes", SF_REF(c.model.modes)));
    f.push_back(SizeField("model.heads", SF_REF(c.model.heads)));
    f.push_back(SizeField("model.decomp_kernel", SF_REF(c.model.decomp_kernel)));

    f.push_back(StringField(
        "train.strategy",
        [](const RunConfig& c) { return StrategyName(c.strategy); },
        [](RunConfig& c, const std::string& s) { c.strategy = ParseStrategy(s); }));
    f.push_back(SizeField("train.epochs", SF_REF(c.plan.epochs)));
    f.push_back(SizeField("train.clients_per_gs", SF_REF(c.plan.clients_per_gs)));
    f.push_back(StringField(
        "train.selection",
        [](const RunConfig& c) { return ClientSelectionName(c.plan.selection); },
        [](RunConfig& c, const std::string& s) {
          c.plan.selection = ParseClientSelection(s);
        }));
    f.push_back(SizeField("train.batch_size", SF_REF(c.plan.batch_size)));
    f.push_back(FloatField("train.lr", SF_REF(c.plan.lr)));
    f.push_back(StringField(
        "train.schedule",
        [](const RunConfig& c) { return LrScheduleName(c.plan.schedule); },
        [](RunConfig& c, const std::string& s) {
          c.plan.schedule = ParseLrSchedule(s);
        }));
    f.push_back(SizeField("train.patience", SF_REF(c.plan.patience)));
    f.push_back({"train.timeout_ms", Kind::kInt,
                 [](const RunConfig& c) {
                   return std::to_string(c.plan.timeout.count());
                 },
                 [](RunConfig& c, const Value& v) {
                   if (v.i <= 0) throw ConfigError("must be > 0");
                   c.plan.timeout = std::chrono::milliseconds(v.i);
                 }});
    f.push_back(
        BoolField("train.weights_per_epoch", SF_REF(c.plan.weights_per_epoch)));

    f.push_back(BoolField("dp.enabled", SF_REF(c.plan.dp.enabled)));
    f.push_back(FloatField("dp.epsilon", SF_REF(c.plan.dp.epsilon)));
    f.push_back(FloatField("dp.delta", SF_REF(c.plan.dp.delta)));
    // Negative: estimate the sensitivity from each batch.
    f.push_back({"dp.sensitivity", Kind::kFloat,
                 [](const RunConfig& c) {
                   return FloatText(c.plan.dp.fixed_sensitivity.value_or(-1.0));
                 },
                 [](RunConfig& c, const Value& v) {
                   if (v.f < 0) {
                     c.plan.dp.fixed_sensitivity.reset();
                   } else {
                     c.plan.dp.fixed_sensitivity = v.f;
                   }
                 }});

    f.push_back(SizeField("mi.gs", SF_REF(c.mi_gs)));
    f.push_back(SizeField("mi.client", SF_REF(c.mi_client)));
    f.push_back(FloatField("mi.laplace_scale", SF_REF(c.mi_laplace_scale)));
    f.push_back(SizeField("mi.projection_dim", SF_REF(c.mi_projection_dim)));
    f.push_back(SizeField("mi.steps", SF_REF(c.mine.steps)));
    f.push_back(SizeField("mi.batch", SF_REF(c.mine.batch)));
    f.push_back(FloatField("mi.lr", SF_REF(c.mine.lr)));
    f.push_back(SizeField("mi.eval_every", SF_REF(c.mine.eval_every)));
    f.push_back(SizeField("mi.eval_batches", SF_REF(c.mine.eval_batches)));
    f.push_back(FloatField("mi.ema", SF_REF(c.mine.ema)));
    f.push_back(FloatField("mi.holdout", SF_REF(c.mine.holdout)));

    f.push_back(ListField("sweep.epsilons", &RunConfig::sweep_epsilons));
    f.push_back(ListField("sweep.deltas", &RunConfig::sweep_deltas));
    f.push_back(SizeField("sweep.seeds", SF_REF(c.sweep_seeds)));

    f.push_back(FloatField("overhead.clients", SF_REF(c.overhead.clients)));
    f.push_back(FloatField("overhead.batch", SF_REF(c.overhead.batch)));
    f.push_back(FloatField("overhead.fft_size", SF_REF(c.overhead.fft_size)));
    f.push_back(FloatField("overhead.model_dim", SF_REF(c.overhead.model_dim)));
    f.push_back(FloatField("overhead.ff_dim", SF_REF(c.overhead.ff_dim)));
    f.push_back(FloatField("overhead.modes", SF_REF(c.overhead.modes)));
    f.push_back(
        FloatField("overhead.encoder_length", SF_REF(c.overhead.encoder_length)));
    f.push_back(
        FloatField("overhead.decoder_length", SF_REF(c.overhead.decoder_length)));
    f.push_back(FloatField("overhead.horizon", SF_REF(c.overhead.horizon)));
    f.push_back(FloatField("overhead.series_dim", SF_REF(c.overhead.series_dim)));
    f.push_back(FloatField("overhead.time_dim", SF_REF(c.overhead.time_dim)));
    f.push_back(FloatField("overhead.heads", SF_REF(c.overhead.heads)));
    f.push_back(FloatField("overhead.bytes_per_element",
                           SF_REF(c.overhead.bytes_per_element)));
    f.push_back(FloatField("overhead.paper_multiplier",
                           SF_REF(c.overhead.paper_multiplier)));
    f.push_back(FloatField("overhead.backward_factor",
                           SF_REF(c.overhead.backward_factor)));
    f.push_back(FloatField("overhead.gs_speedup", SF_REF(c.overhead.gs_speedup)));
    f.push_back(
        FloatField("overhead.gs_time_budget", SF_REF(c.overhead.gs_time_budget)));
    // Negative: use the computed round share.
    f.push_back({"overhead.assumed_client_share", Kind::kFloat,
                 [](const RunConfig& c) {
                   return FloatText(c.overhead.assumed_client_share.value_or(-1.0));
                 },
                 [](RunConfig& c, const Value& v) {
                   if (v.f < 0) {
                     c.overhead.assumed_client_share.reset();
                   } else {
                     c.overhead.assumed_client_share = v.f;
                   }
                 }});

    f.push_back({"run.seed", Kind::kInt,
                 [](const RunConfig& c) { return std::to_string(c.seed); },
                 [](RunConfig& c, const Value& v) {
                   if (v.i < 0) throw ConfigError("must be >= 0");
                   c.seed = static_cast<std::uint64_t>(v.i);
                 }});
    // Where outputs go does not change what they contain.
    f.push_back(StringField(
        "run.out", [](const RunConfig& c) { return c.out_dir; },
        [](RunConfig& c, const std::string& s) { c.out_dir = s; }));
    f.back().dumped = false;
    return f;
  }();
  return fields;
}

#undef SF_REF

Value ParseValue(Kind kind, const std::string& raw) {
  Value v;
  const std::string text = Trim(raw);
  switch (kind) {
    case Kind::kInt: {
      auto res = std::from_chars(text.data(), text.data() + text.size(), v.i);
      if (text.empty() || res.ec != std::errc() ||
          res.ptr != text.data() + text.size()) {
        throw ConfigError("bad int '" + text + "'");
      }
      break;
    }
    case Kind::kFloat:
      if (!ParseFloat(text, v.f) || std::isnan(v.f)) {
        throw ConfigError("bad float '" + text + "'");
      }
      break;
    case Kind::kBool:
      if (text == "true") {
        v.b = true;
      } else if (text != "false") {
        throw ConfigError("bad bool '" + text + "'");
      }
      break;
    case Kind::kString:
      if (text.size() >= 2 && text.front() == '"' && text.back() == '"') {
        v.s = text.substr(1, text.size() - 2);
      } else {
        v.s = text;
      }
      break;
    case Kind::kFloatList: {
      if (text.size() < 2 || text.front() != '[' || text.back() != ']') {
        throw ConfigError("list must be [a, b, ...]");
      }
      std::stringstream items(text.substr(1, text.size() - 2));
      std::string item;
      while (std::getline(items, item, ',')) {
        double d = 0.0;
        if (!ParseFloat(item, d) || std::isnan(d)) {
          throw ConfigError("bad float '" + Trim(item) + "' in list");
        }
        v.list.push_back(d);
      }
      break;
    }
  }
  return v;
}

}  // namespace

void RunConfig::Validate() const {
  auto fail = [](const std::string& key, const std::string& msg) {
    throw ConfigError(key + ": " + msg);
  };
  if (source == DataSource::kCsv) {
    if (csv_path.empty()) fail("data.csv_path", "required when data.source is csv");
    if (!std::filesystem::exists(csv_path)) {
      fail("data.csv_path", "no such file '" + csv_path + "'");
    }
  } else if (synth.clients == 0 || synth.days == 0) {
    fail("synth.clients", "synthetic data needs clients and days > 0");
  }
  if (num_gs == 0) fail("data.num_gs", "must be > 0");
  if (stride == 0) fail("data.stride", "must be > 0");
  try {
    model.Validate();
  } catch (const ConfigError& e) {
    fail("model", e.what());
  }
  try {
    plan.Validate();
  } catch (const ConfigError& e) {
    fail("train", e.what());
  }
  try {
    overhead.Validate();
  } catch (const ConfigError& e) {
    fail("overhead", e.what());
  }
  if (sweep_epsilons.empty()) fail("sweep.epsilons", "must not be empty");
  if (sweep_deltas.empty()) fail("sweep.deltas", "must not be empty");
  for (double e : sweep_epsilons) {
    if (!(e > 0)) fail("sweep.epsilons", "values must be > 0");
  }
  for (double d : sweep_deltas) {
    if (!(d >= 0 && d < 1)) fail("sweep.deltas", "values must be in [0, 1)");
  }
  if (sweep_seeds == 0) fail("sweep.seeds", "must be > 0");
  if (mine.steps == 0) fail("mi.steps", "must be > 0");
  if (mine.batch == 0) fail("mi.batch", "must be > 0");
  if (mine.eval_every == 0) fail("mi.eval_every", "must be > 0");
  if (mine.eval_batches == 0) fail("mi.eval_batches", "must be > 0");
  if (!(mine.lr > 0)) fail("mi.lr", "must be > 0");
  if (!(mine.holdout >= 0 && mine.holdout < 1)) fail("mi.holdout", "must be in [0, 1)");
  if (!(mi_laplace_scale >= 0)) fail("mi.laplace_scale", "must be >= 0");
  if (out_dir.empty()) fail("run.out", "must not be empty");
}

RunConfig PaperPreset() {
  RunConfig c;
  c.source = DataSource::kCsv;
  c.num_gs = 3;
  c.model.input_length = 96;
  c.model.horizon = 96;
  c.model.model_dim = 512;
  c.model.ff_dim = 2048;
  c.model.modes = 47;  // largest count below L/2 with DC excluded
  c.model.heads = 1;
  c.model.decomp_kernel = 25;
  c.plan.epochs = 10;
  c.plan.clients_per_gs = 10;
  c.plan.batch_size = 32;
  c.plan.lr = 1e-4;
  c.plan.schedule = LrSchedule::kHalving;
  c.plan.patience = 3;
  c.mine.steps = 10000;
  c.mi_projection_dim = 256;
  return c;
}

RunConfig DeskPreset() {
  RunConfig c = PaperPreset();
  c.source = DataSource::kSynth;
  c.synth = SynthSpec{};
  c.synth.clients = 4;
  c.synth.days = 60;
  c.synth.groups = 2;
  c.num_gs = 2;
  c.model = ModelConfig{};  // L 48, O 24, D 32, D_ff 64, M 8
  c.plan.epochs = 5;
  c.plan.clients_per_gs = 2;
  c.plan.batch_size = 32;
  c.plan.lr = 2e-4;
  c.plan.schedule = LrSchedule::kConstant;
  c.mine.steps = 1500;
  c.mi_projection_dim = 32;
  c.sweep_epsilons = {0.5, 1.0, 2.5, 5.0, 10.0};
  c.sweep_seeds = 3;
  return c;
}

RunConfig PresetByName(const std::string& name) {
  if (name == "paper") return PaperPreset();
  if (name == "desk") return DeskPreset();
  throw ConfigError("unknown preset '" + name + "' (paper | desk)");
}

void ApplyConfigText(const std::string& text, const std::string& origin,
                     RunConfig& config) {
  std::istringstream in(text);
  std::string line;
  std::string section;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string where = origin + ":" + std::to_string(line_no);
    const std::string t = Trim(line);
    if (t.empty() || t[0] == '#') continue;
    if (t.front() == '[') {
      if (t.back() != ']' || t.size() < 3) {
        throw ConfigError(where + ": malformed section header");
      }
      section = Trim(t.substr(1, t.size() - 2));
      continue;
    }
    const auto colon = t.find(':');
    const auto eq = t.find('=');
    if (colon == std::string::npos || eq == std::string::npos || eq < colon) {
      throw ConfigError(where + ": expected 'key: type = value'");
    }
    const std::string key = Trim(t.substr(0, colon));
    const std::string type = Trim(t.substr(colon + 1, eq - colon - 1));
    const std::string full = section.empty() ? key : section + "." + key;
    const Field* field = nullptr;
    for (const Field& f : Fields()) {
      if (f.key == full) field = &f;
    }
    if (field == nullptr) throw ConfigError(where + ": unknown key " + full);
    if (type != KindName(field->kind)) {
      throw ConfigError(where + ": " + full + " is " + KindName(field->kind) +
                        ", not '" + type + "'");
    }
    try {
      field->set(config, ParseValue(field->kind, t.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError(where + ": " + full + ": " + e.what());
    }
  }
}

void ApplyConfigFile(const std::string& path, RunConfig& config) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  ApplyConfigText(buf.str(), path, config);
}

std::string DumpConfig(const RunConfig& config) {
  std::string out;
  for (const Field& f : Fields()) {
    if (!f.dumped) continue;
    out += f.key + ": " + KindName(f.kind) + " = " + f.get(config) + "\n";
  }
  return out;
}

std::uint64_t ConfigHash(const RunConfig& config) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char ch : DumpConfig(config)) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  return h;
}

RunSeeds DeriveRunSeeds(std::uint64_t seed) {
  return {DeriveSeed(seed, "synth"), DeriveSeed(seed, "model"),
          DeriveSeed(seed, "train"), DeriveSeed(seed, "mine")};
}

RunConfig Resolve(const RunConfig& config) {
  RunConfig c = config;
  const RunSeeds s = DeriveRunSeeds(config.seed);
  c.synth.seed = s.synth;
  c.model.seed = s.model;
  c.plan.seed = s.train;
  c.mine.seed = s.mine;
  return c;
}

}  // namespace splitfed
