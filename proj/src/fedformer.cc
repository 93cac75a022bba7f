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

#include "splitfed/fedformer.h"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

#include "splitfed/errors.h"
#include "splitfed/random.h"
#include "splitfed/spectral.h"

namespace splitfed {
namespace {

void RequirePositive(std::size_t value, const char* field) {
  if (value == 0) throw ConfigError(std::string("model.") + field + " must be positive");
}

void RequireShape(const Tensor& t, const Shape& expected, const char* what) {
  if (t.shape() != expected) {
    throw DimensionError(std::string(what) + ": expected " +
                         ShapeToString(expected) + ", got " +
                         ShapeToString(t.shape()));
  }
}

Tensor UniformTensor(Shape shape, double half_width, std::uint64_t seed,
                     bool zero) {
  std::vector<double> v(NumElements(shape), 0.0);
  if (!zero) {
    Rng rng(seed);
    for (double& x : v) x = Uniform(rng, -half_width, half_width);
  }
  return Tensor(std::move(shape), std::move(v), /*requires_grad=*/true);
}

// Weight initialized from a seed derived from its name.
Tensor Weight(const ModelConfig& c, const std::string& name, Shape shape,
              std::size_t fan_in, bool zero) {
  return UniformTensor(std::move(shape),
                       1.0 / std::sqrt(static_cast<double>(fan_in)),
                       DeriveSeed(c.seed, "init." + name), zero);
}

FebParams MakeFeb(const ModelConfig& c, const std::string& name,
                  std::size_t length, bool zero) {
  const std::size_t h = c.heads;
  const std::size_t e = c.head_dim();
  const double a = 1.0 / static_cast<double>(c.model_dim * c.modes);
  FebParams p;
  p.w = Weight(c, name + ".w", {c.model_dim, c.model_dim}, c.model_dim, zero);
  p.kernel.real = UniformTensor({h, e, e, c.modes}, a,
                                DeriveSeed(c.seed, "init." + name + ".kernel_re"), zero);
  p.kernel.imag = UniformTensor({h, e, e, c.modes}, a,
                                DeriveSeed(c.seed, "init." + name + ".kernel_im"), zero);
  p.modes = SelectModes(length, c.modes, DeriveSeed(c.seed, "modes." + name));
  return p;
}

FfnParams MakeFfn(const ModelConfig& c, const std::string& name, bool zero) {
  FfnParams p;
  p.w1 = Weight(c, name + ".w1", {c.model_dim, c.ff_dim}, c.model_dim, zero);
  p.b1 = Tensor::Zeros({c.ff_dim}, true);
  p.w2 = Weight(c, name + ".w2", {c.ff_dim, c.model_dim}, c.ff_dim, zero);
  p.b2 = Tensor::Zeros({c.model_dim}, true);
  return p;
}

void AppendFeb(std::vector<NamedTensor>& out, const std::string& prefix,
               const FebParams& p) {
  out.push_back({prefix + ".w", p.w});
  out.push_back({prefix + ".kernel_re", p.kernel.real});
  out.push_back({prefix + ".kernel_im", p.kernel.imag});
}

void AppendFfn(std::vector<NamedTensor>& out, const std::string& prefix,
               const FfnParams& p) {
  out.push_back({prefix + ".w1", p.w1});
  out.push_back({prefix + ".b1", p.b1});
  out.push_back({prefix + ".w2", p.w2});
  out.push_back({prefix + ".b2", p.b2});
}

Tensor CloneLeaf(const Tensor& t) {
  Tensor c = t.Detach();
  c.set_requires_grad(t.requires_grad());
  return c;
}

FebParams CloneFeb(const FebParams& p) {
  return {CloneLeaf(p.w), {CloneLeaf(p.kernel.real), CloneLeaf(p.kernel.imag)},
          p.modes};
}

FfnParams CloneFfn(const FfnParams& p) {
  return {CloneLeaf(p.w1), CloneLeaf(p.b1), CloneLeaf(p.w2), CloneLeaf(p.b2)};
}

std::vector<Tensor> TensorsOf(const std::vector<NamedTensor>& named) {
  std::vector<Tensor> out;
  out.reserve(named.size());
  for (const auto& n : named) out.push_back(n.tensor);
  return out;
}

Tensor ModesTensor(const std::vector<std::size_t>& modes) {
  std::vector<double> v(modes.begin(), modes.end());
  return Tensor({modes.size()}, std::move(v));
}

class NameIndex {
 public:
  explicit NameIndex(std::span<const NamedTensor> tensors) : tensors_(tensors) {}

  const Tensor& Find(const std::string& name) const {
    for (const auto& t : tensors_) {
      if (t.name == name) return t.tensor;
    }
    throw LookupError("parameter '" + name + "' is missing");
  }

  // Copies `name` into a fresh trainable leaf shaped like `like`.
  Tensor Leaf(const std::string& name, const Tensor& like) const {
    const Tensor& src = Find(name);
    if (src.shape() != like.shape()) {
      throw DimensionError("parameter '" + name + "' has shape " +
                           ShapeToString(src.shape()) + ", expected " +
                           ShapeToString(like.shape()));
    }
    return Tensor(src.shape(), {src.data().begin(), src.data().end()}, true);
  }

  std::vector<std::size_t> Modes(const std::string& name, std::size_t count,
                                 std::size_t length) const {
    const Tensor& src = Find(name);
    if (src.shape() != Shape{count}) {
      throw DimensionError("mode set '" + name + "' has shape " +
                           ShapeToString(src.shape()) + ", expected [" +
                           std::to_string(count) + "]");
    }
    std::vector<std::size_t> modes;
    for (double v : src.data()) {
      if (!(v >= 0.0) || v != std::floor(v)) {
        throw DimensionError("mode set '" + name + "' holds a non-integer bin");
      }
      modes.push_back(static_cast<std::size_t>(v));
    }
    ValidateModes(modes, length);
    return modes;
  }

 private:
  std::span<const NamedTensor> tensors_;
};

FebParams ImportFeb(const NameIndex& idx, const std::string& prefix,
                    const FebParams& like, std::size_t length) {
  FebParams p;
  p.w = idx.Leaf(prefix + ".w", like.w);
  p.kernel.real = idx.Leaf(prefix + ".kernel_re", like.kernel.real);
  p.kernel.imag = idx.Leaf(prefix + ".kernel_im", like.kernel.imag);
  p.modes = idx.Modes(prefix + ".modes", like.modes.size(), length);
  return p;
}

FfnParams ImportFfn(const NameIndex& idx, const std::string& prefix,
                    const FfnParams& like) {
  return {idx.Leaf(prefix + ".w1", like.w1), idx.Leaf(prefix + ".b1", like.b1),
          idx.Leaf(prefix + ".w2", like.w2), idx.Leaf(prefix + ".b2", like.b2)};
}

}  // namespace

std::vector<NamedTensor> ExportSplitOne(const SplitOneParams& p) {
  std::vector<NamedTensor> out = p.Named();
  out.push_back({"split1.enc_feb.modes", ModesTensor(p.enc_feb.modes)});
  out.push_back({"split1.dec_feb.modes", ModesTensor(p.dec_feb.modes)});
  return out;
}

std::vector<NamedTensor> ExportSplitTwo(const SplitTwoParams& p) {
  std::vector<NamedTensor> out = p.Named();
  out.push_back({"split2.enc2_feb.modes", ModesTensor(p.enc2_feb.modes)});
  out.push_back({"split2.dec_fea.modes_q", ModesTensor(p.dec_fea.modes_q)});
  out.push_back({"split2.dec_fea.modes_kv", ModesTensor(p.dec_fea.modes_kv)});
  return out;
}

SplitOneParams ImportSplitOne(std::span<const NamedTensor> tensors,
                              const ModelConfig& c) {
  const SplitOneParams like = InitSplitOne(c, /*zero=*/true);
  const NameIndex idx(tensors);
  SplitOneParams p;
  p.embed_conv = idx.Leaf("split1.embed_conv", like.embed_conv);
  p.embed_time_x = idx.Leaf("split1.embed_time_x", like.embed_time_x);
  p.embed_time_y = idx.Leaf("split1.embed_time_y", like.embed_time_y);
  p.enc_feb = ImportFeb(idx, "split1.enc_feb", like.enc_feb, c.input_length);
  p.dec_feb = ImportFeb(idx, "split1.dec_feb", like.dec_feb, c.decoder_length());
  p.trend_w1 = idx.Leaf("split1.trend_w1", like.trend_w1);
  return p;
}

SplitTwoParams ImportSplitTwo(std::span<const NamedTensor> tensors,
                              const ModelConfig& c) {
  const SplitTwoParams like = InitSplitTwo(c, /*zero=*/true);
  const NameIndex idx(tensors);
  SplitTwoParams p;
  p.enc_ffn1 = ImportFfn(idx, "split2.enc_ffn1", like.enc_ffn1);
  p.enc2_feb = ImportFeb(idx, "split2.enc2_feb", like.enc2_feb, c.input_length);
  p.enc_ffn2 = ImportFfn(idx, "split2.enc_ffn2", like.enc_ffn2);
  p.dec_fea.wq = idx.Leaf("split2.dec_fea.wq", like.dec_fea.wq);
  p.dec_fea.wk = idx.Leaf("split2.dec_fea.wk", like.dec_fea.wk);
  p.dec_fea.wv = idx.Leaf("split2.dec_fea.wv", like.dec_fea.wv);
  p.dec_fea.modes_q =
      idx.Modes("split2.dec_fea.modes_q", c.modes, c.decoder_length());
  p.dec_fea.modes_kv = idx.Modes("split2.dec_fea.modes_kv", c.modes, c.input_length);
  p.dec_ffn = ImportFfn(idx, "split2.dec_ffn", like.dec_ffn);
  p.trend_w2 = idx.Leaf("split2.trend_w2", like.trend_w2);
  p.trend_w3 = idx.Leaf("split2.trend_w3", like.trend_w3);
  p.proj = idx.Leaf("split2.proj", like.proj);
  return p;
}

void ModelConfig::Validate() const {
  RequirePositive(input_length, "input_length");
  RequirePositive(horizon, "horizon");
  RequirePositive(series_dim, "series_dim");
  RequirePositive(time_dim, "time_dim");
  RequirePositive(model_dim, "model_dim");
  RequirePositive(ff_dim, "ff_dim");
  RequirePositive(modes, "modes");
  RequirePositive(heads, "heads");
  if (input_length % 2 != 0) {
    throw ConfigError("model.input_length must be even");
  }
  if (model_dim % heads != 0) {
    throw ConfigError("model.heads must divide model.model_dim");
  }
  // Bins 1..n/2-1 of both sequence lengths must hold M distinct modes.
  const std::size_t shortest = std::min(input_length, decoder_length());
  if (shortest < 4 || modes > shortest / 2 - 1) {
    throw ConfigError("model.modes must be below half the sequence length (at most " +
                      std::to_string(shortest < 4 ? 0 : shortest / 2 - 1) + ")");
  }
  if (decomp_kernel % 2 == 0) {
    throw ConfigError("model.decomp_kernel must be odd");
  }
  if (decomp_kernel > shortest) {
    throw ConfigError("model.decomp_kernel exceeds the sequence length");
  }
}

std::vector<std::size_t> SelectModes(std::size_t length, std::size_t count,
                                     std::uint64_t seed) {
  if (length < 4 || count > length / 2 - 1) {
    throw ConfigError("cannot select " + std::to_string(count) +
                      " modes from a length-" + std::to_string(length) +
                      " spectrum");
  }
  Rng rng(seed);
  std::vector<std::size_t> picks =
      SampleWithoutReplacement(length / 2 - 1, count, rng);
  for (auto& k : picks) k += 1;
  std::sort(picks.begin(), picks.end());
  return picks;
}

std::vector<NamedTensor> SplitOneParams::Named() const {
  std::vector<NamedTensor> out{{"split1.embed_conv", embed_conv},
                               {"split1.embed_time_x", embed_time_x},
                               {"split1.embed_time_y", embed_time_y}};
  AppendFeb(out, "split1.enc_feb", enc_feb);
  AppendFeb(out, "split1.dec_feb", dec_feb);
  out.push_back({"split1.trend_w1", trend_w1});
  return out;
}

std::vector<Tensor> SplitOneParams::Parameters() const {
  return TensorsOf(Named());
}

SplitOneParams SplitOneParams::Clone() const {
  return {CloneLeaf(embed_conv), CloneLeaf(embed_time_x),
          CloneLeaf(embed_time_y), CloneFeb(enc_feb),
          CloneFeb(dec_feb),       CloneLeaf(trend_w1)};
}

std::vector<NamedTensor> SplitTwoParams::Named() const {
  std::vector<NamedTensor> out;
  AppendFfn(out, "split2.enc_ffn1", enc_ffn1);
  AppendFeb(out, "split2.enc2_feb", enc2_feb);
  AppendFfn(out, "split2.enc_ffn2", enc_ffn2);
  out.push_back({"split2.dec_fea.wq", dec_fea.wq});
  out.push_back({"split2.dec_fea.wk", dec_fea.wk});
  out.push_back({"split2.dec_fea.wv", dec_fea.wv});
  AppendFfn(out, "split2.dec_ffn", dec_ffn);
  out.push_back({"split2.trend_w2", trend_w2});
  out.push_back({"split2.trend_w3", trend_w3});
  out.push_back({"split2.proj", proj});
  return out;
}

std::vector<Tensor> SplitTwoParams::Parameters() const {
  return TensorsOf(Named());
}

SplitTwoParams SplitTwoParams::Clone() const {
  SplitTwoParams c;
  c.enc_ffn1 = CloneFfn(enc_ffn1);
  c.enc2_feb = CloneFeb(enc2_feb);
  c.enc_ffn2 = CloneFfn(enc_ffn2);
  c.dec_fea = {CloneLeaf(dec_fea.wq), CloneLeaf(dec_fea.wk),
               CloneLeaf(dec_fea.wv), dec_fea.modes_q, dec_fea.modes_kv};
  c.dec_ffn = CloneFfn(dec_ffn);
  c.trend_w2 = CloneLeaf(trend_w2);
  c.trend_w3 = CloneLeaf(trend_w3);
  c.proj = CloneLeaf(proj);
  return c;
}

SplitOneParams InitSplitOne(const ModelConfig& c, bool zero) {
  c.Validate();
  SplitOneParams p;
  p.embed_conv = Weight(c, "split1.embed_conv",
                        {kEmbedKernelWidth, c.series_dim, c.model_dim},
                        kEmbedKernelWidth * c.series_dim, zero);
  p.embed_time_x = Weight(c, "split1.embed_time_x", {c.time_dim, c.model_dim},
                          c.time_dim, zero);
  p.embed_time_y = Weight(c, "split1.embed_time_y", {c.time_dim, c.model_dim},
                          c.time_dim, zero);
  p.enc_feb = MakeFeb(c, "split1.enc_feb", c.input_length, zero);
  p.dec_feb = MakeFeb(c, "split1.dec_feb", c.decoder_length(), zero);
  p.trend_w1 = Weight(c, "split1.trend_w1", {c.model_dim, c.series_dim},
                      c.model_dim, zero);
  return p;
}

SplitTwoParams InitSplitTwo(const ModelConfig& c, bool zero) {
  c.Validate();
  SplitTwoParams p;
  p.enc_ffn1 = MakeFfn(c, "split2.enc_ffn1", zero);
  p.enc2_feb = MakeFeb(c, "split2.enc2_feb", c.input_length, zero);
  p.enc_ffn2 = MakeFfn(c, "split2.enc_ffn2", zero);
  const std::size_t d = c.model_dim;
  p.dec_fea.wq = Weight(c, "split2.dec_fea.wq", {d, d}, d, zero);
  p.dec_fea.wk = Weight(c, "split2.dec_fea.wk", {d, d}, d, zero);
  p.dec_fea.wv = Weight(c, "split2.dec_fea.wv", {d, d}, d, zero);
  p.dec_fea.modes_q = SelectModes(c.decoder_length(), c.modes,
                                  DeriveSeed(c.seed, "modes.split2.dec_fea.q"));
  p.dec_fea.modes_kv = SelectModes(c.input_length, c.modes,
                                   DeriveSeed(c.seed, "modes.split2.dec_fea.kv"));
  p.dec_ffn = MakeFfn(c, "split2.dec_ffn", zero);
  p.trend_w2 = Weight(c, "split2.trend_w2", {d, c.series_dim}, d, zero);
  p.trend_w3 = Weight(c, "split2.trend_w3", {d, c.series_dim}, d, zero);
  p.proj = Weight(c, "split2.proj", {d, c.series_dim}, d, zero);
  return p;
}

Decomposition SeriesDecomp(const Tensor& x, std::size_t kernel) {
  Tensor trend = MovingAverage(x, kernel);
  return {Sub(x, trend), trend};
}

Embedding DataEmbedding(const ModelInput& in, const SplitOneParams& p,
                        const ModelConfig& c) {
  if (in.x.rank() != 3) {
    throw DimensionError("embedding: x must be [B x L x Z], got " +
                         ShapeToString(in.x.shape()));
  }
  const std::size_t b = in.x.dim(0);
  const std::size_t half = c.input_length / 2;
  RequireShape(in.x, {b, c.input_length, c.series_dim}, "embedding x");
  RequireShape(in.x_mark, {b, c.input_length, c.time_dim}, "embedding x_mark");
  RequireShape(in.y_mark, {b, c.decoder_length(), c.time_dim},
               "embedding y_mark");

  Embedding e;
  e.x_emb = Add(Conv1d(in.x, p.embed_conv), Linear(in.x_mark, p.embed_time_x));

  Decomposition dx = SeriesDecomp(in.x, c.decomp_kernel);
  const Tensor placeholder = Tensor::Zeros({b, c.horizon, c.series_dim});
  const Tensor seasonal_parts[] = {Slice(dx.seasonal, 1, half, half),
                                   placeholder};
  const Tensor s_in = Concat(seasonal_parts, 1);
  e.s_emb = Add(Conv1d(s_in, p.embed_conv), Linear(in.y_mark, p.embed_time_y));

  const Tensor trend_parts[] = {Slice(dx.trend, 1, half, half),
                                MeanRepeat(in.x, c.horizon)};
  e.trend_ini = Concat(trend_parts, 1);
  return e;
}

Tensor FebForward(const Tensor& x, const FebParams& p) {
  if (x.rank() != 3) {
    throw DimensionError("feb: x must be [B x S x D], got " +
                         ShapeToString(x.shape()));
  }
  ValidateModes(p.modes, x.dim(1));
  const Tensor q = Linear(x, p.w);
  const ComplexTensor kept = ModeDft(q, p.modes);
  const ComplexTensor mixed = ModeMix(kept, p.kernel);
  return ModeIdft(mixed, p.modes, x.dim(1));
}

Tensor FeaForward(const Tensor& x_en, const Tensor& x_de, const FeaParams& p,
                  std::size_t heads) {
  if (x_en.rank() != 3 || x_de.rank() != 3 || x_en.dim(0) != x_de.dim(0)) {
    throw DimensionError("fea: encoder " + ShapeToString(x_en.shape()) +
                         " vs decoder " + ShapeToString(x_de.shape()));
  }
  if (p.modes_q.size() != p.modes_kv.size()) {
    throw ConfigError("fea: query and key/value mode counts differ");
  }
  ValidateModes(p.modes_q, x_de.dim(1));
  ValidateModes(p.modes_kv, x_en.dim(1));
  const Tensor q = Linear(x_de, p.wq);
  const Tensor k = Linear(x_en, p.wk);
  const Tensor v = Linear(x_en, p.wv);
  const ComplexTensor qf = ModeDft(q, p.modes_q);
  const ComplexTensor kf = ModeDft(k, p.modes_kv);
  const ComplexTensor vf = ModeDft(v, p.modes_kv);

  const std::size_t d = q.dim(2);
  if (heads == 0 || d % heads != 0) {
    throw ConfigError("fea: heads must divide the model dimension");
  }
  const std::size_t e = d / heads;
  auto head = [e](const ComplexTensor& z, std::size_t h) {
    return ComplexTensor{Slice(z.real, 2, h * e, e), Slice(z.imag, 2, h * e, e)};
  };
  std::vector<Tensor> re_parts;
  std::vector<Tensor> im_parts;
  for (std::size_t h = 0; h < heads; ++h) {
    const ComplexTensor scores =
        SplitTanh(ComplexBatchMatMul(head(qf, h), head(kf, h), true));
    const ComplexTensor out_h = ComplexBatchMatMul(scores, head(vf, h));
    re_parts.push_back(out_h.real);
    im_parts.push_back(out_h.imag);
  }
  ComplexTensor mixed = heads == 1
                            ? ComplexTensor{re_parts[0], im_parts[0]}
                            : ComplexTensor{Concat(re_parts, 2), Concat(im_parts, 2)};
  return ModeIdft(mixed, p.modes_q, x_de.dim(1));
}

Tensor FfnForward(const Tensor& x, const FfnParams& p) {
  const Tensor hidden = Gelu(AddBias(Linear(x, p.w1), p.b1));
  return AddBias(Linear(hidden, p.w2), p.b2);
}

SplitOneActivations Split1Forward(const ModelInput& input,
                                  const SplitOneParams& p,
                                  const ModelConfig& c) {
  const Embedding emb = DataEmbedding(input, p, c);
  SplitOneActivations a;
  a.enc_out = SeriesDecomp(Add(emb.x_emb, FebForward(emb.x_emb, p.enc_feb)),
                           c.decomp_kernel)
                  .seasonal;
  const Decomposition dd = SeriesDecomp(
      Add(emb.s_emb, FebForward(emb.s_emb, p.dec_feb)), c.decomp_kernel);
  a.dec_seasonal = dd.seasonal;
  a.dec_trend = Add(emb.trend_ini, Linear(dd.trend, p.trend_w1));
  return a;
}

Tensor Split2Forward(const SplitOneActivations& a, const SplitTwoParams& p,
                     const ModelConfig& c) {
  const std::size_t b = a.enc_out.rank() == 3 ? a.enc_out.dim(0) : 0;
  RequireShape(a.enc_out, {b, c.input_length, c.model_dim}, "split2 enc_out");
  RequireShape(a.dec_seasonal, {b, c.decoder_length(), c.model_dim},
               "split2 dec_seasonal");
  RequireShape(a.dec_trend, {b, c.decoder_length(), c.series_dim},
               "split2 dec_trend");
  const std::size_t k = c.decomp_kernel;

  // Encoder completion: FFN, then a full FEB + FFN layer.
  Tensor mem = SeriesDecomp(Add(a.enc_out, FfnForward(a.enc_out, p.enc_ffn1)), k)
                   .seasonal;
  mem = SeriesDecomp(Add(mem, FebForward(mem, p.enc2_feb)), k).seasonal;
  mem = SeriesDecomp(Add(mem, FfnForward(mem, p.enc_ffn2)), k).seasonal;

  const Decomposition d2 = SeriesDecomp(
      Add(a.dec_seasonal, FeaForward(mem, a.dec_seasonal, p.dec_fea, c.heads)),
      k);
  const Decomposition d3 =
      SeriesDecomp(Add(d2.seasonal, FfnForward(d2.seasonal, p.dec_ffn)), k);
  const Tensor trend = Add(Add(a.dec_trend, Linear(d2.trend, p.trend_w2)),
                           Linear(d3.trend, p.trend_w3));
  const Tensor out = Add(Linear(d3.seasonal, p.proj), trend);
  return Slice(out, 1, c.decoder_length() - c.horizon, c.horizon);
}

Tensor MonolithicForward(const ModelInput& input, const SplitOneParams& p1,
                         const SplitTwoParams& p2, const ModelConfig& c) {
  return Split2Forward(Split1Forward(input, p1, c), p2, c);
}

}  // namespace splitfed
