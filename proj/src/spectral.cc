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

#include "splitfed/spectral.h"

#include <cmath>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "splitfed/errors.h"

namespace splitfed {
namespace {

constexpr double kImagResidualLimit = 1e-6;

// cos/sin of 2*pi*r/N for r in [0, N). Indexing by (k*n) mod N keeps every
// angle reduced exactly before the trig call.
struct Twiddles {
  std::vector<double> cos;
  std::vector<double> sin;
};

Twiddles MakeTwiddles(std::size_t n) {
  Twiddles t;
  t.cos.resize(n);
  t.sin.resize(n);
  for (std::size_t r = 0; r < n; ++r) {
    const double angle =
        2.0 * std::numbers::pi * static_cast<double>(r) / static_cast<double>(n);
    t.cos[r] = std::cos(angle);
    t.sin[r] = std::sin(angle);
  }
  return t;
}

struct Dims {
  std::size_t batch;
  std::size_t length;
  std::size_t channels;
};

Dims SequenceDims(const Tensor& x, const char* op) {
  if (x.rank() == 1) return {1, x.dim(0), 1};
  if (x.rank() == 3) return {x.dim(0), x.dim(1), x.dim(2)};
  throw DimensionError(std::string(op) + " expects [N] or [B x N x C], got " +
                       ShapeToString(x.shape()));
}

void RequireComplexPair(const ComplexTensor& z, const char* op) {
  if (z.real.shape() != z.imag.shape()) {
    throw DimensionError(std::string(op) + ": real/imag shapes differ");
  }
}

}  // namespace

void ValidateModes(std::span<const std::size_t> modes, std::size_t length) {
  for (std::size_t i = 0; i < modes.size(); ++i) {
    if (modes[i] > length / 2) {
      throw ConfigError("mode " + std::to_string(modes[i]) +
                        " out of range for length " + std::to_string(length));
    }
    if (i > 0 && modes[i] <= modes[i - 1]) {
      throw ConfigError("mode indices must be strictly increasing");
    }
  }
}

ComplexTensor ModeDft(const Tensor& x, std::span<const std::size_t> modes) {
  const Dims d = SequenceDims(x, "dft");
  for (std::size_t k : modes) {
    if (k >= d.length) {
      throw ConfigError("dft bin " + std::to_string(k) + " out of range for " +
                        std::to_string(d.length) + " samples");
    }
  }
  const std::size_t m_count = modes.size();
  const std::vector<std::size_t> bins(modes.begin(), modes.end());
  auto tw = std::make_shared<Twiddles>(MakeTwiddles(d.length));
  std::vector<double> re(d.batch * m_count * d.channels, 0.0);
  std::vector<double> im(re.size(), 0.0);
  const double* xv = x.data().data();
  for (std::size_t b = 0; b < d.batch; ++b) {
    for (std::size_t m = 0; m < m_count; ++m) {
      double* rrow = re.data() + (b * m_count + m) * d.channels;
      double* irow = im.data() + (b * m_count + m) * d.channels;
      for (std::size_t n = 0; n < d.length; ++n) {
        const std::size_t r = (bins[m] * n) % d.length;
        const double c = tw->cos[r];
        const double s = tw->sin[r];
        const double* xrow = xv + (b * d.length + n) * d.channels;
        for (std::size_t ch = 0; ch < d.channels; ++ch) {
          rrow[ch] += xrow[ch] * c;
          irow[ch] -= xrow[ch] * s;
        }
      }
    }
  }
  Shape out_shape = x.rank() == 1 ? Shape{m_count}
                                  : Shape{d.batch, m_count, d.channels};
  // Adjoint of one part: gx[n] += sum_m g[m] * (cos or -sin)(2 pi k_m n / N).
  auto adjoint = [d, bins, tw, m_count](bool imag_part) {
    return [d, bins, tw, m_count, imag_part](internal::Node& self) {
      auto& in = *self.inputs[0];
      if (!in.requires_grad) return;
      auto& g = in.EnsureGrad();
      for (std::size_t b = 0; b < d.batch; ++b) {
        for (std::size_t m = 0; m < m_count; ++m) {
          const double* grow = self.grad.data() + (b * m_count + m) * d.channels;
          for (std::size_t n = 0; n < d.length; ++n) {
            const std::size_t r = (bins[m] * n) % d.length;
            const double w = imag_part ? -tw->sin[r] : tw->cos[r];
            double* gx = g.data() + (b * d.length + n) * d.channels;
            for (std::size_t ch = 0; ch < d.channels; ++ch) gx[ch] += grow[ch] * w;
          }
        }
      }
    };
  };
  ComplexTensor out;
  out.real = MakeResult(out_shape, std::move(re), {x}, adjoint(false));
  out.imag = MakeResult(out_shape, std::move(im), {x}, adjoint(true));
  return out;
}

ComplexTensor Dft(const Tensor& x) {
  const Dims d = SequenceDims(x, "dft");
  std::vector<std::size_t> all(d.length);
  for (std::size_t k = 0; k < d.length; ++k) all[k] = k;
  return ModeDft(x, all);
}

Tensor Idft(const ComplexTensor& spectrum) {
  RequireComplexPair(spectrum, "idft");
  const Dims d = SequenceDims(spectrum.real, "idft");
  const std::size_t n_len = d.length;
  auto tw = std::make_shared<Twiddles>(MakeTwiddles(n_len));
  const double inv_n = 1.0 / static_cast<double>(n_len);
  const double* re = spectrum.real.data().data();
  const double* im = spectrum.imag.data().data();
  std::vector<double> out(d.batch * n_len * d.channels, 0.0);
  std::vector<double> residual(d.channels);
  double worst = 0.0;
  for (std::size_t b = 0; b < d.batch; ++b) {
    for (std::size_t n = 0; n < n_len; ++n) {
      double* orow = out.data() + (b * n_len + n) * d.channels;
      std::fill(residual.begin(), residual.end(), 0.0);
      for (std::size_t k = 0; k < n_len; ++k) {
        const std::size_t r = (k * n) % n_len;
        const double c = tw->cos[r];
        const double s = tw->sin[r];
        const double* rrow = re + (b * n_len + k) * d.channels;
        const double* irow = im + (b * n_len + k) * d.channels;
        for (std::size_t ch = 0; ch < d.channels; ++ch) {
          orow[ch] += rrow[ch] * c - irow[ch] * s;
          residual[ch] += rrow[ch] * s + irow[ch] * c;
        }
      }
      for (std::size_t ch = 0; ch < d.channels; ++ch) {
        orow[ch] *= inv_n;
        worst = std::max(worst, std::abs(residual[ch] * inv_n));
      }
    }
  }
  if (!(worst <= kImagResidualLimit)) {
    throw NumericError("idft: imaginary residual " + std::to_string(worst) +
                       " exceeds 1e-6; spectrum is not Hermitian");
  }
  auto adjoint = [d, tw, inv_n](bool imag_part) {
    return [d, tw, inv_n, imag_part](internal::Node& self) {
      auto& in = *self.inputs[imag_part ? 1 : 0];
      if (!in.requires_grad) return;
      auto& g = in.EnsureGrad();
      for (std::size_t b = 0; b < d.batch; ++b) {
        for (std::size_t k = 0; k < d.length; ++k) {
          double* gk = g.data() + (b * d.length + k) * d.channels;
          for (std::size_t n = 0; n < d.length; ++n) {
            const std::size_t r = (k * n) % d.length;
            const double w = (imag_part ? -tw->sin[r] : tw->cos[r]) * inv_n;
            const double* grow = self.grad.data() + (b * d.length + n) * d.channels;
            for (std::size_t ch = 0; ch < d.channels; ++ch) gk[ch] += grow[ch] * w;
          }
        }
      }
    };
  };
  Tensor result = MakeResult(spectrum.real.shape(), std::move(out),
                             {spectrum.real, spectrum.imag},
                             [real_adj = adjoint(false),
                              imag_adj = adjoint(true)](internal::Node& self) {
                               real_adj(self);
                               imag_adj(self);
                             });
  return result;
}

Tensor ModeIdft(const ComplexTensor& kept, std::span<const std::size_t> modes,
                std::size_t length) {
  RequireComplexPair(kept, "mode_idft");
  if (kept.real.rank() != 3 || kept.real.dim(1) != modes.size()) {
    throw DimensionError("mode_idft: kept spectrum " +
                         ShapeToString(kept.real.shape()) + " vs " +
                         std::to_string(modes.size()) + " modes");
  }
  ValidateModes(modes, length);
  const std::size_t batch = kept.real.dim(0);
  const std::size_t m_count = modes.size();
  const std::size_t ch = kept.real.dim(2);
  const std::vector<std::size_t> bins(modes.begin(), modes.end());
  // Self-conjugate bins (DC, Nyquist) appear once; the rest pair with N-k.
  std::vector<double> weight(m_count);
  for (std::size_t m = 0; m < m_count; ++m) {
    const bool self_conjugate = bins[m] == 0 || 2 * bins[m] == length;
    weight[m] = (self_conjugate ? 1.0 : 2.0) / static_cast<double>(length);
  }
  auto tw = std::make_shared<Twiddles>(MakeTwiddles(length));
  const double* re = kept.real.data().data();
  const double* im = kept.imag.data().data();
  std::vector<double> out(batch * length * ch, 0.0);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t n = 0; n < length; ++n) {
      double* orow = out.data() + (b * length + n) * ch;
      for (std::size_t m = 0; m < m_count; ++m) {
        const std::size_t r = (bins[m] * n) % length;
        const double c = tw->cos[r] * weight[m];
        const double s = tw->sin[r] * weight[m];
        const double* rrow = re + (b * m_count + m) * ch;
        const double* irow = im + (b * m_count + m) * ch;
        for (std::size_t k = 0; k < ch; ++k) orow[k] += rrow[k] * c - irow[k] * s;
      }
    }
  }
  return MakeResult(
      {batch, length, ch}, std::move(out), {kept.real, kept.imag},
      [=](internal::Node& self) {
        auto& in_re = *self.inputs[0];
        auto& in_im = *self.inputs[1];
        for (std::size_t b = 0; b < batch; ++b) {
          for (std::size_t m = 0; m < m_count; ++m) {
            double* gre = in_re.requires_grad
                              ? in_re.EnsureGrad().data() + (b * m_count + m) * ch
                              : nullptr;
            double* gim = in_im.requires_grad
                              ? in_im.EnsureGrad().data() + (b * m_count + m) * ch
                              : nullptr;
            for (std::size_t n = 0; n < length; ++n) {
              const std::size_t r = (bins[m] * n) % length;
              const double c = tw->cos[r] * weight[m];
              const double s = tw->sin[r] * weight[m];
              const double* grow = self.grad.data() + (b * length + n) * ch;
              for (std::size_t k = 0; k < ch; ++k) {
                if (gre) gre[k] += grow[k] * c;
                if (gim) gim[k] -= grow[k] * s;
              }
            }
          }
        }
      });
}

ComplexTensor ModeMix(const ComplexTensor& kept, const ComplexTensor& kernel) {
  RequireComplexPair(kept, "mode_mix");
  RequireComplexPair(kernel, "mode_mix");
  if (kept.real.rank() != 3 || kernel.real.rank() != 4) {
    throw DimensionError("mode_mix: kept " + ShapeToString(kept.real.shape()) +
                         " kernel " + ShapeToString(kernel.real.shape()));
  }
  const std::size_t batch = kept.real.dim(0);
  const std::size_t m_count = kept.real.dim(1);
  const std::size_t ch = kept.real.dim(2);
  const std::size_t heads = kernel.real.dim(0);
  const std::size_t e = kernel.real.dim(1);
  if (kernel.real.dim(2) != e || kernel.real.dim(3) != m_count ||
      heads * e != ch) {
    throw DimensionError("mode_mix: kernel " +
                         ShapeToString(kernel.real.shape()) +
                         " does not fit kept spectrum " +
                         ShapeToString(kept.real.shape()));
  }
  const double* ar = kept.real.data().data();
  const double* ai = kept.imag.data().data();
  const double* rr = kernel.real.data().data();
  const double* ri = kernel.imag.data().data();
  // kernel[h, i, o, m] lives at ((h*E + i)*E + o)*M + m.
  auto kidx = [e, m_count](std::size_t h, std::size_t i, std::size_t o,
                           std::size_t m) {
    return ((h * e + i) * e + o) * m_count + m;
  };
  std::vector<double> out_re(batch * m_count * ch, 0.0);
  std::vector<double> out_im(out_re.size(), 0.0);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t m = 0; m < m_count; ++m) {
      const std::size_t row = (b * m_count + m) * ch;
      for (std::size_t h = 0; h < heads; ++h) {
        for (std::size_t i = 0; i < e; ++i) {
          const double xr = ar[row + h * e + i];
          const double xi = ai[row + h * e + i];
          for (std::size_t o = 0; o < e; ++o) {
            const std::size_t ki = kidx(h, i, o, m);
            out_re[row + h * e + o] += xr * rr[ki] - xi * ri[ki];
            out_im[row + h * e + o] += xr * ri[ki] + xi * rr[ki];
          }
        }
      }
    }
  }
  // Inputs order: kept.re, kept.im, kernel.re, kernel.im. For the real
  // output the partials are (r_re, -r_im, a_re, -a_im); for the imaginary
  // output they are (r_im, r_re, a_im, a_re).
  auto adjoint = [=](bool imag_part) {
    return [=](internal::Node& self) {
      auto& in_ar = *self.inputs[0];
      auto& in_ai = *self.inputs[1];
      auto& in_rr = *self.inputs[2];
      auto& in_ri = *self.inputs[3];
      double* g_ar = in_ar.requires_grad ? in_ar.EnsureGrad().data() : nullptr;
      double* g_ai = in_ai.requires_grad ? in_ai.EnsureGrad().data() : nullptr;
      double* g_rr = in_rr.requires_grad ? in_rr.EnsureGrad().data() : nullptr;
      double* g_ri = in_ri.requires_grad ? in_ri.EnsureGrad().data() : nullptr;
      const double* xr_all = in_ar.data.data();
      const double* xi_all = in_ai.data.data();
      const double* kr_all = in_rr.data.data();
      const double* ki_all = in_ri.data.data();
      for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t m = 0; m < m_count; ++m) {
          const std::size_t row = (b * m_count + m) * ch;
          for (std::size_t h = 0; h < heads; ++h) {
            for (std::size_t i = 0; i < e; ++i) {
              const std::size_t xi_idx = row + h * e + i;
              const double xr = xr_all[xi_idx];
              const double xi = xi_all[xi_idx];
              for (std::size_t o = 0; o < e; ++o) {
                const double g = self.grad[row + h * e + o];
                if (g == 0.0) continue;
                const std::size_t k = kidx(h, i, o, m);
                if (!imag_part) {
                  if (g_ar) g_ar[xi_idx] += g * kr_all[k];
                  if (g_ai) g_ai[xi_idx] -= g * ki_all[k];
                  if (g_rr) g_rr[k] += g * xr;
                  if (g_ri) g_ri[k] -= g * xi;
                } else {
                  if (g_ar) g_ar[xi_idx] += g * ki_all[k];
                  if (g_ai) g_ai[xi_idx] += g * kr_all[k];
                  if (g_rr) g_rr[k] += g * xi;
                  if (g_ri) g_ri[k] += g * xr;
                }
              }
            }
          }
        }
      }
    };
  };
  const Shape out_shape = kept.real.shape();
  std::vector<Tensor> inputs{kept.real, kept.imag, kernel.real, kernel.imag};
  ComplexTensor out;
  out.real = MakeResult(out_shape, std::move(out_re), inputs, adjoint(false));
  out.imag = MakeResult(out_shape, std::move(out_im), inputs, adjoint(true));
  return out;
}

ComplexTensor ComplexBatchMatMul(const ComplexTensor& a, const ComplexTensor& b,
                                 bool transpose_b) {
  RequireComplexPair(a, "complex_batch_matmul");
  RequireComplexPair(b, "complex_batch_matmul");
  ComplexTensor out;
  out.real = Sub(BatchMatMul(a.real, b.real, transpose_b),
                 BatchMatMul(a.imag, b.imag, transpose_b));
  out.imag = Add(BatchMatMul(a.real, b.imag, transpose_b),
                 BatchMatMul(a.imag, b.real, transpose_b));
  return out;
}

ComplexTensor SplitTanh(const ComplexTensor& z) {
  return {Tanh(z.real), Tanh(z.imag)};
}

}  // namespace splitfed
