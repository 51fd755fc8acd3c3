#pragma once

#include <string>

#include "taco/core/rng.hpp"
#include "taco/nn/activations.hpp"
#include "taco/nn/layer_norm.hpp"
#include "taco/nn/linear.hpp"

namespace taco::nn {

struct DropoutTape {
  Vec scale;  // multiplier applied per unit: 0 or 1/(1-rate)
};

inline void dropout_forward(const Vec& x, double rate, bool train, Rng& rng, Vec& y,
                            DropoutTape* tape) {
  if (rate < 0.0 || rate >= 1.0) throw ContractViolation("dropout rate must be in [0,1)");
  y.resize(x.size());
  if (tape) tape->scale.assign(x.size(), 1.0);
  if (!train || rate == 0.0) {
    y = x;
    return;
  }
  const double keep_scale = 1.0 / (1.0 - rate);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double s = rng.uniform() < rate ? 0.0 : keep_scale;
    if (tape) tape->scale[i] = s;
    y[i] = x[i] * s;
  }
}

inline void dropout_backward(const DropoutTape& tape, const Vec& dy, Vec& dx) {
  dx.resize(dy.size());
  for (std::size_t i = 0; i < dy.size(); ++i) dx[i] = dy[i] * tape.scale[i];
}

// Residual feed-forward block:
//   out = LayerNorm(h + fc2(Dropout(GELU(fc1(h)))))
// fc1 expands hidden -> 4*hidden, fc2 projects back. Output dimension
// equals input dimension.
struct MlpBlock {
  LinearLayer fc1;
  LinearLayer fc2;
  LayerNorm norm;
  double dropout_rate;

  explicit MlpBlock(std::size_t hidden, double dropout = 0.1)
      : fc1(4 * hidden, hidden), fc2(hidden, 4 * hidden), norm(hidden), dropout_rate(dropout) {}

  std::size_t dim() const { return fc1.in_dim(); }

  void init(Rng& rng) {
    xavier_init(fc1, rng);
    xavier_init(fc2, rng);
  }

  struct Tape {
    Vec in;
    Vec pre1;
    Vec act1;
    Vec dropped;
    Vec residual;
    DropoutTape drop;
    LayerNorm::Tape ln;
  };

  void forward(const Vec& h, bool train, Rng& rng, Vec& out, Tape* tape) const {
    require_size(h, dim(), "MlpBlock::forward input");
    Tape local;
    Tape& t = tape ? *tape : local;
    t.in = h;
    fc1.forward(h, t.pre1);
    gelu(t.pre1, t.act1);
    dropout_forward(t.act1, dropout_rate, train, rng, t.dropped, &t.drop);
    Vec expanded;
    fc2.forward(t.dropped, expanded);
    t.residual.resize(h.size());
    for (std::size_t i = 0; i < h.size(); ++i) t.residual[i] = h[i] + expanded[i];
    norm.forward(t.residual, out, tape ? &t.ln : nullptr);
  }

  void backward(const Tape& tape, const Vec& dout, Vec& dx) {
    Vec dres;
    norm.backward(tape.ln, dout, dres);
    Vec ddropped;
    fc2.backward(tape.dropped, dres, &ddropped);
    Vec dact1;
    dropout_backward(tape.drop, ddropped, dact1);
    Vec dpre1(dact1.size());
    for (std::size_t i = 0; i < dact1.size(); ++i) dpre1[i] = dact1[i] * gelu_grad(tape.pre1[i]);
    Vec dthrough;
    fc1.backward(tape.in, dpre1, &dthrough);
    dx.resize(dres.size());
    for (std::size_t i = 0; i < dres.size(); ++i) dx[i] = dres[i] + dthrough[i];
  }

  void zero_grad() {
    fc1.zero_grad();
    fc2.zero_grad();
    norm.zero_grad();
  }

  void collect_params(const std::string& prefix, ParamList& out) {
    fc1.collect_params(prefix + ".fc1", out);
    fc2.collect_params(prefix + ".fc2", out);
    norm.collect_params(prefix + ".norm", out);
  }
};

}  // namespace taco::nn
