#include "reference_model.hpp"

#include <cmath>
#include <stdexcept>

namespace xespred::testing {

namespace {

using Vec = std::vector<Real>;
using Grid = std::vector<Vec>;  // [lane][unit]

Real sigmoid(Real z) { return 1.0L / (1.0L + std::exp(-z)); }

const Vec& tensor(const TensorMap& m, const std::string& name) {
  const auto it = m.find(name);
  if (it == m.end()) throw std::runtime_error("reference: missing tensor " + name);
  return it->second;
}

Grid to_grid(const Matrix& m) {
  Grid g(m.rows(), Vec(m.cols()));
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) g[r][c] = m(r, c);
  }
  return g;
}

}  // namespace

TensorMap to_reference(const ModelParams& params) {
  TensorMap out;
  for (const auto& [name, m] : params.tensors()) {
    out[name] = Vec(m->values().begin(), m->values().end());
  }
  return out;
}

ReferenceLoss reference_window_loss(const Architecture& arch, const TensorMap& p,
                                    const Batch& batch, const RecurrentState& initial) {
  const std::size_t lanes = batch.lanes;
  const std::size_t steps = batch.steps;
  const std::size_t H = arch.hidden;
  const std::size_t n_targets = arch.targets.size();

  std::vector<std::string> stacks;
  if (arch.shared_rnn) {
    stacks.push_back("shared");
  } else {
    for (const auto& t : arch.targets) stacks.push_back(t.key);
  }

  // h[stack][layer][lane][unit], same for c.
  std::vector<std::vector<Grid>> h(stacks.size());
  std::vector<std::vector<Grid>> c(stacks.size());
  for (std::size_t s = 0; s < stacks.size(); ++s) {
    for (std::size_t l = 0; l < arch.layers; ++l) {
      h[s].push_back(to_grid(initial[s][l].h));
      c[s].push_back(to_grid(initial[s][l].c));
    }
  }

  // outputs[t][target][lane][class]
  std::vector<std::vector<Grid>> outputs(steps, std::vector<Grid>(n_targets));

  for (std::size_t t = 0; t < steps; ++t) {
    Grid x(lanes);
    for (std::size_t r = 0; r < lanes; ++r) {
      for (std::size_t q = 0; q < arch.predictors.size(); ++q) {
        const auto& pd = arch.predictors[q];
        if (pd.categorical) {
          const Vec& table = tensor(p, "embedding/" + pd.key);
          const auto id = static_cast<std::size_t>(batch.inputs[q].ids(r, t));
          for (std::size_t k = 0; k < pd.width; ++k) x[r].push_back(table[id * pd.width + k]);
        } else {
          x[r].push_back(batch.inputs[q].values(r, t));
        }
      }
    }
    if (arch.use_input_projection) {
      const Vec& P = tensor(p, "input_projection");
      const std::size_t m = x[0].size();
      const std::size_t w = arch.projection_width;
      for (std::size_t r = 0; r < lanes; ++r) {
        Vec y(w, 0.0L);
        for (std::size_t j = 0; j < w; ++j) {
          for (std::size_t k = 0; k < m; ++k) y[j] += x[r][k] * P[k * w + j];
        }
        x[r] = y;
      }
    }

    std::vector<Grid> top(stacks.size());
    for (std::size_t s = 0; s < stacks.size(); ++s) {
      Grid in = x;
      for (std::size_t l = 0; l < arch.layers; ++l) {
        const std::string base = "rnn/" + stacks[s] + "/layer" + std::to_string(l) + "/";
        const Vec& W = tensor(p, base + "W");
        const Vec& U = tensor(p, base + "U");
        const Vec& b = tensor(p, base + "bias");
        const std::size_t in_w = in[0].size();
        for (std::size_t r = 0; r < lanes; ++r) {
          Vec z(4 * H);
          for (std::size_t j = 0; j < 4 * H; ++j) {
            Real acc = b[j];
            for (std::size_t k = 0; k < in_w; ++k) acc += in[r][k] * W[k * 4 * H + j];
            for (std::size_t k = 0; k < H; ++k) acc += h[s][l][r][k] * U[k * 4 * H + j];
            z[j] = acc;
          }
          for (std::size_t u = 0; u < H; ++u) {
            const Real i_gate = sigmoid(z[u]);
            const Real f_gate = sigmoid(z[H + u]);
            const Real o_gate = sigmoid(z[2 * H + u]);
            const Real g_cand = std::tanh(z[3 * H + u]);
            c[s][l][r][u] = f_gate * c[s][l][r][u] + i_gate * g_cand;
            h[s][l][r][u] = o_gate * std::tanh(c[s][l][r][u]);
          }
        }
        in = h[s][l];
      }
      top[s] = in;
    }

    for (std::size_t i = 0; i < n_targets; ++i) {
      const auto& td = arch.targets[i];
      const Grid& hs = top[arch.shared_rnn ? 0 : i];
      const Vec& W = tensor(p, "output/" + td.key + "/W");
      const Vec& b = tensor(p, "output/" + td.key + "/bias");
      Grid out(lanes, Vec(td.classes));
      for (std::size_t r = 0; r < lanes; ++r) {
        for (std::size_t j = 0; j < td.classes; ++j) {
          Real acc = b[j];
          for (std::size_t k = 0; k < H; ++k) acc += hs[r][k] * W[k * td.classes + j];
          out[r][j] = acc;
        }
      }
      outputs[t][i] = out;
    }
  }

  ReferenceLoss loss;
  loss.per_target.assign(n_targets, 0.0L);
  for (std::size_t i = 0; i < n_targets; ++i) {
    const auto& td = arch.targets[i];
    if (td.categorical) {
      Real sum = 0;
      for (std::size_t t = 0; t < steps; ++t) {
        for (std::size_t r = 0; r < lanes; ++r) {
          const Vec& logits = outputs[t][i][r];
          Real top_logit = logits[0];
          for (const Real v : logits) top_logit = std::max(top_logit, v);
          Real denom = 0;
          for (const Real v : logits) denom += std::exp(v - top_logit);
          const auto id = static_cast<std::size_t>(batch.targets[i].ids(r, t));
          const Real prob = std::exp(logits[id] - top_logit) / denom;
          sum -= std::log(std::max(prob, 1e-12L));
        }
      }
      loss.per_target[i] = sum / static_cast<Real>(lanes * steps);
    } else {
      Real sum = 0;
      std::size_t count = 0;
      for (std::size_t t = 0; t < steps; ++t) {
        for (std::size_t r = 0; r < lanes; ++r) {
          if (batch.masks[i](r, t) == 0.0) continue;
          const Real d = outputs[t][i][r][0] - static_cast<Real>(batch.targets[i].values(r, t));
          sum += td.loss == LossKind::mae ? std::fabs(d) : d * d;
          ++count;
        }
      }
      if (count > 0) {
        const Real mean = sum / static_cast<Real>(count);
        loss.per_target[i] = td.loss == LossKind::rmse ? std::sqrt(mean) : mean;
      }
    }
    loss.combined += static_cast<Real>(td.weight) * loss.per_target[i];
  }
  return loss;
}

}  // namespace xespred::testing
