#include "embedrul/seq2seq.hpp"

#include <algorithm>
#include <cmath>

namespace embedrul {

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Per-step activations kept from the forward pass. `in` is the input below
// after mask fill and dropout, exactly what the gates consumed.
struct StepCache {
  Vec in;
  Vec drop_mask;  // empty = identity
  Vec r, u, zt, h;
};

using LayerSteps = std::vector<std::vector<StepCache>>;  // [step][layer]

struct Cache {
  LayerSteps enc;
  LayerSteps dec;
  Vec z;
  Matrix recon;  // window time order
};

void check_window(const Seq2SeqModel& model, const AugmentedWindow& window) {
  if (window.values.rows != model.window_len)
    fail(ErrorKind::invalid_argument, "window length != model window_len");
  if (window.values.cols != model.target_dim)
    fail(ErrorKind::invalid_argument, "window width != model target_dim");
  if (!window.mask.same_shape(window.values) ||
      !window.delta.same_shape(window.values))
    fail(ErrorKind::invalid_argument, "window channel shapes differ");
}

// Encoder input at window row t. Masked values enter as exactly 0.0 (via
// selection, not multiplication), so the computation is bitwise invariant
// to whatever the values channel holds at masked positions.
Vec input_row(const Seq2SeqModel& model, const AugmentedWindow& window,
              std::size_t t) {
  const std::size_t k = model.target_dim;
  Vec x(model.input_dim(), 0.0);
  for (std::size_t j = 0; j < k; ++j)
    x[j] = window.mask(t, j) != 0.0 ? window.values(t, j) : 0.0;
  if (model.mask_delta_inputs)
    for (std::size_t j = 0; j < k; ++j) {
      x[k + j] = window.mask(t, j);
      x[2 * k + j] = window.delta(t, j);
    }
  return x;
}

Vec draw_dropout_mask(std::size_t size, double rate, Rng& rng) {
  Vec mask(size);
  const double keep_scale = 1.0 / (1.0 - rate);
  for (double& m : mask) m = rng.uniform() < rate ? 0.0 : keep_scale;
  return mask;
}

// One GRU step, recording activations. h_prev is the layer state from the
// previous step; the dropout mask (possibly empty) scales input only.
void step_forward(const GruLayerParams& layer, const Vec& input_below,
                  const Vec& h_prev, Vec drop_mask, StepCache& out) {
  const std::size_t k = layer.input_dim;
  const std::size_t c = layer.hidden;
  out.in = input_below;
  if (!drop_mask.empty())
    for (std::size_t j = 0; j < k; ++j) out.in[j] *= drop_mask[j];
  out.drop_mask = std::move(drop_mask);

  Vec v(k + c + 1);
  std::copy(out.in.begin(), out.in.end(), v.begin());
  std::copy(h_prev.begin(), h_prev.end(), v.begin() + k);
  v[k + c] = 1.0;

  matvec(layer.w_reset, v, out.r);
  matvec(layer.w_update, v, out.u);
  for (double& x : out.r) x = sigmoid(x);
  for (double& x : out.u) x = sigmoid(x);

  Vec g = v;
  for (std::size_t i = 0; i < c; ++i) g[k + i] = out.r[i] * h_prev[i];
  matvec(layer.w_propose, g, out.zt);
  for (double& x : out.zt) x = std::tanh(x);

  out.h.resize(c);
  for (std::size_t i = 0; i < c; ++i)
    out.h[i] = (1.0 - out.u[i]) * h_prev[i] + out.u[i] * out.zt[i];
}

// Reverse-mode step. dh is dL/dh for this step; dh_prev accumulates the
// gradient flowing to the previous step's state, d_in the gradient w.r.t.
// the (pre-dropout) input below.
void step_backward(const GruLayerParams& layer, const StepCache& cache,
                   const Vec& h_prev, const Vec& dh, GruLayerParams& grad,
                   Vec& dh_prev, Vec& d_in) {
  const std::size_t k = layer.input_dim;
  const std::size_t c = layer.hidden;
  const std::size_t p = k + c + 1;

  Vec v(p);
  std::copy(cache.in.begin(), cache.in.end(), v.begin());
  std::copy(h_prev.begin(), h_prev.end(), v.begin() + k);
  v[k + c] = 1.0;
  Vec g = v;
  for (std::size_t i = 0; i < c; ++i) g[k + i] = cache.r[i] * h_prev[i];

  dh_prev.assign(c, 0.0);
  Vec da(k, 0.0);

  Vec dpre(c);
  for (std::size_t i = 0; i < c; ++i) {
    const double dzt = dh[i] * cache.u[i];
    dpre[i] = dzt * (1.0 - cache.zt[i] * cache.zt[i]);
    dh_prev[i] += dh[i] * (1.0 - cache.u[i]);
  }
  outer_add(grad.w_propose, dpre, g);
  Vec back(p, 0.0);
  matvec_transpose_add(layer.w_propose, dpre, back);
  for (std::size_t j = 0; j < k; ++j) da[j] += back[j];
  Vec drh(c);
  for (std::size_t i = 0; i < c; ++i) {
    drh[i] = back[k + i];
    dh_prev[i] += drh[i] * cache.r[i];
  }

  for (std::size_t i = 0; i < c; ++i) {
    const double dr = drh[i] * h_prev[i];
    dpre[i] = dr * cache.r[i] * (1.0 - cache.r[i]);
  }
  outer_add(grad.w_reset, dpre, v);
  back.assign(p, 0.0);
  matvec_transpose_add(layer.w_reset, dpre, back);
  for (std::size_t j = 0; j < k; ++j) da[j] += back[j];
  for (std::size_t i = 0; i < c; ++i) dh_prev[i] += back[k + i];

  for (std::size_t i = 0; i < c; ++i) {
    const double du = dh[i] * (cache.zt[i] - h_prev[i]);
    dpre[i] = du * cache.u[i] * (1.0 - cache.u[i]);
  }
  outer_add(grad.w_update, dpre, v);
  back.assign(p, 0.0);
  matvec_transpose_add(layer.w_update, dpre, back);
  for (std::size_t j = 0; j < k; ++j) da[j] += back[j];
  for (std::size_t i = 0; i < c; ++i) dh_prev[i] += back[k + i];

  d_in = std::move(da);
  if (!cache.drop_mask.empty())
    for (std::size_t j = 0; j < k; ++j) d_in[j] *= cache.drop_mask[j];
}

void forward_encoder(const Seq2SeqModel& model, const AugmentedWindow& window,
                     bool training, Rng* rng, LayerSteps& steps, Vec& z) {
  const std::size_t w = model.window_len;
  const std::size_t num_layers = model.encoder.size();
  const bool drop = training && model.dropout > 0.0;

  steps.assign(w, std::vector<StepCache>(num_layers));
  Vec h0;
  for (std::size_t t = 0; t < w; ++t) {
    Vec below = input_row(model, window, t);
    for (std::size_t l = 0; l < num_layers; ++l) {
      const GruLayerParams& layer = model.encoder[l];
      if (t == 0) h0.assign(layer.hidden, 0.0);
      const Vec& h_prev = t > 0 ? steps[t - 1][l].h : h0;
      Vec mask;
      if (drop) mask = draw_dropout_mask(layer.input_dim, model.dropout, *rng);
      step_forward(layer, below, h_prev, std::move(mask), steps[t][l]);
      below = steps[t][l].h;
    }
  }

  z.clear();
  z.reserve(model.embedding_dim());
  for (std::size_t l = 0; l < num_layers; ++l) {
    const Vec& h = steps[w - 1][l].h;
    z.insert(z.end(), h.begin(), h.end());
  }
}

void forward_decoder(const Seq2SeqModel& model, const Vec& z, bool training,
                     Rng* rng, LayerSteps& steps, Matrix& recon) {
  const std::size_t w = model.window_len;
  const std::size_t num_layers = model.decoder.size();
  const std::size_t cdim = model.embedding_dim();
  const bool drop = training && model.dropout > 0.0;
  if (z.size() != cdim)
    fail(ErrorKind::invalid_argument, "decode: embedding dimension mismatch");

  // Decoder initial states are the embedding split back per layer.
  std::vector<Vec> init(num_layers);
  std::size_t offset = 0;
  for (std::size_t l = 0; l < num_layers; ++l) {
    init[l].assign(z.begin() + offset, z.begin() + offset + model.decoder[l].hidden);
    offset += model.decoder[l].hidden;
  }

  steps.assign(w, std::vector<StepCache>(num_layers));
  recon = Matrix(w, model.target_dim);
  Vec hb(cdim + 1);
  Vec out_row;
  for (std::size_t s = 0; s < w; ++s) {
    Vec below(model.input_dim(), 0.0);  // no feedback: zero input each step
    for (std::size_t l = 0; l < num_layers; ++l) {
      const GruLayerParams& layer = model.decoder[l];
      const Vec& h_prev = s > 0 ? steps[s - 1][l].h : init[l];
      Vec mask;
      if (drop) mask = draw_dropout_mask(layer.input_dim, model.dropout, *rng);
      step_forward(layer, below, h_prev, std::move(mask), steps[s][l]);
      below = steps[s][l].h;
    }

    std::size_t pos = 0;
    for (std::size_t l = 0; l < num_layers; ++l)
      for (double h : steps[s][l].h) hb[pos++] = h;
    hb[cdim] = 1.0;
    matvec(model.output_map, hb, out_row);
    const std::size_t row = model.reverse_decode ? w - 1 - s : s;
    std::copy(out_row.begin(), out_row.end(), recon.row(row));
  }
}

// dL/d(recon) for the masked loss; masked positions contribute exactly 0.
// Returns the loss value.
double loss_and_recon_grad(const Matrix& recon, const AugmentedWindow& window,
                           bool squared, Matrix* drecon) {
  const std::size_t w = recon.rows;
  const std::size_t k = recon.cols;
  if (drecon) *drecon = Matrix(w, k, 0.0);
  double total = 0.0;
  for (std::size_t t = 0; t < w; ++t) {
    double step_sq = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      if (window.mask(t, j) == 0.0) continue;
      const double e = window.values(t, j) - recon(t, j);
      step_sq += e * e;
    }
    if (squared) {
      total += step_sq;
      if (drecon)
        for (std::size_t j = 0; j < k; ++j) {
          if (window.mask(t, j) == 0.0) continue;
          (*drecon)(t, j) = -2.0 * (window.values(t, j) - recon(t, j));
        }
    } else {
      const double norm = std::sqrt(step_sq);
      total += norm;
      if (drecon && norm > 0.0)
        for (std::size_t j = 0; j < k; ++j) {
          if (window.mask(t, j) == 0.0) continue;
          (*drecon)(t, j) = -(window.values(t, j) - recon(t, j)) / norm;
        }
    }
  }
  return total;
}

void forward_window(const Seq2SeqModel& model, const AugmentedWindow& window,
                    bool training, Rng* rng, Cache& cache) {
  check_window(model, window);
  forward_encoder(model, window, training, rng, cache.enc, cache.z);
  forward_decoder(model, cache.z, training, rng, cache.dec, cache.recon);
}

void backward_window(const Seq2SeqModel& model, const Cache& cache,
                     const Matrix& drecon, Gradients& grads) {
  const std::size_t w = model.window_len;
  const std::size_t num_layers = model.encoder.size();
  const std::size_t cdim = model.embedding_dim();

  std::vector<Vec> init(num_layers);
  std::size_t offset = 0;
  for (std::size_t l = 0; l < num_layers; ++l) {
    init[l].assign(cache.z.begin() + offset,
                   cache.z.begin() + offset + model.decoder[l].hidden);
    offset += model.decoder[l].hidden;
  }

  Vec dz(cdim, 0.0);
  std::vector<Vec> carry(num_layers);  // dL/dh flowing back through time
  for (std::size_t l = 0; l < num_layers; ++l)
    carry[l].assign(model.decoder[l].hidden, 0.0);

  Vec hb(cdim + 1);
  Vec dout;
  Vec dh_prev, d_in;
  for (std::size_t s = w; s-- > 0;) {
    const std::size_t row = model.reverse_decode ? w - 1 - s : s;
    dout.assign(drecon.row(row), drecon.row(row) + drecon.cols);

    std::size_t pos = 0;
    for (std::size_t l = 0; l < num_layers; ++l)
      for (double h : cache.dec[s][l].h) hb[pos++] = h;
    hb[cdim] = 1.0;
    outer_add(grads.output_map, dout, hb);

    Vec dfull(cdim + 1, 0.0);
    matvec_transpose_add(model.output_map, dout, dfull);

    std::vector<Vec> dh(num_layers);
    std::size_t at = 0;
    for (std::size_t l = 0; l < num_layers; ++l) {
      const std::size_t c = model.decoder[l].hidden;
      dh[l] = carry[l];
      for (std::size_t i = 0; i < c; ++i) dh[l][i] += dfull[at + i];
      at += c;
    }

    for (std::size_t l = num_layers; l-- > 0;) {
      const Vec& h_prev = s > 0 ? cache.dec[s - 1][l].h : init[l];
      step_backward(model.decoder[l], cache.dec[s][l], h_prev, dh[l],
                    grads.decoder[l], dh_prev, d_in);
      carry[l] = dh_prev;
      if (l > 0)
        for (std::size_t i = 0; i < d_in.size(); ++i) dh[l - 1][i] += d_in[i];
    }
  }
  // At step 0 the "previous" state is the embedding itself.
  offset = 0;
  for (std::size_t l = 0; l < num_layers; ++l) {
    for (std::size_t i = 0; i < carry[l].size(); ++i) dz[offset + i] += carry[l][i];
    offset += carry[l].size();
  }

  // Encoder: gradient enters only through the final hidden states.
  offset = 0;
  for (std::size_t l = 0; l < num_layers; ++l) {
    carry[l].assign(dz.begin() + offset, dz.begin() + offset + model.encoder[l].hidden);
    offset += model.encoder[l].hidden;
  }
  Vec h0;
  for (std::size_t t = w; t-- > 0;) {
    std::vector<Vec> dh(num_layers);
    for (std::size_t l = 0; l < num_layers; ++l) dh[l] = carry[l];
    for (std::size_t l = num_layers; l-- > 0;) {
      const GruLayerParams& layer = model.encoder[l];
      if (t == 0) h0.assign(layer.hidden, 0.0);
      const Vec& h_prev = t > 0 ? cache.enc[t - 1][l].h : h0;
      step_backward(layer, cache.enc[t][l], h_prev, dh[l], grads.encoder[l],
                    dh_prev, d_in);
      carry[l] = dh_prev;
      if (l > 0)
        for (std::size_t i = 0; i < d_in.size(); ++i) dh[l - 1][i] += d_in[i];
    }
  }
}

void scale_gradients(Gradients& grads, double factor) {
  for (Matrix* m : parameter_matrices(grads))
    for (double& x : m->data) x *= factor;
}

double gradient_norm(const Gradients& grads) {
  double acc = 0.0;
  for (const Matrix* m : parameter_matrices(grads)) acc += squared_norm(m->data);
  return std::sqrt(acc);
}

// --- extended-precision loss, used only for finite differences -----------
// Central differences cancel the leading ~11 digits of the two loss values
// near small-gradient parameters, so double-precision evaluation leaves the
// difference dominated by rounding noise. These replicas evaluate the same
// inference forward pass and masked loss in long double; parameters and
// window contents convert exactly, so only the arithmetic precision differs.

using LVec = std::vector<long double>;

long double ext_sigmoid(long double x) { return 1.0L / (1.0L + std::exp(-x)); }

void ext_matvec(const Matrix& m, const LVec& v, LVec& out) {
  out.assign(m.rows, 0.0L);
  for (std::size_t r = 0; r < m.rows; ++r) {
    const double* row = m.row(r);
    long double acc = 0.0L;
    for (std::size_t c = 0; c < m.cols; ++c)
      acc += static_cast<long double>(row[c]) * v[c];
    out[r] = acc;
  }
}

// Mirrors step_forward without the cache or dropout (inference path).
void ext_gru_step(const GruLayerParams& layer, const LVec& below,
                  const LVec& h_prev, LVec& h_out) {
  const std::size_t k = layer.input_dim;
  const std::size_t c = layer.hidden;
  LVec v(k + c + 1);
  std::copy(below.begin(), below.end(), v.begin());
  std::copy(h_prev.begin(), h_prev.end(), v.begin() + k);
  v[k + c] = 1.0L;

  LVec r, u, zt;
  ext_matvec(layer.w_reset, v, r);
  ext_matvec(layer.w_update, v, u);
  for (long double& x : r) x = ext_sigmoid(x);
  for (long double& x : u) x = ext_sigmoid(x);

  LVec g = v;
  for (std::size_t i = 0; i < c; ++i) g[k + i] = r[i] * h_prev[i];
  ext_matvec(layer.w_propose, g, zt);
  for (long double& x : zt) x = std::tanh(x);

  h_out.resize(c);
  for (std::size_t i = 0; i < c; ++i)
    h_out[i] = (1.0L - u[i]) * h_prev[i] + u[i] * zt[i];
}

long double ext_window_loss(const Seq2SeqModel& model,
                            const AugmentedWindow& window, bool squared) {
  check_window(model, window);
  const std::size_t w = model.window_len;
  const std::size_t k = model.target_dim;

  // Encoder; h[l] holds layer l's state from the previous step.
  std::vector<LVec> h(model.encoder.size());
  for (std::size_t l = 0; l < h.size(); ++l)
    h[l].assign(model.encoder[l].hidden, 0.0L);
  LVec below, next;
  for (std::size_t t = 0; t < w; ++t) {
    const Vec row = input_row(model, window, t);
    below.assign(row.begin(), row.end());
    for (std::size_t l = 0; l < h.size(); ++l) {
      ext_gru_step(model.encoder[l], below, h[l], next);
      h[l] = next;
      below = h[l];
    }
  }
  LVec z;
  z.reserve(model.embedding_dim());
  for (const LVec& hl : h) z.insert(z.end(), hl.begin(), hl.end());

  // Decoder: initial states are the embedding split per layer, zero input.
  const std::size_t cdim = z.size();
  std::vector<LVec> d(model.decoder.size());
  std::size_t offset = 0;
  for (std::size_t l = 0; l < d.size(); ++l) {
    d[l].assign(z.begin() + offset,
                z.begin() + offset + model.decoder[l].hidden);
    offset += model.decoder[l].hidden;
  }
  std::vector<LVec> recon(w);  // indexed by window row
  LVec hb(cdim + 1), out_row;
  for (std::size_t s = 0; s < w; ++s) {
    below.assign(model.input_dim(), 0.0L);
    for (std::size_t l = 0; l < d.size(); ++l) {
      ext_gru_step(model.decoder[l], below, d[l], next);
      d[l] = next;
      below = d[l];
    }
    std::size_t pos = 0;
    for (const LVec& dl : d)
      for (long double x : dl) hb[pos++] = x;
    hb[cdim] = 1.0L;
    ext_matvec(model.output_map, hb, out_row);
    recon[model.reverse_decode ? w - 1 - s : s] = out_row;
  }

  // Masked loss by selection, matching loss_and_recon_grad.
  long double total = 0.0L;
  for (std::size_t t = 0; t < w; ++t) {
    long double step_sq = 0.0L;
    for (std::size_t j = 0; j < k; ++j) {
      if (window.mask(t, j) == 0.0) continue;
      const long double e =
          static_cast<long double>(window.values(t, j)) - recon[t][j];
      step_sq += e * e;
    }
    total += squared ? step_sq : std::sqrt(step_sq);
  }
  return total;
}

}  // namespace

std::size_t Seq2SeqModel::embedding_dim() const {
  std::size_t c = 0;
  for (const GruLayerParams& l : encoder) c += l.hidden;
  return c;
}

std::vector<std::size_t> Seq2SeqModel::layer_sizes() const {
  std::vector<std::size_t> sizes;
  for (const GruLayerParams& l : encoder) sizes.push_back(l.hidden);
  return sizes;
}

Vec gru_step(const GruLayerParams& layer, const Vec& input_below,
             const Vec& h_prev, const Vec& dropout_mask) {
  if (input_below.size() != layer.input_dim)
    fail(ErrorKind::invalid_argument, "gru_step: input dimension mismatch");
  if (h_prev.size() != layer.hidden)
    fail(ErrorKind::invalid_argument, "gru_step: state dimension mismatch");
  if (!dropout_mask.empty() && dropout_mask.size() != layer.input_dim)
    fail(ErrorKind::invalid_argument, "gru_step: dropout mask dimension mismatch");
  StepCache cache;
  step_forward(layer, input_below, h_prev, dropout_mask, cache);
  return cache.h;
}

Seq2SeqModel init_model(std::size_t window_len, std::size_t target_dim,
                        bool mask_delta_inputs,
                        const std::vector<std::size_t>& layers, double dropout,
                        bool reverse_decode, std::uint64_t seed) {
  if (window_len == 0) fail(ErrorKind::invalid_argument, "init_model: w == 0");
  if (target_dim == 0) fail(ErrorKind::invalid_argument, "init_model: k == 0");
  if (layers.empty()) fail(ErrorKind::invalid_argument, "init_model: no layers");
  for (std::size_t c : layers)
    if (c == 0) fail(ErrorKind::invalid_argument, "init_model: zero-width layer");
  if (!(dropout >= 0.0 && dropout < 1.0))
    fail(ErrorKind::invalid_argument, "init_model: dropout outside [0, 1)");

  Seq2SeqModel model;
  model.window_len = window_len;
  model.target_dim = target_dim;
  model.mask_delta_inputs = mask_delta_inputs;
  model.dropout = dropout;
  model.reverse_decode = reverse_decode;

  auto make_layer = [&](std::size_t in_dim, std::size_t hidden) {
    GruLayerParams l;
    l.input_dim = in_dim;
    l.hidden = hidden;
    const std::size_t cols = in_dim + hidden + 1;
    l.w_reset = Matrix(hidden, cols);
    l.w_update = Matrix(hidden, cols);
    l.w_propose = Matrix(hidden, cols);
    return l;
  };

  std::size_t below = model.input_dim();
  for (std::size_t c : layers) {
    model.encoder.push_back(make_layer(below, c));
    below = c;
  }
  below = model.input_dim();
  for (std::size_t c : layers) {
    model.decoder.push_back(make_layer(below, c));
    below = c;
  }
  model.output_map = Matrix(target_dim, model.embedding_dim() + 1);

  Rng rng(seed);
  for (Matrix* m : parameter_matrices(model)) {
    const double bound = 1.0 / std::sqrt(double(m->cols));
    for (double& x : m->data) x = rng.uniform(-bound, bound);
  }
  return model;
}

Embedding encode(const Seq2SeqModel& model, const AugmentedWindow& window) {
  check_window(model, window);
  LayerSteps steps;
  Embedding emb;
  forward_encoder(model, window, false, nullptr, steps, emb.values);
  emb.end_index = window.end_index;
  return emb;
}

Matrix decode(const Seq2SeqModel& model, const Vec& embedding) {
  LayerSteps steps;
  Matrix recon;
  forward_decoder(model, embedding, false, nullptr, steps, recon);
  return recon;
}

ReconError reconstruction_error(const Seq2SeqModel& model,
                                const AugmentedWindow& window) {
  Cache cache;
  forward_window(model, window, false, nullptr, cache);
  ReconError err;
  err.per_step = Matrix(model.window_len, model.target_dim);
  for (std::size_t t = 0; t < model.window_len; ++t)
    for (std::size_t j = 0; j < model.target_dim; ++j)
      err.per_step(t, j) = window.values(t, j) - cache.recon(t, j);
  err.total = loss_and_recon_grad(cache.recon, window, true, nullptr);
  return err;
}

double window_loss(const Seq2SeqModel& model, const AugmentedWindow& window,
                   bool squared) {
  Cache cache;
  forward_window(model, window, false, nullptr, cache);
  return loss_and_recon_grad(cache.recon, window, squared, nullptr);
}

Gradients make_gradients(const Seq2SeqModel& model) {
  Gradients g;
  auto zero_layer = [](const GruLayerParams& l) {
    GruLayerParams z;
    z.input_dim = l.input_dim;
    z.hidden = l.hidden;
    z.w_reset = Matrix(l.w_reset.rows, l.w_reset.cols);
    z.w_update = Matrix(l.w_update.rows, l.w_update.cols);
    z.w_propose = Matrix(l.w_propose.rows, l.w_propose.cols);
    return z;
  };
  for (const GruLayerParams& l : model.encoder) g.encoder.push_back(zero_layer(l));
  for (const GruLayerParams& l : model.decoder) g.decoder.push_back(zero_layer(l));
  g.output_map = Matrix(model.output_map.rows, model.output_map.cols);
  return g;
}

double compute_gradients(const Seq2SeqModel& model,
                         const std::vector<AugmentedWindow>& windows,
                         bool squared, Gradients& grads) {
  double total = 0.0;
  Cache cache;
  Matrix drecon;
  for (const AugmentedWindow& window : windows) {
    forward_window(model, window, false, nullptr, cache);
    total += loss_and_recon_grad(cache.recon, window, squared, &drecon);
    backward_window(model, cache, drecon, grads);
  }
  return total;
}

Gradients numeric_gradients(const Seq2SeqModel& model,
                            const AugmentedWindow& window, double eps,
                            bool squared) {
  if (!(eps > 0.0)) fail(ErrorKind::invalid_argument, "numeric_gradients: eps <= 0");
  Seq2SeqModel probe = model;
  Gradients grads = make_gradients(model);
  std::vector<Matrix*> pmats = parameter_matrices(probe);
  std::vector<Matrix*> gmats = parameter_matrices(grads);
  for (std::size_t m = 0; m < pmats.size(); ++m) {
    for (std::size_t i = 0; i < pmats[m]->data.size(); ++i) {
      const double saved = pmats[m]->data[i];
      pmats[m]->data[i] = saved + eps;
      const long double up = ext_window_loss(probe, window, squared);
      pmats[m]->data[i] = saved - eps;
      const long double down = ext_window_loss(probe, window, squared);
      pmats[m]->data[i] = saved;
      gmats[m]->data[i] = static_cast<double>(
          (up - down) / (2.0L * static_cast<long double>(eps)));
    }
  }
  return grads;
}

double max_rel_error(const Gradients& a, const Gradients& b) {
  std::vector<const Matrix*> ma = parameter_matrices(a);
  std::vector<const Matrix*> mb = parameter_matrices(b);
  if (ma.size() != mb.size())
    fail(ErrorKind::invalid_argument, "max_rel_error: shape mismatch");
  double worst = 0.0;
  for (std::size_t m = 0; m < ma.size(); ++m) {
    if (!ma[m]->same_shape(*mb[m]))
      fail(ErrorKind::invalid_argument, "max_rel_error: shape mismatch");
    for (std::size_t i = 0; i < ma[m]->data.size(); ++i) {
      const double ga = ma[m]->data[i];
      const double gn = mb[m]->data[i];
      const double denom = std::max({std::abs(ga), std::abs(gn), 1e-8});
      worst = std::max(worst, std::abs(ga - gn) / denom);
    }
  }
  return worst;
}

double grad_check(const Seq2SeqModel& model, const AugmentedWindow& window,
                  double eps) {
  Gradients analytic = make_gradients(model);
  compute_gradients(model, {window}, true, analytic);
  const Gradients numeric = numeric_gradients(model, window, eps, true);
  return max_rel_error(analytic, numeric);
}

std::vector<double> train(Seq2SeqModel& model,
                          const std::vector<AugmentedWindow>& windows,
                          const TrainConfig& config) {
  if (windows.empty()) fail(ErrorKind::invalid_argument, "train: no windows");
  if (!(config.learning_rate > 0.0))
    fail(ErrorKind::invalid_argument, "train: learning rate <= 0");
  if (config.batch_size == 0) fail(ErrorKind::invalid_argument, "train: batch 0");
  for (const AugmentedWindow& w : windows) check_window(model, w);

  Rng rng(config.seed);
  Gradients grads = make_gradients(model);
  Gradients adam_m = make_gradients(model);
  Gradients adam_v = make_gradients(model);
  std::size_t adam_t = 0;

  std::vector<std::size_t> order(windows.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  std::vector<double> history;
  history.reserve(config.epochs);
  Cache cache;
  Matrix drecon;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[rng.below(i)]);

    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size();
         start += config.batch_size) {
      const std::size_t stop = std::min(order.size(), start + config.batch_size);
      for (Matrix* m : parameter_matrices(grads)) m->set_zero();

      for (std::size_t b = start; b < stop; ++b) {
        const AugmentedWindow& window = windows[order[b]];
        forward_window(model, window, true, &rng, cache);
        epoch_loss +=
            loss_and_recon_grad(cache.recon, window, config.squared_loss, &drecon);
        backward_window(model, cache, drecon, grads);
      }
      scale_gradients(grads, 1.0 / double(stop - start));

      if (config.grad_clip > 0.0) {
        const double norm = gradient_norm(grads);
        if (norm > config.grad_clip)
          scale_gradients(grads, config.grad_clip / norm);
      }

      std::vector<Matrix*> pmats = parameter_matrices(model);
      std::vector<Matrix*> gmats = parameter_matrices(grads);
      if (config.optimizer == TrainConfig::Optimizer::sgd) {
        for (std::size_t m = 0; m < pmats.size(); ++m)
          for (std::size_t i = 0; i < pmats[m]->data.size(); ++i)
            pmats[m]->data[i] -= config.learning_rate * gmats[m]->data[i];
      } else {
        ++adam_t;
        std::vector<Matrix*> mm = parameter_matrices(adam_m);
        std::vector<Matrix*> vv = parameter_matrices(adam_v);
        const double bc1 = 1.0 - std::pow(config.adam_beta1, double(adam_t));
        const double bc2 = 1.0 - std::pow(config.adam_beta2, double(adam_t));
        for (std::size_t m = 0; m < pmats.size(); ++m)
          for (std::size_t i = 0; i < pmats[m]->data.size(); ++i) {
            const double g = gmats[m]->data[i];
            double& m1 = mm[m]->data[i];
            double& v1 = vv[m]->data[i];
            m1 = config.adam_beta1 * m1 + (1.0 - config.adam_beta1) * g;
            v1 = config.adam_beta2 * v1 + (1.0 - config.adam_beta2) * g * g;
            pmats[m]->data[i] -= config.learning_rate * (m1 / bc1) /
                                 (std::sqrt(v1 / bc2) + config.adam_eps);
          }
      }
    }

    const double mean_loss = epoch_loss / double(windows.size());
    bool finite = std::isfinite(mean_loss);
    if (finite)
      for (Matrix* m : parameter_matrices(model))
        if (!all_finite(*m)) {
          finite = false;
          break;
        }
    if (!finite)
      fail(ErrorKind::training_diverged,
           "train: non-finite loss or parameters at epoch " +
               std::to_string(epoch + 1));
    history.push_back(mean_loss);
  }
  return history;
}

}  // namespace embedrul
