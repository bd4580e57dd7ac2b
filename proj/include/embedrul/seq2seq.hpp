#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "embedrul/dataio.hpp"
#include "embedrul/matrix.hpp"
#include "embedrul/rng.hpp"

namespace embedrul {

/// One GRU layer. Each weight matrix maps the concatenation
/// [input_below, h_prev, 1] (the trailing 1 folds the bias in) to the
/// hidden dimension:
///   r = sigmoid(w_reset  · [x, h_prev, 1])
///   u = sigmoid(w_update · [x, h_prev, 1])
///   z = tanh   (w_propose· [x, r ⊙ h_prev, 1])
///   h = (1 − u) ⊙ h_prev + u ⊙ z
struct GruLayerParams {
  std::size_t input_dim = 0;
  std::size_t hidden = 0;
  Matrix w_reset;    // hidden × (input_dim + hidden + 1)
  Matrix w_update;   // hidden × (input_dim + hidden + 1)
  Matrix w_propose;  // hidden × (input_dim + hidden + 1)
};

/// Runs one GRU step. dropout_mask scales the non-recurrent input only
/// (entries 0 or 1/(1−d)); pass an empty vector for the identity. The
/// recurrent path h_prev is never dropped.
Vec gru_step(const GruLayerParams& layer, const Vec& input_below,
             const Vec& h_prev, const Vec& dropout_mask);

/// Subsequence embedding: the concatenated final encoder hidden states.
struct Embedding {
  Vec values;
  std::size_t end_index = 0;  // 1-based time index of the window's last row
  std::string instance_id;
};

/// GRU encoder-decoder over fixed-length windows. The encoder consumes the
/// window (values filled from the mask, plus mask and delta channels when
/// mask_delta_inputs is set) and its final hidden states, concatenated
/// across layers, form the embedding. The decoder mirrors the layer
/// structure, starts from the embedding split back per layer, and steps
/// window_len times on all-zero inputs; a linear map from the concatenated
/// decoder state reconstructs the target values, last row first when
/// reverse_decode is set.
struct Seq2SeqModel {
  std::size_t window_len = 0;      // w
  std::size_t target_dim = 0;      // reconstructed sensor count k
  bool mask_delta_inputs = false;  // encoder input = [values, mask, delta]
  double dropout = 0.0;            // non-recurrent dropout rate d in [0, 1)
  bool reverse_decode = true;
  std::vector<GruLayerParams> encoder;
  std::vector<GruLayerParams> decoder;
  Matrix output_map;  // target_dim × (embedding_dim + 1), bias folded in

  std::size_t input_dim() const { return target_dim * (mask_delta_inputs ? 3 : 1); }
  std::size_t embedding_dim() const;
  std::vector<std::size_t> layer_sizes() const;
};

/// Builds a model with weights drawn uniformly from ±1/sqrt(fan_in),
/// where fan_in is each matrix's column count. Deterministic in seed.
Seq2SeqModel init_model(std::size_t window_len, std::size_t target_dim,
                        bool mask_delta_inputs,
                        const std::vector<std::size_t>& layers, double dropout,
                        bool reverse_decode, std::uint64_t seed);

/// Encodes one window (inference path: no dropout).
Embedding encode(const Seq2SeqModel& model, const AugmentedWindow& window);

/// Decodes an embedding to a window_len × target_dim reconstruction in
/// window time order (the reverse_decode reordering already applied).
Matrix decode(const Seq2SeqModel& model, const Vec& embedding);

/// Per-step reconstruction errors e_t' = x_t' − x'_t' (raw differences,
/// w × k) and the masked scalar total Σ_t' ‖e_t' ⊙ m_t'‖².
struct ReconError {
  Matrix per_step;
  double total = 0.0;
};
ReconError reconstruction_error(const Seq2SeqModel& model,
                                const AugmentedWindow& window);

/// Masked reconstruction loss of one window. Squared form (default) sums
/// ‖e ⊙ m‖² per step; the literal form sums the unsquared norms ‖e ⊙ m‖.
double window_loss(const Seq2SeqModel& model, const AugmentedWindow& window,
                   bool squared);

/// Gradient accumulator shaped like the model's parameters.
struct Gradients {
  std::vector<GruLayerParams> encoder;
  std::vector<GruLayerParams> decoder;
  Matrix output_map;
};
Gradients make_gradients(const Seq2SeqModel& model);

/// Fixed traversal order over a parameter set's matrices (encoder layers'
/// reset/update/propose, then decoder's, then the output map). Works for
/// both Seq2SeqModel and Gradients.
template <typename ParamSet>
std::vector<decltype(&std::declval<ParamSet&>().output_map)> parameter_matrices(
    ParamSet& set) {
  std::vector<decltype(&set.output_map)> mats;
  for (auto& layer : set.encoder) {
    mats.push_back(&layer.w_reset);
    mats.push_back(&layer.w_update);
    mats.push_back(&layer.w_propose);
  }
  for (auto& layer : set.decoder) {
    mats.push_back(&layer.w_reset);
    mats.push_back(&layer.w_update);
    mats.push_back(&layer.w_propose);
  }
  mats.push_back(&set.output_map);
  return mats;
}

/// Analytic gradients of the summed loss over `windows` (inference path,
/// no dropout). Returns the loss; accumulates into `grads`.
double compute_gradients(const Seq2SeqModel& model,
                         const std::vector<AugmentedWindow>& windows,
                         bool squared, Gradients& grads);

/// Central-difference gradients of one window's loss. The two loss
/// evaluations run in extended precision so the difference stays meaningful
/// at small eps even for near-zero gradient entries.
Gradients numeric_gradients(const Seq2SeqModel& model,
                            const AugmentedWindow& window, double eps,
                            bool squared);

/// Worst relative disagreement max |ga − gn| / max(|ga|, |gn|, 1e-8)
/// between analytic and central-difference gradients on one window.
double grad_check(const Seq2SeqModel& model, const AugmentedWindow& window,
                  double eps);

double max_rel_error(const Gradients& a, const Gradients& b);

struct TrainConfig {
  enum class Optimizer { adam, sgd };
  Optimizer optimizer = Optimizer::adam;
  double learning_rate = 1e-3;
  std::size_t epochs = 50;
  std::size_t batch_size = 32;
  double grad_clip = 10.0;  // global L2 norm ceiling; <= 0 disables
  std::uint64_t seed = 42;
  bool squared_loss = true;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
};

/// Mini-batch training: per epoch, shuffles the window order (seeded),
/// averages window gradients per batch (dropout active), clips the global
/// gradient norm, and applies the optimizer. Returns the mean window loss
/// per epoch, evaluated with the parameters current when each batch was
/// visited. Throws training_diverged (with the epoch) on non-finite loss
/// or parameters. Deterministic in (model, windows, config).
std::vector<double> train(Seq2SeqModel& model,
                          const std::vector<AugmentedWindow>& windows,
                          const TrainConfig& config);

}  // namespace embedrul
