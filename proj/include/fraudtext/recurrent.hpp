// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "fraudtext/layers.hpp"

namespace fraudtext {

enum class CellKind { rnn, lstm, gru };

/// Number of gate blocks: rnn 1, lstm 4, gru 3.
Index gate_count(CellKind kind);
const char* cell_name(CellKind kind);

/**
 * Weights of one recurrent cell, gate blocks stored side by side:
 *
 *   rnn   [candidate]
 *   lstm  [input, forget, output, candidate]
 *   gru   [update, reset, candidate]
 *
 * input_weights is input_dim x (gates * hidden), recurrent_weights is
 * hidden x (gates * hidden) and bias is 1 x (gates * hidden). Block g of each
 * matrix is W_x^g, W_h^g and b^g of the usual per-gate formulation.
 */
struct CellParams {
  CellKind kind = CellKind::rnn;
  Matrix input_weights;
  Matrix recurrent_weights;
  Matrix bias;

  Index hidden() const { return recurrent_weights.rows(); }
  Index input_dim() const { return input_weights.rows(); }

  /// Throws ShapeError unless all three matrices agree with kind and hidden().
  void validate() const;

  /// Glorot-uniform weights, zero bias.
  static CellParams glorot(CellKind kind, Index input_dim, Index hidden, SeededRng& rng);
  static CellParams zeros(CellKind kind, Index input_dim, Index hidden);
};

struct CellGrads {
  Matrix input_weights;
  Matrix recurrent_weights;
  Matrix bias;
};

// Single steps: x_t is batch x input_dim, states are batch x hidden.

/// h_t = tanh(x_t W_x + h_prev W_h + b)
Matrix rnn_cell_step(const Matrix& x, const Matrix& h_prev, const CellParams& p);

struct LstmState {
  Matrix h;
  Matrix c;
};

/// c_t = f * c_prev + i * c~,  h_t = o * tanh(c_t)
LstmState lstm_cell_step(const Matrix& x, const Matrix& h_prev, const Matrix& c_prev,
                         const CellParams& p);

/// h~ = tanh(x W_x^h + (r * h_prev) W_h^h + b^h),  h_t = (1 - z) * h_prev + z * h~
Matrix gru_cell_step(const Matrix& x, const Matrix& h_prev, const CellParams& p);

/// Everything one directional pass keeps for backpropagation through time.
/// All matrices are stacked time-major and indexed by true time t.
struct DirectionCache {
  bool reverse = false;
  Index batch = 0;
  Index steps = 0;
  Matrix gates;      // post-activation gate values, gates * hidden wide
  Matrix hidden;     // h_t
  Matrix cell;       // lstm: c_t; gru: r * h_prev
  Matrix cell_tanh;  // lstm: tanh(c_t)
};

struct RecurrentForward {
  SequenceBatch hidden;  // h_t for every t
  SequenceBatch input;
  DirectionCache cache;
};

struct RecurrentGrads {
  CellGrads params;
  SequenceBatch input;
};

/// Runs the cell from a zero state over t = 0..T-1, or T-1..0 when reverse.
RecurrentForward run_recurrent(const SequenceBatch& x, const CellParams& p, bool reverse);

/// Full (untruncated) BPTT; grad_hidden holds dLoss/dh_t for every t.
RecurrentGrads backprop_recurrent(const RecurrentForward& fwd, const CellParams& p,
                                  const SequenceBatch& grad_hidden);

// ------------------------------------------------------------ bidirectional

enum class SequenceMode { final_state, full_sequence };

struct BidirectionalParams {
  CellParams forward;
  CellParams backward;

  Index hidden() const { return forward.hidden(); }
  Index input_dim() const { return forward.input_dim(); }
  void validate() const;
};

struct BidirectionalCache {
  SequenceMode mode = SequenceMode::final_state;
  bool from_tokens = false;
  SequenceBatch input;                     // sequence input
  std::vector<std::int32_t> unique_tokens;  // token input: sorted distinct ids
  std::vector<std::int32_t> compact;        // token input: per stacked row, index into unique_tokens
  Matrix unique_embeddings;                // token input: table rows of unique_tokens
  DirectionCache forward;
  DirectionCache backward;
};

/**
 * Output of a bidirectional pass. final_state mode fills `final_state`
 * (batch x 2*hidden: forward h at t = T-1 next to the backward cell's state
 * after it has consumed t = 0); full_sequence mode fills `sequence`
 * ([forward h_t | backward h_t] for every t).
 */
struct BidirectionalForward {
  Matrix final_state;
  SequenceBatch sequence;
  BidirectionalCache cache;
};

struct BidirectionalGrads {
  CellGrads forward;
  CellGrads backward;
  SequenceBatch input;                   // sequence input only
  std::vector<std::int32_t> table_rows;  // token input only
  Matrix table_row_grads;                // token input only, one row per table_rows entry
};

BidirectionalForward run_bidirectional(const SequenceBatch& x, const BidirectionalParams& p,
                                       SequenceMode mode);

/// Same result as embedding the tokens and calling run_bidirectional, but the
/// input projection is computed once per distinct token in the batch.
BidirectionalForward run_bidirectional_tokens(const TokenMatrix& tokens, const Matrix& table,
                                              const BidirectionalParams& p, SequenceMode mode);

/// grad_out is batch x 2*hidden in final_state mode and the stacked
/// (T*batch) x 2*hidden sequence gradient in full_sequence mode.
BidirectionalGrads backprop_bidirectional(const BidirectionalCache& cache,
                                          const BidirectionalParams& p, const Matrix& grad_out);

}  // namespace fraudtext
