// SPDX-License-Identifier: Apache-2.0
#include "fraudtext/recurrent.hpp"

#include <algorithm>
#include <string>

namespace fraudtext {

Index gate_count(CellKind kind) {
  switch (kind) {
    case CellKind::rnn:
      return 1;
    case CellKind::lstm:
      return 4;
    case CellKind::gru:
      return 3;
  }
  return 0;
}

const char* cell_name(CellKind kind) {
  switch (kind) {
    case CellKind::rnn:
      return "rnn";
    case CellKind::lstm:
      return "lstm";
    case CellKind::gru:
      return "gru";
  }
  return "?";
}

void CellParams::validate() const {
  const Index h = hidden();
  const Index width = gate_count(kind) * h;
  if (h < 1 || recurrent_weights.cols() != width || input_weights.cols() != width ||
      input_weights.rows() < 1 || bias.rows() != 1 || bias.cols() != width) {
    throw ShapeError(std::string(cell_name(kind)) + " cell: inconsistent shapes W_x " +
                     shape_string(input_weights) + ", W_h " + shape_string(recurrent_weights) +
                     ", b " + shape_string(bias));
  }
}

CellParams CellParams::glorot(CellKind kind, Index input_dim, Index hidden, SeededRng& rng) {
  const Index width = gate_count(kind) * hidden;
  CellParams p;
  p.kind = kind;
  p.input_weights = glorot_uniform(rng, input_dim, width);
  p.recurrent_weights = glorot_uniform(rng, hidden, width);
  p.bias = Matrix::Zero(1, width);
  return p;
}

CellParams CellParams::zeros(CellKind kind, Index input_dim, Index hidden) {
  const Index width = gate_count(kind) * hidden;
  return {kind, Matrix::Zero(input_dim, width), Matrix::Zero(hidden, width),
          Matrix::Zero(1, width)};
}

namespace {

using Block = Eigen::Ref<Matrix>;
using ConstBlock = Eigen::Ref<const Matrix>;

Index previous_time(Index t, bool reverse) { return reverse ? t + 1 : t - 1; }
Index time_at(Index s, Index steps, bool reverse) { return reverse ? steps - 1 - s : s; }

void check_kind(const CellParams& p, CellKind expected) {
  if (p.kind != expected) {
    throw ShapeError(std::string("expected ") + cell_name(expected) + " parameters, got " +
                     cell_name(p.kind));
  }
  p.validate();
}

/**
 * Input projection x_t W_x + b of one direction, either stacked for every
 * (t, b) row or as one row per distinct token plus a row index per position.
 */
struct Projection {
  Matrix rows;                               // stacked, or one row per distinct token
  const std::vector<std::int32_t>* compact = nullptr;

  /// Fills dst with the first dst.rows() rows of step t.
  void fill(Index t, Index batch, Block dst) const {
    if (compact == nullptr) {
      dst = rows.middleRows(t * batch, dst.rows());
      return;
    }
    const std::int32_t* idx = compact->data() + t * batch;
    for (Index b = 0; b < dst.rows(); ++b) dst.row(b) = rows.row(idx[b]);
  }
};

/**
 * Forward pass of one direction. Gate pre-activations are assembled in the
 * cache itself (projection, then the recurrent product accumulated on top)
 * and activated in place.
 */
DirectionCache forward_direction(const Projection& projection, const CellParams& p, Index batch,
                                 Index steps, bool reverse) {
  const Index h = p.hidden();
  const Index width = gate_count(p.kind) * h;
  DirectionCache c;
  c.reverse = reverse;
  c.batch = batch;
  c.steps = steps;
  c.gates.resize(steps * batch, width);
  c.hidden.resize(steps * batch, h);
  if (p.kind != CellKind::rnn) c.cell.resize(steps * batch, h);
  if (p.kind == CellKind::lstm) c.cell_tanh.resize(steps * batch, h);

  // While every row has the same state and reads the same token (the zero
  // state over trailing padding) the rows stay identical, so one row is
  // computed and copied. Per-row results do not depend on the row count.
  bool uniform = projection.compact != nullptr;
  for (Index s = 0; s < steps; ++s) {
    const Index t = time_at(s, steps, reverse);
    const bool first = s == 0;
    const Index prev = previous_time(t, reverse);
    if (uniform) {
      const std::int32_t* idx = projection.compact->data() + t * batch;
      uniform = std::all_of(idx, idx + batch, [&](std::int32_t v) { return v == idx[0]; });
    }
    const Index n_rows = uniform ? 1 : batch;
    const auto rows = [&](Matrix& m) { return m.middleRows(t * batch, n_rows); };
    const auto prev_rows = [&](Matrix& m) { return m.middleRows(prev * batch, n_rows); };
    auto gates = rows(c.gates);
    auto hidden = rows(c.hidden);
    projection.fill(t, batch, gates);

    switch (p.kind) {
      case CellKind::rnn: {
        if (!first) matmul_into<double>(prev_rows(c.hidden), p.recurrent_weights, gates, true);
        tanh_inplace(gates);
        hidden = gates;
        break;
      }
      case CellKind::lstm: {
        if (!first) matmul_into<double>(prev_rows(c.hidden), p.recurrent_weights, gates, true);
        sigmoid_inplace(gates.leftCols(3 * h));
        tanh_inplace(gates.rightCols(h));
        const auto g = gates.rightCols(h).array();
        const auto i = gates.middleCols(0, h).array();
        const auto f = gates.middleCols(h, h).array();
        const auto o = gates.middleCols(2 * h, h).array();
        auto cell = rows(c.cell).array();
        if (first) {
          cell = i * g;
        } else {
          cell = f * prev_rows(c.cell).array() + i * g;
        }
        auto cell_tanh = rows(c.cell_tanh);
        cell_tanh = rows(c.cell);
        tanh_inplace(cell_tanh);
        hidden.array() = o * cell_tanh.array();
        break;
      }
      case CellKind::gru: {
        auto zr = gates.leftCols(2 * h);
        if (!first) {
          matmul_into<double>(prev_rows(c.hidden), p.recurrent_weights.leftCols(2 * h), zr, true);
        }
        sigmoid_inplace(zr);
        const auto z = gates.middleCols(0, h).array();
        const auto r = gates.middleCols(h, h).array();
        auto reset_hidden = rows(c.cell);
        auto n = gates.rightCols(h);
        if (first) {
          reset_hidden.setZero();
        } else {
          reset_hidden.array() = r * prev_rows(c.hidden).array();
          matmul_into<double>(reset_hidden, p.recurrent_weights.rightCols(h), n, true);
        }
        tanh_inplace(n);
        if (first) {
          hidden.array() = z * n.array();
        } else {
          hidden.array() = (1.0 - z) * prev_rows(c.hidden).array() + z * n.array();
        }
        break;
      }
    }
    if (uniform) {
      for (Matrix* m : {&c.gates, &c.hidden, &c.cell, &c.cell_tanh}) {
        if (m->size() == 0) continue;
        auto block = m->middleRows(t * batch, batch);
        for (Index b = 1; b < batch; ++b) block.row(b) = block.row(0);
      }
    }
  }
  return c;
}

struct DirectionBackward {
  Matrix grad_preact;  // dLoss / d(gate pre-activations), stacked
  Matrix recurrent_weights;
  Matrix bias;
};

/**
 * BPTT over one direction. grad_seq (stacked, may be null) is the upstream
 * gradient on every h_t; grad_last (may be null) is the gradient on the state
 * produced by the last processed step.
 */
DirectionBackward backward_direction(const DirectionCache& c, const CellParams& p,
                                     const Matrix* grad_seq, const Matrix* grad_last) {
  const Index h = p.hidden();
  const Index batch = c.batch;
  const Index steps = c.steps;
  const bool reverse = c.reverse;
  DirectionBackward out;
  out.grad_preact.resize(steps * batch, c.gates.cols());

  const Matrix wh_t = p.recurrent_weights.transpose();
  Matrix wzr_t;
  Matrix wn_t;
  if (p.kind == CellKind::gru) {
    wzr_t = p.recurrent_weights.leftCols(2 * h).transpose();
    wn_t = p.recurrent_weights.rightCols(h).transpose();
  }
  const Matrix zero = Matrix::Zero(batch, h);
  Matrix dh_carry = Matrix::Zero(batch, h);
  Matrix dc_carry = Matrix::Zero(batch, h);
  Matrix dh(batch, h);
  Matrix dc(batch, h);
  Matrix tmp(batch, h);

  for (Index s = steps - 1; s >= 0; --s) {
    const Index t = time_at(s, steps, reverse);
    const bool first = s == 0;
    const Index prev = previous_time(t, reverse);
    dh = dh_carry;
    if (grad_seq != nullptr) dh += grad_seq->middleRows(t * batch, batch);
    if (grad_last != nullptr && s == steps - 1) dh += *grad_last;

    const auto gates = c.gates.middleRows(t * batch, batch);
    auto dpre = out.grad_preact.middleRows(t * batch, batch);
    const ConstBlock h_prev =
        first ? ConstBlock(zero) : ConstBlock(c.hidden.middleRows(prev * batch, batch));

    switch (p.kind) {
      case CellKind::rnn: {
        dpre.array() = dh.array() * (1.0 - gates.array().square());
        if (!first) matmul_into<double>(dpre, wh_t, dh_carry);
        break;
      }
      case CellKind::lstm: {
        const auto i = gates.middleCols(0, h).array();
        const auto f = gates.middleCols(h, h).array();
        const auto o = gates.middleCols(2 * h, h).array();
        const auto g = gates.middleCols(3 * h, h).array();
        const auto tc = c.cell_tanh.middleRows(t * batch, batch).array();
        dc.array() = dc_carry.array() + dh.array() * o * (1.0 - tc.square());
        const auto dca = dc.array();
        dpre.middleCols(0, h).array() = dca * g * i * (1.0 - i);
        if (first) {
          dpre.middleCols(h, h).setZero();
        } else {
          const auto c_prev = c.cell.middleRows(prev * batch, batch).array();
          dpre.middleCols(h, h).array() = dca * c_prev * f * (1.0 - f);
        }
        dpre.middleCols(2 * h, h).array() = dh.array() * tc * o * (1.0 - o);
        dpre.middleCols(3 * h, h).array() = dca * i * (1.0 - g.square());
        if (!first) {
          dc_carry.array() = dca * f;
          matmul_into<double>(dpre, wh_t, dh_carry);
        }
        break;
      }
      case CellKind::gru: {
        const auto z = gates.middleCols(0, h).array();
        const auto r = gates.middleCols(h, h).array();
        const auto n = gates.middleCols(2 * h, h).array();
        const auto hp = h_prev.array();
        auto da_n = dpre.middleCols(2 * h, h);
        da_n.array() = dh.array() * z * (1.0 - n.square());
        dpre.middleCols(0, h).array() = dh.array() * (n - hp) * z * (1.0 - z);
        if (first) {
          dpre.middleCols(h, h).setZero();
          break;
        }
        matmul_into<double>(da_n, wn_t, tmp);  // d(r * h_prev)
        dpre.middleCols(h, h).array() = tmp.array() * hp * r * (1.0 - r);
        dh_carry.array() = dh.array() * (1.0 - z) + tmp.array() * r;
        matmul_into<double>(dpre.leftCols(2 * h), wzr_t, dh_carry, true);
        break;
      }
    }
  }

  // h_{t-1} is the hidden block shifted by one step; the step that started
  // the pass has a zero state and contributes nothing.
  const Index tail = (steps - 1) * batch;
  const auto states = reverse ? c.hidden.bottomRows(tail) : c.hidden.topRows(tail);
  const auto grads_after_first = [&](Index col, Index width) {
    return reverse ? out.grad_preact.block(0, col, tail, width)
                   : out.grad_preact.block(batch, col, tail, width);
  };
  out.recurrent_weights = Matrix::Zero(h, c.gates.cols());
  if (tail > 0) {
    if (p.kind == CellKind::gru) {
      matmul_tn_into<double>(states, grads_after_first(0, 2 * h),
                             out.recurrent_weights.leftCols(2 * h));
    } else {
      matmul_tn_into<double>(states, grads_after_first(0, c.gates.cols()), out.recurrent_weights);
    }
  }
  if (p.kind == CellKind::gru) {
    matmul_tn_into<double>(c.cell, out.grad_preact.rightCols(h),
                           out.recurrent_weights.rightCols(h));
  }
  out.bias = column_sums(out.grad_preact);
  return out;
}

SequenceBatch wrap_sequence(Index batch, Index steps, Matrix data) {
  SequenceBatch seq;
  seq.batch = batch;
  seq.steps = steps;
  seq.data = std::move(data);
  return seq;
}

Projection input_projection(const BidirectionalCache& c, const CellParams& p) {
  if (!c.from_tokens) return {add_row(matmul(c.input.data, p.input_weights), p.bias), nullptr};
  return {add_row(matmul(c.unique_embeddings, p.input_weights), p.bias), &c.compact};
}

BidirectionalForward finish_bidirectional(BidirectionalCache cache, const BidirectionalParams& p,
                                          Index batch, Index steps) {
  cache.forward =
      forward_direction(input_projection(cache, p.forward), p.forward, batch, steps, false);
  cache.backward =
      forward_direction(input_projection(cache, p.backward), p.backward, batch, steps, true);
  const Index h = p.hidden();
  BidirectionalForward out;
  if (cache.mode == SequenceMode::final_state) {
    out.final_state.resize(batch, 2 * h);
    out.final_state.leftCols(h) = cache.forward.hidden.middleRows((steps - 1) * batch, batch);
    out.final_state.rightCols(h) = cache.backward.hidden.middleRows(0, batch);
  } else {
    out.sequence = SequenceBatch(batch, steps, 2 * h);
    out.sequence.data.leftCols(h) = cache.forward.hidden;
    out.sequence.data.rightCols(h) = cache.backward.hidden;
  }
  out.cache = std::move(cache);
  return out;
}

}  // namespace

Matrix rnn_cell_step(const Matrix& x, const Matrix& h_prev, const CellParams& p) {
  check_kind(p, CellKind::rnn);
  const Matrix pre = add_row(matmul(x, p.input_weights) + matmul(h_prev, p.recurrent_weights),
                             p.bias);
  return map_activation(pre, Activation::tanh);
}

LstmState lstm_cell_step(const Matrix& x, const Matrix& h_prev, const Matrix& c_prev,
                         const CellParams& p) {
  check_kind(p, CellKind::lstm);
  const Index h = p.hidden();
  if (c_prev.rows() != h_prev.rows() || c_prev.cols() != h) {
    throw ShapeError("lstm cell: c_prev is " + shape_string(c_prev) + ", h_prev is " +
                     shape_string(h_prev));
  }
  const Matrix pre = add_row(matmul(x, p.input_weights) + matmul(h_prev, p.recurrent_weights),
                             p.bias);
  const ArrayRM ifo = sigmoid(pre.leftCols(3 * h).array());
  const ArrayRM g = fraudtext::tanh(pre.rightCols(h).array());
  LstmState next;
  next.c = (ifo.middleCols(h, h) * c_prev.array() + ifo.leftCols(h) * g).matrix();
  next.h = (ifo.middleCols(2 * h, h) * fraudtext::tanh(next.c.array())).matrix();
  return next;
}

Matrix gru_cell_step(const Matrix& x, const Matrix& h_prev, const CellParams& p) {
  check_kind(p, CellKind::gru);
  const Index h = p.hidden();
  const Matrix xp = add_row(matmul(x, p.input_weights), p.bias);
  const ArrayRM zr = sigmoid(
      (xp.leftCols(2 * h) + matmul(h_prev, p.recurrent_weights.leftCols(2 * h))).array());
  const Matrix reset_hidden = (zr.rightCols(h) * h_prev.array()).matrix();
  const ArrayRM n = fraudtext::tanh(
      (xp.rightCols(h) + matmul(reset_hidden, p.recurrent_weights.rightCols(h))).array());
  const auto z = zr.leftCols(h);
  return ((1.0 - z) * h_prev.array() + z * n).matrix();
}

RecurrentForward run_recurrent(const SequenceBatch& x, const CellParams& p, bool reverse) {
  p.validate();
  if (x.steps < 1) throw DataError("recurrent: empty sequence");
  if (x.features() != p.input_dim()) {
    throw ShapeError("recurrent: input has " + std::to_string(x.features()) +
                     " features, cell expects " + std::to_string(p.input_dim()));
  }
  RecurrentForward fwd;
  fwd.input = x;
  fwd.cache = forward_direction({add_row(matmul(x.data, p.input_weights), p.bias), nullptr}, p,
                                x.batch, x.steps, reverse);
  fwd.hidden = wrap_sequence(x.batch, x.steps, fwd.cache.hidden);
  return fwd;
}

RecurrentGrads backprop_recurrent(const RecurrentForward& fwd, const CellParams& p,
                                  const SequenceBatch& grad_hidden) {
  if (grad_hidden.data.rows() != fwd.cache.hidden.rows() ||
      grad_hidden.data.cols() != fwd.cache.hidden.cols()) {
    throw ShapeError("backprop_recurrent: gradient " + shape_string(grad_hidden.data) +
                     " vs hidden " + shape_string(fwd.cache.hidden));
  }
  DirectionBackward d = backward_direction(fwd.cache, p, &grad_hidden.data, nullptr);
  RecurrentGrads g;
  g.params.input_weights = matmul_tn(fwd.input.data, d.grad_preact);
  g.params.recurrent_weights = std::move(d.recurrent_weights);
  g.params.bias = std::move(d.bias);
  g.input = wrap_sequence(fwd.input.batch, fwd.input.steps,
                          matmul(d.grad_preact, p.input_weights.transpose()));
  return g;
}

void BidirectionalParams::validate() const {
  forward.validate();
  backward.validate();
  if (forward.kind != backward.kind || forward.hidden() != backward.hidden() ||
      forward.input_dim() != backward.input_dim()) {
    throw ShapeError("bidirectional: forward and backward cells differ in kind or shape");
  }
}

BidirectionalForward run_bidirectional(const SequenceBatch& x, const BidirectionalParams& p,
                                       SequenceMode mode) {
  p.validate();
  if (x.steps < 1) throw DataError("bidirectional: empty sequence");
  if (x.features() != p.input_dim()) {
    throw ShapeError("bidirectional: input has " + std::to_string(x.features()) +
                     " features, cells expect " + std::to_string(p.input_dim()));
  }
  BidirectionalCache cache;
  cache.mode = mode;
  cache.input = x;
  return finish_bidirectional(std::move(cache), p, x.batch, x.steps);
}

BidirectionalForward run_bidirectional_tokens(const TokenMatrix& tokens, const Matrix& table,
                                              const BidirectionalParams& p, SequenceMode mode) {
  p.validate();
  if (tokens.cols() < 1) throw DataError("bidirectional: empty sequence");
  if (table.cols() != p.input_dim()) {
    throw ShapeError("bidirectional: embedding width " + std::to_string(table.cols()) +
                     " does not match cell input " + std::to_string(p.input_dim()));
  }
  check_token_range(tokens, table.rows());
  const Index batch = tokens.rows();
  const Index steps = tokens.cols();

  BidirectionalCache cache;
  cache.mode = mode;
  cache.from_tokens = true;
  std::vector<std::int32_t> slot(static_cast<std::size_t>(table.rows()), -1);
  for (Index i = 0; i < tokens.size(); ++i) slot[static_cast<std::size_t>(tokens.data()[i])] = 0;
  for (std::size_t v = 0; v < slot.size(); ++v) {
    if (slot[v] == 0) {
      slot[v] = static_cast<std::int32_t>(cache.unique_tokens.size());
      cache.unique_tokens.push_back(static_cast<std::int32_t>(v));
    }
  }
  cache.unique_embeddings.resize(static_cast<Index>(cache.unique_tokens.size()), table.cols());
  for (std::size_t u = 0; u < cache.unique_tokens.size(); ++u) {
    cache.unique_embeddings.row(static_cast<Index>(u)) = table.row(cache.unique_tokens[u]);
  }
  cache.compact.resize(static_cast<std::size_t>(batch * steps));
  for (Index t = 0; t < steps; ++t) {
    for (Index b = 0; b < batch; ++b) {
      cache.compact[static_cast<std::size_t>(t * batch + b)] =
          slot[static_cast<std::size_t>(tokens(b, t))];
    }
  }
  return finish_bidirectional(std::move(cache), p, batch, steps);
}

BidirectionalGrads backprop_bidirectional(const BidirectionalCache& cache,
                                          const BidirectionalParams& p, const Matrix& grad_out) {
  const Index h = p.hidden();
  const Index batch = cache.forward.batch;
  const Index steps = cache.forward.steps;
  const Index expected_rows = cache.mode == SequenceMode::final_state ? batch : batch * steps;
  if (grad_out.rows() != expected_rows || grad_out.cols() != 2 * h) {
    throw ShapeError("backprop_bidirectional: gradient " + shape_string(grad_out) +
                     ", expected " + shape_string(expected_rows, 2 * h));
  }
  const Matrix grad_fwd = grad_out.leftCols(h);
  const Matrix grad_bwd = grad_out.rightCols(h);
  DirectionBackward fwd;
  DirectionBackward bwd;
  if (cache.mode == SequenceMode::final_state) {
    fwd = backward_direction(cache.forward, p.forward, nullptr, &grad_fwd);
    bwd = backward_direction(cache.backward, p.backward, nullptr, &grad_bwd);
  } else {
    fwd = backward_direction(cache.forward, p.forward, &grad_fwd, nullptr);
    bwd = backward_direction(cache.backward, p.backward, &grad_bwd, nullptr);
  }

  BidirectionalGrads g;
  g.forward.recurrent_weights = std::move(fwd.recurrent_weights);
  g.forward.bias = std::move(fwd.bias);
  g.backward.recurrent_weights = std::move(bwd.recurrent_weights);
  g.backward.bias = std::move(bwd.bias);

  if (!cache.from_tokens) {
    g.forward.input_weights = matmul_tn(cache.input.data, fwd.grad_preact);
    g.backward.input_weights = matmul_tn(cache.input.data, bwd.grad_preact);
    Matrix dx = matmul(fwd.grad_preact, p.forward.input_weights.transpose());
    matmul_into<double>(bwd.grad_preact, p.backward.input_weights.transpose(), dx, true);
    g.input = wrap_sequence(cache.input.batch, cache.input.steps, std::move(dx));
    return g;
  }

  // Fold the per-position gradients onto the distinct tokens first.
  const auto fold = [&](const Matrix& grad_preact) {
    Matrix folded = Matrix::Zero(static_cast<Index>(cache.unique_tokens.size()),
                                 grad_preact.cols());
    for (Index r = 0; r < grad_preact.rows(); ++r) {
      folded.row(cache.compact[static_cast<std::size_t>(r)]) += grad_preact.row(r);
    }
    return folded;
  };
  const Matrix folded_fwd = fold(fwd.grad_preact);
  const Matrix folded_bwd = fold(bwd.grad_preact);
  g.forward.input_weights = matmul_tn(cache.unique_embeddings, folded_fwd);
  g.backward.input_weights = matmul_tn(cache.unique_embeddings, folded_bwd);
  g.table_rows = cache.unique_tokens;
  g.table_row_grads = matmul(folded_fwd, p.forward.input_weights.transpose());
  matmul_into<double>(folded_bwd, p.backward.input_weights.transpose(), g.table_row_grads, true);
  return g;
}

}  // namespace fraudtext
