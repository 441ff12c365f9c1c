//! Conventional LSTM cell, kept as the throughput and gradient baseline.

use crate::error::{Error, Result};
use crate::scalar::{sigmoid, Scalar};
use crate::tensor::Tensor;

/// Per-gate weights: input projections `w_x*` are `[input, hidden]`, hidden
/// projections `w_h*` are `[hidden, hidden]`, biases are `[hidden]`.
#[derive(Debug, Clone)]
pub struct LstmParams<T> {
    pub w_xi: Tensor<T>,
    pub w_hi: Tensor<T>,
    pub b_i: Tensor<T>,
    pub w_xf: Tensor<T>,
    pub w_hf: Tensor<T>,
    pub b_f: Tensor<T>,
    pub w_xo: Tensor<T>,
    pub w_ho: Tensor<T>,
    pub b_o: Tensor<T>,
    pub w_xc: Tensor<T>,
    pub w_hc: Tensor<T>,
    pub b_c: Tensor<T>,
}

impl<T: Scalar> LstmParams<T> {
    pub fn validate(&self) -> Result<()> {
        let xs = self.w_xi.shape().to_vec();
        let hs = self.w_hi.shape().to_vec();
        if xs.len() != 2 || hs.len() != 2 || xs[1] != hs[0] || hs[0] != hs[1] {
            return Err(Error::ShapeMismatch {
                op: "lstm_params",
                lhs: xs,
                rhs: hs,
            });
        }
        for m in [&self.w_xf, &self.w_xo, &self.w_xc] {
            if m.shape() != xs {
                return Err(Error::ShapeMismatch {
                    op: "lstm_params",
                    lhs: xs,
                    rhs: m.shape().to_vec(),
                });
            }
        }
        for m in [&self.w_hf, &self.w_ho, &self.w_hc] {
            if m.shape() != hs {
                return Err(Error::ShapeMismatch {
                    op: "lstm_params",
                    lhs: hs,
                    rhs: m.shape().to_vec(),
                });
            }
        }
        let hidden = hs[1];
        for b in [&self.b_i, &self.b_f, &self.b_o, &self.b_c] {
            if b.shape() != [hidden] {
                return Err(Error::ShapeMismatch {
                    op: "lstm_bias",
                    lhs: vec![hidden],
                    rhs: b.shape().to_vec(),
                });
            }
        }
        Ok(())
    }

    pub fn input_size(&self) -> usize {
        self.w_xi.shape()[0]
    }

    pub fn hidden_size(&self) -> usize {
        self.w_xi.shape()[1]
    }

    pub fn zeros(input: usize, hidden: usize) -> Self {
        LstmParams {
            w_xi: Tensor::zeros(&[input, hidden]),
            w_hi: Tensor::zeros(&[hidden, hidden]),
            b_i: Tensor::zeros(&[hidden]),
            w_xf: Tensor::zeros(&[input, hidden]),
            w_hf: Tensor::zeros(&[hidden, hidden]),
            b_f: Tensor::zeros(&[hidden]),
            w_xo: Tensor::zeros(&[input, hidden]),
            w_ho: Tensor::zeros(&[hidden, hidden]),
            b_o: Tensor::zeros(&[hidden]),
            w_xc: Tensor::zeros(&[input, hidden]),
            w_hc: Tensor::zeros(&[hidden, hidden]),
            b_c: Tensor::zeros(&[hidden]),
        }
    }

    /// Canonical parameter order, matching the field order.
    pub fn named(&self) -> Vec<(String, &Tensor<T>)> {
        vec![
            ("w_xi".to_string(), &self.w_xi),
            ("w_hi".to_string(), &self.w_hi),
            ("b_i".to_string(), &self.b_i),
            ("w_xf".to_string(), &self.w_xf),
            ("w_hf".to_string(), &self.w_hf),
            ("b_f".to_string(), &self.b_f),
            ("w_xo".to_string(), &self.w_xo),
            ("w_ho".to_string(), &self.w_ho),
            ("b_o".to_string(), &self.b_o),
            ("w_xc".to_string(), &self.w_xc),
            ("w_hc".to_string(), &self.w_hc),
            ("b_c".to_string(), &self.b_c),
        ]
    }

    pub fn init(input: usize, hidden: usize, seed: u64) -> Result<Self> {
        let o = |tag: u64, r: usize| crate::init::orthogonal_init(r, hidden, crate::rng::derive_seed(seed, tag));
        Ok(LstmParams {
            w_xi: o(0, input)?,
            w_hi: o(1, hidden)?,
            b_i: Tensor::zeros(&[hidden]),
            w_xf: o(2, input)?,
            w_hf: o(3, hidden)?,
            b_f: Tensor::zeros(&[hidden]),
            w_xo: o(4, input)?,
            w_ho: o(5, hidden)?,
            b_o: Tensor::zeros(&[hidden]),
            w_xc: o(6, input)?,
            w_hc: o(7, hidden)?,
            b_c: Tensor::zeros(&[hidden]),
        })
    }
}

/// One LSTM step on a batch: `x_t` is `[B, input]`, states are `[B, hidden]`.
/// Returns `(h_t, c_t)`.
pub fn lstm_cell_step<T: Scalar>(
    x_t: &Tensor<T>,
    h_prev: &Tensor<T>,
    c_prev: &Tensor<T>,
    p: &LstmParams<T>,
) -> Result<(Tensor<T>, Tensor<T>)> {
    p.validate()?;
    if x_t.ndim() != 2 || *x_t.shape().last().unwrap() != p.input_size() {
        return Err(Error::ShapeMismatch {
            op: "lstm_cell_step",
            lhs: x_t.shape().to_vec(),
            rhs: p.w_xi.shape().to_vec(),
        });
    }
    let b = x_t.shape()[0];
    for s in [h_prev, c_prev] {
        if s.shape() != [b, p.hidden_size()] {
            return Err(Error::ShapeMismatch {
                op: "lstm_cell_step state",
                lhs: vec![b, p.hidden_size()],
                rhs: s.shape().to_vec(),
            });
        }
    }
    let gate = |wx: &Tensor<T>, wh: &Tensor<T>, bias: &Tensor<T>| -> Result<Tensor<T>> {
        x_t.matmul(wx)?
            .add(&h_prev.matmul(wh)?)?
            .add_vec(bias)
    };
    let i = gate(&p.w_xi, &p.w_hi, &p.b_i)?.map(sigmoid);
    let f = gate(&p.w_xf, &p.w_hf, &p.b_f)?.map(sigmoid);
    let o = gate(&p.w_xo, &p.w_ho, &p.b_o)?.map(sigmoid);
    let cand = gate(&p.w_xc, &p.w_hc, &p.b_c)?.map(|v| v.fast_tanh());
    let c_t = f.mul(c_prev)?.add(&i.mul(&cand)?)?;
    let h_t = o.mul(&c_t.map(|v| v.fast_tanh()))?;
    Ok((h_t, c_t))
}

/// Differentiable LSTM scan over `[T, B, input]`. `ids` are the 12 parameter
/// leaves in canonical order (see [`LstmParams::named`]); returns the stacked
/// hidden states `[T, B, hidden]`.
pub fn build_lstm_forward<T: Scalar>(
    g: &mut crate::graph::Graph<T>,
    ids: &[crate::graph::NodeId],
    x: &Tensor<T>,
) -> Result<crate::graph::NodeId> {
    if ids.len() != 12 {
        return Err(Error::invalid(format!(
            "build_lstm_forward expects 12 parameter leaves, got {}",
            ids.len()
        )));
    }
    if x.ndim() != 3 {
        return Err(Error::invalid(format!(
            "lstm input must be [T, B, input], got {:?}",
            x.shape()
        )));
    }
    let (t_len, batch) = (x.shape()[0], x.shape()[1]);
    let hidden = g.value(ids[0]).shape()[1];
    let (w_xi, w_hi, b_i) = (ids[0], ids[1], ids[2]);
    let (w_xf, w_hf, b_f) = (ids[3], ids[4], ids[5]);
    let (w_xo, w_ho, b_o) = (ids[6], ids[7], ids[8]);
    let (w_xc, w_hc, b_c) = (ids[9], ids[10], ids[11]);

    let x_node = g.leaf(x.clone(), false);
    let mut h = g.constant(Tensor::zeros(&[batch, hidden]));
    let mut c = g.constant(Tensor::zeros(&[batch, hidden]));
    let mut steps = Vec::with_capacity(t_len);
    for t in 0..t_len {
        let x_t = g.index0(x_node, t)?;
        let mut gate = |wx, wh, b| -> Result<crate::graph::NodeId> {
            let a = g.matmul(x_t, wx)?;
            let bm = g.matmul(h, wh)?;
            let s = g.add(a, bm)?;
            g.add_vec(s, b)
        };
        let i_lin = gate(w_xi, w_hi, b_i)?;
        let f_lin = gate(w_xf, w_hf, b_f)?;
        let o_lin = gate(w_xo, w_ho, b_o)?;
        let c_lin = gate(w_xc, w_hc, b_c)?;
        let i_g = g.sigmoid(i_lin)?;
        let f_g = g.sigmoid(f_lin)?;
        let o_g = g.sigmoid(o_lin)?;
        let cand = g.tanh(c_lin)?;
        let keep = g.mul(f_g, c)?;
        let fresh = g.mul(i_g, cand)?;
        c = g.add(keep, fresh)?;
        let tc = g.tanh(c)?;
        h = g.mul(o_g, tc)?;
        steps.push(h);
    }
    g.stack0(&steps)
}
