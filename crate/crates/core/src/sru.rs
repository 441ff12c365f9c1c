//! Simple recurrent unit: cell step, two-phase layer forward, stacked layers.
//!
//! The cell's gates depend only on the current input, so a whole layer
//! evaluates in two phases: one batched matrix multiply per weight matrix
//! over all timesteps, then a cheap elementwise scan of the state update.

use crate::error::{Error, Result};
use crate::rng::rng_for;
use crate::scalar::{sigmoid, Scalar};
use crate::tensor::Tensor;
use rand::Rng;

#[derive(Debug, Clone)]
pub struct SruLayerParams<T> {
    pub w: Tensor<T>,
    pub w_f: Tensor<T>,
    pub w_r: Tensor<T>,
    pub b_f: Tensor<T>,
    pub b_r: Tensor<T>,
    /// Highway projection, present exactly when input size != hidden size.
    pub w_h: Option<Tensor<T>>,
}

impl<T: Scalar> SruLayerParams<T> {
    pub fn new(
        w: Tensor<T>,
        w_f: Tensor<T>,
        w_r: Tensor<T>,
        b_f: Tensor<T>,
        b_r: Tensor<T>,
        w_h: Option<Tensor<T>>,
    ) -> Result<Self> {
        let p = SruLayerParams {
            w,
            w_f,
            w_r,
            b_f,
            b_r,
            w_h,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let shape = self.w.shape();
        if shape.len() != 2 {
            return Err(Error::invalid(format!(
                "SRU weight must be a matrix, got shape {shape:?}"
            )));
        }
        for (name, m) in [("W_f", &self.w_f), ("W_r", &self.w_r)] {
            if m.shape() != shape {
                return Err(Error::ShapeMismatch {
                    op: "sru_params",
                    lhs: shape.to_vec(),
                    rhs: m.shape().to_vec(),
                });
            }
            let _ = name;
        }
        let hidden = shape[1];
        for b in [&self.b_f, &self.b_r] {
            if b.shape() != [hidden] {
                return Err(Error::ShapeMismatch {
                    op: "sru_bias",
                    lhs: vec![hidden],
                    rhs: b.shape().to_vec(),
                });
            }
        }
        let (input, hidden) = (shape[0], shape[1]);
        match (&self.w_h, input == hidden) {
            (None, false) => Err(Error::invalid(format!(
                "SRU layer {input}->{hidden} needs a highway projection"
            ))),
            (Some(p), _) if p.shape() != shape => Err(Error::ShapeMismatch {
                op: "sru_highway",
                lhs: shape.to_vec(),
                rhs: p.shape().to_vec(),
            }),
            _ => Ok(()),
        }
    }

    pub fn input_size(&self) -> usize {
        self.w.shape()[0]
    }

    pub fn hidden_size(&self) -> usize {
        self.w.shape()[1]
    }

    /// Orthogonally initialized layer with zero biases, deterministic per seed.
    pub fn init(input: usize, hidden: usize, seed: u64) -> Result<Self> {
        let w_h = if input != hidden {
            Some(crate::init::orthogonal_init(input, hidden, crate::rng::derive_seed(seed, 3))?)
        } else {
            None
        };
        SruLayerParams::new(
            crate::init::orthogonal_init(input, hidden, crate::rng::derive_seed(seed, 0))?,
            crate::init::orthogonal_init(input, hidden, crate::rng::derive_seed(seed, 1))?,
            crate::init::orthogonal_init(input, hidden, crate::rng::derive_seed(seed, 2))?,
            Tensor::zeros(&[hidden]),
            Tensor::zeros(&[hidden]),
            w_h,
        )
    }
}

fn check_input<T: Scalar>(x: &Tensor<T>, p: &SruLayerParams<T>, op: &'static str) -> Result<()> {
    if *x.shape().last().unwrap() != p.input_size() {
        return Err(Error::ShapeMismatch {
            op,
            lhs: x.shape().to_vec(),
            rhs: p.w.shape().to_vec(),
        });
    }
    Ok(())
}

/// One SRU step on a batch: `x_t` is `[B, input]`, `c_prev` is `[B, hidden]`.
/// Returns `(h_t, c_t)`.
pub fn sru_cell_step<T: Scalar>(
    x_t: &Tensor<T>,
    c_prev: &Tensor<T>,
    p: &SruLayerParams<T>,
) -> Result<(Tensor<T>, Tensor<T>)> {
    p.validate()?;
    check_input(x_t, p, "sru_cell_step")?;
    if x_t.ndim() != 2 {
        return Err(Error::invalid(format!(
            "sru_cell_step expects [batch, input], got {:?}",
            x_t.shape()
        )));
    }
    let b = x_t.shape()[0];
    if c_prev.shape() != [b, p.hidden_size()] {
        return Err(Error::ShapeMismatch {
            op: "sru_cell_step state",
            lhs: vec![b, p.hidden_size()],
            rhs: c_prev.shape().to_vec(),
        });
    }
    let x_tilde = x_t.matmul(&p.w)?;
    let f = x_t.matmul(&p.w_f)?.add_vec(&p.b_f)?.map(sigmoid);
    let r = x_t.matmul(&p.w_r)?.add_vec(&p.b_r)?.map(sigmoid);
    let hw = match &p.w_h {
        Some(proj) => x_t.matmul(proj)?,
        None => x_t.clone(),
    };
    let one = T::one();
    let c_t = f
        .mul(c_prev)?
        .add(&f.map(|v| one - v).mul(&x_tilde)?)?;
    let h_t = r
        .mul(&c_t.map(|v| v.fast_tanh()))?
        .add(&r.map(|v| one - v).mul(&hw)?)?;
    Ok((h_t, c_t))
}

/// Two-phase layer forward. `x` is `[T, B, input]`; the result is
/// `[T, B, hidden]`, identical to iterating [`sru_cell_step`] from a zero
/// initial state.
pub fn sru_layer_forward<T: Scalar>(x: &Tensor<T>, p: &SruLayerParams<T>) -> Result<Tensor<T>> {
    p.validate()?;
    check_input(x, p, "sru_layer_forward")?;
    if x.ndim() != 3 {
        return Err(Error::invalid(format!(
            "sru_layer_forward expects [time, batch, input], got {:?}",
            x.shape()
        )));
    }
    let (t_len, b, h) = (x.shape()[0], x.shape()[1], p.hidden_size());

    // phase 1: every projection for every timestep in single matrix products
    let x_tilde = x.matmul(&p.w)?;
    let f = x.matmul(&p.w_f)?.add_vec(&p.b_f)?.map(sigmoid);
    let r = x.matmul(&p.w_r)?.add_vec(&p.b_r)?.map(sigmoid);
    let hw = match &p.w_h {
        Some(proj) => x.matmul(proj)?,
        None => x.clone(),
    };

    // phase 2: elementwise scan of the state recurrence
    let chunk = b * h;
    let one = T::one();
    let mut c = vec![T::zero(); chunk];
    let mut out = vec![T::zero(); t_len * chunk];
    for t in 0..t_len {
        let base = t * chunk;
        let ft = &f.data()[base..base + chunk];
        let rt = &r.data()[base..base + chunk];
        let xt = &x_tilde.data()[base..base + chunk];
        let hwt = &hw.data()[base..base + chunk];
        for i in 0..chunk {
            let ci = ft[i] * c[i] + (one - ft[i]) * xt[i];
            c[i] = ci;
            out[base + i] = rt[i] * ci.fast_tanh() + (one - rt[i]) * hwt[i];
        }
    }
    Tensor::from_vec(vec![t_len, b, h], out)
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize, PartialEq)]
pub struct StackConfig {
    pub layers: usize,
    pub hidden: usize,
    pub input: usize,
    pub dropout: f64,
}

impl StackConfig {
    pub fn validate(&self) -> Result<()> {
        if self.layers < 1 || self.hidden < 1 || self.input < 1 {
            return Err(Error::invalid(format!(
                "stack config needs positive dims, got {self:?}"
            )));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::invalid(format!(
                "dropout must lie in [0, 1), got {}",
                self.dropout
            )));
        }
        Ok(())
    }
}

/// Inverted-dropout keep mask, deterministic per seed.
pub fn dropout_mask<T: Scalar>(shape: &[usize], p: f64, seed: u64) -> Tensor<T> {
    let mut rng = rng_for(seed, 0x6472_6f70); // "drop"
    let keep = T::from_f64(1.0 / (1.0 - p));
    let mut mask = Tensor::zeros(shape);
    for v in mask.data_mut() {
        if rng.gen::<f64>() >= p {
            *v = keep;
        }
    }
    mask
}

/// Stacked SRU layers with inter-layer residual skips where dimensions match,
/// inter-layer dropout in train mode, and a final hyperbolic tangent.
pub fn stack_forward<T: Scalar>(
    x: &Tensor<T>,
    cfg: &StackConfig,
    params: &[SruLayerParams<T>],
    train_mode: bool,
    seed: u64,
) -> Result<Tensor<T>> {
    cfg.validate()?;
    if params.len() != cfg.layers {
        return Err(Error::invalid(format!(
            "stack_forward: {} parameter sets for {} layers",
            params.len(),
            cfg.layers
        )));
    }
    let mut cur = x.clone();
    for (li, p) in params.iter().enumerate() {
        let expect_in = if li == 0 { cfg.input } else { cfg.hidden };
        if p.input_size() != expect_in || p.hidden_size() != cfg.hidden {
            return Err(Error::invalid(format!(
                "layer {li} is {}->{}, expected {expect_in}->{}",
                p.input_size(),
                p.hidden_size(),
                cfg.hidden
            )));
        }
        let mut out = sru_layer_forward(&cur, p)?;
        // skip connections sit between consecutive layers, where dims match
        if li > 0 && p.input_size() == p.hidden_size() {
            out = out.add(&cur)?;
        }
        if train_mode && cfg.dropout > 0.0 && li + 1 < params.len() {
            let mask = dropout_mask(out.shape(), cfg.dropout, crate::rng::derive_seed(seed, li as u64));
            out = out.mul(&mask)?;
        }
        cur = out;
    }
    Ok(cur.map(|v| v.fast_tanh()))
}
