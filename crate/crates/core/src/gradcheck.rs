//! Central finite-difference verification of the backward pass.
//!
//! Runs entirely in double precision. The function under test rebuilds its
//! graph from the supplied parameter tensors on every call, so perturbed
//! evaluations never share state with the analytic pass.

use crate::error::{Error, Result};
use crate::graph::{Graph, NodeId};
use crate::tensor::Tensor;

const REL_ERR_FLOOR: f64 = 1e-8;

#[derive(Debug)]
pub struct GradCheckEntry {
    pub name: String,
    pub analytic: Tensor<f64>,
    pub numeric: Tensor<f64>,
    pub max_rel_err: f64,
    pub pass: bool,
}

#[derive(Debug)]
pub struct GradReport {
    pub entries: Vec<GradCheckEntry>,
    pub eps: f64,
    pub tol: f64,
}

impl GradReport {
    pub fn all_pass(&self) -> bool {
        self.entries.iter().all(|e| e.pass)
    }

    pub fn worst(&self) -> f64 {
        self.entries
            .iter()
            .map(|e| e.max_rel_err)
            .fold(0.0, f64::max)
    }
}

pub fn relative_error(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(REL_ERR_FLOOR)
}

/// Check the analytic gradient of `f` with respect to every named parameter.
///
/// `f` receives a fresh graph plus one grad-requiring leaf per parameter, in
/// order, and must return a scalar loss node.
pub fn gradient_check<F>(
    f: F,
    params: &[(String, Tensor<f64>)],
    eps: f64,
    tol: f64,
) -> Result<GradReport>
where
    F: Fn(&mut Graph<f64>, &[NodeId]) -> Result<NodeId>,
{
    if !(1e-5..=1e-2).contains(&eps) {
        return Err(Error::invalid(format!(
            "gradient_check eps must lie in [1e-5, 1e-2], got {eps}"
        )));
    }

    // analytic pass
    let mut g = Graph::new();
    let ids: Vec<NodeId> = params
        .iter()
        .map(|(_, t)| g.leaf(t.clone(), true))
        .collect();
    let loss = f(&mut g, &ids)?;
    let grads = g.backward(loss)?;

    let eval = |tensors: &[Tensor<f64>]| -> Result<f64> {
        let mut g = Graph::new();
        let ids: Vec<NodeId> = tensors.iter().map(|t| g.leaf(t.clone(), false)).collect();
        let loss = f(&mut g, &ids)?;
        let v = g.value(loss);
        if !v.is_scalar() {
            return Err(Error::invalid(format!(
                "gradient_check: fn returned non-scalar loss of shape {:?}",
                v.shape()
            )));
        }
        Ok(v.item())
    };

    let mut entries = Vec::with_capacity(params.len());
    for (pi, (name, tensor)) in params.iter().enumerate() {
        let analytic = grads
            .get(ids[pi])
            .cloned()
            .unwrap_or_else(|| Tensor::zeros(tensor.shape()));
        let mut numeric = Tensor::zeros(tensor.shape());
        let mut work: Vec<Tensor<f64>> = params.iter().map(|(_, t)| t.clone()).collect();
        for ei in 0..tensor.numel() {
            let orig = tensor.data()[ei];
            work[pi].data_mut()[ei] = orig + eps;
            let plus = eval(&work).map_err(|e| {
                Error::invalid(format!(
                    "gradient_check: fn failed at {name}[{ei}] += {eps}: {e}"
                ))
            })?;
            work[pi].data_mut()[ei] = orig - eps;
            let minus = eval(&work).map_err(|e| {
                Error::invalid(format!(
                    "gradient_check: fn failed at {name}[{ei}] -= {eps}: {e}"
                ))
            })?;
            work[pi].data_mut()[ei] = orig;
            numeric.data_mut()[ei] = (plus - minus) / (2.0 * eps);
        }
        let max_rel_err = analytic
            .data()
            .iter()
            .zip(numeric.data())
            .map(|(&a, &n)| relative_error(a, n))
            .fold(0.0, f64::max);
        entries.push(GradCheckEntry {
            name: name.clone(),
            analytic,
            numeric,
            max_rel_err,
            pass: max_rel_err <= tol,
        });
    }
    Ok(GradReport { entries, eps, tol })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_function_at_three() {
        let params = vec![("x".to_string(), Tensor::scalar(3.0))];
        let report = gradient_check(
            |g, ids| {
                let x = ids[0];
                g.mul(x, x)
            },
            &params,
            1e-3,
            1e-6,
        )
        .unwrap();
        let e = &report.entries[0];
        assert!((e.analytic.item() - 6.0).abs() < 1e-12);
        assert!((e.numeric.item() - 6.0).abs() < 1e-5);
        assert!(e.pass);
    }

    #[test]
    fn sigmoid_gradient_at_zero() {
        let params = vec![("x".to_string(), Tensor::scalar(0.0))];
        let report = gradient_check(|g, ids| g.sigmoid(ids[0]), &params, 1e-3, 1e-6).unwrap();
        assert!((report.entries[0].analytic.item() - 0.25).abs() < 1e-12);
        assert!(report.all_pass());
    }

    #[test]
    fn eps_range_enforced() {
        let params = vec![("x".to_string(), Tensor::scalar(1.0))];
        assert!(gradient_check(|g, ids| g.tanh(ids[0]), &params, 1e-1, 1e-4).is_err());
    }

    #[test]
    fn unreachable_parameter_gets_zero_gradient() {
        let params = vec![
            ("used".to_string(), Tensor::scalar(2.0)),
            ("unused".to_string(), Tensor::scalar(5.0)),
        ];
        let report = gradient_check(|g, ids| g.mul(ids[0], ids[0]), &params, 1e-3, 1e-6).unwrap();
        assert_eq!(report.entries[1].analytic.item(), 0.0);
        assert!(report.all_pass());
    }
}
