//! Microbenchmark harness for the recurrent cells: median wall time over a
//! set of repeats, after warm-up.

use crate::error::{Error, Result};
use crate::lstm::{lstm_cell_step, LstmParams};
use crate::rng::{rng_for, standard_normal};
use crate::sru::{sru_layer_forward, SruLayerParams};
use crate::tensor::Tensor;
use std::time::Instant;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellKind {
    Sru,
    Lstm,
}

impl CellKind {
    pub fn name(self) -> &'static str {
        match self {
            CellKind::Sru => "sru",
            CellKind::Lstm => "lstm",
        }
    }
}

impl std::str::FromStr for CellKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sru" => Ok(CellKind::Sru),
            "lstm" => Ok(CellKind::Lstm),
            other => Err(Error::invalid(format!("unknown cell kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchResult {
    pub cell: CellKind,
    pub t_len: usize,
    pub batch: usize,
    pub hidden: usize,
    pub median_ms: f64,
    /// cell evaluations per second: `T * batch / median wall time`
    pub steps_per_s: f64,
}

pub fn bench_csv_header() -> &'static str {
    "cell,T,batch,hidden,median_ms,steps_per_s"
}

pub fn bench_csv_row(r: &BenchResult) -> String {
    format!(
        "{},{},{},{},{:.4},{:.1}",
        r.cell.name(),
        r.t_len,
        r.batch,
        r.hidden,
        r.median_ms,
        r.steps_per_s
    )
}

fn random_tensor(shape: &[usize], seed: u64) -> Tensor<f32> {
    let mut rng = rng_for(seed, 0x6265_6e63);
    let data = (0..shape.iter().product::<usize>())
        .map(|_| standard_normal(&mut rng) as f32 * 0.1)
        .collect();
    Tensor::from_vec(shape.to_vec(), data).expect("bench tensor shape")
}

/// One forward pass of the requested cell over `[T, batch, hidden]` input
/// (input size equals hidden so both cells do comparable work), timed over
/// `repeats` runs after `warmup` unrecorded runs. Reports the median.
pub fn throughput_bench(
    cell: CellKind,
    t_len: usize,
    batch: usize,
    hidden: usize,
    repeats: usize,
    warmup: usize,
) -> Result<BenchResult> {
    if t_len == 0 || batch == 0 || hidden == 0 || repeats == 0 {
        return Err(Error::invalid("bench dimensions must be positive"));
    }
    let x = random_tensor(&[t_len, batch, hidden], 11);
    let mut times_ms = Vec::with_capacity(repeats);
    match cell {
        CellKind::Sru => {
            let p: SruLayerParams<f32> = SruLayerParams::init(hidden, hidden, 12)?;
            let mut sink = 0f32;
            for rep in 0..warmup + repeats {
                let start = Instant::now();
                let h = sru_layer_forward(&x, &p)?;
                let dt = start.elapsed();
                sink += h.data()[0];
                if rep >= warmup {
                    times_ms.push(dt.as_secs_f64() * 1e3);
                }
            }
            std::hint::black_box(sink);
        }
        CellKind::Lstm => {
            let p: LstmParams<f32> = LstmParams::init(hidden, hidden, 12)?;
            let mut sink = 0f32;
            for rep in 0..warmup + repeats {
                let mut h = Tensor::zeros(&[batch, hidden]);
                let mut c = Tensor::zeros(&[batch, hidden]);
                let start = Instant::now();
                for t in 0..t_len {
                    let x_t = x.index0(t)?;
                    let (h2, c2) = lstm_cell_step(&x_t, &h, &c, &p)?;
                    h = h2;
                    c = c2;
                }
                let dt = start.elapsed();
                sink += h.data()[0];
                if rep >= warmup {
                    times_ms.push(dt.as_secs_f64() * 1e3);
                }
            }
            std::hint::black_box(sink);
        }
    }
    times_ms.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median_ms = if times_ms.len() % 2 == 1 {
        times_ms[times_ms.len() / 2]
    } else {
        0.5 * (times_ms[times_ms.len() / 2 - 1] + times_ms[times_ms.len() / 2])
    };
    Ok(BenchResult {
        cell,
        t_len,
        batch,
        hidden,
        median_ms,
        steps_per_s: (t_len * batch) as f64 / (median_ms * 1e-3),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_schema() {
        let r = BenchResult {
            cell: CellKind::Sru,
            t_len: 30,
            batch: 2,
            hidden: 8,
            median_ms: 1.25,
            steps_per_s: 48000.0,
        };
        assert_eq!(bench_csv_header(), "cell,T,batch,hidden,median_ms,steps_per_s");
        assert_eq!(bench_csv_row(&r), "sru,30,2,8,1.2500,48000.0");
    }

    #[test]
    fn bench_runs_and_reports_positive_numbers() {
        for cell in [CellKind::Sru, CellKind::Lstm] {
            let r = throughput_bench(cell, 5, 2, 16, 5, 1).unwrap();
            assert!(r.median_ms > 0.0);
            assert!(r.steps_per_s > 0.0);
        }
    }

    #[test]
    fn zero_dims_rejected() {
        assert!(throughput_bench(CellKind::Sru, 0, 1, 1, 1, 0).is_err());
    }
}
