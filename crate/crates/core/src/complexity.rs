//! Architecture complexity calculus: multiply-accumulate counts and
//! parameter counts over declarative layer descriptions. All arithmetic is
//! exact (u128, overflow-checked).

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvLayerSpec {
    /// output feature-map side length
    pub m: u64,
    /// kernel side length
    pub k: u64,
    pub c_in: u64,
    pub c_out: u64,
    pub repeat: u64,
}

impl ConvLayerSpec {
    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.k == 0 || self.c_in == 0 || self.c_out == 0 || self.repeat == 0 {
            return Err(Error::invalid(format!(
                "conv layer fields must be positive: {self:?}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RnnKind {
    Sru,
    Lstm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RnnLayerSpec {
    pub kind: RnnKind,
    pub input: u64,
    pub hidden: u64,
    pub layers: u64,
    pub seqlen: u64,
}

impl RnnLayerSpec {
    pub fn validate(&self) -> Result<()> {
        if self.input == 0 || self.hidden == 0 || self.layers == 0 || self.seqlen == 0 {
            return Err(Error::invalid(format!(
                "rnn layer fields must be positive: {self:?}"
            )));
        }
        Ok(())
    }

    /// Weight-matrix element count, biases excluded. Stacked layers past the
    /// first take `hidden` as their input; the highway projection only exists
    /// where input and hidden disagree.
    fn weight_elems(&self) -> Result<u128> {
        let per_layer = |inp: u128, h: u128| -> Result<u128> {
            let gemm = inp.checked_mul(h).ok_or_else(overflow)?;
            let n = match self.kind {
                RnnKind::Sru => {
                    if inp == h {
                        3
                    } else {
                        4 // 3 gate/transform matrices + highway projection
                    }
                }
                RnnKind::Lstm => {
                    // 4 input-side + 4 hidden-side matrices; both are inp x h
                    // only on the first layer, but we count them separately
                    return gemm
                        .checked_mul(4)
                        .and_then(|a| a.checked_add(4 * (h * h)))
                        .ok_or_else(overflow);
                }
            };
            gemm.checked_mul(n).ok_or_else(overflow)
        };
        let mut total = per_layer(self.input as u128, self.hidden as u128)?;
        for _ in 1..self.layers {
            total = total
                .checked_add(per_layer(self.hidden as u128, self.hidden as u128)?)
                .ok_or_else(overflow)?;
        }
        Ok(total)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConvArchDescription {
    pub name: String,
    pub convs: Vec<ConvLayerSpec>,
    pub rnns: Vec<RnnLayerSpec>,
}

fn overflow() -> Error {
    Error::invalid("complexity accumulator overflow")
}

impl ConvArchDescription {
    pub fn validate(&self) -> Result<()> {
        if self.convs.is_empty() && self.rnns.is_empty() {
            return Err(Error::invalid(format!("arch {} has no layers", self.name)));
        }
        for c in &self.convs {
            c.validate()?;
        }
        for r in &self.rnns {
            r.validate()?;
        }
        Ok(())
    }
}

/// Total multiply-accumulate count: `M^2 * K^2 * C_in * C_out` per conv
/// layer; recurrent layers contribute their per-step GEMM MACs times the
/// sequence length.
pub fn time_complexity(arch: &ConvArchDescription) -> Result<u128> {
    arch.validate()?;
    let mut total: u128 = 0;
    for c in &arch.convs {
        let v = (c.m as u128 * c.m as u128)
            .checked_mul(c.k as u128 * c.k as u128)
            .and_then(|x| x.checked_mul(c.c_in as u128))
            .and_then(|x| x.checked_mul(c.c_out as u128))
            .and_then(|x| x.checked_mul(c.repeat as u128))
            .ok_or_else(overflow)?;
        total = total.checked_add(v).ok_or_else(overflow)?;
    }
    for r in &arch.rnns {
        let v = r
            .weight_elems()?
            .checked_mul(r.seqlen as u128)
            .ok_or_else(overflow)?;
        total = total.checked_add(v).ok_or_else(overflow)?;
    }
    Ok(total)
}

/// Total parameter count: `K^2 * C_in * C_out` per conv layer (no biases);
/// recurrent layers add their weight-matrix element counts.
pub fn space_complexity(arch: &ConvArchDescription) -> Result<u128> {
    arch.validate()?;
    let mut total: u128 = 0;
    for c in &arch.convs {
        let v = (c.k as u128 * c.k as u128)
            .checked_mul(c.c_in as u128)
            .and_then(|x| x.checked_mul(c.c_out as u128))
            .and_then(|x| x.checked_mul(c.repeat as u128))
            .ok_or_else(overflow)?;
        total = total.checked_add(v).ok_or_else(overflow)?;
    }
    for r in &arch.rnns {
        total = total.checked_add(r.weight_elems()?).ok_or_else(overflow)?;
    }
    Ok(total)
}

/// CSV comparison table: `name,time_macs,space_params`, one row per arch.
pub fn report(archs: &[ConvArchDescription]) -> Result<String> {
    let mut out = String::from("name,time_macs,space_params\n");
    for a in archs {
        out.push_str(&format!(
            "{},{},{}\n",
            a.name,
            time_complexity(a)?,
            space_complexity(a)?
        ));
    }
    Ok(out)
}

/// Parse a plain-text description: one layer per line,
/// `conv M K C_in C_out [xRepeat]` or `rnn TYPE input hidden layers seqlen`;
/// `#` starts a comment.
pub fn parse_arch(name: &str, text: &str) -> Result<ConvArchDescription> {
    let mut arch = ConvArchDescription {
        name: name.to_string(),
        convs: Vec::new(),
        rnns: Vec::new(),
    };
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        let bad = |msg: &str| {
            Error::invalid(format!("arch line {}: {msg}: {raw:?}", lineno + 1))
        };
        let num = |s: &str| -> Result<u64> {
            s.parse::<u64>().map_err(|_| bad("not a positive integer"))
        };
        match toks[0] {
            "conv" => {
                if toks.len() < 5 || toks.len() > 6 {
                    return Err(bad("expected `conv M K C_in C_out [xRepeat]`"));
                }
                let repeat = if toks.len() == 6 {
                    let r = toks[5]
                        .strip_prefix('x')
                        .ok_or_else(|| bad("repeat must look like x3"))?;
                    num(r)?
                } else {
                    1
                };
                arch.convs.push(ConvLayerSpec {
                    m: num(toks[1])?,
                    k: num(toks[2])?,
                    c_in: num(toks[3])?,
                    c_out: num(toks[4])?,
                    repeat,
                });
            }
            "rnn" => {
                if toks.len() != 6 {
                    return Err(bad("expected `rnn TYPE input hidden layers seqlen`"));
                }
                let kind = match toks[1].to_ascii_lowercase().as_str() {
                    "sru" => RnnKind::Sru,
                    "lstm" => RnnKind::Lstm,
                    other => return Err(bad(&format!("unknown rnn type {other:?}"))),
                };
                arch.rnns.push(RnnLayerSpec {
                    kind,
                    input: num(toks[2])?,
                    hidden: num(toks[3])?,
                    layers: num(toks[4])?,
                    seqlen: num(toks[5])?,
                });
            }
            other => return Err(bad(&format!("unknown layer kind {other:?}"))),
        }
    }
    arch.validate()?;
    Ok(arch)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn conv_only(layers: Vec<ConvLayerSpec>) -> ConvArchDescription {
        ConvArchDescription {
            name: "t".into(),
            convs: layers,
            rnns: Vec::new(),
        }
    }

    #[test]
    fn single_layer_examples() {
        let a = conv_only(vec![ConvLayerSpec {
            m: 28,
            k: 3,
            c_in: 3,
            c_out: 8,
            repeat: 1,
        }]);
        assert_eq!(time_complexity(&a).unwrap(), 169_344);
        assert_eq!(space_complexity(&a).unwrap(), 216);
    }

    #[test]
    fn unit_layer() {
        let a = conv_only(vec![ConvLayerSpec {
            m: 1,
            k: 1,
            c_in: 1,
            c_out: 1,
            repeat: 1,
        }]);
        assert_eq!(time_complexity(&a).unwrap(), 1);
        assert_eq!(space_complexity(&a).unwrap(), 1);
    }

    #[test]
    fn resnet_first_layer() {
        let a = conv_only(vec![ConvLayerSpec {
            m: 112,
            k: 7,
            c_in: 3,
            c_out: 64,
            repeat: 1,
        }]);
        assert_eq!(time_complexity(&a).unwrap(), 118_013_952);
        assert_eq!(space_complexity(&a).unwrap(), 9_408);
    }

    #[test]
    fn one_by_one_kernel_is_cin_cout() {
        let a = conv_only(vec![ConvLayerSpec {
            m: 5,
            k: 1,
            c_in: 17,
            c_out: 23,
            repeat: 1,
        }]);
        assert_eq!(space_complexity(&a).unwrap(), 17 * 23);
    }

    #[test]
    fn additivity_of_concatenation() {
        let l1 = ConvLayerSpec { m: 14, k: 3, c_in: 8, c_out: 16, repeat: 2 };
        let l2 = ConvLayerSpec { m: 7, k: 5, c_in: 16, c_out: 32, repeat: 1 };
        let a = conv_only(vec![l1]);
        let b = conv_only(vec![l2]);
        let ab = conv_only(vec![l1, l2]);
        assert_eq!(
            time_complexity(&ab).unwrap(),
            time_complexity(&a).unwrap() + time_complexity(&b).unwrap()
        );
        assert_eq!(
            space_complexity(&ab).unwrap(),
            space_complexity(&a).unwrap() + space_complexity(&b).unwrap()
        );
    }

    #[test]
    fn doubling_c_out_doubles_space_per_layer() {
        let l = ConvLayerSpec { m: 14, k: 3, c_in: 8, c_out: 16, repeat: 3 };
        let mut l2 = l;
        l2.c_out *= 2;
        assert_eq!(
            space_complexity(&conv_only(vec![l2])).unwrap(),
            2 * space_complexity(&conv_only(vec![l])).unwrap()
        );
    }

    #[test]
    fn sru_weight_accounting() {
        // first layer 128->256 has highway (4 matrices), two stacked 256->256
        // layers have 3 each
        let r = RnnLayerSpec {
            kind: RnnKind::Sru,
            input: 128,
            hidden: 256,
            layers: 3,
            seqlen: 30,
        };
        let arch = ConvArchDescription {
            name: "r".into(),
            convs: Vec::new(),
            rnns: vec![r],
        };
        let expect_params = 4 * 128 * 256 + 2 * 3 * 256 * 256;
        assert_eq!(space_complexity(&arch).unwrap(), expect_params as u128);
        assert_eq!(
            time_complexity(&arch).unwrap(),
            30 * expect_params as u128
        );
    }

    #[test]
    fn lstm_weight_accounting() {
        let r = RnnLayerSpec {
            kind: RnnKind::Lstm,
            input: 64,
            hidden: 32,
            layers: 1,
            seqlen: 10,
        };
        let arch = ConvArchDescription {
            name: "r".into(),
            convs: Vec::new(),
            rnns: vec![r],
        };
        let expect = 4 * 64 * 32 + 4 * 32 * 32;
        assert_eq!(space_complexity(&arch).unwrap(), expect as u128);
        assert_eq!(time_complexity(&arch).unwrap(), 10 * expect as u128);
    }

    #[test]
    fn square_sru_has_no_highway() {
        let r = RnnLayerSpec {
            kind: RnnKind::Sru,
            input: 64,
            hidden: 64,
            layers: 1,
            seqlen: 1,
        };
        let arch = ConvArchDescription {
            name: "r".into(),
            convs: Vec::new(),
            rnns: vec![r],
        };
        assert_eq!(space_complexity(&arch).unwrap(), 3 * 64 * 64);
    }

    #[test]
    fn report_rows() {
        assert_eq!(report(&[]).unwrap(), "name,time_macs,space_params\n");
        let a = conv_only(vec![ConvLayerSpec { m: 28, k: 3, c_in: 3, c_out: 8, repeat: 1 }]);
        let mut named = a.clone();
        named.name = "tiny".into();
        let csv = report(&[named]).unwrap();
        assert_eq!(csv, "name,time_macs,space_params\ntiny,169344,216\n");
    }

    #[test]
    fn parse_round_trip() {
        let text = "\
# a comment
conv 28 3 3 8          # inline comment
conv 14 3 8 16 x2
rnn sru 128 256 3 30
rnn lstm 64 32 1 10
";
        let arch = parse_arch("mix", text).unwrap();
        assert_eq!(arch.convs.len(), 2);
        assert_eq!(arch.convs[1].repeat, 2);
        assert_eq!(arch.rnns.len(), 2);
        assert_eq!(arch.rnns[0].kind, RnnKind::Sru);
    }

    #[test]
    fn parse_rejects_garbage() {
        assert!(parse_arch("x", "conv 28 3 3").is_err());
        assert!(parse_arch("x", "conv 28 3 3 8 3").is_err()); // repeat needs x
        assert!(parse_arch("x", "pool 2 2").is_err());
        assert!(parse_arch("x", "rnn gru 1 1 1 1").is_err());
        assert!(parse_arch("x", "conv 0 3 3 8").is_err());
        assert!(parse_arch("x", "# only comments\n").is_err());
    }

    #[test]
    fn bundled_resnet34_matches_per_block_oracle() {
        let text = include_str!("../../../configs/resnet34.arch");
        let arch = parse_arch("resnet34", text).unwrap();
        // per-block hand summation, frozen before implementation:
        // stem        49*3*64                              =      9_408
        // stage1      6 * 9*64*64                          =    221_184
        // stage2      9*64*128 + 7*9*128*128 + 64*128      =  1_114_112
        // stage3      9*128*256 + 11*9*256*256 + 128*256   =  6_815_744
        // stage4      9*256*512 + 5*9*512*512 + 256*512    = 13_107_200
        // fc          512*1000                             =    512_000
        assert_eq!(space_complexity(&arch).unwrap(), 21_779_648);
        // same decomposition for MACs:
        // 118_013_952 + 693_633_024 + 873_463_808
        // + 1_335_885_824 + 642_252_800 + 512_000
        assert_eq!(time_complexity(&arch).unwrap(), 3_663_761_408);
    }
}
