//! Globally adaptive Gauss-Kronrod integration.

use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum QuadratureRule {
    #[default]
    GaussKronrod,
}

/// Integration settings used by the shadow-rate moment integrals.
///
/// `points_per_dim` selects the Kronrod rule: 3 (G1K3), 5 (G2K5) or 15 (G7K15).
/// `panels` is the number of equal panels the interval is split into before
/// adaptive refinement starts.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureScheme {
    pub rule: QuadratureRule,
    pub points_per_dim: usize,
    pub panels: usize,
    pub tolerance: f64,
    pub self_check: bool,
}

impl Default for QuadratureScheme {
    fn default() -> Self {
        Self {
            rule: QuadratureRule::GaussKronrod,
            points_per_dim: 5,
            panels: 1,
            tolerance: 1e-13,
            self_check: false,
        }
    }
}

/// Max disagreement allowed between the base and doubled-panel results.
pub const SELF_CHECK_TOL: f64 = 1e-10;
const MAX_INTERVALS: usize = 4000;

struct Rule {
    // Non-negative Kronrod nodes, largest first; the last is the centre.
    nodes: &'static [f64],
    wk: &'static [f64],
    // Gauss weight for each node (zero where the node is Kronrod-only).
    wg: &'static [f64],
}

const G1K3: Rule = Rule {
    nodes: &[0.774_596_669_241_483_4, 0.0],
    wk: &[0.555_555_555_555_555_6, 0.888_888_888_888_888_9],
    wg: &[0.0, 2.0],
};

const G2K5: Rule = Rule {
    nodes: &[0.925_820_099_772_551_5, 0.577_350_269_189_625_8, 0.0],
    wk: &[0.197_979_797_979_797_98, 0.490_909_090_909_090_9, 0.622_222_222_222_222_2],
    wg: &[0.0, 1.0, 0.0],
};

const G7K15: Rule = Rule {
    nodes: &[
        0.991_455_371_120_812_6,
        0.949_107_912_342_758_5,
        0.864_864_423_359_769_1,
        0.741_531_185_599_394_4,
        0.586_087_235_467_691_1,
        0.405_845_151_377_397_2,
        0.207_784_955_007_898_5,
        0.0,
    ],
    wk: &[
        0.022_935_322_010_529_225,
        0.063_092_092_629_978_55,
        0.104_790_010_322_250_18,
        0.140_653_259_715_525_92,
        0.169_004_726_639_267_9,
        0.190_350_578_064_785_4,
        0.204_432_940_075_298_9,
        0.209_482_141_084_727_83,
    ],
    wg: &[
        0.0,
        0.129_484_966_168_869_7,
        0.0,
        0.279_705_391_489_276_7,
        0.0,
        0.381_830_050_505_118_9,
        0.0,
        0.417_959_183_673_469_4,
    ],
};

impl Rule {
    fn for_points(n: usize) -> Result<&'static Rule> {
        match n {
            3 => Ok(&G1K3),
            5 => Ok(&G2K5),
            15 => Ok(&G7K15),
            _ => Err(Error::Domain(format!(
                "unsupported Gauss-Kronrod order {n} (use 3, 5 or 15)"
            ))),
        }
    }

    /// Kronrod estimate and |Kronrod - Gauss| on [a, b].
    fn apply<F: FnMut(f64) -> f64>(&self, f: &mut F, a: f64, b: f64) -> (f64, f64) {
        let c = 0.5 * (a + b);
        let h = 0.5 * (b - a);
        let (mut k, mut g) = (0.0, 0.0);
        for ((&x, &wk), &wg) in self.nodes.iter().zip(self.wk).zip(self.wg) {
            let v = if x == 0.0 { f(c) } else { f(c - h * x) + f(c + h * x) };
            k += wk * v;
            g += wg * v;
        }
        (k * h, (k - g).abs() * h)
    }
}

struct Panel {
    a: f64,
    b: f64,
    value: f64,
    err: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.err.total_cmp(&other.err)
    }
}

impl QuadratureScheme {
    pub fn with_points(points_per_dim: usize) -> Self {
        Self {
            points_per_dim,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.points_per_dim < 3 {
            return Err(Error::Domain("points_per_dim must be at least 3".into()));
        }
        Rule::for_points(self.points_per_dim)?;
        if self.panels == 0 || !(self.tolerance > 0.0) {
            return Err(Error::Domain("quadrature needs panels >= 1 and tolerance > 0".into()));
        }
        Ok(())
    }

    /// Integrates `f` over `[a, b]`, optionally confirming the result with a
    /// doubled initial panel count.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F, a: f64, b: f64) -> Result<f64> {
        let base = self.adaptive(&mut f, a, b, self.panels, self.tolerance)?;
        if self.self_check {
            let fine = self.adaptive(&mut f, a, b, 2 * self.panels, self.tolerance)?;
            if (fine - base).abs() > SELF_CHECK_TOL {
                return Err(Error::Numerical(format!(
                    "quadrature refinement disagreement {:.3e} on [{a}, {b}]",
                    (fine - base).abs()
                )));
            }
            return Ok(fine);
        }
        Ok(base)
    }

    /// Adaptive integration with an explicit absolute tolerance.
    pub fn adaptive<F: FnMut(f64) -> f64>(
        &self,
        f: &mut F,
        a: f64,
        b: f64,
        panels: usize,
        tol: f64,
    ) -> Result<f64> {
        let rule = Rule::for_points(self.points_per_dim)?;
        if a == b {
            return Ok(0.0);
        }
        let panels = panels.max(1);
        let width = (b - a) / panels as f64;
        let mut heap = BinaryHeap::with_capacity(panels * 4);
        let mut total_err = 0.0;
        for i in 0..panels {
            let pa = a + width * i as f64;
            let pb = if i + 1 == panels { b } else { pa + width };
            let (value, err) = rule.apply(f, pa, pb);
            total_err += err;
            heap.push(Panel { a: pa, b: pb, value, err });
        }
        while total_err > tol {
            if heap.len() >= MAX_INTERVALS {
                return Err(Error::Numerical(format!(
                    "adaptive quadrature did not converge on [{a}, {b}] (error {total_err:.3e})"
                )));
            }
            let worst = heap.pop().expect("heap is non-empty");
            let m = 0.5 * (worst.a + worst.b);
            if m <= worst.a || m >= worst.b {
                heap.push(worst);
                break;
            }
            let (lv, le) = rule.apply(f, worst.a, m);
            let (rv, re) = rule.apply(f, m, worst.b);
            total_err += le + re - worst.err;
            heap.push(Panel { a: worst.a, b: m, value: lv, err: le });
            heap.push(Panel { a: m, b: worst.b, value: rv, err: re });
            if total_err < 0.0 {
                total_err = heap.iter().map(|p| p.err).sum();
            }
        }
        let mut parts: Vec<Panel> = heap.into_vec();
        parts.sort_by(|x, y| x.a.total_cmp(&y.a));
        Ok(parts.iter().map(|p| p.value).sum())
    }
}
