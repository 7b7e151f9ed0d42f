//! Cancellation-free evaluation of the exponential-polynomial kernels that
//! appear in the Nelson-Siegel loadings and their integrals.
//!
//! Each kernel is `sum_j c_j x^p_j e^(-q_j x) / x^order`, where the numerator
//! vanishes to at least `order` at the origin. Near zero the kernel is
//! evaluated from its Taylor coefficients, which are exact rationals for the
//! kernels below, so no digits are lost to cancellation.

use std::sync::OnceLock;

const NCOEF: usize = 32;
const SERIES_CUTOFF: f64 = 1.0;

pub(crate) struct Kernel {
    terms: &'static [(f64, u32, f64)],
    order: u32,
    coeffs: OnceLock<[f64; NCOEF]>,
}

impl Kernel {
    const fn new(terms: &'static [(f64, u32, f64)], order: u32) -> Self {
        Self {
            terms,
            order,
            coeffs: OnceLock::new(),
        }
    }

    fn coeffs(&self) -> &[f64; NCOEF] {
        self.coeffs.get_or_init(|| {
            let mut out = [0.0; NCOEF];
            for (k, slot) in out.iter_mut().enumerate() {
                let n = k as u32 + self.order;
                let mut acc = 0.0;
                for &(c, p, q) in self.terms {
                    if n >= p {
                        let m = (n - p) as i32;
                        acc += c * (-q).powi(m) / factorial(m as u32);
                    }
                }
                *slot = acc;
            }
            out
        })
    }

    pub(crate) fn eval(&self, x: f64) -> f64 {
        if x.abs() < SERIES_CUTOFF {
            self.coeffs().iter().rev().fold(0.0, |acc, c| acc * x + c)
        } else {
            let num: f64 = self
                .terms
                .iter()
                .map(|&(c, p, q)| c * x.powi(p as i32) * (-q * x).exp())
                .sum();
            num / x.powi(self.order as i32)
        }
    }
}

fn factorial(n: u32) -> f64 {
    (1..=n).fold(1.0, |acc, k| acc * k as f64)
}

/// `(1 - e^-x) / x`, equal to 1 at the origin.
pub(crate) fn e1(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        -(-x).exp_m1() / x
    }
}

/// `(1 - e^-x - x e^-x) / x`; the curvature bond loading is `-tau * g_b3(lambda tau)`.
pub(crate) static G_B3: Kernel = Kernel::new(&[(1.0, 0, 0.0), (-1.0, 0, 1.0), (-1.0, 1, 1.0)], 1);

/// `(x - 2(1 - e^-x) + (1 - e^-2x)/2) / x^3`; tends to 1/3.
pub(crate) static H2: Kernel = Kernel::new(
    &[
        (1.0, 1, 0.0),
        (-2.0, 0, 0.0),
        (2.0, 0, 1.0),
        (0.5, 0, 0.0),
        (-0.5, 0, 2.0),
    ],
    3,
);

/// Curvature contribution to the bond convexity term, divided by `x^3`.
pub(crate) static H3: Kernel = Kernel::new(
    &[
        (0.5, 1, 0.0),
        (1.0, 1, 1.0),
        (-0.25, 2, 2.0),
        (-0.75, 1, 2.0),
        (-2.0, 0, 0.0),
        (2.0, 0, 1.0),
        (0.625, 0, 0.0),
        (-0.625, 0, 2.0),
    ],
    3,
);

/// `(1 - e^-2x (2x^2 + 2x + 1)) / (4x)`.
pub(crate) static W22: Kernel = Kernel::new(
    &[
        (0.25, 0, 0.0),
        (-0.5, 2, 2.0),
        (-0.5, 1, 2.0),
        (-0.25, 0, 2.0),
    ],
    1,
);

/// `(1 - e^-2x (2x + 1)) / (4x)`.
pub(crate) static W23: Kernel =
    Kernel::new(&[(0.25, 0, 0.0), (-0.5, 1, 2.0), (-0.25, 0, 2.0)], 1);
