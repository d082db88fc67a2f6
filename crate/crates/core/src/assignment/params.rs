use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Size-dependent constants of the relaxation analysis, all derived from
/// `(n, epsilon)`. `d` may be overridden for desk-scale witness trees; the
/// override is recorded in `d_override`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisParams {
    pub n: usize,
    pub epsilon: f64,
    /// `ceil(n^eps)` neighbours per vertex in the alternating digraph.
    pub zeta: usize,
    /// `30 zeta / (eps n)`.
    pub gamma: f64,
    /// `ceil(n^(eps/3))` near-optimal alternatives per node.
    pub d: usize,
    pub d_override: bool,
    /// `n^(-3/2)`.
    pub gap_threshold: f64,
    /// `n^(-3/2 - 2 eps)`.
    pub alt_threshold: f64,
    /// `eps / 3`.
    pub xi: f64,
}

impl AnalysisParams {
    pub fn new(n: usize, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(Error::InvalidOptions(format!(
                "epsilon must lie in (0, 1), got {epsilon}"
            )));
        }
        if n == 0 {
            return Err(Error::InvalidSize { n, min: 1 });
        }
        let nf = n as f64;
        let zeta = ceil_robust(nf.powf(epsilon));
        Ok(Self {
            n,
            epsilon,
            zeta,
            gamma: 30.0 * zeta as f64 / (epsilon * nf),
            d: ceil_robust(nf.powf(epsilon / 3.0)),
            d_override: false,
            gap_threshold: nf.powf(-1.5),
            alt_threshold: nf.powf(-1.5 - 2.0 * epsilon),
            xi: epsilon / 3.0,
        })
    }

    pub fn with_d(mut self, d: usize) -> Self {
        self.d = d;
        self.d_override = true;
        self
    }
}

/// `ceil(x)`, treating values within 1e-9 of an integer as that integer so
/// that e.g. `32^0.2` gives 2 rather than 3.
fn ceil_robust(x: f64) -> usize {
    let r = x.round();
    if (x - r).abs() < 1e-9 {
        r as usize
    } else {
        x.ceil() as usize
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derived_values() {
        let p = AnalysisParams::new(500, 0.2).unwrap();
        assert_eq!(p.zeta, 4);
        assert!((p.gamma - 1.2).abs() < 1e-12);
        assert_eq!(p.d, 2);
        assert!((p.gap_threshold - 500f64.powf(-1.5)).abs() < 1e-18);
        assert!((p.xi - 0.2 / 3.0).abs() < 1e-15);

        let p = AnalysisParams::new(32, 0.2).unwrap();
        assert_eq!(p.zeta, 2);
        let p = AnalysisParams::new(15, 0.2).unwrap();
        assert!((p.alt_threshold - 15f64.powf(-1.9)).abs() < 1e-15);
        assert!(AnalysisParams::new(10, 0.0).is_err());
    }
}
