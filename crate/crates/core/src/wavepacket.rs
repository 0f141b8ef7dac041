use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::C64;

/// Centre, widths and `hbar` of a Gaussian coherent state.
///
/// The momentum widths are not stored: `C = hbar B^-1` always holds, and the
/// normalisation of the position amplitude relies on it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams", into = "RawParams")]
pub struct WavepacketParams {
    q: Vec<f64>,
    p: Vec<f64>,
    b: Vec<f64>,
    hbar: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawParams {
    q: Vec<f64>,
    p: Vec<f64>,
    b: Vec<f64>,
    #[serde(default = "default_hbar")]
    hbar: f64,
}

fn default_hbar() -> f64 {
    1.0
}

impl TryFrom<RawParams> for WavepacketParams {
    type Error = Error;
    fn try_from(raw: RawParams) -> Result<Self> {
        WavepacketParams::new(raw.q, raw.p, raw.b, raw.hbar)
    }
}

impl From<WavepacketParams> for RawParams {
    fn from(w: WavepacketParams) -> Self {
        RawParams {
            q: w.q,
            p: w.p,
            b: w.b,
            hbar: w.hbar,
        }
    }
}

impl WavepacketParams {
    pub fn new(q: Vec<f64>, p: Vec<f64>, b: Vec<f64>, hbar: f64) -> Result<Self> {
        let d = q.len();
        if d == 0 || p.len() != d || b.len() != d {
            return Err(Error::InvalidParameter(format!(
                "dimension mismatch: q has {}, p has {}, b has {} components",
                q.len(),
                p.len(),
                b.len()
            )));
        }
        if !b.iter().all(|&w| w > 0.0 && w.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "widths must be positive, got {b:?}"
            )));
        }
        if !(hbar > 0.0 && hbar.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "hbar must be positive, got {hbar}"
            )));
        }
        if !q.iter().chain(&p).all(|v| v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite centre".into()));
        }
        Ok(WavepacketParams { q, p, b, hbar })
    }

    /// Isotropic two-dimensional packet with `hbar = 1`.
    pub fn planar(q: [f64; 2], p: [f64; 2], b: f64) -> Result<Self> {
        Self::new(q.to_vec(), p.to_vec(), vec![b, b], 1.0)
    }

    pub fn dim(&self) -> usize {
        self.q.len()
    }

    pub fn q(&self) -> &[f64] {
        &self.q
    }

    pub fn p(&self) -> &[f64] {
        &self.p
    }

    /// Diagonal of `B`.
    pub fn b(&self) -> &[f64] {
        &self.b
    }

    /// Diagonal of `C = hbar B^-1`.
    pub fn c(&self) -> Vec<f64> {
        self.b.iter().map(|&b| self.hbar / b).collect()
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    /// `N = |B|^(-1/2) pi^(-d/4)`.
    pub fn norm_const(&self) -> f64 {
        let det_b: f64 = self.b.iter().product();
        det_b.powf(-0.5) * PI.powf(-(self.dim() as f64) / 4.0)
    }

    /// Same widths and `hbar`, different centre.
    pub fn with_center(&self, q: Vec<f64>, p: Vec<f64>) -> Result<Self> {
        Self::new(q, p, self.b.clone(), self.hbar)
    }

    /// Exponent of the normalised amplitude at `x` (without `ln N`).
    pub fn exponent(&self, x: &[f64]) -> C64 {
        let mut phase = 0.0;
        let mut gauss = 0.0;
        for i in 0..self.dim() {
            let dx = x[i] - self.q[i];
            phase += self.p[i] * dx;
            gauss += dx * dx / (self.b[i] * self.b[i]);
        }
        C64::new(-0.5 * gauss, phase / self.hbar)
    }
}

/// Position amplitude of the coherent state,
/// `N exp{(i/hbar) p.(x-q) - (x-q)^T B^-2 (x-q) / 2}`.
pub fn coherent_state_amplitude(x: &[f64], params: &WavepacketParams) -> C64 {
    debug_assert_eq!(x.len(), params.dim());
    params.norm_const() * params.exponent(x).exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn packet() -> WavepacketParams {
        WavepacketParams::planar([-10.0, 1.0], [3.0, 0.0], 1.0).unwrap()
    }

    #[test]
    fn centre_value_is_real_peak() {
        let w =
            WavepacketParams::new(vec![0.3, -1.0], vec![2.0, 1.0], vec![0.5, 2.0], 1.0).unwrap();
        let z = coherent_state_amplitude(&[0.3, -1.0], &w);
        assert!((z.re - (PI * 0.5 * 2.0).powf(-0.5)).abs() < 1e-15);
        assert_eq!(z.im, 0.0);
    }

    #[test]
    fn isotropic_unit_distance() {
        let w = WavepacketParams::planar([0.0, 0.0], [0.0, 0.0], 1.0).unwrap();
        let z = coherent_state_amplitude(&[1.0, 0.0], &w);
        assert!((z.re - PI.powf(-0.5) * (-0.5f64).exp()).abs() < 1e-15);
        assert!(z.im.abs() < 1e-16);
    }

    // Frozen from a 30-digit mpmath evaluation of the closed form.
    #[test]
    fn gaussian_well_packet_values() {
        let w = packet();
        let z = coherent_state_amplitude(&[-10.0, 2.0], &w);
        assert!((z.re - 0.342_198_280_312_216_53).abs() < 1e-15, "{z}");
        assert!(z.im.abs() < 1e-16);
        let z = coherent_state_amplitude(&[-9.5, 2.0], &w);
        assert!((z.re - 0.021_361_851_308_425_92).abs() < 1e-15, "{z}");
        assert!((z.im - 0.301_232_436_149_153_57).abs() < 1e-15, "{z}");
    }

    #[test]
    fn rejects_bad_widths() {
        assert!(WavepacketParams::new(vec![0.0], vec![0.0], vec![0.0], 1.0).is_err());
        assert!(WavepacketParams::new(vec![0.0], vec![0.0], vec![1.0], -1.0).is_err());
        assert!(WavepacketParams::new(vec![0.0, 1.0], vec![0.0], vec![1.0, 1.0], 1.0).is_err());
    }

    #[test]
    fn c_is_hbar_over_b() {
        let w = WavepacketParams::new(vec![0.0, 0.0], vec![0.0, 0.0], vec![0.5, 4.0], 2.0).unwrap();
        assert_eq!(w.c(), vec![4.0, 0.5]);
    }
}
