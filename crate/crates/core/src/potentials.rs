//! Analytic potentials, evaluable at complex positions.
//!
//! All smooth potentials here are radial, `V = f(r^2)`, except the separable
//! harmonic test potential, so derivatives follow from `f'` and `f''`:
//! `dV/dx_i = 2 f' x_i` and `d2V/dx_i dx_j = 2 f' delta_ij + 4 f'' x_i x_j`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::C64;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PotentialSpec {
    /// `V = -depth exp(-r^2)`.
    GaussianWell {
        #[serde(default = "one")]
        depth: f64,
    },
    /// `V = a r^2 + b_q r^4`.
    Quartic {
        a: f64,
        b_q: f64,
    },
    /// `V = v0 exp{-(r^2 - r0^2)^2 / sigma^2}`, a circular ridge of radius `r0`.
    Ridge {
        v0: f64,
        r0: f64,
        sigma: f64,
    },
    /// `V = sum_i omega_i^2 x_i^2 / 2`.
    Harmonic {
        omega: Vec<f64>,
    },
    Free,
    /// Hard-wall disk of radius `radius` centred at the origin. The
    /// semiclassical side treats it analytically; the grid propagator sees a
    /// smooth wall `wall_height (1 + tanh((r - radius) / wall_width)) / 2`.
    Billiard {
        radius: f64,
        #[serde(default = "default_wall_height")]
        wall_height: f64,
        #[serde(default = "default_wall_width")]
        wall_width: f64,
    },
}

fn one() -> f64 {
    1.0
}

fn default_wall_height() -> f64 {
    1e4
}

fn default_wall_width() -> f64 {
    0.02
}

const BILLIARD_HINT: &str = "use the analytic billiard trajectories in `dynamics::billiard`";

impl PotentialSpec {
    pub fn gaussian_well() -> Self {
        PotentialSpec::GaussianWell { depth: 1.0 }
    }

    pub fn billiard(radius: f64) -> Self {
        PotentialSpec::Billiard {
            radius,
            wall_height: default_wall_height(),
            wall_width: default_wall_width(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            PotentialSpec::GaussianWell { .. } => "gaussian_well",
            PotentialSpec::Quartic { .. } => "quartic",
            PotentialSpec::Ridge { .. } => "ridge",
            PotentialSpec::Harmonic { .. } => "harmonic",
            PotentialSpec::Free => "free",
            PotentialSpec::Billiard { .. } => "billiard",
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        match *self {
            PotentialSpec::GaussianWell { depth } if !depth.is_finite() => bad("depth must be finite".into()),
            PotentialSpec::Quartic { a, b_q } if !(a >= 0.0 && b_q >= 0.0) => {
                bad(format!("quartic coefficients must be non-negative, got a={a}, b_q={b_q}"))
            }
            PotentialSpec::Ridge { v0, r0, sigma } if !(v0 > 0.0 && r0 > 0.0 && sigma > 0.0) => {
                bad(format!("ridge needs v0, r0, sigma > 0, got {v0}, {r0}, {sigma}"))
            }
            PotentialSpec::Billiard {
                radius,
                wall_height,
                wall_width,
            } if !(radius > 0.0 && wall_height > 0.0 && wall_width > 0.0) => {
                bad(format!("billiard needs positive radius and wall, got {radius}, {wall_height}, {wall_width}"))
            }
            PotentialSpec::Harmonic { ref omega } if omega.is_empty() || omega.iter().any(|w| !w.is_finite()) => {
                bad("harmonic needs finite frequencies".into())
            }
            _ => Ok(()),
        }
    }

    /// True when the potential has a closed-form analytic continuation.
    pub fn is_smooth(&self) -> bool {
        !matches!(self, PotentialSpec::Billiard { .. })
    }

    fn unsupported(&self) -> Error {
        Error::Unsupported {
            potential: self.name(),
            hint: BILLIARD_HINT,
        }
    }

    fn check_dim(&self, d: usize) -> Result<()> {
        match self {
            PotentialSpec::Harmonic { omega } if omega.len() != d => {
                Err(Error::InvalidParameter(format!(
                    "harmonic has {} frequencies but position has {d} components",
                    omega.len()
                )))
            }
            _ => Ok(()),
        }
    }

    /// `(f, f', f'')` of the radial profile at `s = r^2`.
    fn radial(&self, s: C64) -> (C64, C64, C64) {
        match *self {
            PotentialSpec::GaussianWell { depth } => {
                let e = depth * (-s).exp();
                (-e, e, -e)
            }
            PotentialSpec::Quartic { a, b_q } => (
                a * s + b_q * s * s,
                a + 2.0 * b_q * s,
                C64::new(2.0 * b_q, 0.0),
            ),
            PotentialSpec::Ridge { v0, r0, sigma } => {
                let u = s - r0 * r0;
                let s2 = sigma * sigma;
                let f = v0 * (-(u * u) / s2).exp();
                (
                    f,
                    f * (-2.0 * u / s2),
                    f * (4.0 * u * u / (s2 * s2) - 2.0 / s2),
                )
            }
            _ => (C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0)),
        }
    }

    /// Value, gradient and row-major Hessian in one pass; `grad` and `hess`
    /// must hold `d` and `d*d` entries.
    pub fn eval_into(&self, x: &[C64], grad: &mut [C64], hess: &mut [C64]) -> Result<C64> {
        let d = x.len();
        let zero = C64::new(0.0, 0.0);
        match self {
            PotentialSpec::Billiard { .. } => Err(self.unsupported()),
            PotentialSpec::Free => {
                grad.fill(zero);
                hess.fill(zero);
                Ok(zero)
            }
            PotentialSpec::Harmonic { omega } => {
                self.check_dim(d)?;
                hess.fill(zero);
                let mut v = zero;
                for i in 0..d {
                    let w2 = omega[i] * omega[i];
                    v += 0.5 * w2 * x[i] * x[i];
                    grad[i] = w2 * x[i];
                    hess[i * d + i] = C64::new(w2, 0.0);
                }
                Ok(v)
            }
            _ => {
                let s: C64 = x.iter().map(|&xi| xi * xi).sum();
                let (f, f1, f2) = self.radial(s);
                for i in 0..d {
                    grad[i] = 2.0 * f1 * x[i];
                    for j in 0..=i {
                        let mut h = 4.0 * f2 * (x[i] * x[j]);
                        if i == j {
                            h += 2.0 * f1;
                        }
                        hess[i * d + j] = h;
                        hess[j * d + i] = h;
                    }
                }
                Ok(f)
            }
        }
    }

    pub fn value(&self, x: &[C64]) -> Result<C64> {
        let d = x.len();
        self.eval_into(
            x,
            &mut vec![C64::default(); d],
            &mut vec![C64::default(); d * d],
        )
    }

    pub fn gradient(&self, x: &[C64]) -> Result<Vec<C64>> {
        let d = x.len();
        let mut g = vec![C64::default(); d];
        self.eval_into(x, &mut g, &mut vec![C64::default(); d * d])?;
        Ok(g)
    }

    pub fn hessian(&self, x: &[C64]) -> Result<CMatrix> {
        let d = x.len();
        let mut h = vec![C64::default(); d * d];
        self.eval_into(x, &mut vec![C64::default(); d], &mut h)?;
        Ok(CMatrix::from_row_slice(d, d, &h))
    }

    /// Real potential as seen by the grid propagator.
    pub fn grid_value(&self, x: &[f64]) -> f64 {
        match *self {
            PotentialSpec::Billiard {
                radius,
                wall_height,
                wall_width,
            } => {
                let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                0.5 * wall_height * (1.0 + ((r - radius) / wall_width).tanh())
            }
            _ => {
                let z: Vec<C64> = x.iter().map(|&v| C64::new(v, 0.0)).collect();
                self.value(&z).map(|v| v.re).unwrap_or(0.0)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn smooth_specs() -> Vec<PotentialSpec> {
        vec![
            PotentialSpec::gaussian_well(),
            PotentialSpec::Quartic { a: 0.5, b_q: 0.1 },
            PotentialSpec::Ridge {
                v0: 10.0,
                r0: 5.0,
                sigma: 10.0,
            },
            PotentialSpec::Harmonic {
                omega: vec![1.0, 1.7],
            },
            PotentialSpec::Free,
        ]
    }

    #[test]
    fn closed_form_values() {
        let g = PotentialSpec::gaussian_well();
        assert_eq!(g.value(&[c(0.0, 0.0), c(0.0, 0.0)]).unwrap(), c(-1.0, 0.0));
        let v = g.value(&[c(0.0, 1.0), c(0.0, 0.0)]).unwrap();
        assert!((v - c(-std::f64::consts::E, 0.0)).norm() < 1e-14);
        let q = PotentialSpec::Quartic { a: 0.5, b_q: 0.1 };
        assert!((q.value(&[c(1.0, 0.0), c(0.0, 0.0)]).unwrap() - c(0.6, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn free_and_harmonic_derivatives() {
        let x = [c(0.3, 0.2), c(-1.0, 0.5)];
        let f = PotentialSpec::Free;
        assert!(f.gradient(&x).unwrap().iter().all(|g| g.norm() == 0.0));
        assert!(f.hessian(&x).unwrap().iter().all(|g| g.norm() == 0.0));
        let h = PotentialSpec::Harmonic {
            omega: vec![1.0, 1.0],
        }
        .hessian(&x)
        .unwrap();
        assert_eq!(h, CMatrix::identity(2, 2));
    }

    #[test]
    fn billiard_is_not_continuable() {
        let b = PotentialSpec::billiard(3.0);
        assert!(matches!(
            b.value(&[c(0.0, 0.0), c(0.0, 0.0)]),
            Err(Error::Unsupported { .. })
        ));
        assert!(b.grid_value(&[0.0, 0.0]) < 1e-100);
        assert!((b.grid_value(&[3.5, 0.0]) - 1e4).abs() < 1e-6);
    }

    fn fd_check(spec: &PotentialSpec, x: &[C64], h: f64) -> (f64, f64) {
        let d = x.len();
        let g = spec.gradient(x).unwrap();
        let hess = spec.hessian(x).unwrap();
        let (mut eg, mut eh) = (0.0f64, 0.0f64);
        for j in 0..d {
            let shift = |s: f64| {
                let mut y = x.to_vec();
                y[j] += s;
                y
            };
            let fd_g =
                (spec.value(&shift(h)).unwrap() - spec.value(&shift(-h)).unwrap()) / (2.0 * h);
            eg = eg.max((fd_g - g[j]).norm() / g[j].norm().max(1e-3));
            let gp = spec.gradient(&shift(h)).unwrap();
            let gm = spec.gradient(&shift(-h)).unwrap();
            for i in 0..d {
                let fd_h = (gp[i] - gm[i]) / (2.0 * h);
                eh = eh.max((fd_h - hess[(i, j)]).norm() / hess[(i, j)].norm().max(1e-3));
            }
        }
        (eg, eh)
    }

    #[test]
    fn gaussian_well_matches_finite_differences() {
        let (eg, eh) = fd_check(
            &PotentialSpec::gaussian_well(),
            &[c(0.3, 0.0), c(-0.2, 0.1)],
            1e-5,
        );
        assert!(eg < 1e-6 && eh < 1e-6, "{eg} {eh}");
    }

    #[test]
    fn hessian_is_symmetric() {
        for spec in smooth_specs() {
            let h = spec.hessian(&[c(0.7, -0.3), c(1.1, 0.4)]).unwrap();
            assert_eq!(h[(0, 1)], h[(1, 0)]);
        }
    }

    proptest! {
        #[test]
        fn derivatives_match_finite_differences(
            xr in -2.0f64..2.0, xi in -0.5f64..0.5, yr in -2.0f64..2.0, yi in -0.5f64..0.5, k in 0usize..5,
        ) {
            let spec = &smooth_specs()[k];
            let (eg, eh) = fd_check(spec, &[c(xr, xi), c(yr, yi)], 1e-4);
            prop_assert!(eg < 1e-5 && eh < 1e-5, "{} {} {}", spec.name(), eg, eh);
        }

        #[test]
        fn real_inputs_give_real_values(x in -6.0f64..6.0, y in -6.0f64..6.0, k in 0usize..5) {
            let v = smooth_specs()[k].value(&[c(x, 0.0), c(y, 0.0)]).unwrap();
            prop_assert!(v.im == 0.0);
        }
    }
}
