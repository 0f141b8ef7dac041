use nalgebra::{DMatrix, DVector};

use super::{ShootError, ShootingSettings};

/// One evaluation of the shooting map.
pub(crate) struct Eval<P> {
    pub residual: DVector<f64>,
    pub jacobian: DMatrix<f64>,
    pub payload: P,
}

impl<P> Eval<P> {
    pub fn norm(&self) -> f64 {
        self.residual.norm()
    }
}

pub(crate) struct Converged<P> {
    pub z: DVector<f64>,
    pub eval: Eval<P>,
    pub iterations: usize,
}

/// Damped Newton: the full step is halved until the residual decreases.
/// `polish` takes one extra full step after convergence when it helps.
pub(crate) fn damped_newton<P>(
    z0: DVector<f64>,
    mut eval: impl FnMut(&DVector<f64>) -> Result<Eval<P>, ShootError>,
    settings: &ShootingSettings,
    polish: bool,
) -> Result<Converged<P>, ShootError> {
    let mut z = z0;
    let mut cur = eval(&z)?;
    let mut iterations = 0;
    loop {
        let norm = cur.norm();
        if norm < settings.tol {
            break;
        }
        if iterations >= settings.max_iter {
            return Err(ShootError::NoConvergence {
                iterations,
                residual: norm,
            });
        }
        iterations += 1;
        let step = newton_step(&cur, settings)?;
        let mut lambda = 1.0;
        let mut accepted = None;
        for _ in 0..=settings.max_halvings {
            let trial = &z + &step * lambda;
            if let Ok(e) = eval(&trial) {
                if e.norm() < norm {
                    accepted = Some((trial, e));
                    break;
                }
            }
            lambda *= 0.5;
        }
        match accepted {
            Some((zt, e)) => {
                z = zt;
                cur = e;
            }
            None => {
                return Err(ShootError::NoConvergence {
                    iterations,
                    residual: norm,
                })
            }
        }
    }
    if polish && cur.norm() > 0.0 {
        if let Ok(step) = newton_step(&cur, settings) {
            let trial = &z + &step;
            if let Ok(e) = eval(&trial) {
                if e.norm() <= cur.norm() {
                    z = trial;
                    cur = e;
                }
            }
        }
    }
    Ok(Converged {
        z,
        eval: cur,
        iterations,
    })
}

fn newton_step<P>(cur: &Eval<P>, settings: &ShootingSettings) -> Result<DVector<f64>, ShootError> {
    let lu = cur.jacobian.clone().lu();
    let det = lu.determinant();
    if !(det.abs() > settings.singular_tol) {
        return Err(ShootError::Caustic { det: det.abs() });
    }
    lu.solve(&(-&cur.residual))
        .ok_or(ShootError::Caustic { det: det.abs() })
}
