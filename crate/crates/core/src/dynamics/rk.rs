//! Dormand–Prince 5(4) with step-size control, over complex state vectors.

use crate::C64;

// Butcher tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// Differences between the 5th- and 4th-order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

#[derive(Clone, Copy, Debug)]
pub(crate) struct Control {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    pub min_step: f64,
    pub max_steps: usize,
}

/// What the observer decided about a proposed step.
pub(crate) enum Verdict {
    Accept,
    /// Retry with a step no larger than the given fraction of the current one.
    Shrink(f64),
}

#[derive(Debug)]
pub(crate) enum Failure<E> {
    StepUnderflow { t: f64, y: Vec<C64> },
    TooManySteps { t: f64, y: Vec<C64> },
    Rhs(E),
    Observer(E),
}

/// Integrate `y' = f(t, y)` from `0` to `t_end`. `observe` sees every
/// candidate step `(t_new, y_new)` that passed the error test and may veto it.
pub(crate) fn integrate<E, F, O>(
    mut f: F,
    y0: &[C64],
    t_end: f64,
    ctl: Control,
    mut observe: O,
) -> Result<Vec<C64>, Failure<E>>
where
    F: FnMut(f64, &[C64], &mut [C64]) -> Result<(), E>,
    O: FnMut(f64, &[C64]) -> Result<Verdict, E>,
{
    let n = y0.len();
    let mut y = y0.to_vec();
    if t_end == 0.0 {
        return Ok(y);
    }
    let mut k: [Vec<C64>; 7] = std::array::from_fn(|_| vec![C64::default(); n]);
    let mut tmp = vec![C64::default(); n];
    let mut y_new = vec![C64::default(); n];
    let mut t = 0.0;

    f(t, &y, &mut k[0]).map_err(|err| Failure::Rhs(err))?;
    let mut h = initial_step(&y, &k[0], t_end, &ctl);
    let mut steps = 0usize;
    let mut last_rejected = false;

    while t < t_end {
        if steps >= ctl.max_steps {
            return Err(Failure::TooManySteps { t, y });
        }
        if h < ctl.min_step * t_end.max(1.0) {
            return Err(Failure::StepUnderflow { t, y });
        }
        let last = t + h >= t_end * (1.0 - 1e-14);
        if last {
            h = t_end - t;
        }

        let stage = |tmp: &mut [C64], y: &[C64], k: &[Vec<C64>; 7], coeffs: &[(usize, f64)]| {
            for i in 0..n {
                let mut acc = C64::default();
                for &(j, a) in coeffs {
                    acc += a * k[j][i];
                }
                tmp[i] = y[i] + h * acc;
            }
        };
        let mut eval = |stage_idx: usize, ts: f64, tmp: &[C64], k: &mut [Vec<C64>; 7]| {
            f(ts, tmp, &mut k[stage_idx]).map_err(Failure::Rhs)
        };

        let ok = (|| {
            stage(&mut tmp, &y, &k, &[(0, A21)]);
            eval(1, t + C2 * h, &tmp, &mut k)?;
            stage(&mut tmp, &y, &k, &[(0, A31), (1, A32)]);
            eval(2, t + C3 * h, &tmp, &mut k)?;
            stage(&mut tmp, &y, &k, &[(0, A41), (1, A42), (2, A43)]);
            eval(3, t + C4 * h, &tmp, &mut k)?;
            stage(&mut tmp, &y, &k, &[(0, A51), (1, A52), (2, A53), (3, A54)]);
            eval(4, t + C5 * h, &tmp, &mut k)?;
            stage(
                &mut tmp,
                &y,
                &k,
                &[(0, A61), (1, A62), (2, A63), (3, A64), (4, A65)],
            );
            eval(5, t + h, &tmp, &mut k)?;
            stage(
                &mut y_new,
                &y,
                &k,
                &[(0, B1), (2, B3), (3, B4), (4, B5), (5, B6)],
            );
            eval(6, t + h, &y_new, &mut k)
        })();

        let err_norm = match ok {
            Ok(()) => {
                let mut acc = 0.0;
                for i in 0..n {
                    let e = h
                        * (E1 * k[0][i]
                            + E3 * k[2][i]
                            + E4 * k[3][i]
                            + E5 * k[4][i]
                            + E6 * k[5][i]
                            + E7 * k[6][i]);
                    let sc = ctl.abs_tol + ctl.rel_tol * y[i].norm().max(y_new[i].norm());
                    acc += (e.norm() / sc).powi(2);
                }
                (acc / n as f64).sqrt()
            }
            // A stage left the domain of the vector field: treat as a failed step.
            Err(Failure::Rhs(_)) => f64::INFINITY,
            Err(other) => return Err(other),
        };

        if err_norm.is_finite() && err_norm <= 1.0 {
            match observe(t + h, &y_new).map_err(Failure::Observer)? {
                Verdict::Accept => {
                    t = if last { t_end } else { t + h };
                    std::mem::swap(&mut y, &mut y_new);
                    k.swap(0, 6);
                    steps += 1;
                    let fac = if err_norm == 0.0 {
                        5.0
                    } else {
                        (0.9 * err_norm.powf(-0.2)).clamp(0.2, 5.0)
                    };
                    let fac = if last_rejected { fac.min(1.0) } else { fac };
                    h = (h * fac).min(ctl.max_step);
                    last_rejected = false;
                }
                Verdict::Shrink(frac) => {
                    h *= frac.clamp(0.05, 0.9);
                    last_rejected = true;
                }
            }
        } else {
            let fac = if err_norm.is_finite() {
                (0.9 * err_norm.powf(-0.2)).clamp(0.1, 0.9)
            } else {
                0.25
            };
            h *= fac;
            last_rejected = true;
        }
    }
    Ok(y)
}

fn initial_step(y: &[C64], f0: &[C64], t_end: f64, ctl: &Control) -> f64 {
    let n = y.len() as f64;
    let sc = |v: &C64, yi: &C64| v.norm() / (ctl.abs_tol + ctl.rel_tol * yi.norm());
    let d0 = (y.iter().map(|v| sc(v, v).powi(2)).sum::<f64>() / n).sqrt();
    let d1 = (f0
        .iter()
        .zip(y)
        .map(|(v, yi)| sc(v, yi).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    let h = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    };
    h.max(1e-6 * t_end).min(ctl.max_step).min(t_end)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctl(tol: f64) -> Control {
        Control {
            rel_tol: tol,
            abs_tol: tol,
            max_step: 1.0,
            min_step: 1e-14,
            max_steps: 1_000_000,
        }
    }

    #[test]
    fn complex_exponential() {
        // y' = i y  =>  y(t) = exp(i t)
        let y = integrate::<(), _, _>(
            |_, y, dy| {
                dy[0] = C64::i() * y[0];
                Ok(())
            },
            &[C64::new(1.0, 0.0)],
            3.0,
            ctl(1e-11),
            |_, _| Ok(Verdict::Accept),
        )
        .unwrap();
        assert!((y[0] - C64::new(0.0, 3.0).exp()).norm() < 1e-9);
    }

    #[test]
    fn observer_shrink_is_honoured() {
        let mut accepted = Vec::new();
        integrate::<(), _, _>(
            |_, _, dy| {
                dy[0] = C64::new(1.0, 0.0);
                Ok(())
            },
            &[C64::new(0.0, 0.0)],
            1.0,
            ctl(1e-6),
            |t, _| {
                let prev = accepted.last().copied().unwrap_or(0.0);
                if t - prev > 0.1 {
                    Ok(Verdict::Shrink(0.5))
                } else {
                    accepted.push(t);
                    Ok(Verdict::Accept)
                }
            },
        )
        .unwrap();
        assert!(accepted.windows(2).all(|w| w[1] - w[0] <= 0.1 + 1e-12));
        assert_eq!(*accepted.last().unwrap(), 1.0);
    }

    #[test]
    fn blow_up_reports_underflow() {
        // y' = y^2, y(0) = 1 blows up at t = 1.
        let r = integrate::<(), _, _>(
            |_, y, dy| {
                dy[0] = y[0] * y[0];
                Ok(())
            },
            &[C64::new(1.0, 0.0)],
            2.0,
            ctl(1e-10),
            |_, _| Ok(Verdict::Accept),
        );
        match r {
            Err(Failure::StepUnderflow { t, .. }) | Err(Failure::TooManySteps { t, .. }) => {
                assert!(t < 1.0 && t > 0.99)
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
