//! Dormand–Prince 5(4) with standard step-size control, on matrix states.

use crate::error::{Error, Result};
use crate::linalg::CMat;

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

// fifth-order weights (also row 7 of the tableau)
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;

// difference between fifth- and fourth-order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

#[derive(Debug, Clone, Copy)]
pub struct StepControl {
    pub atol: f64,
    pub rtol: f64,
    pub max_steps: usize,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
}

/// Integrates `y' = f(x, y)` from `x0` to `x1` (either direction). `h_guess`
/// carries the last accepted step size between calls.
pub fn dopri5<F>(
    f: F,
    x0: f64,
    y0: &CMat,
    x1: f64,
    ctl: StepControl,
    h_guess: &mut f64,
    stats: &mut StepStats,
) -> Result<CMat>
where
    F: Fn(f64, &CMat) -> Result<CMat>,
{
    let span = x1 - x0;
    if span == 0.0 {
        return Ok(y0.clone());
    }
    let dir = span.signum();
    let mut x = x0;
    let mut y = y0.clone();
    let mut h = if *h_guess > 0.0 {
        h_guess.min(span.abs())
    } else {
        span.abs() / 8.0
    };
    let min_step = 1e-14 * x0.abs().max(x1.abs()).max(1.0);
    let mut k1 = f(x, &y)?;
    let mut steps = 0;

    while (x1 - x) * dir > 0.0 {
        steps += 1;
        if steps > ctl.max_steps {
            return Err(Error::Accuracy {
                position: x,
                context: format!("step budget of {} exhausted", ctl.max_steps),
            });
        }
        let last = h >= (x1 - x).abs();
        let hs = if last { x1 - x } else { dir * h };

        let k2 = f(x + C2 * hs, &comb(&y, hs, &[(A21, &k1)]))?;
        let k3 = f(x + C3 * hs, &comb(&y, hs, &[(A31, &k1), (A32, &k2)]))?;
        let k4 = f(x + C4 * hs, &comb(&y, hs, &[(A41, &k1), (A42, &k2), (A43, &k3)]))?;
        let k5 = f(
            x + C5 * hs,
            &comb(&y, hs, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
        )?;
        let k6 = f(
            x + hs,
            &comb(&y, hs, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]),
        )?;
        let y_new = comb(&y, hs, &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)]);
        let k7 = f(x + hs, &y_new)?;
        let err = comb(
            &CMat::zeros(y.nrows(), y.ncols()),
            hs,
            &[(E1, &k1), (E3, &k3), (E4, &k4), (E5, &k5), (E6, &k6), (E7, &k7)],
        );

        let mut en = 0.0f64;
        for ((e, a), b) in err.iter().zip(y.iter()).zip(y_new.iter()) {
            let sc = ctl.atol + ctl.rtol * a.norm().max(b.norm());
            en = en.max(e.norm() / sc);
        }
        if !en.is_finite() {
            return Err(Error::Accuracy {
                position: x,
                context: "non-finite local error estimate".into(),
            });
        }

        if en <= 1.0 {
            x = if last { x1 } else { x + hs };
            y = y_new;
            k1 = k7;
            stats.accepted += 1;
            *h_guess = hs.abs();
            let fac = if en == 0.0 {
                5.0
            } else {
                (0.9 * en.powf(-0.2)).clamp(0.2, 5.0)
            };
            h = hs.abs() * fac;
        } else {
            stats.rejected += 1;
            h = hs.abs() * (0.9 * en.powf(-0.2)).clamp(0.1, 0.9);
            if h < min_step {
                return Err(Error::Accuracy {
                    position: x,
                    context: format!("step size fell below {min_step:e}"),
                });
            }
        }
    }
    Ok(y)
}

/// `y + h Σ a_i k_i`.
fn comb(y: &CMat, h: f64, terms: &[(f64, &CMat)]) -> CMat {
    let mut out = y.clone();
    for (a, k) in terms {
        out.zip_apply(k, |o, v| *o += v * (a * h));
    }
    out
}
