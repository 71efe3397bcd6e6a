//! Adaptive Dormand-Prince 5(4) integration of first-order systems.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub h0: f64,
    pub h_max: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions { rtol: 1e-12, atol: 1e-14, h0: 1e-3, h_max: 0.05, max_steps: 2_000_000 }
    }
}

/// What the step callback asks the integrator to do next.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Control {
    Continue,
    Stop,
}

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Integrates `y' = f(t, y)` from `t0` until `t_end` or until `on_step`
/// returns [`Control::Stop`]. `on_step` sees every accepted step.
/// Returns the final `(t, y)`.
pub fn integrate(
    f: impl Fn(f64, &[f64], &mut [f64]),
    t0: f64,
    y0: &[f64],
    t_end: f64,
    opts: &OdeOptions,
    mut on_step: impl FnMut(f64, &[f64]) -> Control,
) -> Result<(f64, Vec<f64>)> {
    let m = y0.len();
    let mut t = t0;
    let mut y = y0.to_vec();
    let mut h = opts.h0.min(t_end - t0);
    let mut k = vec![vec![0.0; m]; 7];
    let mut tmp = vec![0.0; m];
    let mut y5 = vec![0.0; m];
    f(t, &y, &mut k[0]);
    for _ in 0..opts.max_steps {
        if t >= t_end {
            return Ok((t, y));
        }
        h = h.min(t_end - t).min(opts.h_max);
        for s in 1..7 {
            let (done, rest) = k.split_at_mut(s);
            for i in 0..m {
                let mut acc = y[i];
                for (j, kj) in done.iter().enumerate() {
                    acc += h * A[s][j] * kj[i];
                }
                tmp[i] = acc;
            }
            f(t + C[s] * h, &tmp, &mut rest[0]);
        }
        let mut err = 0.0f64;
        for i in 0..m {
            let mut s5 = y[i];
            let mut s4 = y[i];
            for s in 0..7 {
                s5 += h * B5[s] * k[s][i];
                s4 += h * B4[s] * k[s][i];
            }
            y5[i] = s5;
            let sc = opts.atol + opts.rtol * y[i].abs().max(s5.abs());
            err = err.max((s5 - s4).abs() / sc);
        }
        if !err.is_finite() {
            if h < 1e-14 {
                return Err(Error::NonFinite(format!("ODE state at t = {t}")));
            }
            h *= 0.25;
            continue;
        }
        if err <= 1.0 {
            t += h;
            std::mem::swap(&mut y, &mut y5);
            // first-same-as-last: the seventh stage is f at the new point
            let last = k[6].clone();
            k[0].copy_from_slice(&last);
            if on_step(t, &y) == Control::Stop {
                return Ok((t, y));
            }
        }
        let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        h *= factor;
    }
    Err(Error::NoConvergence { iterations: opts.max_steps, residual: f64::NAN })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_and_oscillator() {
        let (t, y) = integrate(
            |_, y, dy| dy[0] = -y[0],
            0.0,
            &[1.0],
            3.0,
            &OdeOptions::default(),
            |_, _| Control::Continue,
        )
        .unwrap();
        assert_eq!(t, 3.0);
        assert!((y[0] - (-3.0f64).exp()).abs() < 1e-12);
        let (_, y) = integrate(
            |_, y, dy| {
                dy[0] = y[1];
                dy[1] = -y[0];
            },
            0.0,
            &[0.0, 1.0],
            10.0,
            &OdeOptions::default(),
            |_, _| Control::Continue,
        )
        .unwrap();
        assert!((y[0] - 10.0f64.sin()).abs() < 1e-10);
    }

    #[test]
    fn stops_on_request() {
        let (t, y) = integrate(
            |_, _, dy| dy[0] = 1.0,
            0.0,
            &[0.0],
            10.0,
            &OdeOptions::default(),
            |_, y| if y[0] > 1.0 { Control::Stop } else { Control::Continue },
        )
        .unwrap();
        assert!(t > 1.0 && t < 1.1 && (y[0] - t).abs() < 1e-12);
    }
}
