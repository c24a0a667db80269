//! Derivative-free local minimization: golden-section line search and a
//! ball-constrained coordinate descent built on it.

const INV_PHI: f64 = 0.618_033_988_749_894_8;

/// Golden-section search for a minimum of `f` on `[a, b]`.
///
/// Stops once the bracket is shorter than `tol` or after `max_iter`
/// reductions. Returns the better interior point and its value.
pub fn golden_section<F: FnMut(f64) -> f64>(mut f: F, mut a: f64, mut b: f64, tol: f64, max_iter: usize) -> (f64, f64) {
    if b < a {
        std::mem::swap(&mut a, &mut b);
    }
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..max_iter {
        if b - a <= tol {
            break;
        }
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    if fc <= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

#[derive(Clone, Debug)]
pub struct DescentOptions {
    /// Smallest coordinate bracket half-width; also the convergence threshold on moves.
    pub x_tol: f64,
    pub max_sweeps: usize,
}

impl Default for DescentOptions {
    fn default() -> Self {
        Self { x_tol: 1e-8, max_sweeps: 200 }
    }
}

/// Largest `t ≥ 0` with `‖p + t d − c‖ ≤ radius`, for `p` inside the ball.
fn ray_exit(p: &[f64], d: &[f64], c: &[f64], radius: f64) -> f64 {
    let mut dd = 0.0;
    let mut pd = 0.0;
    let mut pp = 0.0;
    for i in 0..p.len() {
        let o = p[i] - c[i];
        dd += d[i] * d[i];
        pd += o * d[i];
        pp += o * o;
    }
    if dd == 0.0 {
        return 0.0;
    }
    let disc = (pd * pd - dd * (pp - radius * radius)).max(0.0);
    ((-pd + disc.sqrt()) / dd).max(0.0)
}

/// Coordinate descent for `f` over the ball `‖y − center‖ ≤ radius`.
///
/// Each coordinate is refined by golden-section search on a bracket around
/// the current value, clipped to the ball chord along that axis. Bracket
/// half-widths adapt to the size of the last accepted move. After every sweep
/// a line search along the sweep's net displacement accelerates progress in
/// curved valleys. Moves are only accepted when they strictly improve `f`.
pub fn coordinate_descent<F: FnMut(&[f64]) -> f64>(
    f: &mut F,
    start: &[f64],
    center: &[f64],
    radius: f64,
    init_step: f64,
    opts: &DescentOptions,
) -> (Vec<f64>, f64) {
    let n = start.len();
    let mut y = start.to_vec();
    let mut fy = f(&y);
    let mut h = vec![init_step.max(opts.x_tol); n];
    let mut trial = y.clone();
    for _ in 0..opts.max_sweeps {
        let sweep_start = y.clone();
        let f_start = fy;
        let mut max_move = 0.0f64;
        for i in 0..n {
            let others: f64 = (0..n).filter(|&j| j != i).map(|j| (y[j] - center[j]).powi(2)).sum();
            let half_chord = (radius * radius - others).max(0.0).sqrt();
            let lo = (y[i] - h[i]).max(center[i] - half_chord);
            let hi = (y[i] + h[i]).min(center[i] + half_chord);
            if hi - lo <= 0.0 {
                h[i] = (h[i] * 0.25).max(opts.x_tol);
                continue;
            }
            trial.copy_from_slice(&y);
            let (t, ft) = golden_section(
                |s| {
                    trial[i] = s;
                    f(&trial)
                },
                lo,
                hi,
                opts.x_tol,
                200,
            );
            if ft < fy {
                let mv = (t - y[i]).abs();
                max_move = max_move.max(mv);
                y[i] = t;
                fy = ft;
                h[i] = (2.0 * mv).max(opts.x_tol);
            } else {
                h[i] = (h[i] * 0.25).max(opts.x_tol);
            }
        }
        let d: Vec<f64> = y.iter().zip(&sweep_start).map(|(a, b)| a - b).collect();
        let dn = crate::linalg::norm(&d);
        if dn > opts.x_tol {
            let t_max = ray_exit(&y, &d, center, radius).min(4.0);
            if t_max > 0.0 {
                let base = y.clone();
                let (t, ft) = golden_section(
                    |s| {
                        for k in 0..n {
                            trial[k] = base[k] + s * d[k];
                        }
                        f(&trial)
                    },
                    0.0,
                    t_max,
                    opts.x_tol / dn,
                    200,
                );
                if ft < fy {
                    for k in 0..n {
                        y[k] = base[k] + t * d[k];
                    }
                    fy = ft;
                }
            }
        }
        let settled = h.iter().all(|&w| w <= opts.x_tol * 1.000_001);
        if max_move <= opts.x_tol && settled && f_start - fy <= f_start.abs() * 1e-15 {
            break;
        }
    }
    (y, fy)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_finds_parabola_vertex() {
        let (x, fx) = golden_section(|x| (x - 0.3).powi(2), -2.0, 5.0, 1e-10, 200);
        assert!((x - 0.3).abs() < 1e-8);
        assert!(fx < 1e-16);
    }

    #[test]
    fn golden_handles_reversed_bracket_and_edge_minimum() {
        let (x, _) = golden_section(|x| x, 3.0, 1.0, 1e-9, 200);
        assert!((x - 1.0).abs() < 1e-8);
    }

    #[test]
    fn descent_minimizes_rotated_quadratic_inside_ball() {
        let mut f = |y: &[f64]| {
            let a = y[0] + y[1] - 0.4;
            let b = y[0] - y[1] + 0.2;
            4.0 * a * a + 0.5 * b * b
        };
        let (y, fy) = coordinate_descent(&mut f, &[0.9, -0.9], &[0.0, 0.0], 2.0, 0.5, &DescentOptions::default());
        assert!(fy < 1e-12, "fy = {fy}");
        assert!((y[0] - 0.1).abs() < 1e-5 && (y[1] - 0.3).abs() < 1e-5, "{y:?}");
    }

    #[test]
    fn descent_stays_in_ball_when_minimizer_is_outside() {
        let mut f = |y: &[f64]| (y[0] - 5.0).powi(2) + y[1] * y[1];
        let (y, _) = coordinate_descent(&mut f, &[0.0, 0.0], &[0.0, 0.0], 1.0, 0.5, &DescentOptions::default());
        assert!(crate::linalg::norm(&y) <= 1.0 + 1e-12);
        assert!((y[0] - 1.0).abs() < 1e-6);
    }
}
