//! Finite-difference references for the free-space wave equation with c ≡ 1
//! and zero initial velocity.

/// Radially symmetric solve of u_tt = u_rr + u_r/r on a cell-centred grid,
/// far enough out that the outer wall is never felt before `t_final`.
/// Returns `u(radius, t_n)` for `t_n = n·dt_out`, `n = 0..=n_out`.
pub fn radial_trace(f: impl Fn(f64) -> f64, radius: f64, t_final: f64, n_out: usize, dr: f64) -> Vec<f64> {
    let r_max = radius + t_final + 1.0 + 0.5 * t_final;
    let m = (r_max / dr).ceil() as usize;
    let r: Vec<f64> = (0..m).map(|i| (i as f64 + 0.5) * dr).collect();
    let dt_out = t_final / n_out as f64;
    let sub = ((dt_out / (0.5 * dr)).ceil() as usize).max(1);
    let dt = dt_out / sub as f64;
    let c2 = (dt / dr).powi(2);
    let lap = |u: &[f64], i: usize| -> f64 {
        let rp = r[i] + 0.5 * dr;
        let rm = r[i] - 0.5 * dr;
        let up = if i + 1 < m { u[i + 1] } else { 0.0 };
        let um = if i > 0 { u[i - 1] } else { u[i] };
        (rp * (up - u[i]) - rm * (u[i] - um)) / r[i]
    };
    let sample = |u: &[f64]| -> f64 {
        // cubic Lagrange interpolation at `radius`
        let x = radius / dr - 0.5;
        let i0 = x.floor() as usize - 1;
        let mut s = 0.0;
        for a in 0..4 {
            let mut l = 1.0;
            for b in 0..4 {
                if a != b {
                    l *= (x - (i0 + b) as f64) / (a as f64 - b as f64);
                }
            }
            s += l * u[i0 + a];
        }
        s
    };
    let u0: Vec<f64> = r.iter().map(|&x| f(x)).collect();
    let mut prev = u0.clone();
    let mut cur: Vec<f64> = (0..m).map(|i| u0[i] + 0.5 * c2 * lap(&u0, i)).collect();
    let mut out = vec![sample(&u0)];
    let mut step = 1;
    loop {
        if step % sub == 0 {
            out.push(sample(&cur));
            if out.len() > n_out {
                break;
            }
        }
        let next: Vec<f64> = (0..m).map(|i| 2.0 * cur[i] - prev[i] + c2 * lap(&cur, i)).collect();
        prev = std::mem::replace(&mut cur, next);
        step += 1;
    }
    out
}

/// Cartesian solve on [−half_width, half_width]² with a fourth-order
/// Laplacian; returns the field at `points` for every output step.
pub fn cartesian_traces(
    f: impl Fn(f64, f64) -> f64,
    points: &[(f64, f64)],
    t_final: f64,
    n_out: usize,
    half_width: f64,
    dx: f64,
) -> Vec<Vec<f64>> {
    let m = (2.0 * half_width / dx).round() as usize + 1;
    let coord = |i: usize| -half_width + i as f64 * dx;
    let dt_out = t_final / n_out as f64;
    let sub = ((dt_out / (0.25 * dx)).ceil() as usize).max(1);
    let dt = dt_out / sub as f64;
    let c2 = (dt / dx).powi(2);
    let idx = |i: usize, j: usize| i * m + j;
    let lap = |u: &[f64], out: &mut [f64]| {
        for i in 2..m - 2 {
            for j in 2..m - 2 {
                let c = u[idx(i, j)];
                let lx = -u[idx(i - 2, j)] + 16.0 * u[idx(i - 1, j)] - 30.0 * c + 16.0 * u[idx(i + 1, j)] - u[idx(i + 2, j)];
                let ly = -u[idx(i, j - 2)] + 16.0 * u[idx(i, j - 1)] - 30.0 * c + 16.0 * u[idx(i, j + 1)] - u[idx(i, j + 2)];
                out[idx(i, j)] = (lx + ly) / 12.0;
            }
        }
    };
    let sample = |u: &[f64]| -> Vec<f64> {
        points
            .iter()
            .map(|&(x, y)| {
                let fx = (x + half_width) / dx;
                let fy = (y + half_width) / dx;
                let (i0, j0) = (fx.floor() as usize - 1, fy.floor() as usize - 1);
                let w = |t: f64, a: usize| {
                    let mut l = 1.0;
                    for b in 0..4 {
                        if a != b {
                            l *= (t - b as f64) / (a as f64 - b as f64);
                        }
                    }
                    l
                };
                let mut s = 0.0;
                for a in 0..4 {
                    for b in 0..4 {
                        s += w(fx - i0 as f64, a) * w(fy - j0 as f64, b) * u[idx(i0 + a, j0 + b)];
                    }
                }
                s
            })
            .collect()
    };
    let mut prev: Vec<f64> = (0..m * m).map(|k| f(coord(k / m), coord(k % m))).collect();
    let mut l = vec![0.0; m * m];
    lap(&prev, &mut l);
    let mut cur: Vec<f64> = prev.iter().zip(&l).map(|(&u, &d)| u + 0.5 * c2 * d).collect();
    let mut out = vec![sample(&prev)];
    let mut step = 1;
    loop {
        if step % sub == 0 {
            out.push(sample(&cur));
            if out.len() > n_out {
                break;
            }
        }
        lap(&cur, &mut l);
        for k in 0..m * m {
            prev[k] = 2.0 * cur[k] - prev[k] + c2 * l[k];
        }
        std::mem::swap(&mut prev, &mut cur);
        step += 1;
    }
    out
}
