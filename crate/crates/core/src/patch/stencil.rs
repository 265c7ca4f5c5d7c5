//! Central finite-difference stencils, sixth order, applied componentwise
//! to vector-valued functions of the parameter point.

use crate::error::Result;

/// Reach of every stencil here, in units of h.
pub(crate) const REACH: f64 = 3.0;

const FIRST: [(f64, f64); 6] = [
    (-3.0, -1.0),
    (-2.0, 9.0),
    (-1.0, -45.0),
    (1.0, 45.0),
    (2.0, -9.0),
    (3.0, 1.0),
];
const FIRST_SCALE: f64 = 60.0;
const SECOND: [(f64, f64); 7] = [
    (-3.0, 2.0),
    (-2.0, -27.0),
    (-1.0, 270.0),
    (0.0, -490.0),
    (1.0, 270.0),
    (2.0, -27.0),
    (3.0, 2.0),
];
const SECOND_SCALE: f64 = 180.0;

fn shift(u: &[f64], moves: &[(usize, f64)], h: f64) -> Vec<f64> {
    let mut v = u.to_vec();
    for &(axis, offset) in moves {
        v[axis] += offset * h;
    }
    v
}

fn accumulate(acc: &mut [f64], weight: f64, values: &[f64]) {
    for (a, v) in acc.iter_mut().zip(values) {
        *a += weight * v;
    }
}

/// ∂_i f for every axis i; result indexed `[axis][component]`.
pub(crate) fn first<F>(f: &F, u: &[f64], h: f64) -> Result<Vec<Vec<f64>>>
where
    F: Fn(&[f64]) -> Result<Vec<f64>> + ?Sized,
{
    (0..u.len())
        .map(|axis| {
            let mut acc: Vec<f64> = Vec::new();
            for &(off, w) in &FIRST {
                let val = f(&shift(u, &[(axis, off)], h))?;
                if acc.is_empty() {
                    acc = vec![0.0; val.len()];
                }
                accumulate(&mut acc, w, &val);
            }
            let scale = 1.0 / (FIRST_SCALE * h);
            Ok(acc.into_iter().map(|v| v * scale).collect())
        })
        .collect()
}

/// ∂_i∂_j f for every pair; result indexed `[i][j][component]`, symmetric.
pub(crate) fn second<F>(f: &F, u: &[f64], h: f64) -> Result<Vec<Vec<Vec<f64>>>>
where
    F: Fn(&[f64]) -> Result<Vec<f64>> + ?Sized,
{
    let n = u.len();
    let mut out = vec![vec![Vec::new(); n]; n];
    for i in 0..n {
        let mut acc: Vec<f64> = Vec::new();
        for &(off, w) in &SECOND {
            let val = f(&shift(u, &[(i, off)], h))?;
            if acc.is_empty() {
                acc = vec![0.0; val.len()];
            }
            accumulate(&mut acc, w, &val);
        }
        let scale = 1.0 / (SECOND_SCALE * h * h);
        out[i][i] = acc.into_iter().map(|v| v * scale).collect();
        for j in 0..i {
            let mut acc: Vec<f64> = Vec::new();
            for &(oi, wi) in &FIRST {
                for &(oj, wj) in &FIRST {
                    let val = f(&shift(u, &[(i, oi), (j, oj)], h))?;
                    if acc.is_empty() {
                        acc = vec![0.0; val.len()];
                    }
                    accumulate(&mut acc, wi * wj, &val);
                }
            }
            let scale = 1.0 / (FIRST_SCALE * FIRST_SCALE * h * h);
            let mixed: Vec<f64> = acc.into_iter().map(|v| v * scale).collect();
            out[i][j] = mixed.clone();
            out[j][i] = mixed;
        }
    }
    Ok(out)
}
