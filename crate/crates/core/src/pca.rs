//! Two-component PCA by power iteration with deflation, used to flatten
//! neuron weights for plotting.

use rand::Rng;

use crate::datagen::substream;
use crate::error::{GdmError, Result};

pub const TOLERANCE: f64 = 1e-9;
pub const MAX_ITERATIONS: usize = 10_000;

#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub coords: Vec<[f64; 2]>,
    pub components: [Vec<f64>; 2],
    pub eigenvalues: [f64; 2],
    /// Number of non-degenerate components found (0, 1 or 2).
    pub rank: usize,
    pub mean: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize(v: &mut [f64]) -> f64 {
    let n = dot(v, v).sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    n
}

/// Flips `v` so that its largest-magnitude entry is positive.
fn fix_sign(v: &mut [f64]) {
    let mut best = 0.0f64;
    let mut sign = 1.0;
    for &x in v.iter() {
        if x.abs() > best.abs() + 1e-12 {
            best = x;
            sign = x.signum();
        }
    }
    if sign < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

fn mat_vec(c: &[f64], d: usize, v: &[f64], out: &mut [f64]) {
    for (i, o) in out.iter_mut().enumerate() {
        *o = dot(&c[i * d..(i + 1) * d], v);
    }
}

/// Leading eigenvector of the symmetric matrix `c`, kept orthogonal to
/// `against`.
fn power_iteration(c: &[f64], d: usize, against: Option<&[f64]>, start: Vec<f64>) -> (Vec<f64>, f64) {
    let orth = |v: &mut Vec<f64>| {
        if let Some(u) = against {
            let p = dot(v, u);
            v.iter_mut().zip(u).for_each(|(x, y)| *x -= p * y);
        }
    };
    let mut v = start;
    orth(&mut v);
    if normalize(&mut v) == 0.0 {
        return (vec![0.0; d], 0.0);
    }
    let mut next = vec![0.0; d];
    for it in 0..MAX_ITERATIONS {
        mat_vec(c, d, &v, &mut next);
        orth(&mut next);
        if normalize(&mut next) == 0.0 {
            return (v, 0.0);
        }
        let same: f64 = v.iter().zip(&next).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let flipped: f64 = v.iter().zip(&next).map(|(a, b)| (a + b).powi(2)).sum::<f64>().sqrt();
        std::mem::swap(&mut v, &mut next);
        if same.min(flipped) < TOLERANCE {
            break;
        }
        if it + 1 == MAX_ITERATIONS {
            log::warn!("power iteration stopped after {MAX_ITERATIONS} iterations without converging");
        }
    }
    mat_vec(c, d, &v, &mut next);
    let lambda = dot(&v, &next);
    fix_sign(&mut v);
    (v, lambda.max(0.0))
}

/// Projects `rows` onto their top two principal components. A rank below
/// two yields zero coordinates for the missing components and a warning.
pub fn project(rows: &[&[f64]]) -> Result<Projection> {
    let n = rows.len();
    let d = rows.first().map(|r| r.len()).unwrap_or(0);
    if n == 0 || d == 0 {
        return Err(GdmError::Contract("projection needs at least one non-empty row".into()));
    }
    if let Some(r) = rows.iter().find(|r| r.len() != d) {
        return Err(GdmError::DimensionMismatch {
            expected: d,
            found: r.len(),
        });
    }
    let mut mean = vec![0.0; d];
    for r in rows {
        mean.iter_mut().zip(r.iter()).for_each(|(m, x)| *m += x / n as f64);
    }
    let centered: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| r.iter().zip(&mean).map(|(x, m)| x - m).collect())
        .collect();
    let mut cov = vec![0.0; d * d];
    for r in &centered {
        for i in 0..d {
            if r[i] == 0.0 {
                continue;
            }
            let row = &mut cov[i * d..(i + 1) * d];
            row.iter_mut().zip(r).for_each(|(c, x)| *c += r[i] * x);
        }
    }
    cov.iter_mut().for_each(|c| *c /= n as f64);
    let trace: f64 = (0..d).map(|i| cov[i * d + i]).sum();
    let eps = 1e-12 * trace.max(f64::MIN_POSITIVE);

    let mut rng = substream(0, 0x70_6361);
    let mut start = || (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect::<Vec<f64>>();
    let (v1, l1) = power_iteration(&cov, d, None, start());
    let mut rank = 0;
    let mut comps = [vec![0.0; d], vec![0.0; d]];
    let mut eig = [0.0; 2];
    if trace > 0.0 && l1 > eps {
        rank = 1;
        for i in 0..d {
            for j in 0..d {
                cov[i * d + j] -= l1 * v1[i] * v1[j];
            }
        }
        let (v2, l2) = power_iteration(&cov, d, Some(&v1), start());
        comps[0] = v1;
        eig[0] = l1;
        if l2 > eps {
            rank = 2;
            comps[1] = v2;
            eig[1] = l2;
        }
    }
    if rank < 2 {
        log::warn!("degenerate covariance (rank {rank}); missing components are reported as zeros");
    }
    let coords = centered.iter().map(|r| [dot(r, &comps[0]), dot(r, &comps[1])]).collect();
    Ok(Projection {
        coords,
        components: comps,
        eigenvalues: eig,
        rank,
        mean,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
        ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
    }

    #[test]
    fn planar_data_keeps_distances() {
        let pts: Vec<Vec<f64>> = vec![vec![0.0, 0.0], vec![3.0, 0.0], vec![0.0, 1.0], vec![2.0, 2.0], vec![-1.0, 0.5]];
        let rows: Vec<&[f64]> = pts.iter().map(|p| p.as_slice()).collect();
        let p = project(&rows).unwrap();
        assert_eq!(p.rank, 2);
        for i in 0..pts.len() {
            for j in 0..pts.len() {
                let orig = dist([pts[i][0], pts[i][1]], [pts[j][0], pts[j][1]]);
                assert!((dist(p.coords[i], p.coords[j]) - orig).abs() < 1e-6);
            }
        }
        assert!(p.eigenvalues[0] >= p.eigenvalues[1]);
    }

    #[test]
    fn identical_rows_collapse_to_origin() {
        let pts = vec![vec![1.0, 2.0, 3.0]; 4];
        let rows: Vec<&[f64]> = pts.iter().map(|p| p.as_slice()).collect();
        let p = project(&rows).unwrap();
        assert_eq!(p.rank, 0);
        assert!(p.coords.iter().all(|c| *c == [0.0, 0.0]));
    }

    #[test]
    fn collinear_rows_have_rank_one() {
        let pts: Vec<Vec<f64>> = (0..5).map(|i| vec![i as f64, 2.0 * i as f64, 0.0]).collect();
        let rows: Vec<&[f64]> = pts.iter().map(|p| p.as_slice()).collect();
        let p = project(&rows).unwrap();
        assert_eq!(p.rank, 1);
        assert!(p.coords.iter().all(|c| c[1] == 0.0));
        assert!(((p.coords[4][0] - p.coords[0][0]).abs() - 80f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn rejects_ragged_rows() {
        let a = [1.0, 2.0];
        let b = [1.0];
        assert!(project(&[&a, &b]).is_err());
        assert!(project(&[]).is_err());
    }

    proptest! {
        #[test]
        fn component_variance_is_ordered(pts in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 4), 6..20)) {
            let rows: Vec<&[f64]> = pts.iter().map(|p| p.as_slice()).collect();
            let p = project(&rows).unwrap();
            let n = pts.len() as f64;
            let var = |k: usize| p.coords.iter().map(|c| c[k] * c[k]).sum::<f64>() / n;
            let total: f64 = (0..4).map(|j| {
                pts.iter().map(|r| (r[j] - p.mean[j]).powi(2)).sum::<f64>() / n
            }).sum();
            prop_assert!(var(0) + 1e-6 >= var(1));
            // The larger of the two residual directions carries at least half
            // of the residual variance.
            let residual = total - var(0) - var(1);
            prop_assert!(residual / 2.0 <= var(1) + 1e-6);
            prop_assert!(dot(&p.components[0], &p.components[1]).abs() < 1e-6);
        }
    }
}
