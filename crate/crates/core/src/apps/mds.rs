use std::io::Write;

use nalgebra::{DMatrix, RealField, SymmetricEigen};
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::proximity::ProximityMatrix;
use crate::scalar::Real;

/// Classical MDS coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Embedding<T = f64> {
    /// `n x d` coordinates, columns by decreasing eigenvalue.
    pub coords: Vec<Vec<T>>,
    /// Eigenvalues of the retained dimensions.
    pub eigenvalues: Vec<T>,
    /// Kruskal stress-1 of the embedded distances against the input ones.
    pub stress: T,
    pub requested_dims: usize,
    /// Set when fewer positive eigenvalues than requested dimensions exist.
    pub warning: Option<String>,
}

impl<T: Real> Embedding<T> {
    pub fn n_dims(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Rows of `row_id,dim1..dimd`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["row_id".to_string()];
        header.extend((1..=self.n_dims()).map(|k| format!("dim{k}")));
        w.write_record(&header)?;
        for (i, row) in self.coords.iter().enumerate() {
            let mut rec = vec![i.to_string()];
            rec.extend(row.iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io("<embedding>", e))
    }
}

/// Embeds a symmetric proximity matrix using distances `sqrt(1 - p)`, with
/// `1 - p` clipped at 0 and zero self-distance.
pub fn mds_embed<T: Real + RealField>(p: &ProximityMatrix<T>, dims: usize) -> Result<Embedding<T>> {
    if !p.is_square() {
        return Err(Error::shape("MDS needs a square proximity matrix"));
    }
    let n = p.n_rows();
    let dense = p.to_dense();
    let tol = T::of(1e-12);
    for i in 0..n {
        for j in 0..i {
            if Float::abs(dense[i][j] - dense[j][i]) > tol {
                return Err(Error::data(format!("proximity matrix is not symmetric at ({i}, {j})")));
            }
        }
    }
    let d: Vec<Vec<T>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    if i == j {
                        T::zero()
                    } else {
                        Float::sqrt(Float::max(T::one() - dense[i][j], T::zero()))
                    }
                })
                .collect()
        })
        .collect();
    classical_mds(&d, dims)
}

/// Torgerson scaling of a distance matrix: double-centre the squared
/// distances, keep the top `dims` positive eigenpairs and scale the
/// eigenvectors by the square roots of their eigenvalues.
pub fn classical_mds<T: Real + RealField>(distances: &[Vec<T>], dims: usize) -> Result<Embedding<T>> {
    if dims == 0 {
        return Err(Error::param("embedding dimension must be at least 1"));
    }
    let n = distances.len();
    if n == 0 || distances.iter().any(|r| r.len() != n) {
        return Err(Error::shape("distance matrix must be square and non-empty"));
    }
    let sq = DMatrix::from_fn(n, n, |i, j| distances[i][j] * distances[i][j]);
    let row_mean: Vec<T> = (0..n).map(|i| sq.row(i).sum() / T::of_usize(n)).collect();
    let grand = row_mean.iter().copied().sum::<T>() / T::of_usize(n);
    let half = T::of(0.5);
    let b = DMatrix::from_fn(n, n, |i, j| -half * (sq[(i, j)] - row_mean[i] - row_mean[j] + grand));

    let eig = SymmetricEigen::new(b);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &c| {
        eig.eigenvalues[c]
            .partial_cmp(&eig.eigenvalues[a])
            .expect("finite eigenvalues")
            .then(a.cmp(&c))
    });
    let top = order.first().map_or(T::zero(), |&k| Float::abs(eig.eigenvalues[k]));
    let cutoff = T::epsilon() * T::of_usize(n) * Float::max(top, T::one()) * T::of(10.0);
    let keep: Vec<usize> = order
        .into_iter()
        .filter(|&k| eig.eigenvalues[k] > cutoff)
        .take(dims)
        .collect();
    let warning = (keep.len() < dims).then(|| {
        let msg = format!("only {} positive eigenvalues for {} requested dimensions", keep.len(), dims);
        log::warn!("{msg}");
        msg
    });

    let mut coords = vec![Vec::with_capacity(keep.len()); n];
    let mut eigenvalues = Vec::with_capacity(keep.len());
    for &k in &keep {
        let lambda = eig.eigenvalues[k];
        let v = eig.eigenvectors.column(k);
        // sign: the entry of largest magnitude is positive
        let mut pivot = 0;
        for i in 1..n {
            if Float::abs(v[i]) > Float::abs(v[pivot]) {
                pivot = i;
            }
        }
        let sign = if v[pivot] < T::zero() { -T::one() } else { T::one() };
        let s = Float::sqrt(lambda) * sign;
        for i in 0..n {
            coords[i].push(v[i] * s);
        }
        eigenvalues.push(lambda);
    }

    let (mut num, mut den) = (T::zero(), T::zero());
    for i in 0..n {
        for j in (i + 1)..n {
            let e: T = coords[i].iter().zip(&coords[j]).map(|(a, b)| (*a - *b) * (*a - *b)).sum();
            let diff = distances[i][j] - Float::sqrt(e);
            num += diff * diff;
            den += distances[i][j] * distances[i][j];
        }
    }
    let stress = if den > T::zero() { Float::sqrt(num / den) } else { T::zero() };
    Ok(Embedding {
        coords,
        eigenvalues,
        stress,
        requested_dims: dims,
        warning,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::proximity::{DiagonalPolicy, Layout, ProximityKind};
    use proptest::prelude::*;

    fn dist(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
    }

    /// Orthogonal Procrustes residual of `y` onto `x` after centring both,
    /// for 2-D configurations (closed form for the optimal rotation or
    /// reflection).
    fn procrustes_2d(x: &[Vec<f64>], y: &[Vec<f64>]) -> f64 {
        let n = x.len() as f64;
        let centre = |p: &[Vec<f64>]| {
            let cx = p.iter().map(|r| r[0]).sum::<f64>() / n;
            let cy = p.iter().map(|r| r[1]).sum::<f64>() / n;
            p.iter().map(|r| [r[0] - cx, r[1] - cy]).collect::<Vec<_>>()
        };
        let (a, b) = (centre(x), centre(y));
        let mut best = f64::INFINITY;
        for reflect in [1.0, -1.0] {
            let b: Vec<[f64; 2]> = b.iter().map(|r| [r[0], reflect * r[1]]).collect();
            let (mut sxx, mut sxy) = (0.0, 0.0);
            for (p, q) in a.iter().zip(&b) {
                sxx += p[0] * q[0] + p[1] * q[1];
                sxy += p[1] * q[0] - p[0] * q[1];
            }
            let theta = sxy.atan2(sxx);
            let (s, c) = theta.sin_cos();
            let err: f64 = a
                .iter()
                .zip(&b)
                .map(|(p, q)| {
                    let r = [c * q[0] - s * q[1], s * q[0] + c * q[1]];
                    (p[0] - r[0]).powi(2) + (p[1] - r[1]).powi(2)
                })
                .sum();
            best = best.min(err.sqrt());
        }
        best
    }

    #[test]
    fn two_unrelated_points_sit_one_apart() {
        let p = ProximityMatrix::from_rows(
            ProximityKind::Gap,
            DiagonalPolicy::DuplicateOob,
            &[vec![1.0, 0.0], vec![0.0, 1.0]],
            Layout::Dense,
        )
        .unwrap();
        let e = mds_embed(&p, 2).unwrap();
        assert_eq!(e.n_dims(), 1);
        assert!(e.warning.is_some());
        assert!((dist(&e.coords[0], &e.coords[1]) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn class_blocks_collapse_to_points() {
        let mut rows = vec![vec![0.0; 6]; 6];
        for i in 0..6 {
            for j in 0..6 {
                rows[i][j] = if i / 3 == j / 3 { 1.0 } else { 0.0 };
            }
        }
        let p = ProximityMatrix::from_rows(ProximityKind::Gap, DiagonalPolicy::DuplicateOob, &rows, Layout::Dense).unwrap();
        let e = mds_embed(&p, 2).unwrap();
        assert!(dist(&e.coords[0], &e.coords[2]) < 1e-10);
        assert!((dist(&e.coords[0], &e.coords[4]) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn asymmetric_input_rejected() {
        let p = ProximityMatrix::from_rows(
            ProximityKind::Gap,
            DiagonalPolicy::Zeroed,
            &[vec![0.0, 0.4], vec![0.2, 0.0]],
            Layout::Dense,
        )
        .unwrap();
        assert!(mds_embed(&p, 1).is_err());
        assert!(classical_mds(&[vec![0.0]], 0).is_err());
    }

    #[test]
    fn embedding_csv_layout() {
        let e = classical_mds(&[vec![0.0, 3.0], vec![3.0, 0.0]], 1).unwrap();
        let mut out = Vec::new();
        e.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.starts_with("row_id,dim1\n0,"));
        assert_eq!(text.lines().count(), 3);
    }

    proptest! {
        #[test]
        fn planar_configuration_recovered_up_to_isometry(
            pts in proptest::collection::vec(proptest::collection::vec(-5.0f64..5.0, 2), 5)
        ) {
            // skip nearly collinear draws, which have a second eigenvalue at
            // round-off level
            let a = (pts[1][0] - pts[0][0]) * (pts[2][1] - pts[0][1]) - (pts[1][1] - pts[0][1]) * (pts[2][0] - pts[0][0]);
            prop_assume!(a.abs() > 1e-2);
            let d: Vec<Vec<f64>> = pts.iter().map(|p| pts.iter().map(|q| dist(p, q)).collect()).collect();
            let e = classical_mds(&d, 2).unwrap();
            prop_assert_eq!(e.n_dims(), 2);
            prop_assert!(e.eigenvalues[0] >= e.eigenvalues[1]);
            prop_assert!(procrustes_2d(&pts, &e.coords) < 1e-8);
            prop_assert!(e.stress < 1e-8);
        }
    }
}
