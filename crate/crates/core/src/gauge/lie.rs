//! Small dense helpers for `so(m)` and `SO(m)` on flat row-major `m×m` slices.

use crate::field::{Field, Shape, Structure};

/// Dimension `m(m−1)/2` of `so(m)`.
pub fn skew_dim(m: usize) -> usize {
    m * (m - 1) / 2
}

/// Index pairs `(p, q)`, `p < q`, of the basis `E_pq = e_p e_qᵀ − e_q e_pᵀ`.
pub fn basis_pairs(m: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(skew_dim(m));
    for p in 0..m {
        for q in p + 1..m {
            out.push((p, q));
        }
    }
    out
}

/// Coordinates `A_pq` (p < q) of the skew part of `a`.
pub fn to_coords(a: &[f64], m: usize, out: &mut [f64]) {
    let mut b = 0;
    for p in 0..m {
        for q in p + 1..m {
            out[b] = 0.5 * (a[p * m + q] - a[q * m + p]);
            b += 1;
        }
    }
}

pub fn from_coords(c: &[f64], m: usize, out: &mut [f64]) {
    out.iter_mut().for_each(|v| *v = 0.0);
    let mut b = 0;
    for p in 0..m {
        for q in p + 1..m {
            out[p * m + q] = c[b];
            out[q * m + p] = -c[b];
            b += 1;
        }
    }
}

pub fn matmul(a: &[f64], b: &[f64], m: usize, out: &mut [f64]) {
    for i in 0..m {
        for j in 0..m {
            let mut s = 0.0;
            for k in 0..m {
                s += a[i * m + k] * b[k * m + j];
            }
            out[i * m + j] = s;
        }
    }
}

/// `aᵀ b`.
pub fn matmul_tn(a: &[f64], b: &[f64], m: usize, out: &mut [f64]) {
    for i in 0..m {
        for j in 0..m {
            let mut s = 0.0;
            for k in 0..m {
                s += a[k * m + i] * b[k * m + j];
            }
            out[i * m + j] = s;
        }
    }
}

/// `aᵀ b a` for a rotation `a`, i.e. `a⁻¹ b a`.
pub fn conjugate(a: &[f64], b: &[f64], m: usize, out: &mut [f64]) {
    let mut tmp = vec![0.0; m * m];
    matmul_tn(a, b, m, &mut tmp);
    matmul(&tmp, a, m, out);
}

pub fn identity(m: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * m];
    for p in 0..m {
        out[p * m + p] = 1.0;
    }
    out
}

/// `(a − aᵀ)/2` in place.
pub fn skew_project(a: &mut [f64], m: usize) {
    for p in 0..m {
        a[p * m + p] = 0.0;
        for q in p + 1..m {
            let v = 0.5 * (a[p * m + q] - a[q * m + p]);
            a[p * m + q] = v;
            a[q * m + p] = -v;
        }
    }
}

fn one_norm(a: &[f64], m: usize) -> f64 {
    (0..m)
        .map(|j| (0..m).map(|i| a[i * m + j].abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Matrix exponential of a skew matrix: planar rotation for `m = 2`, Rodrigues for
/// `m = 3`, scaling and squaring with a 13-term Taylor series otherwise.
pub fn exp_skew_matrix(a: &[f64], m: usize) -> Vec<f64> {
    match m {
        1 => vec![1.0],
        2 => {
            let (s, c) = a[2].sin_cos();
            vec![c, -s, s, c]
        }
        3 => {
            // a = [[0, −w₃, w₂], [w₃, 0, −w₁], [−w₂, w₁, 0]]
            let w = [a[7], a[2], a[3]];
            let th2 = w[0] * w[0] + w[1] * w[1] + w[2] * w[2];
            let th = th2.sqrt();
            let (sa, sb) = if th < 1e-6 {
                (
                    1.0 - th2 / 6.0 + th2 * th2 / 120.0,
                    0.5 - th2 / 24.0 + th2 * th2 / 720.0,
                )
            } else {
                (th.sin() / th, (1.0 - th.cos()) / th2)
            };
            let mut k2 = vec![0.0; 9];
            matmul(a, a, 3, &mut k2);
            let mut out = identity(3);
            for i in 0..9 {
                out[i] += sa * a[i] + sb * k2[i];
            }
            out
        }
        _ => {
            let norm = one_norm(a, m);
            let squarings = if norm > 0.5 {
                (norm / 0.5).log2().ceil() as u32
            } else {
                0
            };
            let scale = 0.5f64.powi(squarings as i32);
            let x: Vec<f64> = a.iter().map(|v| v * scale).collect();
            let mut out = identity(m);
            let mut term = identity(m);
            let mut tmp = vec![0.0; m * m];
            for n in 1..=13 {
                matmul(&term, &x, m, &mut tmp);
                for (t, v) in term.iter_mut().zip(&tmp) {
                    *t = v / n as f64;
                }
                out.iter_mut().zip(&term).for_each(|(o, t)| *o += t);
            }
            for _ in 0..squarings {
                matmul(&out, &out, m, &mut tmp);
                out.copy_from_slice(&tmp);
            }
            out
        }
    }
}

/// Nodewise exponential of a skew field of shape `m×m×1`.
pub fn exp_skew(u: &Field) -> crate::Result<Field> {
    let sh = u.shape();
    if sh.rows != sh.cols || sh.spatial != 1 {
        return Err(crate::Error::ShapeMismatch {
            expected: "m×m×1".into(),
            found: sh.to_string(),
        });
    }
    if u.structure() != Structure::Skew {
        return Err(crate::Error::Structure("exp_skew needs a field tagged skew".into()));
    }
    let m = sh.rows;
    let mut data = Vec::with_capacity(u.data().len());
    for k in 0..u.grid().len() {
        data.extend(exp_skew_matrix(u.at(k), m));
    }
    Ok(Field::from_parts(
        u.grid().clone(),
        Shape::matrix(m),
        Structure::Rotation,
        data,
    ))
}

/// Matrix of `δ ↦ [f, δ]` on `so(m)` in the basis of [`basis_pairs`] (row-major
/// `k×k`).
pub fn ad_matrix(f: &[f64], m: usize) -> Vec<f64> {
    let k = skew_dim(m);
    let mut out = vec![0.0; k * k];
    let mut e = vec![0.0; m * m];
    let mut fe = vec![0.0; m * m];
    let mut ef = vec![0.0; m * m];
    let mut c = vec![0.0; k];
    for (b, &(p, q)) in basis_pairs(m).iter().enumerate() {
        e.iter_mut().for_each(|v| *v = 0.0);
        e[p * m + q] = 1.0;
        e[q * m + p] = -1.0;
        matmul(f, &e, m, &mut fe);
        matmul(&e, f, m, &mut ef);
        for (x, y) in fe.iter_mut().zip(&ef) {
            *x -= y;
        }
        to_coords(&fe, m, &mut c);
        for a in 0..k {
            out[a * k + b] = c[a];
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_skew(m: usize, scale: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let c: Vec<f64> = (0..skew_dim(m)).map(|_| scale * rng.gen_range(-1.0..1.0)).collect();
        let mut a = vec![0.0; m * m];
        from_coords(&c, m, &mut a);
        a
    }

    fn taylor(a: &[f64], m: usize, terms: usize) -> Vec<f64> {
        let mut out = identity(m);
        let mut term = identity(m);
        let mut tmp = vec![0.0; m * m];
        for n in 1..terms {
            matmul(&term, a, m, &mut tmp);
            for (t, v) in term.iter_mut().zip(&tmp) {
                *t = v / n as f64;
            }
            out.iter_mut().zip(&term).for_each(|(o, t)| *o += t);
        }
        out
    }

    #[test]
    fn zero_gives_identity() {
        for m in 2..6 {
            assert_eq!(exp_skew_matrix(&vec![0.0; m * m], m), identity(m));
        }
    }

    #[test]
    fn planar_rotation() {
        let th: f64 = 0.7;
        let e = exp_skew_matrix(&[0.0, -th, th, 0.0], 2);
        assert!((e[0] - th.cos()).abs() < 1e-15 && (e[2] - th.sin()).abs() < 1e-15);
    }

    #[test]
    fn closed_forms_match_series() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for m in [3, 4, 5] {
            for _ in 0..20 {
                let a = random_skew(m, 1.5, &mut rng);
                let e = exp_skew_matrix(&a, m);
                let t = taylor(&a, m, 30);
                let err = e.iter().zip(&t).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
                assert!(err < 1e-10, "m = {m}: {err:e}");
            }
        }
    }

    #[test]
    fn ad_matrix_matches_bracket() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = 4;
        let f = random_skew(m, 1.0, &mut rng);
        let d = random_skew(m, 1.0, &mut rng);
        let k = skew_dim(m);
        let mut dc = vec![0.0; k];
        to_coords(&d, m, &mut dc);
        let ad = ad_matrix(&f, m);
        let pred: Vec<f64> = (0..k).map(|a| (0..k).map(|b| ad[a * k + b] * dc[b]).sum()).collect();
        let (mut fd, mut df) = (vec![0.0; m * m], vec![0.0; m * m]);
        matmul(&f, &d, m, &mut fd);
        matmul(&d, &f, m, &mut df);
        let br: Vec<f64> = fd.iter().zip(&df).map(|(x, y)| x - y).collect();
        let mut bc = vec![0.0; k];
        to_coords(&br, m, &mut bc);
        for (x, y) in pred.iter().zip(&bc) {
            assert!((x - y).abs() < 1e-14);
        }
    }
}
