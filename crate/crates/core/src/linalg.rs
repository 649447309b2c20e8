//! Small dense linear-algebra helpers (row-major `Vec<Vec<f64>>`).

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
///
/// Returns `None` when a pivot falls below `tol` times the largest entry of `a`.
pub fn solve(a: &[Vec<f64>], b: &[f64], tol: f64) -> Option<Vec<f64>> {
    let n = a.len();
    debug_assert_eq!(b.len(), n);
    let scale = a
        .iter()
        .flat_map(|r| r.iter())
        .fold(0.0_f64, |m, v| m.max(v.abs()));
    if n == 0 {
        return Some(Vec::new());
    }
    if scale == 0.0 {
        return None;
    }
    let mut m: Vec<Vec<f64>> = a
        .iter()
        .zip(b)
        .map(|(row, &rhs)| {
            let mut r = row.clone();
            r.push(rhs);
            r
        })
        .collect();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))
            .unwrap();
        if m[piv][col].abs() <= tol * scale {
            return None;
        }
        m.swap(col, piv);
        for r in col + 1..n {
            let f = m[r][col] / m[col][col];
            if f != 0.0 {
                for c in col..=n {
                    m[r][c] -= f * m[col][c];
                }
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let mut s = m[r][n];
        for c in r + 1..n {
            s -= m[r][c] * x[c];
        }
        x[r] = s / m[r][r];
    }
    Some(x)
}

/// Numeric rank by row echelon reduction with full pivoting.
pub fn rank(a: &[Vec<f64>], rel_tol: f64) -> usize {
    let rows = a.len();
    if rows == 0 {
        return 0;
    }
    let cols = a[0].len();
    let scale = a
        .iter()
        .flat_map(|r| r.iter())
        .fold(0.0_f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return 0;
    }
    let mut m = a.to_vec();
    let mut rank = 0;
    let mut used_cols = vec![false; cols];
    for r in 0..rows.min(cols) {
        let mut best = (0.0, 0, 0);
        for (i, row) in m.iter().enumerate().skip(r) {
            for (j, v) in row.iter().enumerate() {
                if !used_cols[j] && v.abs() > best.0 {
                    best = (v.abs(), i, j);
                }
            }
        }
        if best.0 <= rel_tol * scale {
            break;
        }
        let (_, pi, pj) = best;
        m.swap(r, pi);
        used_cols[pj] = true;
        for i in r + 1..rows {
            let f = m[i][pj] / m[r][pj];
            if f != 0.0 {
                for j in 0..cols {
                    m[i][j] -= f * m[r][j];
                }
            }
        }
        rank += 1;
    }
    rank
}

pub fn transpose(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    if a.is_empty() {
        return Vec::new();
    }
    (0..a[0].len())
        .map(|j| a.iter().map(|r| r[j]).collect())
        .collect()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_small_system() {
        let a = vec![vec![0.4, 0.6], vec![0.6, 0.4]];
        let x = solve(&a, &[1.2, 2.0], 1e-14).unwrap();
        assert!((x[0] - 3.6).abs() < 1e-12);
        assert!((x[1] + 0.4).abs() < 1e-12);
    }

    #[test]
    fn singular_system_is_rejected() {
        let a = vec![vec![1.0, 2.0], vec![2.0, 4.0]];
        assert!(solve(&a, &[1.0, 2.0], 1e-12).is_none());
        assert_eq!(rank(&a, 1e-12), 1);
    }

    #[test]
    fn rank_of_identity() {
        let a = vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]];
        assert_eq!(rank(&a, 1e-12), 2);
        assert_eq!(rank(&transpose(&a), 1e-12), 2);
    }
}
