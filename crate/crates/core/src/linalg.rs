//! Dense symmetric positive-definite solves for the small systems the models need.

/// In-place lower Cholesky factor of `a` (only the lower triangle is read).
/// Returns the index of the first pivot at or below `min_pivot`.
pub(crate) fn cholesky(a: &mut [Vec<f64>], min_pivot: f64) -> Result<(), usize> {
    let n = a.len();
    for j in 0..n {
        let mut d = a[j][j];
        for k in 0..j {
            d -= a[j][k] * a[j][k];
        }
        if !(d > min_pivot) {
            return Err(j);
        }
        let d = d.sqrt();
        a[j][j] = d;
        for i in (j + 1)..n {
            let mut s = a[i][j];
            for k in 0..j {
                s -= a[i][k] * a[j][k];
            }
            a[i][j] = s / d;
        }
    }
    Ok(())
}

/// Solves `L Lᵀ x = b` given the factor from [`cholesky`].
pub(crate) fn cholesky_solve(l: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut y = b.to_vec();
    for i in 0..n {
        for k in 0..i {
            y[i] -= l[i][k] * y[k];
        }
        y[i] /= l[i][i];
    }
    for i in (0..n).rev() {
        for k in (i + 1)..n {
            y[i] -= l[k][i] * y[k];
        }
        y[i] /= l[i][i];
    }
    y
}

/// Solves `a x = b` for symmetric positive-definite `a`.
pub(crate) fn solve_spd(a: &[Vec<f64>], b: &[f64], min_pivot: f64) -> Result<Vec<f64>, usize> {
    let mut l = a.to_vec();
    cholesky(&mut l, min_pivot)?;
    Ok(cholesky_solve(&l, b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_small_system() {
        let a = vec![vec![4.0, 2.0], vec![2.0, 3.0]];
        let x = solve_spd(&a, &[2.0, 1.0], 0.0).unwrap();
        assert!((x[0] - 0.5).abs() < 1e-15 && x[1].abs() < 1e-15);
    }

    #[test]
    fn reports_singular_pivot() {
        let a = vec![vec![1.0, 1.0], vec![1.0, 1.0]];
        assert_eq!(solve_spd(&a, &[1.0, 1.0], 1e-12), Err(1));
    }
}
