//! Dense linear-algebra helpers shared by the spectral and fiber code.

use nalgebra::{DMatrix, DVector};

use crate::error::{FoldError, Result};

/// Largest singular value.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .cloned()
        .fold(0.0, f64::max)
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
}

pub const EIGEN_MAX_ITER: usize = 10_000;

/// Full symmetric eigendecomposition with eigenvalues in ascending order.
pub fn symmetric_eigen_sorted(m: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let n = m.nrows();
    let sym = (m + m.transpose()) * 0.5;
    let eig = nalgebra::SymmetricEigen::try_new(sym, f64::EPSILON, EIGEN_MAX_ITER).ok_or_else(
        || {
            FoldError::Numeric(format!(
                "symmetric eigensolver did not converge within {EIGEN_MAX_ITER} iterations (n = {n})"
            ))
        },
    )?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::zeros(n, n);
    for (col, &i) in order.iter().enumerate() {
        vectors.set_column(col, &eig.eigenvectors.column(i));
    }
    Ok((values, vectors))
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn symmetric_min_eigenvalue(m: &DMatrix<f64>) -> Result<f64> {
    Ok(symmetric_eigen_sorted(m)?.0[0])
}

/// Smallest and largest eigenvalue of the symmetric part of `m`.
pub fn symmetric_extreme_eigenvalues(m: &DMatrix<f64>) -> (f64, f64) {
    let sym = (m + m.transpose()) * 0.5;
    sym.symmetric_eigenvalues()
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)))
}

/// Largest real part over the spectrum of a general matrix.
pub fn max_real_eigenvalue(m: &DMatrix<f64>) -> Result<f64> {
    let schur = nalgebra::Schur::try_new(m.clone(), f64::EPSILON, EIGEN_MAX_ITER).ok_or_else(|| {
        FoldError::Numeric(format!(
            "Schur iteration did not converge within {EIGEN_MAX_ITER} iterations"
        ))
    })?;
    Ok(schur
        .complex_eigenvalues()
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max))
}

/// Flip the sign of `v` so that its largest-magnitude entry is positive.
pub fn sign_normalize(v: &mut DVector<f64>) {
    let mut best = 0.0_f64;
    let mut sign = 1.0;
    for x in v.iter() {
        if x.abs() > best {
            best = x.abs();
            sign = x.signum();
        }
    }
    if sign < 0.0 {
        v.neg_mut();
    }
}

/// Right singular vector of the smallest singular value.
pub fn null_vector(m: &DMatrix<f64>) -> DVector<f64> {
    let n = m.ncols();
    let svd = m.clone().svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let (idx, _) = svd
        .singular_values
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |(bi, bv), (i, &s)| {
            if s < bv {
                (i, s)
            } else {
                (bi, bv)
            }
        });
    let mut v = DVector::from_iterator(n, v_t.row(idx).iter().cloned());
    let norm = v.norm();
    v /= norm;
    v
}

pub fn is_symmetric(m: &DMatrix<f64>, rel_tol: f64) -> bool {
    if !m.is_square() {
        return false;
    }
    let scale = max_abs(m);
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            if (m[(i, j)] - m[(j, i)]).abs() > rel_tol * scale {
                return false;
            }
        }
    }
    true
}

/// All off-diagonal entries nonnegative.
pub fn is_metzler(m: &DMatrix<f64>) -> bool {
    let n = m.nrows();
    (0..n).all(|i| (0..n).all(|j| i == j || m[(i, j)] >= 0.0))
}

/// All off-diagonal entries nonpositive.
pub fn is_z_matrix(m: &DMatrix<f64>) -> bool {
    let n = m.nrows();
    (0..n).all(|i| (0..n).all(|j| i == j || m[(i, j)] <= 0.0))
}

/// Boolean reachability closure of the directed graph with an edge `i -> j`
/// whenever `i != j` and `m[(i, j)] > 0`. The diagonal is always reachable.
pub fn reachability(m: &DMatrix<f64>) -> Vec<Vec<bool>> {
    let n = m.nrows();
    let mut reach = vec![vec![false; n]; n];
    for start in 0..n {
        let mut stack = vec![start];
        reach[start][start] = true;
        while let Some(i) = stack.pop() {
            for j in 0..n {
                if i != j && m[(i, j)] > 0.0 && !reach[start][j] {
                    reach[start][j] = true;
                    stack.push(j);
                }
            }
        }
    }
    reach
}

/// Strong connectivity of the off-diagonal positive pattern.
pub fn is_irreducible(m: &DMatrix<f64>) -> bool {
    reachability(m).iter().all(|row| row.iter().all(|&b| b))
}

/// Smallest `k` for which the nonnegative matrix `m` has `m^k > 0`
/// entrywise, searched up to the Wielandt bound `(n-1)^2 + 1`.
pub fn primitivity_exponent(m: &DMatrix<f64>) -> Option<usize> {
    let n = m.nrows();
    if n == 0 {
        return None;
    }
    let base: Vec<Vec<bool>> = (0..n)
        .map(|i| (0..n).map(|j| m[(i, j)] > 0.0).collect())
        .collect();
    let bound = (n - 1) * (n - 1) + 1;
    let mut power = base.clone();
    for k in 1..=bound {
        if power.iter().all(|row| row.iter().all(|&b| b)) {
            return Some(k);
        }
        let mut next = vec![vec![false; n]; n];
        for i in 0..n {
            for l in 0..n {
                if power[i][l] {
                    for j in 0..n {
                        if base[l][j] {
                            next[i][j] = true;
                        }
                    }
                }
            }
        }
        if next == power {
            return None;
        }
        power = next;
    }
    None
}

/// `exp(a)` by scaling and squaring with diagonal Padé approximants
/// (Higham 2005 degree selection).
pub fn expm(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    if n == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    if !a.iter().all(|x| x.is_finite()) {
        return Err(FoldError::Numeric("non-finite matrix in exponential".into()));
    }
    let norm1 = (0..n)
        .map(|j| a.column(j).iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max);

    const THETA: [(usize, f64); 4] = [
        (3, 1.495585217958292e-2),
        (5, 2.539398330063230e-1),
        (7, 9.504178996162932e-1),
        (9, 2.097847961257068),
    ];
    for &(m, theta) in THETA.iter() {
        if norm1 <= theta {
            return pade_exp(a, m);
        }
    }
    let theta13 = 5.371920351148152;
    let s = ((norm1 / theta13).log2().ceil()).max(0.0) as i32;
    let scaled = a / 2f64.powi(s);
    let mut r = pade_exp(&scaled, 13)?;
    for _ in 0..s {
        r = &r * &r;
    }
    if !r.iter().all(|x| x.is_finite()) {
        return Err(FoldError::Numeric(
            "matrix exponential overflowed; use a smaller time".into(),
        ));
    }
    Ok(r)
}

fn pade_coefficients(m: usize) -> &'static [f64] {
    match m {
        3 => &[120.0, 60.0, 12.0, 1.0],
        5 => &[30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0],
        7 => &[
            17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0,
        ],
        9 => &[
            17643225600.0,
            8821612800.0,
            2075673600.0,
            302702400.0,
            30270240.0,
            2162160.0,
            110880.0,
            3960.0,
            90.0,
            1.0,
        ],
        _ => &[
            64764752532480000.0,
            32382376266240000.0,
            7771770303897600.0,
            1187353796428800.0,
            129060195264000.0,
            10559470521600.0,
            670442572800.0,
            33522128640.0,
            1323241920.0,
            40840800.0,
            960960.0,
            16380.0,
            182.0,
            1.0,
        ],
    }
}

fn pade_exp(a: &DMatrix<f64>, m: usize) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    let b = pade_coefficients(m);
    let ident = DMatrix::<f64>::identity(n, n);
    let a2 = a * a;
    let (u, v) = if m < 13 {
        // even powers a^0, a^2, ..., a^(m-1)
        let mut powers = vec![ident.clone(), a2.clone()];
        while powers.len() < m.div_ceil(2) {
            let next = powers.last().unwrap() * &a2;
            powers.push(next);
        }
        let mut u_inner = DMatrix::zeros(n, n);
        let mut v = DMatrix::zeros(n, n);
        for (k, p) in powers.iter().enumerate() {
            u_inner += p * b[2 * k + 1];
            v += p * b[2 * k];
        }
        (a * u_inner, v)
    } else {
        let a4 = &a2 * &a2;
        let a6 = &a4 * &a2;
        let u_inner = &a6 * (&a6 * b[13] + &a4 * b[11] + &a2 * b[9])
            + &a6 * b[7]
            + &a4 * b[5]
            + &a2 * b[3]
            + &ident * b[1];
        let u = a * u_inner;
        let v = &a6 * (&a6 * b[12] + &a4 * b[10] + &a2 * b[8])
            + &a6 * b[6]
            + &a4 * b[4]
            + &a2 * b[2]
            + &ident * b[0];
        (u, v)
    };
    let denom = &v - &u;
    let numer = &v + &u;
    denom
        .lu()
        .solve(&numer)
        .ok_or_else(|| FoldError::Numeric("singular Padé denominator".into()))
}

/// `exp(t a)` for a Metzler matrix `a`, computed without cancellation.
///
/// With `c = min_i a_ii`, `a - cI` is entrywise nonnegative, so every
/// Taylor term and every squaring step adds nonnegative quantities and each
/// entry keeps a small relative error (down to underflow).
pub fn metzler_exp(a: &DMatrix<f64>, t: f64) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    if !is_metzler(a) {
        return Err(FoldError::Usage("metzler_exp needs nonnegative off-diagonals".into()));
    }
    if n == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    let c = (0..n).map(|i| a[(i, i)]).fold(f64::INFINITY, f64::min);
    let mut nonneg = a.clone();
    for i in 0..n {
        nonneg[(i, i)] -= c;
    }
    let norm1 = (0..n)
        .map(|j| nonneg.column(j).iter().sum::<f64>())
        .fold(0.0, f64::max)
        * t;
    let s = if norm1 > 0.5 {
        (norm1 / 0.5).log2().ceil() as i32
    } else {
        0
    };
    let tau = t / 2f64.powi(s);
    let step = &nonneg * tau;
    let mut term = DMatrix::<f64>::identity(n, n);
    let mut sum = term.clone();
    for k in 1..40 {
        term = &term * &step / k as f64;
        sum += &term;
        if max_abs(&term) <= f64::EPSILON * 1e-3 * max_abs(&sum) {
            break;
        }
    }
    let mut r = sum * (tau * c).exp();
    for _ in 0..s {
        r = &r * &r;
    }
    if !r.iter().all(|x| x.is_finite()) {
        return Err(FoldError::Numeric(
            "matrix exponential overflowed; use a smaller time".into(),
        ));
    }
    Ok(r)
}

/// Accurate ground state of a symmetric Z-matrix (nonpositive off-diagonals)
/// by shifted inverse iteration with a pivot-free LU.
///
/// For a shift strictly below the smallest eigenvalue, `m - shift I` is a
/// nonsingular M-matrix: its elimination only ever adds magnitudes in the
/// triangular solves, so a positive right-hand side produces a positive
/// solution with small entrywise relative error.
pub fn z_matrix_ground_state(
    m: &DMatrix<f64>,
    lambda_min: f64,
    gap: f64,
) -> Option<DVector<f64>> {
    let n = m.nrows();
    if n == 0 || !is_z_matrix(m) || !(gap > 0.0) || !is_irreducible(&(-m)) {
        return None;
    }
    let shift = lambda_min - 0.5 * gap;
    let mut lu = m.clone();
    for i in 0..n {
        lu[(i, i)] -= shift;
    }
    // Doolittle without pivoting; L stored strictly below the diagonal.
    for k in 0..n {
        let pivot = lu[(k, k)];
        if !(pivot > 0.0) {
            return None;
        }
        for i in (k + 1)..n {
            let l = lu[(i, k)] / pivot;
            if l == 0.0 {
                continue;
            }
            lu[(i, k)] = l;
            for j in (k + 1)..n {
                let ukj = lu[(k, j)];
                if ukj != 0.0 {
                    lu[(i, j)] -= l * ukj;
                }
            }
        }
    }
    let solve = |b: &DVector<f64>| -> DVector<f64> {
        let mut y = b.clone();
        for i in 0..n {
            let mut acc = y[i];
            for j in 0..i {
                acc -= lu[(i, j)] * y[j];
            }
            y[i] = acc;
        }
        for i in (0..n).rev() {
            let mut acc = y[i];
            for j in (i + 1)..n {
                acc -= lu[(i, j)] * y[j];
            }
            y[i] = acc / lu[(i, i)];
        }
        y
    };
    let mut x = DVector::from_element(n, 1.0 / (n as f64).sqrt());
    for _ in 0..500 {
        let mut next = solve(&x);
        let norm = next.norm();
        if !norm.is_finite() || norm == 0.0 {
            return None;
        }
        next /= norm;
        let change = x
            .iter()
            .zip(next.iter())
            .map(|(a, b)| ((a - b) / b.abs().max(f64::MIN_POSITIVE)).abs())
            .fold(0.0, f64::max);
        x = next;
        if change < 1e-14 {
            return Some(x);
        }
    }
    None
}

/// Gauss–Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre(count: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = Vec::with_capacity(count);
    let mut weights = Vec::with_capacity(count);
    let nf = count as f64;
    for i in 0..count {
        // Chebyshev-like initial guess, then Newton on P_n.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=count {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = nf * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes.push(0.5 * (1.0 - x));
        weights.push(0.5 * w);
    }
    (nodes, weights)
}

/// Orthonormal basis (n x (n-1)) of the hyperplane `{x : <normal, x> = 0}`.
pub fn hyperplane_basis(normal: &DVector<f64>) -> DMatrix<f64> {
    let n = normal.len();
    if n <= 1 {
        return DMatrix::zeros(n, 0);
    }
    let unit = normal / normal.norm();
    // Householder reflector mapping e_k to ±unit; its other columns span the complement.
    let k = unit.iamax();
    let sign = if unit[k] >= 0.0 { 1.0 } else { -1.0 };
    let mut v = unit.clone() * sign;
    v[k] += 1.0;
    let vnorm2 = v.norm_squared();
    let h = DMatrix::<f64>::identity(n, n) - (&v * v.transpose()) * (2.0 / vnorm2);
    let mut basis = DMatrix::zeros(n, n - 1);
    let mut col = 0;
    for j in 0..n {
        if j != k {
            basis.set_column(col, &h.column(j));
            col += 1;
        }
    }
    basis
}
