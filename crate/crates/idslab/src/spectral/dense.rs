//! In-house dense symmetric/Hermitian eigenvalue solver: unitary Householder
//! reduction to a real tridiagonal form, then bisection on Sturm counts.
//! Serves as the oracle path; eigenvectors are never formed.

use crate::scalar::Scalar;

#[derive(Debug)]
pub(crate) struct BisectionStalled;

/// All eigenvalues of a full-storage Hermitian matrix, ascending.
pub(crate) fn eigenvalues_full<T: Scalar>(
    mut a: Vec<T>,
    n: usize,
) -> Result<Vec<f64>, BisectionStalled> {
    let (d, e) = householder_reduce(&mut a, n);
    tridiagonal_eigenvalues(&d, &e)
}

/// Reduce to tridiagonal form; returns the diagonal and the off-diagonal
/// magnitudes (a diagonal unitary similarity makes the off-diagonals real,
/// leaving the spectrum unchanged).
fn householder_reduce<T: Scalar>(a: &mut [T], n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut e = vec![0.0f64; n.saturating_sub(1)];
    let mut p = vec![T::ZERO; n];
    let mut w = vec![T::ZERO; n];
    for k in 0..n.saturating_sub(2) {
        let mut xnorm2 = 0.0f64;
        for i in k + 1..n {
            let m = a[i * n + k].abs();
            xnorm2 += m * m;
        }
        let xnorm = xnorm2.sqrt();
        e[k] = xnorm;
        if xnorm == 0.0 {
            continue;
        }
        let x0 = a[(k + 1) * n + k];
        let x0abs = x0.abs();
        let phase = if x0abs > 0.0 {
            x0.scale(1.0 / x0abs)
        } else {
            T::ONE
        };
        // v = x + phase * |x| * e1
        a[(k + 1) * n + k] = x0 + phase.scale(xnorm);
        let vnorm2 = 2.0 * xnorm * (xnorm + x0abs);
        let tau = 2.0 / vnorm2;
        // p = tau * A v on the trailing block
        for i in k + 1..n {
            let mut acc = T::ZERO;
            for j in k + 1..n {
                acc = acc + a[i * n + j] * a[j * n + k];
            }
            p[i] = acc.scale(tau);
        }
        // w = p - (tau/2) (v^H p) v
        let mut vhp = T::ZERO;
        for i in k + 1..n {
            vhp = vhp + a[i * n + k].conj() * p[i];
        }
        let kappa = vhp.scale(tau * 0.5);
        for i in k + 1..n {
            w[i] = p[i] - a[i * n + k] * kappa;
        }
        // A <- A - v w^H - w v^H on the trailing block
        for j in k + 1..n {
            let wj = w[j].conj();
            let vj = a[j * n + k].conj();
            for i in k + 1..n {
                let delta = a[i * n + k] * wj + w[i] * vj;
                a[i * n + j] = a[i * n + j] - delta;
            }
        }
    }
    if n >= 2 {
        e[n - 2] = a[(n - 1) * n + (n - 2)].abs();
    }
    let d = (0..n).map(|i| a[i * n + i].re()).collect();
    (d, e)
}

/// Negative-pivot count of the LDL^T Sturm recurrence at shift `sigma`.
fn sturm_count(d: &[f64], e2: &[f64], sigma: f64, pivmin: f64) -> usize {
    let mut cnt = 0usize;
    let mut q = d[0] - sigma;
    if q.abs() < pivmin {
        q = -pivmin;
    }
    if q < 0.0 {
        cnt += 1;
    }
    for i in 1..d.len() {
        q = (d[i] - sigma) - e2[i - 1] / q;
        if q.abs() < pivmin {
            q = -pivmin;
        }
        if q < 0.0 {
            cnt += 1;
        }
    }
    cnt
}

/// All eigenvalues of a real symmetric tridiagonal matrix, ascending, by
/// interval bisection on the Sturm count.
pub(crate) fn tridiagonal_eigenvalues(
    d: &[f64],
    e: &[f64],
) -> Result<Vec<f64>, BisectionStalled> {
    let n = d.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    let e2: Vec<f64> = e.iter().map(|x| x * x).collect();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        let left = if i > 0 { e[i - 1].abs() } else { 0.0 };
        let right = if i < n - 1 { e[i].abs() } else { 0.0 };
        lo = lo.min(d[i] - left - right);
        hi = hi.max(d[i] + left + right);
    }
    let span = (hi - lo).max(f64::MIN_POSITIVE);
    lo -= 2.0 * f64::EPSILON * span + f64::MIN_POSITIVE;
    hi += 2.0 * f64::EPSILON * span + f64::MIN_POSITIVE;
    let pivmin = e2
        .iter()
        .cloned()
        .fold(1.0f64, f64::max)
        .max(1.0)
        * f64::MIN_POSITIVE
        * 4.0;
    let tol_floor = f64::EPSILON * span / 256.0;

    let mut out = Vec::with_capacity(n);
    // stack of (lo, hi, count_lo, count_hi); left halves popped first
    let mut stack = vec![(lo, hi, 0usize, n)];
    let mut budget = 400usize * n + 1000;
    while let Some((a, b, ca, cb)) = stack.pop() {
        if cb == ca {
            continue;
        }
        let width = b - a;
        if width <= (4.0 * f64::EPSILON * a.abs().max(b.abs())).max(tol_floor) {
            let mid = 0.5 * (a + b);
            for _ in ca..cb {
                out.push(mid);
            }
            continue;
        }
        if budget == 0 {
            return Err(BisectionStalled);
        }
        budget -= 1;
        let mid = 0.5 * (a + b);
        let cm = sturm_count(d, &e2, mid, pivmin).clamp(ca, cb);
        stack.push((mid, b, cm, cb));
        stack.push((a, mid, ca, cm));
    }
    out.sort_by(f64::total_cmp);
    Ok(out)
}
