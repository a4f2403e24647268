//! Eigenvalue counting below a shift via block LDL^H factorization.
//!
//! The band is eliminated block by block; by inertia additivity over Schur
//! complements the number of negative pivots equals the number of
//! eigenvalues below the shift. Pivoting is Bunch–Kaufman with 1x1/2x2
//! pivots, confined to the current diagonal block.

use crate::assembly::BandedHermitian;
use crate::scalar::Scalar;

#[derive(Debug)]
pub(crate) struct Singular;

const BK_ALPHA: f64 = 0.640_388_203_202_207_6; // (1 + sqrt(17)) / 8

pub(crate) fn singular_tol(scale: f64, sigma: f64) -> f64 {
    1e-14 * (scale + sigma.abs()).max(1.0)
}

/// #{eigenvalues of A strictly below `sigma`}.
pub(crate) fn count_below<T: Scalar>(
    a: &BandedHermitian<T>,
    sigma: f64,
) -> Result<usize, Singular> {
    let n = a.n();
    if n == 0 {
        return Ok(0);
    }
    let tol = singular_tol(a.scale(), sigma);
    if a.bandwidth() <= 1 {
        count_tridiagonal(a, sigma, tol)
    } else {
        count_block(a, sigma, tol)
    }
}

fn count_tridiagonal<T: Scalar>(
    a: &BandedHermitian<T>,
    sigma: f64,
    tol: f64,
) -> Result<usize, Singular> {
    let n = a.n();
    let diag = a.band(0);
    let off = if a.bandwidth() >= 1 { Some(a.band(1)) } else { None };
    let mut neg = 0usize;
    let mut q = diag[0].re() - sigma;
    if q.abs() < tol || !q.is_finite() {
        return Err(Singular);
    }
    if q < 0.0 {
        neg += 1;
    }
    for i in 1..n {
        let e2 = match off {
            Some(e) => {
                let m = e[i - 1].abs();
                m * m
            }
            None => 0.0,
        };
        q = (diag[i].re() - sigma) - e2 / q;
        if q.abs() < tol || !q.is_finite() {
            return Err(Singular);
        }
        if q < 0.0 {
            neg += 1;
        }
    }
    Ok(neg)
}

fn fill_block<T: Scalar>(a: &BandedHermitian<T>, base: usize, bs: usize, sigma: f64, out: &mut [T]) {
    for r in 0..bs {
        for c in 0..bs {
            let mut v = a.get(base + r, base + c);
            if r == c {
                v = v - T::from_re(sigma);
            }
            out[r * bs + c] = v;
        }
    }
}

fn hermitize<T: Scalar>(m: &mut [T], n: usize) {
    for r in 0..n {
        for c in 0..r {
            let avg = (m[r * n + c] + m[c * n + r].conj()).scale(0.5);
            m[r * n + c] = avg;
            m[c * n + r] = avg.conj();
        }
        m[r * n + r] = T::from_re(m[r * n + r].re());
    }
}

fn count_block<T: Scalar>(
    a: &BandedHermitian<T>,
    sigma: f64,
    tol: f64,
) -> Result<usize, Singular> {
    let n = a.n();
    let b = a.bandwidth();
    let mut neg = 0usize;

    let mut bs = b.min(n);
    let mut s = vec![T::ZERO; bs * bs];
    fill_block(a, 0, bs, sigma, &mut s);

    let mut steps: Vec<PivStep> = Vec::with_capacity(b);
    let mut bmat: Vec<T> = Vec::new();
    let mut rhs: Vec<T> = Vec::new();
    let mut next: Vec<T> = Vec::new();

    let mut base = 0usize;
    loop {
        steps.clear();
        neg += bk_factor(&mut s, bs, tol, &mut steps)?;
        let base2 = base + bs;
        if base2 >= n {
            break;
        }
        let bs2 = b.min(n - base2);
        bmat.clear();
        bmat.resize(bs2 * bs, T::ZERO);
        for r in 0..bs2 {
            for c in 0..bs {
                bmat[r * bs + c] = a.get(base2 + r, base + c);
            }
        }
        rhs.clear();
        rhs.resize(bs * bs2, T::ZERO);
        for r in 0..bs2 {
            for c in 0..bs {
                rhs[c * bs2 + r] = bmat[r * bs + c].conj();
            }
        }
        bk_solve(&s, bs, &steps, &mut rhs, bs2);
        next.clear();
        next.resize(bs2 * bs2, T::ZERO);
        fill_block(a, base2, bs2, sigma, &mut next);
        for r in 0..bs2 {
            for p in 0..bs {
                let f = bmat[r * bs + p];
                if f != T::ZERO {
                    for c in 0..bs2 {
                        let delta = f * rhs[p * bs2 + c];
                        next[r * bs2 + c] = next[r * bs2 + c] - delta;
                    }
                }
            }
        }
        hermitize(&mut next, bs2);
        std::mem::swap(&mut s, &mut next);
        bs = bs2;
        base = base2;
    }
    Ok(neg)
}

struct PivStep {
    swap: usize,
    two: bool,
}

fn swap_sym<T: Scalar>(a: &mut [T], n: usize, i: usize, j: usize) {
    if i == j {
        return;
    }
    for c in 0..n {
        a.swap(i * n + c, j * n + c);
    }
    for r in 0..n {
        a.swap(r * n + i, r * n + j);
    }
}

/// Bunch–Kaufman factorization of a full-storage Hermitian block; returns
/// the number of negative pivot eigenvalues, leaves L and D in place and the
/// interchange record in `steps`.
fn bk_factor<T: Scalar>(
    a: &mut [T],
    n: usize,
    tol: f64,
    steps: &mut Vec<PivStep>,
) -> Result<usize, Singular> {
    let mut neg = 0usize;
    let mut k = 0usize;
    let mut w1s: Vec<T> = Vec::new();
    let mut w2s: Vec<T> = Vec::new();
    while k < n {
        let akk = a[k * n + k].re();
        let mut colmax = 0.0f64;
        let mut r = k;
        for i in k + 1..n {
            let m = a[i * n + k].abs();
            if m > colmax {
                colmax = m;
                r = i;
            }
        }
        let mut two = false;
        let mut swap = k;
        if akk.abs() < BK_ALPHA * colmax {
            let mut rowmax = 0.0f64;
            for j in k..n {
                if j != r {
                    rowmax = rowmax.max(a[r * n + j].abs());
                }
            }
            if akk.abs() * rowmax >= BK_ALPHA * colmax * colmax {
                // keep the 1x1 pivot at k
            } else if a[r * n + r].re().abs() >= BK_ALPHA * rowmax {
                swap = r;
            } else {
                two = true;
                swap = r;
            }
        }
        if !two {
            swap_sym(a, n, k, swap);
            steps.push(PivStep { swap, two: false });
            let d = a[k * n + k].re();
            if d.abs() < tol || !d.is_finite() {
                return Err(Singular);
            }
            if d < 0.0 {
                neg += 1;
            }
            let inv = 1.0 / d;
            for j in k + 1..n {
                let f = a[j * n + k].conj().scale(inv);
                if f != T::ZERO {
                    for i in k + 1..n {
                        let delta = a[i * n + k] * f;
                        a[i * n + j] = a[i * n + j] - delta;
                    }
                }
            }
            for i in k + 1..n {
                a[i * n + k] = a[i * n + k].scale(inv);
            }
            k += 1;
        } else {
            swap_sym(a, n, k + 1, swap);
            steps.push(PivStep { swap, two: true });
            let pa = a[k * n + k].re();
            let pc = a[(k + 1) * n + k + 1].re();
            let pb = a[(k + 1) * n + k];
            let det = pa * pc - pb.abs() * pb.abs();
            let blockscale = pa.abs().max(pc.abs()).max(pb.abs());
            if det.abs() < tol * blockscale.max(tol) || !det.is_finite() {
                return Err(Singular);
            }
            if det < 0.0 {
                neg += 1;
            } else if pa + pc < 0.0 {
                neg += 2;
            }
            let inv_det = 1.0 / det;
            w1s.clear();
            w2s.clear();
            w1s.extend((k + 2..n).map(|i| a[i * n + k]));
            w2s.extend((k + 2..n).map(|i| a[i * n + k + 1]));
            for (off, i) in (k + 2..n).enumerate() {
                let w1 = w1s[off];
                let w2 = w2s[off];
                a[i * n + k] = (w1.scale(pc) - w2 * pb).scale(inv_det);
                a[i * n + k + 1] = (w2.scale(pa) - w1 * pb.conj()).scale(inv_det);
            }
            for (joff, j) in (k + 2..n).enumerate() {
                let c1 = w1s[joff].conj();
                let c2 = w2s[joff].conj();
                for i in k + 2..n {
                    let delta = a[i * n + k] * c1 + a[i * n + k + 1] * c2;
                    a[i * n + j] = a[i * n + j] - delta;
                }
            }
            k += 2;
        }
    }
    Ok(neg)
}

/// Solve `A X = RHS` for the full-storage factorization produced by
/// `bk_factor`. `rhs` is n x m row-major and overwritten with X.
///
/// The factorization applies full symmetric interchanges, so the identity is
/// `P A P^T = L D L^H` with one aggregate permutation: apply every recorded
/// swap up front, substitute, and undo the swaps in reverse order.
fn bk_solve<T: Scalar>(a: &[T], n: usize, steps: &[PivStep], rhs: &mut [T], m: usize) {
    let swap_rows = |rhs: &mut [T], i: usize, j: usize| {
        if i != j {
            for c in 0..m {
                rhs.swap(i * m + c, j * m + c);
            }
        }
    };

    // P
    let mut k = 0usize;
    for step in steps {
        let pos = if step.two { k + 1 } else { k };
        swap_rows(rhs, pos, step.swap);
        k += if step.two { 2 } else { 1 };
    }

    // L forward substitution
    let mut k = 0usize;
    for step in steps {
        if !step.two {
            for i in k + 1..n {
                let l = a[i * n + k];
                if l != T::ZERO {
                    for c in 0..m {
                        let delta = l * rhs[k * m + c];
                        rhs[i * m + c] = rhs[i * m + c] - delta;
                    }
                }
            }
            k += 1;
        } else {
            for i in k + 2..n {
                let l1 = a[i * n + k];
                let l2 = a[i * n + k + 1];
                for c in 0..m {
                    let delta = l1 * rhs[k * m + c] + l2 * rhs[(k + 1) * m + c];
                    rhs[i * m + c] = rhs[i * m + c] - delta;
                }
            }
            k += 2;
        }
    }

    // block-diagonal solve
    let mut k = 0usize;
    for step in steps {
        if !step.two {
            let inv = 1.0 / a[k * n + k].re();
            for c in 0..m {
                rhs[k * m + c] = rhs[k * m + c].scale(inv);
            }
            k += 1;
        } else {
            let pa = a[k * n + k].re();
            let pc = a[(k + 1) * n + k + 1].re();
            let pb = a[(k + 1) * n + k];
            let inv_det = 1.0 / (pa * pc - pb.abs() * pb.abs());
            for c in 0..m {
                let r1 = rhs[k * m + c];
                let r2 = rhs[(k + 1) * m + c];
                rhs[k * m + c] = (r1.scale(pc) - pb.conj() * r2).scale(inv_det);
                rhs[(k + 1) * m + c] = (r2.scale(pa) - pb * r1).scale(inv_det);
            }
            k += 2;
        }
    }

    // L^H backward substitution
    let mut k = steps.iter().map(|s| if s.two { 2 } else { 1 }).sum::<usize>();
    for step in steps.iter().rev() {
        if !step.two {
            k -= 1;
            for i in k + 1..n {
                let l = a[i * n + k].conj();
                if l != T::ZERO {
                    for c in 0..m {
                        let delta = l * rhs[i * m + c];
                        rhs[k * m + c] = rhs[k * m + c] - delta;
                    }
                }
            }
        } else {
            k -= 2;
            for i in k + 2..n {
                let l1 = a[i * n + k].conj();
                let l2 = a[i * n + k + 1].conj();
                for c in 0..m {
                    let d1 = l1 * rhs[i * m + c];
                    let d2 = l2 * rhs[i * m + c];
                    rhs[k * m + c] = rhs[k * m + c] - d1;
                    rhs[(k + 1) * m + c] = rhs[(k + 1) * m + c] - d2;
                }
            }
        }
    }

    // P^T
    let mut k = steps.iter().map(|s| if s.two { 2 } else { 1 }).sum::<usize>();
    for step in steps.iter().rev() {
        k -= if step.two { 2 } else { 1 };
        let pos = if step.two { k + 1 } else { k };
        swap_rows(rhs, pos, step.swap);
    }
}
