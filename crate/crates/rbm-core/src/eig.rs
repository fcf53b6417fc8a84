//! Thin safe wrappers over the LAPACK routines this crate needs: Hermitian
//! eigenvalues (zheev), general complex eigenpairs (zgeev) and dense linear
//! solves (zgesv). All public entry points take row-major matrices and handle
//! the column-major conversion internally.

use crate::error::{Error, Result};
use crate::C64;

/// Eigenvalues of an n×n Hermitian matrix, ascending. Consumes the buffer
/// (LAPACK overwrites it). Only the eigenvalues are computed.
pub fn eigvals_hermitian(mut a: Vec<C64>, n: usize) -> Result<Vec<f64>> {
    assert_eq!(a.len(), n * n);
    if n == 0 {
        return Ok(Vec::new());
    }
    // Row-major Hermitian A presents to LAPACK as its transpose conj(A),
    // which has the same (real) spectrum, so no conversion is needed.
    let ni = n as i32;
    let mut w = vec![0.0f64; n];
    let mut rwork = vec![0.0f64; 3 * n.max(1)];
    let mut info = 0i32;
    let mut query = [C64::default()];
    unsafe {
        lapack_sys::zheev_(
            b"N".as_ptr() as *const _,
            b"L".as_ptr() as *const _,
            &ni,
            a.as_mut_ptr() as *mut _,
            &ni,
            w.as_mut_ptr(),
            query.as_mut_ptr() as *mut _,
            &(-1i32),
            rwork.as_mut_ptr(),
            &mut info,
        );
    }
    let lwork = (query[0].re as i32).max(2 * ni);
    let mut work = vec![C64::default(); lwork as usize];
    unsafe {
        lapack_sys::zheev_(
            b"N".as_ptr() as *const _,
            b"L".as_ptr() as *const _,
            &ni,
            a.as_mut_ptr() as *mut _,
            &ni,
            w.as_mut_ptr(),
            work.as_mut_ptr() as *mut _,
            &lwork,
            rwork.as_mut_ptr(),
            &mut info,
        );
    }
    lapack_status("zheev", info)?;
    Ok(w)
}

/// Right eigenpairs of a general complex matrix.
pub struct EigPairs {
    pub values: Vec<C64>,
    /// vectors[k] is the unit right eigenvector for values[k].
    pub vectors: Vec<Vec<C64>>,
}

/// All eigenvalues and right eigenvectors of an n×n complex matrix
/// (row-major input).
pub fn eig_general(a: &[C64], n: usize) -> Result<EigPairs> {
    assert_eq!(a.len(), n * n);
    if n == 0 {
        return Ok(EigPairs { values: Vec::new(), vectors: Vec::new() });
    }
    let ni = n as i32;
    let mut col = transpose(a, n, n);
    let mut values = vec![C64::default(); n];
    let mut vr = vec![C64::default(); n * n];
    let mut rwork = vec![0.0f64; 2 * n];
    let mut info = 0i32;
    let ldvl = 1i32;
    let mut query = [C64::default()];
    macro_rules! call {
        ($work:expr, $lwork:expr) => {
            unsafe {
                lapack_sys::zgeev_(
                    b"N".as_ptr() as *const _,
                    b"V".as_ptr() as *const _,
                    &ni,
                    col.as_mut_ptr() as *mut _,
                    &ni,
                    values.as_mut_ptr() as *mut _,
                    std::ptr::null_mut(),
                    &ldvl,
                    vr.as_mut_ptr() as *mut _,
                    &ni,
                    $work as *mut _,
                    &$lwork,
                    rwork.as_mut_ptr(),
                    &mut info,
                );
            }
        };
    }
    call!(query.as_mut_ptr(), -1i32);
    let lwork = (query[0].re as i32).max(4 * ni);
    let mut work = vec![C64::default(); lwork as usize];
    call!(work.as_mut_ptr(), lwork);
    lapack_status("zgeev", info)?;
    let vectors = (0..n).map(|k| vr[k * n..(k + 1) * n].to_vec()).collect();
    Ok(EigPairs { values, vectors })
}

/// Solves A X = B for a dense n×n system (row-major A); each entry of `rhs`
/// is one right-hand-side vector, solved in place of the returned columns.
pub fn solve_linear(a: &[C64], n: usize, rhs: &[Vec<C64>]) -> Result<Vec<Vec<C64>>> {
    assert_eq!(a.len(), n * n);
    let nrhs = rhs.len();
    if n == 0 || nrhs == 0 {
        return Ok(vec![Vec::new(); nrhs]);
    }
    let ni = n as i32;
    let mut col = transpose(a, n, n);
    let mut b = Vec::with_capacity(n * nrhs);
    for r in rhs {
        assert_eq!(r.len(), n);
        b.extend_from_slice(r);
    }
    let mut ipiv = vec![0i32; n];
    let mut info = 0i32;
    unsafe {
        lapack_sys::zgesv_(
            &ni,
            &(nrhs as i32),
            col.as_mut_ptr() as *mut _,
            &ni,
            ipiv.as_mut_ptr(),
            b.as_mut_ptr() as *mut _,
            &ni,
            &mut info,
        );
    }
    lapack_status("zgesv", info)?;
    Ok((0..nrhs).map(|k| b[k * n..(k + 1) * n].to_vec()).collect())
}

/// Complex Schur decomposition A = Q T Q† (T upper triangular), row-major.
pub struct SchurForm {
    pub t: Vec<C64>,
    pub q: Vec<C64>,
    /// diag(T): the eigenvalues in Schur order.
    pub values: Vec<C64>,
}

/// Unsorted complex Schur form of a row-major n×n matrix (zgees).
pub fn schur(a: &[C64], n: usize) -> Result<SchurForm> {
    assert_eq!(a.len(), n * n);
    let ni = n as i32;
    let mut t = transpose(a, n, n);
    let mut q = vec![C64::default(); n * n];
    let mut values = vec![C64::default(); n];
    let mut rwork = vec![0.0f64; n.max(1)];
    let mut sdim = 0i32;
    let mut info = 0i32;
    let lwork = (4 * n.max(1)) as i32;
    let mut work = vec![C64::default(); lwork as usize];
    unsafe {
        lapack_sys::zgees_(
            b"V".as_ptr() as *const _,
            b"N".as_ptr() as *const _,
            None,
            &ni,
            t.as_mut_ptr() as *mut _,
            &ni,
            &mut sdim,
            values.as_mut_ptr() as *mut _,
            q.as_mut_ptr() as *mut _,
            &ni,
            work.as_mut_ptr() as *mut _,
            &lwork,
            rwork.as_mut_ptr(),
            std::ptr::null_mut(),
            &mut info,
        );
    }
    lapack_status("zgees", info)?;
    Ok(SchurForm { t: transpose(&t, n, n), q: transpose(&q, n, n), values })
}

/// Reorders a Schur form so the eigenvalues with `select[i] = true` occupy
/// the leading block, updating T and Q consistently (ztrsen).
pub fn schur_reorder(form: &SchurForm, n: usize, select: &[bool]) -> Result<SchurForm> {
    assert_eq!(select.len(), n);
    let ni = n as i32;
    let mut t = transpose(&form.t, n, n);
    let mut q = transpose(&form.q, n, n);
    let sel: Vec<i32> = select.iter().map(|&s| s as i32).collect();
    let mut values = vec![C64::default(); n];
    let mut m_out = 0i32;
    let mut info = 0i32;
    let lwork = (n * n).max(1) as i32;
    let mut work = vec![C64::default(); lwork as usize];
    unsafe {
        lapack_sys::ztrsen_(
            b"N".as_ptr() as *const _,
            b"V".as_ptr() as *const _,
            sel.as_ptr(),
            &ni,
            t.as_mut_ptr() as *mut _,
            &ni,
            q.as_mut_ptr() as *mut _,
            &ni,
            values.as_mut_ptr() as *mut _,
            &mut m_out,
            std::ptr::null_mut(),
            std::ptr::null_mut(),
            work.as_mut_ptr() as *mut _,
            &lwork,
            &mut info,
        );
    }
    lapack_status("ztrsen", info)?;
    Ok(SchurForm { t: transpose(&t, n, n), q: transpose(&q, n, n), values })
}

fn transpose(a: &[C64], rows: usize, cols: usize) -> Vec<C64> {
    let mut t = vec![C64::default(); a.len()];
    for i in 0..rows {
        for j in 0..cols {
            t[j * rows + i] = a[i * cols + j];
        }
    }
    t
}

fn lapack_status(routine: &str, info: i32) -> Result<()> {
    if info < 0 {
        panic!("{routine}: illegal argument {}", -info);
    }
    if info > 0 {
        return Err(Error::non_convergence(format!(
            "{routine} failed to converge (info = {info})"
        )));
    }
    Ok(())
}
