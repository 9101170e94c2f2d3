/// A read-only strided matrix view.
#[derive(Clone, Copy)]
pub(crate) struct Mat<'a> {
    data: &'a [f64],
    rs: usize,
    cs: usize,
}

impl<'a> Mat<'a> {
    /// Row-major storage with `ncols` columns.
    pub(crate) fn rows(data: &'a [f64], ncols: usize) -> Self {
        Mat { data, rs: ncols, cs: 1 }
    }

    /// The transpose of row-major storage with `ncols` columns.
    pub(crate) fn cols(data: &'a [f64], ncols: usize) -> Self {
        Mat { data, rs: 1, cs: ncols }
    }

    fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.rs + j * self.cs]
    }
}

/// Below this many multiply-adds the packing overhead of the blocked kernel
/// outweighs its speed.
const SMALL_GEMM: usize = 8192;

/// `c ← a·b + beta·c` with `a` m×k, `b` k×n and `c` row-major m×n.
pub(crate) fn gemm(m: usize, k: usize, n: usize, a: Mat<'_>, b: Mat<'_>, c: &mut [f64], beta: f64) {
    assert!(c.len() >= m * n);
    if m == 0 || n == 0 {
        return;
    }
    if k > 0 {
        let max = |mat: &Mat<'_>, r: usize, cc: usize| (r - 1) * mat.rs + (cc - 1) * mat.cs;
        assert!(max(&a, m, k) < a.data.len() && max(&b, k, n) < b.data.len());
    }
    if m * k * n <= SMALL_GEMM {
        if beta == 0.0 {
            c[..m * n].fill(0.0);
        } else {
            c[..m * n].iter_mut().for_each(|v| *v *= beta);
        }
        for i in 0..m {
            let row = &mut c[i * n..][..n];
            for l in 0..k {
                let x = a.at(i, l);
                if b.cs == 1 {
                    let brow = &b.data[l * b.rs..][..n];
                    row.iter_mut().zip(brow).for_each(|(dst, y)| *dst += x * y);
                } else {
                    row.iter_mut().enumerate().for_each(|(j, dst)| *dst += x * b.at(l, j));
                }
            }
        }
        return;
    }
    // SAFETY: the asserts above keep every addressed element of `a`, `b`
    // and `c` in bounds for the given strides.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.data.as_ptr(),
            a.rs as isize,
            a.cs as isize,
            b.data.as_ptr(),
            b.rs as isize,
            b.cs as isize,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}
