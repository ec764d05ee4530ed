//! Batched matrix products over the last two axes.
//!
//! `(b, c, m, k) x (b, c, k, n) -> (b, c, m, n)`, with optional transposition
//! of either operand so attention can form `Q·Kᵀ` without a copy.

use super::gemm::{gemm, MatRef};
use crate::error::{ensure, Result};
use crate::tensor::{Shape, Tensor};

pub fn matmul_shape(a: Shape, ta: bool, b: Shape, tb: bool) -> Result<Shape> {
    ensure!(
        a.b() == b.b() && a.c() == b.c(),
        "matmul batch dimensions differ: {a} vs {b}"
    );
    let (m, k) = if ta { (a.w(), a.h()) } else { (a.h(), a.w()) };
    let (k2, n) = if tb { (b.w(), b.h()) } else { (b.h(), b.w()) };
    ensure!(k == k2, "matmul inner dimensions differ: {a} vs {b} ({k} != {k2})");
    Ok(Shape::new(a.b(), a.c(), m, n))
}

/// `op(a) · op(b)` where `op` optionally transposes the trailing matrix.
pub fn matmul_ex(a: &Tensor, ta: bool, b: &Tensor, tb: bool) -> Result<Tensor> {
    let out_shape = matmul_shape(a.shape(), ta, b.shape(), tb)?;
    let mut out = Tensor::zeros(out_shape);
    let (ar, ac) = (a.shape().h(), a.shape().w());
    let (br, bc) = (b.shape().h(), b.shape().w());
    let (m, n) = (out_shape.h(), out_shape.w());
    for i in 0..out_shape.batch_count() {
        let am = MatRef::new(&a.data()[i * ar * ac..][..ar * ac], ar, ac).t_if(ta);
        let bm = MatRef::new(&b.data()[i * br * bc..][..br * bc], br, bc).t_if(tb);
        gemm(am, bm, &mut out.data_mut()[i * m * n..][..m * n], 0.0);
    }
    Ok(out)
}

pub fn matmul(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    matmul_ex(a, false, b, false)
}

/// Gradients of `c = op(a)·op(b)` given `dc`.
pub fn matmul_backward(
    a: &Tensor,
    ta: bool,
    b: &Tensor,
    tb: bool,
    dc: &Tensor,
    need_da: bool,
    need_db: bool,
) -> Result<(Option<Tensor>, Option<Tensor>)> {
    // C = A B    : dA = dC Bᵀ      dB = Aᵀ dC
    // C = A Bᵀ   : dA = dC B       dB = dCᵀ A
    // C = Aᵀ B   : dA = B dCᵀ      dB = A dC
    // C = Aᵀ Bᵀ  : dA = Bᵀ dCᵀ     dB = dCᵀ Aᵀ
    let da = if need_da {
        Some(if ta {
            matmul_ex(b, tb, dc, true)?
        } else {
            matmul_ex(dc, false, b, !tb)?
        })
    } else {
        None
    };
    let db = if need_db {
        Some(if tb {
            matmul_ex(dc, true, a, ta)?
        } else {
            matmul_ex(a, !ta, dc, false)?
        })
    } else {
        None
    };
    debug_assert!(da.as_ref().is_none_or(|t| t.shape() == a.shape()));
    debug_assert!(db.as_ref().is_none_or(|t| t.shape() == b.shape()));
    Ok((da, db))
}
