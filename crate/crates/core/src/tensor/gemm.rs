//! Single-precision matrix multiply.
//!
//! Both operands are packed into narrow panels and multiplied by a register
//! tiled micro-kernel. Each output element is accumulated from zero over the
//! inner dimension in ascending order, so results do not depend on the tiling
//! and repeated calls are bit-identical.

use super::Tensor;
use crate::error::{Error, Result};

const MR: usize = 4;
const NR: usize = 8;

/// `A [m, k] x B [k, n] -> [m, n]`.
pub fn gemm(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let (m, k) = match a.shape() {
        [m, k] => (*m, *k),
        s => return Err(Error::shape(format!("gemm lhs must be 2-D, got {s:?}"))),
    };
    let (k2, n) = match b.shape() {
        [k2, n] => (*k2, *n),
        s => return Err(Error::shape(format!("gemm rhs must be 2-D, got {s:?}"))),
    };
    if k != k2 {
        return Err(Error::shape(format!(
            "gemm inner dimensions differ: [{m}, {k}] x [{k2}, {n}]"
        )));
    }
    let mut out = vec![0.0f32; m * n];
    gemm_slices(m, k, n, a.data(), b.data(), &mut out);
    Tensor::new(vec![m, n], out)
}

/// Raw-slice form used by the convolution and fully connected layers.
/// Overwrites `c` with `a * b`.
pub fn gemm_slices(m: usize, k: usize, n: usize, a: &[f32], b: &[f32], c: &mut [f32]) {
    assert_eq!(a.len(), m * k, "lhs length");
    assert_eq!(b.len(), k * n, "rhs length");
    assert_eq!(c.len(), m * n, "output length");
    if m == 0 || n == 0 {
        return;
    }
    if k == 0 {
        c.fill(0.0);
        return;
    }

    let packed_b = pack_b(k, n, b);
    let n_panels = n.div_ceil(NR);
    let mut packed_a = vec![0.0f32; k * MR];

    for i0 in (0..m).step_by(MR) {
        let rows = MR.min(m - i0);
        pack_a_panel(k, a, i0, rows, &mut packed_a);
        for jp in 0..n_panels {
            let j0 = jp * NR;
            let cols = NR.min(n - j0);
            let panel = &packed_b[jp * k * NR..(jp + 1) * k * NR];
            let acc = micro_kernel(k, &packed_a, panel);
            for r in 0..rows {
                let dst = &mut c[(i0 + r) * n + j0..(i0 + r) * n + j0 + cols];
                dst.copy_from_slice(&acc[r][..cols]);
            }
        }
    }
}

/// `B` rearranged into column panels of width `NR`, each stored `[k][NR]`,
/// zero-padded on the right edge.
fn pack_b(k: usize, n: usize, b: &[f32]) -> Vec<f32> {
    let n_panels = n.div_ceil(NR);
    let mut packed = vec![0.0f32; n_panels * k * NR];
    for jp in 0..n_panels {
        let j0 = jp * NR;
        let cols = NR.min(n - j0);
        let panel = &mut packed[jp * k * NR..(jp + 1) * k * NR];
        for p in 0..k {
            panel[p * NR..p * NR + cols].copy_from_slice(&b[p * n + j0..p * n + j0 + cols]);
        }
    }
    packed
}

fn pack_a_panel(k: usize, a: &[f32], i0: usize, rows: usize, packed: &mut [f32]) {
    packed.fill(0.0);
    for r in 0..rows {
        let src = &a[(i0 + r) * k..(i0 + r + 1) * k];
        for (p, &v) in src.iter().enumerate() {
            packed[p * MR + r] = v;
        }
    }
}

#[inline(always)]
fn micro_kernel(k: usize, a: &[f32], b: &[f32]) -> [[f32; NR]; MR] {
    let mut acc = [[0.0f32; NR]; MR];
    for (av, bv) in a.chunks_exact(MR).zip(b.chunks_exact(NR)).take(k) {
        for r in 0..MR {
            let x = av[r];
            for j in 0..NR {
                acc[r][j] += x * bv[j];
            }
        }
    }
    acc
}
