//! Blocked, symmetric pairwise squared-distance kernel.
//!
//! Points are packed into panels of [`LANES`] rows stored dimension-major
//! (`panel[d * LANES + lane]`) and widened to `f64` once. Each unordered
//! pair of panels is visited exactly once; the resulting 8x8 distance tile
//! updates the running minimum of both its rows and its columns.
//!
//! Every pair distance is the sequential sum over `d = 0..D` of
//! `(x_r[d] - x_c[d])^2` in `f64`, the same expression the naive scan
//! evaluates, so the values are bit-identical to it. The per-row minimum is
//! the lexicographic minimum of `(distance, index)`, which does not depend
//! on the order in which tiles are merged.

use rayon::prelude::*;

pub(crate) const LANES: usize = 8;
/// Panels per scheduling block (64 rows).
const BLOCK_PANELS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Best {
    pub dist: f64,
    pub idx: usize,
}

impl Best {
    pub const NONE: Best = Best {
        dist: f64::INFINITY,
        idx: usize::MAX,
    };

    #[inline(always)]
    pub fn offer(&mut self, dist: f64, idx: usize) {
        if dist < self.dist || (dist == self.dist && idx < self.idx) {
            self.dist = dist;
            self.idx = idx;
        }
    }

    #[inline(always)]
    fn merge(&mut self, other: Best) {
        self.offer(other.dist, other.idx);
    }
}

struct Panels {
    data: Vec<f64>,
    dim: usize,
    rows: usize,
    count: usize,
}

impl Panels {
    fn pack(points: &[f32], dim: usize) -> Self {
        let rows = points.len() / dim;
        let count = rows.div_ceil(LANES);
        let mut data = vec![0.0f64; count * dim * LANES];
        for (r, row) in points.chunks_exact(dim).enumerate() {
            let base = (r / LANES) * dim * LANES + r % LANES;
            for (d, &v) in row.iter().enumerate() {
                data[base + d * LANES] = f64::from(v);
            }
        }
        Self {
            data,
            dim,
            rows,
            count,
        }
    }

    #[inline(always)]
    fn panel(&self, p: usize) -> &[f64] {
        let len = self.dim * LANES;
        &self.data[p * len..(p + 1) * len]
    }

    #[inline(always)]
    fn valid_lanes(&self, p: usize) -> usize {
        (self.rows - p * LANES).min(LANES)
    }
}

/// Squared distances between the rows of panel `a` (outer index) and
/// panel `b` (inner index).
///
/// The vector variants evaluate exactly the same sequence of IEEE
/// subtractions, multiplications and additions as this one (no fused
/// multiply-add), so all variants agree bit for bit.
#[inline(always)]
fn tile_portable(a: &[f64], b: &[f64], dim: usize) -> [[f64; LANES]; LANES] {
    let mut acc = [[0.0f64; LANES]; LANES];
    for (ua, vb) in a.chunks_exact(LANES).zip(b.chunks_exact(LANES)).take(dim) {
        for r in 0..LANES {
            let x = ua[r];
            for l in 0..LANES {
                let diff = x - vb[l];
                acc[r][l] += diff * diff;
            }
        }
    }
    acc
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx512f")]
fn tile_avx512(a: &[f64], b: &[f64], dim: usize) -> [[f64; LANES]; LANES] {
    use std::arch::x86_64::*;
    assert!(a.len() >= dim * LANES && b.len() >= dim * LANES);
    let mut acc = [_mm512_setzero_pd(); LANES];
    for d in 0..dim {
        // SAFETY: d * LANES + LANES <= dim * LANES, checked above.
        let v = unsafe { _mm512_loadu_pd(b.as_ptr().add(d * LANES)) };
        for (r, slot) in acc.iter_mut().enumerate() {
            let x = _mm512_set1_pd(a[d * LANES + r]);
            let diff = _mm512_sub_pd(x, v);
            *slot = _mm512_add_pd(*slot, _mm512_mul_pd(diff, diff));
        }
    }
    let mut out = [[0.0f64; LANES]; LANES];
    for (row, slot) in out.iter_mut().zip(acc) {
        // SAFETY: `row` holds exactly eight f64 values.
        unsafe { _mm512_storeu_pd(row.as_mut_ptr(), slot) };
    }
    out
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2")]
fn tile_avx2(a: &[f64], b: &[f64], dim: usize) -> [[f64; LANES]; LANES] {
    use std::arch::x86_64::*;
    assert!(a.len() >= dim * LANES && b.len() >= dim * LANES);
    let mut lo = [_mm256_setzero_pd(); LANES];
    let mut hi = [_mm256_setzero_pd(); LANES];
    for d in 0..dim {
        // SAFETY: d * LANES + LANES <= dim * LANES, checked above.
        let (v0, v1) = unsafe {
            let p = b.as_ptr().add(d * LANES);
            (_mm256_loadu_pd(p), _mm256_loadu_pd(p.add(4)))
        };
        for r in 0..LANES {
            let x = _mm256_set1_pd(a[d * LANES + r]);
            let d0 = _mm256_sub_pd(x, v0);
            let d1 = _mm256_sub_pd(x, v1);
            lo[r] = _mm256_add_pd(lo[r], _mm256_mul_pd(d0, d0));
            hi[r] = _mm256_add_pd(hi[r], _mm256_mul_pd(d1, d1));
        }
    }
    let mut out = [[0.0f64; LANES]; LANES];
    for r in 0..LANES {
        // SAFETY: each row holds eight f64 values; the halves are 4 wide.
        unsafe {
            _mm256_storeu_pd(out[r].as_mut_ptr(), lo[r]);
            _mm256_storeu_pd(out[r].as_mut_ptr().add(4), hi[r]);
        }
    }
    out
}

#[inline(always)]
#[allow(clippy::needless_range_loop)]
fn block_pair_body(
    panels: &Panels,
    bi: usize,
    bj: usize,
    best: &mut [Best],
    tile: impl Fn(&[f64], &[f64], usize) -> [[f64; LANES]; LANES],
) {
    let rows_a = bi * BLOCK_PANELS..((bi + 1) * BLOCK_PANELS).min(panels.count);
    let rows_b = bj * BLOCK_PANELS..((bj + 1) * BLOCK_PANELS).min(panels.count);
    for pi in rows_a {
        let a = panels.panel(pi);
        let va = panels.valid_lanes(pi);
        for pj in rows_b.clone().filter(|&pj| pj >= pi) {
            let dists = tile(a, panels.panel(pj), panels.dim);
            let vb = panels.valid_lanes(pj);
            if pi == pj {
                for r in 0..va {
                    let row = pi * LANES + r;
                    for c in (0..vb).filter(|&c| c != r) {
                        best[row].offer(dists[r][c], pj * LANES + c);
                    }
                }
            } else {
                for r in 0..va {
                    let row = pi * LANES + r;
                    for c in 0..vb {
                        let col = pj * LANES + c;
                        best[row].offer(dists[r][c], col);
                        best[col].offer(dists[r][c], row);
                    }
                }
            }
        }
    }
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx512f")]
fn block_pair_avx512(panels: &Panels, bi: usize, bj: usize, best: &mut [Best]) {
    block_pair_body(panels, bi, bj, best, |a, b, d| tile_avx512(a, b, d))
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2")]
fn block_pair_avx2(panels: &Panels, bi: usize, bj: usize, best: &mut [Best]) {
    block_pair_body(panels, bi, bj, best, |a, b, d| tile_avx2(a, b, d))
}

#[derive(Clone, Copy)]
enum Isa {
    #[cfg(target_arch = "x86_64")]
    Avx512,
    #[cfg(target_arch = "x86_64")]
    Avx2,
    Portable,
}

impl Isa {
    fn detect() -> Self {
        #[cfg(target_arch = "x86_64")]
        {
            if std::arch::is_x86_feature_detected!("avx512f") {
                return Isa::Avx512;
            }
            if std::arch::is_x86_feature_detected!("avx2") {
                return Isa::Avx2;
            }
        }
        Isa::Portable
    }

    fn block_pair(self, panels: &Panels, bi: usize, bj: usize, best: &mut [Best]) {
        match self {
            // SAFETY: the feature was detected at runtime before selecting this variant.
            #[cfg(target_arch = "x86_64")]
            Isa::Avx512 => unsafe { block_pair_avx512(panels, bi, bj, best) },
            // SAFETY: as above.
            #[cfg(target_arch = "x86_64")]
            Isa::Avx2 => unsafe { block_pair_avx2(panels, bi, bj, best) },
            Isa::Portable => block_pair_body(panels, bi, bj, best, tile_portable),
        }
    }
}

/// Exact nearest neighbor (excluding self) of every row, smallest index on
/// ties. Runs on the current rayon pool; the result does not depend on its
/// size.
pub(crate) fn nearest(points: &[f32], dim: usize) -> Vec<Best> {
    let panels = Panels::pack(points, dim);
    let rows = panels.rows;
    let blocks = panels.count.div_ceil(BLOCK_PANELS);
    let pairs: Vec<(usize, usize)> = (0..blocks)
        .flat_map(|i| (i..blocks).map(move |j| (i, j)))
        .collect();
    let isa = Isa::detect();
    pairs
        .par_iter()
        .fold(
            || vec![Best::NONE; rows],
            |mut best, &(bi, bj)| {
                isa.block_pair(&panels, bi, bj, &mut best);
                best
            },
        )
        .reduce_with(|mut a, b| {
            for (x, y) in a.iter_mut().zip(b) {
                x.merge(y);
            }
            a
        })
        .unwrap_or_else(|| vec![Best::NONE; rows])
}
